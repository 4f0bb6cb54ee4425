import math

import numpy as np
import pytest

from src.cone_profiles import solve_cap
from src.errors import CertificationError, DataCorruptionError, PreconditionError
from src.expansion import (
    DegenerateOperator,
    SupersolutionInputs,
    build_cutoff_c,
    case_constants,
    certified_radius,
    compute_F,
    cutoff_radius,
    first_order_coefficient,
    inner_coefficient,
    outer_coefficient,
    residual_floor,
    select_case,
    solve_L0,
    source_slope,
    supersolution_build,
)
from src.geometry import example1_map, example5_map, identity_map
from src.section_grid import SectionGrid
from src.spectral import eigen_solve


# ======================================================================
# Cutoff coefficient
# ======================================================================

@pytest.mark.parametrize("n", [3, 4, 5])
def test_cutoff_never_exceeds_outer_bound(n):
    rho = np.linspace(0.0, 3.0, 601)
    c = build_cutoff_c(rho, n)
    assert np.all(c <= outer_coefficient(rho, n) + 1e-12)


def test_cutoff_is_inner_formula_near_boundary():
    rho = np.linspace(0.0, 0.85 * cutoff_radius(3), 50)
    assert np.allclose(build_cutoff_c(rho, 3), inner_coefficient(rho, 3))


def test_cutoff_is_outer_formula_far_out():
    rho = np.linspace(cutoff_radius(3), 2.0 * cutoff_radius(3), 50)
    assert np.allclose(build_cutoff_c(rho, 3), outer_coefficient(rho, 3))


def test_cutoff_ceiling():
    with pytest.raises(DataCorruptionError):
        build_cutoff_c(np.array([0.5, 2.0]), 3, ceiling=math.sqrt(2.0))
    with pytest.raises(PreconditionError):
        build_cutoff_c(np.array([0.5]), 3, band=1.5)


# ======================================================================
# Degenerate solve
# ======================================================================

@pytest.fixture(scope="module")
def cap_setup(hemisphere_profile):
    section = SectionGrid.cap(3, hemisphere_profile.alpha, hemisphere_profile.N)
    rho = hemisphere_profile.rho
    xi = np.where(section.free, hemisphere_profile.xi, 1.0)
    return section, rho, xi


def test_solve_L0_with_zero_data(cap_setup):
    section, rho, xi = cap_setup
    op = DegenerateOperator(section, rho, build_cutoff_c(np.where(section.free, rho, 0.0), 3))
    result = solve_L0(op, np.zeros_like(rho), xi, 0.75)
    assert np.all(result.solution == 0.0)
    assert result.ratio == 0.0


def test_solve_L0_rejects_bad_supersolution(cap_setup):
    section, rho, xi = cap_setup
    op = DegenerateOperator(section, rho, np.full_like(rho, 10.0))
    with pytest.raises(CertificationError):
        solve_L0(op, rho ** 2, xi, 0.75)


def test_solve_L0_rejects_nonpositive_psi(cap_setup):
    section, rho, _ = cap_setup
    op = DegenerateOperator(section, rho, -np.ones_like(rho))
    with pytest.raises(PreconditionError):
        solve_L0(op, rho ** 2, np.zeros_like(rho), 0.75)


def test_ellipticity_constants(cap_setup):
    section, rho, _ = cap_setup
    op = DegenerateOperator(section, rho, -1.0, a=2.0)
    assert op.ellipticity() == (2.0, 2.0)


@pytest.fixture(scope="module")
def wide_cap():
    profile = solve_cap(3, 2.5, 64)
    section = SectionGrid.cap(3, profile.alpha, profile.N)
    return profile, section


def test_solve_L0_on_cap_wider_than_hemisphere(wide_cap):
    profile, section = wide_cap
    free = section.free
    rho = profile.rho
    xi = np.where(free, profile.xi, 1.0)
    op = DegenerateOperator(section, rho, build_cutoff_c(np.where(free, rho, 0.0), 3))
    f = np.where(free, rho ** 2 * xi ** 5, 0.0)
    result = solve_L0(op, f, xi, 0.75)
    assert result.supersolution_margin < 0.375
    expected = 0.75 - result.supersolution_margin if result.supersolution_margin > 1e-6 else 0.75
    assert result.delta == pytest.approx(expected)
    assert result.bound == pytest.approx(1.0 / result.delta, rel=1e-6)
    assert result.ratio <= result.bound * 1.05


# ======================================================================
# Source term and first-order coefficient
# ======================================================================

def test_identity_map_has_no_source(hemisphere_profile):
    source = compute_F(identity_map(3), hemisphere_profile)
    assert np.all(source.values == 0.0)
    assert source.bound == 0.0


def test_axisymmetric_bending_has_no_source(hemisphere_profile):
    source = compute_F(example1_map(0.05), hemisphere_profile, [0.0, 1.0])
    assert np.all(source.values == 0.0)
    assert source.homogeneity_error == 0.0
    assert source.bound == 0.0


def test_example5_source_is_homogeneous(hemisphere_profile):
    phi = 2.0 * math.pi * np.arange(8) / 8
    source = compute_F(example5_map(3), hemisphere_profile, phi)
    assert source.values.shape == (len(hemisphere_profile.theta), 8)
    assert source.homogeneity_error < 1e-10
    assert np.all(source.values[~source.interior] == 0.0)
    assert np.max(np.abs(source.values)) > 0.0


def test_source_slope_of_exact_power():
    xi = np.linspace(1.0, 10.0, 20)
    assert source_slope(3.0 * xi ** 4, xi, np.ones(20, dtype=bool)) == pytest.approx(4.0)


def test_compute_F_needs_a_cap(wedge_profile):
    with pytest.raises(PreconditionError):
        compute_F(identity_map(3), wedge_profile)


def test_first_order_coefficient_is_linear(hemisphere_profile, cap_setup):
    section, rho, xi = cap_setup
    source = compute_F(example5_map(3), hemisphere_profile)
    basis = eigen_solve(section, rho, 3, k=6)
    F = source.meridian(0)
    single = first_order_coefficient(section, rho, hemisphere_profile.xi, F, basis, 3, resolvent_method="direct")
    double = first_order_coefficient(section, rho, hemisphere_profile.xi, 2.0 * F, basis, 3, resolvent_method="direct")
    scale = np.max(np.abs(single.xi1))
    assert scale > 0
    assert np.max(np.abs(double.xi1 - 2.0 * single.xi1)) <= 1e-8 * scale
    assert np.all(single.xi1[~section.free] == 0.0)
    assert "c1_sup" in single.bounds


# ======================================================================
# Remainder cases
# ======================================================================

@pytest.mark.parametrize("mu, expected", [(3.0, (1, False)), (2.01, (2, True)), (1.5, (3, False))])
def test_select_case(mu, expected):
    assert select_case(mu) == expected


def test_cone_solution_alone_is_an_exact_solution(hemisphere_profile):
    phi1 = np.cos(hemisphere_profile.theta) ** 2.5
    inputs = SupersolutionInputs(hemisphere_profile, phi1, 8.75)
    report = supersolution_build(1, inputs, 0.0, 0.0, samples=50)
    assert abs(report.max_residual) < 1e-2


def test_supersolution_inputs_check_lengths(hemisphere_profile):
    with pytest.raises(PreconditionError):
        SupersolutionInputs(hemisphere_profile, np.ones(3), 8.75)


def test_case3_supersolution_on_wide_cap(wide_cap):
    profile, section = wide_cap
    pair = eigen_solve(section, profile.rho, 3, k=1)[0]
    inputs = SupersolutionInputs(profile, pair.vector, pair.eigenvalue)
    assert inputs.mu < 2.0
    assert select_case(inputs.mu) == (3, False)
    constants = case_constants(inputs, 3, 0.0)
    slack = 1e-3 + residual_floor(inputs)
    radius = certified_radius(3, inputs, constants["A0"], constants["A1"], samples=100, slack=slack)
    report = supersolution_build(3, inputs, constants["A0"], constants["A1"], r_max=radius, samples=100, slack=slack)
    assert report.certified
    assert report.max_residual <= slack


def test_bare_cone_residual_floor(hemisphere_profile):
    phi1 = np.cos(hemisphere_profile.theta) ** 2.5
    assert residual_floor(SupersolutionInputs(hemisphere_profile, phi1, 8.75)) < 1e-2

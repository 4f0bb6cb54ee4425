import math

import numpy as np
import pytest

from src.cone_profiles import (
    cone_solution_cartesian,
    eval_cone_solution,
    f_V,
    solve_cap,
    solve_wedge,
)
from src.errors import DomainError, PreconditionError


# ======================================================================
# Exact cases
# ======================================================================

def test_half_plane_is_sine():
    profile = solve_wedge(math.pi, 64, extrapolate=True)
    assert np.max(np.abs(profile.rho - np.sin(profile.theta))) < 1e-4
    assert profile.extrapolated


def test_hemisphere_is_cosine(hemisphere_profile):
    assert np.max(np.abs(hemisphere_profile.rho - np.cos(hemisphere_profile.theta))) < 5e-3


def test_extrapolated_hemisphere():
    profile = solve_cap(3, math.pi / 2, 64, extrapolate=True)
    assert np.max(np.abs(profile.rho - np.cos(profile.theta))) < 1e-3


# ======================================================================
# Qualitative properties
# ======================================================================

def test_wedge_profile_is_symmetric(wedge_profile):
    assert np.allclose(wedge_profile.rho, wedge_profile.rho[::-1], atol=1e-10)


def test_wedge_boundary_conditions(wedge_profile):
    assert wedge_profile.rho[0] == 0.0
    assert wedge_profile.rho[-1] == 0.0
    assert np.all(wedge_profile.rho[1:-1] > 0)
    for slope in wedge_profile.boundary_slopes():
        assert slope == pytest.approx(1.0, abs=1e-2)


def test_cap_profile(cap_profile):
    assert cap_profile.residual < 1e-6
    assert cap_profile.rho[-1] == 0.0
    c3, c4 = cap_profile.rho_bounds()
    assert 0.0 < c3 <= 1.01
    assert c4 >= 0.99
    assert len(cap_profile.boundary_slopes()) == 1
    assert cap_profile.endpoint_kinds == ("regular-center", "vanishing")


def test_xi_blows_up_at_boundary(cap_profile):
    xi = cap_profile.xi
    assert math.isinf(xi[-1])
    assert np.all(np.isfinite(xi[:-1]))


def test_metadata_keys(cap_profile):
    meta = cap_profile.metadata()
    for key in ("kind", "n", "alpha", "N", "residual", "c3", "c4", "boundary_slopes"):
        assert key in meta


def test_higher_dimensional_cap():
    profile = solve_cap(4, math.pi / 3, 64)
    assert profile.exponent == 1.0
    assert np.all(profile.rho[:-1] > 0)


# ======================================================================
# Preconditions
# ======================================================================

@pytest.mark.parametrize("alpha, N", [(0.0, 64), (4.0, 64), (1.0, 32)])
def test_wedge_preconditions(alpha, N):
    with pytest.raises(PreconditionError):
        solve_wedge(alpha, N)


def test_cap_preconditions():
    with pytest.raises(PreconditionError):
        solve_cap(2, 1.0, 64)
    with pytest.raises(PreconditionError):
        solve_cap(3, math.pi, 64)


# ======================================================================
# Cone solution
# ======================================================================

def test_cone_solution_solves_equation():
    profile = solve_cap(3, math.pi / 3, 128)
    theta = np.array([0.2, 0.5, 0.8])
    ev = eval_cone_solution(profile, 0.5, theta)
    source = 0.75 * ev.u ** 5
    assert np.allclose(ev.laplacian, source, rtol=1e-2)


def test_cone_solution_scaling(cap_profile):
    near = eval_cone_solution(cap_profile, 0.25, 0.4).u
    far = eval_cone_solution(cap_profile, 1.0, 0.4).u
    assert near / far == pytest.approx(2.0)


def test_cartesian_matches_cone_frame(cap_profile):
    y = np.array([[0.3, 0.1, 0.8]])
    u, grad, hess = cone_solution_cartesian(cap_profile, y)
    r = np.linalg.norm(y)
    ev = eval_cone_solution(cap_profile, r, math.acos(0.8 / r))
    assert u[0] == pytest.approx(float(ev.u))
    assert np.trace(hess[0]) == pytest.approx(float(ev.laplacian))
    assert np.allclose(hess[0], hess[0].T)


def test_outside_support(cap_profile):
    with pytest.raises(DomainError):
        eval_cone_solution(cap_profile, 1.0, cap_profile.alpha + 0.1)
    with pytest.raises(PreconditionError):
        eval_cone_solution(cap_profile, 0.0, 0.1)


def test_two_distance_form_on_half_plane():
    profile = solve_wedge(math.pi, 64, extrapolate=True)
    assert f_V(profile, 1.0, 2.0) == pytest.approx(2.0 ** -0.5, rel=1e-3)


def test_two_distance_form_on_quarter_plane(wedge_profile):
    value = f_V(wedge_profile, 1.0, 1.0)
    expected = float(eval_cone_solution(wedge_profile, math.sqrt(2.0), math.pi / 4).u)
    assert value == pytest.approx(expected, rel=1e-9)


def test_two_distance_form_rejects_bad_pairs(wedge_profile):
    with pytest.raises(DomainError):
        f_V(wedge_profile, 0.0, 1.0)
    with pytest.raises(DomainError):
        f_V(wedge_profile, math.inf, 1.0)

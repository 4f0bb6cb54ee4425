import math

import numpy as np
import pytest

from src.cone_profiles import solve_cap
from src.domain_solver import (
    MeridianDomain,
    _cone_samples,
    ball_exact,
    barrier_beta,
    barrier_residual,
    barrier_search,
    face_exponent,
    ingredient_bounds,
    keller_osserman_ratio,
    ratio_profile,
    reference_profile,
    solve_axisymmetric,
    solve_ball,
)
from src.errors import PreconditionError
from src.geometry import example1_map, identity_map


# ======================================================================
# Balls
# ======================================================================

@pytest.mark.parametrize("n, s", [(3, 1.0), (4, 2.0), (5, 0.5)])
def test_ball_matches_exact_solution(n, s):
    solution = solve_ball(n, s, 64)
    r = solution.coordinates["r"]
    assert np.max(np.abs(solution.w - (s ** 2 - r ** 2) / (2.0 * s))) < 1e-8
    assert solution.u[0] == pytest.approx(float(ball_exact(n, s, 0.0)), rel=1e-8)
    assert math.isinf(solution.u[-1])
    assert solution.residual < 1e-8


def test_ball_preconditions():
    with pytest.raises(PreconditionError):
        solve_ball(3, 0.0, 64)
    with pytest.raises(PreconditionError):
        solve_ball(2, 1.0, 64)


def test_keller_osserman_on_ball():
    r = np.linspace(0.0, 0.99, 50)
    assert keller_osserman_ratio(ball_exact(3, 1.0, r), 1.0 - r, 3) <= 0.5 + 1e-12


def test_ball_frame_columns():
    frame = solve_ball(3, 1.0, 64).to_frame()
    assert list(frame.columns) == ["r", "w", "u"]


# ======================================================================
# Meridian domains
# ======================================================================

def test_meridian_domain_preconditions():
    with pytest.raises(PreconditionError):
        MeridianDomain(math.pi, identity_map(3), 1e-2, 1.0, 16, 16)
    with pytest.raises(PreconditionError):
        MeridianDomain(1.0, identity_map(3), 1.0, 0.5, 16, 16)
    with pytest.raises(PreconditionError):
        MeridianDomain(1.0, example1_map(0.2), 1e-2, 1.0, 16, 16)
    with pytest.raises(PreconditionError):
        MeridianDomain(1.0, identity_map(3), 1e-2, 1.0, 4, 16)


def test_reference_profile_shape():
    rho = reference_profile(math.pi / 2, 32)
    theta = (math.pi / 2 / 32) * np.arange(33)
    assert rho[-1] == 0.0
    assert np.max(np.abs(rho - np.cos(theta))) < 1e-2


@pytest.fixture(scope="module")
def identity_bracket():
    domain = MeridianDomain(math.pi / 3, identity_map(3), 1e-2, 1.0, 16, 16)
    return solve_axisymmetric(domain)


def test_identity_ratio_is_one(identity_bracket):
    free = identity_bracket.domain.free
    assert np.max(np.abs(identity_bracket.ratio[free] - 1.0)) < 1e-8
    assert identity_bracket.max_gap < 1e-8


def test_identity_samples(identity_bracket):
    samples = ratio_profile(identity_bracket)
    assert len(samples.d) > 0
    assert np.all(np.diff(samples.d) >= 0)
    assert np.max(samples.error) < 1e-8
    assert not samples.subtracted


def test_inner_rows_are_never_trusted(identity_bracket):
    assert not np.any(identity_bracket.trusted[:4])


def test_half_space_face_exponent():
    domain = MeridianDomain(math.pi / 2, identity_map(3), 1e-3, 1.0, 24, 16)
    bracket = solve_axisymmetric(domain)
    assert face_exponent(bracket) == pytest.approx(-0.5, abs=0.05)


def test_bent_cone_bracket():
    domain = MeridianDomain(math.pi / 3, example1_map(0.05), 1e-2, 1.0, 24, 16)
    bracket = solve_axisymmetric(domain, eps_scale=0.1, gap_tol=0.05)
    assert bracket.upper.residual < 1e-6
    assert bracket.lower.residual < 1e-6
    assert np.any(bracket.trusted)
    header = bracket.header()
    assert header["map"] == "example1:0.05"
    assert 0.0 < header["trusted_fraction"] <= 1.0
    frame = bracket.to_frame()
    assert list(frame.columns) == ["r_cyl", "z", "w", "u"]


# ======================================================================
# Barriers
# ======================================================================

@pytest.fixture(scope="module")
def barrier_profile():
    return solve_cap(3, math.pi / 2, 64)


def test_barrier_beta():
    assert barrier_beta(3) == 0.0
    assert barrier_beta(6) == pytest.approx(0.5)


def test_unperturbed_barrier_residual_vanishes(barrier_profile):
    points = _cone_samples(barrier_profile, 0.1, 50, seed=0)
    residual = barrier_residual(barrier_profile, points, 0.0, 0.0, identity_map(3))
    assert np.max(np.abs(residual)) < 1e-10


def test_ingredient_bounds(barrier_profile):
    points = _cone_samples(barrier_profile, 0.1, 100, seed=1)
    bounds = ingredient_bounds(barrier_profile, points)
    assert bounds.C1 > 0
    assert math.isfinite(bounds.C1)
    assert bounds.keller_osserman <= 1.0


def test_barrier_search_on_flat_boundary(barrier_profile):
    report = barrier_search(barrier_profile, identity_map(3), samples=100)
    assert report.certified
    assert report.max_residual <= 0.0
    assert report.to_dict()["map"] == "identity"

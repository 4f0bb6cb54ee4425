import numpy as np
import pytest

from src.substitution import (
    backsubstitution_residual,
    blowup_exponent,
    blowup_residual,
    critical_power,
    rho_residual,
    rho_to_blowup,
)


THETA = np.linspace(0.1, 3.0, 40)
WEDGE_SHIFT = -0.25


def test_exponents():
    assert blowup_exponent(3) == 0.5
    assert critical_power(3) == 5.0
    assert critical_power(4) == 3.0


def test_half_plane_profile_is_exact():
    # ρ = sin θ on the half-plane cross-section
    rho = np.sin(THETA)
    lap = -np.sin(THETA)
    grad_sq = np.cos(THETA) ** 2
    assert np.max(np.abs(rho_residual(rho, lap, grad_sq, 3, WEDGE_SHIFT))) < 1e-14
    assert np.max(np.abs(backsubstitution_residual(rho, lap, grad_sq, 3, WEDGE_SHIFT))) < 1e-13


def test_both_residual_forms_agree_on_a_non_solution():
    # ρ = 1 + θ² is not a profile; v = ρ^{-1/2} with derivatives taken by hand
    rho = 1.0 + THETA ** 2
    lap_rho = np.full_like(THETA, 2.0)
    grad_sq_rho = (2.0 * THETA) ** 2
    v = rho ** -0.5
    lap_v = -rho ** -1.5 + 3.0 * THETA ** 2 * rho ** -2.5

    from_rho = rho_residual(rho, lap_rho, grad_sq_rho, 3, WEDGE_SHIFT)
    from_v = blowup_residual(v, lap_v, 3, WEDGE_SHIFT)
    assert np.max(np.abs(from_rho)) > 0.1
    assert np.allclose(from_v, -(2.0 / 3.0) * from_rho, rtol=1e-12, atol=1e-12)
    assert np.allclose(backsubstitution_residual(rho, lap_rho, grad_sq_rho, 3, WEDGE_SHIFT), from_v,
                       rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("n, shift", [(4, 1.0), (5, 2.25)])
def test_relative_residual_scaling_in_higher_dimensions(n, shift):
    rho = 2.0 + np.cos(THETA)
    lap_rho = -np.cos(THETA)
    grad_sq_rho = np.sin(THETA) ** 2
    from_rho = rho_residual(rho, lap_rho, grad_sq_rho, n, shift)
    from_v = backsubstitution_residual(rho, lap_rho, grad_sq_rho, n, shift)
    assert np.allclose(from_v, -(2.0 / n) * from_rho, rtol=1e-12, atol=1e-12)


def test_rho_to_blowup_is_infinite_on_the_boundary():
    v = rho_to_blowup(np.array([0.0, 0.25, 1.0]), 3)
    assert np.isinf(v[0])
    assert v[1:] == pytest.approx([2.0, 1.0])

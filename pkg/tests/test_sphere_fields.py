import math

import numpy as np
import pytest

from src.cone_profiles import solve_cap, solve_wedge
from src.errors import DomainError, PreconditionError
from src.sphere_fields import (
    SphericalDomain,
    azimuthal_modes,
    boundary_slopes_2d,
    reconstruct_modes,
    rho_bounds_2d,
    solve_rho_2d,
    xi_field,
)


@pytest.fixture(scope="module")
def cap_field():
    return solve_rho_2d(SphericalDomain.cap(math.pi / 3), 64, 8)


@pytest.fixture(scope="module")
def lune_field():
    return solve_rho_2d(SphericalDomain.lune(math.pi / 2), 32, 32)


def test_cap_reduces_to_one_dimensional_scheme(cap_field):
    profile = solve_cap(3, math.pi / 3, 64)
    array = cap_field.array
    for column in range(array.shape[1]):
        assert np.allclose(array[:, column], profile.rho, atol=1e-8)


def test_cap_field_properties(cap_field):
    assert cap_field.residual < 1e-6
    c3, c4 = rho_bounds_2d(cap_field)
    assert 0.0 < c3 <= c4
    slopes = boundary_slopes_2d(cap_field)
    assert np.allclose(slopes, 1.0, atol=2e-2)


def test_lune_matches_wedge(lune_field):
    wedge = solve_wedge(math.pi / 2, 64, extrapolate=True)
    grid = lune_field.grid
    column = np.round(grid.phi / grid.h_phi).astype(int) * 2
    predicted = np.sin(grid.Theta) * wedge.rho[column]
    assert np.max(np.abs(lune_field.values - predicted)[grid.free]) < 2e-2


def test_lune_boundary_values(lune_field):
    fixed = ~lune_field.grid.free
    assert np.all(lune_field.values[fixed] == 0.0)
    assert np.all(lune_field.values[lune_field.grid.free] > 0.0)


def test_xi_field_is_infinite_on_boundary(lune_field):
    xi = xi_field(lune_field)
    assert np.all(np.isinf(xi.values[~lune_field.grid.free]))
    assert xi.name == "xi"


def test_mask_domain_matches_cap():
    alpha = math.pi / 3
    mask = SphericalDomain.from_mask(lambda Theta, phi: Theta < alpha - 1e-12, alpha)
    field = solve_rho_2d(mask, 32, 8)
    cap = solve_rho_2d(SphericalDomain.cap(alpha), 32, 8)
    assert np.allclose(field.values, cap.values, atol=1e-8)


def test_disconnected_mask_rejected():
    def two_bands(Theta, phi):
        return (np.abs(Theta - 0.3) < 0.1) | (np.abs(Theta - 0.9) < 0.1)

    with pytest.raises(DomainError):
        SphericalDomain.from_mask(two_bands, 1.2).grid(32, 8)


def test_azimuthal_modes_round_trip_on_cap(cap_field):
    modes = azimuthal_modes(cap_field, 4)
    assert len(modes) == 5
    assert np.allclose(reconstruct_modes(modes, cap_field.grid), cap_field.array, atol=1e-12)
    assert all(mode.amplitude < 1e-10 for mode in modes[1:])


def test_modes_need_a_cap(lune_field):
    with pytest.raises(PreconditionError):
        azimuthal_modes(lune_field, 2)


@pytest.mark.parametrize("spec", [{"kind": "disk", "alpha": 1.0}, {"kind": "cap", "alpha": 4.0}])
def test_bad_domain_specs(spec):
    with pytest.raises(PreconditionError):
        SphericalDomain.from_spec(spec)


def test_grid_size_floor():
    with pytest.raises(PreconditionError):
        SphericalDomain.cap(1.0).grid(2, 8)

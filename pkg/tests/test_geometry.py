import math

import numpy as np
import pytest

from src.errors import DomainError, PreconditionError
from src.geometry import (
    ConeDescription,
    example1_map,
    example5_map,
    identity_map,
    map_from_spec,
    norm_vs_distance_check,
    pushforward_error_check,
    ray_samples,
)


# ======================================================================
# Cones
# ======================================================================

def test_half_space_distance_is_height():
    cone = ConeDescription.half_space(3)
    points = np.array([[0.3, -0.2, 0.5], [1.0, 1.0, 2.0]])
    assert np.allclose(cone.boundary_distance(points), points[:, 2])


def test_cone_distance_past_right_angle_is_radius():
    cone = ConeDescription(3, "cone", 0.75 * math.pi)
    assert cone.boundary_distance(np.array([0.0, 0.0, 2.0])) == pytest.approx(2.0)


def test_wedge_contains_and_distance():
    cone = ConeDescription(3, "wedge", math.pi / 2)
    y = np.array([1.0, 2.0, 5.0])
    assert bool(cone.contains(y))
    assert cone.boundary_distance(y) == pytest.approx(1.0)
    assert not bool(cone.contains(np.array([-1.0, 2.0, 0.0])))


@pytest.mark.parametrize("kind, alpha", [("wedge", math.pi), ("cone", 0.0), ("sphere", 1.0)])
def test_bad_cone_rejected(kind, alpha):
    with pytest.raises(PreconditionError):
        ConeDescription(3, kind, alpha)


def test_dimension_two_rejected():
    with pytest.raises(PreconditionError):
        ConeDescription(2, "cone", 1.0)


# ======================================================================
# Maps
# ======================================================================

def test_identity_coefficients():
    A, B = identity_map(3).coefficients_at(np.array([[0.1, 0.2, 0.3]]))
    assert np.allclose(A, np.eye(3))
    assert np.allclose(B, 0.0)


def test_example1_inverse_round_trip():
    diffeo = example1_map(0.05)
    x = np.array([[0.1, -0.2, 0.3], [0.0, 0.0, 0.5]])
    assert np.allclose(diffeo.inverse(diffeo.forward(x)), x, atol=1e-13)


def test_example1_jacobian_matches_differences():
    diffeo = example1_map(0.05)
    x = np.array([0.2, 0.1, 0.3])
    h = 1e-6
    numeric = np.column_stack([
        (diffeo.forward(x + h * e) - diffeo.forward(x - h * e)) / (2 * h) for e in np.eye(3)
    ])
    assert np.allclose(diffeo.jacobian(x), numeric, atol=1e-8)


def test_example1_with_zero_parameter_is_identity():
    diffeo = example1_map(0.0)
    assert diffeo.name == "identity"
    x = np.array([0.3, 0.4, 0.5])
    assert np.allclose(diffeo.forward(x), x)


def test_example1_parameter_range():
    with pytest.raises(PreconditionError):
        example1_map(0.3)


def test_example1_outside_domain():
    diffeo = example1_map(0.2)
    with pytest.raises(DomainError):
        diffeo.forward(np.array([0.0, 0.0, -10.0]))


def test_example5_first_order_vector():
    _, b = example5_map(3).taylor_coefficients()
    assert np.allclose(b, 2 - 3)


def test_example5_inverse():
    diffeo = example5_map(3)
    x = np.array([0.05, -0.02, 0.04])
    assert np.allclose(diffeo.inverse(diffeo.forward(x)), x, atol=1e-12)


def test_map_from_spec():
    assert map_from_spec("identity").name == "identity"
    assert map_from_spec("example1:0.05").name == "example1:0.05"
    assert map_from_spec("example5").name == "example5"
    with pytest.raises(PreconditionError):
        map_from_spec("rotation")
    with pytest.raises(PreconditionError):
        map_from_spec("example1:abc")


# ======================================================================
# Error checks
# ======================================================================

def test_pushforward_bounds_hold():
    diffeo = example1_map(0.05)
    report = pushforward_error_check(
        diffeo,
        gradient=lambda y: 2.0 * y,
        hessian=lambda y: 2.0 * np.eye(3),
        x=[0.05, 0.02, 0.1],
    )
    assert report.satisfied
    assert report.constant > 0


def test_pushforward_outside_half_radius():
    diffeo = example1_map(0.2)
    with pytest.raises(PreconditionError):
        pushforward_error_check(diffeo, lambda y: y, lambda y: np.eye(3), [0.0, 0.0, 0.5])


def test_norm_vs_distance_along_axis():
    value = norm_vs_distance_check(example1_map(0.05), ray_samples([0, 0, 1], [0.01, 0.05, 0.1]))
    assert 0.04 < value < 0.06


def test_norm_vs_distance_identity_is_zero():
    assert norm_vs_distance_check(identity_map(3), [[0.1, 0.2, 0.3]]) == pytest.approx(0.0)


def test_norm_vs_distance_needs_samples():
    with pytest.raises(PreconditionError):
        norm_vs_distance_check(identity_map(3), [])

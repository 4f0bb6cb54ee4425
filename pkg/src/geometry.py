"""
Cone descriptions and local diffeomorphisms T between a perturbed domain and
its tangent cone, with the derivative-pushforward and norm-vs-distance checks.

All point arguments are arrays of shape (..., n); jacobians have shape
(..., n, n) and hessians (..., n, n, n) with H[i, j, k] = ∂²T^i/∂x_j∂x_k.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, Sequence, Tuple

import numpy as np

from src.errors import DomainError, NoConvergence, PreconditionError

logger = logging.getLogger(__name__)

PointMap = Callable[[np.ndarray], np.ndarray]


# ======================================================================
# Cones
# ======================================================================

@dataclass(frozen=True)
class ConeDescription:
    """
    A cone V = {rθ : r>0, θ∈Σ} with a simple section Σ.

    kind:
        "cone"      rotationally symmetric about `axis`, Σ a cap of angle alpha
        "wedge"     {0 < polar angle in the (y1, y2) plane < alpha} × ℝ^{n−2}
        "half-space" {y·axis > 0}, the cone of angle π/2
    """

    n: int
    kind: str
    alpha: float
    axis: Tuple[float, ...] = ()

    def __post_init__(self):
        if self.n < 3:
            raise PreconditionError(f"dimension must be >= 3, got {self.n}")
        if self.kind not in ("cone", "wedge", "half-space"):
            raise PreconditionError(f"unknown cone kind '{self.kind}'")
        if self.kind == "wedge" and not 0.0 < self.alpha < math.pi:
            raise PreconditionError(f"wedge angle must lie in (0, pi), got {self.alpha}")
        if self.kind == "cone" and not 0.0 < self.alpha <= math.pi:
            raise PreconditionError(f"cone angle must lie in (0, pi], got {self.alpha}")
        if self.kind == "half-space" and abs(self.alpha - math.pi / 2) > 1e-14:
            raise PreconditionError("a half-space has opening pi/2")
        if not self.axis:
            axis = np.zeros(self.n)
            axis[-1] = 1.0
            object.__setattr__(self, "axis", tuple(axis))
        norm = float(np.linalg.norm(self.axis))
        if len(self.axis) != self.n or abs(norm - 1.0) > 1e-12:
            raise PreconditionError("axis must be a unit vector of length n")

    @classmethod
    def half_space(cls, n: int) -> "ConeDescription":
        return cls(n, "half-space", math.pi / 2)

    @property
    def section_kind(self) -> str:
        """Profile family describing Σ: 'wedge' or 'cap'."""
        return "wedge" if self.kind == "wedge" else "cap"

    def polar(self, y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Radius and section angle θ (for wedges: planar radius and polar angle in the (y1, y2) plane)."""
        y = np.asarray(y, dtype=float)
        if self.kind == "wedge":
            r = np.linalg.norm(y[..., :2], axis=-1)
            theta = np.arctan2(y[..., 1], y[..., 0])
            return r, theta
        r = np.linalg.norm(y, axis=-1)
        cos = np.divide(y @ np.asarray(self.axis), r, out=np.ones_like(r), where=r > 0)
        return r, np.arccos(np.clip(cos, -1.0, 1.0))

    def contains(self, y: np.ndarray) -> np.ndarray:
        _, theta = self.polar(y)
        if self.kind == "wedge":
            return (theta > 0.0) & (theta < self.alpha)
        return theta < self.alpha

    def boundary_distance(self, y: np.ndarray) -> np.ndarray:
        """Euclidean distance from points inside V to ∂V."""
        y = np.asarray(y, dtype=float)
        if self.kind == "wedge":
            rho = np.linalg.norm(y[..., :2], axis=-1)
            theta = np.arctan2(y[..., 1], y[..., 0])
            return np.minimum(_face_distance(rho, theta), _face_distance(rho, self.alpha - theta))
        r, theta = self.polar(y)
        return _face_distance(r, self.alpha - theta)


def _face_distance(r: np.ndarray, gap: np.ndarray) -> np.ndarray:
    gap = np.asarray(gap, dtype=float)
    return np.where(gap <= math.pi / 2, r * np.sin(np.clip(gap, 0.0, None)), r)


# ======================================================================
# Diffeomorphisms
# ======================================================================

@dataclass(frozen=True)
class DiffeoMap:
    """A local diffeomorphism T near 0 with analytic first and second derivatives."""

    n: int
    forward: PointMap
    inverse: PointMap
    jacobian: PointMap
    hessian: PointMap
    regularity: str = "C3"
    validity_radius: float = math.inf
    name: str = "map"

    def taylor_coefficients(self) -> Tuple[np.ndarray, np.ndarray]:
        """
        First-order Taylor data at 0 of the pulled-back operator.

        Returns:
            a[i, j, k] = ∂_k(T^i_l T^j_l)(0) and b[i] = Δ T^i(0)
        """
        H = self.hessian(np.zeros(self.n))
        a = H + np.transpose(H, (1, 0, 2))
        b = np.einsum("ikk->i", H)
        return a, b

    def coefficients_at(self, y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """
        Coefficients of Δ_x(v∘T) = A:∇²v + B·∇v written at y = Tx.

        Returns:
            A = J Jᵀ of shape (..., n, n) and B_i = Σ_k H[i,k,k] of shape (..., n)
        """
        x = self.inverse(np.asarray(y, dtype=float))
        J = self.jacobian(x)
        H = self.hessian(x)
        return J @ np.swapaxes(J, -1, -2), np.einsum("...ikk->...i", H)


def identity_map(n: int) -> DiffeoMap:
    def jacobian(x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(np.eye(n), x.shape + (n,)).copy()

    def hessian(x):
        x = np.asarray(x, dtype=float)
        return np.zeros(x.shape + (n, n))

    return DiffeoMap(
        n=n,
        forward=lambda x: np.array(x, dtype=float),
        inverse=lambda y: np.array(y, dtype=float),
        jacobian=jacobian,
        hessian=hessian,
        regularity="C3",
        validity_radius=math.inf,
        name="identity",
    )


def example1_map(c: float, n: int = 3) -> DiffeoMap:
    """
    T₀ = S₀⁻¹ for the axisymmetric bending S₀y = y + c|y|²e_n.

    T₀x = (x′, (−1 + √(1 + 4c(x_n − c|x′|²)))/(2c)), evaluated as
    2q/(1 + √(1 + 4cq)) so that c = 0 gives the identity exactly.
    """
    if abs(c) >= 0.25:
        raise PreconditionError(f"example1 map needs |c| < 1/4, got {c}")
    if n < 3:
        raise PreconditionError(f"dimension must be >= 3, got {n}")
    radius = math.inf if c == 0 else (math.sqrt(1.5) - 1.0) / (2.0 * abs(c))

    def _root(x):
        x = np.asarray(x, dtype=float)
        q = x[..., -1] - c * np.sum(x[..., :-1] ** 2, axis=-1)
        disc = 1.0 + 4.0 * c * q
        if np.any(disc <= 0.0):
            raise DomainError(f"example1 map undefined: 1 + 4c(x_n - c|x'|^2) <= 0 (c={c})")
        return x, q, np.sqrt(disc)

    def forward(x):
        x, q, s = _root(x)
        y = x.copy()
        y[..., -1] = 2.0 * q / (1.0 + s)
        return y

    def inverse(y):
        y = np.array(y, dtype=float)
        x = y.copy()
        x[..., -1] += c * np.sum(y ** 2, axis=-1)
        return x

    def jacobian(x):
        x, _, s = _root(x)
        J = np.broadcast_to(np.eye(n), x.shape + (n,)).copy()
        J[..., -1, :-1] = -2.0 * c * x[..., :-1] / s[..., None]
        J[..., -1, -1] = 1.0 / s
        return J

    def hessian(x):
        x, _, s = _root(x)
        grad_q = np.concatenate([-2.0 * c * x[..., :-1], np.ones(x.shape[:-1] + (1,))], axis=-1)
        H = np.zeros(x.shape + (n, n))
        outer = grad_q[..., :, None] * grad_q[..., None, :]
        H[..., -1, :, :] = -2.0 * c * outer / s[..., None, None] ** 3
        tangential = np.zeros((n, n))
        tangential[:-1, :-1] = np.eye(n - 1)
        H[..., -1, :, :] += -2.0 * c * tangential / s[..., None, None]
        return H

    name = "identity" if c == 0 else f"example1:{c:g}"
    return DiffeoMap(n, forward, inverse, jacobian, hessian, "C3", radius, name)


def example5_map(n: int = 3) -> DiffeoMap:
    """T^i x = x_i + x_i Σ_k x_k − ½ Σ_k x_k², a quadratic map with b_{i,0} = 2 − n."""
    if n < 3:
        raise PreconditionError(f"dimension must be >= 3, got {n}")
    eye = np.eye(n)
    H_const = eye[:, :, None] + eye[:, None, :] - eye[None, :, :]

    def forward(x):
        x = np.asarray(x, dtype=float)
        S = np.sum(x, axis=-1, keepdims=True)
        Q = np.sum(x ** 2, axis=-1, keepdims=True)
        return x + x * S - 0.5 * Q

    def jacobian(x):
        x = np.asarray(x, dtype=float)
        S = np.sum(x, axis=-1)[..., None, None]
        return eye * (1.0 + S) + x[..., :, None] - x[..., None, :]

    def hessian(x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(H_const, x.shape + (n, n)).copy()

    def inverse(y, tol: float = 1e-14, max_iter: int = 50):
        y = np.asarray(y, dtype=float)
        x = y.copy()
        for iteration in range(max_iter):
            res = forward(x) - y
            err = float(np.max(np.abs(res))) if res.size else 0.0
            if err <= tol * max(1.0, float(np.max(np.abs(y))) if y.size else 1.0):
                return x
            x = x - np.linalg.solve(jacobian(x), res[..., None])[..., 0]
        logger.debug("example5 inverse stalled at %.3e", err)
        raise NoConvergence("example5 inverse did not converge", max_iter, err)

    radius = _singular_value_radius(jacobian, n)
    return DiffeoMap(n, forward, inverse, jacobian, hessian, "C3", radius, "example5")


def _singular_value_radius(jacobian: PointMap, n: int, threshold: float = 0.5) -> float:
    """Bisection for the radius where min singular value of J along ±e_i drops to the threshold."""
    directions = np.concatenate([np.eye(n), -np.eye(n)])

    def margin(t: float) -> float:
        sv = np.linalg.svd(jacobian(t * directions), compute_uv=False)
        return float(np.min(sv)) - threshold

    lo, hi = 0.0, 1.0
    while margin(hi) > 0.0:
        hi *= 2.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if margin(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return lo


def map_from_spec(spec: str, n: int = 3) -> DiffeoMap:
    """Build a map from its config name: identity, example1:<c> or example5."""
    if spec == "identity":
        return identity_map(n)
    if spec == "example5":
        return example5_map(n)
    if spec.startswith("example1:"):
        try:
            c = float(spec.split(":", 1)[1])
        except ValueError as exc:
            raise PreconditionError(f"bad example1 parameter in '{spec}'") from exc
        return example1_map(c, n)
    raise PreconditionError(f"unknown map spec '{spec}'")


# ======================================================================
# Map error estimates
# ======================================================================

@dataclass
class PushforwardReport:
    """Both sides of the first- and second-derivative pushforward estimates at one point."""

    first_discrepancy: float
    first_bound: float
    second_discrepancy: float
    second_bound: float
    constant: float
    radius: float

    @property
    def satisfied(self) -> bool:
        return self.first_discrepancy <= self.first_bound and self.second_discrepancy <= self.second_bound

    def to_dict(self) -> Dict[str, float]:
        return {
            "first_discrepancy": self.first_discrepancy,
            "first_bound": self.first_bound,
            "second_discrepancy": self.second_discrepancy,
            "second_bound": self.second_bound,
            "constant": self.constant,
            "radius": self.radius,
            "satisfied": self.satisfied,
        }


def pushforward_error_check(
    diffeo: DiffeoMap,
    gradient: PointMap,
    hessian: PointMap,
    x: Sequence[float],
    slack: float = 0.01,
    segment_samples: int = 33,
) -> PushforwardReport:
    """
    Compare derivatives of f∘T at x with derivatives of f at Tx.

    The constant is the sampled sup of |∇²T| over the segment [0, x] times
    (1 + slack). With M that constant and r = |x|:

        |∇(f∘T)(x) − ∇f(Tx)|_∞   ≤ M r |∇f(Tx)|
        |∇²(f∘T)(x) − ∇²f(Tx)|_∞ ≤ |∇²f(Tx)| M r (2 + M r) + |∇f(Tx)| M

    Args:
        diffeo: The map T
        gradient: ∇f as a function of y
        hessian: ∇²f as a function of y
        x: Evaluation point with |x| < R/2

    Raises:
        PreconditionError: x outside half the validity radius
    """
    x = np.asarray(x, dtype=float)
    r = float(np.linalg.norm(x))
    if r >= 0.5 * diffeo.validity_radius:
        raise PreconditionError(f"|x| = {r:.3g} is not inside half the validity radius {diffeo.validity_radius:.3g}")

    segment = np.linspace(0.0, 1.0, segment_samples)[:, None] * x[None, :]
    H_seg = diffeo.hessian(segment)
    M = float(np.max(np.sqrt(np.sum(H_seg ** 2, axis=(-3, -2, -1))))) * (1.0 + slack)

    y = diffeo.forward(x)
    J = diffeo.jacobian(x)
    H = diffeo.hessian(x)
    g = np.asarray(gradient(y), dtype=float)
    A = np.asarray(hessian(y), dtype=float)

    pulled_gradient = J.T @ g
    pulled_hessian = J.T @ A @ J + np.einsum("i,ijk->jk", g, H)

    g_norm = float(np.linalg.norm(g))
    A_norm = float(np.linalg.norm(A))
    return PushforwardReport(
        first_discrepancy=float(np.max(np.abs(pulled_gradient - g))),
        first_bound=M * r * g_norm,
        second_discrepancy=float(np.max(np.abs(pulled_hessian - A))),
        second_bound=A_norm * M * r * (2.0 + M * r) + g_norm * M,
        constant=M,
        radius=r,
    )


def norm_vs_distance_check(diffeo: DiffeoMap, samples: Sequence[Sequence[float]]) -> float:
    """
    sup over nonzero samples of | |Tx| − |x| | / |x|².

    Raises:
        PreconditionError: empty sample list or a sample outside the validity radius
    """
    points = np.asarray(samples, dtype=float)
    if points.size == 0:
        raise PreconditionError("norm_vs_distance_check needs at least one sample")
    points = points.reshape(-1, diffeo.n)
    r = np.linalg.norm(points, axis=1)
    if np.any(r >= diffeo.validity_radius):
        raise PreconditionError("sample outside the validity radius")
    points, r = points[r > 0], r[r > 0]
    if r.size == 0:
        raise PreconditionError("norm_vs_distance_check needs a nonzero sample")
    image = np.linalg.norm(diffeo.forward(points), axis=1)
    return float(np.max(np.abs(image - r) / r ** 2))


def ray_samples(direction: Sequence[float], radii: Sequence[float]) -> np.ndarray:
    """Points t·direction/|direction| for each t."""
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    return np.asarray(radii, dtype=float)[:, None] * d[None, :]

"""
Angular profiles of exact cone solutions.

The wedge cross-section (n = 3) and rotationally symmetric caps are solved
in the vanishing variable ρ = ξ^{−2/(n−2)}, which is zero with unit slope on
∂Σ. A profile then gives the cone solution u_V = r^{−k}ξ(θ), its derivatives
in cone and Cartesian frames, and the two-distance form f_V used for wedges.
"""

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from config.lab_config import DEFAULT_CONFIG, LabConfig
from src.errors import CertificationError, DomainError, PreconditionError
from src.newton import newton_solve
from src.section_grid import SectionGrid
from src.substitution import backsubstitution_residual, rho_form, rho_to_blowup

logger = logging.getLogger(__name__)

WEDGE_SHIFT = -0.25
MIN_PROFILE_N = 64


def cap_shift(n: int) -> float:
    """Zeroth-order coefficient (n−2)²/4 of the cap equation."""
    return 0.25 * (n - 2) ** 2


# ======================================================================
# Profiles
# ======================================================================

@dataclass
class RadialProfile:
    """ρ sampled on [0, α] for a wedge or a rotationally symmetric cap."""

    theta: np.ndarray
    rho: np.ndarray
    n: int
    kind: str
    alpha: float
    residual: float = 0.0
    iterations: int = 0
    extrapolated: bool = False
    history: List[float] = field(default_factory=list)

    @property
    def N(self) -> int:
        return len(self.theta) - 1

    @property
    def h(self) -> float:
        return float(self.theta[1] - self.theta[0])

    @property
    def endpoint_kinds(self) -> Tuple[str, str]:
        start = "vanishing" if self.kind == "wedge" else "regular-center"
        return start, "vanishing"

    @property
    def exponent(self) -> float:
        """k with u_V = r^{−k}ξ."""
        return 0.5 * (self.n - 2)

    @property
    def shift(self) -> float:
        return WEDGE_SHIFT if self.kind == "wedge" else cap_shift(self.n)

    @property
    def xi(self) -> np.ndarray:
        return rho_to_blowup(self.rho, self.n)

    @property
    def eta(self) -> np.ndarray:
        """Wedge name for ξ."""
        return self.xi

    @property
    def boundary_distance(self) -> np.ndarray:
        """Geodesic distance d_Σ from each node to ∂Σ."""
        if self.kind == "wedge":
            return np.minimum(self.theta, self.alpha - self.theta)
        return self.alpha - self.theta

    @property
    def interior(self) -> np.ndarray:
        return self.boundary_distance > 0

    def rho_bounds(self) -> Tuple[float, float]:
        """(c₃, c₄) = (min, max) of ρ/d_Σ over interior nodes."""
        mask = self.interior
        ratio = self.rho[mask] / self.boundary_distance[mask]
        return float(np.min(ratio)), float(np.max(ratio))

    def boundary_slopes(self) -> List[float]:
        """|ρ′| at each vanishing endpoint, one-sided second order."""
        h = self.h
        slopes = [(4.0 * self.rho[-2] - self.rho[-3]) / (2.0 * h)]
        if self.kind == "wedge":
            slopes.insert(0, (4.0 * self.rho[1] - self.rho[2]) / (2.0 * h))
        return [float(abs(s)) for s in slopes]

    @cached_property
    def spline(self) -> CubicSpline:
        start = "not-a-knot" if self.kind == "wedge" else (1, 0.0)
        return CubicSpline(self.theta, self.rho, bc_type=(start, "not-a-knot"))

    def check_support(self, theta: np.ndarray) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        lower_ok = theta > 0.0 if self.kind == "wedge" else theta >= 0.0
        if not np.all(lower_ok & (theta < self.alpha)):
            raise DomainError(f"angle outside the profile support of a {self.kind} with alpha={self.alpha:.6g}")
        return theta

    def rho_derivatives(self, theta: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Interpolated ρ, ρ′, ρ″."""
        theta = np.asarray(theta, dtype=float)
        s = self.spline
        return s(theta), s(theta, 1), s(theta, 2)

    def xi_derivatives(self, theta: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """ξ, ξ′, ξ″ from the interpolated ρ by the chain rule."""
        rho, d1, d2 = self.rho_derivatives(theta)
        k = self.exponent
        xi = rho ** (-k)
        xi1 = -k * rho ** (-k - 1) * d1
        xi2 = -k * rho ** (-k - 1) * d2 + k * (k + 1) * rho ** (-k - 2) * d1 ** 2
        return xi, xi1, xi2

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"theta": self.theta, "rho": self.rho, "xi": self.xi})

    def metadata(self) -> Dict[str, Any]:
        c3, c4 = self.rho_bounds()
        return {
            "kind": self.kind,
            "n": self.n,
            "alpha": self.alpha,
            "N": self.N,
            "residual": self.residual,
            "c3": c3,
            "c4": c4,
            "boundary_slopes": self.boundary_slopes(),
            "extrapolated": self.extrapolated,
            "newton_iterations": self.iterations,
        }


# ======================================================================
# Solvers
# ======================================================================

def _solve_on_grid(
    grid: SectionGrid,
    n: int,
    shift: float,
    initial: np.ndarray,
    config: LabConfig,
    label: str,
) -> Tuple[np.ndarray, int, float, List[float]]:
    D = grid.gradient()
    lap = grid.laplacian()
    form = rho_form(lap, [(1.0, D, D)], n, shift)
    result = newton_solve(
        form,
        initial,
        grid.free,
        tol=config.newton_tol,
        max_iter=config.newton_max_iter,
        floor=config.positivity_floor,
        label=label,
    )
    rho = result.solution
    if grid.kind == "interval":
        nodes = np.arange(1, grid.N)
    else:
        nodes = np.arange(0, grid.N - 1)
    residual = backsubstitution_residual(rho[nodes], (lap @ rho)[nodes], ((D @ rho) ** 2)[nodes], n, shift)
    return rho, result.iterations, float(np.max(np.abs(residual))), result.history


def _richardson(coarse: np.ndarray, fine: np.ndarray) -> np.ndarray:
    return (4.0 * fine[::2] - coarse) / 3.0


def _check_center_series(grid: SectionGrid, rho: np.ndarray, n: int, tol: float = 1e-2) -> None:
    """Compare the even-reflection second difference at θ=0 with the series value of ρ″(0)."""
    rho0 = rho[0]
    series = -((n - 2) * rho0 ** 2 + n) / (2.0 * (n - 1) * rho0)
    discrete = 2.0 * (rho[1] - rho0) / grid.h ** 2
    mismatch = abs(discrete - series) / abs(series)
    if mismatch > tol:
        raise CertificationError(
            f"regular-center series mismatch: discrete rho''(0)={discrete:.6g}, series {series:.6g}"
        )


def solve_wedge(
    alpha: float,
    N: int,
    extrapolate: bool = False,
    initial: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    config: LabConfig = DEFAULT_CONFIG,
) -> RadialProfile:
    """
    Solve ρρ″ = (3/2)ρ′² + ρ²/2 − 3/2 on (0, α) with ρ(0) = ρ(α) = 0.

    η = ρ^{−1/2} is the wedge profile of η″ + η/4 = (3/4)η⁵.

    Args:
        alpha: Wedge opening in (0, π]; α = π is the half-plane
        N: Number of cells (≥ 64)
        extrapolate: Combine N and 2N solves by Richardson extrapolation
        initial: Initial guess as a function of θ (default θ(α−θ)/α)
        config: Newton tolerances

    Returns:
        RadialProfile on the N-cell grid
    """
    if not 0.0 < alpha <= math.pi:
        raise PreconditionError(f"wedge angle must lie in (0, pi], got {alpha}")
    if N < MIN_PROFILE_N:
        raise PreconditionError(f"profile grids need N >= {MIN_PROFILE_N}, got {N}")
    guess = initial or (lambda t: t * (alpha - t) / alpha)

    def run(cells: int):
        grid = SectionGrid.interval(alpha, cells)
        start = guess(grid.nodes)
        start[[0, -1]] = 0.0
        return grid, _solve_on_grid(grid, 3, WEDGE_SHIFT, start, config, f"wedge[{cells}]")

    grid, (rho, iterations, residual, history) = run(N)
    if extrapolate:
        _, (fine, more, fine_residual, _) = run(2 * N)
        rho = _richardson(rho, fine)
        iterations += more
        residual = max(residual, fine_residual)
    logger.debug("wedge alpha=%.6g N=%d residual %.3e", alpha, N, residual)
    return RadialProfile(grid.nodes, rho, 3, "wedge", alpha, residual, iterations, extrapolate, history)


def solve_cap(
    n: int,
    alpha: float,
    N: int,
    extrapolate: bool = False,
    initial: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    config: LabConfig = DEFAULT_CONFIG,
) -> RadialProfile:
    """
    Solve ρ(ρ″ + (n−2)cotθ ρ′) = (n/2)ρ′² − ((n−2)/2)ρ² − n/2 on [0, α).

    Node 0 is a regular center (ρ′(0) = 0), ρ(α) = 0. ξ = ρ^{−(n−2)/2} is
    the cap profile of Δ_θξ − ((n−2)²/4)ξ = (n(n−2)/4)ξ^{(n+2)/(n−2)}.
    """
    if n < 3:
        raise PreconditionError(f"dimension must be >= 3, got {n}")
    if not 0.0 < alpha < math.pi:
        raise PreconditionError(f"cap angle must lie in (0, pi), got {alpha}")
    if N < MIN_PROFILE_N:
        raise PreconditionError(f"profile grids need N >= {MIN_PROFILE_N}, got {N}")
    guess = initial or (lambda t: (alpha ** 2 - t ** 2) / (2.0 * alpha))
    shift = cap_shift(n)

    def run(cells: int):
        grid = SectionGrid.cap(n, alpha, cells)
        start = guess(grid.nodes)
        start[-1] = 0.0
        solved = _solve_on_grid(grid, n, shift, start, config, f"cap[n={n},{cells}]")
        _check_center_series(grid, solved[0], n)
        return grid, solved

    grid, (rho, iterations, residual, history) = run(N)
    if extrapolate:
        _, (fine, more, fine_residual, _) = run(2 * N)
        rho = _richardson(rho, fine)
        iterations += more
        residual = max(residual, fine_residual)
    logger.debug("cap n=%d alpha=%.6g N=%d residual %.3e", n, alpha, N, residual)
    return RadialProfile(grid.nodes, rho, n, "cap", alpha, residual, iterations, extrapolate, history)


# ======================================================================
# Cone solution evaluation
# ======================================================================

@dataclass
class ConeEvaluation:
    """Values and cone-frame derivatives of a separable function g(r)f(θ)."""

    n: int
    kind: str
    r: np.ndarray
    theta: np.ndarray
    u: np.ndarray
    grad_r: np.ndarray
    grad_theta: np.ndarray
    hess_rr: np.ndarray
    hess_rtheta: np.ndarray
    hess_thetatheta: np.ndarray
    hess_phiphi: np.ndarray

    @property
    def transverse(self) -> int:
        """Number of directions carrying hess_phiphi."""
        return self.n - 2 if self.kind == "cap" else 0

    @property
    def gradient_norm(self) -> np.ndarray:
        return np.hypot(self.grad_r, self.grad_theta)

    @property
    def hessian_norm(self) -> np.ndarray:
        """Frobenius norm."""
        return np.sqrt(
            self.hess_rr ** 2 + 2.0 * self.hess_rtheta ** 2 + self.hess_thetatheta ** 2
            + self.transverse * self.hess_phiphi ** 2
        )

    @property
    def laplacian(self) -> np.ndarray:
        return self.hess_rr + self.hess_thetatheta + self.transverse * self.hess_phiphi


def separable_frame(
    n: int,
    kind: str,
    r: np.ndarray,
    theta: np.ndarray,
    radial: Tuple[np.ndarray, np.ndarray, np.ndarray],
    angular: Tuple[np.ndarray, np.ndarray, np.ndarray],
) -> ConeEvaluation:
    """
    Cone-frame derivatives of u = g(r)f(θ) from (g, g′, g″) and (f, f′, f″).

    For caps the transverse Hessian entry uses cotθ·f′ → f″ on the axis.
    """
    g, g1, g2 = radial
    f, f1, f2 = angular
    u = g * f
    u_r = g1 * f
    u_t = g * f1
    hess_tt = g * f2 / r ** 2 + u_r / r
    if kind == "cap":
        sin = np.sin(theta)
        safe = np.abs(sin) > 1e-8
        cot_term = np.where(safe, np.cos(theta) * u_t / np.where(safe, sin, 1.0), g * f2)
        hess_pp = u_r / r + cot_term / r ** 2
    else:
        hess_pp = np.zeros_like(u)
    return ConeEvaluation(
        n=n,
        kind=kind,
        r=r,
        theta=theta,
        u=u,
        grad_r=u_r,
        grad_theta=u_t / r,
        hess_rr=g2 * f,
        hess_rtheta=g1 * f1 / r - u_t / r ** 2,
        hess_thetatheta=hess_tt,
        hess_phiphi=hess_pp,
    )


def power_radial(r: np.ndarray, gamma: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(g, g′, g″) for g = r^γ."""
    return r ** gamma, gamma * r ** (gamma - 1), gamma * (gamma - 1) * r ** (gamma - 2)


def power_log_radial(r: np.ndarray, gamma: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(g, g′, g″) for g = r^γ log r."""
    log = np.log(r)
    return (
        r ** gamma * log,
        r ** (gamma - 1) * (gamma * log + 1.0),
        r ** (gamma - 2) * (gamma * (gamma - 1) * log + 2.0 * gamma - 1.0),
    )


def eval_cone_solution(profile: RadialProfile, r, theta) -> ConeEvaluation:
    """
    u_V = r^{−k}ξ(θ) with its gradient and Hessian in cone coordinates.

    Raises:
        PreconditionError: r ≤ 0
        DomainError: θ outside the profile support
    """
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0.0):
        raise PreconditionError("cone solution needs r > 0")
    theta = profile.check_support(theta)
    r, theta = np.broadcast_arrays(r, theta)
    return separable_frame(
        profile.n, profile.kind, r, theta,
        power_radial(r, -profile.exponent),
        profile.xi_derivatives(theta),
    )


# ======================================================================
# Cartesian frames
# ======================================================================

def cone_frame(y: np.ndarray, kind: str) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """
    (r, θ, ŷ, e_θ) for points y of shape (P, d).

    Caps are symmetric about e_d with θ the angle from e_d; wedges use the
    polar angle in the (y1, y2) plane and are translation invariant in the
    remaining directions.
    """
    y = np.atleast_2d(np.asarray(y, dtype=float))
    P, d = y.shape
    if kind == "wedge":
        r = np.linalg.norm(y[:, :2], axis=1)
        theta = np.arctan2(y[:, 1], y[:, 0])
        yhat = np.zeros((P, d))
        e_t = np.zeros((P, d))
        yhat[:, 0], yhat[:, 1] = np.cos(theta), np.sin(theta)
        e_t[:, 0], e_t[:, 1] = -np.sin(theta), np.cos(theta)
        return r, theta, yhat, e_t
    r = np.linalg.norm(y, axis=1)
    yhat = y / r[:, None]
    cos = np.clip(yhat[:, -1], -1.0, 1.0)
    theta = np.arccos(cos)
    sin = np.sin(theta)
    axis = np.zeros(d)
    axis[-1] = 1.0
    on_axis = sin < 1e-10
    e_t = (cos[:, None] * yhat - axis[None, :]) / np.where(on_axis, 1.0, sin)[:, None]
    e_t[on_axis] = np.eye(d)[0]
    return r, theta, yhat, e_t


def assemble_cartesian(
    evaluation: ConeEvaluation, yhat: np.ndarray, e_t: np.ndarray
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Cartesian value, gradient (P, d) and Hessian (P, d, d) from cone-frame components."""
    ev = evaluation
    grad = ev.grad_r[:, None] * yhat + ev.grad_theta[:, None] * e_t
    yy = yhat[:, :, None] * yhat[:, None, :]
    yt = yhat[:, :, None] * e_t[:, None, :]
    tt = e_t[:, :, None] * e_t[:, None, :]
    hess = ev.hess_rr[:, None, None] * yy + ev.hess_rtheta[:, None, None] * (yt + np.swapaxes(yt, 1, 2))
    hess = hess + ev.hess_thetatheta[:, None, None] * tt
    if ev.kind == "cap":
        d = yhat.shape[1]
        hess = hess + ev.hess_phiphi[:, None, None] * (np.eye(d)[None] - yy - tt)
    return ev.u, grad, hess


def cone_solution_cartesian(profile: RadialProfile, y: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """u_V, ∇u_V and ∇²u_V at Cartesian points y of shape (P, d)."""
    y = np.atleast_2d(np.asarray(y, dtype=float))
    if profile.kind == "cap" and y.shape[1] != profile.n:
        raise PreconditionError(f"cap profile for n={profile.n} evaluated at {y.shape[1]}-dimensional points")
    r, theta, yhat, e_t = cone_frame(y, profile.kind)
    return assemble_cartesian(eval_cone_solution(profile, r, theta), yhat, e_t)


# ======================================================================
# Two-distance form on wedges
# ======================================================================

def f_V(profile: RadialProfile, d1: float, d2: float) -> float:
    """
    Cone solution as a function of the distances to the two wedge faces.

    d₂ is the distance to the face θ = 0 and d₁ to the face θ = α, with
    r·sinθ = d₂ and r·sin(α−θ) = d₁. For α = π both faces lie on one line
    and the value is d₂^{−1/2}η(π/2).

    Raises:
        DomainError: the pair is not realizable inside the wedge
    """
    if profile.kind != "wedge":
        raise PreconditionError("f_V is defined for wedge profiles")
    if not (math.isfinite(d1) and math.isfinite(d2)) or d1 <= 0.0 or d2 <= 0.0:
        raise DomainError(f"unrealizable distance pair ({d1}, {d2})")
    alpha = profile.alpha
    if alpha >= math.pi - 1e-12:
        return float(eval_cone_solution(profile, d2, 0.5 * math.pi).u)

    theta = brentq(lambda t: d2 * math.sin(alpha - t) - d1 * math.sin(t), 0.0, alpha, xtol=1e-15, rtol=1e-15)
    if not 0.0 < theta < alpha:
        raise DomainError(f"unrealizable distance pair ({d1}, {d2})")
    r = d2 / math.sin(theta)
    return float(eval_cone_solution(profile, r, theta).u)

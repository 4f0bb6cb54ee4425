"""
First-order expansion of blow-up solutions near a conical point.

The coefficient ξ₁ solves

    ρ²Δ_θξ₁ − κξ₁ − (n(n−4)/4)ρ²ξ₁ = ρ²F,     κ = n(n+2)/4,

in three steps: a degenerate solve with a cutoff coefficient c (exhaustion
plus a supersolution bound), a resolvent solve for the compactly supported
correction, and the sum. F is the source produced by the map's Taylor
coefficients acting on the cone solution. Supersolutions for the three
remainder cases are evaluated on sampled annuli.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import scipy.sparse as sp
from scipy.interpolate import CubicSpline
from scipy.sparse.linalg import spsolve

from config.lab_config import DEFAULT_CONFIG, LabConfig
from src.cone_profiles import (
    RadialProfile,
    assemble_cartesian,
    cone_frame,
    cone_solution_cartesian,
    power_log_radial,
    power_radial,
    separable_frame,
)
from src.errors import CertificationError, DataCorruptionError, PreconditionError
from src.geometry import DiffeoMap
from src.section_grid import SectionGrid
from src.spectral import EigenPair, eigen_solve, kappa, mu1, resolvent_solve
from src.substitution import critical_power

logger = logging.getLogger(__name__)


# ======================================================================
# Cutoff coefficient
# ======================================================================

def inner_coefficient(rho: np.ndarray, n: int) -> np.ndarray:
    """−(n(n+2)/4)(1 + ((n−4)/(n+2))ρ²)."""
    return -kappa(n) - 0.25 * n * (n - 4) * np.asarray(rho) ** 2


def outer_coefficient(rho: np.ndarray, n: int) -> np.ndarray:
    """−((n−2)²/4)ρ² − n(n−1)/4."""
    return -0.25 * (n - 2) ** 2 * np.asarray(rho) ** 2 - 0.25 * n * (n - 1)


def cutoff_radius(n: int) -> float:
    """ρ₀ = √(n/2)."""
    return math.sqrt(0.5 * n)


def build_cutoff_c(
    rho: np.ndarray,
    n: int,
    band: float = 0.1,
    ceiling: Optional[float] = None,
) -> np.ndarray:
    """
    Cutoff coefficient c: the inner formula for ρ < (1−band)ρ₀, the outer
    bound −((n−2)²/4)ρ² − n(n−1)/4 for ρ ≥ ρ₀, and a cubic Hermite blend
    s(t) = 3t² − 2t³ between them. Inside ρ < ρ₀ the inner value lies below
    the outer one by 3n/4 − ρ² ≥ n/4, so c never exceeds the outer bound.

    Args:
        rho: ρ values (zeros allowed)
        n: Dimension
        band: Relative blend width δ_b
        ceiling: Optional upper bound on ρ; exceeding it is reported as corrupt data

    Raises:
        DataCorruptionError: ρ above the ceiling
        PreconditionError: band outside (0, 1)
    """
    if not 0.0 < band < 1.0:
        raise PreconditionError(f"blend band must lie in (0, 1), got {band}")
    rho = np.asarray(rho, dtype=float)
    if ceiling is not None and np.any(rho > ceiling):
        raise DataCorruptionError(f"rho reaches {np.max(rho):.6g} above the ceiling {ceiling:.6g}")
    rho0 = cutoff_radius(n)
    t = np.clip((rho - (1.0 - band) * rho0) / (band * rho0), 0.0, 1.0)
    s = 3.0 * t ** 2 - 2.0 * t ** 3
    return (1.0 - s) * inner_coefficient(rho, n) + s * outer_coefficient(rho, n)


# ======================================================================
# Degenerate operator and its solver
# ======================================================================

def _theta_derivative(section) -> sp.csr_matrix:
    if isinstance(section, SectionGrid):
        return section.gradient()
    return section.difference_operators()[0]


@dataclass
class DegenerateOperator:
    """L₀u = ρ²a Δ_h u + ρ b ∂_θu + c u on a section grid (isotropic a)."""

    section: Any
    rho: np.ndarray
    c: np.ndarray
    a: Any = 1.0
    b: Any = 0.0

    def __post_init__(self):
        size = len(self.section.free)
        self.rho = np.asarray(self.rho, dtype=float)
        self.c = np.broadcast_to(np.asarray(self.c, dtype=float), (size,)).copy()
        self.a = np.broadcast_to(np.asarray(self.a, dtype=float), (size,)).copy()
        self.b = np.broadcast_to(np.asarray(self.b, dtype=float), (size,)).copy()

    def ellipticity(self) -> Tuple[float, float]:
        """(λ, Λ) with λ|η|² ≤ a|η|² ≤ Λ|η|² over interior nodes."""
        a = self.a[self.section.free]
        return float(np.min(a)), float(np.max(a))

    def matrix(self) -> sp.csr_matrix:
        L = sp.diags(self.rho ** 2 * self.a) @ self.section.laplacian() + sp.diags(self.c)
        if np.any(self.b):
            L = L + sp.diags(self.rho * self.b) @ _theta_derivative(self.section)
        return sp.csr_matrix(L)

    def apply(self, u: np.ndarray) -> np.ndarray:
        """L₀u with fixed nodes of u read as zero."""
        u = np.where(self.section.free, u, 0.0)
        return self.matrix() @ u


@dataclass
class L0Solution:
    """Exhaustion solve of L₀u = f."""

    solution: np.ndarray
    levels: List[float]
    cauchy: List[float]
    ratio: float
    bound: float
    supersolution_margin: float
    delta: float


def solve_L0(
    op: DegenerateOperator,
    f: np.ndarray,
    psi: np.ndarray,
    delta: float,
    slack: float = 0.05,
    check_tol: float = 1e-6,
    config: LabConfig = DEFAULT_CONFIG,
) -> L0Solution:
    """
    Solve L₀u = f with zero data by exhaustion of Σ.

    The discrete supersolution check is L₀ψ + δψ ≤ m·ψ with worst margin m.
    For m ≤ check_tol, δ is certified as given. A positive margin up to δ/2
    is discretization error of ψ: the check then certifies the reduced
    constant δ' = δ − m, which the sup bound uses instead of δ.

    Levels solve on Ω_k = {d_Σ > t_k}, t_k = h₀2^{−k}, h₀ = exhaustion_cells
    cells, and report the sup difference of successive levels on the common
    interior. The last level must satisfy ‖u/ψ‖ ≤ (1/δ')‖f/ψ‖(1 + slack).

    Raises:
        CertificationError: margin above δ/2, levels are not Cauchy, or the bound fails
        PreconditionError: ψ not positive on the interior
    """
    section = op.section
    free = np.asarray(section.free, dtype=bool)
    psi = np.asarray(psi, dtype=float)
    if np.any(~np.isfinite(psi[free])) or np.any(psi[free] <= 0.0):
        raise PreconditionError("supersolution must be positive and finite at interior nodes")
    f = np.where(free, np.asarray(f, dtype=float), 0.0)

    L = op.matrix()
    psi_zeroed = np.where(free, psi, 0.0)
    margin = (L @ psi_zeroed + delta * psi_zeroed)[free] / psi[free]
    worst = float(np.max(margin))
    if worst > 0.5 * delta:
        raise CertificationError(f"supersolution check failed: max (L0 psi + delta psi)/psi = {worst:.3e}")
    certified = delta - worst if worst > check_tol else delta
    if certified < delta:
        logger.debug("solve_L0: supersolution margin %.3e, delta reduced to %.6g", worst, certified)

    distance = section.boundary_distance
    h0 = config.exhaustion_cells * section.h
    levels, cauchy = [], []
    previous, previous_mask = None, None
    u = np.zeros_like(f)
    for level in range(config.exhaustion_levels):
        t = h0 * 2.0 ** (-level)
        mask = free & (distance > t)
        idx = np.flatnonzero(mask)
        u = np.zeros_like(f)
        if idx.size:
            u[idx] = spsolve(L[idx][:, idx].tocsc(), f[idx])
        if previous is not None:
            common = previous_mask & mask
            scale = max(float(np.max(np.abs(u))), 1e-300)
            cauchy.append(float(np.max(np.abs(u[common] - previous[common]))) / scale if np.any(common) else 0.0)
        levels.append(t)
        previous, previous_mask = u, mask
    if cauchy and cauchy[-1] > config.cauchy_tol:
        raise CertificationError(f"exhaustion levels not Cauchy: last difference {cauchy[-1]:.3e}")

    ratio = float(np.max(np.abs(u[free] / psi[free])))
    bound = float(np.max(np.abs(f[free] / psi[free]))) / certified
    if ratio > bound * (1.0 + slack) + 1e-300:
        raise CertificationError(f"sup bound failed: |u/psi| = {ratio:.6g} > {bound:.6g}(1+{slack})")
    logger.debug("solve_L0: %d levels, ratio %.4g bound %.4g", len(levels), ratio, bound)
    return L0Solution(u, levels, cauchy, ratio, bound, worst, certified)


# ======================================================================
# Source term
# ======================================================================

@dataclass
class SourceField:
    """F(θ, φ) on a (θ nodes × φ samples) array with interior mask."""

    theta: np.ndarray
    phi: np.ndarray
    values: np.ndarray
    interior: np.ndarray
    bound: float
    homogeneity_error: float

    def meridian(self, j: int = 0) -> np.ndarray:
        return self.values[:, j]


def _sphere_points(theta: np.ndarray, phi: np.ndarray, n: int) -> np.ndarray:
    theta, phi = np.broadcast_arrays(np.asarray(theta, dtype=float), np.asarray(phi, dtype=float))
    points = np.zeros(theta.shape + (n,))
    points[..., 0] = np.sin(theta) * np.cos(phi)
    points[..., 1] = np.sin(theta) * np.sin(phi)
    points[..., -1] = np.cos(theta)
    return points


def source_at(diffeo: DiffeoMap, profile: RadialProfile, theta, phi, r: float = 1.0) -> np.ndarray:
    """F = −r^{n/2}(a_{ij,k}y_k ∂_{ij}u_V + b_{i,0}∂_iu_V) at y = r·(θ, φ)."""
    n = profile.n
    if diffeo.n != n:
        raise PreconditionError(f"map dimension {diffeo.n} does not match profile dimension {n}")
    y = r * _sphere_points(theta, phi, n)
    shape = y.shape[:-1]
    flat = y.reshape(-1, n)
    _, grad, hess = cone_solution_cartesian(profile, flat)
    a, b = diffeo.taylor_coefficients()
    second = np.einsum("ijk,pk,pij->p", a, flat, hess)
    first = grad @ b
    return (-(r ** (0.5 * n)) * (second + first)).reshape(shape)


def compute_F(
    diffeo: DiffeoMap,
    profile: RadialProfile,
    phi: Sequence[float] = (0.0,),
    homogeneity_tol: float = 1e-10,
    zero_tol: float = 1e-12,
) -> SourceField:
    """
    Evaluate F on the profile's θ nodes for each azimuth in phi.

    F is computed at radii 1 and 1/2; any r-dependence beyond the tolerance
    signals a derivative-order error. Differences are measured against
    max(1, max|F|). A source whose sup is below zero_tol is roundoff of an
    identically vanishing F (axisymmetric bendings) and is returned as
    exact zeros. The bound C̄ = max |F|/ξ^{(n+2)/(n−2)}.

    Raises:
        CertificationError: r-dependence above homogeneity_tol
    """
    if profile.kind != "cap":
        raise PreconditionError("compute_F needs a rotationally symmetric cap profile")
    theta = profile.theta
    phi = np.asarray(phi, dtype=float)
    interior = theta < profile.alpha
    grid_theta = theta[interior][:, None]
    grid_phi = phi[None, :]
    at_one = source_at(diffeo, profile, grid_theta, grid_phi, 1.0)
    at_half = source_at(diffeo, profile, grid_theta, grid_phi, 0.5)
    sup = float(np.max(np.abs(at_one)))
    if sup < zero_tol:
        logger.debug("compute_F: sup|F| = %.3e treated as zero", sup)
        at_one = np.zeros_like(at_one)
        homogeneity = 0.0
    else:
        homogeneity = float(np.max(np.abs(at_one - at_half))) / max(sup, 1.0)
    if homogeneity > homogeneity_tol:
        raise CertificationError(f"F depends on r: relative difference {homogeneity:.3e}")

    values = np.zeros((len(theta), len(phi)))
    values[interior] = at_one
    xi = profile.xi[interior]
    bound = float(np.max(np.abs(at_one) / xi[:, None] ** critical_power(profile.n)))
    return SourceField(theta, phi, values, interior, bound, homogeneity)


def source_slope(F: np.ndarray, xi: np.ndarray, mask: np.ndarray) -> float:
    """Log–log slope of |F| against ξ over the masked nodes."""
    slope, _ = np.polyfit(np.log(xi[mask]), np.log(np.abs(F[mask])), 1)
    return float(slope)


# ======================================================================
# First-order coefficient
# ======================================================================

@dataclass
class ExpansionCoefficient:
    """ξ₁ = ξ̃₁ + ξ̄₁ and c₁ = ξ₁/ξ on a section grid."""

    section: Any
    xi1: np.ndarray
    c1: np.ndarray
    F: np.ndarray
    tilde: np.ndarray
    bar: np.ndarray
    residual: float
    bounds: Dict[str, float] = field(default_factory=dict)
    resolvent_method: str = "spectral"
    tail_bound: float = 0.0
    mode: int = 0

    def to_frame(self) -> pd.DataFrame:
        if isinstance(self.section, SectionGrid):
            return pd.DataFrame({"theta": self.section.nodes, "xi1": self.xi1, "c1": self.c1})
        return pd.DataFrame({"theta": self.section.Theta, "phi": self.section.phi, "xi1": self.xi1, "c1": self.c1})


def _gradient_and_second(section, f: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    if isinstance(section, SectionGrid):
        return np.abs(section.gradient() @ f), np.abs(section.second_difference() @ f)
    grad_sq = np.zeros_like(f)
    for weight, P, Q in section.gradient_terms():
        grad_sq += weight * (P @ f) * (Q @ f)
    return np.sqrt(np.abs(grad_sq)), np.abs(section.laplacian() @ f)


def first_order_coefficient(
    section,
    rho: np.ndarray,
    xi: np.ndarray,
    F: np.ndarray,
    basis: Sequence[EigenPair],
    n: int,
    band: float = 0.1,
    resolvent_method: str = "auto",
    config: LabConfig = DEFAULT_CONFIG,
) -> ExpansionCoefficient:
    """
    Solve ρ²Δξ₁ − κξ₁ − (n(n−4)/4)ρ²ξ₁ = ρ²F by the three-step split.

    Step 1: ξ̃₁ from L₀ = ρ²Δ + c with ψ = ξ, δ = n/4.
    Step 2: ξ̄₁ solves L₁ξ̄₁ + λξ̄₁ = G with λ = −n(n−4)/4 and
            G = ξ̃₁(c − c_in)/ρ², which vanishes where ρ < (1−band)ρ₀.
    Step 3: ξ₁ = ξ̃₁ + ξ̄₁, c₁ = ξ₁/ξ.

    Raises:
        PreconditionError: λ not below λ₁, or mismatched inputs
        CertificationError: from the degenerate solve
    """
    free = np.asarray(section.free, dtype=bool)
    rho = np.asarray(rho, dtype=float)
    xi = np.asarray(xi, dtype=float)
    F = np.where(free, np.asarray(F, dtype=float), 0.0)
    if not (rho.shape == xi.shape == F.shape == free.shape):
        raise PreconditionError("rho, xi, F and the section must share one node layout")
    shift = -0.25 * n * (n - 4)
    lam1 = basis[0].eigenvalue
    if not shift < lam1:
        raise PreconditionError(f"resolvent parameter {shift:.4g} is not below lambda1={lam1:.4g}")

    c = build_cutoff_c(np.where(free, rho, 0.0), n, band)
    op = DegenerateOperator(section, rho, c)
    source = rho ** 2 * F
    step1 = solve_L0(op, source, np.where(free, xi, 1.0), 0.25 * n, config=config)
    tilde = step1.solution

    G = np.zeros_like(tilde)
    G[free] = tilde[free] * (c[free] - inner_coefficient(rho[free], n)) / rho[free] ** 2
    resolvent = resolvent_solve(shift, -G, basis, method=resolvent_method, tail_tol=config.resolvent_tail_tol)
    bar = resolvent.solution

    xi1 = tilde + bar
    c1 = np.zeros_like(xi1)
    c1[free] = xi1[free] / xi[free]

    lap = section.laplacian() @ xi1
    lhs = rho ** 2 * lap + inner_coefficient(rho, n) * xi1
    scale = float(np.max(np.abs(source[free]))) if np.any(source[free]) else 1.0
    residual = float(np.max(np.abs(lhs[free] - source[free]))) / scale

    grad, second = _gradient_and_second(section, xi1)
    weighted = (rho * grad + rho ** 2 * second)[free] / xi[free]
    source_bound = float(np.max(np.abs(F[free]) / xi[free] ** critical_power(n)))
    bounds = {
        "C_bar": source_bound,
        "step1_ratio": step1.ratio,
        "step1_bound": source_bound / step1.delta * 1.05,
        "step1_delta": step1.delta,
        "bar_sup": float(np.max(np.abs(bar))),
        "c1_sup": float(np.max(np.abs(c1))),
        "derivative_constant": float(np.max(weighted)),
        "cauchy_last": step1.cauchy[-1] if step1.cauchy else 0.0,
    }
    logger.debug("first-order coefficient: residual %.3e, |c1| %.4g", residual, bounds["c1_sup"])
    return ExpansionCoefficient(
        section, xi1, c1, F, tilde, bar, residual, bounds,
        resolvent.method, resolvent.tail_bound, getattr(section, "mode", 0),
    )


@dataclass
class ModalExpansion:
    """ξ₁ and c₁ on a cap assembled from azimuthal modes of F."""

    theta: np.ndarray
    phi: np.ndarray
    F: np.ndarray
    xi1: np.ndarray
    c1: np.ndarray
    parts: List[Tuple[int, str, ExpansionCoefficient]]
    eigenvalues: Dict[int, List[float]]
    residual: float

    def band_statistic(self, alpha: float, fraction: float = 0.1) -> float:
        """max over meridians of (min over the outer band of |c₁|) / sup|c₁|."""
        interior = self.theta < alpha
        band = interior & (self.theta >= (1.0 - fraction) * alpha)
        sup = float(np.max(np.abs(self.c1[interior])))
        if sup == 0.0 or not np.any(band):
            return 0.0
        per_meridian = np.min(np.abs(self.c1[band]), axis=0)
        return float(np.max(per_meridian) / sup)

    def to_frame(self) -> pd.DataFrame:
        T, P = np.meshgrid(self.theta, self.phi, indexing="ij")
        return pd.DataFrame({"theta": T.ravel(), "phi": P.ravel(), "xi1": self.xi1.ravel(), "c1": self.c1.ravel()})


def first_order_by_modes(
    profile: RadialProfile,
    source: SourceField,
    k: int = 10,
    band: float = 0.1,
    amplitude_tol: float = 1e-12,
    config: LabConfig = DEFAULT_CONFIG,
) -> ModalExpansion:
    """
    Solve for ξ₁ mode by mode on a cap: F(θ, φ) is split into Fourier
    components, each component solved on the matching mode grid with its own
    eigenbasis, and the results recombined on the (θ, φ) samples.
    """
    n = profile.n
    phi = source.phi
    n_phi = len(phi)
    if n_phi < 4 or not np.allclose(phi, 2.0 * math.pi * np.arange(n_phi) / n_phi):
        raise PreconditionError("modal expansion needs F on a uniform periodic azimuth grid")
    coeffs = np.fft.rfft(source.values, axis=1)
    overall = max(float(np.max(np.abs(source.values))), 1e-300)

    xi1 = np.zeros_like(source.values)
    c1 = np.zeros_like(source.values)
    parts, eigenvalues = [], {}
    residual = 0.0
    for m in range(coeffs.shape[1]):
        scale = 1.0 / n_phi if m in (0, n_phi / 2) else 2.0 / n_phi
        components = [("cos", scale * coeffs[:, m].real, np.cos(m * phi))]
        if 0 < m < n_phi / 2:
            components.append(("sin", -scale * coeffs[:, m].imag, np.sin(m * phi)))
        components = [c for c in components if np.max(np.abs(c[1])) > amplitude_tol * overall]
        if not components:
            continue
        section = SectionGrid.cap(n, profile.alpha, profile.N, mode=m)
        basis = eigen_solve(section, profile.rho, n, k=k, mode=m, config=config)
        eigenvalues[m] = [pair.eigenvalue for pair in basis]
        for label, F_m, azimuth in components:
            part = first_order_coefficient(section, profile.rho, profile.xi, F_m, basis, n, band, config=config)
            parts.append((m, label, part))
            xi1 += part.xi1[:, None] * azimuth[None, :]
            c1 += part.c1[:, None] * azimuth[None, :]
            residual = max(residual, part.residual)
    return ModalExpansion(profile.theta, phi, source.values, xi1, c1, parts, eigenvalues, residual)


# ======================================================================
# Supersolutions for the remainder estimate
# ======================================================================

CASES = {1: "mu1 > 2", 2: "mu1 = 2", 3: "mu1 < 2"}


def select_case(mu: float, band: float = 0.05) -> Tuple[int, bool]:
    """Remainder case from μ₁ and whether μ₁ lies in the ambiguity band around 2."""
    ambiguous = abs(mu - 2.0) < band
    if ambiguous:
        return 2, True
    return (1 if mu > 2.0 else 3), False


@dataclass
class SupersolutionInputs:
    """Angular data for the supersolution on a rotationally symmetric cone."""

    profile: RadialProfile
    phi1: np.ndarray
    lam1: float
    xi1: Optional[np.ndarray] = None
    F: Optional[np.ndarray] = None
    diffeo: Optional[DiffeoMap] = None

    def __post_init__(self):
        size = len(self.profile.theta)
        for name in ("phi1", "xi1", "F"):
            value = getattr(self, name)
            if value is not None and len(value) != size:
                raise PreconditionError(f"{name} has {len(value)} nodes, profile has {size}")
        if self.diffeo is not None and self.diffeo.n != self.profile.n:
            raise PreconditionError("map and profile dimensions differ")

    @property
    def mu(self) -> float:
        return mu1(self.lam1, self.profile.n)


@dataclass
class SupersolutionReport:
    """Sampled residual of ℒw − (n(n−2)/4)w^p, normalized by u_V^p."""

    case: int
    max_residual: float
    samples: int
    r_range: Tuple[float, float]
    constants: Dict[str, float]

    @property
    def certified(self) -> bool:
        return self.max_residual <= self.constants.get("slack", 1e-3)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "case": self.case,
            "max_residual": self.max_residual,
            "samples": self.samples,
            "r_range": list(self.r_range),
            "constants": self.constants,
            "certified": self.certified,
        }


def _spline(theta: np.ndarray, values: np.ndarray) -> CubicSpline:
    return CubicSpline(theta, values, bc_type=((1, 0.0), "not-a-knot"))


def _sample_points(profile: RadialProfile, r_min: float, r_max: float, count: int, seed: int):
    rng = np.random.default_rng(seed)
    r = np.exp(rng.uniform(math.log(r_min), math.log(r_max), count))
    nodes = np.flatnonzero(profile.theta < profile.alpha)[:-1]
    which = rng.choice(nodes, size=count)
    return r, which


def supersolution_residual(
    case: int,
    inputs: SupersolutionInputs,
    A0: float,
    A1: float,
    r: np.ndarray,
    nodes: np.ndarray,
) -> np.ndarray:
    """
    ℒw − (n(n−2)/4)w^p divided by u_V^p at points (r, θ_node) on φ = 0.

    w = u_V + ξ₁r^{2−n/2} + A₀u_Vr² + A₁φ₁·g(r) with
    g = r^{3−n/2} (case 1), −r^{3−n/2}log r (case 2),
    r^{μ₁−(n−2)/2} − r^{3−n/2} (case 3).
    Angular Laplacians come from the equations satisfied by ξ, φ₁ and ξ₁;
    the map perturbation (a − I):∇²w + b·∇w uses spline derivatives.
    """
    profile = inputs.profile
    n = profile.n
    k = profile.exponent
    p = critical_power(n)
    kap = kappa(n)
    theta_nodes = profile.theta
    theta = theta_nodes[nodes]
    rho = profile.rho[nodes]
    xi = profile.xi[nodes]
    r = np.asarray(r, dtype=float)

    terms = []
    xi_spline = _spline(theta_nodes[:-1], profile.xi[:-1])
    lap_xi = 0.25 * (n - 2) ** 2 * xi + 0.25 * n * (n - 2) * xi ** p
    xi_angular = (xi, xi_spline(theta, 1), xi_spline(theta, 2))
    terms.append((power_radial(r, -k), xi_angular, lap_xi, 1.0))
    if A0:
        terms.append((power_radial(r, 2.0 - k), xi_angular, lap_xi, A0))
    if inputs.xi1 is not None and np.any(inputs.xi1):
        s1 = _spline(theta_nodes[:-1], inputs.xi1[:-1])
        xi1 = inputs.xi1[nodes]
        F = np.zeros_like(xi1) if inputs.F is None else inputs.F[nodes]
        lap_xi1 = F + kap * xi1 / rho ** 2 + 0.25 * n * (n - 4) * xi1
        terms.append((power_radial(r, 1.0 - k), (xi1, s1(theta, 1), s1(theta, 2)), lap_xi1, 1.0))
    if A1:
        s_phi = _spline(theta_nodes, inputs.phi1)
        phi1 = inputs.phi1[nodes]
        lap_phi = kap * phi1 / rho ** 2 - inputs.lam1 * phi1
        angular = (phi1, s_phi(theta, 1), s_phi(theta, 2))
        if case == 1:
            terms.append((power_radial(r, 2.0 - k), angular, lap_phi, A1))
        elif case == 2:
            g, g1, g2 = power_log_radial(r, 2.0 - k)
            terms.append(((-g, -g1, -g2), angular, lap_phi, A1))
        elif case == 3:
            g_a = power_radial(r, inputs.mu - 0.5 * (n - 2))
            g_b = power_radial(r, 2.0 - k)
            terms.append((tuple(x - y for x, y in zip(g_a, g_b)), angular, lap_phi, A1))
        else:
            raise PreconditionError(f"unknown supersolution case {case}")

    w = np.zeros_like(r)
    lap_w = np.zeros_like(r)
    grad_w = np.zeros((len(r), n))
    hess_w = np.zeros((len(r), n, n))
    points = r[:, None] * _sphere_points(theta, 0.0, n)
    _, _, yhat, e_t = cone_frame(points, "cap")
    for (g, g1, g2), (f, f1, f2), lap_f, weight in terms:
        w += weight * g * f
        lap_w += weight * (g2 * f + (n - 1) * g1 * f / r + g * lap_f / r ** 2)
        if inputs.diffeo is not None:
            frame = separable_frame(n, "cap", r, theta, (g, g1, g2), (f, f1, f2))
            _, grad, hess = assemble_cartesian(frame, yhat, e_t)
            grad_w += weight * grad
            hess_w += weight * hess

    operator = lap_w
    if inputs.diffeo is not None:
        A, B = inputs.diffeo.coefficients_at(points)
        operator = operator + np.einsum("pij,pij->p", A - np.eye(n)[None], hess_w) + np.einsum("pi,pi->p", B, grad_w)
    u_v = r ** (-k) * xi
    return (operator - 0.25 * n * (n - 2) * np.abs(w) ** p) / u_v ** p


def residual_floor(inputs: SupersolutionInputs) -> float:
    """
    sup |residual| of the bare cone solution w = u_V over the interior nodes.

    u_V is exact, so this is the discretization error of the angular data
    (splines of ξ) that every supersolution residual inherits.
    """
    bare = SupersolutionInputs(inputs.profile, inputs.phi1, inputs.lam1)
    nodes = np.flatnonzero(inputs.profile.theta < inputs.profile.alpha)[:-1]
    residual = supersolution_residual(1, bare, 0.0, 0.0, np.ones(len(nodes)), nodes)
    return float(np.max(np.abs(residual)))


def supersolution_build(
    case: int,
    inputs: SupersolutionInputs,
    A0: float,
    A1: float,
    r_min: float = 1e-4,
    r_max: float = 1e-1,
    samples: int = 400,
    seed: int = 0,
    slack: float = 1e-3,
) -> SupersolutionReport:
    """Evaluate the case-appropriate w on a seeded log-uniform annulus sample."""
    if not 0.0 < r_min < r_max:
        raise PreconditionError("need 0 < r_min < r_max")
    r, nodes = _sample_points(inputs.profile, r_min, r_max, samples, seed)
    residual = supersolution_residual(case, inputs, A0, A1, r, nodes)
    constants = {"A0": A0, "A1": A1, "slack": slack, "mu1": inputs.mu, "lambda1": inputs.lam1}
    return SupersolutionReport(case, float(np.max(residual)), samples, (r_min, r_max), constants)


def case_constants(inputs: SupersolutionInputs, case: int, c1_sup: float) -> Dict[str, float]:
    """
    Constants for the supersolution: δ-region {ξ^{4/(n−2)} ≤ 16/n}, C_δ = max ξ
    and c_δ = min φ₁ there, the spectral gap, k, A₀ = 1.1·max(2C₁/n, 1) and
    A₁ = kA₀.
    """
    profile = inputs.profile
    n = profile.n
    p = critical_power(n)
    interior = profile.theta < profile.alpha
    region = interior & (profile.rho >= math.sqrt(n) / 4.0)
    if not np.any(region):
        raise CertificationError("empty delta-region for the supersolution constants")
    C_delta = float(np.max(profile.xi[region]))
    c_delta = float(np.min(inputs.phi1[region]))
    if c_delta <= 0.0:
        raise CertificationError("first eigenfunction is not positive on the delta-region")
    gap = 4.0 if case == 2 else abs((3.0 - 0.5 * n) * (0.5 * n + 1.0) - inputs.lam1)
    k_const = 1.1 * (0.5 * n * C_delta ** p + 4.0 * C_delta) / (gap * c_delta)
    A0 = 1.1 * max(2.0 * c1_sup / n, 1.0)
    return {"C_delta": C_delta, "c_delta": c_delta, "gap": gap, "k": k_const, "A0": A0, "A1": k_const * A0, "C1": c1_sup}


def certified_radius(
    case: int,
    inputs: SupersolutionInputs,
    A0: float,
    A1: float,
    r_min: float = 1e-4,
    r_max: float = 0.5,
    samples: int = 400,
    seed: int = 0,
    slack: float = 1e-3,
    iterations: int = 30,
) -> float:
    """
    Largest r̄₁ ≤ r_max (bisection in log r) with residual ≤ slack on the
    samples of [r_min, r̄₁].

    Raises:
        CertificationError: already fails on the smallest annulus
    """
    def ok(radius: float) -> bool:
        report = supersolution_build(case, inputs, A0, A1, r_min, radius, samples, seed, slack)
        return report.max_residual <= slack

    if ok(r_max):
        return r_max
    lo, hi = math.log(r_min) + 1e-9, math.log(r_max)
    if not ok(math.exp(lo) * 1.0001):
        raise CertificationError(f"case {case} supersolution fails near r_min={r_min:g}")
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        if ok(math.exp(mid)):
            lo = mid
        else:
            hi = mid
    return math.exp(lo)

"""
Blow-up solves on Euclidean domains.

Balls are solved radially in w = u^{−2/(n−2)} and compared with the exact
solution u_s. Cones bent by an axisymmetric map are pulled back to the
tangent cone, where v = u∘S solves a:∇²v + b·∇v = (n(n−2)/4)v^p with
a = ∇T∇Tᵀ and b_i = ΔT^i. With w = r·ω(log r, θ) on a meridian grid the
cone solution is ω = ρ(θ). The artificial inner and outer spheres carry
bracketing data, and only nodes where the two brackets agree are trusted.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import scipy.sparse as sp

from config.lab_config import DEFAULT_CONFIG, LabConfig
from src.cone_profiles import RadialProfile, cone_solution_cartesian
from src.errors import CertificationError, InsufficientSpanError, PreconditionError
from src.geometry import ConeDescription, DiffeoMap
from src.newton import QuadraticTerm, QuasilinearForm, newton_solve
from src.section_grid import SectionGrid
from src.substitution import backsubstitution_residual, blowup_exponent, critical_power, rho_form

logger = logging.getLogger(__name__)


# ======================================================================
# Solutions
# ======================================================================

@dataclass
class BlowupSolution:
    """w = u^{−2/(n−2)} on a grid; w = 0 on boundary nodes."""

    w: np.ndarray
    n: int
    coordinates: Dict[str, np.ndarray]
    residual: float
    iterations: int = 0
    label: str = "solution"

    @property
    def u(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.where(self.w > 0, np.abs(self.w) ** (-blowup_exponent(self.n)), np.inf)

    def to_frame(self) -> pd.DataFrame:
        data = {name: np.ravel(values) for name, values in self.coordinates.items()}
        data["w"] = np.ravel(self.w)
        data["u"] = np.ravel(self.u)
        return pd.DataFrame(data)


def ball_exact(n: int, s: float, r: np.ndarray) -> np.ndarray:
    """u_s = (2s/(s² − r²))^{(n−2)/2}."""
    return (2.0 * s / (s ** 2 - np.asarray(r) ** 2)) ** blowup_exponent(n)


def solve_ball(n: int, s: float, N: int, config: LabConfig = DEFAULT_CONFIG) -> BlowupSolution:
    """
    Radial solve of wΔw = (n/2)|∇w|² − n/2 on B_s with w(s) = 0, w′(0) = 0.

    The exact solution is w = (s² − r²)/(2s).
    """
    if s <= 0:
        raise PreconditionError(f"ball radius must be positive, got {s}")
    if n < 3:
        raise PreconditionError(f"dimension must be >= 3, got {n}")
    grid = SectionGrid.radial(n, s, N)
    D = grid.gradient()
    lap = grid.laplacian()
    form = rho_form(lap, [(1.0, D, D)], n, 0.0)
    r = grid.nodes
    initial = (s - r) * (3.0 * s + r) / (4.0 * s)
    result = newton_solve(
        form, initial, grid.free,
        tol=config.newton_tol, max_iter=config.newton_max_iter, floor=config.positivity_floor,
        label=f"ball[n={n},s={s:g}]",
    )
    w = result.solution
    nodes = np.arange(0, N - 1)
    residual = backsubstitution_residual(w[nodes], (lap @ w)[nodes], ((D @ w) ** 2)[nodes], n, 0.0)
    return BlowupSolution(w, n, {"r": r}, float(np.max(np.abs(residual))), result.iterations, f"ball(s={s:g})")


def keller_osserman_ratio(u: np.ndarray, d: np.ndarray, n: int) -> float:
    """max of u/(2·u_d(0)) with u_d(0) = (2/d)^{(n−2)/2}; at most 1 when the ball bound holds."""
    return float(np.max(np.asarray(u) / (2.0 * (2.0 / np.asarray(d)) ** blowup_exponent(n))))


# ======================================================================
# Meridian domains
# ======================================================================

@dataclass(frozen=True)
class MeridianDomain:
    """
    Annular sector {r_in < r < r_out, 0 ≤ θ < α} of a rotationally symmetric
    cone in ℝ³, pulled back through an axisymmetric map; grid in (log r, θ).
    """

    alpha: float
    diffeo: DiffeoMap
    r_in: float
    r_out: float
    n_s: int
    n_theta: int

    def __post_init__(self):
        if not 0.0 < self.alpha < math.pi:
            raise PreconditionError(f"cone angle must lie in (0, pi), got {self.alpha}")
        if not 0.0 < self.r_in < self.r_out:
            raise PreconditionError("need 0 < r_in < r_out")
        if self.diffeo.n != 3:
            raise PreconditionError("meridian domains are three-dimensional")
        if self.r_out >= self.diffeo.validity_radius:
            raise PreconditionError(f"r_out={self.r_out} exceeds the map validity radius {self.diffeo.validity_radius:.3g}")
        if self.n_s < 8 or self.n_theta < 8:
            raise PreconditionError("meridian grids need at least 8x8 cells")

    @property
    def n(self) -> int:
        return 3

    @property
    def h_s(self) -> float:
        return math.log(self.r_out / self.r_in) / self.n_s

    @property
    def h_theta(self) -> float:
        return self.alpha / self.n_theta

    @property
    def s(self) -> np.ndarray:
        return math.log(self.r_in) + self.h_s * np.arange(self.n_s + 1)

    @property
    def theta(self) -> np.ndarray:
        return self.h_theta * np.arange(self.n_theta + 1)

    def mesh(self) -> Tuple[np.ndarray, np.ndarray]:
        """(r, θ) arrays of shape (n_s+1, n_theta+1)."""
        return np.meshgrid(np.exp(self.s), self.theta, indexing="ij")

    def points(self) -> np.ndarray:
        """Cone-side points y on the φ = 0 half-plane, shape (n_s+1, n_theta+1, 3)."""
        r, theta = self.mesh()
        return np.stack([r * np.sin(theta), np.zeros_like(r), r * np.cos(theta)], axis=-1)

    @property
    def free(self) -> np.ndarray:
        mask = np.zeros((self.n_s + 1, self.n_theta + 1), dtype=bool)
        mask[1:-1, :-1] = True
        return mask

    def to_cylindrical(self) -> Tuple[np.ndarray, np.ndarray]:
        """(r_cyl, z) of the domain-side points x = S(y)."""
        x = self.diffeo.inverse(self.points())
        return np.hypot(x[..., 0], x[..., 1]), x[..., 2]

    def physical_distance(self) -> np.ndarray:
        """d(x, 0) = |S y|."""
        return np.linalg.norm(self.diffeo.inverse(self.points()), axis=-1)


def _theta_operators(n_theta: int, h: float, theta: np.ndarray) -> Tuple[sp.csr_matrix, sp.csr_matrix, sp.csr_matrix]:
    """Dθ, Dθθ and cotθ·Dθ with the axis row regularized by even reflection."""
    size = n_theta + 1
    D = sp.lil_matrix((size, size))
    D2 = sp.lil_matrix((size, size))
    for j in range(1, n_theta):
        D[j, j - 1], D[j, j + 1] = -0.5 / h, 0.5 / h
        D2[j, j - 1], D2[j, j], D2[j, j + 1] = 1.0 / h ** 2, -2.0 / h ** 2, 1.0 / h ** 2
    D2[0, 0], D2[0, 1] = -2.0 / h ** 2, 2.0 / h ** 2
    cot = np.zeros(size)
    cot[1:-1] = 1.0 / np.tan(theta[1:-1])
    C = sp.lil_matrix(sp.diags(cot) @ D.tocsr())
    C[0, 0], C[0, 1] = -2.0 / h ** 2, 2.0 / h ** 2
    return D.tocsr(), D2.tocsr(), C.tocsr()


def _s_operators(n_s: int, h: float) -> Tuple[sp.csr_matrix, sp.csr_matrix]:
    size = n_s + 1
    D = sp.lil_matrix((size, size))
    D2 = sp.lil_matrix((size, size))
    for i in range(1, n_s):
        D[i, i - 1], D[i, i + 1] = -0.5 / h, 0.5 / h
        D2[i, i - 1], D2[i, i], D2[i, i + 1] = 1.0 / h ** 2, -2.0 / h ** 2, 1.0 / h ** 2
    return D.tocsr(), D2.tocsr()


def reference_profile(alpha: float, n_theta: int, config: LabConfig = DEFAULT_CONFIG) -> np.ndarray:
    """
    Cone profile ρ on the meridian θ nodes, solved with the meridian stencil:
    ρ(Dθθρ + cotθ·Dθρ + 2ρ) = (3/2)(ρ² + (Dθρ)²) − 3/2, ρ′(0) = 0, ρ(α) = 0.
    """
    theta = (alpha / n_theta) * np.arange(n_theta + 1)
    D, D2, C = _theta_operators(n_theta, alpha / n_theta, theta)
    L = D2 + C + 2.0 * sp.identity(n_theta + 1, format="csr")
    form = QuasilinearForm(L, [QuadraticTerm(1.5, D, D)], quadratic=1.5, constant=-1.5)
    free = np.ones(n_theta + 1, dtype=bool)
    free[-1] = False
    initial = (alpha ** 2 - theta ** 2) / (2.0 * alpha)
    result = newton_solve(form, initial, free, tol=config.newton_tol, max_iter=config.newton_max_iter,
                          floor=config.positivity_floor, label="meridian-reference")
    return result.solution


@dataclass
class MeridianSystem:
    """Assembled quasilinear form for ω on a meridian domain."""

    domain: MeridianDomain
    form: QuasilinearForm
    frame: Dict[str, np.ndarray]


def assemble_meridian(domain: MeridianDomain) -> MeridianSystem:
    """
    ω𝓛ω = (n/2)[A_rr((1+∂_s)ω)² + 2A_rθ((1+∂_s)ω)∂_θω + A_θθ(∂_θω)²] − n/2 with

    𝓛 = A_rr(∂_ss+∂_s) + 2A_rθ∂_sθ + A_θθ(∂_θθ+1+∂_s) + A_φφ(1+∂_s+cotθ∂_θ)
        + rB_r(1+∂_s) + rB_θ∂_θ.
    """
    n = domain.n
    theta = domain.theta
    r, th = domain.mesh()
    y = domain.points()
    A, B = domain.diffeo.coefficients_at(y.reshape(-1, 3))
    yhat = np.stack([np.sin(th), np.zeros_like(th), np.cos(th)], axis=-1).reshape(-1, 3)
    e_t = np.stack([np.cos(th), np.zeros_like(th), -np.sin(th)], axis=-1).reshape(-1, 3)
    e_p = np.tile([0.0, 1.0, 0.0], (yhat.shape[0], 1))

    def comp(u, v):
        return np.einsum("pi,pij,pj->p", u, A, v)

    frame = {
        "A_rr": comp(yhat, yhat),
        "A_rt": comp(yhat, e_t),
        "A_tt": comp(e_t, e_t),
        "A_pp": comp(e_p, e_p),
        "rB_r": r.ravel() * np.einsum("pi,pi->p", B, yhat),
        "rB_t": r.ravel() * np.einsum("pi,pi->p", B, e_t),
    }

    Dt, Dtt, Ct = _theta_operators(domain.n_theta, domain.h_theta, theta)
    Ds, Dss = _s_operators(domain.n_s, domain.h_s)
    It = sp.identity(domain.n_theta + 1, format="csr")
    Is = sp.identity(domain.n_s + 1, format="csr")
    I = sp.identity((domain.n_s + 1) * (domain.n_theta + 1), format="csr")
    DS = sp.kron(Ds, It, format="csr")
    DSS = sp.kron(Dss, It, format="csr")
    DT = sp.kron(Is, Dt, format="csr")
    DTT = sp.kron(Is, Dtt, format="csr")
    CT = sp.kron(Is, Ct, format="csr")
    DST = sp.kron(Ds, Dt, format="csr")

    def diag(name):
        return sp.diags(frame[name])

    L = (
        diag("A_rr") @ (DSS + DS)
        + 2.0 * diag("A_rt") @ DST
        + diag("A_tt") @ (DTT + I + DS)
        + diag("A_pp") @ (I + DS + CT)
        + diag("rB_r") @ (I + DS)
        + diag("rB_t") @ DT
    )
    terms = [
        QuadraticTerm(0.5 * n * frame["A_rr"], I + DS, I + DS),
        QuadraticTerm(n * frame["A_rt"], I + DS, DT),
        QuadraticTerm(0.5 * n * frame["A_tt"], DT, DT),
    ]
    form = QuasilinearForm(L, terms, quadratic=0.0, constant=-0.5 * n)
    return MeridianSystem(domain, form, frame)


def solve_meridian(
    system: MeridianSystem,
    boundary: np.ndarray,
    initial: np.ndarray,
    config: LabConfig = DEFAULT_CONFIG,
    label: str = "meridian",
) -> BlowupSolution:
    """Newton solve for ω with Dirichlet values taken from `boundary` on fixed nodes."""
    domain = system.domain
    free = domain.free
    start = np.where(free, initial, boundary).ravel()
    result = newton_solve(
        system.form, start, free.ravel(),
        tol=config.newton_tol, max_iter=config.newton_max_iter, floor=config.positivity_floor, label=label,
    )
    omega = result.solution.reshape(free.shape)
    R = system.form.residual(result.solution).reshape(free.shape)
    inner = np.zeros_like(free)
    inner[2:-2, :-2] = True
    residual = (2.0 / domain.n) * float(np.max(np.abs(R[inner]))) if np.any(inner) else 0.0
    r, theta = domain.mesh()
    coords = {"r": r, "theta": theta, "omega": omega}
    return BlowupSolution(r * omega, domain.n, coords, residual, result.iterations, label)


# ======================================================================
# Bracketed solves and ratio sampling
# ======================================================================

@dataclass
class BracketedSolution:
    """Upper and lower meridian solutions with the trusted region."""

    domain: MeridianDomain
    reference: np.ndarray
    upper: BlowupSolution
    lower: BlowupSolution
    gap: np.ndarray
    trusted: np.ndarray
    gap_tol: float
    eps_scale: float

    @property
    def ratio(self) -> np.ndarray:
        """Midpoint of the bracketed u(x)/u_V(Tx)."""
        return 0.5 * (self._ratio(self.upper) + self._ratio(self.lower))

    def _ratio(self, solution: BlowupSolution) -> np.ndarray:
        k = blowup_exponent(self.domain.n)
        omega = solution.coordinates["omega"]
        ref = np.broadcast_to(self.reference, omega.shape)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(ref > 0, (omega / np.where(ref > 0, ref, 1.0)) ** (-k), 1.0)

    @property
    def max_gap(self) -> float:
        return float(np.max(self.gap[self.domain.free]))

    def to_frame(self) -> pd.DataFrame:
        r_cyl, z = self.domain.to_cylindrical()
        w = 0.5 * (self.upper.w + self.lower.w)
        with np.errstate(divide="ignore"):
            u = np.where(w > 0, np.abs(w) ** (-blowup_exponent(self.domain.n)), np.inf)
        return pd.DataFrame({"r_cyl": r_cyl.ravel(), "z": z.ravel(), "w": w.ravel(), "u": u.ravel()})

    def header(self) -> Dict[str, Any]:
        d = self.domain
        return {
            "n": d.n,
            "alpha": d.alpha,
            "map": d.diffeo.name,
            "r_in": d.r_in,
            "r_out": d.r_out,
            "n_s": d.n_s,
            "n_theta": d.n_theta,
            "residual_upper": self.upper.residual,
            "residual_lower": self.lower.residual,
            "bracket_gap": self.max_gap,
            "trusted_fraction": float(np.mean(self.trusted[d.free])),
        }


def solve_axisymmetric(
    domain: MeridianDomain,
    eps_scale: float = 0.1,
    gap_tol: Optional[float] = None,
    config: LabConfig = DEFAULT_CONFIG,
) -> BracketedSolution:
    """
    Bracketing pair of meridian solves with data u_V(1 ± ε), ε = eps_scale·r,
    on the inner and outer spheres (ε = 0 for the identity map) and zero
    data on the lateral boundary. The two solves run concurrently.

    Raises:
        CertificationError: no trusted node outside the excluded inner cells
    """
    gap_tol = config.bracket_gap_tol if gap_tol is None else gap_tol
    reference = reference_profile(domain.alpha, domain.n_theta, config)
    system = assemble_meridian(domain)
    r, _ = domain.mesh()
    eps = np.zeros_like(r) if domain.diffeo.name == "identity" else eps_scale * r
    if np.any(eps >= 1.0):
        raise PreconditionError("bracket width eps_scale * r_out must stay below 1")
    base = np.broadcast_to(reference, r.shape)
    k = blowup_exponent(domain.n)
    upper_data = base * (1.0 + eps) ** (-1.0 / k)
    lower_data = base * (1.0 - eps) ** (-1.0 / k)

    with ThreadPoolExecutor(max_workers=2) as pool:
        upper_future = pool.submit(solve_meridian, system, upper_data, base, config, "meridian-upper")
        lower_future = pool.submit(solve_meridian, system, lower_data, base, config, "meridian-lower")
        upper, lower = upper_future.result(), lower_future.result()

    bracket = BracketedSolution(domain, reference, upper, lower, np.zeros_like(r), np.zeros_like(r, dtype=bool), gap_tol, eps_scale)
    gap = np.abs(bracket._ratio(upper) - bracket._ratio(lower))
    trusted = domain.free & (gap < gap_tol)
    trusted[: config.excluded_inner_cells + 1] = False
    bracket.gap, bracket.trusted = gap, trusted
    if not np.any(trusted):
        raise CertificationError(f"bracketing gap exceeds {gap_tol} everywhere in the reporting region")
    logger.debug("axisymmetric solve %s: max gap %.3e, trusted %.1f%%", domain.diffeo.name, bracket.max_gap,
                 100.0 * float(np.mean(trusted[domain.free])))
    return bracket


@dataclass
class RatioSamples:
    """Envelope of |u/u_V∘T − 1 [− c₁r]| against d = |x| over trusted nodes."""

    d: np.ndarray
    error: np.ndarray
    subtracted: bool

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"d": self.d, "error": self.error})


def ratio_profile(
    bracket: BracketedSolution,
    c1: Optional[Tuple[np.ndarray, np.ndarray]] = None,
) -> RatioSamples:
    """
    Per radius, the max over trusted θ nodes of |ratio − 1| (or of
    |ratio − 1 − c₁(θ)·r| when c1 = (θ nodes, values) is given), at the
    physical distance of the maximizing node.

    Raises:
        InsufficientSpanError: no trusted samples
    """
    domain = bracket.domain
    r, theta = domain.mesh()
    error = bracket.ratio - 1.0
    if c1 is not None:
        nodes, values = c1
        error = error - np.interp(theta, nodes, values) * r
    error = np.abs(error)
    dist = domain.physical_distance()
    ds, es = [], []
    for i in range(r.shape[0]):
        row = bracket.trusted[i]
        if not np.any(row):
            continue
        j = np.flatnonzero(row)[np.argmax(error[i, row])]
        ds.append(dist[i, j])
        es.append(error[i, j])
    if not ds:
        raise InsufficientSpanError("ratio_profile: no trusted samples")
    order = np.argsort(ds)
    return RatioSamples(np.asarray(ds)[order], np.asarray(es)[order], c1 is not None)


def face_exponent(bracket: BracketedSolution, theta_min: float = math.pi / 4) -> float:
    """
    Fitted exponent of u against the distance z = r·cosθ to the flat face,
    over trusted nodes with θ ≥ theta_min (half-space domains).
    """
    r, theta = bracket.domain.mesh()
    mask = bracket.trusted & (theta >= theta_min)
    z = r * np.cos(theta)
    u = 0.5 * (bracket.upper.u + bracket.lower.u)
    slope, _ = np.polyfit(np.log(z[mask]), np.log(u[mask]), 1)
    return float(slope)


# ======================================================================
# Barrier certification
# ======================================================================

def barrier_beta(n: int) -> float:
    """β = 0 for n = 3, 1 − 2/(n−2) for n ≥ 4."""
    return 0.0 if n == 3 else 1.0 - 2.0 / (n - 2)


def barrier_c3(n: int, C1: float) -> float:
    """C₃ = (4/(n(n+2)))(1 − ((n−2)/(n+2))β)^{−1}(2C₁ + n − 1)C₁^{4/(n−2)}."""
    beta = barrier_beta(n)
    return (4.0 / (n * (n + 2))) / (1.0 - (n - 2) / (n + 2) * beta) * (2.0 * C1 + n - 1) * C1 ** (4.0 / (n - 2))


@dataclass
class IngredientBounds:
    """Sampled constants for d²|∇²u_V| + d|∇u_V| ≤ C₁u_V and C₁⁻¹ ≤ d^k u_V ≤ 2^k."""

    C1: float
    derivative_constant: float
    lower_constant: float
    upper_value: float
    upper_ok: bool
    keller_osserman: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "C1": self.C1,
            "derivative_constant": self.derivative_constant,
            "lower_constant": self.lower_constant,
            "upper_value": self.upper_value,
            "upper_ok": self.upper_ok,
            "keller_osserman": self.keller_osserman,
        }


@dataclass
class BarrierReport:
    """Sampled ℒw − (n(n−2)/4)w^p over u_V^p for w = u_V + Au_V^β + Bu_V r."""

    max_residual: float
    A: float
    B: float
    radius: float
    beta: float
    samples: int
    map_name: str
    bounds: Optional[IngredientBounds] = None

    @property
    def certified(self) -> bool:
        return self.max_residual <= 0.0

    def to_dict(self) -> Dict[str, Any]:
        out = {
            "max_residual": self.max_residual,
            "A": self.A,
            "B": self.B,
            "radius": self.radius,
            "beta": self.beta,
            "samples": self.samples,
            "map": self.map_name,
            "certified": self.certified,
        }
        if self.bounds is not None:
            out["bounds"] = self.bounds.to_dict()
        return out


def _cone_samples(profile: RadialProfile, radius: float, count: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    r = np.exp(rng.uniform(math.log(radius * 1e-3), math.log(radius), count))
    theta = rng.uniform(0.0, profile.alpha * (1.0 - 1e-3), count)
    points = np.zeros((count, profile.n))
    points[:, 0] = r * np.sin(theta)
    points[:, -1] = r * np.cos(theta)
    return points


def ingredient_bounds(profile: RadialProfile, points: np.ndarray) -> IngredientBounds:
    """Evaluate the derivative and zeroth-order bounds of u_V on sample points."""
    cone = ConeDescription(profile.n, "cone", profile.alpha)
    n = profile.n
    k = blowup_exponent(n)
    u, grad, hess = cone_solution_cartesian(profile, points)
    d = cone.boundary_distance(points)
    derivative = float(np.max((d ** 2 * np.linalg.norm(hess, axis=(1, 2)) + d * np.linalg.norm(grad, axis=1)) / u))
    scaled = d ** k * u
    lower = float(1.0 / np.min(scaled))
    C1 = max(derivative, lower)
    upper_value = float(np.max(scaled))
    return IngredientBounds(C1, derivative, lower, upper_value, upper_value <= 2.0 ** k * (1.0 + 1e-9),
                            keller_osserman_ratio(u, d, n))


def barrier_residual(
    profile: RadialProfile,
    points: np.ndarray,
    A: float,
    B: float,
    diffeo: Optional[DiffeoMap] = None,
) -> np.ndarray:
    """
    (ℒw − (n(n−2)/4)w^p)/u_V^p at the points.

    The Euclidean part uses Δu_V = (n(n−2)/4)u_V^p, Δ(u^β) = βu^{β−1}Δu +
    β(β−1)u^{β−2}|∇u|² and Δ(ur) = rΔu + 2∂_ru + (n−1)u/r; a map adds
    (a − I):∇²w + b·∇w from Cartesian derivatives.
    """
    n = profile.n
    p = critical_power(n)
    beta = barrier_beta(n)
    u, grad, hess = cone_solution_cartesian(profile, points)
    r = np.linalg.norm(points, axis=1)
    yhat = points / r[:, None]
    u_r = np.einsum("pi,pi->p", grad, yhat)
    grad_sq = np.einsum("pi,pi->p", grad, grad)
    lap_u = 0.25 * n * (n - 2) * u ** p

    if beta == 0.0:
        w_beta, lap_beta = np.ones_like(u), np.zeros_like(u)
    else:
        w_beta = u ** beta
        lap_beta = beta * u ** (beta - 1.0) * lap_u + beta * (beta - 1.0) * u ** (beta - 2.0) * grad_sq
    w = u + A * w_beta + B * u * r
    lap_w = lap_u + A * lap_beta + B * (r * lap_u + 2.0 * u_r + (n - 1) * u / r)

    operator = lap_w
    if diffeo is not None and diffeo.name != "identity":
        eye = np.eye(n)[None]
        outer = grad[:, :, None] * grad[:, None, :]
        if beta == 0.0:
            grad_beta, hess_beta = np.zeros_like(grad), np.zeros_like(hess)
        else:
            grad_beta = beta * u[:, None] ** (beta - 1.0) * grad
            hess_beta = beta * u[:, None, None] ** (beta - 1.0) * hess + beta * (beta - 1.0) * u[:, None, None] ** (beta - 2.0) * outer
        grad_ur = r[:, None] * grad + u[:, None] * yhat
        cross = grad[:, :, None] * yhat[:, None, :]
        hess_ur = r[:, None, None] * hess + cross + np.swapaxes(cross, 1, 2) + u[:, None, None] * (
            eye - yhat[:, :, None] * yhat[:, None, :]) / r[:, None, None]
        grad_w = grad + A * grad_beta + B * grad_ur
        hess_w = hess + A * hess_beta + B * hess_ur
        coeff_a, coeff_b = diffeo.coefficients_at(points)
        operator = operator + np.einsum("pij,pij->p", coeff_a - eye, hess_w) + np.einsum("pi,pi->p", coeff_b, grad_w)
    return (operator - 0.25 * n * (n - 2) * w ** p) / u ** p


def barrier_certify(
    profile: RadialProfile,
    A: float,
    B: float,
    radius: float,
    diffeo: Optional[DiffeoMap] = None,
    samples: int = 400,
    seed: int = 0,
) -> BarrierReport:
    """Max sampled barrier residual on {|y| < radius} inside the cone."""
    if profile.kind != "cap":
        raise PreconditionError("barrier certification uses rotationally symmetric cones")
    points = _cone_samples(profile, radius, samples, seed)
    residual = barrier_residual(profile, points, A, B, diffeo)
    return BarrierReport(
        float(np.max(residual)), A, B, radius, barrier_beta(profile.n), samples,
        diffeo.name if diffeo is not None else "identity",
        ingredient_bounds(profile, points),
    )


def barrier_search(
    profile: RadialProfile,
    diffeo: Optional[DiffeoMap] = None,
    B_values: Sequence[float] = (1.0, 10.0, 100.0, 1000.0),
    radius_start: float = 0.1,
    halvings: int = 6,
    samples: int = 400,
    seed: int = 0,
) -> BarrierReport:
    """
    First (B, radius) with nonpositive sampled residual: B swept in order,
    radius halved from radius_start; A = C₃B with C₁ from the sampled
    ingredient bounds.

    Raises:
        CertificationError: search budget exhausted
    """
    last = None
    for B in B_values:
        radius = radius_start
        for _ in range(halvings + 1):
            points = _cone_samples(profile, radius, samples, seed)
            bounds = ingredient_bounds(profile, points)
            A = barrier_c3(profile.n, bounds.C1) * B
            report = barrier_certify(profile, A, B, radius, diffeo, samples, seed)
            last = report
            if report.certified:
                logger.debug("barrier certified with B=%g radius=%g", B, radius)
                return report
            radius *= 0.5
    raise CertificationError(
        f"no (B, radius) certified; last max residual {last.max_residual:.3e}" if last else "empty barrier search"
    )

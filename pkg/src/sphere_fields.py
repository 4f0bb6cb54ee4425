"""
Two-dimensional ρ-solves on spherical domains Σ ⊂ S² (n = 3).

Domains are caps, lunes or masks on a structured (Θ, φ) grid. The
Laplace–Beltrami operator is a finite-volume discretization: cap and mask
grids carry a single pole node with a polar-cap cell and periodic azimuth,
lune grids are tensor grids with Dirichlet edges. On caps the m = 0
reduction coincides with the one-dimensional cap scheme.
"""

import logging
import math
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from config.lab_config import DEFAULT_CONFIG, LabConfig
from src.errors import DomainError, PreconditionError
from src.newton import newton_solve
from src.substitution import backsubstitution_residual, rho_form, rho_to_blowup

logger = logging.getLogger(__name__)

SPHERE_N = 3
SPHERE_SHIFT = 0.25

MaskPredicate = Callable[[np.ndarray, np.ndarray], np.ndarray]


# ======================================================================
# Domains
# ======================================================================

@dataclass(frozen=True)
class SphericalDomain:
    """A section Σ of a cone in ℝ³."""

    kind: str
    alpha: float
    inside: Optional[MaskPredicate] = None

    def __post_init__(self):
        if self.kind not in ("cap", "lune", "mask"):
            raise PreconditionError(f"unknown spherical domain kind '{self.kind}'")
        if self.kind == "lune" and not 0.0 < self.alpha <= math.pi:
            raise PreconditionError(f"lune opening must lie in (0, pi], got {self.alpha}")
        if self.kind in ("cap", "mask") and not 0.0 < self.alpha < math.pi:
            raise PreconditionError(f"polar extent must lie in (0, pi), got {self.alpha}")
        if self.kind == "mask" and self.inside is None:
            raise PreconditionError("mask domains need an inside predicate")

    @classmethod
    def cap(cls, alpha: float) -> "SphericalDomain":
        return cls("cap", alpha)

    @classmethod
    def lune(cls, alpha: float) -> "SphericalDomain":
        return cls("lune", alpha)

    @classmethod
    def from_mask(cls, inside: MaskPredicate, theta_max: float) -> "SphericalDomain":
        return cls("mask", theta_max, inside)

    @classmethod
    def from_spec(cls, spec: Dict[str, Any]) -> "SphericalDomain":
        """Build a cap or lune from a JSON-style dict {"kind": ..., "alpha": ...}."""
        kind = spec.get("kind")
        if kind not in ("cap", "lune"):
            raise PreconditionError(f"domain spec must name a cap or lune, got {kind!r}")
        return cls(kind, float(spec["alpha"]))

    @property
    def rotationally_symmetric(self) -> bool:
        return self.kind == "cap"

    def distance(self, Theta: np.ndarray, phi: np.ndarray) -> np.ndarray:
        """Closed-form geodesic distance to ∂Σ for caps and lunes."""
        Theta = np.asarray(Theta, dtype=float)
        phi = np.asarray(phi, dtype=float)
        if self.kind == "cap":
            return np.maximum(self.alpha - Theta, 0.0)
        if self.kind == "lune":
            polar = np.minimum(Theta, math.pi - Theta)

            def face(gap):
                gap = np.clip(gap, 0.0, None)
                return np.where(gap <= 0.5 * math.pi, np.arcsin(np.clip(np.sin(Theta) * np.sin(gap), 0.0, 1.0)), polar)

            return np.minimum(face(phi), face(self.alpha - phi))
        raise PreconditionError("mask domains have no closed-form distance; use the grid field")

    def grid(self, n_theta: int, n_phi: int) -> "SphereGrid":
        if n_theta < 4 or n_phi < 4:
            raise PreconditionError(f"sphere grids need at least 4x4 cells, got {n_theta}x{n_phi}")
        if self.kind == "lune":
            return _lune_grid(self, n_theta, n_phi)
        return _polar_grid(self, n_theta, n_phi)


# ======================================================================
# Grids
# ======================================================================

@dataclass
class SphereGrid:
    """Node layout, cell areas and conductances of a (Θ, φ) grid."""

    domain: SphericalDomain
    n_theta: int
    n_phi: int
    h: float
    h_phi: float
    Theta: np.ndarray
    phi: np.ndarray
    free: np.ndarray
    mass: np.ndarray
    index: np.ndarray
    edges: Tuple[np.ndarray, np.ndarray, np.ndarray]
    periodic: bool
    pole: Optional[int] = None

    @property
    def size(self) -> int:
        return len(self.Theta)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.index.shape

    def to_array(self, values: np.ndarray) -> np.ndarray:
        """Node vector → (Θ rows, φ columns) array; cap row 0 repeats the pole."""
        return np.asarray(values)[self.index]

    def from_array(self, array: np.ndarray) -> np.ndarray:
        values = np.zeros(self.size)
        values[self.index.ravel()] = np.asarray(array, dtype=float).ravel()
        if self.pole is not None:
            values[self.pole] = float(np.mean(np.asarray(array)[0]))
        return values

    def stiffness(self) -> sp.csr_matrix:
        """Graph Laplacian of the conductances with fixed rows zeroed."""
        a, b, c = self.edges
        rows = np.concatenate([a, b, a, b])
        cols = np.concatenate([a, b, b, a])
        vals = np.concatenate([c, c, -c, -c])
        K = sp.coo_matrix((vals, (rows, cols)), shape=(self.size, self.size)).tocsr()
        return sp.csr_matrix(sp.diags(self.free.astype(float)) @ K)

    def laplacian(self) -> sp.csr_matrix:
        return sp.csr_matrix(sp.diags(1.0 / self.mass) @ (-self.stiffness()))

    def inner(self, f: np.ndarray, g: np.ndarray) -> float:
        return float(np.sum(self.mass * f * g))

    def norm(self, f: np.ndarray) -> float:
        return float(np.sqrt(self.inner(f, f)))

    def gradient_terms(self) -> List[Tuple[np.ndarray, sp.csr_matrix, sp.csr_matrix]]:
        """(weight, P, Q) triples whose weighted products sum to |∇u|²."""
        d_theta, d_phi, px, py = self.difference_operators()
        sin = np.sin(self.Theta)
        phi_weight = np.divide(1.0, sin ** 2, out=np.zeros_like(sin), where=sin > 1e-12)
        terms = [(np.ones(self.size), d_theta, d_theta), (phi_weight, d_phi, d_phi)]
        if self.pole is not None:
            pole = np.zeros(self.size)
            pole[self.pole] = 1.0
            terms += [(pole, px, px), (pole, py, py)]
        return terms

    def difference_operators(self) -> Tuple[sp.csr_matrix, sp.csr_matrix, sp.csr_matrix, sp.csr_matrix]:
        """Central ∂_Θ, ∂_φ on free ring nodes and the Cartesian pole gradient (x, y)."""
        rows_t, cols_t, vals_t = [], [], []
        rows_p, cols_p, vals_p = [], [], []
        nr, nc = self.shape
        for i in range(1, nr - 1):
            for j in range(nc):
                p = self.index[i, j]
                if not self.free[p] or p == self.pole:
                    continue
                rows_t += [p, p]
                cols_t += [self.index[i + 1, j], self.index[i - 1, j]]
                vals_t += [0.5 / self.h, -0.5 / self.h]
                if self.periodic:
                    right, left = self.index[i, (j + 1) % nc], self.index[i, (j - 1) % nc]
                else:
                    if j == 0 or j == nc - 1:
                        continue
                    right, left = self.index[i, j + 1], self.index[i, j - 1]
                rows_p += [p, p]
                cols_p += [right, left]
                vals_p += [0.5 / self.h_phi, -0.5 / self.h_phi]
        shape = (self.size, self.size)
        d_theta = sp.csr_matrix((vals_t, (rows_t, cols_t)), shape=shape)
        d_phi = sp.csr_matrix((vals_p, (rows_p, cols_p)), shape=shape)
        px = sp.csr_matrix(shape)
        py = sp.csr_matrix(shape)
        if self.pole is not None and self.free[self.pole]:
            ring = self.index[1]
            angles = self.phi[ring]
            scale = 2.0 / (self.n_phi * self.h)
            rows = np.full(len(ring), self.pole)
            px = sp.csr_matrix((scale * np.cos(angles), (rows, ring)), shape=shape)
            py = sp.csr_matrix((scale * np.sin(angles), (rows, ring)), shape=shape)
        return d_theta, d_phi, px, py

    @property
    def boundary_distance(self) -> np.ndarray:
        """d_Σ at every node (closed form for caps and lunes, nearest fixed node for masks)."""
        if self.domain.kind != "mask":
            return self.domain.distance(self.Theta, self.phi)
        points = _unit_vectors(self.Theta, self.phi)
        outside = points[~self.free]
        if outside.size == 0:
            raise DomainError("mask has no boundary nodes")
        chord, _ = cKDTree(outside).query(points)
        return 2.0 * np.arcsin(np.clip(0.5 * chord, 0.0, 1.0))

    def check_connected(self) -> None:
        free_idx = np.flatnonzero(self.free)
        if free_idx.size == 0:
            raise DomainError("domain has no interior nodes")
        K = self.stiffness()[free_idx][:, free_idx]
        count, _ = connected_components(K, directed=False)
        if count != 1:
            raise DomainError(f"mask is disconnected ({count} components)")


def _unit_vectors(Theta: np.ndarray, phi: np.ndarray) -> np.ndarray:
    return np.stack([np.sin(Theta) * np.cos(phi), np.sin(Theta) * np.sin(phi), np.cos(Theta)], axis=-1)


def _polar_grid(domain: SphericalDomain, n_theta: int, n_phi: int) -> SphereGrid:
    h = domain.alpha / n_theta
    h_phi = 2.0 * math.pi / n_phi
    rings = np.arange(1, n_theta + 1)
    theta_rings = rings * h
    phis = np.arange(n_phi) * h_phi

    index = np.zeros((n_theta + 1, n_phi), dtype=int)
    index[1:] = 1 + (rings[:, None] - 1) * n_phi + np.arange(n_phi)[None, :]
    size = 1 + n_theta * n_phi
    Theta = np.zeros(size)
    phi = np.zeros(size)
    Theta[index[1:]] = theta_rings[:, None]
    phi[index[1:]] = phis[None, :]

    mass = np.empty(size)
    mass[0] = 2.0 * math.pi * (1.0 - math.cos(0.5 * h))
    lower = np.cos(theta_rings - 0.5 * h)
    upper = np.cos(np.minimum(theta_rings + 0.5 * h, math.pi))
    mass[index[1:]] = (h_phi * (lower - upper))[:, None]

    a_list, b_list, c_list = [], [], []
    a_list.append(np.zeros(n_phi, dtype=int))
    b_list.append(index[1])
    c_list.append(np.full(n_phi, math.sin(0.5 * h) * h_phi / h))
    for i in range(1, n_theta):
        a_list.append(index[i])
        b_list.append(index[i + 1])
        c_list.append(np.full(n_phi, math.sin(i * h + 0.5 * h) * h_phi / h))
    for i in range(1, n_theta + 1):
        a_list.append(index[i])
        b_list.append(np.roll(index[i], -1))
        c_list.append(np.full(n_phi, h / (math.sin(i * h) * h_phi)))
    edges = (np.concatenate(a_list), np.concatenate(b_list), np.concatenate(c_list))

    if domain.kind == "cap":
        free = np.ones(size, dtype=bool)
        free[index[-1]] = False
    else:
        free = np.asarray(domain.inside(Theta, phi), dtype=bool).copy()
        free[index[-1]] = False

    grid = SphereGrid(domain, n_theta, n_phi, h, h_phi, Theta, phi, free, mass, index, edges, True, pole=0)
    if domain.kind == "mask":
        grid.check_connected()
    return grid


def _lune_grid(domain: SphericalDomain, n_theta: int, n_phi: int) -> SphereGrid:
    h = math.pi / n_theta
    h_phi = domain.alpha / n_phi
    thetas = np.arange(n_theta + 1) * h
    phis = np.arange(n_phi + 1) * h_phi
    index = np.arange((n_theta + 1) * (n_phi + 1)).reshape(n_theta + 1, n_phi + 1)
    Theta = np.repeat(thetas, n_phi + 1)
    phi = np.tile(phis, n_theta + 1)

    lower = np.cos(np.maximum(thetas - 0.5 * h, 0.0))
    upper = np.cos(np.minimum(thetas + 0.5 * h, math.pi))
    mass = np.repeat(h_phi * (lower - upper), n_phi + 1)

    a_list, b_list, c_list = [], [], []
    for i in range(n_theta):
        a_list.append(index[i])
        b_list.append(index[i + 1])
        c_list.append(np.full(n_phi + 1, math.sin(thetas[i] + 0.5 * h) * h_phi / h))
    for i in range(1, n_theta):
        a_list.append(index[i, :-1])
        b_list.append(index[i, 1:])
        c_list.append(np.full(n_phi, h / (math.sin(thetas[i]) * h_phi)))
    edges = (np.concatenate(a_list), np.concatenate(b_list), np.concatenate(c_list))

    free = np.zeros_like(Theta, dtype=bool)
    free[index[1:-1, 1:-1].ravel()] = True
    return SphereGrid(domain, n_theta, n_phi, h, h_phi, Theta, phi, free, mass, index, edges, False)


# ======================================================================
# Fields and the ρ-solve
# ======================================================================

@dataclass
class ScalarField:
    """Node values on a sphere grid."""

    grid: SphereGrid
    values: np.ndarray
    residual: float = 0.0
    iterations: int = 0
    extrapolated: bool = False
    name: str = "value"

    @property
    def array(self) -> np.ndarray:
        return self.grid.to_array(self.values)

    @property
    def interior(self) -> np.ndarray:
        return self.grid.free

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"Theta": self.grid.Theta, "phi": self.grid.phi, self.name: self.values})

    def header(self) -> Dict[str, Any]:
        return {
            "domain": self.grid.domain.kind,
            "alpha": self.grid.domain.alpha,
            "n_theta": self.grid.n_theta,
            "n_phi": self.grid.n_phi,
            "h": self.grid.h,
            "h_phi": self.grid.h_phi,
            "residual": self.residual,
            "extrapolated": self.extrapolated,
        }


def rho_derivatives_2d(grid: SphereGrid, rho: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Discrete Δρ and |∇ρ|² with the solver's own stencils."""
    grad_sq = np.zeros(grid.size)
    for weight, P, Q in grid.gradient_terms():
        grad_sq += weight * (P @ rho) * (Q @ rho)
    return grid.laplacian() @ rho, grad_sq


def _solve_on_sphere_grid(grid: SphereGrid, config: LabConfig) -> Tuple[np.ndarray, int, float]:
    form = rho_form(grid.laplacian(), grid.gradient_terms(), SPHERE_N, SPHERE_SHIFT)
    initial = np.where(grid.free, np.minimum(grid.boundary_distance, 0.5), 0.0)
    result = newton_solve(
        form,
        initial,
        grid.free,
        tol=config.newton_tol,
        max_iter=config.newton_max_iter,
        floor=config.positivity_floor,
        label=f"sphere[{grid.domain.kind},{grid.n_theta}x{grid.n_phi}]",
    )
    rho = result.solution
    lap, grad_sq = rho_derivatives_2d(grid, rho)
    free = grid.free
    residual = backsubstitution_residual(rho[free], lap[free], grad_sq[free], SPHERE_N, SPHERE_SHIFT)
    return rho, result.iterations, float(np.max(np.abs(residual)))


def solve_rho_2d(
    domain: SphericalDomain,
    n_theta: int,
    n_phi: int,
    extrapolate: bool = False,
    config: LabConfig = DEFAULT_CONFIG,
) -> ScalarField:
    """
    Solve ρΔρ = (3/2)|∇ρ|² − ρ²/2 − 3/2 on Σ ⊂ S² with ρ = 0 on ∂Σ.

    Args:
        domain: Cap, lune or mask
        n_theta, n_phi: Cells in Θ and φ
        extrapolate: Richardson-combine with the doubled grid
        config: Newton tolerances

    Returns:
        ScalarField of ρ with the back-substitution residual of ξ = ρ^{−1/2}

    Raises:
        DomainError: disconnected or empty mask
        NoConvergence: Newton failure
    """
    grid = domain.grid(n_theta, n_phi)
    rho, iterations, residual = _solve_on_sphere_grid(grid, config)
    if extrapolate:
        fine_grid = domain.grid(2 * n_theta, 2 * n_phi)
        fine, more, fine_residual = _solve_on_sphere_grid(fine_grid, config)
        fine_array = fine_grid.to_array(fine)[::2, ::2]
        combined = (4.0 * fine_array - grid.to_array(rho)) / 3.0
        rho = np.where(grid.free, grid.from_array(combined), 0.0)
        iterations += more
        residual = max(residual, fine_residual)
    logger.debug("sphere %s alpha=%.6g residual %.3e", domain.kind, domain.alpha, residual)
    return ScalarField(grid, rho, residual, iterations, extrapolate, name="rho")


def xi_field(rho: ScalarField) -> ScalarField:
    """ξ = ρ^{−1/2} (infinite on ∂Σ)."""
    return ScalarField(rho.grid, rho_to_blowup(rho.values, SPHERE_N), rho.residual, rho.iterations, rho.extrapolated, "xi")


def rho_bounds_2d(rho: ScalarField) -> Tuple[float, float]:
    """(c₃, c₄) = (min, max) of ρ/d_Σ over interior nodes."""
    d = rho.grid.boundary_distance
    mask = rho.grid.free & (d > 0)
    ratio = rho.values[mask] / d[mask]
    return float(np.min(ratio)), float(np.max(ratio))


def boundary_slopes_2d(rho: ScalarField, corner_margin: float = 0.25) -> np.ndarray:
    """
    One-sided normal slopes |∂_νρ| along smooth boundary arcs.

    Cap: every meridian at Θ = α. Lune: both faces φ = 0, α for Θ at least
    corner_margin·π away from the corners at the poles.
    """
    grid = rho.grid
    arr = rho.array
    if grid.domain.kind == "cap":
        return np.abs(4.0 * arr[-2] - arr[-3]) / (2.0 * grid.h)
    if grid.domain.kind == "lune":
        thetas = np.arange(grid.n_theta + 1) * grid.h
        rows = (thetas > corner_margin * math.pi) & (thetas < (1.0 - corner_margin) * math.pi)
        scale = 2.0 * grid.h_phi * np.sin(thetas[rows])
        left = np.abs(4.0 * arr[rows, 1] - arr[rows, 2]) / scale
        right = np.abs(4.0 * arr[rows, -2] - arr[rows, -3]) / scale
        return np.concatenate([left, right])
    raise PreconditionError("boundary slopes are reported for caps and lunes")


# ======================================================================
# Azimuthal modes
# ======================================================================

@dataclass
class ModeProfile:
    """Fourier coefficients a_m(Θ)cos mφ + b_m(Θ)sin mφ of a cap field."""

    m: int
    theta: np.ndarray
    cos: np.ndarray
    sin: np.ndarray

    @property
    def amplitude(self) -> float:
        return float(max(np.max(np.abs(self.cos)), np.max(np.abs(self.sin))))


def azimuthal_modes(field: ScalarField, m_max: int) -> List[ModeProfile]:
    """
    Discrete Fourier decomposition in φ for fields on a cap grid.

    Raises:
        PreconditionError: the domain is not a cap or m_max exceeds the Nyquist mode
    """
    grid = field.grid
    if grid.domain.kind != "cap":
        raise PreconditionError("azimuthal modes need a cap domain")
    n_phi = grid.n_phi
    if not 0 <= m_max <= n_phi // 2:
        raise PreconditionError(f"m_max must lie in [0, {n_phi // 2}], got {m_max}")
    coeffs = np.fft.rfft(field.array, axis=1)
    theta = np.arange(grid.n_theta + 1) * grid.h
    modes = []
    for m in range(m_max + 1):
        scale = 1.0 / n_phi if m in (0, n_phi / 2) else 2.0 / n_phi
        modes.append(ModeProfile(m, theta, scale * coeffs[:, m].real, -scale * coeffs[:, m].imag))
    return modes


def reconstruct_modes(modes: List[ModeProfile], grid: SphereGrid) -> np.ndarray:
    """Inverse of azimuthal_modes on the grid's (Θ, φ) array layout."""
    phis = np.arange(grid.n_phi) * grid.h_phi
    array = np.zeros(grid.shape)
    for mode in modes:
        array += mode.cos[:, None] * np.cos(mode.m * phis)[None, :] + mode.sin[:, None] * np.sin(mode.m * phis)[None, :]
    return array

"""
The singular eigenproblem of L₁ = Δ_θ − κ/ρ², κ = n(n+2)/4, on Σ.

Eigenpairs solve −L₁φ = λφ with φ = 0 on ∂Σ. The discrete pencil is
symmetric: S φ = λ M φ with S = K + κ·diag(M/ρ²), where K and M are the
stiffness and mass of the section grid. This is the ρ²-weighted form
ρ²Δ_hφ − κφ = −λρ²φ multiplied by diag(M/ρ²), so both have the same
spectrum. Sections are either SectionGrid caps (one azimuthal mode) or
SphereGrid domains.
"""

import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.linalg import splu, spsolve

from config.lab_config import DEFAULT_CONFIG, LabConfig
from src.errors import InsufficientSpanError, NoConvergence, PreconditionError

logger = logging.getLogger(__name__)


def kappa(n: int) -> float:
    """κ = n(n+2)/4."""
    return 0.25 * n * (n + 2)


def hemisphere_lambda1(n: int) -> float:
    """λ₁ = (n+2)(3n−2)/4 of the hemisphere, with φ₁ ∝ cos^{(n+2)/2}Θ."""
    return 0.25 * (n + 2) * (3 * n - 2)


def mu1(lam1: float, n: int) -> float:
    """
    μ₁ = √(((n−2)/2)² + λ₁).

    Raises:
        PreconditionError: λ₁ < 0
    """
    if not math.isfinite(lam1) or lam1 < 0.0:
        raise PreconditionError(f"mu1 needs a nonnegative first eigenvalue, got {lam1}")
    return math.sqrt(0.25 * (n - 2) ** 2 + lam1)


def harmonic_degree(mu: float, n: int) -> float:
    """Degree s = μ − (n−2)/2 of the homogeneous solution r^s φ₁; s(s+n−2) = λ₁."""
    return mu - 0.5 * (n - 2)


@dataclass
class EigenPair:
    """One eigenpair of −L₁ with M-normalized eigenvector on all section nodes."""

    index: int
    eigenvalue: float
    vector: np.ndarray
    section: Any
    rho: np.ndarray
    n: int
    mode: int = 0
    residual: float = 0.0
    iterations: int = 0

    @property
    def mu(self) -> float:
        return mu1(self.eigenvalue, self.n)

    def rayleigh_quotient(self) -> float:
        """(∫|∇φ|² + κφ²/ρ²)/∫φ² in the discrete inner products."""
        phi = self.vector
        free = self.section.free
        K = self.section.stiffness()
        mass = self.section.mass
        weighted = np.zeros_like(phi)
        weighted[free] = kappa(self.n) * mass[free] * phi[free] / self.rho[free] ** 2
        return float(phi @ (K @ phi) + phi @ weighted) / self.section.inner(phi, phi)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "index": self.index,
            "lambda": self.eigenvalue,
            "mu": self.mu,
            "mode": self.mode,
            "residual": self.residual,
            "iterations": self.iterations,
        }


def _pencil(section, rho: np.ndarray, n: int) -> Tuple[np.ndarray, sp.csc_matrix, np.ndarray]:
    free = np.asarray(section.free, dtype=bool)
    idx = np.flatnonzero(free)
    rho = np.asarray(rho, dtype=float)
    if rho.shape != free.shape:
        raise PreconditionError(f"rho has shape {rho.shape}, section has {free.shape}")
    if np.any(~np.isfinite(rho[idx])) or np.any(rho[idx] <= 0.0):
        raise PreconditionError("rho must be positive at every interior node")
    mass = np.asarray(section.mass)[idx]
    K = section.stiffness()[idx][:, idx]
    S = (K + sp.diags(kappa(n) * mass / rho[idx] ** 2)).tocsc()
    return idx, S, mass


def _fix_sign(vector: np.ndarray, first: bool) -> np.ndarray:
    if first:
        return vector if np.sum(vector) >= 0 else -vector
    scale = np.max(np.abs(vector))
    nonzero = np.flatnonzero(np.abs(vector) > 1e-8 * scale)
    if nonzero.size and vector[nonzero[0]] < 0:
        return -vector
    return vector


def eigen_solve(
    section,
    rho: np.ndarray,
    n: int,
    k: int = 10,
    mode: int = 0,
    guard: Optional[int] = None,
    config: LabConfig = DEFAULT_CONFIG,
) -> List[EigenPair]:
    """
    Lowest k eigenpairs of −L₁ by shift-and-invert subspace iteration.

    The shift is 0 (the spectrum is positive). Each sweep applies S⁻¹M to a
    block of k + guard vectors, orthonormalizes and performs a Rayleigh–Ritz
    step; the top guard vectors deflate the tail.

    Args:
        section: SectionGrid (one mode) or SphereGrid with stiffness/mass/free
        rho: ρ on all section nodes
        n: Dimension
        k: Number of pairs
        mode: Azimuthal mode recorded on the pairs
        guard: Extra block vectors (default max(5, k))
        config: eigen_tol and eigen_max_iter

    Returns:
        EigenPair list in increasing eigenvalue order

    Raises:
        PreconditionError: nonpositive ρ at an interior node, k < 1
        NoConvergence: residuals above eigen_tol after eigen_max_iter sweeps
    """
    if k < 1:
        raise PreconditionError(f"k must be at least 1, got {k}")
    idx, S, mass = _pencil(section, rho, n)
    size = idx.size
    if k > size:
        raise PreconditionError(f"requested {k} eigenpairs from {size} unknowns")
    block = min(size, k + (guard if guard is not None else max(5, k)))
    lu = splu(S)
    rng = np.random.default_rng(config.seed)
    X = rng.standard_normal((size, block))
    X[:, 0] = 1.0

    residuals = np.full(k, np.inf)
    for sweep in range(1, config.eigen_max_iter + 1):
        Y = lu.solve(mass[:, None] * X)
        Q, _ = np.linalg.qr(Y)
        S_r = Q.T @ (S @ Q)
        M_r = Q.T @ (mass[:, None] * Q)
        values, C = scipy.linalg.eigh(0.5 * (S_r + S_r.T), 0.5 * (M_r + M_r.T))
        X = Q @ C
        R = S @ X[:, :k] - (mass[:, None] * X[:, :k]) * values[None, :k]
        scale = np.abs(values[:k]) * np.linalg.norm(mass[:, None] * X[:, :k], axis=0)
        residuals = np.linalg.norm(R, axis=0) / scale
        logger.debug("eigen sweep %d max residual %.3e", sweep, float(np.max(residuals)))
        if np.max(residuals) <= config.eigen_tol:
            break
    else:
        raise NoConvergence(
            f"eigen_solve: residual {np.max(residuals):.3e} after {config.eigen_max_iter} sweeps",
            config.eigen_max_iter,
            float(np.max(residuals)),
        )

    pairs = []
    for i in range(k):
        vector = np.zeros(len(rho))
        vector[idx] = X[:, i]
        vector /= section.norm(vector)
        vector = _fix_sign(vector, first=(i == 0))
        pairs.append(EigenPair(i + 1, float(values[i]), vector, section, np.asarray(rho, dtype=float), n, mode, float(residuals[i]), sweep))
    return pairs


# ======================================================================
# Resolvent
# ======================================================================

@dataclass
class ResolventResult:
    """Solution of (−L₁ − λ)u = f."""

    solution: np.ndarray
    method: str
    tail_bound: float
    residual: float
    coefficients: np.ndarray


def _direct_operator(section, rho: np.ndarray, n: int, lam: float):
    idx, S, mass = _pencil(section, rho, n)
    return idx, (S - lam * sp.diags(mass)).tocsc(), mass


def resolvent_solve(
    lam: float,
    f: np.ndarray,
    basis: Sequence[EigenPair],
    method: str = "auto",
    tail_tol: float = 1e-5,
) -> ResolventResult:
    """
    Solve (−L₁ − λ)u = f, i.e. L₁u + λu = −f, with zero boundary data.

    The spectral solution is u = Σ ⟨f, φᵢ⟩/(λᵢ − λ)·φᵢ over the basis, with
    tail bound ‖f − Πf‖/(λ_k − λ). With method "auto" a direct sparse solve
    replaces it when the tail bound exceeds tail_tol.

    Raises:
        PreconditionError: λ within 1e−8 of a basis eigenvalue, empty basis
    """
    if not basis:
        raise PreconditionError("resolvent_solve needs a nonempty eigenbasis")
    if method not in ("auto", "spectral", "direct"):
        raise PreconditionError(f"unknown resolvent method '{method}'")
    eigenvalues = np.array([pair.eigenvalue for pair in basis])
    if np.min(np.abs(eigenvalues - lam)) <= 1e-8:
        raise PreconditionError(f"lambda={lam} lies within 1e-8 of the spectrum")

    section = basis[0].section
    rho = basis[0].rho
    n = basis[0].n
    f = np.where(section.free, np.asarray(f, dtype=float), 0.0)

    coefficients = np.array([section.inner(f, pair.vector) for pair in basis])
    projection = sum(c * pair.vector for c, pair in zip(coefficients, basis))
    gap = eigenvalues[-1] - lam
    tail = section.norm(f - projection) / gap if gap > 0 else math.inf
    u = sum(c / (lam_i - lam) * pair.vector for c, lam_i, pair in zip(coefficients, eigenvalues, basis))

    idx, A, mass = _direct_operator(section, rho, n, lam)
    used = "spectral"
    if method == "direct" or (method == "auto" and tail > tail_tol):
        u = np.zeros_like(f)
        u[idx] = spsolve(A, mass * f[idx])
        used = "direct"
        logger.debug("resolvent at lambda=%.4g: tail %.3e, using direct solve", lam, tail)

    rhs = mass * f[idx]
    denom = max(float(np.max(np.abs(rhs))), 1e-300)
    residual = float(np.max(np.abs(A @ u[idx] - rhs))) / denom
    return ResolventResult(np.asarray(u, dtype=float), used, float(tail), residual, coefficients)


# ======================================================================
# Decay near the boundary
# ======================================================================

@dataclass
class DecayFit:
    """Boundary decay |φ| ≈ C ρ^ν and the weighted derivative bound."""

    nu: float
    constant: float
    bound_constant: float
    epsilon: float
    count: int
    window: Tuple[float, float]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "nu_fit": self.nu,
            "C_fit": self.constant,
            "C_bound": self.bound_constant,
            "epsilon": self.epsilon,
            "count": self.count,
            "window": list(self.window),
        }


def _derivative_sizes(section, f: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Discrete |∇f| and a second-derivative size (|f″| on sections, |Δ_h f| on sphere grids)."""
    if hasattr(section, "gradient_terms"):
        grad_sq = np.zeros_like(f)
        for weight, P, Q in section.gradient_terms():
            grad_sq += weight * (P @ f) * (Q @ f)
        return np.sqrt(np.abs(grad_sq)), np.abs(section.laplacian() @ f)
    return np.abs(section.gradient() @ f), np.abs(section.second_difference() @ f)


def decay_check(
    pair: EigenPair,
    rho: Optional[np.ndarray] = None,
    band: Optional[Tuple[float, float]] = None,
    epsilon: float = 0.05,
    min_samples: int = 5,
) -> DecayFit:
    """
    Log–log fit of |φ| against ρ over a near-boundary band of ρ values.

    The default band is ρ ∈ [8h, 0.3]. The bound constant is the smallest C
    with |φ| + ρ|∇φ| + ρ²|∇²φ| ≤ Cρ^{ν−ε} on the band.

    Raises:
        InsufficientSpanError: fewer than min_samples band nodes
    """
    section = pair.section
    rho = pair.rho if rho is None else np.asarray(rho, dtype=float)
    h = section.h
    lo, hi = band if band is not None else (8.0 * h, 0.3)
    phi = pair.vector
    mask = section.free & (rho >= lo) & (rho <= hi) & (np.abs(phi) > 0)
    if int(np.sum(mask)) < min_samples:
        raise InsufficientSpanError(f"decay_check: {int(np.sum(mask))} samples in band [{lo:.3g}, {hi:.3g}]")
    x = np.log(rho[mask])
    y = np.log(np.abs(phi[mask]))
    nu, log_c = np.polyfit(x, y, 1)
    grad, second = _derivative_sizes(section, phi)
    weighted = np.abs(phi) + rho * grad + rho ** 2 * second
    bound = float(np.max(weighted[mask] / rho[mask] ** (nu - epsilon)))
    return DecayFit(float(nu), float(math.exp(log_c)), bound, epsilon, int(np.sum(mask)), (float(lo), float(hi)))

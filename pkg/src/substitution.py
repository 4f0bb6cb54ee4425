"""
The power substitution between blow-up profiles and vanishing profiles.

For v = ρ^{−k}, k = (n−2)/2, the blow-up equation

    Δv − q·v = (n(n−2)/4)·v^{(n+2)/(n−2)}

is equivalent to the quasilinear ρ-equation

    ρΔρ = (n/2)|∇ρ|² − (q/k)ρ² − n/2,

with q = (n−2)²/4 on spherical caps, q = −1/4 on the wedge cross-section
(n = 3) and q = 0 for Euclidean domains. Certificates map a computed ρ back
through the chain rule and measure the original residual.
"""

from typing import List, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from src.newton import QuadraticTerm, QuasilinearForm

GradientTerms = Sequence[Tuple[np.ndarray, sp.spmatrix, sp.spmatrix]]


def blowup_exponent(n: int) -> float:
    """k = (n−2)/2."""
    return 0.5 * (n - 2)


def critical_power(n: int) -> float:
    """(n+2)/(n−2)."""
    return (n + 2) / (n - 2)


def rho_to_blowup(rho: np.ndarray, n: int) -> np.ndarray:
    """v = ρ^{−(n−2)/2}, +∞ where ρ = 0."""
    rho = np.asarray(rho, dtype=float)
    with np.errstate(divide="ignore"):
        return np.where(rho > 0, np.abs(rho) ** (-blowup_exponent(n)), np.inf)


def rho_form(laplacian: sp.spmatrix, gradient_terms: GradientTerms, n: int, shift: float) -> QuasilinearForm:
    """Quasilinear form of the ρ-equation for a discrete Laplacian and |∇ρ|²."""
    k = blowup_exponent(n)
    terms: List[QuadraticTerm] = [
        QuadraticTerm(0.5 * n * np.asarray(weight, dtype=float), left, right)
        for weight, left, right in gradient_terms
    ]
    size = laplacian.shape[0]
    return QuasilinearForm(
        operator=laplacian,
        terms=terms,
        quadratic=np.full(size, -shift / k),
        constant=np.full(size, -0.5 * n),
    )


def rho_residual(rho, lap_rho, grad_sq_rho, n: int, shift: float) -> np.ndarray:
    """ρΔρ − (n/2)|∇ρ|² + (q/k)ρ² + n/2 from supplied derivatives."""
    k = blowup_exponent(n)
    return rho * lap_rho - 0.5 * n * grad_sq_rho + (shift / k) * rho ** 2 + 0.5 * n


def blowup_residual(v, lap_v, n: int, shift: float) -> np.ndarray:
    """Relative residual (Δv − qv)/((n(n−2)/4)v^p) − 1 of the original equation."""
    source = 0.25 * n * (n - 2) * v ** critical_power(n)
    return (lap_v - shift * v - source) / source


def backsubstitution_residual(rho, lap_rho, grad_sq_rho, n: int, shift: float) -> np.ndarray:
    """
    Original-equation residual of v = ρ^{−k} from derivatives of ρ.

    Δv is assembled by the chain rule Δv = −kρ^{−k−1}Δρ + k(k+1)ρ^{−k−2}|∇ρ|²,
    so the certificate applies to the same discrete derivatives the solver
    used.
    """
    rho = np.asarray(rho, dtype=float)
    k = blowup_exponent(n)
    v = rho ** (-k)
    lap_v = -k * rho ** (-k - 1) * lap_rho + k * (k + 1) * rho ** (-k - 2) * grad_sq_rho
    return blowup_residual(v, lap_v, n, shift)

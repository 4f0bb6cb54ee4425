"""
Finite-volume grids on one-dimensional sections.

A SectionGrid discretizes (1/w)(w u')' on nodes x_0<…<x_N with a weight w:
w ≡ 1 for a wedge interval, w = sin^{n−2}θ for a spherical cap (optionally
restricted to an azimuthal mode m), w = r^{n−1} for a radial ball. Cell
masses are exact integrals of w, so node 0 of a cap or ball is a regular
center with a half cell.
"""

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp
from numpy.polynomial.legendre import leggauss

from src.errors import PreconditionError

_GAUSS_X, _GAUSS_W = leggauss(8)


def _integrate(weight: Callable[[np.ndarray], np.ndarray], lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    pts = mid[:, None] + half[:, None] * _GAUSS_X[None, :]
    return half * (weight(pts) @ _GAUSS_W)


@dataclass(frozen=True)
class SectionGrid:
    """Uniform nodes on [0, length] with a finite-volume weight."""

    kind: str
    length: float
    N: int
    n: int = 3
    mode: int = 0

    def __post_init__(self):
        if self.kind not in ("interval", "cap", "radial"):
            raise PreconditionError(f"unknown section kind '{self.kind}'")
        if self.N < 4:
            raise PreconditionError(f"section grid needs N >= 4, got {self.N}")
        if self.mode and self.kind != "cap":
            raise PreconditionError("azimuthal modes exist only on caps")

    # ------------------------------------------------------------------
    # Constructors
    # ------------------------------------------------------------------

    @classmethod
    def interval(cls, alpha: float, N: int) -> "SectionGrid":
        return cls("interval", alpha, N, n=3)

    @classmethod
    def cap(cls, n: int, alpha: float, N: int, mode: int = 0) -> "SectionGrid":
        return cls("cap", alpha, N, n=n, mode=mode)

    @classmethod
    def radial(cls, n: int, radius: float, N: int) -> "SectionGrid":
        return cls("radial", radius, N, n=n)

    def with_mode(self, mode: int) -> "SectionGrid":
        return SectionGrid(self.kind, self.length, self.N, self.n, mode)

    # ------------------------------------------------------------------
    # Geometry
    # ------------------------------------------------------------------

    @property
    def h(self) -> float:
        return self.length / self.N

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.length, self.N + 1)

    @property
    def regular_center(self) -> bool:
        """Node 0 is a free regular center rather than a Dirichlet node."""
        return self.kind == "radial" or (self.kind == "cap" and self.mode == 0)

    @property
    def free(self) -> np.ndarray:
        mask = np.zeros(self.N + 1, dtype=bool)
        mask[1:-1] = True
        mask[0] = self.regular_center
        return mask

    @property
    def boundary_distance(self) -> np.ndarray:
        """Distance from each node to the Dirichlet end(s)."""
        x = self.nodes
        if self.kind == "interval":
            return np.minimum(x, self.length - x)
        return self.length - x

    def weight(self, x: np.ndarray) -> np.ndarray:
        if self.kind == "interval":
            return np.ones_like(x)
        if self.kind == "cap":
            return np.sin(x) ** (self.n - 2)
        return x ** (self.n - 1)

    @property
    def mode_coefficient(self) -> float:
        """Eigenvalue m(m+n−3) of the mode on S^{n−2}."""
        return float(self.mode * (self.mode + self.n - 3))

    @property
    def mass(self) -> np.ndarray:
        """Cell integrals of the weight (half cells at both ends)."""
        x = self.nodes
        h = self.h
        lo = np.clip(x - 0.5 * h, 0.0, self.length)
        hi = np.clip(x + 0.5 * h, 0.0, self.length)
        return _integrate(self.weight, lo, hi)

    # ------------------------------------------------------------------
    # Operators on the full node vector
    # ------------------------------------------------------------------

    def stiffness(self) -> sp.csr_matrix:
        """Symmetric flux matrix K with (Ku)_i = −(flux_{i+½} − flux_{i−½})."""
        x = self.nodes
        h = self.h
        half = self.weight(x[:-1] + 0.5 * h) / h
        N = self.N
        rows, cols, vals = [], [], []
        for i in range(N + 1):
            if not self.free[i]:
                continue
            diag = 0.0
            if i < N:
                rows.append(i); cols.append(i + 1); vals.append(-half[i])
                diag += half[i]
            if i > 0:
                rows.append(i); cols.append(i - 1); vals.append(-half[i - 1])
                diag += half[i - 1]
            rows.append(i); cols.append(i); vals.append(diag)
        K = sp.csr_matrix((vals, (rows, cols)), shape=(N + 1, N + 1))
        if self.mode_coefficient:
            potential = np.zeros(N + 1)
            inner = self.free & (x > 0)
            potential[inner] = self.mass[inner] * self.mode_coefficient / np.sin(x[inner]) ** 2
            K = K + sp.diags(potential)
        return sp.csr_matrix(K)

    def laplacian(self) -> sp.csr_matrix:
        """Δ_h = −M⁻¹K (rows of fixed nodes are zero)."""
        return sp.csr_matrix(sp.diags(1.0 / self.mass) @ (-self.stiffness()))

    def gradient(self) -> sp.csr_matrix:
        """Central first difference; zero at a regular center by symmetry."""
        N = self.N
        main = np.zeros(N + 1)
        upper = np.full(N, 0.5 / self.h)
        lower = np.full(N, -0.5 / self.h)
        upper[0] = 0.0
        lower[-1] = 0.0
        D = sp.diags([lower, main, upper], [-1, 0, 1], shape=(N + 1, N + 1), format="lil")
        D[0, :] = 0.0
        D[N, :] = 0.0
        return sp.csr_matrix(D)

    def second_difference(self) -> sp.csr_matrix:
        """Plain second difference; even reflection at a regular center."""
        N = self.N
        h2 = self.h ** 2
        D = sp.diags(
            [np.ones(N), -2.0 * np.ones(N + 1), np.ones(N)], [-1, 0, 1], shape=(N + 1, N + 1), format="lil"
        ) / h2
        D = sp.lil_matrix(D)
        D[0, :] = 0.0
        if self.regular_center:
            D[0, 0] = -2.0 / h2
            D[0, 1] = 2.0 / h2
        D[N, :] = 0.0
        return sp.csr_matrix(D)

    def inner(self, f: np.ndarray, g: np.ndarray) -> float:
        """Weighted L² product Σ M f g (azimuthal measure dropped)."""
        return float(np.sum(self.mass * f * g))

    def norm(self, f: np.ndarray) -> float:
        return float(np.sqrt(self.inner(f, f)))

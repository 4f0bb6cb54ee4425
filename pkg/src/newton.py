"""
Damped Newton iteration for quasilinear problems of product form.

All ρ- and w-equations of the lab share the structure

    R(u) = u·(L u) − Σ_t w_t·(P_t u)·(Q_t u) − b·u² − c = 0,

with sparse linear operators L, P_t, Q_t and nodewise coefficient arrays
w_t, b, c. Nodes are split into free unknowns and fixed (Dirichlet) nodes;
the residual is enforced on free nodes only.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from src.errors import NoConvergence, PreconditionError

logger = logging.getLogger(__name__)


@dataclass
class QuadraticTerm:
    """One product term w·(P u)·(Q u)."""

    weight: np.ndarray
    left: sp.spmatrix
    right: sp.spmatrix


@dataclass
class QuasilinearForm:
    """R(u) = u·(L u) − Σ w·(P u)·(Q u) − b·u² − c on a node vector."""

    operator: sp.spmatrix
    terms: List[QuadraticTerm] = field(default_factory=list)
    quadratic: Optional[np.ndarray] = None
    constant: Optional[np.ndarray] = None

    def __post_init__(self):
        size = self.operator.shape[0]
        self.operator = sp.csr_matrix(self.operator)
        if self.quadratic is None:
            self.quadratic = np.zeros(size)
        if self.constant is None:
            self.constant = np.zeros(size)
        self.quadratic = np.broadcast_to(np.asarray(self.quadratic, dtype=float), (size,)).copy()
        self.constant = np.broadcast_to(np.asarray(self.constant, dtype=float), (size,)).copy()
        for term in self.terms:
            term.weight = np.broadcast_to(np.asarray(term.weight, dtype=float), (size,)).copy()
            term.left = sp.csr_matrix(term.left)
            term.right = sp.csr_matrix(term.right)

    @property
    def size(self) -> int:
        return self.operator.shape[0]

    def residual(self, u: np.ndarray) -> np.ndarray:
        """Evaluate R(u) at every node."""
        value = u * (self.operator @ u) - self.quadratic * u ** 2 - self.constant
        for term in self.terms:
            value -= term.weight * (term.left @ u) * (term.right @ u)
        return value

    def jacobian(self, u: np.ndarray) -> sp.csr_matrix:
        """Exact Jacobian of R at u."""
        jac = sp.diags(self.operator @ u) + sp.diags(u) @ self.operator - sp.diags(2.0 * self.quadratic * u)
        for term in self.terms:
            pu = term.left @ u
            qu = term.right @ u
            jac = jac - sp.diags(term.weight * qu) @ term.left - sp.diags(term.weight * pu) @ term.right
        return sp.csr_matrix(jac)


@dataclass
class NewtonResult:
    """Outcome of a Newton solve."""

    solution: np.ndarray
    iterations: int
    residual_norm: float
    history: List[float]


def newton_solve(
    form: QuasilinearForm,
    initial: np.ndarray,
    free: Sequence[bool],
    tol: float = 1e-12,
    max_iter: int = 50,
    floor: Optional[float] = 1e-14,
    step_tol: float = 1e-13,
    stall_tol: float = 1e-9,
    label: str = "newton",
) -> NewtonResult:
    """
    Solve R(u)=0 on the free nodes by damped Newton iteration.

    Steps are halved until the residual sup norm decreases (Armijo-type
    acceptance); free values are projected onto [floor, ∞) when a floor is
    given. Convergence is declared on the residual norm or, once the
    residual sits at round-off, on the size of a full Newton update.

    Args:
        form: Quasilinear problem
        initial: Initial node vector; fixed nodes keep their values
        free: Boolean mask of free nodes
        tol: Residual sup-norm tolerance
        max_iter: Iteration budget
        floor: Positivity floor for free values (None disables projection)
        step_tol: Relative update size treated as converged
        stall_tol: Residual accepted when the line search stalls at round-off
        label: Name used in log messages

    Returns:
        NewtonResult with the full node vector

    Raises:
        NoConvergence: budget exhausted or line search failed
    """
    free = np.asarray(free, dtype=bool)
    if free.shape != (form.size,):
        raise PreconditionError(f"{label}: free mask has shape {free.shape}, expected ({form.size},)")
    idx = np.flatnonzero(free)
    u = np.array(initial, dtype=float)
    if floor is not None:
        u[idx] = np.maximum(u[idx], floor)

    history: List[float] = []
    for iteration in range(max_iter):
        res = form.residual(u)[idx]
        norm = float(np.max(np.abs(res))) if idx.size else 0.0
        history.append(norm)
        logger.debug("%s iteration %d residual %.3e", label, iteration, norm)
        if norm <= tol:
            return NewtonResult(u, iteration, norm, history)

        jac = form.jacobian(u)[idx][:, idx].tocsc()
        delta = np.atleast_1d(spsolve(jac, -res))
        if not np.all(np.isfinite(delta)):
            raise NoConvergence(f"{label}: singular Newton system", iteration, norm)

        scale = max(1.0, float(np.max(np.abs(u[idx]))))
        if np.max(np.abs(delta)) <= step_tol * scale:
            u[idx] += delta
            final = float(np.max(np.abs(form.residual(u)[idx])))
            history.append(final)
            return NewtonResult(u, iteration + 1, final, history)

        step = 1.0
        while True:
            trial = u.copy()
            trial[idx] += step * delta
            if floor is not None:
                trial[idx] = np.maximum(trial[idx], floor)
            trial_norm = float(np.max(np.abs(form.residual(trial)[idx])))
            if trial_norm < (1.0 - 1e-4 * step) * norm:
                break
            step *= 0.5
            if step < 2.0 ** -12:
                if norm <= stall_tol:
                    logger.debug("%s stalled at round-off, residual %.3e", label, norm)
                    return NewtonResult(u, iteration, norm, history)
                raise NoConvergence(f"{label}: line search failed", iteration, norm)
        u = trial

    final = float(np.max(np.abs(form.residual(u)[idx])))
    if final <= tol:
        return NewtonResult(u, max_iter, final, history)
    raise NoConvergence(f"{label}: no convergence after {max_iter} iterations", max_iter, final)

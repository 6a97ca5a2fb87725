"""Sparse symmetric factorisation and Krylov solvers on matrix-free operators."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import BreakdownError, NonConvergenceError, NotSPDError, PreconditionerError

log = logging.getLogger(__name__)

BREAKDOWN_TOL = 1e-30

__all__ = [
    "LinearOperator",
    "SolveReport",
    "SparseCholesky",
    "sparse_cholesky",
    "aslinearoperator",
    "fcg",
    "bicgstab",
]


@dataclass
class LinearOperator:
    """Square operator known through its action on vectors."""

    n: int
    action: Callable[[np.ndarray], np.ndarray]
    matrix: Optional[sp.spmatrix] = None

    def __call__(self, x):
        return self.action(x)

    matvec = __call__

    def dense(self):
        if self.matrix is not None:
            return self.matrix.toarray() if sp.issparse(self.matrix) else np.asarray(self.matrix)
        eye = np.eye(self.n)
        return np.column_stack([self.action(eye[:, j]) for j in range(self.n)])


def aslinearoperator(A):
    if isinstance(A, LinearOperator):
        return A
    if sp.issparse(A) or isinstance(A, np.ndarray):
        mat = A.tocsr() if sp.issparse(A) else np.asarray(A)
        return LinearOperator(mat.shape[0], lambda x: mat @ x, mat)
    if callable(A):
        raise TypeError("wrap a bare callable in LinearOperator(n, action)")
    raise TypeError(f"cannot build an operator from {type(A).__name__}")


@dataclass
class SolveReport:
    iterations: int = 0
    residual: float = 0.0
    history: list = field(default_factory=list)
    converged: bool = False
    fallbacks: int = 0


class SparseCholesky:
    """Symmetric factorisation P A P^T = L D L^T of a sparse SPD matrix.

    Backed by SuperLU with a symmetric minimum-degree ordering and no
    numerical pivoting, so the U factor's diagonal holds the LDL^T pivots;
    any non-positive pivot means A is not SPD.
    """

    def __init__(self, A, check_symmetry=True):
        A = sp.csc_matrix(A, dtype=float)
        if A.shape[0] != A.shape[1]:
            raise ValueError("matrix must be square")
        self.n = A.shape[0]
        self._lu = None
        if self.n == 0:
            return
        if check_symmetry:
            scale = abs(A).max()
            if scale > 0 and abs(A - A.T).max() > 1e-12 * scale:
                raise NotSPDError("matrix is not symmetric")
        try:
            lu = splu(A, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                      options=dict(SymmetricMode=True))
        except RuntimeError as exc:
            raise NotSPDError(f"factorisation failed: {exc}") from None
        pivots = lu.U.diagonal()
        if not np.all(pivots > 0):
            raise NotSPDError(f"non-positive pivot {pivots.min():.3e}")
        self._lu = lu

    def solve(self, b):
        b = np.asarray(b, dtype=float)
        if self.n == 0:
            return np.zeros_like(b)
        return self._lu.solve(b)

    __call__ = solve


def sparse_cholesky(A):
    return SparseCholesky(A)


def _call_preconditioner(M, r, report):
    try:
        return M(r)
    except PreconditionerError as exc:
        report.fallbacks += 1
        log.warning("preconditioner failed (%s); using identity for this step", exc)
        return r.copy()


def fcg(A, b, M=None, eps=1e-8, maxit=500, callback=None):
    """Flexible preconditioned conjugate gradients.

    The search-direction update uses the Polak-Ribiere coefficient
    ``z_{k+1} . (r_{k+1} - r_k) / (z_k . r_k)``, which tolerates a
    non-symmetric or inexact preconditioner and reduces to PCG when M is
    symmetric. Stops when ``||r||_2 / ||b||_2 < eps``.

    Returns ``(x, report)``; ``report.converged`` is False if ``maxit`` was
    reached.
    """
    A = aslinearoperator(A)
    b = np.asarray(b, dtype=float)
    x = np.zeros_like(b)
    report = SolveReport()
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        report.history = [0.0]
        report.converged = True
        return x, report
    precond = M if M is not None else (lambda v: v.copy())
    r = b.copy()
    report.history.append(1.0)
    z = _call_preconditioner(precond, r, report)
    p = z.copy()
    rz = r @ z
    for it in range(1, maxit + 1):
        q = A(p)
        pq = p @ q
        if not pq > 0:
            raise BreakdownError(f"non-positive curvature p.Ap = {pq:.3e}", x=x, report=report)
        alpha = rz / pq
        x += alpha * p
        r_new = r - alpha * q
        res = np.linalg.norm(r_new) / bnorm
        report.history.append(res)
        report.iterations = it
        report.residual = res
        if callback is not None:
            callback(it, x, res)
        if res < eps:
            report.converged = True
            break
        z_new = _call_preconditioner(precond, r_new, report)
        beta = (z_new @ (r_new - r)) / rz
        rz = r_new @ z_new
        p = z_new + beta * p
        r = r_new
    return x, report


def bicgstab(A, b, eps=1e-8, maxit=200, x0=None):
    """Unpreconditioned BiCGSTAB. Raises on breakdown or when ``maxit`` is hit.

    Breakdown tests compare inner products against the product of the
    vector norms, so they do not depend on the scale of ``b``.
    """
    A = aslinearoperator(A)
    b = np.asarray(b, dtype=float)
    report = SolveReport()
    bnorm = np.linalg.norm(b)
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
    if bnorm == 0.0:
        report.history = [0.0]
        report.converged = True
        return np.zeros_like(b), report
    r = b - A(x) if x0 is not None else b.copy()
    res = np.linalg.norm(r) / bnorm
    report.history.append(res)
    if res < eps:
        report.converged = True
        report.residual = res
        return x, report
    rhat = r.copy()
    rhat_norm = np.linalg.norm(rhat)
    rho = alpha = omega = 1.0
    v = np.zeros_like(b)
    p = np.zeros_like(b)
    for it in range(1, maxit + 1):
        rho_new = rhat @ r
        if not abs(rho_new) > BREAKDOWN_TOL * rhat_norm * np.linalg.norm(r):
            raise BreakdownError("rho breakdown", x=x, report=report)
        if it == 1:
            p = r.copy()
        else:
            p = r + (rho_new / rho) * (alpha / omega) * (p - omega * v)
        v = A(p)
        denom = rhat @ v
        if not abs(denom) > BREAKDOWN_TOL * rhat_norm * np.linalg.norm(v):
            raise BreakdownError("(rhat, Ap) breakdown", x=x, report=report)
        alpha = rho_new / denom
        s = r - alpha * v
        report.iterations = it
        snorm = np.linalg.norm(s) / bnorm
        if snorm < eps:
            x += alpha * p
            report.history.append(snorm)
            report.residual = snorm
            report.converged = True
            return x, report
        t = A(s)
        tt = t @ t
        if tt == 0.0:
            raise BreakdownError("A s vanished", x=x, report=report)
        omega = (t @ s) / tt
        if not abs(omega) * np.sqrt(tt) > BREAKDOWN_TOL * np.linalg.norm(s):
            raise BreakdownError("omega breakdown", x=x, report=report)
        x += alpha * p + omega * s
        r = s - omega * t
        rho = rho_new
        res = np.linalg.norm(r) / bnorm
        report.history.append(res)
        report.residual = res
        if not np.isfinite(res):
            raise BreakdownError("residual is not finite", x=x, report=report)
        if res < eps:
            report.converged = True
            return x, report
    raise NonConvergenceError(f"BiCGSTAB: no convergence in {maxit} iterations "
                              f"(residual {report.residual:.3e})", x=x, report=report)

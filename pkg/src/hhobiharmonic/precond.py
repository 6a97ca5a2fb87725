"""Sparse approximation of L_h from neighbourhood patches.

Column j of the approximation is L_h applied to the j-th unit trace vector,
but with both Laplacian solves restricted to the cells within ``alpha``
vertex layers of the boundary cell carrying DoF j. Artificial patch
boundaries get homogeneous Dirichlet data and the normal derivative is kept
only on domain-boundary faces of the patch; other rows are zero.

Condensed blocks on a patch are slices of the global ones: a face with both
owners in the patch only couples through patch cells, and so does a
domain-boundary face. Rows of artificial boundary faces are never read.
"""
from __future__ import annotations

import logging
import time

import numpy as np
import scipy.sparse as sp
from scipy.linalg import cho_factor, cho_solve

from .errors import BreakdownError, NonConvergenceError, PreconditionerError
from .krylov import SparseCholesky, bicgstab
from .mesh import neighborhood

log = logging.getLogger(__name__)

__all__ = ["PatchPreconditioner", "build", "patch_column"]

DENSE_THRESHOLD = 400
INNER_MAXIT = 200


def _face_dofs(faces, nk):
    return (np.asarray(faces)[:, None] * nk + np.arange(nk)).ravel()


class _LocalFactor:
    def __init__(self, A, dense_threshold):
        n = A.shape[0]
        self.dense = n < dense_threshold
        if n == 0:
            self.solve = lambda b: np.zeros_like(b)
        elif self.dense:
            f = cho_factor(A.toarray())
            self.solve = lambda b: cho_solve(f, b)
        else:
            self.solve = SparseCholesky(A, check_symmetry=False).solve


def patch_columns(system, patch, dense_threshold=DENSE_THRESHOLD):
    """Approximate columns for the k+1 DoFs of ``patch.face``.

    Returns ``(rows, block)``: global boundary-DoF indices of the domain
    faces in the patch and the (len(rows), k+1) block of column values, in
    orthonormal coefficients.
    """
    nk = system.nk
    I = _face_dofs(patch.interior_faces, nk)
    D = _face_dofs(patch.domain_faces, nk)
    J = _face_dofs([patch.face], nk)
    A, N = system.Ahat, system.Nhat
    A_I = A[I]
    factor = _LocalFactor(A_I[:, I].tocsc(), dense_threshold)
    w_I = -factor.solve(A_I[:, J].toarray())
    N_I = N[I]
    c_I = N_I[:, I] @ w_I + N_I[:, J].toarray()
    N_D = N[D]
    c_D = N_D[:, I] @ w_I + N_D[:, J].toarray()
    y = factor.solve(c_I)
    block = c_D - A[D][:, I] @ y
    rows = system.boundary_dof_index[D]
    return rows, np.asarray(block)


def patch_column(system, j, alpha):
    """Dense column j of the approximation (orthonormal coefficients)."""
    patch = neighborhood(system.mesh, j, alpha, system.nk)
    rows, block = patch_columns(system, patch)
    col = np.zeros(system.n_boundary_dofs)
    col[rows] = block[:, j % system.nk]
    return col


class PatchPreconditioner:
    """Sparse approximation of L_h applied through BiCGSTAB.

    Parameters
    ----------
    problem : SplitProblem
    alpha : int
        Number of vertex-neighbour layers grown around each boundary cell.
    eps : float, optional
        Inner tolerance; defaults to the outer tolerance of ``problem``.
    """

    def __init__(self, problem, alpha, eps=None, maxit=INNER_MAXIT,
                 dense_threshold=DENSE_THRESHOLD):
        if alpha < 0:
            raise ValueError("alpha must be non-negative")
        self.alpha = int(alpha)
        self.eps = problem.eps if eps is None else eps
        self.maxit = maxit
        self.applications = 0
        self.inner_iterations = []
        t0 = time.perf_counter()
        S = problem.system
        nk = S.nk
        rows, cols, vals = [], [], []
        self.patches = []
        for jf, face in enumerate(S.mesh.boundary_faces):
            patch = neighborhood(S.mesh, jf * nk, self.alpha, nk)
            self.patches.append(patch)
            r, block = patch_columns(S, patch, dense_threshold)
            for a in range(nk):
                rows.append(r)
                cols.append(np.full(r.size, jf * nk + a))
                vals.append(block[:, a])
        n = S.n_boundary_dofs
        mat = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                            shape=(n, n))
        d = problem.scaling
        self.matrix = (sp.diags(d) @ mat @ sp.diags(d)).tocsr()
        self.setup_time = time.perf_counter() - t0

    def apply(self, r):
        """Approximate ``L~^{-1} r`` by unpreconditioned BiCGSTAB."""
        self.applications += 1
        r = np.asarray(r, dtype=float)
        if not np.any(r):
            return np.zeros_like(r)
        try:
            z, rep = bicgstab(self.matrix, r, eps=self.eps, maxit=self.maxit)
        except (BreakdownError, NonConvergenceError) as exc:
            raise PreconditionerError(f"inner solve failed: {exc}") from exc
        self.inner_iterations.append(rep.iterations)
        return z

    __call__ = apply


def build(problem, alpha, **kwargs):
    return PatchPreconditioner(problem, alpha, **kwargs)

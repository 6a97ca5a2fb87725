"""Decoupled mixed scheme for the clamped biharmonic problem.

The unknown is the boundary trace lambda of omega = -Lap psi. For a trace mu
the pair (omega~, psi~) solves two Laplacian problems: omega~ is discrete
harmonic with trace mu, psi~ has zero trace and load <<omega~, .>>. The
operator L_h maps mu to minus the discrete normal derivative of psi~ and is
symmetric positive definite; it is inverted by flexible CG.

Algebraic trace vectors are coefficients in the Legendre basis P_a(xi) of
each boundary face, and the matrix of L_h is the Gram matrix
``ell_h(phi_j, phi_i)``. Internally faces carry the L2-orthonormal basis
``sqrt((2a+1)/|F|) P_a``, so the two differ by the diagonal scaling
``d_a = sqrt(|F|/(2a+1))``.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ConfigurationError, NonConvergenceError
from .hho import HybridVector, PiecewisePolynomial, assemble, reconstruct
from .krylov import LinearOperator, SolveReport, fcg
from .trace import lift_faces, normal_derivative

__all__ = [
    "SplitProblem",
    "BiharmonicSolution",
    "stab_inner_product",
    "solve_pair",
    "apply_Lh",
    "ell_h",
    "dense_Lh",
    "rhs_b",
    "solve",
    "boundary_normals",
    "trace_scaling",
]

MAX_OUTER = 500


def _zero(x):
    return np.zeros(len(x))


@dataclass
class SplitProblem:
    """Mesh, degrees, data and one shared condensed Laplacian.

    ``f`` and ``gD`` map points (P, 2) to values; ``gN`` maps points and the
    matching outward unit normals to values of the normal derivative.
    """

    mesh: object
    k: int
    l: Optional[int] = None
    f: Callable = _zero
    gD: Callable = _zero
    gN: Callable = None
    eps: float = 1e-8
    stab: str = "classic"
    backend: Optional[str] = None
    system: object = None

    def __post_init__(self):
        if not self.eps > 0:
            raise ConfigurationError("tolerance must be positive")
        if self.l is None:
            self.l = self.k
        if self.gN is None:
            self.gN = lambda x, n: np.zeros(len(x))
        if self.system is None:
            self.system = assemble(self.mesh, self.k, self.l, self.stab, self.backend)
        self.scaling = trace_scaling(self.system)

    @property
    def n_boundary_dofs(self):
        return self.system.n_boundary_dofs


@dataclass
class BiharmonicSolution:
    lam: np.ndarray
    omega: HybridVector
    psi: HybridVector
    omega_h: PiecewisePolynomial
    psi_h: PiecewisePolynomial
    report: SolveReport
    history: list = field(default_factory=list)
    setup_time: float = 0.0
    solve_time: float = 0.0


def stab_inner_product(system, v, w):
    """``<<v, w>>``: L2 product of cell parts plus boundary-cell face jumps."""
    gc, gf = system.stab_product_rhs(v)
    return float(np.sum(gc * w.cells) + gf @ w.faces.ravel())


def _hybrid(system, uf, g_cells=None):
    return HybridVector(system.recover_cells(uf, g_cells), uf.reshape(-1, system.nk),
                        system.k, system.l)


def solve_pair(problem, mu, homogeneous=True):
    """Return ``(omega, psi)`` for orthonormal boundary coefficients ``mu``.

    ``homogeneous=True``: omega is harmonic with trace mu and psi has zero
    trace with load ``<<omega, .>>``. Otherwise omega has load f and trace
    mu, and psi has load ``(omega_T, .)`` and trace ``pi gD``.
    """
    S = problem.system
    mu = np.asarray(mu, dtype=float)
    if homogeneous:
        omega = _hybrid(S, lift_faces(S, mu))
        gc, gf = S.stab_product_rhs(omega)
        psi = S.solve(np.zeros(S.n_boundary_dofs), g_cells=gc, g_faces=gf)
        return omega, psi
    omega = S.solve(mu, g_cells=S.cell_load(problem.f))
    load = _mass_load(S, omega)
    psi = S.solve(S.project_boundary(problem.gD), g_cells=load)
    return omega, psi


def _mass_load(system, v):
    return np.einsum("cij,cj->ci", system.cell_mass, v.cells)


def trace_scaling(system):
    """Orthonormal-to-Legendre factors ``sqrt(|F|/(2a+1))`` over boundary DoFs."""
    L = system.mesh.face_measures[system.mesh.boundary_faces]
    return np.sqrt(L[:, None] / (2 * np.arange(system.nk) + 1)).ravel()


def apply_Lh(problem, mu):
    """Matrix of ``ell_h`` in the Legendre trace basis applied to ``mu``."""
    d = problem.scaling
    return d * apply_Lh_orthonormal(problem.system, d * np.asarray(mu, dtype=float))


def apply_Lh_orthonormal(S, mu):
    """``L_h mu`` for orthonormal boundary coefficients (two interior backsolves)."""
    omega_f = lift_faces(S, mu)
    c = S.Nhat @ omega_f
    y = S.factor.solve(c[S.interior_dofs])
    return c[S.boundary_dofs] - S.A_BI @ y


def ell_h(problem, mu, eta):
    """``-a_h(psi~(mu), H eta) + <<omega~(mu), H eta>>`` with uncondensed forms.

    ``mu`` and ``eta`` are orthonormal boundary coefficients.
    """
    S = problem.system
    omega, psi = solve_pair(problem, mu, homogeneous=True)
    h_eta = _hybrid(S, lift_faces(S, eta))
    a = S.full_matrix() @ psi.flat()
    return float(-(a @ h_eta.flat()) + stab_inner_product(S, omega, h_eta))


def dense_Lh(problem):
    n = problem.n_boundary_dofs
    eye = np.eye(n)
    return np.column_stack([apply_Lh(problem, eye[:, j]) for j in range(n)])


def boundary_normals(mesh):
    """Outward unit normals of ``mesh.boundary_faces``."""
    bf = mesh.boundary_faces
    owners = mesh.face_owners[bf, 0]
    signs = np.array([mesh.cell_face_signs[c][np.flatnonzero(mesh.cell_faces[c] == f)[0]]
                      for c, f in zip(owners, bf)])
    return signs[:, None] * mesh.face_normals[bf]


def project_neumann(problem):
    """Face-wise L2 projection of gN on boundary faces (length N_B)."""
    S = problem.system
    normals = boundary_normals(problem.mesh)

    def g(points):
        n = np.repeat(normals, len(points) // len(normals), axis=0)
        return problem.gN(points, n)

    return S.project_boundary(g)


def rhs_b(problem):
    """Legendre moments of ``dn_h psi0 - gN``, (omega0, psi0) solved with zero trace."""
    S = problem.system
    omega0, psi0 = solve_pair(problem, np.zeros(S.n_boundary_dofs), homogeneous=False)
    dn = normal_derivative(S, psi0, g_cells=_mass_load(S, omega0))
    return problem.scaling * (dn - project_neumann(problem))


def solve(problem, precond=None, maxit=MAX_OUTER, callback=None):
    """Solve ``L_h lambda = b`` by (P)FCG, then recover and reconstruct.

    ``solution.lam`` holds Legendre coefficients of the trace of omega.

    Raises
    ------
    NonConvergenceError
        When ``maxit`` outer iterations do not reach the tolerance; the
        exception carries the report with the residual history.
    """
    S = problem.system
    t0 = time.perf_counter()
    b = rhs_b(problem)
    t1 = time.perf_counter()
    op = LinearOperator(S.n_boundary_dofs, lambda v: apply_Lh(problem, v))
    M = None if precond is None else precond.apply
    lam, report = fcg(op, b, M=M, eps=problem.eps, maxit=maxit, callback=callback)
    t2 = time.perf_counter()
    if not report.converged:
        raise NonConvergenceError(
            f"FCG stopped after {report.iterations} iterations at residual {report.residual:.3e}",
            x=lam, report=report)
    omega, psi = solve_pair(problem, problem.scaling * lam, homogeneous=False)
    return BiharmonicSolution(lam, omega, psi, reconstruct(S, omega), reconstruct(S, psi),
                              report, list(report.history), setup_time=t1 - t0,
                              solve_time=t2 - t1)

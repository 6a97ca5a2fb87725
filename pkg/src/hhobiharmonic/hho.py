"""HHO discretisation of the Dirichlet Laplacian with static condensation.

Local operators come from the kernel backend one cell group (same vertex
count) at a time. After condensation every solve works on face unknowns
only: the condensed matrix is factorised once over interior-face DoFs and
reused for every right-hand side.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import kernels
from .basis import cell_dim, default_order, error_order, monomial_exponents, \
    reference_segment_rule, reference_triangle_rule, legendre_values
from .errors import AssemblyError, ConfigurationError, NotSPDError
from .krylov import SparseCholesky

__all__ = [
    "HybridVector",
    "PiecewisePolynomial",
    "CondensedSystem",
    "assemble",
    "solve_poisson",
    "reconstruct",
    "local_operators",
]

STABILIZATIONS = {"classic": 0, "simple": 1}


@dataclass
class HybridVector:
    """Cell blocks in P^l(T) and face blocks in P^k(F)."""

    cells: np.ndarray
    faces: np.ndarray
    k: int
    l: int

    def __post_init__(self):
        if self.cells.shape[1] != cell_dim(self.l) or self.faces.shape[1] != self.k + 1:
            raise ValueError("block sizes do not match the degrees")

    def __add__(self, other):
        return HybridVector(self.cells + other.cells, self.faces + other.faces, self.k, self.l)

    def __sub__(self, other):
        return HybridVector(self.cells - other.cells, self.faces - other.faces, self.k, self.l)

    def __mul__(self, scalar):
        return HybridVector(self.cells * scalar, self.faces * scalar, self.k, self.l)

    __rmul__ = __mul__

    def flat(self):
        return np.concatenate([self.cells.ravel(), self.faces.ravel()])


def group_quadrature(mesh, cells, order):
    """Fan quadrature for cells sharing a vertex count: (nc, P, 2), (nc, P)."""
    tri_pts, tri_w = reference_triangle_rule(order)
    verts = mesh.vertices[np.stack([mesh.cells[c] for c in cells])]
    xc = mesh.cell_centroids[cells]
    e1 = verts - xc[:, None, :]
    e2 = np.roll(verts, -1, axis=1) - xc[:, None, :]
    det = e1[..., 0] * e2[..., 1] - e1[..., 1] * e2[..., 0]
    pts = (xc[:, None, None, :]
           + tri_pts[None, None, :, 0:1] * e1[:, :, None, :]
           + tri_pts[None, None, :, 1:2] * e2[:, :, None, :])
    w = det[:, :, None] * tri_w[None, None, :]
    nc = len(cells)
    return pts.reshape(nc, -1, 2), w.reshape(nc, -1)


def cell_basis_values(mesh, cells, pts, degree):
    """Scaled monomials of the given cells at ``pts`` of shape (nc, P, 2)."""
    ex = monomial_exponents(degree)
    s = (pts - mesh.cell_centroids[cells][:, None, :]) / mesh.cell_diameters[cells][:, None, None]
    return s[..., 0:1] ** ex[:, 0] * s[..., 1:2] ** ex[:, 1]


def face_quadrature_points(mesh, faces, order):
    t, w = reference_segment_rule(order)
    p0 = mesh.vertices[mesh.faces[faces, 0]]
    p1 = mesh.vertices[mesh.faces[faces, 1]]
    pts = mesh.face_midpoints[faces][:, None, :] + t[None, :, None] * (p1 - p0)[:, None, :]
    weights = w[None, :] * mesh.face_measures[faces][:, None]
    return pts, weights, t


def face_basis_values(mesh, faces, t, k):
    """Orthonormal face basis at reference points ``t`` in [-1/2, 1/2]: (nf, Q, k+1)."""
    L = mesh.face_measures[faces]
    return legendre_values(k, np.broadcast_to(2.0 * t, (len(faces), len(t))), L[:, None])


@dataclass
class LocalGroup:
    """Local operators of all cells with ``m`` vertices."""

    m: int
    cells: np.ndarray
    faces: np.ndarray
    dofs: np.ndarray
    R: np.ndarray
    G: np.ndarray
    Mr: np.ndarray
    S: np.ndarray
    Nst: np.ndarray
    A: np.ndarray
    Theta: np.ndarray
    Schur: np.ndarray
    AttInv: np.ndarray


def local_operators(mesh, cells, k, l, stab="classic", backend=None, order=None):
    """Raw kernel output ``(R, G, Mr, S, Nst)`` for cells with equal vertex count."""
    if stab not in STABILIZATIONS:
        raise ConfigurationError(f"unknown stabilisation {stab!r}")
    if l not in (k, k + 1):
        raise ConfigurationError("cell degree must be k or k+1")
    if stab == "simple" and l != k + 1:
        raise ConfigurationError("the simple stabilisation requires l = k + 1")
    cells = np.asarray(cells)
    order = default_order(k) if order is None else order
    tri_pts, tri_w = reference_triangle_rule(order)
    seg_t, seg_w = reference_segment_rule(order)
    verts = np.ascontiguousarray(mesh.vertices[np.stack([mesh.cells[c] for c in cells])])
    signs = np.ascontiguousarray(np.stack([mesh.cell_face_signs[c] for c in cells]))
    kern = kernels.get_kernel(backend)
    return kern.local_operators(
        verts, np.ascontiguousarray(mesh.cell_centroids[cells]),
        np.ascontiguousarray(mesh.cell_diameters[cells]), signs,
        int(k), int(l), STABILIZATIONS[stab],
        np.ascontiguousarray(tri_pts), np.ascontiguousarray(tri_w),
        np.ascontiguousarray(seg_t), np.ascontiguousarray(seg_w))


def _coo(blocks, dofs, n):
    rows = np.broadcast_to(dofs[:, :, None], blocks.shape).ravel()
    cols = np.broadcast_to(dofs[:, None, :], blocks.shape).ravel()
    return sp.coo_matrix((blocks.ravel(), (rows, cols)), shape=(n, n))


class CondensedSystem:
    """Condensed HHO Laplacian on a mesh for degrees (k, l).

    Attributes
    ----------
    Ahat : csr_matrix
        Schur complement over all face DoFs.
    Nhat : csr_matrix
        Condensed stabilised product: ``<<Theta v, Theta w>>`` on face DoFs.
    interior_dofs, boundary_dofs : index arrays into face DoFs.
    """

    def __init__(self, mesh, k, l=None, stab="classic", backend=None):
        l = k if l is None else l
        self.mesh, self.k, self.l, self.stab = mesh, k, l, stab
        self.nk = k + 1
        self.nl = cell_dim(l)
        self.nr = cell_dim(k + 1)
        self.backend = backend or kernels.BACKEND
        nk, nl = self.nk, self.nl
        self.n_face_dofs = mesh.n_faces * nk
        self.n_cell_dofs = mesh.n_cells * nl

        self.groups = []
        self.cell_group = np.empty(mesh.n_cells, dtype=np.int64)
        self.cell_slot = np.empty(mesh.n_cells, dtype=np.int64)
        self.cell_mass = np.empty((mesh.n_cells, nl, nl))
        for gi, (m, cells) in enumerate(sorted(mesh.groups.items())):
            R, G, Mr, S, Nst = local_operators(mesh, cells, k, l, stab, self.backend)
            A = np.einsum("cri,crs,csj->cij", R, G, R) + S
            Att = A[:, :nl, :nl]
            Atf = A[:, :nl, nl:]
            AttInv = np.linalg.inv(Att)
            Theta = -AttInv @ Atf
            Schur = A[:, nl:, nl:] + np.swapaxes(Atf, 1, 2) @ Theta
            faces = np.stack([mesh.cell_faces[c] for c in cells])
            dofs = (faces[:, :, None] * nk + np.arange(nk)).reshape(len(cells), -1)
            self.groups.append(LocalGroup(m, cells, faces, dofs, R, G, Mr, S, Nst, A,
                                          Theta, Schur, AttInv))
            self.cell_group[cells] = gi
            self.cell_slot[cells] = np.arange(len(cells))
            self.cell_mass[cells] = Mr[:, :nl, :nl]

        nf = self.n_face_dofs
        self.Ahat = sum(_coo(g.Schur, g.dofs, nf) for g in self.groups).tocsr()
        self.Nhat = sum(_coo(self._condensed_product(g), g.dofs, nf) for g in self.groups).tocsr()
        self.boundary_dofs = (mesh.boundary_faces[:, None] * nk + np.arange(nk)).ravel()
        self.interior_dofs = (mesh.interior_faces[:, None] * nk + np.arange(nk)).ravel()
        self.boundary_dof_index = np.full(nf, -1, dtype=np.int64)
        self.boundary_dof_index[self.boundary_dofs] = np.arange(self.boundary_dofs.size)
        self.A_II = self.Ahat[self.interior_dofs][:, self.interior_dofs].tocsc()
        self.A_IB = self.Ahat[self.interior_dofs][:, self.boundary_dofs].tocsr()
        self.A_BI = self.Ahat[self.boundary_dofs][:, self.interior_dofs].tocsr()
        self.A_BB = self.Ahat[self.boundary_dofs][:, self.boundary_dofs].tocsr()
        try:
            self.factor = SparseCholesky(self.A_II)
        except NotSPDError as exc:
            raise AssemblyError(f"condensed matrix lost positive definiteness: {exc}") from None

    @property
    def n_boundary_dofs(self):
        return self.boundary_dofs.size

    def _stab_product_blocks(self, g):
        """Local ``<<.,.>>`` matrices on the full local hybrid DoFs."""
        nl = self.nl
        N = g.Nst * self.mesh.boundary_cell_mask[g.cells][:, None, None]
        N = N.copy()
        N[:, :nl, :nl] += g.Mr[:, :nl, :nl]
        return N

    def _condensed_product(self, g):
        P = self._lift_matrix(g)
        return np.swapaxes(P, 1, 2) @ self._stab_product_blocks(g) @ P

    def _lift_matrix(self, g):
        nfl = g.Theta.shape[2]
        eye = np.broadcast_to(np.eye(nfl), (len(g.cells), nfl, nfl))
        return np.concatenate([g.Theta, eye], axis=1)

    # -- data ---------------------------------------------------------------

    def cell_load(self, f, order=None):
        """Moments ``(f, phi_i)_T`` against P^l(T): array (n_cells, nl)."""
        order = error_order(self.k) if order is None else order
        out = np.empty((self.mesh.n_cells, self.nl))
        for g in self.groups:
            pts, w = group_quadrature(self.mesh, g.cells, order)
            phi = cell_basis_values(self.mesh, g.cells, pts, self.l)
            fv = np.asarray(f(pts.reshape(-1, 2)), dtype=float).reshape(w.shape)
            out[g.cells] = np.einsum("cp,cpi->ci", w * fv, phi)
        return out

    def project_faces(self, g, faces=None, order=None):
        """L2 projection of ``g`` onto P^k(F) for the given faces (default: all)."""
        faces = np.arange(self.mesh.n_faces) if faces is None else np.asarray(faces)
        order = error_order(self.k) if order is None else order
        pts, w, t = face_quadrature_points(self.mesh, faces, order)
        chi = face_basis_values(self.mesh, faces, t, self.k)
        gv = np.asarray(g(pts.reshape(-1, 2)), dtype=float).reshape(w.shape)
        return np.einsum("fq,fqa->fa", w * gv, chi)

    def project_boundary(self, g, order=None):
        """Boundary-face coefficient vector of ``pi^k g`` (length N_B)."""
        return self.project_faces(g, self.mesh.boundary_faces, order).ravel()

    def project_cells(self, f, order=None):
        loads = self.cell_load(f, order)
        return np.linalg.solve(self.cell_mass, loads[..., None])[..., 0]

    def interpolate(self, u, order=None):
        """Hybrid interpolant ``(pi_T^l u, pi_F^k u)``."""
        return HybridVector(self.project_cells(u, order), self.project_faces(u, order=order),
                            self.k, self.l)

    # -- condensed algebra -------------------------------------------------

    def condensed_rhs(self, g_cells=None, g_faces=None):
        """Face vector of ``v_F -> g(Theta v_F)`` for a local functional g."""
        rhs = np.zeros(self.n_face_dofs)
        if g_cells is not None:
            for g in self.groups:
                contrib = np.einsum("cij,ci->cj", g.Theta, g_cells[g.cells])
                np.add.at(rhs, g.dofs.ravel(), contrib.ravel())
        if g_faces is not None:
            rhs += np.asarray(g_faces).ravel()
        return rhs

    def solve_faces(self, boundary_values, rhs=None):
        """Face unknowns with prescribed boundary coefficients."""
        u = np.zeros(self.n_face_dofs)
        uB = np.asarray(boundary_values, dtype=float)
        u[self.boundary_dofs] = uB
        b = -(self.A_IB @ uB)
        if rhs is not None:
            b = b + rhs[self.interior_dofs]
        u[self.interior_dofs] = self.factor.solve(b)
        return u

    def recover_cells(self, u_faces, g_cells=None):
        """Cell unknowns ``Theta u_F + A_TT^{-1} g_T``."""
        u_faces = np.asarray(u_faces).ravel()
        out = np.empty((self.mesh.n_cells, self.nl))
        for g in self.groups:
            uc = np.einsum("cij,cj->ci", g.Theta, u_faces[g.dofs])
            if g_cells is not None:
                uc += np.einsum("cij,cj->ci", g.AttInv, g_cells[g.cells])
            out[g.cells] = uc
        return out

    def solve(self, boundary_values, g_cells=None, g_faces=None):
        """Full hybrid solution for a local right-hand side functional."""
        rhs = None
        if g_cells is not None or g_faces is not None:
            rhs = self.condensed_rhs(g_cells, g_faces)
        uf = self.solve_faces(boundary_values, rhs)
        return HybridVector(self.recover_cells(uf, g_cells), uf.reshape(-1, self.nk),
                            self.k, self.l)

    def stab_product_rhs(self, v):
        """Local vectors of ``w -> <<v, w>>``: (cell part, face part)."""
        gc = np.zeros((self.mesh.n_cells, self.nl))
        gf = np.zeros(self.n_face_dofs)
        for g in self.groups:
            loc = np.concatenate([v.cells[g.cells], v.faces.ravel()[g.dofs]], axis=1)
            out = np.einsum("cij,cj->ci", self._stab_product_blocks(g), loc)
            gc[g.cells] = out[:, :self.nl]
            np.add.at(gf, g.dofs.ravel(), out[:, self.nl:].ravel())
        return gc, gf

    # -- uncondensed forms (diagnostics and oracles) ------------------------

    def _full(self, blocks_of):
        nl, ncd = self.nl, self.n_cell_dofs
        n = ncd + self.n_face_dofs
        parts = []
        for g in self.groups:
            cdofs = g.cells[:, None] * nl + np.arange(nl)
            dofs = np.concatenate([cdofs, ncd + g.dofs], axis=1)
            parts.append(_coo(blocks_of(g), dofs, n))
        return sum(parts).tocsr()

    def full_matrix(self):
        """Uncondensed a_h over [cell DoFs, face DoFs]."""
        return self._full(lambda g: g.A)

    def full_stab_product(self):
        """Uncondensed ``<<.,.>>`` over [cell DoFs, face DoFs]."""
        return self._full(self._stab_product_blocks)

    def hybrid_from_flat(self, x):
        ncd = self.n_cell_dofs
        return HybridVector(x[:ncd].reshape(-1, self.nl), x[ncd:].reshape(-1, self.nk),
                            self.k, self.l)


def assemble(mesh, k, l=None, stab="classic", backend=None):
    return CondensedSystem(mesh, k, l, stab, backend)


def solve_poisson(system, f, gD):
    """HHO solution of -Lap u = f, u = gD, with strongly imposed boundary data."""
    return system.solve(system.project_boundary(gD), g_cells=system.cell_load(f))


class PiecewisePolynomial:
    """Broken polynomial field: per-cell coefficients in scaled monomials."""

    def __init__(self, mesh, degree, coeffs):
        self.mesh = mesh
        self.degree = degree
        self.coeffs = coeffs

    def eval_cells(self, cells, pts):
        phi = cell_basis_values(self.mesh, cells, pts, self.degree)
        return np.einsum("cpi,ci->cp", phi, self.coeffs[cells])

    def __call__(self, cell, points):
        pts = np.asarray(points, dtype=float)[None]
        return self.eval_cells(np.array([cell]), pts)[0]

    def integrals(self, exact=None, order=None, square=True):
        """Per-cell ``int (u_h - exact)^2`` and ``int exact^2``."""
        order = error_order(self.degree - 1) if order is None else order
        err = np.zeros(self.mesh.n_cells)
        ref = np.zeros(self.mesh.n_cells)
        for cells in self.mesh.groups.values():
            pts, w = group_quadrature(self.mesh, cells, order)
            uh = self.eval_cells(cells, pts)
            ue = 0.0 if exact is None else np.asarray(exact(pts.reshape(-1, 2))).reshape(w.shape)
            err[cells] = (w * (uh - ue) ** 2).sum(axis=1)
            ref[cells] = (w * np.broadcast_to(ue, w.shape) ** 2).sum(axis=1)
        return err, ref


def reconstruct(system, u):
    """Post-processed field ``p_h^{k+1} u`` in P^{k+1}(T_h)."""
    coeffs = np.empty((system.mesh.n_cells, system.nr))
    for g in system.groups:
        loc = np.concatenate([u.cells[g.cells], u.faces.ravel()[g.dofs]], axis=1)
        coeffs[g.cells] = np.einsum("cij,cj->ci", g.R, loc)
    return PiecewisePolynomial(system.mesh, system.k + 1, coeffs)

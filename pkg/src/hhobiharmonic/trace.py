"""Discrete harmonic liftings and the discrete normal derivative.

For boundary data mu the lifting is the discrete harmonic function with
trace mu. The normal derivative of a discrete solution u with local load g
is the boundary functional ``mu -> a_h(u, lift(mu)) - g(lift(mu))``. With
orthonormal face bases its moments are also its coefficients.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse.linalg as spla

from .basis import error_order
from .hho import HybridVector, face_basis_values, face_quadrature_points

__all__ = ["lift_faces", "lift_hybrid", "normal_derivative", "normal_derivative_full",
           "boundary_error"]


def lift_faces(system, mu):
    """Face unknowns of the discrete harmonic lifting of ``mu``."""
    return system.solve_faces(mu)


def lift_hybrid(system, mu):
    uf = lift_faces(system, mu)
    return HybridVector(system.recover_cells(uf), uf.reshape(-1, system.nk), system.k, system.l)


def normal_derivative(system, u, g_cells=None, g_faces=None):
    """Boundary coefficients of the discrete normal derivative.

    Parameters
    ----------
    system : CondensedSystem
    u : HybridVector or face array
        Discrete solution for the load ``g``; only its face unknowns are read.
    g_cells, g_faces : optional
        Local load functional, as passed to ``CondensedSystem.solve``.

    Notes
    -----
    Since ``lift(mu)`` is ``Theta`` applied to its face values and the
    lifting is discrete harmonic on interior faces, only boundary rows of
    the condensed residual survive.
    """
    uf = u.faces.ravel() if isinstance(u, HybridVector) else np.asarray(u).ravel()
    bd = system.boundary_dofs
    moments = system.Ahat[bd] @ uf
    if g_cells is not None or g_faces is not None:
        moments = moments - system.condensed_rhs(g_cells, g_faces)[bd]
    return moments


def normal_derivative_full(system, u, g_cells=None, g_faces=None):
    """Same functional evaluated with uncondensed operators, one lifting per DoF.

    Quadratic cost; meant as an independent check on small meshes.
    """
    A = system.full_matrix()
    x = u.flat()
    ncd = system.n_cell_dofs
    load = np.zeros_like(x)
    if g_cells is not None:
        load[:ncd] = np.asarray(g_cells).ravel()
    if g_faces is not None:
        load[ncd:] = np.asarray(g_faces).ravel()
    residual = A @ x - load
    free = np.concatenate([np.arange(ncd), ncd + system.interior_dofs])
    fixed = ncd + system.boundary_dofs
    A_ff = A[free][:, free].tocsc()
    A_fb = A[free][:, fixed]
    nb = system.n_boundary_dofs
    lifts = np.zeros((x.size, nb))
    lifts[fixed] = np.eye(nb)
    lifts[free] = -spla.spsolve(A_ff, A_fb.toarray()).reshape(free.size, nb)
    return residual @ lifts


def boundary_error(system, coeffs, g, normals, order=None):
    """Relative L2(boundary) distance between face polynomials and ``g(x, n)``.

    ``coeffs`` holds the boundary-face blocks, ``normals`` the outward unit
    normals of ``mesh.boundary_faces``.
    """
    bf = system.mesh.boundary_faces
    order = error_order(system.k) if order is None else order
    pts, w, t = face_quadrature_points(system.mesh, bf, order)
    chi = face_basis_values(system.mesh, bf, t, system.k)
    vh = np.einsum("fqa,fa->fq", chi, np.asarray(coeffs).reshape(len(bf), -1))
    n = np.repeat(normals, pts.shape[1], axis=0)
    ex = np.asarray(g(pts.reshape(-1, 2), n)).reshape(w.shape)
    return float(np.sqrt((w * (vh - ex) ** 2).sum() / (w * ex**2).sum()))

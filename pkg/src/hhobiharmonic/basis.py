"""Polynomial bases, quadrature rules and L2 projectors on cells and faces.

Cell bases are scaled monomials centred at the cell centroid. Face bases are
L2(F)-orthonormal Legendre polynomials in the arclength coordinate measured
along the face's global tangent, so face mass matrices are identities.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.special import eval_legendre, roots_jacobi, roots_legendre

from .errors import ConditioningError, GeometryError

__all__ = [
    "Quadrature",
    "CellBasis",
    "FaceBasis",
    "monomial_exponents",
    "cell_dim",
    "face_dim",
    "cell_quadrature",
    "face_quadrature",
    "project_cell",
    "project_face",
    "default_order",
    "error_order",
]


def default_order(k):
    return 2 * (k + 2)


def error_order(k):
    return 2 * (k + 2) + 2


def cell_dim(m):
    return (m + 1) * (m + 2) // 2


def face_dim(m):
    return m + 1


@lru_cache(maxsize=None)
def monomial_exponents(m):
    """Exponents ``(a, b)`` of x^a y^b ordered by total degree."""
    return np.array([(d - b, b) for d in range(m + 1) for b in range(d + 1)], dtype=np.int64)


@dataclass(frozen=True)
class Quadrature:
    points: np.ndarray
    weights: np.ndarray

    def integrate(self, f):
        return float(np.dot(self.weights, f(self.points)))


@lru_cache(maxsize=None)
def reference_triangle_rule(order):
    """Collapsed Gauss rule on the triangle (0,0), (1,0), (0,1)."""
    n = max(1, (order + 2) // 2)
    tj, wj = roots_jacobi(n, 1.0, 0.0)
    tl, wl = roots_legendre(n)
    u = 0.5 * (1.0 + tj)
    v = 0.5 * (1.0 + tl)
    U, V = np.meshgrid(u, v, indexing="ij")
    pts = np.column_stack([U.ravel(), (V * (1.0 - U)).ravel()])
    w = np.outer(wj / 4.0, wl / 2.0).ravel()
    return pts, w


@lru_cache(maxsize=None)
def reference_segment_rule(order):
    """Gauss-Legendre rule on [-1/2, 1/2]."""
    n = max(1, (order + 2) // 2)
    t, w = roots_legendre(n)
    return 0.5 * t, 0.5 * w


def cell_quadrature(vertices, order, centroid=None):
    """Quadrature on a simple polygon by fan sub-triangulation from its centroid."""
    xy = np.asarray(vertices, dtype=float)
    if len(xy) < 3:
        raise GeometryError("polygon needs at least 3 vertices")
    if centroid is None:
        x, y = xy[:, 0], xy[:, 1]
        xn, yn = np.roll(x, -1), np.roll(y, -1)
        cross = x * yn - xn * y
        area = 0.5 * cross.sum()
        if area <= 0:
            raise GeometryError("polygon must be counter-clockwise with positive area")
        centroid = np.array([((x + xn) * cross).sum(), ((y + yn) * cross).sum()]) / (6 * area)
    ref, rw = reference_triangle_rule(order)
    a = np.asarray(centroid)[None, :]
    b = xy
    c = np.roll(xy, -1, axis=0)
    e1 = b - a
    e2 = c - a
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    if np.any(det <= 0):
        raise GeometryError("polygon is not star-shaped with respect to its centroid")
    pts = a[:, None, :] + ref[None, :, 0:1] * e1[:, None, :] + ref[None, :, 1:2] * e2[:, None, :]
    w = det[:, None] * rw[None, :]
    return Quadrature(pts.reshape(-1, 2), w.ravel())


def face_quadrature(p0, p1, order):
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    t, w = reference_segment_rule(order)
    mid = 0.5 * (p0 + p1)
    length = float(np.hypot(*(p1 - p0)))
    return Quadrature(mid + t[:, None] * (p1 - p0), w * length)


class CellBasis:
    """Scaled monomials ((x - xT)/hT)^a ((y - yT)/hT)^b of total degree <= m."""

    def __init__(self, degree, centroid, diameter):
        self.degree = degree
        self.centroid = np.asarray(centroid, dtype=float)
        self.diameter = float(diameter)
        self.exponents = monomial_exponents(degree)

    @property
    def dim(self):
        return len(self.exponents)

    def _scaled(self, points):
        s = (np.asarray(points, dtype=float) - self.centroid) / self.diameter
        return s[..., 0:1], s[..., 1:2]

    def eval(self, points):
        X, Y = self._scaled(points)
        a, b = self.exponents[:, 0], self.exponents[:, 1]
        return X**a * Y**b

    def grad(self, points):
        X, Y = self._scaled(points)
        a, b = self.exponents[:, 0], self.exponents[:, 1]
        gx = a * X ** np.maximum(a - 1, 0) * Y**b / self.diameter
        gy = b * X**a * Y ** np.maximum(b - 1, 0) / self.diameter
        return np.stack([gx, gy], axis=-1)

    def laplacian(self, points):
        X, Y = self._scaled(points)
        a, b = self.exponents[:, 0], self.exponents[:, 1]
        lx = a * (a - 1) * X ** np.maximum(a - 2, 0) * Y**b
        ly = b * (b - 1) * X**a * Y ** np.maximum(b - 2, 0)
        return (lx + ly) / self.diameter**2


class FaceBasis:
    """Orthonormal Legendre polynomials on a segment.

    The coordinate is ``xi = 2 (x - x_F) . t_F / |F|`` in [-1, 1] and the
    functions are ``sqrt((2a+1)/|F|) P_a(xi)``.
    """

    def __init__(self, degree, midpoint, tangent, length):
        self.degree = degree
        self.midpoint = np.asarray(midpoint, dtype=float)
        self.tangent = np.asarray(tangent, dtype=float)
        self.length = float(length)

    @property
    def dim(self):
        return self.degree + 1

    def coordinate(self, points):
        return 2.0 * ((np.asarray(points, dtype=float) - self.midpoint) @ self.tangent) / self.length

    def eval(self, points):
        return legendre_values(self.degree, self.coordinate(points), self.length)


def legendre_values(degree, xi, length):
    a = np.arange(degree + 1)
    xi = np.asarray(xi, dtype=float)[..., None]
    return np.sqrt((2 * a + 1) / np.asarray(length, dtype=float)[..., None]) * eval_legendre(a, xi)


def _gram_solve(gram, rhs):
    try:
        factor = cho_factor(gram)
    except np.linalg.LinAlgError:
        raise ConditioningError("Gram matrix is not positive definite") from None
    return cho_solve(factor, rhs)


def project_cell(f, vertices, m, order=None):
    """Coefficients of the L2(T) projection of ``f`` onto P^m(T)."""
    xy = np.asarray(vertices, dtype=float)
    quad = cell_quadrature(xy, order if order is not None else 2 * m + 8)
    centroid = (quad.weights @ quad.points) / quad.weights.sum()
    d = xy[:, None, :] - xy[None, :, :]
    basis = CellBasis(m, centroid, np.sqrt((d**2).sum(-1).max()))
    phi = basis.eval(quad.points)
    gram = phi.T @ (quad.weights[:, None] * phi)
    rhs = phi.T @ (quad.weights * f(quad.points))
    return _gram_solve(gram, rhs), basis


def project_face(g, p0, p1, k, order=None):
    """Coefficients of the L2(F) projection of ``g`` onto P^k(F)."""
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    length = float(np.hypot(*(p1 - p0)))
    basis = FaceBasis(k, 0.5 * (p0 + p1), (p1 - p0) / length, length)
    quad = face_quadrature(p0, p1, order if order is not None else 2 * k + 8)
    chi = basis.eval(quad.points)
    gram = chi.T @ (quad.weights[:, None] * chi)
    rhs = chi.T @ (quad.weights * g(quad.points))
    return _gram_solve(gram, rhs), basis

"""Pure-numpy local HHO operators, one cell at a time.

Interface shared with the compiled ``_ckernels`` module::

    local_operators(verts, centroids, diameters, signs, k, l, stab,
                    tri_pts, tri_w, seg_t, seg_w) -> (R, G, Mr, S, Nst)

for a group of ``nc`` cells with ``m`` vertices each:

verts (nc, m, 2), centroids (nc, 2), diameters (nc,), signs (nc, m) give the
orientation of each cell face relative to the face's global tangent.
``tri_pts``/``tri_w`` is a reference triangle rule and ``seg_t``/``seg_w`` a
Gauss rule on [-1/2, 1/2]. Local hybrid DoFs are ordered cell first, then
faces in loop order (face i joins vertex i to vertex i+1).

Returned per-cell stacks:

R   (nc, Nr, nd)  potential reconstruction, Nr = dim P^{k+1}
G   (nc, Nr, Nr)  stiffness of P^{k+1} (first row/col zero)
Mr  (nc, Nr, Nr)  mass of P^{k+1}
S   (nc, nd, nd)  stabilisation, classic (stab=0) or face-cell jump (stab=1)
Nst (nc, nd, nd)  sum_F h_F <pi_F(v_T - v_F), pi_F(w_T - w_F)>_F
"""
import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.special import eval_legendre

from .basis import cell_dim, monomial_exponents


def _monomials(X, Y, ex):
    a, b = ex[:, 0], ex[:, 1]
    return X[:, None] ** a * Y[:, None] ** b


def _cell_operators(xy, xc, hT, sg, k, l, stab, tri_pts, tri_w, seg_t, seg_w):
    m = len(xy)
    nr, nl, nk = cell_dim(k + 1), cell_dim(l), k + 1
    nd = nl + m * nk
    ex = monomial_exponents(k + 1)
    a, b = ex[:, 0], ex[:, 1]

    nxt = np.roll(xy, -1, axis=0)
    e1 = xy - xc
    e2 = nxt - xc
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    pts = (xc + tri_pts[None, :, 0:1] * e1[:, None, :] + tri_pts[None, :, 1:2] * e2[:, None, :]).reshape(-1, 2)
    w = (det[:, None] * tri_w[None, :]).ravel()

    X = (pts[:, 0] - xc[0]) / hT
    Y = (pts[:, 1] - xc[1]) / hT
    phi = _monomials(X, Y, ex)
    gx = a * X[:, None] ** np.maximum(a - 1, 0) * Y[:, None] ** b / hT
    gy = b * X[:, None] ** a * Y[:, None] ** np.maximum(b - 1, 0) / hT
    lap = (a * (a - 1) * X[:, None] ** np.maximum(a - 2, 0) * Y[:, None] ** b
           + b * (b - 1) * X[:, None] ** a * Y[:, None] ** np.maximum(b - 2, 0)) / hT**2

    G = gx.T @ (w[:, None] * gx) + gy.T @ (w[:, None] * gy)
    Mr = phi.T @ (w[:, None] * phi)

    B = np.zeros((nr, nd))
    B[1:, :nl] = -(lap[:, 1:].T @ (w[:, None] * phi[:, :nl]))
    deg = np.arange(nk)
    faces = []
    for i in range(m):
        d = nxt[i] - xy[i]
        L = np.hypot(d[0], d[1])
        n = np.array([d[1], -d[0]]) / L
        q = 0.5 * (xy[i] + nxt[i]) + seg_t[:, None] * d
        wq = seg_w * L
        chi = np.sqrt((2 * deg + 1) / L) * eval_legendre(deg, 2.0 * sg[i] * seg_t[:, None])
        Xf = (q[:, 0] - xc[0]) / hT
        Yf = (q[:, 1] - xc[1]) / hT
        phif = _monomials(Xf, Yf, ex)
        dn = (a * Xf[:, None] ** np.maximum(a - 1, 0) * Yf[:, None] ** b * n[0]
              + b * Xf[:, None] ** a * Yf[:, None] ** np.maximum(b - 1, 0) * n[1]) / hT
        c0 = nl + i * nk
        B[1:, c0:c0 + nk] = dn[:, 1:].T @ (wq[:, None] * chi)
        faces.append((L, wq, chi, phif, c0))

    R = np.zeros((nr, nd))
    R[1:] = cho_solve(cho_factor(G[1:, 1:]), B[1:])
    area = Mr[0, 0]
    R[0, :nl] = Mr[0, :nl] / area
    R[0] -= Mr[0, 1:] @ R[1:] / area

    ET = np.zeros((nl, nd))
    ET[:, :nl] = np.eye(nl)
    S = np.zeros((nd, nd))
    Nst = np.zeros((nd, nd))
    if stab == 0:
        Ml = Mr[:nl, :nl]
        dT = cho_solve(cho_factor(Ml), Mr[:nl] @ R) - ET
    for L, wq, chi, phif, c0 in faces:
        # pi_F(v_T) - v_F, face mass is the identity
        C = (chi.T @ (wq[:, None] * phif[:, :nl])) @ ET
        C[:, c0:c0 + nk] -= np.eye(nk)
        Nst += L * (C.T @ C)
        if stab == 0:
            dTF = chi.T @ (wq[:, None] * phif) @ R
            dTF[:, c0:c0 + nk] -= np.eye(nk)
            D = chi @ dTF - phif[:, :nl] @ dT
            S += (D.T @ (wq[:, None] * D)) / L
        else:
            S += (C.T @ C) / L
    return R, G, Mr, S, Nst


def local_operators(verts, centroids, diameters, signs, k, l, stab,
                    tri_pts, tri_w, seg_t, seg_w):
    nc, m = verts.shape[:2]
    nr, nl = cell_dim(k + 1), cell_dim(l)
    nd = nl + m * (k + 1)
    R = np.empty((nc, nr, nd))
    G = np.empty((nc, nr, nr))
    Mr = np.empty((nc, nr, nr))
    S = np.empty((nc, nd, nd))
    Nst = np.empty((nc, nd, nd))
    for c in range(nc):
        R[c], G[c], Mr[c], S[c], Nst[c] = _cell_operators(
            verts[c], centroids[c], diameters[c], signs[c], k, l, stab,
            tri_pts, tri_w, seg_t, seg_w)
    return R, G, Mr, S, Nst

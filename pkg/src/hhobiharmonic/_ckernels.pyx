# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled local HHO operators; same interface and output as ``_pykernels``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, pow

cnp.import_array()


cdef inline double ipow(double x, long n) nogil:
    cdef double r = 1.0
    cdef long i
    for i in range(n):
        r *= x
    return r


cdef void cholesky_inplace(double[:, ::1] A, Py_ssize_t off, Py_ssize_t n) except *:
    """Lower Cholesky of A[off:off+n, off:off+n], stored in the lower triangle."""
    cdef Py_ssize_t i, j, p
    cdef double s
    for j in range(n):
        s = A[off + j, off + j]
        for p in range(j):
            s -= A[off + j, off + p] * A[off + j, off + p]
        if s <= 0.0:
            raise ArithmeticError("local matrix is not positive definite")
        A[off + j, off + j] = sqrt(s)
        for i in range(j + 1, n):
            s = A[off + i, off + j]
            for p in range(j):
                s -= A[off + i, off + p] * A[off + j, off + p]
            A[off + i, off + j] = s / A[off + j, off + j]


cdef void cholesky_solve(double[:, ::1] Lf, Py_ssize_t off, Py_ssize_t n,
                         double[:, ::1] X, Py_ssize_t xoff, Py_ssize_t ncol) nogil:
    """Overwrite rows X[xoff:xoff+n, :ncol] with (L L^T)^{-1} X."""
    cdef Py_ssize_t i, p, c
    cdef double s
    for c in range(ncol):
        for i in range(n):
            s = X[xoff + i, c]
            for p in range(i):
                s -= Lf[off + i, off + p] * X[xoff + p, c]
            X[xoff + i, c] = s / Lf[off + i, off + i]
        for i in range(n - 1, -1, -1):
            s = X[xoff + i, c]
            for p in range(i + 1, n):
                s -= Lf[off + p, off + i] * X[xoff + p, c]
            X[xoff + i, c] = s / Lf[off + i, off + i]


cdef void legendre(double xi, Py_ssize_t nk, double scale, double* out) nogil:
    """Orthonormal values sqrt((2a+1)/L) P_a(xi); ``scale`` = 1/L."""
    cdef Py_ssize_t a
    cdef double p0 = 1.0, p1 = xi, p2
    for a in range(nk):
        if a == 0:
            out[0] = sqrt(scale)
        elif a == 1:
            out[1] = sqrt(3.0 * scale) * xi
        else:
            p2 = ((2 * a - 1) * xi * p1 - (a - 1) * p0) / a
            p0 = p1
            p1 = p2
            out[a] = sqrt((2 * a + 1) * scale) * p2


def local_operators(double[:, :, ::1] verts, double[:, ::1] centroids, double[::1] diameters,
                    double[:, ::1] signs, long k, long l, long stab,
                    double[:, ::1] tri_pts, double[::1] tri_w,
                    double[::1] seg_t, double[::1] seg_w):
    cdef Py_ssize_t nc = verts.shape[0], m = verts.shape[1]
    cdef Py_ssize_t nr = (k + 2) * (k + 3) // 2
    cdef Py_ssize_t nl = (l + 1) * (l + 2) // 2
    cdef Py_ssize_t nk = k + 1
    cdef Py_ssize_t nd = nl + m * nk
    cdef Py_ssize_t nt = tri_w.shape[0], nq = seg_w.shape[0]

    R_out = np.zeros((nc, nr, nd))
    G_out = np.zeros((nc, nr, nr))
    M_out = np.zeros((nc, nr, nr))
    S_out = np.zeros((nc, nd, nd))
    N_out = np.zeros((nc, nd, nd))
    cdef double[:, :, ::1] Ro = R_out, Go = G_out, Mo = M_out, So = S_out, No = N_out

    ex_np = np.array([(d - b, b) for d in range(k + 2) for b in range(d + 1)], dtype=np.int64)
    cdef long[:, ::1] ex = ex_np

    cdef double[::1] phi = np.empty(nr), gx = np.empty(nr), gy = np.empty(nr), lap = np.empty(nr)
    cdef double[:, :, ::1] chi = np.empty((m, nq, nk))
    cdef double[:, :, ::1] phif = np.empty((m, nq, nr))
    cdef double[:, ::1] wq = np.empty((m, nq))
    cdef double[::1] Lf = np.empty(m)
    cdef double[:, ::1] Bm = np.empty((nr, nd))
    cdef double[:, ::1] Gf = np.empty((nr, nr))
    cdef double[:, ::1] Mf = np.empty((nl, nl))
    cdef double[:, ::1] dT = np.empty((nl, nd))
    cdef double[:, ::1] PF = np.empty((nk, nr))
    cdef double[:, ::1] C = np.empty((nk, nd))
    cdef double[:, ::1] dTF = np.empty((nk, nd))
    cdef double[::1] Drow = np.empty(nd)

    cdef Py_ssize_t c, i, j, q, a, p, t, ii, c0, ip1
    cdef double xc, yc, hT, inv_h, e1x, e1y, e2x, e2y, det, w, X, Y, px, py
    cdef double dx, dy, L, nx, ny, qx, qy, s, area, wt
    cdef long ea, eb

    for c in range(nc):
        xc = centroids[c, 0]
        yc = centroids[c, 1]
        hT = diameters[c]
        inv_h = 1.0 / hT
        Bm[:, :] = 0.0

        # cell integrals on the centroid fan
        for i in range(m):
            ip1 = (i + 1) % m
            e1x = verts[c, i, 0] - xc
            e1y = verts[c, i, 1] - yc
            e2x = verts[c, ip1, 0] - xc
            e2y = verts[c, ip1, 1] - yc
            det = e1x * e2y - e1y * e2x
            for t in range(nt):
                w = det * tri_w[t]
                X = (tri_pts[t, 0] * e1x + tri_pts[t, 1] * e2x) * inv_h
                Y = (tri_pts[t, 0] * e1y + tri_pts[t, 1] * e2y) * inv_h
                for a in range(nr):
                    ea = ex[a, 0]
                    eb = ex[a, 1]
                    phi[a] = ipow(X, ea) * ipow(Y, eb)
                    gx[a] = ea * ipow(X, ea - 1) * ipow(Y, eb) * inv_h if ea > 0 else 0.0
                    gy[a] = eb * ipow(X, ea) * ipow(Y, eb - 1) * inv_h if eb > 0 else 0.0
                    s = 0.0
                    if ea > 1:
                        s += ea * (ea - 1) * ipow(X, ea - 2) * ipow(Y, eb)
                    if eb > 1:
                        s += eb * (eb - 1) * ipow(X, ea) * ipow(Y, eb - 2)
                    lap[a] = s * inv_h * inv_h
                for a in range(nr):
                    for p in range(nr):
                        Go[c, a, p] += w * (gx[a] * gx[p] + gy[a] * gy[p])
                        Mo[c, a, p] += w * phi[a] * phi[p]
                    if a > 0:
                        for p in range(nl):
                            Bm[a, p] -= w * lap[a] * phi[p]

        # face integrals
        for i in range(m):
            ip1 = (i + 1) % m
            dx = verts[c, ip1, 0] - verts[c, i, 0]
            dy = verts[c, ip1, 1] - verts[c, i, 1]
            L = sqrt(dx * dx + dy * dy)
            Lf[i] = L
            nx = dy / L
            ny = -dx / L
            c0 = nl + i * nk
            for q in range(nq):
                wq[i, q] = seg_w[q] * L
                legendre(2.0 * signs[c, i] * seg_t[q], nk, 1.0 / L, &chi[i, q, 0])
                qx = 0.5 * (verts[c, i, 0] + verts[c, ip1, 0]) + seg_t[q] * dx
                qy = 0.5 * (verts[c, i, 1] + verts[c, ip1, 1]) + seg_t[q] * dy
                X = (qx - xc) * inv_h
                Y = (qy - yc) * inv_h
                for a in range(nr):
                    ea = ex[a, 0]
                    eb = ex[a, 1]
                    phif[i, q, a] = ipow(X, ea) * ipow(Y, eb)
                    px = ea * ipow(X, ea - 1) * ipow(Y, eb) if ea > 0 else 0.0
                    py = eb * ipow(X, ea) * ipow(Y, eb - 1) if eb > 0 else 0.0
                    s = (px * nx + py * ny) * inv_h * wq[i, q]
                    if a > 0:
                        for p in range(nk):
                            Bm[a, c0 + p] += s * chi[i, q, p]

        # reconstruction: gradient part then mean fixing
        for a in range(nr):
            for p in range(nr):
                Gf[a, p] = Go[c, a, p]
        cholesky_inplace(Gf, 1, nr - 1)
        cholesky_solve(Gf, 1, nr - 1, Bm, 1, nd)
        area = Mo[c, 0, 0]
        for j in range(nd):
            s = 0.0
            if j < nl:
                s = Mo[c, 0, j]
            for a in range(1, nr):
                s -= Mo[c, 0, a] * Bm[a, j]
            Bm[0, j] = s / area
        for a in range(nr):
            for j in range(nd):
                Ro[c, a, j] = Bm[a, j]

        if stab == 0:
            # dT = Ml^{-1} (Mr[:nl] R) - E_T
            for a in range(nl):
                for p in range(nl):
                    Mf[a, p] = Mo[c, a, p]
                for j in range(nd):
                    s = 0.0
                    for p in range(nr):
                        s += Mo[c, a, p] * Bm[p, j]
                    dT[a, j] = s
            cholesky_inplace(Mf, 0, nl)
            cholesky_solve(Mf, 0, nl, dT, 0, nd)
            for a in range(nl):
                dT[a, a] -= 1.0

        for i in range(m):
            L = Lf[i]
            c0 = nl + i * nk
            for a in range(nk):
                for p in range(nr):
                    s = 0.0
                    for q in range(nq):
                        s += wq[i, q] * chi[i, q, a] * phif[i, q, p]
                    PF[a, p] = s
            # C = pi_F(v_T) - v_F
            C[:, :] = 0.0
            for a in range(nk):
                for p in range(nl):
                    C[a, p] = PF[a, p]
                C[a, c0 + a] -= 1.0
            for ii in range(nd):
                for j in range(nd):
                    s = 0.0
                    for a in range(nk):
                        s += C[a, ii] * C[a, j]
                    No[c, ii, j] += L * s
                    if stab == 1:
                        So[c, ii, j] += s / L
            if stab == 0:
                for a in range(nk):
                    for j in range(nd):
                        s = 0.0
                        for p in range(nr):
                            s += PF[a, p] * Bm[p, j]
                        dTF[a, j] = s
                    dTF[a, c0 + a] -= 1.0
                for q in range(nq):
                    for j in range(nd):
                        s = 0.0
                        for a in range(nk):
                            s += chi[i, q, a] * dTF[a, j]
                        for p in range(nl):
                            s -= phif[i, q, p] * dT[p, j]
                        Drow[j] = s
                    wt = wq[i, q] / L
                    for ii in range(nd):
                        if Drow[ii] != 0.0:
                            for j in range(nd):
                                So[c, ii, j] += wt * Drow[ii] * Drow[j]
    return R_out, G_out, M_out, S_out, N_out

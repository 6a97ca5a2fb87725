"""Convergence and iteration-count studies returning CSV-ready rows.

Every row carries the columns of ``COLUMNS``; quantities that a study does
not produce are left as ``None``.
"""
from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import biharmonic as bh
from .cases import BIHARMONIC_CASES, POISSON_CASES, relative_l2_error
from .hho import PiecewisePolynomial, assemble, cell_basis_values, group_quadrature
from .mesh import generate_cartesian, generate_triangular, read_mesh
from .precond import PatchPreconditioner
from .trace import boundary_error, normal_derivative

COLUMNS = ["h", "n", "k", "err_psi", "err_omega", "order_psi", "order_omega",
           "iters", "setup_s", "iter_s", "alpha"]

GENERATORS = {"cartesian": generate_cartesian, "tri": generate_triangular}


def make_mesh(kind, n=None):
    """``kind`` is ``cartesian``, ``tri`` or ``file:PATH``."""
    if kind.startswith("file:"):
        return read_mesh(kind[5:])
    try:
        gen = GENERATORS[kind]
    except KeyError:
        raise ValueError(f"unknown mesh kind {kind!r}") from None
    if n is None:
        raise ValueError("structured meshes need n")
    return gen(int(n))


def cell_degree(k, l):
    """Resolve ``l`` given as an int, ``"k"`` or ``"k+1"``."""
    if l is None or l == "k":
        return k
    if l == "k+1":
        return k + 1
    return int(l)


def projection_error(field, exact, order=None):
    """``||u_h - pi^{k+1} u|| / ||u||`` with pi the broken L2 projector."""
    mesh, deg = field.mesh, field.degree
    order = 2 * deg + 8 if order is None else order
    proj = np.empty_like(field.coeffs)
    for cells in mesh.groups.values():
        pts, w = group_quadrature(mesh, cells, order)
        phi = cell_basis_values(mesh, cells, pts, deg)
        M = np.einsum("cp,cpi,cpj->cij", w, phi, phi)
        rhs = np.einsum("cp,cpi->ci", w * exact(pts.reshape(-1, 2)).reshape(w.shape), phi)
        proj[cells] = np.linalg.solve(M, rhs[..., None])[..., 0]
    diff = PiecewisePolynomial(mesh, deg, field.coeffs - proj)
    err, _ = diff.integrals(None, order)
    _, ref = field.integrals(exact, order)
    return float(math.sqrt(err.sum() / ref.sum()))


def field_error(field, exact, measure):
    if measure == "exact":
        return relative_l2_error(field, exact)
    if measure == "projection":
        return projection_error(field, exact)
    raise ValueError(f"unknown error measure {measure!r}")


def add_orders(rows):
    """Observed orders between consecutive rows of equal k."""
    last = {}
    for row in rows:
        prev = last.get(row["k"])
        for key in ("psi", "omega"):
            e, o = row[f"err_{key}"], None
            if prev is not None and e and prev[f"err_{key}"]:
                o = math.log(prev[f"err_{key}"] / e) / math.log(prev["h"] / row["h"])
            row[f"order_{key}"] = o
        last[row["k"]] = row
    return rows


def _row(mesh, n, k, **kw):
    row = dict.fromkeys(COLUMNS)
    row.update(h=mesh.h, n=n, k=k)
    row.update(kw)
    return row


def normalder_point(mesh_kind, n, k, l="k", stab="classic", case="sine"):
    c = POISSON_CASES[case]
    t0 = time.perf_counter()
    mesh = make_mesh(mesh_kind, n)
    S = assemble(mesh, k, cell_degree(k, l), stab)
    t1 = time.perf_counter()
    g = S.cell_load(c.f)
    uh = S.solve(S.project_boundary(c.u), g_cells=g)
    dn = normal_derivative(S, uh, g_cells=g)
    err = boundary_error(S, dn, c.gN, bh.boundary_normals(mesh))
    return _row(mesh, n, k, err_psi=err, setup_s=t1 - t0, iter_s=time.perf_counter() - t1)


def biharm_point(mesh_kind, n, k, l="k", stab="classic", case="exp", alpha=None,
                 eps=1e-8, measure="exact"):
    c = BIHARMONIC_CASES[case]
    t0 = time.perf_counter()
    mesh = make_mesh(mesh_kind, n)
    problem = bh.SplitProblem(mesh, k, cell_degree(k, l), f=c.f, gD=c.gD, gN=c.gN,
                              eps=eps, stab=stab)
    pc = PatchPreconditioner(problem, alpha) if alpha else None
    setup = time.perf_counter() - t0
    sol = bh.solve(problem, pc)
    return _row(mesh, n, k,
                err_psi=field_error(sol.psi_h, c.psi, measure),
                err_omega=field_error(sol.omega_h, c.omega, measure),
                iters=sol.report.iterations, setup_s=setup + sol.setup_time,
                iter_s=sol.solve_time, alpha=alpha or 0)


def _run(fn, jobs, tasks):
    if jobs and jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(_call, [(fn, t) for t in tasks]))
    return [fn(**t) for t in tasks]


def _call(item):
    fn, kw = item
    return fn(**kw)


def normalder_study(mesh_kind, ns, ks, jobs=1, **kw):
    tasks = [dict(mesh_kind=mesh_kind, n=n, k=k, **kw) for k in ks for n in ns]
    return add_orders(_run(normalder_point, jobs, tasks))


def biharm_study(mesh_kind, ns, ks, jobs=1, **kw):
    tasks = [dict(mesh_kind=mesh_kind, n=n, k=k, **kw) for k in ks for n in ns]
    return add_orders(_run(biharm_point, jobs, tasks))


def precond_study(mesh_kind, ns, ks, alphas, jobs=1, **kw):
    """Iteration counts per (n, k, alpha); alpha 0 means no preconditioner."""
    tasks = [dict(mesh_kind=mesh_kind, n=n, k=k, alpha=a, **kw)
             for n in ns for k in ks for a in alphas]
    rows = _run(biharm_point, jobs, tasks)
    for row in rows:
        row["order_psi"] = row["order_omega"] = None
    return rows

"""Command-line harness: convergence studies, single solves, preconditioner
benchmarks and mesh utilities.

Options may also come from ``--config FILE`` holding ``key = value`` lines
(keys are option names with dashes or underscores); flags given on the
command line win over the file.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .biharmonic import SplitProblem, solve
from .cases import BIHARMONIC_CASES, POISSON_CASES
from .errors import HHOError
from .mesh import write_mesh
from .precond import PatchPreconditioner
from .studies import (COLUMNS, biharm_study, cell_degree, field_error, make_mesh,
                      normalder_study, precond_study)

log = logging.getLogger("hhobih")

LIST_KEYS = {"n", "k", "alpha"}


def read_config(path):
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise SystemExit(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        out[key] = value.split() if key in LIST_KEYS else value
    return out


def write_csv(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=COLUMNS)
        w.writeheader()
        for row in rows:
            w.writerow({c: _fmt(row.get(c)) for c in COLUMNS})


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.6e}"
    return v


def print_table(rows, cols, out=None):
    out = out or sys.stdout
    width = {c: max(len(c), *(len(str(_fmt(r[c]))) for r in rows)) for c in cols}
    out.write("  ".join(c.rjust(width[c]) for c in cols) + "\n")
    for r in rows:
        out.write("  ".join(str(_fmt(r[c])).rjust(width[c]) for c in cols) + "\n")


def _common(p, n_list=True, k_list=True):
    p.add_argument("--mesh", default="cartesian", help="cartesian, tri or file:PATH")
    if n_list:
        p.add_argument("--n", nargs="+", type=int, default=[16, 32, 64])
    else:
        p.add_argument("--n", type=int, default=16)
    if k_list:
        p.add_argument("--k", nargs="+", type=int, default=[0, 1, 2])
    else:
        p.add_argument("--k", type=int, default=0)
    p.add_argument("--l", default="k", help="cell degree: k, k+1 or an integer")
    p.add_argument("--stab", choices=["classic", "simple"], default="classic")
    p.add_argument("--eps", type=float, default=1e-8)
    p.add_argument("--out", help="CSV output path")
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")


def build_parser():
    parser = argparse.ArgumentParser(prog="hhobih", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--config", help="key = value file with option defaults")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("normalder-conv", help="convergence of the discrete normal derivative")
    _common(p)
    p.add_argument("--case", choices=sorted(POISSON_CASES), default="sine")

    p = sub.add_parser("biharm-conv", help="convergence of the biharmonic scheme")
    _common(p)
    p.add_argument("--case", choices=sorted(BIHARMONIC_CASES), default="exp")
    p.add_argument("--alpha", type=int, default=0, help="patch layers (0: no preconditioner)")
    p.add_argument("--error", choices=["exact", "projection"], default="exact",
                   help="compare with the exact field or with its L2 projection")

    p = sub.add_parser("biharm-solve", help="single biharmonic solve with a summary")
    _common(p, n_list=False, k_list=False)
    p.add_argument("--case", choices=sorted(BIHARMONIC_CASES), default="exp")
    p.add_argument("--alpha", type=int, default=0)
    p.add_argument("--error", choices=["exact", "projection"], default="exact")
    p.add_argument("--history", help="write the residual history to this file")

    p = sub.add_parser("precond-bench", help="outer iterations versus patch size")
    _common(p)
    p.add_argument("--case", choices=sorted(BIHARMONIC_CASES), default="exp")
    p.add_argument("--alpha", nargs="+", type=int, default=[0, 2, 4, 8])
    p.add_argument("--error", choices=["exact", "projection"], default="exact")

    p = sub.add_parser("mesh-gen", help="write a structured mesh file")
    p.add_argument("--mesh", choices=["cartesian", "tri"], default="cartesian")
    p.add_argument("--n", type=int, default=8)
    p.add_argument("--out", required=True)

    p = sub.add_parser("mesh-info", help="print mesh statistics")
    p.add_argument("--mesh", default="cartesian")
    p.add_argument("--n", type=int, default=8)
    return parser


def parse_args(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        conf = read_config(args.config)
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in sub._actions}
        unknown = set(conf) - known
        if unknown:
            parser.error(f"unknown keys in {args.config}: {', '.join(sorted(unknown))}")
        sub.set_defaults(**conf)
        args = parser.parse_args(argv)
        # values from the file arrive as strings; let the subparser convert them
        for action in sub._actions:
            if action.dest in conf and action.type is not None:
                val = getattr(args, action.dest)
                if isinstance(val, list):
                    setattr(args, action.dest, [action.type(v) if isinstance(v, str) else v
                                                for v in val])
                elif isinstance(val, str):
                    setattr(args, action.dest, action.type(val))
    return args


def _emit(rows, args, cols):
    print_table(rows, cols)
    if args.out:
        write_csv(rows, args.out)
        print(f"wrote {args.out}")


def cmd_normalder(args):
    rows = normalder_study(args.mesh, args.n, args.k, jobs=args.jobs, l=args.l,
                           stab=args.stab, case=args.case)
    _emit(rows, args, ["n", "k", "h", "err_psi", "order_psi", "setup_s", "iter_s"])


def cmd_biharm_conv(args):
    rows = biharm_study(args.mesh, args.n, args.k, jobs=args.jobs, l=args.l, stab=args.stab,
                        case=args.case, alpha=args.alpha, eps=args.eps, measure=args.error)
    _emit(rows, args, ["n", "k", "h", "err_psi", "order_psi", "err_omega", "order_omega",
                       "iters", "setup_s", "iter_s"])


def cmd_precond(args):
    rows = precond_study(args.mesh, args.n, args.k, args.alpha, jobs=args.jobs, l=args.l,
                         stab=args.stab, case=args.case, eps=args.eps, measure=args.error)
    _emit(rows, args, ["n", "k", "alpha", "iters", "setup_s", "iter_s"])


def cmd_solve(args):
    c = BIHARMONIC_CASES[args.case]
    t0 = time.perf_counter()
    mesh = make_mesh(args.mesh, args.n)
    problem = SplitProblem(mesh, args.k, cell_degree(args.k, args.l), f=c.f, gD=c.gD,
                           gN=c.gN, eps=args.eps, stab=args.stab)
    pc = PatchPreconditioner(problem, args.alpha) if args.alpha else None
    setup = time.perf_counter() - t0
    sol = solve(problem, pc)
    row = dict.fromkeys(COLUMNS)
    row.update(h=mesh.h, n=args.n, k=args.k, iters=sol.report.iterations, alpha=args.alpha,
               err_psi=field_error(sol.psi_h, c.psi, args.error),
               err_omega=field_error(sol.omega_h, c.omega, args.error),
               setup_s=setup + sol.setup_time, iter_s=sol.solve_time)
    print(mesh)
    print(f"k={args.k} l={problem.l} stab={args.stab} backend={kernels.BACKEND} "
          f"boundary DoFs={problem.n_boundary_dofs}")
    print(f"FCG iterations {sol.report.iterations}, final residual {sol.report.residual:.3e}")
    if pc is not None:
        print(f"preconditioner alpha={args.alpha}: nnz={pc.matrix.nnz}, "
              f"mean inner iterations {np.mean(pc.inner_iterations or [0]):.1f}")
    print(f"relative L2 error ({args.error}): psi {row['err_psi']:.3e}  omega {row['err_omega']:.3e}")
    print(f"setup {row['setup_s']:.2f}s  iterations {row['iter_s']:.2f}s")
    if args.history:
        np.savetxt(args.history, np.asarray(sol.history))
    if args.out:
        write_csv([row], args.out)


def cmd_mesh_gen(args):
    mesh = make_mesh(args.mesh, args.n)
    write_mesh(mesh, args.out)
    print(f"wrote {args.out}: {mesh}")


def cmd_mesh_info(args):
    mesh = make_mesh(args.mesh, args.n)
    sizes = {m: len(c) for m, c in sorted(mesh.groups.items())}
    print(mesh)
    print(f"vertices {mesh.n_vertices}, interior faces {len(mesh.interior_faces)}, "
          f"boundary cells {int(mesh.boundary_cell_mask.sum())}")
    print(f"cells by vertex count: {sizes}")
    print(f"total measure {mesh.domain_measure():.15g}")


COMMANDS = {
    "normalder-conv": cmd_normalder,
    "biharm-conv": cmd_biharm_conv,
    "biharm-solve": cmd_solve,
    "precond-bench": cmd_precond,
    "mesh-gen": cmd_mesh_gen,
    "mesh-info": cmd_mesh_info,
}


def main(argv=None):
    args = parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * args.verbose,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except (HHOError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

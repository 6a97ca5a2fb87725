"""Time system assembly with the numpy and compiled local kernels.

The timing covers the whole condensed assembly, including the sparse
factorisation, so the speedup understates the kernel-only gain.

    python benchmarks/bench_kernels.py --n 64 --k 2 --repeat 3
"""
import argparse
import time

from hhobiharmonic import kernels
from hhobiharmonic.hho import assemble
from hhobiharmonic.studies import make_mesh


def best_time(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--mesh", default="cartesian")
    p.add_argument("--n", type=int, default=64)
    p.add_argument("--k", type=int, nargs="+", default=[0, 1, 2])
    p.add_argument("--stab", default="classic", choices=["classic", "simple"])
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args(argv)

    mesh = make_mesh(args.mesh, args.n)
    print(mesh)
    print(f"{'k':>2}  {'backend':>8}  {'seconds':>9}  speedup")
    for k in args.k:
        l = k + 1 if args.stab == "simple" else k
        ref = None
        for name in ["python", "cython"]:
            if name not in kernels.BACKENDS:
                print(f"{k:>2}  {name:>8}  {'n/a':>9}")
                continue
            t, S = best_time(lambda: assemble(mesh, k, l, args.stab, backend=name), args.repeat)
            if ref is None:
                ref = (t, S)
                speed = ""
            else:
                # sanity: both kernels assemble the same operator
                d = abs(S.Ahat - ref[1].Ahat).max() / abs(ref[1].Ahat).max()
                assert d < 1e-12, d
                speed = f"{ref[0] / t:6.1f}x"
            print(f"{k:>2}  {name:>8}  {t:9.3f}  {speed}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

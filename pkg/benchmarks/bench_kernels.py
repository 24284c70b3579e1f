"""Time the numba and numpy kernels on a flat-T^2 geodesic.

Usage: ``python benchmarks/bench_kernels.py [--grid 64] [--repeat 5]``.
Both backends are timed in this process; the first numba call (compilation)
is excluded.  Agreement between the backends is printed alongside.
"""
import argparse
import timeit

import numpy as np

from chernlab import geodesic as GD
from chernlab import gspace as S
from chernlab import kernels as K
from chernlab._accel import HAVE_NUMBA
from chernlab.experiments import samples as SM


def setup(n):
    sample = SM.corpus_by_name(["flat-generic"])[0]
    b = sample.build(n)
    geo = GD.geodesic_init(b.point, S.project_to_F(b.point, S.make_seed(b.point, sample.seed)))
    return geo, GD._coeffs(geo)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--grid", type=int, default=64)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--steps", type=int, default=256)
    args = ap.parse_args()
    geo, (a, b, c) = setup(args.grid)
    backends = ["numpy"] + (["numba"] if HAVE_NUMBA else [])
    cases = {
        "inverse_u_integral": lambda be: K.inverse_u_integral(a, b, c, 0.2, 1e-12, backend=be)[0],
        f"rk4 ({args.steps} steps)": lambda be: K.rk4(geo.p0, geo.u_dot0, geo.G0, 0.2, args.steps, backend=be)[0],
    }
    print(f"grid {args.grid}^2 ({a.size} nodes), best of {args.repeat}")
    print(f"{'kernel':<22} {'backend':<8} {'seconds':>10} {'speedup':>8} {'max diff':>10}")
    for name, fn in cases.items():
        ref = fn("numpy")
        base = None
        for be in backends:
            fn(be)  # warm-up, includes compilation for numba
            best = min(timeit.repeat(lambda: fn(be), number=1, repeat=args.repeat))
            base = base or best
            diff = float(np.max(np.abs(fn(be) - ref)))
            print(f"{name:<22} {be:<8} {best:>10.4f} {base / best:>7.1f}x {diff:>10.1e}")
    if not HAVE_NUMBA:
        print("numba disabled or missing; only the numpy backend was timed")


if __name__ == "__main__":
    main()

#!/usr/bin/env python3
"""Free-medium sanity run: compare log Z_hat against exp(-L sqrt(2 lambda)).

Runs the sampler in an empty field for a grid of (L, lambda) pairs and prints
the relative error of each estimate against the closed-form first-passage
transform. Useful as a quick calibration check before a long sweep.
"""

import argparse
import math
import time

import numpy as np

from trapmc.field import empty_field
from trapmc.geometry import HYPERPLANE, Geometry, default_window
from trapmc.params import ModelParams, PotentialSpec
from trapmc.seeds import derive_seed
from trapmc.smc import smc_run


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--L-grid", default="4,8,16", help="comma-separated lengths")
    ap.add_argument("--lams", default="0.5,1.0", help="comma-separated lambdas")
    ap.add_argument("--d", type=int, default=2)
    ap.add_argument("--particles", type=int, default=10_000)
    ap.add_argument("--dt", type=float, default=1e-3)
    ap.add_argument("--seed", type=int, default=2026)
    args = ap.parse_args()

    Ls = [float(x) for x in args.L_grid.split(",")]
    lams = [float(x) for x in args.lams.split(",")]
    t0 = time.perf_counter()
    print(f"{'L':>6} {'lambda':>8} {'log_Z_hat':>12} {'exact':>12} {'rel.err':>9}")
    for i, (L, lam) in enumerate((L, lam) for L in Ls for lam in lams):
        params = ModelParams(d=args.d, alpha=args.d + 1.0, gamma=1.0, lam=lam)
        geom = Geometry(kind=HYPERPLANE, L=L, d=args.d)
        lo, hi = default_window(geom, xi_max=0.95)
        field = empty_field(params, lo, hi)
        res = smc_run(
            field, PotentialSpec.raw(), geom, args.dt, args.particles,
            derive_seed(args.seed, [i]),
        )
        exact = -L * math.sqrt(2.0 * lam)
        rel = abs(res.log_Z_hat - exact) / abs(exact)
        print(f"{L:6g} {lam:8g} {res.log_Z_hat:12.4f} {exact:12.4f} {rel:9.4f}")
    print(f"total {time.perf_counter() - t0:.1f}s")


if __name__ == "__main__":
    main()

#!/usr/bin/env python3
"""End-to-end walkthrough on simulated data.

Generates a heterogeneous-effect dataset, estimates propensities, fits the
accelerated sampler, refines it with warm-started Metropolis-Hastings
chains, prints effect summaries, and renders a subgroup tree.

Example:
    python3 scripts/demo_pipeline.py --n 500 --seed 0
"""

import argparse
import sys
import time

import numpy as np

from xbcf import DGPConfig, Hyperparams, fit, generate, summarize, warm_start
from xbcf.propensity import estimate_propensity
from xbcf.simulation import HETEROGENEOUS
from xbcf.subgroups import format_subgroup_tree, subgroup_posterior, subgroup_tree


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=500)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--ws-iters", type=int, default=100)
    args = parser.parse_args()

    sim = generate(DGPConfig(n=args.n, treatment=HETEROGENEOUS, seed=args.seed))
    ds = sim.dataset
    prop = estimate_propensity(ds.X, ds.z)
    ds.pi_hat = prop.pi
    print(f"simulated n={ds.n}; propensity fit converged={prop.converged}")

    hp = Hyperparams(seed=args.seed)
    t0 = time.perf_counter()
    xb = fit(ds, hp)
    print(f"accelerated sampler: {hp.I} sweeps in {time.perf_counter() - t0:.2f}s")

    t0 = time.perf_counter()
    pooled = warm_start(ds, hp, xb, iters_per_chain=args.ws_iters)
    n_chains = len({d.chain_id for d in pooled.draws})
    print(f"warm start: {n_chains} chains x {args.ws_iters} iterations "
          f"in {time.perf_counter() - t0:.2f}s")

    for label, draws in (("accelerated", xb), ("warm-started", pooled)):
        s = summarize(draws, ds.X)
        rmse = float(np.sqrt(np.mean((s.point - sim.tau_true) ** 2)))
        cover = float(np.mean((s.lo <= sim.tau_true) & (sim.tau_true <= s.hi)))
        print(f"{label:>13}: ATE {s.ate_point:.3f} "
              f"[{s.ate_lo:.3f}, {s.ate_hi:.3f}]  CATE RMSE {rmse:.3f}  "
              f"coverage {cover:.2f}  IL {float(np.mean(s.hi - s.lo)):.2f}")

    s = summarize(pooled, ds.X)
    sg = subgroup_tree(s.point, ds.X, max_depth=2, min_leaf=20)
    print("\nsubgroup tree on CATE point estimates:")
    print(format_subgroup_tree(sg, [f"x{j + 1}" for j in range(ds.d)]))
    if len(sg.leaf_ids) > 1:
        hi = int(sg.leaf_ids[np.argmax(sg.leaf_means)])
        lo = int(sg.leaf_ids[np.argmin(sg.leaf_means)])
        diff = subgroup_posterior(pooled, ds.X, sg.assignments, hi, lo)
        print(f"\nhighest vs lowest subgroup: {diff.point:.3f} "
              f"[{diff.lo:.3f}, {diff.hi:.3f}]")
    return 0


if __name__ == "__main__":
    sys.exit(main())

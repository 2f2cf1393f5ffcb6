"""Command-line interface.

Subcommands: fit, predict, warmstart, simulate, benchmark, subgroups.
Exit codes: 0 success, 1 validation/usage error, 2 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import sys

import numpy as np

from . import bcf_mcmc, io, simulation, subgroups
from . import sampler as xbcf_sampler
from .errors import ValidationError, XbcfError
from .model_core import Hyperparams
from .propensity import estimate_propensity

TRUTH_COLUMNS = ("pi_true", "mu_true", "tau_true")


def _add_data_flags(p):
    p.add_argument("--data", required=True, help="input CSV path")
    p.add_argument("--outcome", default="y", help="outcome column name")
    p.add_argument("--treatment-col", default="z", help="treatment column name")
    p.add_argument("--propensity", choices=["column", "estimate", "true"],
                   default="estimate",
                   help="propensity source: a named column, a logistic fit, or pi_true")
    p.add_argument("--propensity-col", default="pi_hat",
                   help="column name used with --propensity column")
    p.add_argument("--delimiter", default=",")


def _add_hp_flags(p):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sweeps", type=int, default=40)
    p.add_argument("--burnin", type=int, default=15)
    p.add_argument("--trees-mu", type=int, default=30)
    p.add_argument("--trees-tau", type=int, default=10)


def _hp_from_args(args) -> Hyperparams:
    return Hyperparams(L=args.trees_mu, K=args.trees_tau, I=args.sweeps,
                       burnin=args.burnin, seed=args.seed)


def _load_dataset(args):
    pcol = None
    if args.propensity == "column":
        pcol = args.propensity_col
    elif args.propensity == "true":
        pcol = "pi_true"
    ds = io.load_csv(args.data, args.outcome, args.treatment_col,
                     propensity_col=pcol, delimiter=args.delimiter,
                     exclude=TRUTH_COLUMNS)
    if args.propensity == "estimate":
        fit = estimate_propensity(ds.X, ds.z)
        if fit.warning:
            print("warning: propensity estimation did not converge cleanly",
                  file=sys.stderr)
        ds.pi_hat = fit.pi
    return ds


def _feature_names(args):
    header, _ = io.read_table(args.data, args.delimiter)
    pcol = args.propensity_col if args.propensity == "column" else (
        "pi_true" if args.propensity == "true" else None)
    drop = {args.outcome, args.treatment_col, pcol, *TRUTH_COLUMNS}
    return [c for c in header if c not in drop]


def cmd_simulate(args) -> int:
    cfg = simulation.DGPConfig(n=args.n, prognostic=args.prognostic,
                               treatment=args.treatment, seed=args.seed)
    sim = simulation.generate(cfg)
    ds = sim.dataset
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x1", "x2", "x3", "x4", "x5", "y", "z",
                         "pi_true", "mu_true", "tau_true"])
        for i in range(ds.n):
            writer.writerow([repr(float(v)) for v in ds.X[i]]
                            + [repr(float(ds.y[i])), int(ds.z[i]),
                               repr(float(sim.pi_true[i])), repr(float(sim.mu_true[i])),
                               repr(float(sim.tau_true[i]))])
    print(f"wrote {ds.n} rows to {args.out}")
    return 0


def cmd_fit(args) -> int:
    ds = _load_dataset(args)
    hp = _hp_from_args(args)
    draws = xbcf_sampler.fit(ds, hp)
    io.save_archive(draws, args.out)
    print(f"wrote archive with {len(draws)} sweeps to {args.out}")
    if args.cate_out:
        summary = xbcf_sampler.summarize(draws, ds.X)
        io.write_cate_table(summary, args.cate_out)
        print(f"wrote CATE table to {args.cate_out}")
    return 0


def cmd_predict(args) -> int:
    draws = io.load_archive(args.archive)
    ds = _load_dataset(args)
    summary = xbcf_sampler.summarize(draws, ds.X)
    io.write_cate_table(summary, args.out)
    print(f"wrote CATE table for {ds.n} rows to {args.out}")
    return 0


def cmd_warmstart(args) -> int:
    draws = io.load_archive(args.archive)
    ds = _load_dataset(args)
    pooled = bcf_mcmc.warm_start(ds, draws.hyperparams, draws,
                                 iters_per_chain=args.iters, seed=args.seed,
                                 max_chains=args.chains, n_jobs=args.parallelism)
    io.save_archive(pooled, args.out)
    print(f"wrote pooled archive with {len(pooled)} draws to {args.out}")
    if args.cate_out:
        summary = xbcf_sampler.summarize(pooled, ds.X)
        io.write_cate_table(summary, args.cate_out)
        print(f"wrote CATE table to {args.cate_out}")
    return 0


def cmd_benchmark(args) -> int:
    prognostics = [args.prognostic] if args.prognostic != "both" else \
        [simulation.LINEAR, simulation.NONLINEAR]
    treatments = [args.treatment] if args.treatment != "both" else \
        [simulation.HOMOGENEOUS, simulation.HETEROGENEOUS]
    configs = [simulation.DGPConfig(n=args.n, prognostic=p, treatment=t)
               for p in prognostics for t in treatments]
    methods = args.methods.split(",")
    for m in methods:
        if m not in simulation.METHODS:
            raise ValidationError(f"unknown method {m!r}; choose from {simulation.METHODS}")
    rows = simulation.run_benchmark(
        configs, methods=methods, reps=args.reps, parallelism=args.parallelism,
        use_true_propensity=(args.propensity == "true"),
        cold_iters=args.iters, cold_burnin=args.cold_burnin,
        ws_iters=args.ws_iters, base_seed=args.seed)
    io.write_metrics_table(rows, args.out)
    for row in rows:
        print({k: row[k] for k in simulation.RESULT_COLUMNS})
        for failure in row.get("failures", []):
            print(f"  failed rep: {failure}", file=sys.stderr)
    print(f"wrote metrics table to {args.out}")
    return 0


def cmd_subgroups(args) -> int:
    cate_mean, _, _ = io.read_cate_table(args.cate)
    ds = _load_dataset(args)
    if cate_mean.shape[0] != ds.n:
        raise ValidationError(
            f"CATE table has {cate_mean.shape[0]} rows but data has {ds.n}")
    sg = subgroups.subgroup_tree(cate_mean, ds.X, max_depth=args.max_depth,
                                 min_leaf=args.min_leaf)
    text = subgroups.format_subgroup_tree(sg, _feature_names(args))
    lines = [text]
    if args.archive:
        draws = io.load_archive(args.archive)
        hi_leaf = int(sg.leaf_ids[np.argmax(sg.leaf_means)])
        lo_leaf = int(sg.leaf_ids[np.argmin(sg.leaf_means)])
        if hi_leaf != lo_leaf:
            diff = subgroups.subgroup_posterior(draws, ds.X, sg.assignments,
                                                hi_leaf, lo_leaf)
            lines.append(
                f"posterior difference (leaf {hi_leaf} - leaf {lo_leaf}): "
                f"{diff.point:.4f}  95% interval [{diff.lo:.4f}, {diff.hi:.4f}]")
    out_text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(out_text)
    else:
        print(out_text, end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="xbcf",
                                     description="Accelerated Bayesian causal forests")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a benchmark dataset with ground truth")
    p.add_argument("--n", type=int, default=500)
    p.add_argument("--prognostic", choices=[simulation.LINEAR, simulation.NONLINEAR],
                   default=simulation.LINEAR)
    p.add_argument("--treatment", choices=[simulation.HOMOGENEOUS, simulation.HETEROGENEOUS],
                   default=simulation.HOMOGENEOUS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit the accelerated sampler, write an archive")
    _add_data_flags(p)
    _add_hp_flags(p)
    p.add_argument("--out", required=True, help="archive output path")
    p.add_argument("--cate-out", default=None, help="optional CATE table output path")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="CATE table from an archive and a data file")
    _add_data_flags(p)
    p.add_argument("--archive", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("warmstart", help="run warm-started MH chains from an archive")
    _add_data_flags(p)
    p.add_argument("--archive", required=True)
    p.add_argument("--iters", type=int, default=100, help="MH iterations per chain")
    p.add_argument("--chains", type=int, default=None, help="cap the number of chains")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--parallelism", type=int, default=1)
    p.add_argument("--out", required=True)
    p.add_argument("--cate-out", default=None)
    p.set_defaults(func=cmd_warmstart)

    p = sub.add_parser("benchmark", help="run the simulation benchmark")
    p.add_argument("--n", type=int, default=500)
    p.add_argument("--prognostic", choices=[simulation.LINEAR, simulation.NONLINEAR, "both"],
                   default="both")
    p.add_argument("--treatment",
                   choices=[simulation.HOMOGENEOUS, simulation.HETEROGENEOUS, "both"],
                   default="both")
    p.add_argument("--methods", default=",".join(simulation.METHODS))
    p.add_argument("--reps", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--parallelism", type=int, default=1)
    p.add_argument("--propensity", choices=["estimate", "true"], default="estimate")
    p.add_argument("--iters", type=int, default=1000, help="cold-start kept iterations")
    p.add_argument("--cold-burnin", type=int, default=1000)
    p.add_argument("--ws-iters", type=int, default=100)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("subgroups", help="fit a subgroup tree to CATE point estimates")
    _add_data_flags(p)
    p.add_argument("--cate", required=True, help="CATE table path")
    p.add_argument("--archive", default=None,
                   help="optional archive for posterior subgroup differences")
    p.add_argument("--max-depth", type=int, default=3)
    p.add_argument("--min-leaf", type=int, default=10)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_subgroups)

    return parser


def cli(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; we reserve 2 for I/O problems
        return 0 if exc.code == 0 else 1
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, XbcfError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(cli(sys.argv[1:]))


if __name__ == "__main__":
    main()

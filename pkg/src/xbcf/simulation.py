"""Confounded data-generating processes, evaluation metrics, and the
benchmark runner.

The covariates are three standard normals (x1, x2, x3), a three-level
categorical coded 1/2/3 (x4, the domain of the step function g), and a
dichotomous variable coded 0/1 (x5). Treatment probability depends on the
prognostic mean to induce strong confounding.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from concurrent.futures import ProcessPoolExecutor

import numpy as np
from scipy.stats import norm

from .errors import ValidationError
from .model_core import Dataset, Hyperparams
from . import sampler as xbcf_sampler
from . import bcf_mcmc
from .propensity import estimate_propensity

LINEAR = "linear"
NONLINEAR = "nonlinear"
HOMOGENEOUS = "homogeneous"
HETEROGENEOUS = "heterogeneous"

_G_TABLE = np.array([np.nan, 2.0, -1.0, -4.0])  # g(1)=2, g(2)=-1, g(3)=-4


@dataclass(frozen=True)
class DGPConfig:
    n: int = 500
    prognostic: str = LINEAR
    treatment: str = HOMOGENEOUS
    seed: int = 0

    def validate(self) -> "DGPConfig":
        if self.n < 10:
            raise ValidationError(f"n must be >= 10, got {self.n}")
        if self.prognostic not in (LINEAR, NONLINEAR):
            raise ValidationError(f"unknown prognostic kind {self.prognostic!r}")
        if self.treatment not in (HOMOGENEOUS, HETEROGENEOUS):
            raise ValidationError(f"unknown treatment kind {self.treatment!r}")
        return self

    def label(self) -> str:
        return f"{self.prognostic}/{self.treatment}/n={self.n}"


@dataclass
class SimulatedData:
    dataset: Dataset
    tau_true: np.ndarray
    mu_true: np.ndarray
    pi_true: np.ndarray


def prognostic_mean(X: np.ndarray, kind: str) -> np.ndarray:
    X = np.atleast_2d(X)
    x1, x3, x4 = X[:, 0], X[:, 2], X[:, 3].astype(np.int64)
    g = _G_TABLE[x4]
    if kind == LINEAR:
        return 1.0 + g + x1 * x3
    if kind == NONLINEAR:
        return -6.0 + g + 6.0 * np.abs(x3 - 1.0)
    raise ValidationError(f"unknown prognostic kind {kind!r}")


def treatment_effect(X: np.ndarray, kind: str) -> np.ndarray:
    X = np.atleast_2d(X)
    if kind == HOMOGENEOUS:
        return np.full(X.shape[0], 3.0)
    if kind == HETEROGENEOUS:
        return 1.0 + 2.0 * X[:, 1] * X[:, 4]
    raise ValidationError(f"unknown treatment kind {kind!r}")


def generate(config: DGPConfig) -> SimulatedData:
    """Draw one dataset; deterministic given config.seed."""
    config.validate()
    rng = np.random.default_rng(config.seed)
    n = config.n
    x123 = rng.standard_normal((n, 3))
    x4 = rng.integers(1, 4, size=n).astype(float)
    x5 = rng.integers(0, 2, size=n).astype(float)
    X = np.column_stack([x123, x4, x5])
    mu = prognostic_mean(X, config.prognostic)
    tau = treatment_effect(X, config.treatment)
    s = float(np.std(mu, ddof=1))
    u = rng.uniform(size=n)
    pi = 0.8 * norm.cdf(3.0 * mu / s - 0.5 * X[:, 0]) + 0.05 + u / 10.0
    z = (rng.uniform(size=n) < pi).astype(np.int64)
    y = mu + tau * z + rng.standard_normal(n)
    return SimulatedData(Dataset(y=y, z=z, X=X), tau_true=tau, mu_true=mu, pi_true=pi)


@dataclass
class ReplicationScore:
    """Metrics for one replication; ate_error is signed so the runner can
    aggregate ATE RMSE as a root mean square across replications."""

    ate_error: float
    ate_covered: float
    ate_il: float
    cate_rmse: float
    cate_coverage: float
    cate_il: float


def score(estimates: xbcf_sampler.CateSummary, truth: SimulatedData) -> ReplicationScore:
    tau = truth.tau_true
    if estimates.point.shape != tau.shape:
        raise ValidationError(
            f"estimate rows ({estimates.point.shape}) do not align with truth ({tau.shape})")
    ate_true = float(tau.mean())
    return ReplicationScore(
        ate_error=estimates.ate_point - ate_true,
        ate_covered=float(estimates.ate_lo <= ate_true <= estimates.ate_hi),
        ate_il=estimates.ate_hi - estimates.ate_lo,
        cate_rmse=float(np.sqrt(np.mean((estimates.point - tau) ** 2))),
        cate_coverage=float(np.mean((estimates.lo <= tau) & (tau <= estimates.hi))),
        cate_il=float(np.mean(estimates.hi - estimates.lo)),
    )


METHODS = ("xbcf", "bcf_cold", "ws_bcf")

RESULT_COLUMNS = ("config", "method", "ate_rmse", "cate_rmse", "ate_cover",
                  "cate_cover", "ate_il", "cate_il", "seconds")


def _fit_one(config: DGPConfig, method: str, rep_seed: int, hp: Hyperparams,
             use_true_propensity: bool, cold_iters: int, cold_burnin: int,
             ws_iters: int):
    sim = generate(DGPConfig(config.n, config.prognostic, config.treatment, rep_seed))
    ds = sim.dataset
    if use_true_propensity:
        ds.pi_hat = sim.pi_true
    else:
        ds.pi_hat = estimate_propensity(ds.X, ds.z).pi
    hp_rep = Hyperparams(**{**hp.__dict__, "seed": rep_seed})
    start = time.perf_counter()
    if method == "xbcf":
        draws = xbcf_sampler.fit(ds, hp_rep)
    elif method == "bcf_cold":
        draws = bcf_mcmc.bcf_fit(ds, hp_rep, iters=cold_burnin + cold_iters,
                                 burnin=cold_burnin)
    elif method == "ws_bcf":
        xb = xbcf_sampler.fit(ds, hp_rep)
        draws = bcf_mcmc.warm_start(ds, hp_rep, xb, iters_per_chain=ws_iters)
    else:
        raise ValidationError(f"unknown method {method!r}")
    seconds = time.perf_counter() - start
    est = xbcf_sampler.summarize(draws, ds.X)
    return score(est, sim), seconds


def _run_cell(args):
    config, method, rep_seeds, hp, use_true_propensity, cold_iters, cold_burnin, ws_iters = args
    scores, secs, failures = [], [], []
    for seed in rep_seeds:
        try:
            sc, sec = _fit_one(config, method, seed, hp, use_true_propensity,
                               cold_iters, cold_burnin, ws_iters)
            scores.append(sc)
            secs.append(sec)
        except Exception as exc:  # individual rep failures are recorded, not fatal
            failures.append(f"seed {seed}: {exc}")
    row = {"config": config.label(), "method": method}
    if scores:
        row.update(
            ate_rmse=float(np.sqrt(np.mean([s.ate_error ** 2 for s in scores]))),
            cate_rmse=float(np.mean([s.cate_rmse for s in scores])),
            ate_cover=float(np.mean([s.ate_covered for s in scores])),
            cate_cover=float(np.mean([s.cate_coverage for s in scores])),
            ate_il=float(np.mean([s.ate_il for s in scores])),
            cate_il=float(np.mean([s.cate_il for s in scores])),
            seconds=float(np.mean(secs)),
        )
    else:
        row.update({k: None for k in RESULT_COLUMNS[2:]})
    row["failures"] = failures
    return row


def run_benchmark(configs, methods=METHODS, reps: int = 20, parallelism: int = 1,
                  hp: Hyperparams | None = None, use_true_propensity: bool = False,
                  cold_iters: int = 1000, cold_burnin: int = 1000,
                  ws_iters: int = 100, base_seed: int = 0):
    """Fit every (config, method) cell over `reps` replications.

    Returns a list of result-row dicts keyed by RESULT_COLUMNS, in
    deterministic (config, method) order. Replication seeds are shared
    across methods within a config so methods see the same datasets.
    """
    if reps < 1:
        raise ValidationError("reps must be >= 1")
    if hp is None:
        hp = Hyperparams()
    ss = np.random.SeedSequence(base_seed)
    jobs = []
    for config in configs:
        config.validate()
        rep_seeds = [int(s.generate_state(1)[0] % (2 ** 31)) for s in ss.spawn(reps)]
        for method in methods:
            jobs.append((config, method, rep_seeds, hp, use_true_propensity,
                         cold_iters, cold_burnin, ws_iters))
    if parallelism > 1:
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            rows = list(pool.map(_run_cell, jobs))
    else:
        rows = [_run_cell(job) for job in jobs]
    return rows

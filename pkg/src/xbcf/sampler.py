"""The two-forest backfitting sampler and its conjugate parameter updates.

Each sweep regrows all prognostic trees, then all treatment trees; the
scale coefficients a, b0, b1 and the two group error variances are
resampled after every single tree update, so L + K times per sweep.
All bookkeeping happens on the standardized outcome scale.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .gfr import grow_from_root
from .model_core import (
    PROGNOSTIC,
    TREATMENT,
    Dataset,
    Draw,
    Forest,
    Hyperparams,
    PosteriorDraws,
    ScaleState,
    Tree,
)


@dataclass
class ResidualState:
    """Standardized outcome and the cached per-tree fitted vectors.

    The total/prognostic/treatment residuals are derived on demand so they
    can never drift from the tree fits:
        v = y - a * sum(mu fits)      (prognostic residual)
        t = y - b_z * sum(tau fits)   (treatment residual)
        r = y - a * sum(mu) - b_z * sum(tau)
    """

    y_std: np.ndarray
    z: np.ndarray
    mu_fits: np.ndarray   # (L, n) per-tree prognostic fits
    tau_fits: np.ndarray  # (K, n) per-tree treatment fits
    mu_total: np.ndarray
    tau_total: np.ndarray

    def b_vec(self, scale: ScaleState) -> np.ndarray:
        return np.where(self.z == 1, scale.b1, scale.b0)

    def prognostic_residual(self, scale: ScaleState) -> np.ndarray:
        return self.y_std - scale.a * self.mu_total

    def treatment_residual(self, scale: ScaleState) -> np.ndarray:
        return self.y_std - self.b_vec(scale) * self.tau_total

    def total_residual(self, scale: ScaleState) -> np.ndarray:
        return self.y_std - scale.a * self.mu_total - self.b_vec(scale) * self.tau_total

    def set_mu_fit(self, l: int, fit: np.ndarray) -> None:
        self.mu_total += fit - self.mu_fits[l]
        self.mu_fits[l] = fit

    def set_tau_fit(self, k: int, fit: np.ndarray) -> None:
        self.tau_total += fit - self.tau_fits[k]
        self.tau_fits[k] = fit


def _group_dot(u, v, z):
    treated = z == 1
    d1 = float(u[treated] @ v[treated])
    d0 = float(u @ v) - d1
    return d0, d1


def update_a(t_residual, mu_fit, z, variances, rng) -> float:
    """Conjugate draw of the prognostic scale a, prior N(0, 1).

    One-shot form of the two-step (control then treated) regression update.
    """
    s0, s1 = variances
    mm0, mm1 = _group_dot(mu_fit, mu_fit, z)
    tm0, tm1 = _group_dot(t_residual, mu_fit, z)
    V = 1.0 / (1.0 + mm0 / s0 + mm1 / s1)
    mean = (tm0 / s0 + tm1 / s1) * V
    return float(rng.normal(mean, np.sqrt(V)))


def update_b(v_residual, tau_fit, z, variances, rng):
    """Independent conjugate draws of the group scales b0, b1, priors N(0, 1/2)."""
    s0, s1 = variances
    tt0, tt1 = _group_dot(tau_fit, tau_fit, z)
    vt0, vt1 = _group_dot(v_residual, tau_fit, z)
    V0 = 1.0 / (2.0 + tt0 / s0)
    V1 = 1.0 / (2.0 + tt1 / s1)
    b0 = float(rng.normal(vt0 / s0 * V0, np.sqrt(V0)))
    b1 = float(rng.normal(vt1 / s1 * V1, np.sqrt(V1)))
    return b0, b1


def update_sigmas(r, z, hp: Hyperparams, rng):
    """Conjugate inverse-Gamma draws of the two group error variances."""
    out = []
    for group, kappa, s_prior in ((0, hp.kappa0, hp.s0_prior), (1, hp.kappa1, hp.s1_prior)):
        rg = r[z == group]
        shape = (rg.size + kappa) / 2.0
        rate = (float(rg @ rg) + s_prior) / 2.0
        lam = rng.gamma(shape, 1.0 / rate)
        sigma_sq = 1.0 / lam
        if not sigma_sq > 0:
            raise ValidationError("drew a non-positive error variance")
        out.append(sigma_sq)
    return out[0], out[1]


def standardize(y: np.ndarray):
    y_mean = float(np.mean(y))
    y_sd = float(np.std(y))
    if y_sd <= 0:
        raise ValidationError("outcome is constant; cannot standardize")
    return (y - y_mean) / y_sd, y_mean, y_sd


def prognostic_design(dataset: Dataset) -> np.ndarray:
    if dataset.pi_hat is None:
        raise ValidationError("fitting requires a propensity column (supplied or estimated)")
    return np.column_stack([dataset.X, dataset.pi_hat])


def fit(dataset: Dataset, hp: Hyperparams, on_param_update=None) -> PosteriorDraws:
    """Run the accelerated two-forest sampler for hp.I sweeps.

    Returns every sweep's snapshot; the first hp.burnin are flagged.
    on_param_update, if given, is called once per (a, b0, b1, sigmas) block
    for instrumentation.
    """
    dataset.validate()
    hp.validate()
    Xmu = prognostic_design(dataset)
    Xtau = dataset.X
    z = np.asarray(dataset.z, dtype=np.int64)
    y_std, y_mean, y_sd = standardize(dataset.y)
    n = y_std.size
    rng = np.random.default_rng(hp.seed)

    scale = ScaleState(a=1.0, b0=-0.5, b1=0.5, sigma0_sq=1.0, sigma1_sq=1.0,
                       y_mean=y_mean, y_sd=y_sd)
    init_mu = float(np.mean(y_std)) / hp.L
    mu_trees = [Tree.single_leaf(init_mu) for _ in range(hp.L)]
    tau_trees = [Tree.single_leaf(0.0) for _ in range(hp.K)]
    state = ResidualState(
        y_std=y_std, z=z,
        mu_fits=np.full((hp.L, n), init_mu),
        tau_fits=np.zeros((hp.K, n)),
        mu_total=np.full(n, init_mu * hp.L),
        tau_total=np.zeros(n),
    )

    def draw_scales():
        variances = (scale.sigma0_sq, scale.sigma1_sq)
        scale.a = update_a(state.treatment_residual(scale), state.mu_total, z,
                           variances, rng)
        scale.b0, scale.b1 = update_b(state.prognostic_residual(scale),
                                      state.tau_total, z, variances, rng)
        scale.sigma0_sq, scale.sigma1_sq = update_sigmas(
            state.total_residual(scale), z, hp, rng)
        if on_param_update is not None:
            on_param_update(scale)

    draws = []
    for sweep in range(hp.I):
        for l in range(hp.L):
            partial = state.total_residual(scale) + scale.a * state.mu_fits[l]
            mu_trees[l] = grow_from_root(
                partial, Xmu, z, (scale.a, scale.a),
                (scale.sigma0_sq, scale.sigma1_sq), hp.nu_mu, 0, hp, rng)
            state.set_mu_fit(l, mu_trees[l].predict(Xmu))
            draw_scales()
        for k in range(hp.K):
            partial = state.total_residual(scale) + state.b_vec(scale) * state.tau_fits[k]
            tau_trees[k] = grow_from_root(
                partial, Xtau, z, (scale.b0, scale.b1),
                (scale.sigma0_sq, scale.sigma1_sq), hp.nu_tau, 0, hp, rng)
            state.set_tau_fit(k, tau_trees[k].predict(Xtau))
            draw_scales()
        draws.append(Draw(
            prognostic=Forest([t.copy() for t in mu_trees], PROGNOSTIC),
            treatment=Forest([t.copy() for t in tau_trees], TREATMENT),
            scale=scale.copy(),
            burnin=sweep < hp.burnin,
        ))
    return PosteriorDraws(draws, hp)


@dataclass
class CateSummary:
    """Posterior CATE point estimates and intervals on the raw outcome scale."""

    point: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    ate_draws: np.ndarray
    ate_point: float
    ate_lo: float
    ate_hi: float
    level: float


def cate_draw_matrix(draws: PosteriorDraws, X_eval: np.ndarray) -> np.ndarray:
    """(kept draws, eval rows) matrix of CATE samples (b1 - b0) * tau(x) * y_sd."""
    kept = draws.kept()
    if not kept:
        raise ValidationError("no post-burn-in draws to summarize")
    X_eval = np.atleast_2d(np.asarray(X_eval, dtype=float))
    out = np.empty((len(kept), X_eval.shape[0]))
    for i, d in enumerate(kept):
        out[i] = (d.scale.b1 - d.scale.b0) * d.treatment.predict(X_eval) * d.scale.y_sd
    return out


def summarize(draws: PosteriorDraws, X_eval, pi_eval=None, level: float = 0.95) -> CateSummary:
    """Pointwise CATE and ATE summaries over the kept draws.

    pi_eval is accepted for interface symmetry with prognostic predictions
    but is not needed: the treatment forest splits only on X.
    """
    if not 0 < level < 1:
        raise ValidationError(f"credible level must be in (0,1), got {level}")
    mat = cate_draw_matrix(draws, X_eval)
    q_lo, q_hi = (1 - level) / 2, 1 - (1 - level) / 2
    ate_draws = mat.mean(axis=1)
    return CateSummary(
        point=mat.mean(axis=0),
        lo=np.quantile(mat, q_lo, axis=0),
        hi=np.quantile(mat, q_hi, axis=0),
        ate_draws=ate_draws,
        ate_point=float(ate_draws.mean()),
        ate_lo=float(np.quantile(ate_draws, q_lo)),
        ate_hi=float(np.quantile(ate_draws, q_hi)),
        level=level,
    )

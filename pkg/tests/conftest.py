"""Shared test fixtures and independent numerical oracles.

The quadrature oracle integrates the marginalized leaf likelihood on a
dense grid (Simpson's rule), entirely independently of the closed-form
implementation, so the closed forms are checked against first principles.
"""

import numpy as np
import pytest
from scipy.integrate import simpson

from xbcf import Hyperparams
from xbcf.model_core import Dataset
from xbcf.propensity import estimate_propensity
from xbcf.simulation import DGPConfig, generate


class RecordingRng:
    """Stand-in rng that records the parameters of each requested draw and
    returns the distribution's mean, so conjugate-update moments can be
    asserted exactly."""

    def __init__(self):
        self.normal_calls = []
        self.gamma_calls = []

    def normal(self, loc=0.0, scale=1.0):
        self.normal_calls.append((float(loc), float(scale)))
        return float(loc)

    def gamma(self, shape, scale=1.0):
        self.gamma_calls.append((float(shape), float(scale)))
        return float(shape * scale)  # the Gamma mean


def quadrature_leaf_oracle(resid, z, coeffs, variances, nu, n_grid=4001):
    """Brute-force moments of the leaf-mean posterior and the log marginal
    likelihood ratio against the zero-mean likelihood, via dense Simpson
    integration over the leaf mean m.

    Model: resid_i ~ N(c_{z_i} * m, sigma^2_{z_i}), m ~ N(0, nu).
    Returns (log_marginal, posterior_mean, posterior_variance) where
    log_marginal = log [ integral / prod_i N(resid_i; 0, sigma^2_{z_i}) ],
    the same data-only normalization used by the closed form.
    """
    resid = np.asarray(resid, dtype=float)
    z = np.asarray(z, dtype=float)
    c = np.where(z == 1, coeffs[1], coeffs[0])
    v = np.where(z == 1, variances[1], variances[0])
    W = float((c * c / v).sum())
    S = float((resid * c / v).sum())
    post_var_hint = 1.0 / (1.0 / nu + W)
    center = post_var_hint * S
    half = 12.0 * np.sqrt(max(post_var_hint, nu))
    m = np.linspace(center - half, center + half, n_grid)
    log_like = -0.5 * (((resid[:, None] - c[:, None] * m[None, :]) ** 2)
                       / v[:, None]).sum(axis=0)
    log_w = log_like - 0.5 * m * m / nu
    shift = log_w.max()
    w = np.exp(log_w - shift)
    z0 = simpson(w, x=m)
    mean = simpson(w * m, x=m) / z0
    second = simpson(w * m * m, x=m) / z0
    log_marginal = (np.log(z0) + shift - 0.5 * np.log(2.0 * np.pi * nu)
                    + 0.5 * float((resid * resid / v).sum()))
    return log_marginal, mean, second - mean * mean


def random_leaf_case(rng, max_n=20):
    """One random small-node test case for the conjugacy oracles."""
    n = int(rng.integers(0, max_n + 1))
    resid = rng.normal(0.0, 1.5, size=n)
    z = rng.integers(0, 2, size=n).astype(float)
    coeffs = tuple(rng.uniform(-2.0, 2.0, size=2))
    variances = tuple(rng.uniform(0.3, 3.0, size=2))
    nu = float(rng.uniform(0.05, 2.0))
    return resid, z, coeffs, variances, nu


@pytest.fixture
def small_hp():
    """Hyperparameters shrunk for fast integration tests."""
    return Hyperparams(L=5, K=3, I=6, burnin=2, seed=11)


@pytest.fixture
def small_sim():
    """A small simulated dataset with estimated propensities attached."""
    sim = generate(DGPConfig(n=120, seed=5))
    sim.dataset.pi_hat = estimate_propensity(sim.dataset.X, sim.dataset.z).pi
    return sim


def make_dataset(n=60, seed=0):
    """A generic small dataset (not from the benchmark generator)."""
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, 3))
    z = (rng.uniform(size=n) < 0.5).astype(np.int64)
    if z.sum() == 0:
        z[0] = 1
    if z.sum() == n:
        z[0] = 0
    y = X[:, 0] + 2.0 * z + rng.normal(size=n)
    return Dataset(y=y, z=z, X=X, pi_hat=np.full(n, 0.5))

"""Domain types and the shared conjugate-Gaussian math.

Both tree samplers (the grow-from-root sampler and the Metropolis-Hastings
baseline) score candidate trees with the same marginal likelihood of a leaf
mean under a N(0, nu) prior, generalized to two treatment groups with
separate error variances and separate per-group scale coefficients.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ValidationError

PROGNOSTIC = "prognostic"
TREATMENT = "treatment"


@dataclass
class Dataset:
    """Observed data: outcome y, binary treatment z, covariates X, optional propensity."""

    y: np.ndarray
    z: np.ndarray
    X: np.ndarray
    pi_hat: np.ndarray | None = None

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float)
        self.z = np.asarray(self.z)
        self.X = np.atleast_2d(np.asarray(self.X, dtype=float))
        if self.pi_hat is not None:
            self.pi_hat = np.asarray(self.pi_hat, dtype=float)

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def validate(self) -> "Dataset":
        n = self.y.shape[0]
        if self.z.shape != (n,) or self.X.shape[0] != n:
            raise ValidationError(
                f"shape mismatch: y has {n} rows, z {self.z.shape}, X {self.X.shape}"
            )
        if self.pi_hat is not None and self.pi_hat.shape != (n,):
            raise ValidationError(f"pi_hat must have length {n}, got {self.pi_hat.shape}")
        if not np.isfinite(self.y).all() or not np.isfinite(self.X).all():
            raise ValidationError("non-finite values in y or X")
        zvals = np.unique(self.z)
        if not np.isin(zvals, [0, 1]).all():
            raise ValidationError(f"treatment must be 0/1, found values {zvals}")
        if (self.z == 0).sum() == 0 or (self.z == 1).sum() == 0:
            raise ValidationError("need at least one unit in each treatment group")
        if self.pi_hat is not None:
            if not np.isfinite(self.pi_hat).all():
                raise ValidationError("non-finite values in pi_hat")
            if (self.pi_hat <= 0).any() or (self.pi_hat >= 1).any():
                raise ValidationError("pi_hat values must lie strictly in (0, 1)")
        return self


@dataclass
class Tree:
    """A binary decision tree in flat-array form; node 0 is the root.

    Internal nodes have ``var[i] >= 0`` and route by "x[var] <= cut goes
    left"; leaves have ``var[i] == -1`` and carry a scalar mean ``mu[i]``.
    """

    var: np.ndarray
    cut: np.ndarray
    left: np.ndarray
    right: np.ndarray
    mu: np.ndarray

    @classmethod
    def single_leaf(cls, mu: float = 0.0) -> "Tree":
        return cls(
            var=np.array([-1], dtype=np.int64),
            cut=np.array([np.nan]),
            left=np.array([-1], dtype=np.int64),
            right=np.array([-1], dtype=np.int64),
            mu=np.array([float(mu)]),
        )

    @property
    def n_nodes(self) -> int:
        return self.var.shape[0]

    def is_leaf(self, i: int) -> bool:
        return self.var[i] < 0

    def leaf_ids(self) -> np.ndarray:
        return np.nonzero(self.var < 0)[0]

    def depths(self) -> np.ndarray:
        out = np.zeros(self.n_nodes, dtype=np.int64)
        for i in range(self.n_nodes):
            if self.var[i] >= 0:
                out[self.left[i]] = out[i] + 1
                out[self.right[i]] = out[i] + 1
        return out

    def route(self, X: np.ndarray) -> np.ndarray:
        """Leaf node id reached by each row of X."""
        X = np.atleast_2d(X)
        if self.var.max(initial=-1) >= X.shape[1]:
            raise ValidationError(
                f"tree splits on column {self.var.max()} but input has {X.shape[1]} columns"
            )
        idx = np.zeros(X.shape[0], dtype=np.int64)
        active = np.nonzero(self.var[idx] >= 0)[0]
        while active.size:
            nodes = idx[active]
            go_left = X[active, self.var[nodes]] <= self.cut[nodes]
            idx[active] = np.where(go_left, self.left[nodes], self.right[nodes])
            active = active[self.var[idx[active]] >= 0]
        return idx

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.mu[self.route(X)]

    def copy(self) -> "Tree":
        return Tree(self.var.copy(), self.cut.copy(), self.left.copy(),
                    self.right.copy(), self.mu.copy())


def trees_equal(t1: Tree, t2: Tree) -> bool:
    return (
        t1.n_nodes == t2.n_nodes
        and np.array_equal(t1.var, t2.var)
        and np.array_equal(t1.cut, t2.cut, equal_nan=True)
        and np.array_equal(t1.left, t2.left)
        and np.array_equal(t1.right, t2.right)
        and np.array_equal(t1.mu, t2.mu)
    )


@dataclass
class Forest:
    """A sum-of-trees ensemble; its prediction is the sum of leaf means."""

    trees: list
    role: str = PROGNOSTIC

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(X)
        out = np.zeros(X.shape[0])
        for tree in self.trees:
            out += tree.predict(X)
        return out

    def copy(self) -> "Forest":
        return Forest([t.copy() for t in self.trees], self.role)


def forests_equal(f1: Forest, f2: Forest) -> bool:
    return (
        f1.role == f2.role
        and len(f1.trees) == len(f2.trees)
        and all(trees_equal(a, b) for a, b in zip(f1.trees, f2.trees))
    )


def predict_forest(forest: Forest, X_row: np.ndarray, pi=None) -> float:
    """Forest prediction at a single covariate row.

    The prognostic forest is trained on [X, pi], so pi is required there;
    the treatment forest splits only on X.
    """
    row = np.asarray(X_row, dtype=float).ravel()
    if forest.role == PROGNOSTIC:
        if pi is None:
            raise ValidationError("prognostic forest prediction requires a propensity value")
        row = np.concatenate([row, [float(pi)]])
    return float(forest.predict(row[None, :])[0])


@dataclass(frozen=True)
class GroupedSuffStats:
    """Counts and partial-residual sums for the control (0) and treated (1) groups."""

    n0: float = 0.0
    n1: float = 0.0
    s0: float = 0.0
    s1: float = 0.0

    def __add__(self, other: "GroupedSuffStats") -> "GroupedSuffStats":
        return GroupedSuffStats(self.n0 + other.n0, self.n1 + other.n1,
                                self.s0 + other.s0, self.s1 + other.s1)

    @classmethod
    def from_data(cls, resid: np.ndarray, z: np.ndarray) -> "GroupedSuffStats":
        z = np.asarray(z)
        n1 = float(z.sum())
        s1 = float(resid[z == 1].sum())
        return cls(len(resid) - n1, n1, float(resid.sum()) - s1, s1)


def _check_leaf_inputs(coeffs, variances, nu):
    c0, c1 = coeffs
    v0, v1 = variances
    if not (np.isfinite(c0) and np.isfinite(c1)):
        raise ValidationError("non-finite leaf coefficients")
    if not (v0 > 0 and v1 > 0 and nu > 0):
        raise ValidationError("variances and leaf prior variance must be positive")


def _precision_terms(n0, n1, s0, s1, coeffs, variances):
    c0, c1 = coeffs
    v0, v1 = variances
    W = n0 * c0 * c0 / v0 + n1 * c1 * c1 / v1
    S = c0 * s0 / v0 + c1 * s1 / v1
    return W, S


def leaf_log_marginal_arrays(n0, n1, s0, s1, coeffs, variances, nu):
    """Vectorized log marginal likelihood of a node's data, up to a constant
    that depends only on which rows the node holds (so it cancels between a
    parent and the union of its children)."""
    W, S = _precision_terms(n0, n1, s0, s1, coeffs, variances)
    denom = 1.0 + nu * W
    return 0.5 * (-np.log(denom) + nu * S * S / denom)


def leaf_log_marginal(stats: GroupedSuffStats, coeffs, variances, nu) -> float:
    _check_leaf_inputs(coeffs, variances, nu)
    for val in (stats.n0, stats.n1, stats.s0, stats.s1):
        if not np.isfinite(val):
            raise ValidationError("non-finite sufficient statistics")
    return float(leaf_log_marginal_arrays(stats.n0, stats.n1, stats.s0, stats.s1,
                                          coeffs, variances, nu))


def leaf_posterior(stats: GroupedSuffStats, coeffs, variances, nu):
    """Posterior (mean, variance) of a leaf mean with prior N(0, nu).

    One-shot form of the sequential control-then-treated update; the two
    agree to machine precision.
    """
    _check_leaf_inputs(coeffs, variances, nu)
    W, S = _precision_terms(stats.n0, stats.n1, stats.s0, stats.s1, coeffs, variances)
    V = 1.0 / (1.0 / nu + W)
    return V * S, V


@dataclass
class ScaleState:
    """Scale coefficients, group error variances, and y standardization constants."""

    a: float = 1.0
    b0: float = -0.5
    b1: float = 0.5
    sigma0_sq: float = 1.0
    sigma1_sq: float = 1.0
    y_mean: float = 0.0
    y_sd: float = 1.0

    def validate(self) -> "ScaleState":
        if not (self.sigma0_sq > 0 and self.sigma1_sq > 0):
            raise ValidationError("error variances must be positive")
        if not self.y_sd > 0:
            raise ValidationError("y_sd must be positive")
        return self

    def copy(self) -> "ScaleState":
        return replace(self)


@dataclass
class Hyperparams:
    """Sampler configuration; defaults follow the model's standardized scale.

    nu_mu/nu_tau default to a total prior variance budget of 0.6 for the
    prognostic forest and 0.3 for the treatment forest, split evenly across
    trees. s0_prior/s1_prior default so the prior mode of each error
    variance equals 1 (the variance of standardized y).
    """

    L: int = 30
    K: int = 10
    I: int = 40
    burnin: int = 15
    alpha: float = 0.95
    beta: float = 1.25
    nu_mu: float | None = None
    nu_tau: float | None = None
    kappa0: float = 3.0
    kappa1: float = 3.0
    s0_prior: float | None = None
    s1_prior: float | None = None
    max_cutpoints: int = 100
    min_node_size: int = 5
    max_depth: int = 20
    seed: int = 0

    def __post_init__(self):
        if min(self.L, self.K) < 1:
            raise ValidationError(f"L and K must be >= 1, got L={self.L}, K={self.K}")
        if self.nu_mu is None:
            self.nu_mu = 0.6 / self.L
        if self.nu_tau is None:
            self.nu_tau = 0.3 / self.K
        # IG(kappa/2, s/2) has mode s/(kappa+2); mode 1 needs s = kappa + 2
        if self.s0_prior is None:
            self.s0_prior = self.kappa0 + 2.0
        if self.s1_prior is None:
            self.s1_prior = self.kappa1 + 2.0

    def validate(self) -> "Hyperparams":
        if not (0.0 < self.alpha < 1.0):
            raise ValidationError(f"alpha must be in (0,1), got {self.alpha}")
        if self.beta < 0:
            raise ValidationError(f"beta must be >= 0, got {self.beta}")
        if min(self.L, self.K, self.I) < 1:
            raise ValidationError("L, K and I must all be >= 1")
        if not 0 <= self.burnin < self.I:
            raise ValidationError(f"burnin must lie in [0, I), got {self.burnin}")
        if not (self.nu_mu > 0 and self.nu_tau > 0):
            raise ValidationError("leaf prior variances must be positive")
        if self.max_cutpoints < 1 or self.min_node_size < 1 or self.max_depth < 0:
            raise ValidationError("bad stopping configuration")
        return self


@dataclass
class Draw:
    """One posterior snapshot: both forests plus the scale parameters."""

    prognostic: Forest
    treatment: Forest
    scale: ScaleState
    burnin: bool = False
    chain_id: int = 0


@dataclass
class PosteriorDraws:
    """A sequence of posterior snapshots plus the hyperparameters that produced them."""

    draws: list
    hyperparams: Hyperparams

    def kept(self) -> list:
        return [d for d in self.draws if not d.burnin]

    def __len__(self) -> int:
        return len(self.draws)

"""Grow-From-Root: recursive stochastic tree growth.

At each node a cutpoint (or the no-split option) is drawn from a
categorical distribution whose weights combine the conjugate marginal
likelihood of the induced children with the depth-dependent tree prior.
Candidate sufficient statistics are accumulated with one sort and a
cumulative-sum sweep per variable, so a node costs O(n log n + |C|)
rather than O(n * |C|).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .model_core import (
    GroupedSuffStats,
    Hyperparams,
    Tree,
    leaf_log_marginal_arrays,
    leaf_posterior,
)


@dataclass
class CutpointGrid:
    """Per-variable candidate cutpoints for one node; may be empty."""

    cutpoints: list

    @property
    def total(self) -> int:
        return sum(len(c) for c in self.cutpoints)


def _candidates_from_sorted(vals: np.ndarray, max_cutpoints: int) -> np.ndarray:
    """Candidates for one pre-sorted column: midpoints between consecutive
    distinct values, thinned to evenly spaced order statistics when the
    column has more than max_cutpoints distinct boundaries."""
    if vals.size < 2:
        return np.empty(0)
    boundaries = np.flatnonzero(vals[1:] > vals[:-1])
    if boundaries.size == 0:
        return np.empty(0)
    if boundaries.size <= max_cutpoints:
        pos = boundaries
        return (vals[pos] + vals[pos + 1]) / 2.0
    # spacing >= 1 here, so the rounded positions are already unique and the
    # midpoints strictly increasing
    pos = np.round(np.linspace(0, vals.size - 2, max_cutpoints)).astype(np.int64)
    pos = pos[vals[pos] < vals[pos + 1]]
    return (vals[pos] + vals[pos + 1]) / 2.0


def build_cutpoints(node_data: np.ndarray, max_cutpoints: int) -> CutpointGrid:
    """Candidate cutpoints per variable within one node's data.

    Every candidate splits the node nontrivially; constant columns
    contribute no candidates, so an all-constant node yields an empty grid.
    """
    node_data = np.atleast_2d(node_data)
    return CutpointGrid(
        [_candidates_from_sorted(np.sort(node_data[:, j]), max_cutpoints)
         for j in range(node_data.shape[1])]
    )


def split_weights(grid: CutpointGrid, left_stats, node_stats: GroupedSuffStats,
                  coeffs, variances, nu, depth, alpha, beta):
    """Normalized probabilities over {candidates} + {no-split}.

    left_stats is a tuple of arrays (n0, n1, s0, s1), one entry per
    candidate in grid order (variables concatenated); right-child stats
    follow by additivity. Returns (per-candidate probabilities, no-split
    probability). Log weights are max-subtracted before exponentiation.
    """
    ll_parent = float(leaf_log_marginal_arrays(
        node_stats.n0, node_stats.n1, node_stats.s0, node_stats.s1,
        coeffs, variances, nu))
    if grid.total == 0:
        return np.empty(0), 1.0
    ln0, ln1, ls0, ls1 = left_stats
    ll_cand = (
        leaf_log_marginal_arrays(ln0, ln1, ls0, ls1, coeffs, variances, nu)
        + leaf_log_marginal_arrays(node_stats.n0 - ln0, node_stats.n1 - ln1,
                                   node_stats.s0 - ls0, node_stats.s1 - ls1,
                                   coeffs, variances, nu)
    )
    prior_factor = grid.total * ((1.0 + depth) ** beta / alpha - 1.0)
    logs = np.append(ll_cand, np.log(prior_factor) + ll_parent)
    logs -= logs.max()
    w = np.exp(logs)
    w /= w.sum()
    return w[:-1], float(w[-1])


def _candidate_left_stats(node_data, resid, z, grid: CutpointGrid, sv=None, orders=None):
    """Left-child sufficient statistics for every candidate, via one sort
    plus cumulative sums per variable."""
    if orders is None:
        orders = np.argsort(node_data, axis=0, kind="stable")
        sv = np.take_along_axis(node_data, orders, axis=0)
    zs = z[orders]
    ys = resid[orders]
    cum_n1 = np.cumsum(zs, axis=0)
    cum_s = np.cumsum(ys, axis=0)
    cum_s1 = np.cumsum(ys * zs, axis=0)
    ln0, ln1, ls0, ls1 = [], [], [], []
    for j, cands in enumerate(grid.cutpoints):
        if len(cands) == 0:
            continue
        k = np.searchsorted(sv[:, j], cands, side="right")
        n1 = cum_n1[k - 1, j]
        s_all = cum_s[k - 1, j]
        s1 = cum_s1[k - 1, j]
        ln0.append(k - n1)
        ln1.append(n1)
        ls0.append(s_all - s1)
        ls1.append(s1)
    return (np.concatenate(ln0), np.concatenate(ln1),
            np.concatenate(ls0), np.concatenate(ls1))


def _grid_index(grid: CutpointGrid, flat_idx: int):
    """Map a flat candidate index back to (variable, cutpoint)."""
    for j, cands in enumerate(grid.cutpoints):
        if flat_idx < len(cands):
            return j, float(cands[flat_idx])
        flat_idx -= len(cands)
    raise IndexError(flat_idx)


class _TreeBuilder:
    def __init__(self):
        self.var, self.cut, self.left, self.right, self.mu = [], [], [], [], []

    def new_node(self) -> int:
        self.var.append(-1)
        self.cut.append(np.nan)
        self.left.append(-1)
        self.right.append(-1)
        self.mu.append(0.0)
        return len(self.var) - 1

    def finish(self) -> Tree:
        return Tree(
            var=np.asarray(self.var, dtype=np.int64),
            cut=np.asarray(self.cut, dtype=float),
            left=np.asarray(self.left, dtype=np.int64),
            right=np.asarray(self.right, dtype=np.int64),
            mu=np.asarray(self.mu, dtype=float),
        )


def sample_leaf_mu(resid, z, coeffs, variances, nu, rng) -> float:
    mean, V = leaf_posterior(GroupedSuffStats.from_data(resid, z), coeffs, variances, nu)
    return float(rng.normal(mean, np.sqrt(V)))


def grow_from_root(partial_residual, node_data, z, coeffs, variances, nu,
                   depth: int, hp: Hyperparams, rng) -> Tree:
    """Grow one tree recursively from a root node.

    Degenerate inputs (too few rows, max depth, empty grid) resolve to
    leaves whose means are drawn from the conjugate leaf posterior.
    """
    resid = np.asarray(partial_residual, dtype=float)
    node_data = np.atleast_2d(np.asarray(node_data, dtype=float))
    z = np.asarray(z, dtype=float)
    if node_data.shape[0] == 0:
        raise ValidationError("cannot grow a tree on an empty node")
    builder = _TreeBuilder()

    def grow(rows: np.ndarray, d: int) -> int:
        node = builder.new_node()
        sub_X = node_data[rows]
        sub_r = resid[rows]
        sub_z = z[rows]
        grid = None
        orders = sv = None
        if rows.size >= hp.min_node_size and d < hp.max_depth:
            orders = np.argsort(sub_X, axis=0, kind="stable")
            sv = np.take_along_axis(sub_X, orders, axis=0)
            grid = CutpointGrid([_candidates_from_sorted(sv[:, j], hp.max_cutpoints)
                                 for j in range(sub_X.shape[1])])
        if grid is None or grid.total == 0:
            builder.mu[node] = sample_leaf_mu(sub_r, sub_z, coeffs, variances, nu, rng)
            return node
        node_stats = GroupedSuffStats.from_data(sub_r, sub_z)
        left_stats = _candidate_left_stats(sub_X, sub_r, sub_z, grid, sv=sv, orders=orders)
        cand_p, nosplit_p = split_weights(grid, left_stats, node_stats, coeffs,
                                          variances, nu, d, hp.alpha, hp.beta)
        probs = np.append(cand_p, nosplit_p)
        choice = int(np.searchsorted(np.cumsum(probs), rng.random()))
        choice = min(choice, len(probs) - 1)
        if choice == len(cand_p):
            builder.mu[node] = sample_leaf_mu(sub_r, sub_z, coeffs, variances, nu, rng)
            return node
        j, cut = _grid_index(grid, choice)
        go_left = sub_X[:, j] <= cut
        builder.var[node] = j
        builder.cut[node] = cut
        builder.left[node] = grow(rows[go_left], d + 1)
        builder.right[node] = grow(rows[~go_left], d + 1)
        return node

    grow(np.arange(node_data.shape[0]), depth)
    return builder.finish()

"""Subgroup discovery: a deterministic CART fit to CATE point estimates,
plus posterior summaries of between-subgroup differences."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .model_core import PosteriorDraws, Tree
from .sampler import cate_draw_matrix


@dataclass
class SubgroupTree:
    tree: Tree
    assignments: np.ndarray      # leaf node id per unit
    leaf_ids: np.ndarray
    leaf_means: np.ndarray       # mean CATE per leaf, leaf_ids order
    leaf_shares: np.ndarray      # fraction of the sample per leaf


def _best_split(values: np.ndarray, X: np.ndarray, min_leaf: int):
    """Exact greedy search: the (variable, midpoint) pair minimizing total
    child sum of squares, both children at least min_leaf. Ties break on the
    first (variable, cutpoint) in scan order."""
    n = values.shape[0]
    best = None  # (sse, j, cut)
    total_sum = values.sum()
    for j in range(X.shape[1]):
        order = np.argsort(X[:, j], kind="stable")
        sv = X[order, j]
        vs = values[order]
        csum = np.cumsum(vs)
        csq = np.cumsum(vs * vs)
        # split after position k (1-based count on the left)
        ks = np.arange(min_leaf, n - min_leaf + 1)
        if ks.size == 0:
            continue
        valid = sv[ks - 1] < sv[ks]
        ks = ks[valid]
        if ks.size == 0:
            continue
        left_sum = csum[ks - 1]
        left_sq = csq[ks - 1]
        sse = (left_sq - left_sum ** 2 / ks) + \
              ((csq[-1] - left_sq) - (total_sum - left_sum) ** 2 / (n - ks))
        i = int(np.argmin(sse))
        cand = (float(sse[i]), j, float((sv[ks[i] - 1] + sv[ks[i]]) / 2.0))
        if best is None or cand[0] < best[0] - 1e-12:
            best = cand
    return best


def subgroup_tree(cate_points: np.ndarray, X: np.ndarray, max_depth: int = 3,
                  min_leaf: int = 10) -> SubgroupTree:
    """Greedy variance-reduction CART on CATE point estimates.

    Deterministic: exact search over midpoint cutpoints, no pruning beyond
    max_depth/min_leaf. A constant input yields a root-only tree.
    """
    cate_points = np.asarray(cate_points, dtype=float)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if cate_points.shape[0] != X.shape[0]:
        raise ValidationError("cate_points and X must have the same number of rows")

    var, cut, left, right, mu = [], [], [], [], []

    def new_node():
        var.append(-1)
        cut.append(np.nan)
        left.append(-1)
        right.append(-1)
        mu.append(0.0)
        return len(var) - 1

    def build(rows: np.ndarray, depth: int) -> int:
        node = new_node()
        vals = cate_points[rows]
        node_sse = float(((vals - vals.mean()) ** 2).sum())
        best = None
        if depth < max_depth and rows.size >= 2 * min_leaf and node_sse > 0:
            best = _best_split(vals, X[rows], min_leaf)
        if best is None or best[0] >= node_sse - 1e-12:
            mu[node] = float(vals.mean())
            return node
        _, j, c = best
        go_left = X[rows, j] <= c
        var[node] = j
        cut[node] = c
        left[node] = build(rows[go_left], depth + 1)
        right[node] = build(rows[~go_left], depth + 1)
        return node

    build(np.arange(X.shape[0]), 0)
    tree = Tree(var=np.asarray(var, dtype=np.int64), cut=np.asarray(cut),
                left=np.asarray(left, dtype=np.int64),
                right=np.asarray(right, dtype=np.int64), mu=np.asarray(mu))
    assignments = tree.route(X)
    leaf_ids = tree.leaf_ids()
    means = np.array([cate_points[assignments == i].mean() for i in leaf_ids])
    shares = np.array([(assignments == i).mean() for i in leaf_ids])
    return SubgroupTree(tree=tree, assignments=assignments, leaf_ids=leaf_ids,
                        leaf_means=means, leaf_shares=shares)


@dataclass
class SubgroupDifference:
    diff_draws: np.ndarray
    point: float
    lo: float
    hi: float
    level: float


def subgroup_posterior(draws: PosteriorDraws, X: np.ndarray, assignments: np.ndarray,
                       group_a, group_b, level: float = 0.95) -> SubgroupDifference:
    """Posterior of mean CATE in subgroup a minus mean CATE in subgroup b,
    computed draw by draw over the kept posterior snapshots."""
    assignments = np.asarray(assignments)
    in_a = assignments == group_a
    in_b = assignments == group_b
    if in_a.sum() == 0 or in_b.sum() == 0:
        raise ValidationError(f"empty subgroup: a={in_a.sum()} units, b={in_b.sum()} units")
    mat = cate_draw_matrix(draws, X)
    diff = mat[:, in_a].mean(axis=1) - mat[:, in_b].mean(axis=1)
    q = (1 - level) / 2
    return SubgroupDifference(
        diff_draws=diff,
        point=float(diff.mean()),
        lo=float(np.quantile(diff, q)),
        hi=float(np.quantile(diff, 1 - q)),
        level=level,
    )


def format_subgroup_tree(sg: SubgroupTree, feature_names=None) -> str:
    """Indented text rendering with per-leaf mean CATE and sample share."""
    t = sg.tree
    idx = {int(i): k for k, i in enumerate(sg.leaf_ids)}
    lines = []

    def name(j):
        return feature_names[j] if feature_names else f"x{j + 1}"

    def walk(node, indent):
        pad = "  " * indent
        if t.is_leaf(node):
            k = idx[node]
            lines.append(f"{pad}leaf[{node}]: mean_cate={sg.leaf_means[k]:.4f} "
                         f"share={100 * sg.leaf_shares[k]:.1f}%")
            return
        lines.append(f"{pad}{name(int(t.var[node]))} <= {t.cut[node]:.6g}")
        walk(int(t.left[node]), indent + 1)
        lines.append(f"{pad}{name(int(t.var[node]))} > {t.cut[node]:.6g}")
        walk(int(t.right[node]), indent + 1)

    walk(0, 0)
    return "\n".join(lines)

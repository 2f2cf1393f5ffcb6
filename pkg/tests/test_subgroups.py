"""Subgroup tree discovery and posterior subgroup contrasts."""

import numpy as np
import pytest

from xbcf import Hyperparams, Tree, ValidationError, subgroup_posterior, subgroup_tree
from xbcf.model_core import Draw, Forest, PosteriorDraws, ScaleState
from xbcf.subgroups import _best_split, format_subgroup_tree


# --- exact split search vs brute force ---------------------------------------------

def _brute_force_best(values, X, min_leaf):
    """Exhaustive scan over every (variable, midpoint) pair."""
    best = None
    n = len(values)
    for j in range(X.shape[1]):
        uniq = np.unique(X[:, j])
        for a, b in zip(uniq[:-1], uniq[1:]):
            cut = (a + b) / 2.0
            left = X[:, j] <= cut
            nl = int(left.sum())
            if nl < min_leaf or n - nl < min_leaf:
                continue
            vl, vr = values[left], values[~left]
            sse = float(((vl - vl.mean()) ** 2).sum() + ((vr - vr.mean()) ** 2).sum())
            if best is None or sse < best[0] - 1e-12:
                best = (sse, j, cut)
    return best


def test_split_search_matches_brute_force():
    for seed in range(10):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(40, 201))
        X = np.column_stack([
            rng.normal(size=n),
            rng.integers(0, 4, size=n).astype(float),
            rng.uniform(size=n),
        ])
        values = np.sin(X[:, 0]) + X[:, 1] + rng.normal(0, 0.5, size=n)
        got = _best_split(values, X, min_leaf=10)
        want = _brute_force_best(values, X, min_leaf=10)
        assert (got is None) == (want is None)
        if got is not None:
            assert got[0] == pytest.approx(want[0], rel=1e-9)
            # the chosen cut must induce the same (or an equally good) partition
            got_sse = _partition_sse(values, X[:, got[1]] <= got[2])
            assert got_sse == pytest.approx(want[0], rel=1e-9)


def _partition_sse(values, left):
    vl, vr = values[left], values[~left]
    return float(((vl - vl.mean()) ** 2).sum() + ((vr - vr.mean()) ** 2).sum())


# --- tree construction ----------------------------------------------------------------

def test_constant_input_yields_root_only_tree():
    X = np.random.default_rng(0).normal(size=(50, 3))
    sg = subgroup_tree(np.full(50, 1.7), X)
    assert sg.tree.n_nodes == 1
    assert sg.leaf_means[0] == pytest.approx(1.7)
    assert sg.leaf_shares[0] == 1.0


def test_step_input_yields_depth_one_split_near_zero():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(200, 3))
    cate = np.where(X[:, 0] > 0, 2.0, -1.0)
    sg = subgroup_tree(cate, X, max_depth=3, min_leaf=10)
    assert sg.tree.n_nodes == 3
    assert sg.tree.var[0] == 0
    lo, hi = np.sort([X[X[:, 0] <= 0, 0].max(), X[X[:, 0] > 0, 0].min()])
    assert lo <= sg.tree.cut[0] <= hi
    assert sorted(sg.leaf_means) == pytest.approx([-1.0, 2.0])


def test_shares_sum_to_one_and_depth_is_respected():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(300, 4))
    cate = X[:, 0] + 0.5 * X[:, 1] ** 2 + rng.normal(0, 0.1, 300)
    sg = subgroup_tree(cate, X, max_depth=3, min_leaf=10)
    assert sg.leaf_shares.sum() == pytest.approx(1.0)
    assert sg.tree.depths().max() <= 3
    counts = np.array([(sg.assignments == i).sum() for i in sg.leaf_ids])
    assert np.all(counts >= 10)


def test_subgroup_tree_validates_shapes():
    with pytest.raises(ValidationError):
        subgroup_tree(np.zeros(5), np.zeros((6, 2)))


def test_format_subgroup_tree_renders_all_leaves():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(100, 2))
    cate = np.where(X[:, 1] > 0, 1.0, 0.0)
    sg = subgroup_tree(cate, X, min_leaf=5)
    text = format_subgroup_tree(sg, ["age", "income"])
    assert text.count("leaf[") == len(sg.leaf_ids)
    assert "income" in text
    assert "share=" in text


# --- posterior contrasts ----------------------------------------------------------------

def _draws_with_split(mu_left, mu_right, n_draws=500, noise=0.05, seed=0):
    """Posterior draws whose treatment forest steps on x1 at 0."""
    rng = np.random.default_rng(seed)
    hp = Hyperparams(L=1, K=1, I=n_draws, burnin=0)
    draws = []
    for _ in range(n_draws):
        tree = Tree(
            var=np.array([0, -1, -1], dtype=np.int64),
            cut=np.array([0.0, np.nan, np.nan]),
            left=np.array([1, -1, -1], dtype=np.int64),
            right=np.array([2, -1, -1], dtype=np.int64),
            mu=np.array([0.0, mu_left + noise * rng.standard_normal(),
                         mu_right + noise * rng.standard_normal()]),
        )
        draws.append(Draw(prognostic=Forest([Tree.single_leaf(0.0)], "prognostic"),
                          treatment=Forest([tree], "treatment"),
                          scale=ScaleState(b0=0.0, b1=1.0)))
    return PosteriorDraws(draws, hp)


def test_high_minus_low_subgroup_contrast():
    # two subgroups with posterior-mean effects ~1.3 and ~-0.46: the contrast
    # concentrates near 1.3 - (-0.46) = 1.76
    rng = np.random.default_rng(4)
    X = rng.normal(size=(120, 2))
    draws = _draws_with_split(-0.46, 1.3)
    assignments = np.where(X[:, 0] <= 0.0, 1, 2)
    diff = subgroup_posterior(draws, X, assignments, group_a=2, group_b=1)
    assert diff.point == pytest.approx(1.76, abs=0.02)
    assert diff.lo < 1.76 < diff.hi


def test_identical_groups_have_zero_contrast():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(40, 2))
    draws = _draws_with_split(-0.46, 1.3)
    assignments = np.zeros(40, dtype=int)
    diff = subgroup_posterior(draws, X, assignments, group_a=0, group_b=0)
    np.testing.assert_array_equal(diff.diff_draws, 0.0)
    assert (diff.point, diff.lo, diff.hi) == (0.0, 0.0, 0.0)


def test_constant_cate_has_zero_contrast():
    rng = np.random.default_rng(6)
    X = rng.normal(size=(40, 2))
    draws = _draws_with_split(0.7, 0.7, noise=0.0)
    assignments = (X[:, 1] > 0).astype(int)
    diff = subgroup_posterior(draws, X, assignments, group_a=1, group_b=0)
    np.testing.assert_allclose(diff.diff_draws, 0.0, atol=1e-12)


def test_empty_subgroup_is_rejected():
    rng = np.random.default_rng(7)
    X = rng.normal(size=(10, 2))
    draws = _draws_with_split(0.0, 1.0)
    with pytest.raises(ValidationError):
        subgroup_posterior(draws, X, np.zeros(10, dtype=int), group_a=0, group_b=9)

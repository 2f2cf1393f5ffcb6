"""Random-walk Metropolis-Hastings baseline sampler and warm-start orchestration.

The MH sampler proposes GROW or PRUNE with probability 1/2 each, accepts by
the standard ratio of tree prior, proposal densities and the conjugate
marginal likelihood, then redraws all leaf means of the (possibly new) tree
from their conjugate posteriors. Warm start spawns one short chain per
post-burn-in snapshot of the grow-from-root sampler and pools the draws.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .errors import ValidationError
from .gfr import build_cutpoints, _grid_index
from .model_core import (
    PROGNOSTIC,
    TREATMENT,
    Dataset,
    Draw,
    Forest,
    GroupedSuffStats,
    Hyperparams,
    PosteriorDraws,
    ScaleState,
    Tree,
    leaf_log_marginal_arrays,
)
from .sampler import prognostic_design, standardize, update_a, update_b, update_sigmas
from . import sampler as _sampler


def _split_prob(depth, alpha, beta):
    return alpha * (1.0 + depth) ** (-beta)


def _grow_applied(tree: Tree, leaf: int, var: int, cut: float) -> Tree:
    n = tree.n_nodes
    out = Tree(
        var=np.append(tree.var, [-1, -1]),
        cut=np.append(tree.cut, [np.nan, np.nan]),
        left=np.append(tree.left, [-1, -1]),
        right=np.append(tree.right, [-1, -1]),
        mu=np.append(tree.mu, [0.0, 0.0]),
    )
    out.var[leaf] = var
    out.cut[leaf] = cut
    out.left[leaf] = n
    out.right[leaf] = n + 1
    return out


def _prune_applied(tree: Tree, node: int):
    """Collapse `node` (whose children are both leaves) into a leaf, and
    rebuild the tree compactly in preorder. Returns (tree, old->new id map);
    the dropped children map to the new leaf's id."""
    idmap = np.full(tree.n_nodes, -1, dtype=np.int64)
    var, cut, left, right, mu = [], [], [], [], []

    def visit(old: int) -> int:
        new = len(var)
        idmap[old] = new
        if old == node or tree.is_leaf(old):
            var.append(-1)
            cut.append(np.nan)
            left.append(-1)
            right.append(-1)
            mu.append(tree.mu[old])
            return new
        var.append(int(tree.var[old]))
        cut.append(float(tree.cut[old]))
        left.append(-1)
        right.append(-1)
        mu.append(0.0)
        left[new] = visit(int(tree.left[old]))
        right[new] = visit(int(tree.right[old]))
        return new

    visit(0)
    idmap[tree.left[node]] = idmap[node]
    idmap[tree.right[node]] = idmap[node]
    out = Tree(
        var=np.asarray(var, dtype=np.int64),
        cut=np.asarray(cut, dtype=float),
        left=np.asarray(left, dtype=np.int64),
        right=np.asarray(right, dtype=np.int64),
        mu=np.asarray(mu, dtype=float),
    )
    return out, idmap


def _prunable_count(tree: Tree) -> int:
    internal = np.nonzero(tree.var >= 0)[0]
    return int(sum(tree.is_leaf(int(tree.left[i])) and tree.is_leaf(int(tree.right[i]))
                   for i in internal))


def _redraw_leaves(tree: Tree, assign, resid, z, coeffs, variances, nu, rng) -> None:
    leaves = tree.leaf_ids()
    slot = np.full(tree.n_nodes, -1, dtype=np.int64)
    slot[leaves] = np.arange(leaves.size)
    slots = slot[assign]
    m = leaves.size
    n_all = np.bincount(slots, minlength=m).astype(float)
    n1 = np.bincount(slots, weights=z, minlength=m)
    s_all = np.bincount(slots, weights=resid, minlength=m)
    s1 = np.bincount(slots, weights=resid * z, minlength=m)
    c0, c1 = coeffs
    v0, v1 = variances
    W = (n_all - n1) * c0 * c0 / v0 + n1 * c1 * c1 / v1
    S = c0 * (s_all - s1) / v0 + c1 * s1 / v1
    V = 1.0 / (1.0 / nu + W)
    tree.mu[leaves] = rng.normal(V * S, np.sqrt(V))


def _stats_tuple(resid, z):
    n1 = float(z.sum())
    s1 = float((resid * z).sum())
    return resid.size - n1, n1, float(resid.sum()) - s1, s1


def _ll(stats, coeffs, variances, nu) -> float:
    n0, n1, s0, s1 = stats
    return float(leaf_log_marginal_arrays(n0, n1, s0, s1, coeffs, variances, nu))


def _split_ll_gain(resid_sub, z_sub, left_mask, coeffs, variances, nu) -> float:
    """ll(left) + ll(right) - ll(node) for one candidate split of a node."""
    node = _stats_tuple(resid_sub, z_sub)
    left = _stats_tuple(resid_sub[left_mask], z_sub[left_mask])
    right = tuple(a - b for a, b in zip(node, left))
    return (_ll(left, coeffs, variances, nu)
            + _ll(right, coeffs, variances, nu)
            - _ll(node, coeffs, variances, nu))


def _mh_step_impl(tree, assign, resid, X, z, coeffs, variances, nu, hp, rng):
    """One GROW/PRUNE proposal plus a full leaf-mean redraw.

    assign maps each training row to its leaf node id and is maintained
    incrementally. Impossible proposals count as automatic rejects of that
    move type.
    """
    depths = tree.depths()
    leaves = tree.leaf_ids()
    grow = rng.random() < 0.5
    if grow:
        leaf = int(leaves[rng.integers(leaves.size)])
        rows = np.flatnonzero(assign == leaf)
        if depths[leaf] < hp.max_depth:
            X_sub = X[rows]
            grid = build_cutpoints(X_sub, hp.max_cutpoints)
            if grid.total > 0:
                j, cut = _grid_index(grid, int(rng.integers(grid.total)))
                left_mask = X_sub[:, j] <= cut
                ll_gain = _split_ll_gain(resid[rows], z[rows], left_mask,
                                         coeffs, variances, nu)
                d = depths[leaf]
                p_d = _split_prob(d, hp.alpha, hp.beta)
                p_child = _split_prob(d + 1, hp.alpha, hp.beta)
                log_prior = np.log(p_d) + 2 * np.log1p(-p_child) - np.log1p(-p_d)
                proposed = _grow_applied(tree, leaf, j, cut)
                log_prop = np.log(leaves.size * grid.total / _prunable_count(proposed))
                log_acc = log_prior + ll_gain + log_prop
                if np.log(rng.random()) < min(0.0, log_acc):
                    tree = proposed
                    assign = assign.copy()
                    assign[rows[left_mask]] = tree.left[leaf]
                    assign[rows[~left_mask]] = tree.right[leaf]
    else:
        internal = np.nonzero(tree.var >= 0)[0]
        prunable = [int(i) for i in internal
                    if tree.is_leaf(int(tree.left[i])) and tree.is_leaf(int(tree.right[i]))]
        if prunable:
            node = prunable[int(rng.integers(len(prunable)))]
            rows = np.flatnonzero((assign == tree.left[node]) | (assign == tree.right[node]))
            grid = build_cutpoints(X[rows], hp.max_cutpoints)
            left_mask = assign[rows] == tree.left[node]
            ll_gain = _split_ll_gain(resid[rows], z[rows], left_mask,
                                     coeffs, variances, nu)
            d = depths[node]
            p_d = _split_prob(d, hp.alpha, hp.beta)
            p_child = _split_prob(d + 1, hp.alpha, hp.beta)
            log_prior = np.log(p_d) + 2 * np.log1p(-p_child) - np.log1p(-p_d)
            n_leaves_after = leaves.size - 1
            log_prop = np.log(len(prunable) / (n_leaves_after * grid.total))
            log_acc = -log_prior - ll_gain + log_prop
            if np.log(rng.random()) < min(0.0, log_acc):
                tree, idmap = _prune_applied(tree, node)
                assign = idmap[assign]
    _redraw_leaves(tree, assign, resid, z, coeffs, variances, nu, rng)
    return tree, assign


def mh_step(tree: Tree, partial_residual, X, z, coeffs, variances, nu,
            hp: Hyperparams, rng) -> Tree:
    """One Metropolis-Hastings step on a single tree; returns the new tree."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    resid = np.asarray(partial_residual, dtype=float)
    z = np.asarray(z, dtype=float)
    assign = tree.route(X)
    new_tree, _ = _mh_step_impl(tree.copy(), assign, resid, X, z, coeffs,
                                variances, nu, hp, rng)
    return new_tree


def _init_snapshot(init, hp: Hyperparams):
    prognostic, treatment, scale = init
    if len(prognostic.trees) != hp.L or len(treatment.trees) != hp.K:
        raise ValidationError(
            f"init forests have ({len(prognostic.trees)}, {len(treatment.trees)}) trees, "
            f"hyperparams expect ({hp.L}, {hp.K})")
    scale.validate()
    return prognostic.copy(), treatment.copy(), scale.copy()


def bcf_fit(dataset: Dataset, hp: Hyperparams, iters: int, burnin: int = 0,
            init=None, rng=None, chain_id: int = 0) -> PosteriorDraws:
    """Gibbs scans of per-tree MH steps over both forests.

    init, if given, is a (prognostic Forest, treatment Forest, ScaleState)
    triple to start from; a cold start uses root-only trees. With iters=0
    the init snapshot is returned unchanged.
    """
    dataset.validate()
    hp.validate()
    if rng is None:
        rng = np.random.default_rng(hp.seed)
    Xmu = prognostic_design(dataset)
    Xtau = dataset.X
    z = np.asarray(dataset.z, dtype=np.int64)
    zf = z.astype(float)
    y_std, y_mean, y_sd = standardize(dataset.y)
    n = y_std.size

    if init is not None:
        mu_forest, tau_forest, scale = _init_snapshot(init, hp)
        mu_trees, tau_trees = mu_forest.trees, tau_forest.trees
    else:
        init_mu = float(np.mean(y_std)) / hp.L
        mu_trees = [Tree.single_leaf(init_mu) for _ in range(hp.L)]
        tau_trees = [Tree.single_leaf(0.0) for _ in range(hp.K)]
        scale = ScaleState(y_mean=y_mean, y_sd=y_sd)

    if iters == 0:
        if init is None:
            raise ValidationError("iters=0 requires an initial state")
        snap = Draw(Forest([t.copy() for t in mu_trees], PROGNOSTIC),
                    Forest([t.copy() for t in tau_trees], TREATMENT),
                    scale.copy(), burnin=False, chain_id=chain_id)
        return PosteriorDraws([snap], hp)

    state = _sampler.ResidualState(
        y_std=y_std, z=z,
        mu_fits=np.stack([t.predict(Xmu) for t in mu_trees]),
        tau_fits=np.stack([t.predict(Xtau) for t in tau_trees]),
        mu_total=np.zeros(n), tau_total=np.zeros(n),
    )
    state.mu_total = state.mu_fits.sum(axis=0)
    state.tau_total = state.tau_fits.sum(axis=0)
    mu_assign = [t.route(Xmu) for t in mu_trees]
    tau_assign = [t.route(Xtau) for t in tau_trees]

    def draw_scales():
        variances = (scale.sigma0_sq, scale.sigma1_sq)
        scale.a = update_a(state.treatment_residual(scale), state.mu_total, z, variances, rng)
        scale.b0, scale.b1 = update_b(state.prognostic_residual(scale),
                                      state.tau_total, z, variances, rng)
        scale.sigma0_sq, scale.sigma1_sq = update_sigmas(state.total_residual(scale), z, hp, rng)

    draws = []
    for it in range(iters):
        for l in range(hp.L):
            partial = state.total_residual(scale) + scale.a * state.mu_fits[l]
            mu_trees[l], mu_assign[l] = _mh_step_impl(
                mu_trees[l], mu_assign[l], partial, Xmu, zf,
                (scale.a, scale.a), (scale.sigma0_sq, scale.sigma1_sq),
                hp.nu_mu, hp, rng)
            state.set_mu_fit(l, mu_trees[l].mu[mu_assign[l]])
        draw_scales()
        for k in range(hp.K):
            partial = state.total_residual(scale) + state.b_vec(scale) * state.tau_fits[k]
            tau_trees[k], tau_assign[k] = _mh_step_impl(
                tau_trees[k], tau_assign[k], partial, Xtau, zf,
                (scale.b0, scale.b1), (scale.sigma0_sq, scale.sigma1_sq),
                hp.nu_tau, hp, rng)
            state.set_tau_fit(k, tau_trees[k].mu[tau_assign[k]])
        draw_scales()
        draws.append(Draw(
            prognostic=Forest([t.copy() for t in mu_trees], PROGNOSTIC),
            treatment=Forest([t.copy() for t in tau_trees], TREATMENT),
            scale=scale.copy(),
            burnin=it < burnin,
            chain_id=chain_id,
        ))
    return PosteriorDraws(draws, hp)


def _run_warm_chain(args):
    dataset, hp, snap, iters, seed_seq, chain_id = args
    rng = np.random.default_rng(seed_seq)
    return bcf_fit(dataset, hp, iters, burnin=0,
                   init=(snap.prognostic, snap.treatment, snap.scale),
                   rng=rng, chain_id=chain_id)


def warm_start(dataset: Dataset, hp: Hyperparams, xbcf_draws: PosteriorDraws,
               iters_per_chain: int = 100, seed=None, max_chains=None,
               n_jobs: int = 1) -> PosteriorDraws:
    """One MH chain per post-burn-in grow-from-root snapshot, pooled.

    Chains run with independent spawned rng streams and no extra burn-in.
    With iters_per_chain=0 each chain contributes its initializing snapshot
    unchanged.
    """
    kept = xbcf_draws.kept()
    if not kept:
        raise ValidationError("warm start needs at least one post-burn-in snapshot")
    if max_chains is not None:
        kept = kept[:max_chains]
    ss = np.random.SeedSequence(hp.seed if seed is None else seed)
    children = ss.spawn(len(kept))
    jobs = [(dataset, hp, snap, iters_per_chain, cs, i)
            for i, (snap, cs) in enumerate(zip(kept, children))]
    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            chains = list(pool.map(_run_warm_chain, jobs))
    else:
        chains = [_run_warm_chain(job) for job in jobs]
    pooled = [d for chain in chains for d in chain.draws]
    return PosteriorDraws(pooled, hp)

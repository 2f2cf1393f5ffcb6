"""Core conjugate-Gaussian math, trees, forests, and validation."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from xbcf import (
    Dataset,
    GroupedSuffStats,
    Hyperparams,
    ScaleState,
    Tree,
    ValidationError,
    leaf_log_marginal,
    leaf_posterior,
    predict_forest,
)
from xbcf.model_core import Forest, PROGNOSTIC, TREATMENT, leaf_log_marginal_arrays

from conftest import quadrature_leaf_oracle, random_leaf_case


# --- leaf log marginal: pinned examples --------------------------------------

def test_empty_node_marginal_is_zero():
    stats = GroupedSuffStats()
    assert leaf_log_marginal(stats, (1.0, 1.0), (1.0, 1.0), 1.0) == 0.0
    assert leaf_log_marginal(stats, (-2.0, 0.5), (0.3, 4.0), 1.0) == 0.0


def test_single_control_zero_residual_marginal():
    stats = GroupedSuffStats(n0=1, n1=0, s0=0.0, s1=0.0)
    got = leaf_log_marginal(stats, (1.0, 1.0), (1.0, 1.0), 1.0)
    assert got == pytest.approx(0.5 * np.log(0.5), rel=1e-12)
    assert got == pytest.approx(-0.34657359, abs=1e-7)


def test_two_group_marginal_example():
    stats = GroupedSuffStats(n0=1, n1=1, s0=2.0, s1=2.0)
    got = leaf_log_marginal(stats, (1.0, 1.0), (1.0, 1.0), 1.0)
    expected = 0.5 * (np.log(1.0 / 3.0) + 16.0 / 3.0)
    assert got == pytest.approx(expected, rel=1e-12)
    assert got == pytest.approx(2.1174, abs=1e-4)


def test_marginal_rejects_bad_inputs():
    stats = GroupedSuffStats(n0=1, n1=1, s0=1.0, s1=1.0)
    with pytest.raises(ValidationError):
        leaf_log_marginal(stats, (1.0, np.nan), (1.0, 1.0), 1.0)
    with pytest.raises(ValidationError):
        leaf_log_marginal(stats, (1.0, 1.0), (0.0, 1.0), 1.0)
    with pytest.raises(ValidationError):
        leaf_log_marginal(stats, (1.0, 1.0), (1.0, 1.0), -0.5)
    with pytest.raises(ValidationError):
        leaf_log_marginal(GroupedSuffStats(n0=1, s0=np.inf), (1, 1), (1, 1), 1.0)


# --- leaf log marginal: quadrature oracle ------------------------------------

def test_marginal_matches_quadrature_oracle():
    rng = np.random.default_rng(101)
    for _ in range(60):
        resid, z, coeffs, variances, nu = random_leaf_case(rng)
        oracle_lm, _, _ = quadrature_leaf_oracle(resid, z, coeffs, variances, nu)
        got = leaf_log_marginal(GroupedSuffStats.from_data(resid, z),
                                coeffs, variances, nu)
        assert np.exp(got) == pytest.approx(np.exp(oracle_lm), rel=1e-6)


def test_posterior_matches_quadrature_oracle():
    rng = np.random.default_rng(202)
    for _ in range(60):
        resid, z, coeffs, variances, nu = random_leaf_case(rng)
        _, oracle_mean, oracle_var = quadrature_leaf_oracle(
            resid, z, coeffs, variances, nu)
        mean, var = leaf_posterior(GroupedSuffStats.from_data(resid, z),
                                   coeffs, variances, nu)
        assert mean == pytest.approx(oracle_mean, rel=1e-6, abs=1e-9)
        assert var == pytest.approx(oracle_var, rel=1e-6)


# --- leaf posterior: pinned examples ------------------------------------------

def test_posterior_empty_equals_prior():
    mean, var = leaf_posterior(GroupedSuffStats(), (1.0, 1.0), (1.0, 1.0), 0.25)
    assert (mean, var) == (0.0, 0.25)


def test_posterior_single_control_example():
    stats = GroupedSuffStats(n0=1, n1=0, s0=2.0, s1=0.0)
    mean, var = leaf_posterior(stats, (1.0, 1.0), (1.0, 1.0), 1.0)
    assert var == pytest.approx(0.5, rel=1e-14)
    assert mean == pytest.approx(1.0, rel=1e-14)


def test_posterior_two_group_weighted_example():
    stats = GroupedSuffStats(n0=2, n1=2, s0=2.0, s1=4.0)
    mean, var = leaf_posterior(stats, (1.0, 2.0), (1.0, 4.0), 1.0)
    assert var == pytest.approx(0.2, rel=1e-14)
    assert mean == pytest.approx(0.8, rel=1e-14)


def _sequential_posterior(stats, coeffs, variances, nu):
    """Two-step update: fold in the control group, then the treated group."""
    c0, c1 = coeffs
    v0, v1 = variances
    var_0 = 1.0 / (1.0 / nu + stats.n0 * c0 * c0 / v0)
    mean_0 = var_0 * c0 * stats.s0 / v0
    var_n = 1.0 / (1.0 / var_0 + stats.n1 * c1 * c1 / v1)
    mean_n = var_n * (mean_0 / var_0 + c1 * stats.s1 / v1)
    return mean_n, var_n


def test_sequential_and_one_shot_posteriors_agree():
    rng = np.random.default_rng(303)
    for _ in range(500):
        resid, z, coeffs, variances, nu = random_leaf_case(rng)
        stats = GroupedSuffStats.from_data(resid, z)
        one = leaf_posterior(stats, coeffs, variances, nu)
        two = _sequential_posterior(stats, coeffs, variances, nu)
        assert one[0] == pytest.approx(two[0], rel=1e-12, abs=1e-15)
        assert one[1] == pytest.approx(two[1], rel=1e-12)


# --- homoskedastic reduction ---------------------------------------------------

def _single_variance_bracket(n, s, sigma_sq, nu):
    """The split criterion's per-node term in the single-variance case."""
    return 0.5 * (np.log(sigma_sq / (sigma_sq + nu * n))
                  + nu * s * s / (sigma_sq * (sigma_sq + nu * n)))


def test_homoskedastic_reduction_identity():
    rng = np.random.default_rng(404)
    n = rng.integers(0, 50, size=10_000).astype(float)
    n1 = np.floor(n * rng.uniform(size=10_000))
    s = rng.normal(0.0, 5.0, size=10_000)
    s1 = s * rng.uniform(size=10_000)
    sigma_sq = rng.uniform(0.2, 4.0, size=10_000)
    nu = rng.uniform(0.05, 2.0, size=10_000)
    got = np.array([
        leaf_log_marginal(GroupedSuffStats(n[i] - n1[i], n1[i], s[i] - s1[i], s1[i]),
                          (1.0, 1.0), (sigma_sq[i], sigma_sq[i]), nu[i])
        for i in range(10_000)
    ])
    want = _single_variance_bracket(n, s, sigma_sq, nu)
    np.testing.assert_allclose(got, want, rtol=1e-12, atol=1e-14)


# --- sufficient statistics ------------------------------------------------------

@given(
    st.lists(st.tuples(st.floats(-50, 50), st.integers(0, 1)), min_size=0, max_size=40),
    st.data(),
)
@settings(max_examples=200, deadline=None)
def test_suffstat_additivity(rows, data):
    resid = np.array([r for r, _ in rows], dtype=float)
    z = np.array([g for _, g in rows], dtype=float)
    k = data.draw(st.integers(0, len(rows)))
    parent = GroupedSuffStats.from_data(resid, z)
    left = GroupedSuffStats.from_data(resid[:k], z[:k])
    right = GroupedSuffStats.from_data(resid[k:], z[k:])
    combined = left + right
    assert combined.n0 == parent.n0 and combined.n1 == parent.n1
    assert combined.s0 == pytest.approx(parent.s0, rel=1e-12, abs=1e-9)
    assert combined.s1 == pytest.approx(parent.s1, rel=1e-12, abs=1e-9)


def test_from_data_counts_and_sums():
    stats = GroupedSuffStats.from_data(np.array([1.0, 2.0, 3.0, 4.0]),
                                       np.array([0, 1, 1, 0]))
    assert (stats.n0, stats.n1) == (2.0, 2.0)
    assert (stats.s0, stats.s1) == (5.0, 5.0)


def test_marginal_arrays_vectorizes():
    n0 = np.array([0.0, 1.0, 3.0])
    n1 = np.array([0.0, 0.0, 2.0])
    s0 = np.array([0.0, 0.0, 1.5])
    s1 = np.array([0.0, 0.0, -2.0])
    got = leaf_log_marginal_arrays(n0, n1, s0, s1, (1.0, 1.0), (1.0, 1.0), 1.0)
    want = [leaf_log_marginal(GroupedSuffStats(n0[i], n1[i], s0[i], s1[i]),
                              (1.0, 1.0), (1.0, 1.0), 1.0) for i in range(3)]
    np.testing.assert_allclose(got, want, rtol=1e-14)


# --- trees and forests -----------------------------------------------------------

def _two_leaf_tree(var=0, cut=0.0, mu_left=-1.0, mu_right=1.0):
    return Tree(
        var=np.array([var, -1, -1], dtype=np.int64),
        cut=np.array([cut, np.nan, np.nan]),
        left=np.array([1, -1, -1], dtype=np.int64),
        right=np.array([2, -1, -1], dtype=np.int64),
        mu=np.array([0.0, mu_left, mu_right]),
    )


def test_single_leaf_prediction():
    forest = Forest([Tree.single_leaf(1.5)], TREATMENT)
    assert predict_forest(forest, np.array([0.3, -2.0])) == 1.5


def test_forest_prediction_is_additive():
    forest = Forest([Tree.single_leaf(1.0), Tree.single_leaf(-0.25)], TREATMENT)
    assert predict_forest(forest, np.array([9.9])) == 0.75


def test_routing_and_depths():
    t = _two_leaf_tree(var=1, cut=0.5)
    X = np.array([[0.0, 0.2], [0.0, 0.7], [5.0, 0.5]])
    np.testing.assert_array_equal(t.route(X), [1, 2, 1])
    np.testing.assert_array_equal(t.predict(X), [-1.0, 1.0, -1.0])
    np.testing.assert_array_equal(t.depths(), [0, 1, 1])
    np.testing.assert_array_equal(t.leaf_ids(), [1, 2])


def test_route_rejects_narrow_input():
    t = _two_leaf_tree(var=3)
    with pytest.raises(ValidationError):
        t.route(np.zeros((2, 2)))


def test_prognostic_forest_requires_propensity():
    # the prognostic forest's last input column is the propensity score
    t = _two_leaf_tree(var=1, cut=0.5)
    forest = Forest([t], PROGNOSTIC)
    with pytest.raises(ValidationError):
        predict_forest(forest, np.array([0.0]))
    assert predict_forest(forest, np.array([0.0]), pi=0.2) == -1.0
    assert predict_forest(forest, np.array([0.0]), pi=0.8) == 1.0


# --- dataset and config validation ------------------------------------------------

def test_dataset_validation_errors():
    good = dict(y=np.zeros(4), z=np.array([0, 1, 0, 1]), X=np.zeros((4, 2)))
    Dataset(**good).validate()
    with pytest.raises(ValidationError):
        Dataset(y=np.zeros(3), z=np.array([0, 1, 0, 1]), X=np.zeros((4, 2))).validate()
    with pytest.raises(ValidationError):
        Dataset(y=np.zeros(4), z=np.array([0, 1, 0, 2]), X=np.zeros((4, 2))).validate()
    with pytest.raises(ValidationError):
        Dataset(y=np.zeros(4), z=np.zeros(4, dtype=int), X=np.zeros((4, 2))).validate()
    bad_y = dict(good, y=np.array([0.0, np.nan, 0.0, 0.0]))
    with pytest.raises(ValidationError):
        Dataset(**bad_y).validate()
    with pytest.raises(ValidationError):
        Dataset(**good, pi_hat=np.array([0.5, 0.5, 0.0, 0.5])).validate()


def test_hyperparam_defaults_and_validation():
    hp = Hyperparams()
    assert hp.nu_mu == pytest.approx(0.6 / 30)
    assert hp.nu_tau == pytest.approx(0.3 / 10)
    assert hp.s0_prior == 5.0 and hp.s1_prior == 5.0
    hp.validate()
    with pytest.raises(ValidationError):
        Hyperparams(alpha=1.5).validate()
    with pytest.raises(ValidationError):
        Hyperparams(burnin=40, I=40).validate()
    with pytest.raises(ValidationError):
        Hyperparams(L=0)


def test_scale_state_validation():
    ScaleState().validate()
    with pytest.raises(ValidationError):
        ScaleState(sigma0_sq=0.0).validate()
    with pytest.raises(ValidationError):
        ScaleState(y_sd=0.0).validate()

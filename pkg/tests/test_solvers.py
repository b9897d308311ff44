from __future__ import annotations

import itertools

import numpy as np
import pytest

from ordinal_aa import solvers
from ordinal_aa.core import OrdinalMatrix
from ordinal_aa.exceptions import ConfigurationError, FitFailureError
from ordinal_aa.solvers import FitConfig, apply_level_scores, gmm_level_scores, initialize
from ordinal_aa.synthetic import SynthConfig, generate


@pytest.fixture(scope="module")
def small():
    return generate(SynthConfig(N=60, M=6, seed=3)).X


def quick(K=2, **kw):
    base = dict(K=K, max_epochs=150, restarts=2, seed=0)
    base.update(kw)
    return FitConfig(**base)


def test_config_validation():
    with pytest.raises(ConfigurationError):
        FitConfig(K=0)
    with pytest.raises(ConfigurationError):
        FitConfig(K=2, restarts=0)
    with pytest.raises(ConfigurationError):
        FitConfig(K=2, learning_rate=-1.0)
    assert FitConfig(K=1).lr_for("AA") == 0.1
    assert FitConfig(K=1).lr_for("RBOAA") == 0.01
    assert FitConfig(K=1, learning_rate=0.3).lr_for("OAA") == 0.3


def test_unknown_method():
    with pytest.raises(ConfigurationError):
        solvers.fit("pca", OrdinalMatrix.from_array([[1, 2]]), quick(K=1))


@pytest.mark.parametrize("method", solvers.METHODS)
def test_k_larger_than_n_is_rejected(method):
    X = OrdinalMatrix.from_array([[1, 2], [2, 1]])
    with pytest.raises(ConfigurationError):
        solvers.fit(method, X, quick(K=3))


def test_initialize_deterministic_and_equidistant(small):
    cfg = quick(K=3, seed=42)
    a = initialize("RBOAA", small, cfg)
    b = initialize("RBOAA", small, cfg)
    for key in a:
        np.testing.assert_array_equal(a[key], b[key])
    assert a["b"].shape == (small.n_respondents, small.p)
    np.testing.assert_array_equal(a["b"], 1.0)
    for key in ("C", "S"):
        e = np.exp(a[key])
        np.testing.assert_allclose(e.sum(axis=0), 1.0, atol=1e-12)
    assert initialize("AA", small, cfg).keys() == {"C", "S"}
    assert initialize("OAA", small, cfg)["sigma"].shape == (1,)


@pytest.mark.parametrize("method", solvers.METHODS)
def test_fit_is_bit_reproducible(method, small):
    a = solvers.fit(method, small, quick())
    b = solvers.fit(method, small, quick())
    assert a == b
    np.testing.assert_array_equal(a.S.free, b.S.free)


@pytest.mark.parametrize("method", solvers.METHODS)
def test_restart_dominance_and_simplex(method, small):
    model = solvers.fit(method, small, quick(restarts=3))
    assert len(model.restarts) == 3
    assert all(model.final_loss <= r.final_loss for r in model.restarts)
    for factor in (model.C, model.S):
        np.testing.assert_allclose(factor.constrained.sum(axis=0), 1.0, atol=1e-12)
        assert np.all(factor.constrained >= 0)
    # the returned loss is the loss of the returned parameters
    assert model.recompute_loss(small) == pytest.approx(model.final_loss, rel=1e-12, abs=1e-9)
    assert model.final_loss <= model.loss_trace[0]


def test_restart_selection_is_order_independent(small):
    serial = solvers.fit("AA", small, quick(restarts=3, n_jobs=1))
    parallel = solvers.fit("AA", small, quick(restarts=3, n_jobs=2))
    assert serial == parallel


def test_more_epochs_never_hurt(small):
    losses = [solvers.fit("OAA", small, quick(max_epochs=e, restarts=1)).final_loss for e in (20, 80, 200)]
    assert losses[0] >= losses[1] >= losses[2]


def test_aa_k_equals_n_reproduces_data():
    X = OrdinalMatrix.from_array([[1, 4, 2], [3, 1, 5]], p=5)
    model = solvers.fit_aa(X, FitConfig(K=3, max_epochs=3000, restarts=3, early_stop_rel_tol=0.0))
    R = model.reconstruction(X)
    assert np.sqrt(np.mean((R - X.as_float()) ** 2)) < 0.05


def test_aa_k1_bracketed_by_direct_bounds():
    X = OrdinalMatrix.from_array([[1, 4, 2], [3, 1, 5]], p=5)
    Xf = X.as_float()
    model = solvers.fit_aa(X, FitConfig(K=1, max_epochs=2000, restarts=2))
    # the unconstrained rank-1 optimum is the column mean: a lower bound
    lower = float(np.sum((Xf - Xf.mean(axis=1, keepdims=True)) ** 2))
    # brute force over a coarse simplex grid for the archetype: an upper bound
    upper = np.inf
    grid = np.linspace(0, 1, 101)
    for a, b in itertools.product(grid, grid):
        if a + b <= 1:
            arch = Xf @ np.array([a, b, 1 - a - b])
            upper = min(upper, float(np.sum((Xf - arch[:, None]) ** 2)))
    assert lower - 1e-9 <= model.final_loss <= upper + 1e-6
    np.testing.assert_allclose(model.S.constrained, 1.0)


def test_aa_loss_trace_descends(small):
    model = solvers.fit_aa(small, quick(max_epochs=400, restarts=1))
    trace = model.loss_trace
    assert trace[-1] < trace[0]
    # monotone up to small oscillations once past the first steps
    assert np.all(np.diff(np.minimum.accumulate(trace[10:])) <= 0)


def test_oaa_on_separable_binary_data_beats_chance():
    X = OrdinalMatrix.from_array(np.array([[1] * 10 + [2] * 10, [2] * 10 + [1] * 10]), p=2)
    model = solvers.fit_oaa(X, FitConfig(K=2, max_epochs=800, restarts=2))
    assert model.final_loss / X.mask.sum() <= np.log(2)


def test_warm_start_does_not_raise_ordinal_loss(small):
    model = solvers.fit_oaa(small, quick(restarts=1))
    assert model.final_loss <= model.loss_trace[0]


def test_rboaa_single_respondent_runs():
    X = OrdinalMatrix.from_array([[1], [3], [5], [2]], p=5)
    rb = solvers.fit_rboaa(X, FitConfig(K=1, max_epochs=300, restarts=1))
    oa = solvers.fit_oaa(X, FitConfig(K=1, max_epochs=300, restarts=1))
    assert rb.boundary.beta.shape == (1, 6)
    # with one subject both models have the same parameterization
    assert set(rb.params()) == set(oa.params())
    assert np.isfinite(rb.final_loss)


def test_tsaa_conversion_is_monotone_and_reproducible(small):
    table = gmm_level_scores(small, np.random.default_rng(5))
    again = gmm_level_scores(small, np.random.default_rng(5))
    np.testing.assert_array_equal(table, again)
    assert table.shape == (small.n_questions, small.p)
    assert np.all(np.diff(table, axis=1) >= 0)


def test_tsaa_converted_matrix_matches_standalone_lookup():
    X = OrdinalMatrix.from_array([[1, 2, 3, 4, 5, 5], [5, 4, 3, 2, 1, 1]], p=5)
    table = gmm_level_scores(X, np.random.default_rng(0))
    converted = apply_level_scores(X, table)
    expected = np.array([[table[m, X.values[m, n] - 1] for n in range(6)] for m in range(2)])
    np.testing.assert_array_equal(converted, expected)


def test_tsaa_constant_question_keeps_identity():
    X = OrdinalMatrix.from_array([[3, 3, 3, 3], [1, 2, 4, 5]], p=5)
    table = gmm_level_scores(X, np.random.default_rng(0))
    np.testing.assert_array_equal(table[0], [1, 2, 3, 4, 5])


def test_tsaa_duplicate_columns_get_matching_weights():
    base = np.array([[1, 5, 3], [5, 1, 3], [2, 4, 3]])
    X = OrdinalMatrix.from_array(np.hstack([base, base]), p=5)
    model = solvers.fit_tsaa(X, FitConfig(K=3, max_epochs=3000, restarts=3))
    S = model.S.constrained
    np.testing.assert_allclose(S[:, :3], S[:, 3:], atol=0.05)


def test_tsaa_custom_conversion_is_used():
    X = OrdinalMatrix.from_array([[1, 2, 3], [3, 2, 1]], p=3)

    def doubled(X, rng):
        return np.tile(2.0 * np.arange(1, X.p + 1), (X.n_questions, 1))

    model = solvers.fit_tsaa(X, FitConfig(K=2, max_epochs=10, restarts=1), conversion=doubled)
    np.testing.assert_array_equal(model.working_matrix(X), 2.0 * X.as_float())


def test_nan_initial_loss_triggers_reinit(small):
    calls = {"n": 0}
    inner = solvers._aa_objective(small.as_float(), small.mask)

    def flaky(params, grad=True):
        calls["n"] += 1
        if calls["n"] <= 2:
            return np.nan, None
        return inner(params, grad)

    seq = np.random.SeedSequence(0)
    outcome = solvers._run_restart("AA", small, quick(max_epochs=5), flaky, seq, 0)
    assert outcome.reinits == 2
    assert outcome.params is not None


def test_persistent_nan_fails_restart_then_fit(small, monkeypatch):
    def broken(X, per_subject):
        return lambda params, grad=True: (np.nan, None)

    monkeypatch.setattr(solvers, "_ordinal_objective", broken)
    with pytest.raises(FitFailureError):
        solvers.fit_oaa(small, quick(nan_reinit_limit=2))


def test_mid_training_nan_marks_restart_failed(small):
    inner = solvers._aa_objective(small.as_float(), small.mask)
    calls = {"n": 0}

    def late_nan(params, grad=True):
        calls["n"] += 1
        return (np.nan, None) if calls["n"] > 5 else inner(params, grad)

    outcome = solvers._run_restart("AA", small, quick(max_epochs=50), late_nan, np.random.SeedSequence(1), 0)
    assert outcome.params is None
    assert "training" in outcome.error


def test_early_stop_rule():
    assert not solvers._early_stop([5.0] * 3, 5, 1e-6)
    assert solvers._early_stop([5.0] * 7, 5, 1e-6)
    assert not solvers._early_stop([10.0, 9.0, 8.0, 7.0], 2, 1e-6)


def test_infer_weights_recovers_training_weights(small):
    model = solvers.fit_aa(small, FitConfig(K=2, max_epochs=1000, restarts=2))
    S, boundary = solvers.infer_weights(model, model.archetypes(small), small, FitConfig(K=2, max_epochs=1000))
    assert boundary is None
    assert np.abs(S.constrained - model.S.constrained).max() < 0.05

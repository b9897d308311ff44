"""scikit-learn compatible wrappers around the solvers.

The estimators follow scikit-learn orientation: ``X`` is
``(n_respondents, n_questions)`` with NaN marking a missing answer.
``transform`` returns archetype weights ``(n_respondents, n_archetypes)`` and
``predict`` returns predicted responses on the 1..p scale.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_random_state

from . import solvers
from .core import OrdinalMatrix, category_probabilities
from .evaluation import archetype_profiles, expected_response
from .exceptions import DataError


def check_ordinal(X, n_levels=None) -> OrdinalMatrix:
    """Validate a respondent-major array and return the question-major matrix."""
    X = check_array(X, dtype=np.float64, ensure_all_finite="allow-nan")
    return OrdinalMatrix.from_array(X.T, p=n_levels)


def _seed_from(random_state) -> int:
    if isinstance(random_state, (int, np.integer)):
        return int(random_state)
    return int(check_random_state(random_state).randint(np.iinfo(np.int32).max))


class _ArchetypalBase(TransformerMixin, BaseEstimator):
    _method = None

    def __init__(
        self,
        n_archetypes=3,
        n_levels=None,
        learning_rate=None,
        max_epochs=5000,
        early_stop_patience=50,
        early_stop_rel_tol=1e-6,
        warm_start_epochs=25,
        n_restarts=10,
        nan_reinit_limit=5,
        n_jobs=None,
        random_state=None,
    ):
        self.n_archetypes = n_archetypes
        self.n_levels = n_levels
        self.learning_rate = learning_rate
        self.max_epochs = max_epochs
        self.early_stop_patience = early_stop_patience
        self.early_stop_rel_tol = early_stop_rel_tol
        self.warm_start_epochs = warm_start_epochs
        self.n_restarts = n_restarts
        self.nan_reinit_limit = nan_reinit_limit
        self.n_jobs = n_jobs
        self.random_state = random_state

    def _config(self, K=None):
        return solvers.FitConfig(
            K=self.n_archetypes if K is None else K,
            learning_rate=self.learning_rate,
            max_epochs=self.max_epochs,
            early_stop_patience=self.early_stop_patience,
            early_stop_rel_tol=self.early_stop_rel_tol,
            warm_start_aa_epochs=self.warm_start_epochs,
            restarts=self.n_restarts,
            seed=self.seed_,
            nan_reinit_limit=self.nan_reinit_limit,
            n_jobs=self.n_jobs,
        )

    def fit(self, X, y=None):
        data = check_ordinal(X, self.n_levels)
        self.seed_ = _seed_from(self.random_state)
        model = solvers.fit(self._method, data, self._config())
        self.model_ = model
        self.n_levels_ = data.p
        self.n_features_in_ = data.n_questions
        profiles = archetype_profiles(model, data)
        self.archetypes_ = profiles.values.T
        self.archetype_responses_ = profiles.ordinal.T
        self.weights_ = np.array(model.S.constrained.T)
        self.loss_ = model.final_loss
        self.n_iter_ = model.epochs_run
        self._latent_archetypes = model.archetypes(data)
        if model.boundary is not None:
            self.boundaries_ = model.boundary.beta
            self.alphas_ = model.boundary.alpha
            self.sigma_ = model.boundary.sigma
        return self

    def fit_transform(self, X, y=None, **fit_params):
        return self.fit(X, y).weights_

    def _check_new(self, X):
        check_is_fitted(self, "model_")
        data = check_ordinal(X, self.n_levels_)
        if data.n_questions != self.n_features_in_:
            raise DataError(f"X has {data.n_questions} questions, estimator was fitted on {self.n_features_in_}")
        return data

    def _infer(self, data):
        return solvers.infer_weights(self.model_, self._latent_archetypes, data, self._config())

    def transform(self, X):
        """Archetype weights of each respondent in ``X``, fitted against the learned archetypes."""
        S, _ = self._infer(self._check_new(X))
        return np.array(S.constrained.T)

    def predict(self, X):
        """Predicted responses ``(n_respondents, n_questions)``."""
        data = self._check_new(X)
        S, boundary = self._infer(data)
        return self._predict_from(S.constrained, boundary).T

    def _predict_from(self, S, boundary):
        return self._latent_archetypes @ S


class ArchetypalAnalysis(_ArchetypalBase):
    """Least-squares archetypal analysis on the raw category values."""

    _method = "AA"


class TwoStepArchetypalAnalysis(_ArchetypalBase):
    """Archetypal analysis on per-question converted scores.

    Predictions combine the original-scale archetypes with the weights fitted
    on the converted scale.
    """

    _method = "TSAA"

    def fit(self, X, y=None):
        super().fit(X, y)
        self._response_archetypes = self.archetypes_.T
        return self

    def _predict_from(self, S, boundary):
        return self._response_archetypes @ S


class OrdinalArchetypalAnalysis(_ArchetypalBase):
    """Archetypal analysis with a learned global ordinal scale."""

    _method = "OAA"

    def _predict_from(self, S, boundary):
        latent = self._latent_archetypes @ S
        return expected_response(category_probabilities(latent, boundary.beta, boundary.sigma))


class ResponseBiasOrdinalArchetypalAnalysis(OrdinalArchetypalAnalysis):
    """Ordinal archetypal analysis with one learned scale per respondent.

    ``transform`` and ``predict`` on new respondents also fit a scale for
    each of them.
    """

    _method = "RBOAA"


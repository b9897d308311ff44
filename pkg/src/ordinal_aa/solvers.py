"""Model fitting: AA, two-step AA, ordinal AA and response-bias ordinal AA.

All four solvers reparameterize the simplex constraints through a column
softmax and run full-batch AMSGrad on the free parameters. Each restart draws
its own initialization from an independent child seed, and the restart with
the lowest final loss is returned (ties go to the lower restart index).
"""

from __future__ import annotations

import logging
import os
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from ._objective import OrdinalData, least_squares, ordinal_loss
from .core import (
    BoundarySpec,
    OrdinalMatrix,
    SimplexFactor,
    cross_entropy_loss,
    inverse_softplus,
    least_squares_loss,
    map_ordinal,
)
from .exceptions import ConfigurationError, FitFailureError, InvalidParameterError
from .optim import OptimizerState, amsgrad_step

logger = logging.getLogger(__name__)

METHODS = ("AA", "TSAA", "OAA", "RBOAA")
ORDINAL_METHODS = ("OAA", "RBOAA")
DEFAULT_LEARNING_RATE = {"AA": 0.1, "TSAA": 0.1, "OAA": 0.01, "RBOAA": 0.01}
THREADS_ENV = "ORDINAL_AA_THREADS"


def normalize_method(method) -> str:
    name = str(method).upper()
    if name not in METHODS:
        raise ConfigurationError(f"unknown method {method!r}; expected one of {', '.join(METHODS)}")
    return name


@dataclass(frozen=True)
class FitConfig:
    K: int
    learning_rate: float | None = None
    max_epochs: int = 5000
    early_stop_patience: int = 50
    early_stop_rel_tol: float = 1e-6
    warm_start_aa_epochs: int = 25
    restarts: int = 10
    seed: int = 0
    nan_reinit_limit: int = 5
    n_jobs: int | None = None

    def __post_init__(self):
        if int(self.K) < 1:
            raise ConfigurationError(f"K must be >= 1, got {self.K}")
        if self.learning_rate is not None and not self.learning_rate > 0:
            raise ConfigurationError("learning_rate must be positive")
        if self.max_epochs < 0 or self.early_stop_patience < 1 or self.warm_start_aa_epochs < 0:
            raise ConfigurationError("epoch counts must be nonnegative and patience >= 1")
        if self.early_stop_rel_tol < 0:
            raise ConfigurationError("early_stop_rel_tol must be nonnegative")
        if int(self.restarts) < 1:
            raise ConfigurationError(f"restarts must be >= 1, got {self.restarts}")
        if self.nan_reinit_limit < 0:
            raise ConfigurationError("nan_reinit_limit must be nonnegative")

    def lr_for(self, method) -> float:
        return self.learning_rate if self.learning_rate is not None else DEFAULT_LEARNING_RATE[method]

    def jobs(self) -> int:
        if self.n_jobs is not None:
            return int(self.n_jobs)
        return int(os.environ.get(THREADS_ENV, "1"))


@dataclass(frozen=True, eq=False)
class FittedModel:
    """Converged parameters of one restart plus bookkeeping.

    ``restarts`` holds every successful restart (including this one) of the
    fit that produced the model, ordered by restart index; it is empty on
    restart-level models and is not persisted.
    """

    method: str
    K: int
    p: int
    C: SimplexFactor
    S: SimplexFactor
    boundary: BoundarySpec | None
    final_loss: float
    loss_kind: str
    epochs_run: int
    restart_index: int
    seed: int
    loss_trace: np.ndarray
    level_scores: np.ndarray | None = None
    restarts: tuple = field(default=(), repr=False, compare=False)
    failed_restarts: tuple = field(default=(), repr=False, compare=False)

    __hash__ = None

    def __eq__(self, other):
        """Bitwise equality of metadata, parameters and loss trace."""
        if not isinstance(other, FittedModel):
            return NotImplemented
        meta = ("method", "K", "p", "final_loss", "loss_kind", "epochs_run", "restart_index", "seed")
        if any(getattr(self, k) != getattr(other, k) for k in meta):
            return False
        mine, theirs = self.params(), other.params()
        if mine.keys() != theirs.keys():
            return False
        arrays = [(mine[k], theirs[k]) for k in mine] + [(self.loss_trace, other.loss_trace)]
        if (self.level_scores is None) != (other.level_scores is None):
            return False
        if self.level_scores is not None:
            arrays.append((self.level_scores, other.level_scores))
        return all(np.array_equal(a, b) for a, b in arrays)

    @property
    def n_respondents(self) -> int:
        return self.S.shape[1]

    @property
    def is_ordinal(self) -> bool:
        return self.method in ORDINAL_METHODS

    def params(self) -> dict:
        out = {"C": np.array(self.C.free), "S": np.array(self.S.free)}
        if self.boundary is not None:
            out.update(
                b=np.array(self.boundary.b_free),
                c1=np.array(self.boundary.scale_free),
                c2=np.array(self.boundary.offset),
                sigma=np.array(self.boundary.sigma_free),
            )
        return out

    def working_matrix(self, X: OrdinalMatrix) -> np.ndarray:
        """Data on the scale the model was trained on (X, converted X, or mapped X)."""
        _check_shape(self, X)
        if self.method == "AA":
            return X.as_float()
        if self.method == "TSAA":
            return apply_level_scores(X, self.level_scores)
        return map_ordinal(X, self.boundary)

    def archetypes(self, X: OrdinalMatrix) -> np.ndarray:
        """Archetype matrix ``(M, K)`` on the working scale."""
        return self.working_matrix(X) @ self.C.constrained

    def reconstruction(self, X: OrdinalMatrix) -> np.ndarray:
        """Latent reconstruction used for scoring.

        For TSAA this is built from the original ordinal values, not the
        converted ones, so that it lives on the response scale.
        """
        source = X.as_float() if self.method == "TSAA" else self.working_matrix(X)
        return (source @ self.C.constrained) @ self.S.constrained

    def recompute_loss(self, X: OrdinalMatrix) -> float:
        R = (self.working_matrix(X) @ self.C.constrained) @ self.S.constrained
        if self.is_ordinal:
            return cross_entropy_loss(X, R, self.boundary)
        target = self.working_matrix(X)
        return least_squares_loss(target, R, mask=X.mask)


def _check_shape(model, X):
    if X.n_respondents != model.C.shape[0]:
        raise InvalidParameterError(
            f"model was fitted on {model.C.shape[0]} respondents, data has {X.n_respondents}"
        )
    if X.p != model.p:
        raise InvalidParameterError(f"model was fitted with p={model.p}, data has p={X.p}")


# ---------------------------------------------------------------------------
# two-step conversion
# ---------------------------------------------------------------------------


def gmm_level_scores(X: OrdinalMatrix, rng) -> np.ndarray:
    """Per-question continuous score for every level, shape ``(M, p)``.

    A two-component Gaussian mixture with a shared variance is fitted by EM to
    the jittered responses of each question; level ``j`` maps to the
    posterior-weighted mean of the component means at ``j``. The shared
    variance makes the map nondecreasing in ``j``. Questions where the mixture
    degenerates keep the identity map ``j -> j``.
    """
    from sklearn.exceptions import ConvergenceWarning
    from sklearn.mixture import GaussianMixture

    p = X.p
    levels = np.arange(1, p + 1, dtype=float)
    table = np.tile(levels, (X.n_questions, 1))
    for m in range(X.n_questions):
        observed = X.values[m][X.mask[m]].astype(float)
        jitter = rng.uniform(-0.5, 0.5, size=observed.size)
        if np.unique(observed).size < 2:
            continue
        gm = GaussianMixture(
            n_components=2,
            covariance_type="tied",
            random_state=int(rng.integers(2**31 - 1)),
            n_init=1,
        )
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ConvergenceWarning)
            gm.fit((observed + jitter)[:, None])
        means = gm.means_.ravel()
        if np.min(gm.weights_) < 1e-3 or abs(means[0] - means[1]) < 1e-6 or not np.all(np.isfinite(means)):
            continue
        scores = gm.predict_proba(levels[:, None]) @ means
        if np.all(np.isfinite(scores)) and np.all(np.diff(scores) >= 0):
            table[m] = scores
    return table


def apply_level_scores(X: OrdinalMatrix, table) -> np.ndarray:
    """Look up converted scores; missing cells take the mid-scale score."""
    table = np.asarray(table, dtype=float)
    if table.shape != (X.n_questions, X.p):
        raise InvalidParameterError(f"level table shape {table.shape} does not match ({X.n_questions}, {X.p})")
    lo, hi = X.fill_codes()
    rows = np.arange(X.n_questions)[:, None]
    return 0.5 * (table[rows, lo] + table[rows, hi])


# ---------------------------------------------------------------------------
# initialization and the restart loop
# ---------------------------------------------------------------------------


def _log_dirichlet(rng, dim, count):
    draws = rng.dirichlet(np.ones(dim), size=count).T
    return np.log(np.maximum(draws, np.finfo(float).tiny))


def initialize(method, X: OrdinalMatrix, cfg: FitConfig, rng=None) -> dict:
    """Random starting point for one restart.

    Columns of C and S are flat-Dirichlet draws (free parameters are their
    logs), boundary logits start at one (equidistant boundaries on [0, 1]),
    and the free noise scale is standard normal.
    """
    method = normalize_method(method)
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    n = X.n_respondents
    params = {"C": _log_dirichlet(rng, n, cfg.K), "S": _log_dirichlet(rng, cfg.K, n)}
    if method in ORDINAL_METHODS:
        groups = n if method == "RBOAA" else 1
        params.update(
            b=np.ones((groups, X.p)),
            c1=np.full(groups, float(inverse_softplus(1.0))),
            c2=np.zeros(groups),
            sigma=rng.standard_normal(groups),
        )
    return params


def _early_stop(best_trace, patience, rel_tol) -> bool:
    """True when the best loss improved by at most ``rel_tol`` over ``patience`` epochs."""
    if len(best_trace) <= patience:
        return False
    before, now = best_trace[-1 - patience], best_trace[-1]
    return (before - now) <= rel_tol * abs(before)


def _descend(objective, params, cfg: FitConfig, lr, keys=None):
    """Run AMSGrad from ``params``; return best params, best loss, trace, steps.

    Returns ``None`` for the parameters if the loss turns non-finite.
    """
    state = OptimizerState()
    trace, best_trace = [], []
    best, best_loss = params, np.inf
    steps = 0
    for epoch in range(cfg.max_epochs + 1):
        loss, grads = objective(params, epoch < cfg.max_epochs)
        if not np.isfinite(loss):
            return None, loss, np.asarray(trace), steps
        trace.append(loss)
        if loss < best_loss:
            best, best_loss = params, loss
        best_trace.append(best_loss)
        if epoch == cfg.max_epochs or _early_stop(best_trace, cfg.early_stop_patience, cfg.early_stop_rel_tol):
            break
        if keys is not None:
            grads = {k: grads[k] for k in keys}
        params = amsgrad_step(params, grads, state, lr)
        steps += 1
    return best, best_loss, np.asarray(trace), steps


def _aa_objective(target, mask):
    def objective(params, grad=True):
        return least_squares(params, target, mask, grad=grad)

    return objective


def _ordinal_objective(X, per_subject):
    data = OrdinalData.build(X, per_subject)

    def objective(params, grad=True):
        return ordinal_loss(params, data, grad=grad)

    return objective


def _warm_start(params, X, cfg):
    if cfg.warm_start_aa_epochs == 0:
        return params
    target = X.as_float()
    objective = _aa_objective(target, X.mask)
    state = OptimizerState()
    aa = {"C": params["C"], "S": params["S"]}
    for _ in range(cfg.warm_start_aa_epochs):
        _, grads = objective(aa)
        aa = amsgrad_step(aa, grads, state, DEFAULT_LEARNING_RATE["AA"])
    if not (np.all(np.isfinite(aa["C"])) and np.all(np.isfinite(aa["S"]))):
        return params
    return {**params, **aa}


@dataclass
class _RestartOutcome:
    index: int
    params: dict | None
    loss: float
    trace: np.ndarray
    steps: int
    reinits: int
    error: str | None = None


def _run_restart(method, X, cfg, objective, seed_seq, index):
    rng = np.random.default_rng(seed_seq)
    lr = cfg.lr_for(method)
    for attempt in range(cfg.nan_reinit_limit + 1):
        params = initialize(method, X, cfg, rng)
        if method in ORDINAL_METHODS:
            params = _warm_start(params, X, cfg)
        loss0, _ = objective(params, False)
        if np.isfinite(loss0):
            break
        logger.warning("restart %d: non-finite initial loss, re-initializing (%d)", index, attempt + 1)
    else:
        return _RestartOutcome(index, None, np.nan, np.empty(0), 0, attempt + 1, "non-finite loss at initialization")
    best, loss, trace, steps = _descend(objective, params, cfg, lr)
    if best is None:
        return _RestartOutcome(index, None, loss, trace, steps, attempt, "non-finite loss during training")
    return _RestartOutcome(index, best, loss, trace, steps, attempt)


def _build_model(method, X, cfg, outcome, level_scores):
    params = outcome.params
    boundary = None
    if method in ORDINAL_METHODS:
        boundary = BoundarySpec(params["b"], params["c1"], params["c2"], params["sigma"], per_subject=method == "RBOAA")
    return FittedModel(
        method=method,
        K=cfg.K,
        p=X.p,
        C=SimplexFactor(params["C"]),
        S=SimplexFactor(params["S"]),
        boundary=boundary,
        final_loss=float(outcome.loss),
        loss_kind="cross-entropy" if method in ORDINAL_METHODS else "least-squares",
        epochs_run=outcome.steps,
        restart_index=outcome.index,
        seed=cfg.seed,
        loss_trace=outcome.trace,
        level_scores=level_scores,
    )


def _fit(method, X: OrdinalMatrix, cfg: FitConfig, objective, level_scores=None) -> FittedModel:
    if cfg.K > X.n_respondents:
        raise ConfigurationError(f"K={cfg.K} exceeds the number of respondents N={X.n_respondents}")
    children = np.random.SeedSequence(cfg.seed).spawn(cfg.restarts)
    jobs = cfg.jobs()
    if jobs > 1 and cfg.restarts > 1:
        from joblib import Parallel, delayed

        outcomes = Parallel(n_jobs=jobs)(
            delayed(_run_restart)(method, X, cfg, objective, children[i], i) for i in range(cfg.restarts)
        )
    else:
        outcomes = [_run_restart(method, X, cfg, objective, children[i], i) for i in range(cfg.restarts)]

    good = [o for o in outcomes if o.params is not None]
    failed = tuple((o.index, o.error) for o in outcomes if o.params is None)
    if not good:
        raise FitFailureError(f"{method}: all {cfg.restarts} restarts failed ({failed[0][1]})")
    models = tuple(_build_model(method, X, cfg, o, level_scores) for o in good)
    best = min(models, key=lambda m: (m.final_loss, m.restart_index))
    logger.info("%s K=%d: best restart %d, loss %.6g", method, cfg.K, best.restart_index, best.final_loss)
    return replace(best, restarts=models, failed_restarts=failed)


def fit_aa(X: OrdinalMatrix, cfg: FitConfig) -> FittedModel:
    """Least-squares AA on the raw category values treated as continuous."""
    return _fit("AA", X, cfg, _aa_objective(X.as_float(), X.mask))


def fit_tsaa(X: OrdinalMatrix, cfg: FitConfig, conversion=gmm_level_scores) -> FittedModel:
    """Convert levels to continuous scores, then run least-squares AA on them.

    ``conversion(X, rng)`` must return an ``(M, p)`` table of level scores.
    """
    rng = np.random.default_rng([cfg.seed, 0x75AA])
    table = np.asarray(conversion(X, rng), dtype=float)
    converted = apply_level_scores(X, table)
    return _fit("TSAA", X, cfg, _aa_objective(converted, X.mask), level_scores=table)


def fit_oaa(X: OrdinalMatrix, cfg: FitConfig) -> FittedModel:
    """Ordinal AA with one global set of learned boundaries."""
    return _fit("OAA", X, cfg, _ordinal_objective(X, per_subject=False))


def fit_rboaa(X: OrdinalMatrix, cfg: FitConfig) -> FittedModel:
    """Ordinal AA with a boundary set and noise level per respondent."""
    return _fit("RBOAA", X, cfg, _ordinal_objective(X, per_subject=True))


_FITTERS = {"AA": fit_aa, "TSAA": fit_tsaa, "OAA": fit_oaa, "RBOAA": fit_rboaa}


def fit(method, X: OrdinalMatrix, cfg: FitConfig) -> FittedModel:
    return _FITTERS[normalize_method(method)](X, cfg)


# ---------------------------------------------------------------------------
# weights for new respondents
# ---------------------------------------------------------------------------


def infer_weights(model: FittedModel, archetypes, X: OrdinalMatrix, cfg: FitConfig):
    """Fit respondent weights for ``X`` against fixed archetypes.

    Returns ``(S, boundary)``; RBOAA additionally learns a boundary set per
    new respondent, other methods reuse the model's scale.
    """
    if X.p != model.p:
        raise InvalidParameterError(f"model was fitted with p={model.p}, data has p={X.p}")
    if archetypes.shape != (X.n_questions, model.K):
        raise InvalidParameterError("archetypes do not match the number of questions")
    rng = np.random.default_rng(cfg.seed)
    n = X.n_respondents
    params = {"S": _log_dirichlet(rng, model.K, n)}
    keys = ["S"]
    boundary = model.boundary
    if model.method in ("AA", "TSAA"):
        target = X.as_float() if model.method == "AA" else apply_level_scores(X, model.level_scores)

        def objective(prm, grad=True):
            return least_squares(prm, target, X.mask, archetypes=archetypes, grad=grad)

    else:
        per_subject = model.method == "RBOAA"
        data = OrdinalData.build(X, per_subject)
        if per_subject:
            params.update(
                b=np.ones((n, X.p)),
                c1=np.full(n, float(np.median(boundary.scale_free))),
                c2=np.full(n, float(np.median(boundary.offset))),
                sigma=np.full(n, float(np.median(boundary.sigma_free))),
            )
            keys += ["b", "c1", "c2", "sigma"]
        else:
            params.update(
                b=np.array(boundary.b_free),
                c1=np.array(boundary.scale_free),
                c2=np.array(boundary.offset),
                sigma=np.array(boundary.sigma_free),
            )

        def objective(prm, grad=True):
            return ordinal_loss(prm, data, archetypes=archetypes, grad=grad)

    best, loss, _, _ = _descend(objective, params, cfg, cfg.lr_for(model.method), keys=keys)
    if best is None:
        raise FitFailureError("non-finite loss while inferring weights")
    if model.method == "RBOAA":
        boundary = BoundarySpec(best["b"], best["c1"], best["c2"], best["sigma"], per_subject=True)
    return SimplexFactor(best["S"]), boundary

"""Model-quality metrics and experiment protocols."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import linear_sum_assignment

from .core import OrdinalMatrix, category_probabilities
from .exceptions import ConfigurationError, InvalidParameterError, OrdinalAAError
from .solvers import FitConfig, FittedModel, fit, normalize_method

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------


def _mutual_information(joint):
    row = joint.sum(axis=1, keepdims=True)
    col = joint.sum(axis=0, keepdims=True)
    outer = row * col
    nz = joint > 0
    return float(np.sum(joint[nz] * np.log(joint[nz] / outer[nz])))


def nmi(S1, S2) -> float:
    """Normalized mutual information between two soft assignment matrices.

    Both arguments are column-stochastic with one column per respondent. The
    joint is ``S1 @ S2.T / N``; the score is ``2 I12 / (I11 + I22)``. When both
    self-informations vanish (single-archetype or uniform assignments on both
    sides) the two structures are indistinguishable and 1.0 is returned.
    """
    S1 = np.asarray(S1, dtype=float)
    S2 = np.asarray(S2, dtype=float)
    if S1.ndim != 2 or S2.ndim != 2 or S1.shape[1] != S2.shape[1]:
        raise InvalidParameterError(f"assignment matrices need the same number of columns: {S1.shape} vs {S2.shape}")
    n = S1.shape[1]
    i12 = _mutual_information(S1 @ S2.T / n)
    i11 = _mutual_information(S1 @ S1.T / n)
    i22 = _mutual_information(S2 @ S2.T / n)
    denom = i11 + i22
    if denom <= 1e-15:
        return 1.0
    return float(np.clip(2.0 * i12 / denom, 0.0, 1.0))


def expected_response(P) -> np.ndarray | float:
    """``sum_j j * P_j`` over the last axis (categories numbered from 1)."""
    P = np.asarray(P, dtype=float)
    if np.any(P < -1e-12):
        raise InvalidParameterError("probabilities must be nonnegative")
    if np.any(np.abs(P.sum(axis=-1) - 1.0) > 1e-6):
        raise InvalidParameterError("probabilities must sum to one")
    out = P @ np.arange(1, P.shape[-1] + 1, dtype=float)
    return float(out) if out.ndim == 0 else out


def _expected_from_latent(model: FittedModel, latent):
    """Expected response of latent values, one column per respondent."""
    beta = model.boundary.beta
    sigma = model.boundary.sigma
    P = category_probabilities(latent, beta, sigma)
    return expected_response(P)


def predict_matrix(model: FittedModel, X: OrdinalMatrix) -> np.ndarray:
    """Predicted responses ``(M, N)`` on the 1..p scale."""
    R = model.reconstruction(X)
    if not model.is_ordinal:
        return R
    return _expected_from_latent(model, R)


def rmse(predicted, original) -> float:
    predicted = np.asarray(predicted, dtype=float)
    original = np.asarray(original, dtype=float)
    return float(np.sqrt(np.mean((predicted - original) ** 2)))


# ---------------------------------------------------------------------------
# corruption experiment
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CorruptionPlan:
    """Cells to corrupt and their replacement values.

    ``rows``/``cols`` index distinct observed cells; ``replacements`` differ
    from the original values and lie in 1..p.
    """

    fraction: float
    seed: int
    rows: np.ndarray
    cols: np.ndarray
    replacements: np.ndarray
    scheme: str = "uniform-random-replacement"

    @classmethod
    def build(cls, X: OrdinalMatrix, fraction=0.1, seed=0) -> "CorruptionPlan":
        if not 0 < fraction < 1:
            raise ConfigurationError(f"fraction must lie in (0, 1), got {fraction}")
        observed = np.flatnonzero(X.mask.ravel())
        count = int(round(fraction * observed.size))
        if count < 1:
            raise ConfigurationError(
                f"fraction {fraction} of {observed.size} observed cells corrupts no entry"
            )
        rng = np.random.default_rng(seed)
        chosen = np.sort(rng.choice(observed, size=count, replace=False))
        rows, cols = np.unravel_index(chosen, X.shape)
        # uniform over the other p-1 levels
        shift = rng.integers(1, X.p, size=count)
        original = X.values[rows, cols]
        replacements = (original - 1 + shift) % X.p + 1
        return cls(float(fraction), int(seed), rows, cols, replacements)

    def apply(self, X: OrdinalMatrix) -> OrdinalMatrix:
        values = np.array(X.values)
        values[self.rows, self.cols] = self.replacements
        return X.with_values(values)


@dataclass(frozen=True)
class CorruptionResult:
    rmse: dict  # method -> RMSE at corrupted cells
    failures: dict  # method -> error message
    plan: CorruptionPlan
    models: dict = field(default_factory=dict, repr=False, compare=False)

    def rows(self):
        out = []
        for method in sorted(set(self.rmse) | set(self.failures)):
            out.append(
                {
                    "method": method,
                    "rmse": self.rmse.get(method, float("nan")),
                    "status": "failed" if method in self.failures else "ok",
                    "n_corrupted": int(self.plan.rows.size),
                    "fraction": self.plan.fraction,
                }
            )
        return out


def corruption_experiment(X: OrdinalMatrix, plan: CorruptionPlan, methods, cfg: FitConfig) -> CorruptionResult:
    """Fit every method on corrupted data and score predictions of the original cells."""
    X_cor = plan.apply(X)
    truth = X.values[plan.rows, plan.cols].astype(float)
    scores, failures, models = {}, {}, {}
    for method in methods:
        method = normalize_method(method)
        try:
            model = fit(method, X_cor, cfg)
        except OrdinalAAError as exc:
            logger.warning("corruption experiment: %s failed: %s", method, exc)
            failures[method] = str(exc)
            continue
        pred = predict_matrix(model, X_cor)[plan.rows, plan.cols]
        scores[method] = rmse(pred, truth)
        models[method] = model
    return CorruptionResult(scores, failures, plan, models)


# ---------------------------------------------------------------------------
# K sweeps
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SweepReport:
    method: str
    ks: tuple
    restarts: int
    losses: dict  # K -> array of per-restart final losses (NaN = failed)
    stability: dict  # K -> mean NMI of best restart against the others
    degenerate: dict  # K -> True when stability is set by convention
    best_restart: dict  # K -> restart index of the lowest loss
    corruption_rmse: dict = field(default_factory=dict)
    models: dict = field(default_factory=dict, repr=False, compare=False)

    def best_losses(self) -> np.ndarray:
        return np.array([np.nanmin(self.losses[k]) if np.any(np.isfinite(self.losses[k])) else np.nan for k in self.ks])

    def rows(self):
        out = []
        for k in self.ks:
            for r, loss in enumerate(self.losses[k]):
                out.append(
                    {
                        "method": self.method,
                        "K": k,
                        "restart": r,
                        "loss": float(loss),
                        "status": "ok" if np.isfinite(loss) else "failed",
                        "best": int(r == self.best_restart.get(k, -1)),
                        "nmi_stability": self.stability[k],
                        "degenerate": int(self.degenerate[k]),
                        "corruption_rmse": self.corruption_rmse.get(k, float("nan")),
                    }
                )
        return out


def stability_sweep(X: OrdinalMatrix, method, ks, cfg: FitConfig, corruption: CorruptionPlan | None = None) -> SweepReport:
    """Fit ``method`` for every K and summarize losses and restart stability."""
    method = normalize_method(method)
    ks = tuple(sorted(int(k) for k in ks))
    if not ks:
        raise ConfigurationError("K grid must be nonempty")
    losses, stability, degenerate, best_restart, models, rmse_by_k = {}, {}, {}, {}, {}, {}
    for k in ks:
        kcfg = replace(cfg, K=k)
        row = np.full(cfg.restarts, np.nan)
        try:
            model = fit(method, X, kcfg)
        except OrdinalAAError as exc:
            logger.warning("sweep %s K=%d failed: %s", method, k, exc)
            losses[k], stability[k], degenerate[k] = row, float("nan"), False
            continue
        for r in model.restarts:
            row[r.restart_index] = r.final_loss
        others = [r for r in model.restarts if r.restart_index != model.restart_index]
        if k == 1:
            stability[k], degenerate[k] = 1.0, True
        elif not others:
            stability[k], degenerate[k] = float("nan"), True
        else:
            stability[k] = float(np.mean([nmi(model.S.constrained, r.S.constrained) for r in others]))
            degenerate[k] = False
        losses[k] = row
        best_restart[k] = model.restart_index
        models[k] = model
        if corruption is not None:
            result = corruption_experiment(X, corruption, [method], kcfg)
            rmse_by_k[k] = result.rmse.get(method, float("nan"))
    return SweepReport(method, ks, cfg.restarts, losses, stability, degenerate, best_restart, rmse_by_k, models)


# ---------------------------------------------------------------------------
# archetype profiles and response bias
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ArchetypeProfiles:
    values: np.ndarray  # (M, K) on the model's working scale
    ordinal: np.ndarray  # (M, K) on the 1..p response scale


def archetype_profiles(model: FittedModel, X: OrdinalMatrix) -> ArchetypeProfiles:
    """Per-question archetype profiles.

    AA and TSAA profiles are convex combinations of the raw responses. OAA and
    RBOAA profiles are combinations of the mapped data; their response-scale
    version is the expected response of each archetype value, averaged over
    respondents' scales for RBOAA.
    """
    if model.method in ("AA", "TSAA"):
        values = X.as_float() @ model.C.constrained
        return ArchetypeProfiles(values, values.copy())
    values = model.archetypes(X)
    if model.method == "OAA":
        ordinal = _expected_from_latent(model, values)
    else:
        # (M, K, N): every archetype value seen through every respondent's scale
        ordinal = _expected_from_latent(model, np.repeat(values[:, :, None], X.n_respondents, axis=2)).mean(axis=2)
    return ArchetypeProfiles(values, ordinal)


def match_archetypes(estimated, reference) -> np.ndarray:
    """Column order of ``estimated`` that best matches ``reference``.

    Minimizes the total squared distance between matched columns; returns
    ``perm`` with ``estimated[:, perm]`` aligned to ``reference``.
    """
    estimated = np.asarray(estimated, dtype=float)
    reference = np.asarray(reference, dtype=float)
    if estimated.shape != reference.shape:
        raise InvalidParameterError("profile matrices must have the same shape")
    cost = ((reference[:, :, None] - estimated[:, None, :]) ** 2).sum(axis=0)
    rows, cols = linear_sum_assignment(cost)
    return cols[np.argsort(rows)]


@dataclass(frozen=True)
class BiasSummary:
    alpha: np.ndarray  # (N, p)
    quartiles: np.ndarray  # (p, 5): min, q1, median, q3, max

    def rows(self):
        out = []
        for j, (lo, q1, med, q3, hi) in enumerate(self.quartiles, start=1):
            out.append({"level": j, "min": lo, "q1": q1, "median": med, "q3": q3, "max": hi, "iqr": q3 - q1})
        return out


def response_bias_summary(model: FittedModel, normalized=False) -> BiasSummary:
    """Distribution of per-respondent category midpoints for each level.

    With ``normalized`` the midpoints are taken on each respondent's own unit
    scale (outermost boundaries mapped to 0 and 1).
    """
    if model.method != "RBOAA" or model.boundary is None or not model.boundary.per_subject:
        raise InvalidParameterError("response-bias summary needs an RBOAA model")
    if normalized:
        b = model.boundary.b
        alpha = 0.5 * (b[:, 1:] + b[:, :-1])
    else:
        alpha = model.boundary.alpha
    quartiles = np.percentile(alpha, [0, 25, 50, 75, 100], axis=0).T
    return BiasSummary(alpha, quartiles)


def unit_scale_alpha(model: FittedModel) -> np.ndarray:
    """Category midpoints with the outermost boundaries mapped to 0 and 1."""
    if model.boundary is None:
        raise InvalidParameterError("model has no learned boundaries")
    b = model.boundary.b
    return 0.5 * (b[..., 1:] + b[..., :-1])


def per_subject_alpha_correlation(model: FittedModel, boundaries_true) -> np.ndarray:
    """Pearson r between recovered and generator midpoints, one value per respondent."""
    if model.method != "RBOAA":
        raise InvalidParameterError("per-subject correlation needs an RBOAA model")
    est = model.boundary.alpha
    b = np.asarray(boundaries_true, dtype=float)
    true = 0.5 * (b[..., 1:] + b[..., :-1])
    true = np.broadcast_to(true, est.shape)
    est_c = est - est.mean(axis=1, keepdims=True)
    true_c = true - true.mean(axis=1, keepdims=True)
    denom = np.sqrt((est_c**2).sum(axis=1) * (true_c**2).sum(axis=1))
    return (est_c * true_c).sum(axis=1) / denom

"""Domain types and the pure numerical kernel.

Orientation throughout is question-major: an ordinal matrix has one row per
question (M) and one column per respondent (N). Categories are 1..p at the
interface and 0..p-1 internally.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erfc, expit

from .exceptions import DataError, InvalidParameterError

PROB_FLOOR = 1e-9
_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def _frozen(a):
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


def softplus(x):
    """Numerically stable ``log(1 + exp(x))``."""
    return np.logaddexp(0.0, x)


def inverse_softplus(y):
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0):
        raise InvalidParameterError("softplus image must be positive")
    return y + np.log(-np.expm1(-y))


def column_softmax(free):
    free = np.asarray(free, dtype=float)
    shifted = free - free.max(axis=0, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=0, keepdims=True)


def norm_cdf(z):
    """Standard normal CDF through erfc; exact 0/1 at -inf/+inf."""
    return 0.5 * erfc(-np.asarray(z, dtype=float) / _SQRT2)


def norm_pdf(z):
    z = np.asarray(z, dtype=float)
    return _INV_SQRT_2PI * np.exp(-0.5 * z * z)


def norm_cdf_diff(upper, lower):
    """``Phi(upper) - Phi(lower)`` for ``upper >= lower``.

    When both arguments sit in the right tail the difference is taken between
    the two small left-tail values of the reflected arguments, which avoids
    cancellation of numbers close to one.
    """
    upper = np.asarray(upper, dtype=float)
    lower = np.asarray(lower, dtype=float)
    sign = np.where(lower > 0, -1.0, 1.0)
    return sign * (norm_cdf(sign * upper) - norm_cdf(sign * lower))


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OrdinalMatrix:
    """Integer responses on a ``p``-level scale, shape ``(M, N)``.

    ``values`` holds categories 1..p; missing cells hold 0 and are ``False``
    in ``mask``.
    """

    values: np.ndarray
    p: int
    mask: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values)
        mask = np.asarray(self.mask, dtype=bool)
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise DataError(f"ordinal matrix must be 2-D and non-empty, got shape {values.shape}")
        if mask.shape != values.shape:
            raise DataError("missing mask must match the value matrix shape")
        if int(self.p) < 2:
            raise DataError(f"scale size p must be >= 2, got {self.p}")
        observed = values[mask]
        if observed.size and (observed.min() < 1 or observed.max() > self.p):
            bad = np.argwhere(mask & ((values < 1) | (values > self.p)))[0]
            raise DataError(
                f"entry {values[tuple(bad)]} at (question {bad[0]}, respondent {bad[1]}) "
                f"outside 1..{self.p}"
            )
        object.__setattr__(self, "values", _frozen(np.where(mask, values, 0).astype(np.int64)))
        object.__setattr__(self, "mask", _frozen(mask))
        object.__setattr__(self, "p", int(self.p))

    @classmethod
    def from_array(cls, values, p=None, mask=None) -> "OrdinalMatrix":
        """Build from an ``(M, N)`` array; NaN cells are treated as missing."""
        arr = np.asarray(values, dtype=float)
        if mask is None:
            mask = np.isfinite(arr)
        else:
            mask = np.asarray(mask, dtype=bool) & np.isfinite(arr)
        filled = np.where(mask, arr, 0.0)
        if np.any(filled != np.round(filled)):
            raise DataError("ordinal entries must be integers")
        if p is None:
            if not mask.any():
                raise DataError("cannot infer p from an all-missing matrix")
            p = int(filled[mask].max())
        return cls(filled.astype(np.int64), int(p), mask)

    @property
    def shape(self):
        return self.values.shape

    @property
    def n_questions(self) -> int:
        return self.values.shape[0]

    @property
    def n_respondents(self) -> int:
        return self.values.shape[1]

    @property
    def codes(self) -> np.ndarray:
        """Zero-based categories; missing cells are -1."""
        return np.where(self.mask, self.values - 1, -1)

    def fill_codes(self):
        """Zero-based (low, high) category pair per cell.

        Observed cells have low == high. Missing cells point at the mid-scale
        category (p odd) or the two central categories (p even).
        """
        p = self.p
        lo_fill, hi_fill = (p - 1) // 2, p // 2
        lo = np.where(self.mask, self.values - 1, lo_fill)
        hi = np.where(self.mask, self.values - 1, hi_fill)
        return lo, hi

    def as_float(self) -> np.ndarray:
        """Values as floats with missing cells set to the scale midpoint."""
        return np.where(self.mask, self.values, (self.p + 1) / 2.0).astype(float)

    def with_values(self, values) -> "OrdinalMatrix":
        return OrdinalMatrix(values, self.p, self.mask)

    def __eq__(self, other):
        if not isinstance(other, OrdinalMatrix):
            return NotImplemented
        return (
            self.p == other.p
            and np.array_equal(self.values, other.values)
            and np.array_equal(self.mask, other.mask)
        )

    __hash__ = None


@dataclass(frozen=True)
class SimplexFactor:
    """Unconstrained matrix and its column-wise softmax image."""

    free: np.ndarray
    constrained: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        free = np.asarray(self.free, dtype=float)
        if free.ndim != 2:
            raise InvalidParameterError("simplex factor must be a matrix")
        if not np.all(np.isfinite(free)):
            raise InvalidParameterError("simplex factor has non-finite entries")
        object.__setattr__(self, "free", _frozen(free))
        object.__setattr__(self, "constrained", _frozen(column_softmax(free)))

    @classmethod
    def from_stochastic(cls, matrix) -> "SimplexFactor":
        """Free parameters as the log of a strictly positive stochastic matrix."""
        matrix = np.asarray(matrix, dtype=float)
        if np.any(matrix <= 0):
            raise InvalidParameterError("entries must be strictly positive to take logs")
        return cls(np.log(matrix))

    @property
    def shape(self):
        return self.free.shape


def boundaries_from_free(b_free, scale_free, offset):
    """Ordered boundaries ``softplus(scale) * b + offset`` with ``b`` on [0, 1].

    ``b`` is the cumulative sum of ``softmax(b_free)`` prefixed by zero. Works
    row-wise on a 2-D ``b_free`` with vector ``scale_free`` and ``offset``.
    """
    b_free = np.asarray(b_free, dtype=float)
    scale_free = np.asarray(scale_free, dtype=float)
    offset = np.asarray(offset, dtype=float)
    if not (np.all(np.isfinite(b_free)) and np.all(np.isfinite(scale_free)) and np.all(np.isfinite(offset))):
        raise InvalidParameterError("boundary parameters must be finite")
    b = unit_boundaries(b_free)
    return softplus(scale_free)[..., None] * b + offset[..., None]


def unit_boundaries(b_free):
    """``b`` with ``b_0 = 0``, ``b_p = 1``; last axis of ``b_free`` has length p."""
    b_free = np.asarray(b_free, dtype=float)
    shifted = b_free - b_free.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    q = e / e.sum(axis=-1, keepdims=True)
    b = np.concatenate([np.zeros(q.shape[:-1] + (1,)), np.cumsum(q, axis=-1)], axis=-1)
    b[..., -1] = 1.0
    return b


def alpha_from_boundaries(beta):
    """Category midpoints ``(beta_j + beta_{j-1}) / 2``; last axis is length p+1."""
    beta = np.asarray(beta, dtype=float)
    if beta.shape[-1] < 3:
        raise InvalidParameterError("need at least p+1 = 3 boundaries")
    if np.any(np.diff(beta, axis=-1) <= 0):
        raise InvalidParameterError("boundaries must be strictly increasing")
    return 0.5 * (beta[..., 1:] + beta[..., :-1])


@dataclass(frozen=True)
class BoundarySpec:
    """Free boundary and noise parameters, global or one set per respondent.

    Arrays are stored 2-D with a leading group axis (1 row for a global spec,
    N rows for a per-subject spec). ``beta``, ``alpha`` and ``sigma`` drop the
    group axis for global specs.
    """

    b_free: np.ndarray
    scale_free: np.ndarray
    offset: np.ndarray
    sigma_free: np.ndarray
    per_subject: bool = False

    def __post_init__(self):
        b_free = np.atleast_2d(np.asarray(self.b_free, dtype=float))
        groups = b_free.shape[0]
        arrays = {}
        for name in ("scale_free", "offset", "sigma_free"):
            a = np.asarray(getattr(self, name), dtype=float).reshape(-1)
            if a.size != groups:
                raise InvalidParameterError(f"{name} must have {groups} entries, got {a.size}")
            arrays[name] = a
        if not self.per_subject and groups != 1:
            raise InvalidParameterError("a global boundary spec has exactly one boundary set")
        if b_free.shape[1] < 2:
            raise InvalidParameterError("p must be >= 2")
        for a in (b_free, *arrays.values()):
            if not np.all(np.isfinite(a)):
                raise InvalidParameterError("boundary parameters must be finite")
        object.__setattr__(self, "b_free", _frozen(b_free))
        for name, a in arrays.items():
            object.__setattr__(self, name, _frozen(a))

    @classmethod
    def equidistant(cls, p, n_subjects=None, scale=1.0, offset=0.0, sigma=1.0) -> "BoundarySpec":
        groups = 1 if n_subjects is None else int(n_subjects)
        return cls(
            np.ones((groups, p)),
            np.full(groups, inverse_softplus(scale)),
            np.full(groups, float(offset)),
            np.full(groups, inverse_softplus(sigma)),
            per_subject=n_subjects is not None,
        )

    @property
    def p(self) -> int:
        return self.b_free.shape[1]

    @property
    def n_groups(self) -> int:
        return self.b_free.shape[0]

    def _squeeze(self, a):
        return a if self.per_subject else a[0]

    @property
    def b(self):
        return self._squeeze(unit_boundaries(self.b_free))

    @property
    def beta(self):
        return self._squeeze(boundaries_from_free(self.b_free, self.scale_free, self.offset))

    @property
    def alpha(self):
        return alpha_from_boundaries(self.beta)

    @property
    def sigma(self):
        s = softplus(self.sigma_free)
        return s if self.per_subject else s[0]

    def group_index(self, n_respondents):
        if self.per_subject:
            if self.n_groups != n_respondents:
                raise InvalidParameterError(
                    f"per-subject boundary spec has {self.n_groups} sets but data has {n_respondents} respondents"
                )
            return np.arange(n_respondents)
        return np.zeros(n_respondents, dtype=np.int64)


@dataclass(frozen=True)
class Reconstruction:
    r: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "r", _frozen(np.asarray(self.r, dtype=float)))


def _as_matrix(R):
    return np.asarray(R.r if isinstance(R, Reconstruction) else R, dtype=float)


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------


def map_ordinal(X: OrdinalMatrix, spec: BoundarySpec) -> np.ndarray:
    """Replace each response by its category midpoint.

    Missing cells receive the mid-scale midpoint (mean of the two central
    midpoints when p is even).
    """
    if spec.p != X.p:
        raise InvalidParameterError(f"spec has p={spec.p} but data has p={X.p}")
    g = spec.group_index(X.n_respondents)
    alpha = np.atleast_2d(spec.alpha)
    lo, hi = X.fill_codes()
    cols = g[None, :]
    return 0.5 * (alpha[cols, lo] + alpha[cols, hi])


def reconstruct(X_tilde, C: SimplexFactor, S: SimplexFactor) -> Reconstruction:
    X_tilde = np.asarray(X_tilde, dtype=float)
    c, s = C.constrained, S.constrained
    if X_tilde.ndim != 2 or c.shape[0] != X_tilde.shape[1] or s.shape[0] != c.shape[1] or s.shape[1] != X_tilde.shape[1]:
        raise InvalidParameterError(
            f"shape mismatch: X {X_tilde.shape}, C {c.shape}, S {s.shape}"
        )
    return Reconstruction((X_tilde @ c) @ s)


def _z_pair(codes, r, beta, sigma):
    """Standardized distances to the upper and lower edge of each category.

    The outermost categories extend to -inf and +inf.
    """
    beta = np.asarray(beta, dtype=float)
    p = beta.shape[-1] - 1
    ext = beta.copy()
    ext[..., 0] = -np.inf
    ext[..., p] = np.inf
    upper = np.take_along_axis(ext, codes + 1, axis=-1) if ext.ndim > 1 else ext[codes + 1]
    lower = np.take_along_axis(ext, codes, axis=-1) if ext.ndim > 1 else ext[codes]
    return (upper - r) / sigma, (lower - r) / sigma


def ordinal_likelihood(x, r, beta, sigma):
    """Probability of category ``x`` (1..p) given latent value ``r``.

    Vectorized over broadcastable ``x`` and ``r`` with one boundary vector.
    Results are clamped to ``[1e-9, 1]``.
    """
    sigma = np.asarray(sigma, dtype=float)
    if np.any(sigma <= 0) or not np.all(np.isfinite(sigma)):
        raise InvalidParameterError("sigma must be positive")
    beta = np.asarray(beta, dtype=float)
    if beta.ndim != 1 or np.any(np.diff(beta) <= 0):
        raise InvalidParameterError("beta must be a strictly increasing vector")
    p = beta.size - 1
    x = np.asarray(x)
    if np.any((x < 1) | (x > p)):
        raise DataError(f"category outside 1..{p}")
    x, r = np.broadcast_arrays(x.astype(np.int64), np.asarray(r, dtype=float))
    zu, zl = _z_pair(x - 1, r, beta, sigma)
    prob = np.clip(norm_cdf_diff(zu, zl), PROB_FLOOR, 1.0)
    return prob if prob.ndim else float(prob)


def category_probabilities(r, beta, sigma):
    """Unclamped ``P(j | r)`` for every category; adds a trailing axis of length p.

    ``beta`` may carry leading axes that broadcast against ``r`` (one boundary
    set per respondent, say) and ``sigma`` must broadcast against ``r``.
    """
    r = np.asarray(r, dtype=float)
    beta = np.asarray(beta, dtype=float)
    ext = beta.copy()
    ext[..., 0] = -np.inf
    ext[..., -1] = np.inf
    sigma = np.asarray(sigma, dtype=float)[..., None]
    z = (ext - r[..., None]) / sigma
    return norm_cdf_diff(z[..., 1:], z[..., :-1])


def cross_entropy_loss(X: OrdinalMatrix, R, spec: BoundarySpec) -> float:
    """Negative log-likelihood summed over observed cells."""
    r = _as_matrix(R)
    if r.shape != X.shape:
        raise InvalidParameterError(f"reconstruction shape {r.shape} does not match data {X.shape}")
    if spec.p != X.p:
        raise InvalidParameterError(f"spec has p={spec.p} but data has p={X.p}")
    g = spec.group_index(X.n_respondents)
    beta = np.atleast_2d(spec.beta)[g]  # (N, p+1)
    sigma = np.atleast_1d(spec.sigma)[g]  # (N,)
    codes = np.where(X.mask, X.values - 1, 0)
    ext = beta.copy()
    ext[:, 0] = -np.inf
    ext[:, -1] = np.inf
    upper = ext[np.arange(X.n_respondents)[None, :], codes + 1]
    lower = ext[np.arange(X.n_respondents)[None, :], codes]
    prob = norm_cdf_diff((upper - r) / sigma, (lower - r) / sigma)
    prob = np.clip(prob, PROB_FLOOR, 1.0)
    return float(-np.sum(np.log(prob[X.mask])))


def least_squares_loss(target, R, mask=None) -> float:
    target = np.asarray(target, dtype=float)
    r = _as_matrix(R)
    if target.shape != r.shape:
        raise InvalidParameterError(f"shape mismatch: {target.shape} vs {r.shape}")
    diff = target - r
    if mask is not None:
        diff = np.where(mask, diff, 0.0)
    return float(np.sum(diff * diff))


def sigmoid(x):
    return expit(x)

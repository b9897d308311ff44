"""Losses and their analytic gradients with respect to the free parameters.

Parameters travel as a dict of arrays:

    C      (N, K)  free archetype-composition matrix
    S      (K, N)  free respondent-weight matrix
    b      (G, p)  free boundary logits
    c1     (G,)    free boundary scale
    c2     (G,)    boundary offset
    sigma  (G,)    free noise scale

G is 1 for a global boundary set and N for per-subject sets. When a fixed
archetype matrix ``A`` (M, K) is supplied, ``C`` is ignored and only the
remaining entries receive gradients.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import PROB_FLOOR, column_softmax, norm_cdf_diff, norm_pdf, sigmoid, softplus, unit_boundaries


@dataclass
class OrdinalData:
    """Precomputed integer views of an ordinal matrix."""

    codes: np.ndarray  # observed categories, 0-based, 0 where missing
    lo: np.ndarray
    hi: np.ndarray
    mask: np.ndarray
    p: int
    groups: np.ndarray  # (N,) group index per respondent
    n_groups: int
    # flat indices into (G, p+1) boundary and (G, p) midpoint arrays
    upper_idx: np.ndarray
    lower_idx: np.ndarray
    lo_idx: np.ndarray
    hi_idx: np.ndarray

    @classmethod
    def build(cls, X, per_subject):
        n, p = X.n_respondents, X.p
        lo, hi = X.fill_codes()
        groups = np.arange(n) if per_subject else np.zeros(n, dtype=np.int64)
        codes = np.where(X.mask, X.values - 1, 0)
        return cls(
            codes=codes,
            lo=lo,
            hi=hi,
            mask=X.mask,
            p=p,
            groups=groups,
            n_groups=n if per_subject else 1,
            upper_idx=(groups * (p + 1))[None, :] + codes + 1,
            lower_idx=(groups * (p + 1))[None, :] + codes,
            lo_idx=(groups * p)[None, :] + lo,
            hi_idx=(groups * p)[None, :] + hi,
        )


def _softmax_backward(y, grad_y):
    return y * (grad_y - np.sum(y * grad_y, axis=0, keepdims=True))


def boundary_forward(params):
    b = unit_boundaries(params["b"])  # (G, p+1)
    scale = softplus(params["c1"])
    beta = scale[:, None] * b + params["c2"][:, None]
    alpha = 0.5 * (beta[:, 1:] + beta[:, :-1])
    sigma = softplus(params["sigma"])
    return b, beta, alpha, sigma


def _boundary_backward(params, b, grad_beta):
    """Chain a (G, p+1) boundary gradient back to b, c1, c2."""
    grad_c2 = grad_beta.sum(axis=1)
    grad_c1 = sigmoid(params["c1"]) * np.sum(grad_beta * b, axis=1)
    grad_bvec = softplus(params["c1"])[:, None] * grad_beta
    # b_l = sum_{j<=l} q_j  =>  dL/dq_j = sum_{l>=j} dL/db_l
    grad_q = np.cumsum(grad_bvec[:, :0:-1], axis=1)[:, ::-1]
    logits = params["b"] - params["b"].max(axis=1, keepdims=True)
    q = np.exp(logits)
    q /= q.sum(axis=1, keepdims=True)
    grad_b = q * (grad_q - np.sum(q * grad_q, axis=1, keepdims=True))
    return grad_b, grad_c1, grad_c2


def ordinal_loss(params, data: OrdinalData, archetypes=None, grad=True):
    """Cross-entropy loss (and gradients) of the ordinal likelihood model."""
    p, g = data.p, data.groups
    b, beta, alpha, sigma = boundary_forward(params)
    S = column_softmax(params["S"])

    if archetypes is None:
        C = column_softmax(params["C"])
        flat_alpha = alpha.ravel()
        X_tilde = 0.5 * (flat_alpha[data.lo_idx] + flat_alpha[data.hi_idx])
        A = X_tilde @ C
    else:
        A = archetypes
    R = A @ S

    ext = beta.copy()
    ext[:, 0] = -np.inf
    ext[:, -1] = np.inf
    ext = ext.ravel()
    sig_n = sigma[g]
    zu = (ext[data.upper_idx] - R) / sig_n
    zl = (ext[data.lower_idx] - R) / sig_n
    prob = norm_cdf_diff(zu, zl)
    active = data.mask & (prob > PROB_FLOOR)
    prob_c = np.clip(prob, PROB_FLOOR, 1.0)
    loss = float(-np.sum(np.log(prob_c[data.mask])))
    if not grad:
        return loss, None

    w = np.where(active, 1.0 / prob_c, 0.0) / sig_n
    phi_u = norm_pdf(zu)
    phi_l = norm_pdf(zl)
    zphi_u = np.where(np.isfinite(zu), zu, 0.0) * phi_u
    zphi_l = np.where(np.isfinite(zl), zl, 0.0) * phi_l

    grad_R = w * (phi_u - phi_l)
    grad_sig_entry = w * (zphi_u - zphi_l)
    grad_sigma = np.bincount(g, weights=grad_sig_entry.sum(axis=0), minlength=data.n_groups)

    width = p + 1
    grad_beta = np.bincount(data.upper_idx.ravel(), weights=(-w * phi_u).ravel(), minlength=data.n_groups * width)
    grad_beta += np.bincount(data.lower_idx.ravel(), weights=(w * phi_l).ravel(), minlength=data.n_groups * width)
    grad_beta = grad_beta.reshape(data.n_groups, width)

    grads = {"S": _softmax_backward(S, A.T @ grad_R)}
    if archetypes is None:
        grad_A = grad_R @ S.T
        grads["C"] = _softmax_backward(C, X_tilde.T @ grad_A)
        grad_Xt = 0.5 * (grad_A @ C.T)
        grad_alpha = np.bincount(data.lo_idx.ravel(), weights=grad_Xt.ravel(), minlength=data.n_groups * p)
        grad_alpha += np.bincount(data.hi_idx.ravel(), weights=grad_Xt.ravel(), minlength=data.n_groups * p)
        grad_alpha = grad_alpha.reshape(data.n_groups, p)
        grad_beta[:, 1:] += 0.5 * grad_alpha
        grad_beta[:, :-1] += 0.5 * grad_alpha

    grads["b"], grads["c1"], grads["c2"] = _boundary_backward(params, b, grad_beta)
    grads["sigma"] = sigmoid(params["sigma"]) * grad_sigma
    return loss, grads


def least_squares(params, target, mask, archetypes=None, source=None, grad=True):
    """Masked squared error of ``source @ C @ S`` (or ``archetypes @ S``) to ``target``.

    ``source`` defaults to ``target``; missing cells of both must already be
    filled with finite values.
    """
    S = column_softmax(params["S"])
    if archetypes is None:
        C = column_softmax(params["C"])
        X = target if source is None else source
        A = X @ C
    else:
        A = archetypes
    R = A @ S
    resid = np.where(mask, target - R, 0.0)
    loss = float(np.sum(resid * resid))
    if not grad:
        return loss, None
    grad_R = -2.0 * resid
    grads = {"S": _softmax_backward(S, A.T @ grad_R)}
    if archetypes is None:
        grads["C"] = _softmax_backward(C, X.T @ (grad_R @ S.T))
    return loss, grads

"""Finite-difference oracle for the ordinal losses.

The loss is evaluated through the public core functions (map, reconstruct,
cross-entropy), so it shares no code with the analytic gradient under test.
"""

from __future__ import annotations

import numpy as np

from ordinal_aa._objective import OrdinalData, ordinal_loss
from ordinal_aa.core import BoundarySpec, OrdinalMatrix, SimplexFactor, cross_entropy_loss, map_ordinal, reconstruct

KEYS = ("C", "S", "b", "c1", "c2", "sigma")
FLOOR = 1e-5


def reference_loss(params, X, per_subject):
    spec = BoundarySpec(params["b"], params["c1"], params["c2"], params["sigma"], per_subject=per_subject)
    R = reconstruct(map_ordinal(X, spec), SimplexFactor(params["C"]), SimplexFactor(params["S"]))
    return cross_entropy_loss(X, R, spec)


def central_differences(params, X, per_subject, step=1e-5):
    out = {}
    for key in KEYS:
        base = np.array(params[key], dtype=float)
        g = np.zeros_like(base)
        for idx in np.ndindex(base.shape):
            hi, lo = dict(params), dict(params)
            hi[key] = base.copy()
            lo[key] = base.copy()
            hi[key][idx] += step
            lo[key][idx] -= step
            g[idx] = (reference_loss(hi, X, per_subject) - reference_loss(lo, X, per_subject)) / (2 * step)
        out[key] = g
    return out


def random_instance(seed, M=4, N=5, K=2, p=3, per_subject=False, missing=0.0):
    rng = np.random.default_rng(seed)
    values = rng.integers(1, p + 1, size=(M, N))
    mask = rng.random((M, N)) >= missing
    X = OrdinalMatrix(values, p, mask)
    G = N if per_subject else 1
    params = {
        "C": rng.normal(size=(N, K)),
        "S": rng.normal(size=(K, N)),
        "b": rng.normal(scale=0.5, size=(G, p)),
        "c1": rng.normal(size=G),
        "c2": rng.normal(size=G),
        # keep sigma away from zero so the difference quotient is well conditioned
        "sigma": rng.uniform(-0.5, 1.0, size=G),
    }
    return X, params


def worst_relative_error(seed, per_subject, **kw):
    """Largest per-block relative error ``|g - g_fd| / max(|g|, |g_fd|, floor)``.

    The floor keeps blocks whose true gradient is zero (the global offset is
    a pure gauge) from dividing rounding noise by rounding noise.
    """
    X, params = random_instance(seed, per_subject=per_subject, **kw)
    _, analytic = ordinal_loss(params, OrdinalData.build(X, per_subject))
    numeric = central_differences(params, X, per_subject)
    worst = 0.0
    for key in KEYS:
        a, f = analytic[key].ravel(), numeric[key].ravel()
        scale = max(np.linalg.norm(a), np.linalg.norm(f), FLOOR)
        worst = max(worst, float(np.linalg.norm(a - f) / scale))
    return worst

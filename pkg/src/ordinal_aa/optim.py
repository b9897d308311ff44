"""AMSGrad optimizer over a dict of numpy parameters."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import InvalidParameterError


@dataclass
class OptimizerState:
    """First/second moment accumulators keyed by parameter name."""

    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    v_max: dict = field(default_factory=dict)


def amsgrad_step(params, grads, state: OptimizerState, lr):
    """Apply one AMSGrad update and return the new parameter dict.

    Moments are bias corrected; the denominator uses the running elementwise
    maximum of the second moment. ``state`` is advanced in place. Non-finite
    gradients are not intercepted: they propagate into the parameters and
    surface as a non-finite loss on the next evaluation.
    """
    if lr <= 0:
        raise InvalidParameterError(f"learning rate must be positive, got {lr}")
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    step_size = lr / (1.0 - b1**t)
    root_bc2 = np.sqrt(1.0 - b2**t)

    updated = dict(params)
    for name, g in grads.items():
        if name not in state.m:
            state.m[name] = np.zeros_like(g)
            state.v[name] = np.zeros_like(g)
            state.v_max[name] = np.zeros_like(g)
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        np.maximum(state.v_max[name], v, out=state.v_max[name])
        denom = np.sqrt(state.v_max[name]) / root_bc2 + state.eps
        updated[name] = params[name] - step_size * m / denom
    return updated

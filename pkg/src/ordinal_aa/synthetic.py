"""Ground-truth generator for ordinal archetypal data.

Draw order from ``numpy.random.default_rng(seed)`` is fixed and part of the
contract (tests regenerate datasets from it):

1. archetype generators ``A`` of shape (M, K), uniform on [0, 1]
2. weights ``S`` of shape (K, N), one Dirichlet(dirichlet_alpha) draw per respondent
3. latent noise of shape (M, N), normal with scale ``sigma_gt``
4. with response bias only: boundary gaps of shape (N, p), one
   Dirichlet(bias_spread) draw per respondent
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from .core import OrdinalMatrix
from .exceptions import ConfigurationError

logger = logging.getLogger(__name__)

MAX_RESEEDS = 10


@dataclass(frozen=True)
class SynthConfig:
    N: int = 1000
    M: int = 20
    K_true: int = 3
    p: int = 5
    response_bias: bool = False
    sigma_gt: float = 0.1
    dirichlet_alpha: float = 0.5
    bias_spread: float = 2.0
    seed: int = 0
    require_all_levels: bool = True

    def __post_init__(self):
        if min(self.N, self.M, self.K_true) < 1:
            raise ConfigurationError("N, M and K_true must be positive")
        if self.p < 2:
            raise ConfigurationError("p must be >= 2")
        if self.K_true > self.N:
            raise ConfigurationError("K_true cannot exceed N")
        if self.sigma_gt < 0 or self.dirichlet_alpha <= 0 or self.bias_spread <= 0:
            raise ConfigurationError("sigma_gt must be >= 0; dirichlet_alpha and bias_spread > 0")


@dataclass(frozen=True)
class SynthDataset:
    X: OrdinalMatrix
    S_true: np.ndarray
    A_true: np.ndarray
    boundaries_true: np.ndarray  # (p+1,) or (N, p+1)
    sigma_gt: float
    config: SynthConfig
    reseeds: int = 0

    @property
    def alpha_true(self) -> np.ndarray:
        b = self.boundaries_true
        return 0.5 * (b[..., 1:] + b[..., :-1])


def categorize(latent, boundaries):
    """Category 1..p of each latent value.

    ``boundaries`` is (p+1,) or (N, p+1) with the second form applied
    column-wise; values below the first or above the last boundary fall into
    the extreme categories.
    """
    boundaries = np.asarray(boundaries, dtype=float)
    if boundaries.ndim == 1:
        return 1 + np.searchsorted(boundaries[1:-1], latent, side="right")
    interior = boundaries[:, 1:-1]  # (N, p-1)
    return 1 + np.sum(latent[:, :, None] >= interior[None, :, :], axis=2)


def _draw(cfg: SynthConfig, seed, archetypes=None):
    rng = np.random.default_rng(seed)
    A = rng.uniform(0.0, 1.0, size=(cfg.M, cfg.K_true))
    if archetypes is not None:
        A = np.broadcast_to(np.asarray(archetypes, dtype=float), (cfg.M, cfg.K_true)).copy()
    S = rng.dirichlet(np.full(cfg.K_true, cfg.dirichlet_alpha), size=cfg.N).T
    latent = A @ S + rng.normal(0.0, 1.0, size=(cfg.M, cfg.N)) * cfg.sigma_gt
    if cfg.response_bias:
        gaps = rng.dirichlet(np.full(cfg.p, cfg.bias_spread), size=cfg.N)
        boundaries = np.concatenate([np.zeros((cfg.N, 1)), np.cumsum(gaps, axis=1)], axis=1)
        boundaries[:, -1] = 1.0
    else:
        boundaries = np.arange(cfg.p + 1) / cfg.p
    values = categorize(latent, boundaries)
    return values, S, A, boundaries


def generate(cfg: SynthConfig, archetypes=None) -> SynthDataset:
    """Sample a dataset; ``archetypes`` optionally overrides the uniform draw of ``A``.

    If ``cfg.require_all_levels`` is set and some level never occurs, the
    draw is repeated with seeds ``seed + 1, seed + 2, ...`` (at most
    ``MAX_RESEEDS`` times) and the number of re-draws is recorded.
    """
    seed = cfg.seed
    for reseeds in range(MAX_RESEEDS + 1):
        values, S, A, boundaries = _draw(cfg, seed + reseeds, archetypes)
        if not cfg.require_all_levels or np.unique(values).size == cfg.p:
            break
    else:
        logger.warning("not every level occurs after %d re-draws; keeping the original draw", MAX_RESEEDS)
        reseeds = 0
        values, S, A, boundaries = _draw(cfg, seed, archetypes)
    if reseeds:
        logger.info("re-drew synthetic data %d time(s) to cover all %d levels", reseeds, cfg.p)
    X = OrdinalMatrix(values, cfg.p, np.ones_like(values, dtype=bool))
    return SynthDataset(X, S, A, boundaries, cfg.sigma_gt, cfg, reseeds)


def large_variant(cfg: SynthConfig) -> SynthDataset:
    """Same generator with 100 questions; draws are independent of the M=20 data."""
    return generate(replace(cfg, M=100))

"""Synthetic classifier outputs with known calibration.

Each example gets class probabilities p ~ Dirichlet(concentration), a label
y ~ Categorical(p), and logits ``distortion * log(p)``. With distortion 1 the
max-softmax confidence is calibrated by construction; larger distortions make
it overconfident.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import InvalidInputError, LabeledLogits
from .transform import make_rng


@dataclass(frozen=True)
class SynthConfig:
    n: int
    c: int = 10
    concentration: float = 0.5
    distortion: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise InvalidInputError(f"N must be >= 1, got {self.n}")
        if self.c < 2:
            raise InvalidInputError(f"C must be >= 2, got {self.c}")
        if not self.concentration > 0:
            raise InvalidInputError(f"concentration must be positive, got {self.concentration}")
        if not self.distortion > 0:
            raise InvalidInputError(f"distortion must be positive, got {self.distortion}")


def _log_dirichlet(rng, alpha: float, shape) -> np.ndarray:
    # log Gamma(alpha) = log Gamma(alpha + 1) + log(U) / alpha; never underflows to -inf
    log_g = np.log(rng.standard_gamma(alpha + 1.0, size=shape)) + np.log1p(-rng.random(shape)) / alpha
    top = log_g.max(axis=1, keepdims=True)
    return log_g - (top + np.log(np.exp(log_g - top).sum(axis=1, keepdims=True)))


def sample(cfg: SynthConfig) -> tuple[np.ndarray, np.ndarray]:
    """(log-probabilities, labels) drawn from the generator."""
    rng = make_rng(cfg.seed)
    log_p = _log_dirichlet(rng, cfg.concentration, (cfg.n, cfg.c))
    cdf = np.cumsum(np.exp(log_p), axis=1)
    u = rng.random(cfg.n) * cdf[:, -1]
    labels = np.minimum((cdf <= u[:, None]).sum(axis=1), cfg.c - 1)
    return log_p, labels


def generate(cfg: SynthConfig) -> LabeledLogits:
    log_p, labels = sample(cfg)
    return LabeledLogits(cfg.distortion * log_p, labels)


def generate_split(cfg: SynthConfig) -> tuple[LabeledLogits, LabeledLogits]:
    """Validation and test sets of ``cfg.n`` examples each from one draw of 2N."""
    log_p, labels = sample(SynthConfig(2 * cfg.n, cfg.c, cfg.concentration, cfg.distortion, cfg.seed))
    logits = cfg.distortion * log_p
    return (
        LabeledLogits(logits[: cfg.n], labels[: cfg.n]),
        LabeledLogits(logits[cfg.n :], labels[cfg.n :]),
    )

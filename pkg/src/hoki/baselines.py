"""Temperature scaling baseline: softmax(z / T) with T fit by minimizing validation NLL."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import InvalidInputError, LabeledLogits, _as_finite_matrix, max_softmax

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class TemperatureModel:
    T: float

    def __post_init__(self):
        if not (self.T > 0 and math.isfinite(self.T)):
            raise InvalidInputError(f"temperature must be positive and finite, got {self.T}")
        object.__setattr__(self, "T", float(self.T))

    def predict(self, logits) -> np.ndarray:
        return max_softmax(_as_finite_matrix(logits, "logits") / self.T)


def nll(logits, labels, T: float) -> float:
    """Mean negative log-likelihood of softmax(logits / T) at the true labels."""
    z = np.asarray(logits, dtype=np.float64) / T
    zmax = z.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(z - zmax).sum(axis=1)) + zmax[:, 0]
    return float(np.mean(log_norm - z[np.arange(z.shape[0]), labels]))


def golden_section(f, lo: float, hi: float, tol: float = 1e-6) -> float:
    """Minimize a unimodal scalar function on [lo, hi] to bracket width ``tol``."""
    a, b = lo, hi
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
    return (a + b) / 2.0


def temperature_fit(
    val: LabeledLogits, bracket: tuple[float, float] = (1e-2, 1e2), tol: float = 1e-6
) -> TemperatureModel:
    """Golden-section search over log T within ``bracket``."""
    if not isinstance(val, LabeledLogits) or val.n < 1:
        raise InvalidInputError("validation set must be a non-empty LabeledLogits")
    logits, labels = val.logits, val.labels
    log_t = golden_section(
        lambda s: nll(logits, labels, math.exp(s)), math.log(bracket[0]), math.log(bracket[1]), tol
    )
    return TemperatureModel(math.exp(log_t))


def temperature_apply(model: TemperatureModel, row) -> float:
    row = _as_finite_matrix(row, "row")
    return float(model.predict(row[None, :])[0])

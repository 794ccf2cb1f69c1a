"""Domain types and the logit -> (label, confidence) primitives.

Every other module goes through the vectorized helpers here
(``predicted_labels``, ``max_softmax``, ``bin_indices``) so that scalar and
batch code paths produce bit-identical floats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

DEFAULT_BINS = 15


class InvalidInputError(ValueError):
    """Raised when an argument violates an operation's preconditions."""


def _as_finite_matrix(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains non-finite values")
    return arr


@dataclass(frozen=True, eq=False)
class LabeledLogits:
    """An N x C logit matrix with N ground-truth labels.

    The arrays are copied and marked read-only on construction.
    """

    logits: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        logits = np.array(self.logits, dtype=np.float64)
        labels = np.asarray(self.labels)
        if logits.ndim != 2:
            raise InvalidInputError(f"logits must be 2-D, got shape {logits.shape}")
        n, c = logits.shape
        if n < 1:
            raise InvalidInputError("dataset must contain at least one example")
        if c < 2:
            raise InvalidInputError(f"need at least 2 classes, got {c}")
        if not np.all(np.isfinite(logits)):
            raise InvalidInputError("logits contain non-finite values")
        if labels.shape != (n,):
            raise InvalidInputError(f"expected {n} labels, got shape {labels.shape}")
        if labels.dtype.kind == "f":
            if not np.all(labels == np.round(labels)):
                raise InvalidInputError("labels must be integers")
        elif labels.dtype.kind not in "iu":
            raise InvalidInputError("labels must be integers")
        labels = labels.astype(np.int64)
        if labels.min() < 0 or labels.max() >= c:
            raise InvalidInputError(f"labels must lie in [0, {c})")
        logits.setflags(write=False)
        labels = labels.copy()
        labels.setflags(write=False)
        object.__setattr__(self, "logits", logits)
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.logits.shape[0]

    @property
    def c(self) -> int:
        return self.logits.shape[1]

    def predictions(self) -> np.ndarray:
        return predicted_labels(self.logits)

    def correct(self) -> np.ndarray:
        """Boolean mask of examples whose argmax matches the label."""
        return self.predictions() == self.labels

    def accuracy(self) -> float:
        return float(np.mean(self.correct()))

    def __eq__(self, other):
        if not isinstance(other, LabeledLogits):
            return NotImplemented
        return np.array_equal(self.logits, other.logits) and np.array_equal(
            self.labels, other.labels
        )

    def __len__(self):
        return self.n


@dataclass(frozen=True)
class BinPartition:
    """Equal-width partition of [0, 1] into ``n_bins`` bins.

    Bin j covers [j/J, (j+1)/J); the last bin is closed at 1.
    """

    n_bins: int = DEFAULT_BINS

    def __post_init__(self):
        if int(self.n_bins) != self.n_bins or self.n_bins < 1:
            raise InvalidInputError(f"bin count must be a positive integer, got {self.n_bins}")

    def edges(self) -> np.ndarray:
        return np.arange(self.n_bins + 1, dtype=np.float64) / self.n_bins

    def index(self, confidence: float) -> int:
        return bin_index(confidence, self)

    def indices(self, confidences) -> np.ndarray:
        return bin_indices(confidences, self.n_bins)


class Prediction(NamedTuple):
    label: int
    confidence: float


def predicted_labels(logits) -> np.ndarray:
    """Row-wise argmax; ties go to the lowest class index."""
    logits = _as_finite_matrix(logits, "logits")
    return np.argmax(logits, axis=-1)


def max_softmax(logits) -> np.ndarray:
    """Row-wise maximum softmax probability, computed as 1 / sum(exp(z - max))."""
    logits = _as_finite_matrix(logits, "logits")
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return 1.0 / np.exp(shifted).sum(axis=-1)


def bin_indices(confidences, n_bins: int) -> np.ndarray:
    """Map confidences in [0, 1] to bin indices ``min(floor(p * J), J - 1)``."""
    conf = np.asarray(confidences, dtype=np.float64)
    if np.any(~(conf >= 0.0) | ~(conf <= 1.0)):
        raise InvalidInputError("confidences must lie in [0, 1]")
    idx = np.floor(conf * n_bins).astype(np.int64)
    return np.minimum(idx, n_bins - 1)


def _check_row(row) -> np.ndarray:
    row = _as_finite_matrix(row, "row")
    if row.ndim != 1 or row.size < 2:
        raise InvalidInputError("row must be a 1-D vector with at least 2 entries")
    return row


def argmax_label(row) -> int:
    return int(predicted_labels(_check_row(row)[None, :])[0])


def softmax_confidence(row) -> float:
    return float(max_softmax(_check_row(row)[None, :])[0])


def predict_uncalibrated(row) -> Prediction:
    return Prediction(argmax_label(row), softmax_confidence(row))


def bin_index(confidence: float, partition: BinPartition) -> int:
    if not (0.0 <= confidence <= 1.0) or math.isnan(confidence):
        raise InvalidInputError(f"confidence {confidence!r} outside [0, 1]")
    return int(bin_indices(np.array([confidence]), partition.n_bins)[0])

"""Binned calibration statistics: per-bin reliability report, ECE, confidence spread."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .core import BinPartition, InvalidInputError, bin_indices

BIN_CSV_HEADER = (
    "index",
    "lower",
    "upper",
    "count",
    "weight",
    "accuracy",
    "mean_confidence",
    "gap",
)


@dataclass(frozen=True, eq=False)
class BinReport:
    """Per-bin statistics over an equal-width confidence partition.

    Empty bins carry count 0 and zeros everywhere else, so they drop out of
    the ECE sum.
    """

    partition: BinPartition
    count: np.ndarray
    weight: np.ndarray
    accuracy: np.ndarray
    mean_confidence: np.ndarray
    gap: np.ndarray

    @property
    def n(self) -> int:
        return int(self.count.sum())

    def ece(self) -> float:
        total = 0.0
        for w, g in zip(self.weight.tolist(), self.gap.tolist()):
            total += w * abs(g)
        return total

    def nonempty(self) -> np.ndarray:
        return np.flatnonzero(self.count)

    def rows(self):
        edges = self.partition.edges()
        for j in range(self.partition.n_bins):
            yield (
                j,
                float(edges[j]),
                float(edges[j + 1]),
                int(self.count[j]),
                float(self.weight[j]),
                float(self.accuracy[j]),
                float(self.mean_confidence[j]),
                float(self.gap[j]),
            )

    def to_csv(self, fh=None) -> str | None:
        """Write one row per bin; returns the text when ``fh`` is None."""
        buf = io.StringIO() if fh is None else fh
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(BIN_CSV_HEADER)
        for row in self.rows():
            writer.writerow([row[0], *(repr(v) if isinstance(v, float) else v for v in row[1:])])
        return buf.getvalue() if fh is None else None


def _validate(confidences, correct):
    conf = np.asarray(confidences, dtype=np.float64).ravel()
    corr = np.asarray(correct).ravel()
    if conf.shape != corr.shape:
        raise InvalidInputError(
            f"length mismatch: {conf.size} confidences vs {corr.size} correctness flags"
        )
    if conf.size == 0:
        raise InvalidInputError("need at least one example")
    return conf, corr.astype(bool)


def bin_report(confidences, correct, partition: BinPartition | None = None) -> BinReport:
    partition = partition or BinPartition()
    conf, corr = _validate(confidences, correct)
    J = partition.n_bins
    idx = bin_indices(conf, J)

    # bincount accumulates sequentially in example order within each bin
    count = np.bincount(idx, minlength=J)
    hits = np.bincount(idx, weights=corr.astype(np.float64), minlength=J)
    # offsets from each bin's first member, so a constant bin averages exactly
    first = np.zeros(J)
    used, first_pos = np.unique(idx, return_index=True)
    first[used] = conf[first_pos]
    offset_sum = np.bincount(idx, weights=conf - first[idx], minlength=J)

    filled = count > 0
    accuracy = np.zeros(J)
    mean_conf = np.zeros(J)
    accuracy[filled] = hits[filled] / count[filled]
    mean_conf[filled] = first[filled] + offset_sum[filled] / count[filled]
    gap = np.where(filled, accuracy - mean_conf, 0.0)
    weight = count / conf.size
    return BinReport(partition, count, weight, accuracy, mean_conf, gap)


def ece(confidences, correct, partition: BinPartition | None = None) -> float:
    """Expected calibration error: sum_j (|I_j| / N) * |acc_j - conf_j|."""
    return bin_report(confidences, correct, partition).ece()


def confidence_stddev(confidences) -> float:
    """Population standard deviation of the confidences."""
    conf = np.asarray(confidences, dtype=np.float64).ravel()
    if conf.size == 0:
        raise InvalidInputError("need at least one confidence")
    # centre on one sample first so constant input gives exactly zero
    return float(np.std(conf - conf[0]))

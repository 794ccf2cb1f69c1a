"""Iterative binned calibrator driven by label-switch statistics.

Fitting keeps one confidence per validation example. Each round the examples
are binned by their current confidence; inside bin j we estimate

    alpha_j = accuracy over (example, transform) pairs that keep the label
    beta_j  = accuracy over pairs that switch the label

and move every member to ``(alpha_j - beta_j) * gamma_n + beta_j``, where
``gamma_n`` is the example's fraction of label-preserving transforms. Rounds
stop once the bin assignment no longer changes. Prediction replays the stored
per-round (alpha, beta) table starting from the same initial confidence.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import (
    BinPartition,
    InvalidInputError,
    LabeledLogits,
    _as_finite_matrix,
    bin_indices,
    max_softmax,
    predicted_labels,
)
from .transform import (
    SwitchMatrix,
    TransformSet,
    gamma_from_counts,
    preserved_matrix,
    switch_matrix,
)

INIT_ACCURACY = "validation-accuracy"
INIT_CONFIDENCE = "uncalibrated-confidence"
INIT_MODES = (INIT_ACCURACY, INIT_CONFIDENCE)
DEFAULT_K_MAX = 100


@dataclass(frozen=True, eq=False)
class CalibrationModel:
    """Everything prediction needs: per-round bin parameters, p_hat and the transforms.

    ``params[k, j]`` holds ``(alpha, beta)`` for round ``k`` and bin ``j``.
    """

    n_bins: int
    p_hat: float
    params: np.ndarray
    transforms: TransformSet
    init_mode: str = INIT_ACCURACY

    def __post_init__(self):
        params = np.array(self.params, dtype=np.float64)
        if params.ndim != 3 or params.shape[0] < 1 or params.shape[1:] != (self.n_bins, 2):
            raise InvalidInputError(
                f"params must have shape (K*, {self.n_bins}, 2), got {params.shape}"
            )
        if np.any(~(params >= 0.0) | ~(params <= 1.0)):
            raise InvalidInputError("alpha/beta parameters must lie in [0, 1]")
        if not 0.0 <= self.p_hat <= 1.0:
            raise InvalidInputError(f"p_hat must lie in [0, 1], got {self.p_hat}")
        if self.init_mode not in INIT_MODES:
            raise InvalidInputError(f"unknown init mode {self.init_mode!r}")
        params.setflags(write=False)
        object.__setattr__(self, "params", params)
        object.__setattr__(self, "p_hat", float(self.p_hat))

    @property
    def k_star(self) -> int:
        return self.params.shape[0]

    @property
    def m(self) -> int:
        return self.transforms.m

    @property
    def c(self) -> int:
        return self.transforms.c

    @property
    def alpha(self) -> np.ndarray:
        return self.params[:, :, 0]

    @property
    def beta(self) -> np.ndarray:
        return self.params[:, :, 1]

    def predict(self, logits) -> np.ndarray:
        return predict_batch(logits, self)

    def __eq__(self, other):
        if not isinstance(other, CalibrationModel):
            return NotImplemented
        return (
            self.n_bins == other.n_bins
            and self.p_hat == other.p_hat
            and self.init_mode == other.init_mode
            and np.array_equal(self.params, other.params)
            and self.transforms == other.transforms
        )


@dataclass
class FitDiagnostics:
    converged: bool
    k_star: int
    partition_changes: list[int] = field(default_factory=list)
    residuals: np.ndarray | None = None
    confidences: np.ndarray | None = None
    gamma: np.ndarray | None = None


def _member_counts(members, sm: SwitchMatrix, correct):
    correct = np.asarray(correct, dtype=bool)
    if correct.shape != (sm.n,):
        raise InvalidInputError("correctness flags must match the switch matrix rows")
    rows = sm.preserved[members]
    kept = rows.sum(axis=1, dtype=np.int64)
    hit = correct[members]
    return kept, hit, sm.m


def estimate_alpha(members, sm: SwitchMatrix, correct) -> float:
    """Accuracy over label-preserving (example, transform) pairs of ``members``.

    Raises ZeroDivisionError when no member pair preserves the label.
    """
    kept, hit, _ = _member_counts(members, sm, correct)
    den = int(kept.sum())
    if den == 0:
        raise ZeroDivisionError("no label-preserving pairs in bin")
    return int(kept[hit].sum()) / den


def estimate_beta(members, sm: SwitchMatrix, correct) -> float:
    """Accuracy over label-switching pairs; ZeroDivisionError when there are none."""
    kept, hit, m = _member_counts(members, sm, correct)
    switched = m - kept
    den = int(switched.sum())
    if den == 0:
        raise ZeroDivisionError("no label-switching pairs in bin")
    return int(switched[hit].sum()) / den


def bin_parameters(bins, correct, kept, m: int, n_bins: int, fallback: float) -> np.ndarray:
    """(alpha, beta) per bin from per-example preserved counts.

    A bin whose pairs all keep or all switch the label gets alpha = beta = bin
    accuracy; an empty bin gets ``fallback`` for both.
    """
    hit = np.asarray(correct, dtype=np.float64)
    kept = np.asarray(kept, dtype=np.float64)
    # every weight is an integer, so bincount sums are exact
    size = np.bincount(bins, minlength=n_bins)
    hits = np.bincount(bins, weights=hit, minlength=n_bins)
    kept_sum = np.bincount(bins, weights=kept, minlength=n_bins)
    kept_hit = np.bincount(bins, weights=kept * hit, minlength=n_bins)
    pairs = size * float(m)
    switched_sum = pairs - kept_sum
    switched_hit = hits * m - kept_hit

    out = np.empty((n_bins, 2))
    out[:] = fallback
    filled = size > 0
    degenerate = filled & ((kept_sum == 0) | (kept_sum == pairs))
    regular = filled & ~degenerate
    bin_acc = hits[degenerate] / size[degenerate]
    out[degenerate, 0] = bin_acc
    out[degenerate, 1] = bin_acc
    out[regular, 0] = kept_hit[regular] / kept_sum[regular]
    out[regular, 1] = switched_hit[regular] / switched_sum[regular]
    return out


def _step(p_bins, params_k, gamma):
    a = params_k[p_bins, 0]
    b = params_k[p_bins, 1]
    return (a - b) * gamma + b


def fit(
    val: LabeledLogits,
    ts: TransformSet,
    partition: BinPartition | None = None,
    k_max: int = DEFAULT_K_MAX,
    init_mode: str = INIT_ACCURACY,
    sm: SwitchMatrix | None = None,
) -> tuple[CalibrationModel, FitDiagnostics]:
    """Fit the calibrator on a validation set.

    Parameters
    ----------
    val : LabeledLogits
        Validation logits and labels.
    ts : TransformSet
        Sampled noise vectors; the switch matrix is computed from it once.
    partition : BinPartition, optional
        Confidence bins (15 equal-width bins by default).
    k_max : int
        Maximum number of rounds.
    init_mode : str
        ``"validation-accuracy"`` starts every example at the validation
        accuracy; ``"uncalibrated-confidence"`` starts at its max-softmax.
    sm : SwitchMatrix, optional
        Precomputed switch matrix for ``(val, ts)``.

    Returns
    -------
    (CalibrationModel, FitDiagnostics)
    """
    if not isinstance(val, LabeledLogits) or val.n < 1:
        raise InvalidInputError("validation set must be a non-empty LabeledLogits")
    if ts.c != val.c:
        raise InvalidInputError(f"transform set has C={ts.c}, dataset has C={val.c}")
    if int(k_max) != k_max or k_max < 1:
        raise InvalidInputError(f"k_max must be a positive integer, got {k_max}")
    if init_mode not in INIT_MODES:
        raise InvalidInputError(f"unknown init mode {init_mode!r}")
    partition = partition or BinPartition()
    J = partition.n_bins

    correct = val.correct()
    p_hat = float(np.mean(correct))
    if sm is None:
        sm = switch_matrix(val, ts)
    elif sm.preserved.shape != (val.n, ts.m):
        raise InvalidInputError("switch matrix does not match dataset and transforms")
    kept = sm.counts()
    gamma = gamma_from_counts(kept, ts.m)

    if init_mode == INIT_ACCURACY:
        p = np.full(val.n, p_hat)
    else:
        p = max_softmax(val.logits)

    history = []
    changes = []
    prev = None
    converged = False
    for _ in range(int(k_max)):
        bins = bin_indices(p, J)
        if prev is not None:
            moved = int(np.count_nonzero(bins != prev))
            changes.append(moved)
            if moved == 0:
                converged = True
                break
        params_k = bin_parameters(bins, correct, kept, ts.m, J, p_hat)
        history.append(params_k)
        p = _step(bins, params_k, gamma)
        prev = bins
    else:
        moved = int(np.count_nonzero(bin_indices(p, J) != prev))
        changes.append(moved)
        converged = moved == 0

    model = CalibrationModel(J, p_hat, np.stack(history), ts, init_mode)
    diag = FitDiagnostics(
        converged=converged,
        k_star=model.k_star,
        partition_changes=changes,
        residuals=fixed_point_residual(p, correct, gamma, model, partition),
        confidences=p,
        gamma=gamma,
    )
    return model, diag


def _initial(logits, model: CalibrationModel) -> np.ndarray:
    if model.init_mode == INIT_ACCURACY:
        return np.full(logits.shape[0], model.p_hat)
    return max_softmax(logits)


def predict_batch(logits, model: CalibrationModel) -> np.ndarray:
    """Calibrated top-label confidence for every row of ``logits``."""
    z = _as_finite_matrix(logits, "logits")
    if z.ndim != 2 or z.shape[1] != model.c:
        raise InvalidInputError(f"expected logits with {model.c} columns, got shape {z.shape}")
    kept = preserved_matrix(z, model.transforms.noise).sum(axis=1, dtype=np.int64)
    gamma = gamma_from_counts(kept, model.m)
    p = _initial(z, model)
    for k in range(model.k_star):
        p = _step(bin_indices(p, model.n_bins), model.params[k], gamma)
    return p


def predict(x_logits, model: CalibrationModel, partition: BinPartition | None = None) -> float:
    if partition is not None and partition.n_bins != model.n_bins:
        raise InvalidInputError(
            f"partition has {partition.n_bins} bins, model was fit with {model.n_bins}"
        )
    row = _as_finite_matrix(x_logits, "x_logits")
    if row.ndim != 1:
        raise InvalidInputError("x_logits must be a 1-D vector")
    return float(predict_batch(row[None, :], model)[0])


def predict_labels(logits, model: CalibrationModel):
    """(predicted labels, calibrated confidences) for a logit matrix."""
    return predicted_labels(logits), predict_batch(logits, model)


def fixed_point_residual(
    val_confidences,
    val_correct,
    gamma,
    model: CalibrationModel,
    partition: BinPartition | None = None,
) -> np.ndarray:
    """Per-bin gap between mean confidence and alpha*mean(gamma) + beta*(1 - mean(gamma)).

    Uses the last round's parameters on the partition induced by
    ``val_confidences``. Entries for empty bins are NaN.
    """
    partition = partition or BinPartition(model.n_bins)
    p = np.asarray(val_confidences, dtype=np.float64)
    g = np.asarray(gamma, dtype=np.float64)
    if p.shape != g.shape or np.shape(val_correct) != p.shape:
        raise InvalidInputError("confidences, correctness flags and gamma must align")
    J = partition.n_bins
    bins = bin_indices(p, J)
    alpha, beta = model.params[-1, :, 0], model.params[-1, :, 1]
    out = np.full(J, np.nan)
    for j in np.unique(bins):
        members = bins == j
        g_bar = g[members].mean()
        out[j] = abs(p[members].mean() - (alpha[j] * g_bar + beta[j] * (1.0 - g_bar)))
    return out

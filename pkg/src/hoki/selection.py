"""Grid search for the noise distribution that spreads single-bin confidences the most."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .core import InvalidInputError, LabeledLogits
from .metrics import confidence_stddev
from .transform import (
    DEFAULT_TRANSFORMS,
    NoiseSpec,
    derive_seed,
    gamma_from_counts,
    preserved_matrix,
    sample_transforms,
)

TABLE_HEADER = ("index", "family", "a", "b", "alpha", "beta", "sigma")


@dataclass(frozen=True)
class GridConfig:
    """Search box and resolution. Defaults give 820 Gaussian and 820 uniform candidates."""

    mu_range: tuple[float, float] = (-20.0, 20.0)
    mu_step: float = 1.0
    sigma_max: float = 20.0
    sigma_step: float = 1.0
    uniform_range: tuple[float, float] = (-20.0, 20.0)
    uniform_step: float = 1.0
    m: int = DEFAULT_TRANSFORMS
    seed: int = 0
    families: tuple[str, ...] = ("gaussian", "uniform")

    def __post_init__(self):
        for name in ("mu_step", "sigma_step", "uniform_step"):
            step = getattr(self, name)
            if not (step > 0 and math.isfinite(step)):
                raise InvalidInputError(f"{name} must be positive, got {step}")
        if self.m < 1:
            raise InvalidInputError(f"M must be >= 1, got {self.m}")
        if not self.sigma_max > 0:
            raise InvalidInputError("sigma_max must be positive")

    @classmethod
    def with_step(cls, step: float, **kwargs) -> GridConfig:
        return cls(mu_step=step, sigma_step=step, uniform_step=step, **kwargs)


def _ladder(start: float, stop: float, step: float, include_stop: bool = True) -> list[float]:
    """start, start + step, ... up to stop; computed by index to avoid drift."""
    count = math.floor((stop - start) / step + 1e-9)
    values = [start + i * step for i in range(count + 1)]
    if not include_stop and values and math.isclose(values[-1], stop, abs_tol=1e-9):
        values.pop()
    return values


def enumerate_grid(cfg: GridConfig | None = None) -> list[NoiseSpec]:
    """Gaussian (mu, sigma) pairs then uniform (a, b) pairs, each lexicographic."""
    cfg = cfg or GridConfig()
    specs: list[NoiseSpec] = []
    if "gaussian" in cfg.families:
        lo, hi = cfg.mu_range
        sigmas = _ladder(cfg.sigma_step, cfg.sigma_max, cfg.sigma_step)
        for mu in _ladder(lo, hi, cfg.mu_step):
            for sigma in sigmas:
                specs.append(NoiseSpec.gaussian(mu, sigma))
    if "uniform" in cfg.families:
        lo, hi = cfg.uniform_range
        for a in _ladder(lo, hi, cfg.uniform_step, include_stop=False):
            for b in _ladder(a + cfg.uniform_step, hi, cfg.uniform_step):
                specs.append(NoiseSpec.uniform(a, b))
    return specs


@dataclass(frozen=True)
class CandidateScore:
    index: int
    spec: NoiseSpec
    sigma_hat: float
    alpha_hat: float
    beta_hat: float


@dataclass
class SelectionResult:
    best: NoiseSpec
    sigma_hat: float
    alpha_hat: float
    beta_hat: float
    table: list[CandidateScore] = field(default_factory=list)

    def table_csv(self, fh=None) -> str | None:
        buf = io.StringIO() if fh is None else fh
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(TABLE_HEADER)
        for row in self.table:
            writer.writerow(
                [
                    row.index,
                    row.spec.family,
                    repr(row.spec.a),
                    repr(row.spec.b),
                    repr(row.alpha_hat),
                    repr(row.beta_hat),
                    repr(row.sigma_hat),
                ]
            )
        return buf.getvalue() if fh is None else None


def single_bin_scores(kept, correct, m: int) -> tuple[float, float, float]:
    """(sigma, alpha, beta) treating the whole set as one bin."""
    kept = np.asarray(kept, dtype=np.int64)
    correct = np.asarray(correct, dtype=bool)
    kept_sum = int(kept.sum())
    pairs = kept.size * m
    if kept_sum == 0 or kept_sum == pairs:
        acc = float(np.mean(correct))
        return 0.0, acc, acc
    alpha = int(kept[correct].sum()) / kept_sum
    beta = int((m - kept)[correct].sum()) / (pairs - kept_sum)
    p = (alpha - beta) * gamma_from_counts(kept, m) + beta
    return confidence_stddev(p), alpha, beta


def score_candidate(
    val: LabeledLogits, spec: NoiseSpec, m: int, seed: int
) -> tuple[float, float, float]:
    """Sample M transforms from ``spec`` with ``seed``; return (sigma_hat, alpha_hat, beta_hat)."""
    ts = sample_transforms(spec, m, val.c, seed)
    kept = preserved_matrix(val.logits, ts.noise).sum(axis=1, dtype=np.int64)
    return single_bin_scores(kept, val.correct(), m)


def select_transform(
    val: LabeledLogits,
    cfg: GridConfig | None = None,
    specs: list[NoiseSpec] | None = None,
    progress=None,
) -> SelectionResult:
    """Score every grid candidate and keep the one with the largest spread.

    Candidate ``i`` uses seed ``derive_seed(cfg.seed, i)``; ties go to the
    earliest candidate.
    """
    cfg = cfg or GridConfig()
    specs = enumerate_grid(cfg) if specs is None else list(specs)
    if not specs:
        raise InvalidInputError("candidate grid is empty")
    table = []
    best = None
    for i, spec in enumerate(specs):
        sigma, alpha, beta = score_candidate(val, spec, cfg.m, derive_seed(cfg.seed, i))
        row = CandidateScore(i, spec, sigma, alpha, beta)
        table.append(row)
        if best is None or sigma > best.sigma_hat:
            best = row
        if progress is not None:
            progress(i + 1, len(specs))
    return SelectionResult(best.spec, best.sigma_hat, best.alpha_hat, best.beta_hat, table)

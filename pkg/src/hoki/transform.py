"""Additive logit noise: sampling fixed noise vectors and counting label switches.

A transformation is a single length-C noise vector added to every example's
logits. The same M vectors are used at fit time and at prediction time.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

# the TBB shipped in some environments is too old for numba; prefer the others
numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]

from .core import InvalidInputError, LabeledLogits, _as_finite_matrix, predicted_labels

RNG_ALGORITHM = "numpy-philox4x64"
GAUSSIAN_METHOD = "numpy-ziggurat"
UNIFORM_METHOD = "a+(b-a)*u53"

DEFAULT_TRANSFORMS = 1000
_SEED_LIMIT = 2**64


@dataclass(frozen=True)
class NoiseSpec:
    """Noise family with two parameters, named after the U(a, b) / G(mu, sigma) notation.

    For ``uniform`` noise ``a < b`` are the interval ends; for ``gaussian``
    noise ``a`` is the mean and ``b`` the standard deviation.
    """

    family: str
    a: float
    b: float

    def __post_init__(self):
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "b", float(self.b))
        if not (np.isfinite(self.a) and np.isfinite(self.b)):
            raise InvalidInputError("noise parameters must be finite")
        if self.family == "uniform":
            if not self.a < self.b:
                raise InvalidInputError(f"uniform noise needs a < b, got a={self.a}, b={self.b}")
        elif self.family == "gaussian":
            if not self.b > 0:
                raise InvalidInputError(f"gaussian noise needs sigma > 0, got {self.b}")
        else:
            raise InvalidInputError(f"unknown noise family {self.family!r}")

    @classmethod
    def uniform(cls, a: float, b: float) -> NoiseSpec:
        return cls("uniform", a, b)

    @classmethod
    def gaussian(cls, mu: float, sigma: float) -> NoiseSpec:
        return cls("gaussian", mu, sigma)

    @property
    def mu(self) -> float:
        return self.a

    @property
    def sigma(self) -> float:
        return self.b

    def to_dict(self) -> dict:
        if self.family == "uniform":
            return {"family": "uniform", "a": self.a, "b": self.b}
        return {"family": "gaussian", "mu": self.a, "sigma": self.b}

    @classmethod
    def from_dict(cls, d: dict) -> NoiseSpec:
        try:
            family = d["family"]
            if family == "uniform":
                return cls.uniform(d["a"], d["b"])
            if family == "gaussian":
                return cls.gaussian(d["mu"], d["sigma"])
        except (KeyError, TypeError) as exc:
            raise InvalidInputError(f"malformed noise spec: {d!r}") from exc
        raise InvalidInputError(f"unknown noise family {family!r}")

    def __str__(self):
        tag = "U" if self.family == "uniform" else "G"
        return f"{tag}({self.a:g}, {self.b:g})"


@dataclass(frozen=True, eq=False)
class TransformSet:
    """M sampled noise vectors (rows of ``noise``), reproducible from (spec, seed, M, C)."""

    noise: np.ndarray
    spec: NoiseSpec
    seed: int

    def __post_init__(self):
        noise = np.array(self.noise, dtype=np.float64)
        if noise.ndim != 2 or noise.shape[0] < 1:
            raise InvalidInputError("noise must be an M x C matrix with M >= 1")
        noise.setflags(write=False)
        object.__setattr__(self, "noise", noise)

    @property
    def m(self) -> int:
        return self.noise.shape[0]

    @property
    def c(self) -> int:
        return self.noise.shape[1]

    def rng_info(self) -> dict:
        method = GAUSSIAN_METHOD if self.spec.family == "gaussian" else UNIFORM_METHOD
        return {"algorithm": RNG_ALGORITHM, "seed": int(self.seed), "sampler": method}

    def __eq__(self, other):
        if not isinstance(other, TransformSet):
            return NotImplemented
        return (
            self.spec == other.spec
            and self.seed == other.seed
            and np.array_equal(self.noise, other.noise)
        )


def _check_seed(seed) -> int:
    seed = int(seed)
    if not 0 <= seed < _SEED_LIMIT:
        raise InvalidInputError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return seed


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(_check_seed(seed)))


def derive_seed(seed: int, index: int) -> int:
    """Child seed for work item ``index``; independent of evaluation order."""
    ss = np.random.SeedSequence(_check_seed(seed), spawn_key=(int(index),))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def sample_transforms(spec: NoiseSpec, m: int, c: int, seed: int) -> TransformSet:
    if m < 1:
        raise InvalidInputError(f"need at least one transformation, got M={m}")
    if c < 2:
        raise InvalidInputError(f"need at least 2 classes, got C={c}")
    rng = make_rng(seed)
    if spec.family == "uniform":
        noise = rng.uniform(spec.a, spec.b, size=(m, c))
    else:
        noise = rng.normal(spec.mu, spec.sigma, size=(m, c))
    return TransformSet(noise, spec, _check_seed(seed))


def apply(t, row) -> np.ndarray:
    t = np.asarray(t, dtype=np.float64)
    row = np.asarray(row, dtype=np.float64)
    if t.shape != row.shape:
        raise InvalidInputError(f"length mismatch: noise {t.shape} vs logits {row.shape}")
    return row + t


@numba.njit(parallel=True, cache=True)
def _preserved_kernel(z, noise, yhat, slack):
    n_rows, n_cls = z.shape
    n_t = noise.shape[0]
    span = 0.0
    for m in range(n_t):
        lo = noise[m, 0]
        hi = noise[m, 0]
        for c in range(n_cls):
            lo = min(lo, noise[m, c])
            hi = max(hi, noise[m, c])
        span = max(span, hi - lo)
    out = np.zeros((n_rows, n_t), dtype=np.bool_)
    for n in numba.prange(n_rows):
        cand = np.empty(n_cls, dtype=np.int64)
        cand_z = np.empty(n_cls)
        y = yhat[n]
        z_y = z[n, y]
        # class c can only overtake y under some t_m if z_y - z_c <= span
        floor_ = z_y - span - slack
        k = 0
        for c in range(n_cls):
            if c != y and z[n, c] >= floor_:
                cand[k] = c
                cand_z[k] = z[n, c]
                k += 1
        for m in range(n_t):
            top = z_y + noise[m, y]
            keep = True
            for i in range(k):
                c = cand[i]
                v = cand_z[i] + noise[m, c]
                if v > top or (v == top and c < y):
                    keep = False
                    break
            out[n, m] = keep
    return out


def preserved_matrix(logits, noise) -> np.ndarray:
    """N x M boolean matrix: does adding noise row m keep row n's argmax?

    Equivalent to ``argmax(logits[n] + noise[m]) == argmax(logits[n])`` with
    lowest-index tie-breaking, but skips classes that no noise vector can lift
    above the predicted class.
    """
    z = np.ascontiguousarray(_as_finite_matrix(logits, "logits"))
    t = np.ascontiguousarray(_as_finite_matrix(noise, "noise"))
    if z.ndim != 2 or t.ndim != 2 or z.shape[1] != t.shape[1]:
        raise InvalidInputError(
            f"dimension mismatch: logits {z.shape} vs noise {t.shape}"
        )
    yhat = predicted_labels(z)
    # widen the pruning threshold past any rounding in z_c + t_c
    slack = 1e-9 * (1.0 + np.abs(z).max() + np.abs(t).max())
    return _preserved_kernel(z, t, yhat, slack)


@dataclass(frozen=True, eq=False)
class SwitchMatrix:
    """Entry (n, m) is True when transformation m preserves example n's predicted label."""

    preserved: np.ndarray

    @property
    def n(self) -> int:
        return self.preserved.shape[0]

    @property
    def m(self) -> int:
        return self.preserved.shape[1]

    def counts(self) -> np.ndarray:
        """Number of label-preserving transformations per example."""
        return self.preserved.sum(axis=1, dtype=np.int64)

    def gamma(self) -> np.ndarray:
        return gamma_from_counts(self.counts(), self.m)


def switch_matrix(data: LabeledLogits, ts: TransformSet) -> SwitchMatrix:
    if ts.c != data.c:
        raise InvalidInputError(f"transform set has C={ts.c}, dataset has C={data.c}")
    return SwitchMatrix(preserved_matrix(data.logits, ts.noise))


def gamma_from_counts(counts, m: int) -> np.ndarray:
    return np.asarray(counts, dtype=np.int64) / m


def gamma(sm: SwitchMatrix) -> np.ndarray:
    """Fraction of transformations that keep each example's label."""
    return sm.gamma()

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import naive_preserved
from hoki.core import InvalidInputError, LabeledLogits, argmax_label
from hoki.transform import (
    NoiseSpec,
    SwitchMatrix,
    TransformSet,
    apply,
    derive_seed,
    gamma,
    preserved_matrix,
    sample_transforms,
    switch_matrix,
)


class TestNoiseSpec:
    @pytest.mark.parametrize(
        "family,a,b", [("uniform", 0, 0), ("uniform", 3, 1), ("gaussian", 0, 0), ("gaussian", 0, -1), ("laplace", 0, 1)]
    )
    def test_invalid(self, family, a, b):
        with pytest.raises(InvalidInputError):
            NoiseSpec(family, a, b)

    def test_dict_round_trip(self):
        for spec in (NoiseSpec.uniform(-2, 4), NoiseSpec.gaussian(3, 2)):
            assert NoiseSpec.from_dict(spec.to_dict()) == spec
        assert str(NoiseSpec.gaussian(-20, 2)) == "G(-20, 2)"

    def test_malformed_dict(self):
        with pytest.raises(InvalidInputError):
            NoiseSpec.from_dict({"family": "gaussian", "mu": 1})


class TestSampling:
    def test_deterministic(self):
        a = sample_transforms(NoiseSpec.gaussian(0, 2), 50, 7, seed=123)
        b = sample_transforms(NoiseSpec.gaussian(0, 2), 50, 7, seed=123)
        assert a.noise.tobytes() == b.noise.tobytes()
        c = sample_transforms(NoiseSpec.gaussian(0, 2), 50, 7, seed=124)
        assert not np.array_equal(a.noise, c.noise)

    def test_uniform_moments(self):
        ts = sample_transforms(NoiseSpec.uniform(-2, 4), 1000, 1000, seed=5)
        assert ts.noise.min() >= -2 and ts.noise.max() <= 4
        assert abs(ts.noise.mean() - 1.0) < 0.02

    def test_gaussian_moments(self):
        ts = sample_transforms(NoiseSpec.gaussian(-5, 2), 1000, 1000, seed=5)
        assert abs(ts.noise.mean() + 5) < 0.01
        assert abs(ts.noise.std() - 2) < 0.01

    @pytest.mark.parametrize("m,c,seed", [(0, 3, 0), (3, 1, 0), (3, 3, -1), (3, 3, 2**64)])
    def test_invalid_args(self, m, c, seed):
        with pytest.raises(InvalidInputError):
            sample_transforms(NoiseSpec.uniform(0, 1), m, c, seed)

    def test_derived_seeds_distinct_and_stable(self):
        seeds = [derive_seed(7, i) for i in range(100)]
        assert len(set(seeds)) == 100
        assert derive_seed(7, 42) == seeds[42]


class TestApply:
    def test_zero_is_identity(self):
        row = np.array([0.3, -1.0, 2.0])
        assert np.array_equal(apply(np.zeros(3), row), row)

    def test_constant_keeps_argmax(self):
        row = np.array([0.3, -1.0, 2.0])
        assert argmax_label(apply(np.full(3, 7.5), row)) == argmax_label(row)

    def test_forced_switch(self):
        out = apply([10.0, 0.0], [0.0, 1.0])
        assert out.tolist() == [10.0, 1.0]
        assert argmax_label([0.0, 1.0]) == 1 and argmax_label(out) == 0

    def test_length_mismatch(self):
        with pytest.raises(InvalidInputError):
            apply([1.0, 2.0], [1.0, 2.0, 3.0])


class TestSwitchMatrix:
    def test_zero_noise_all_true(self, tiny_dataset):
        ts = TransformSet(np.zeros((4, 3)), NoiseSpec.gaussian(0, 1), 0)
        assert switch_matrix(tiny_dataset, ts).preserved.all()

    def test_huge_push_to_other_class(self):
        logits = np.array([[3.0, 1.0, 0.0], [5.0, 2.0, 1.0]])
        data = LabeledLogits(logits, np.array([0, 0]))
        noise = np.zeros((3, 3))
        noise[:, 2] = 1e6
        sm = switch_matrix(data, TransformSet(noise, NoiseSpec.gaussian(0, 1), 0))
        assert not sm.preserved.any()
        assert gamma(sm).tolist() == [0.0, 0.0]

    def test_matches_naive_oracle(self):
        rng = np.random.default_rng(3)
        logits = rng.normal(size=(5, 3))
        noise = rng.normal(size=(4, 3))
        data = LabeledLogits(logits, np.zeros(5, dtype=int))
        sm = switch_matrix(data, TransformSet(noise, NoiseSpec.gaussian(0, 1), 0))
        assert np.array_equal(sm.preserved, naive_preserved(logits, noise))

    @settings(max_examples=200, deadline=None)
    @given(st.integers(1, 12), st.integers(2, 6), st.integers(1, 10), st.integers(0, 2**32))
    def test_matches_naive_with_ties(self, n, c, m, seed):
        # small integer values force exact ties between classes
        rng = np.random.default_rng(seed)
        logits = rng.integers(-3, 4, size=(n, c)).astype(float)
        noise = rng.integers(-2, 3, size=(m, c)).astype(float)
        assert np.array_equal(preserved_matrix(logits, noise), naive_preserved(logits, noise))

    @settings(max_examples=50, deadline=None)
    @given(
        arrays(np.float64, (6, 4), elements=st.floats(-30, 30)),
        arrays(np.float64, (5, 4), elements=st.floats(-10, 10)),
    )
    def test_matches_naive_real_values(self, logits, noise):
        assert np.array_equal(preserved_matrix(logits, noise), naive_preserved(logits, noise))

    def test_wide_matrix_matches_naive(self):
        rng = np.random.default_rng(9)
        logits = 3 * rng.normal(size=(40, 200))
        noise = rng.normal(0, 2, size=(30, 200))
        assert np.array_equal(preserved_matrix(logits, noise), naive_preserved(logits, noise))

    def test_margins_above_noise_keep_every_label(self):
        rng = np.random.default_rng(0)
        logits = rng.normal(size=(100, 5))
        logits[np.arange(100), rng.integers(0, 5, 100)] += 50.0
        ts = sample_transforms(NoiseSpec.gaussian(0, 1e-3), 200, 5, seed=1)
        sorted_rows = np.sort(logits, axis=1)
        assert (sorted_rows[:, -1] - sorted_rows[:, -2]).min() > 2 * np.abs(ts.noise).max()
        data = LabeledLogits(logits, np.zeros(100, dtype=int))
        assert np.all(gamma(switch_matrix(data, ts)) == 1.0)

    def test_dimension_mismatch(self, tiny_dataset):
        ts = sample_transforms(NoiseSpec.uniform(0, 1), 3, 4, seed=0)
        with pytest.raises(InvalidInputError):
            switch_matrix(tiny_dataset, ts)

    def test_deterministic_and_row_independent(self, overconfident_small):
        ts = sample_transforms(NoiseSpec.gaussian(0, 2), 100, 10, seed=2)
        full = switch_matrix(overconfident_small, ts).preserved
        again = switch_matrix(overconfident_small, ts).preserved
        assert np.array_equal(full, again)
        part = preserved_matrix(overconfident_small.logits[500:900], ts.noise)
        assert np.array_equal(full[500:900], part)


class TestGamma:
    def test_counting(self):
        sm = SwitchMatrix(np.array([[True] * 4, [False] * 4, [True, True, False, True]]))
        assert gamma(sm).tolist() == [1.0, 0.0, 0.75]

    def test_multiples_of_one_over_m(self, overconfident_small):
        ts = sample_transforms(NoiseSpec.uniform(-3, 3), 37, 10, seed=4)
        g = gamma(switch_matrix(overconfident_small, ts))
        scaled = g * 37
        assert np.array_equal(scaled, np.round(scaled))
        assert g.min() >= 0 and g.max() <= 1

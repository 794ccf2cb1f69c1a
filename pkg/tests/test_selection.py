import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hoki.core import InvalidInputError, LabeledLogits
from hoki.selection import (
    TABLE_HEADER,
    GridConfig,
    enumerate_grid,
    score_candidate,
    select_transform,
    single_bin_scores,
)
from hoki.synth import SynthConfig, generate
from hoki.transform import NoiseSpec, derive_seed


class TestGrid:
    def test_default_counts(self):
        specs = enumerate_grid()
        gauss = [s for s in specs if s.family == "gaussian"]
        unif = [s for s in specs if s.family == "uniform"]
        assert len(gauss) == 41 * 20 == 820
        assert len(unif) == sum(20 - a for a in range(-20, 20)) == 820
        assert specs[:820] == gauss

    def test_default_values(self):
        specs = enumerate_grid()
        assert {s.mu for s in specs[:820]} == set(float(m) for m in range(-20, 21))
        assert {s.sigma for s in specs[:820]} == set(float(s) for s in range(1, 21))
        assert all(-20 <= s.a < s.b <= 20 for s in specs[820:])
        assert specs[0] == NoiseSpec.gaussian(-20, 1) and specs[-1] == NoiseSpec.uniform(19, 20)

    def test_coarse_grid(self):
        cfg = GridConfig(mu_step=20, sigma_step=20, families=("gaussian",))
        specs = enumerate_grid(cfg)
        assert [(s.mu, s.sigma) for s in specs] == [(-20, 20), (0, 20), (20, 20)]
        cfg = GridConfig(mu_step=40, sigma_step=20, families=("gaussian",))
        assert [(s.mu, s.sigma) for s in enumerate_grid(cfg)] == [(-20, 20), (20, 20)]

    def test_lexicographic_order(self):
        specs = enumerate_grid(GridConfig.with_step(5))
        gauss = [(s.a, s.b) for s in specs if s.family == "gaussian"]
        unif = [(s.a, s.b) for s in specs if s.family == "uniform"]
        assert gauss == sorted(gauss) and unif == sorted(unif)

    @pytest.mark.parametrize("field", ["mu_step", "sigma_step", "uniform_step"])
    @pytest.mark.parametrize("value", [0.0, -1.0])
    def test_nonpositive_step(self, field, value):
        with pytest.raises(InvalidInputError):
            GridConfig(**{field: value})


class TestSingleBin:
    def test_two_example_bin(self):
        sigma, alpha, beta = single_bin_scores([3, 1], [True, False], 4)
        assert (alpha, beta) == (0.75, 0.25)
        # p = {0.625, 0.375}
        assert sigma == 0.125

    def test_degenerate(self):
        assert single_bin_scores([4, 4], [True, False], 4) == (0.0, 0.5, 0.5)
        assert single_bin_scores([0, 0], [True, True], 4) == (0.0, 1.0, 1.0)

    def test_large_margins_give_zero_spread(self):
        logits = np.array([[100.0, 0.0, 0.0], [0.0, 0.0, 100.0], [0.0, 100.0, 0.0]])
        val = LabeledLogits(logits, [0, 1, 1])
        sigma, alpha, beta = score_candidate(val, NoiseSpec.gaussian(0, 1), 200, seed=3)
        assert sigma == 0.0 and alpha == beta == pytest.approx(2 / 3)

    @settings(max_examples=200, deadline=None)
    @given(st.integers(1, 30), st.data())
    def test_spread_bounded(self, m, data):
        n = data.draw(st.integers(1, 20))
        kept = data.draw(st.lists(st.integers(0, m), min_size=n, max_size=n))
        correct = data.draw(st.lists(st.booleans(), min_size=n, max_size=n))
        sigma, alpha, beta = single_bin_scores(kept, correct, m)
        assert 0.0 <= sigma <= 0.5
        assert 0.0 <= alpha <= 1.0 and 0.0 <= beta <= 1.0


@pytest.fixture(scope="module")
def val():
    return generate(SynthConfig(1500, 10, 0.5, 3.0, seed=21))


def test_doubling_m_is_stable(val):
    spec = NoiseSpec.uniform(-8, -4)
    s1 = np.array([score_candidate(val, spec, 250, derive_seed(5, i))[0] for i in range(6)])
    s2 = np.array([score_candidate(val, spec, 500, derive_seed(6, i))[0] for i in range(6)])
    se = np.sqrt(s1.var(ddof=1) / s1.size + s2.var(ddof=1) / s2.size)
    assert abs(s1.mean() - s2.mean()) < 3 * se + 1e-12


class TestSelect:
    def test_single_candidate(self, val):
        spec = NoiseSpec.gaussian(3, 7)
        result = select_transform(val, GridConfig(m=50), specs=[spec])
        assert result.best == spec and len(result.table) == 1

    def test_prefers_positive_spread(self, val):
        flat = NoiseSpec.uniform(0, 1e-9)  # cannot flip anything at these margins
        useful = NoiseSpec.uniform(-8, -4)
        result = select_transform(val, GridConfig(m=100), specs=[flat, useful])
        assert result.table[0].sigma_hat == 0.0
        assert result.best == useful and result.sigma_hat > 0

    def test_tie_goes_to_first(self, val):
        a = NoiseSpec.uniform(0, 1e-9)
        b = NoiseSpec.uniform(1, 1 + 1e-9)
        assert select_transform(val, GridConfig(m=20), specs=[a, b]).best == a

    def test_empty_grid(self, val):
        with pytest.raises(InvalidInputError):
            select_transform(val, GridConfig(m=10), specs=[])

    def test_table_matches_independent_scoring(self, val):
        cfg = GridConfig.with_step(10, m=100, seed=4)
        result = select_transform(val, cfg)
        specs = enumerate_grid(cfg)
        assert len(result.table) == len(specs)
        # score in reverse order: same numbers, so evaluation order is irrelevant
        for i in reversed(range(len(specs))):
            row = result.table[i]
            assert row.index == i and row.spec == specs[i]
            assert score_candidate(val, specs[i], 100, derive_seed(4, i)) == (
                row.sigma_hat,
                row.alpha_hat,
                row.beta_hat,
            )
        assert result.sigma_hat == max(r.sigma_hat for r in result.table)
        first_max = next(r for r in result.table if r.sigma_hat == result.sigma_hat)
        assert result.best == first_max.spec

    def test_table_csv(self, val):
        result = select_transform(val, GridConfig.with_step(20, m=20))
        lines = result.table_csv().splitlines()
        assert lines[0] == ",".join(TABLE_HEADER)
        assert len(lines) == len(result.table) + 1

    def test_progress_callback(self, val):
        seen = []
        select_transform(val, GridConfig.with_step(20, m=10), progress=lambda i, n: seen.append((i, n)))
        assert seen[-1][0] == seen[-1][1] == len(seen)


@pytest.mark.slow
def test_default_grid_winner_dominates_table():
    data = generate(SynthConfig(500, 10, 0.5, 3.0, seed=2))
    result = select_transform(data, GridConfig(m=100))
    assert len(result.table) == 1640
    assert all(result.sigma_hat >= r.sigma_hat for r in result.table)
    assert all(0.0 <= r.sigma_hat <= 0.5 for r in result.table)

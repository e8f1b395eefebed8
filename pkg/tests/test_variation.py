import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from truncvar.paths import SampledPath
from truncvar.variation import evaluate_subsequence, tv_batch, tv_bruteforce, tv_exact, tv_sweep

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)
short_paths = st.lists(finite, min_size=1, max_size=10)
levels = st.floats(0, 5, allow_nan=False)


class TestExamples:
    def test_monotone_path(self):
        res = tv_exact([0, 0.2, 0.7, 1.0], 0.3, witness=True)
        assert res.value == pytest.approx(0.7, abs=1e-15)
        assert res.witness == (0, 3)

    @pytest.mark.parametrize("c, expected", [(0.0, 3.0), (0.5, 1.5), (1.2, 0.0)])
    def test_zigzag(self, c, expected):
        assert tv_exact([0, 1, 0, 1], c).value == pytest.approx(expected, abs=1e-15)
        assert tv_bruteforce([0, 1, 0, 1], c).value == pytest.approx(expected, abs=1e-15)

    def test_single_point(self):
        assert tv_exact([3.0], 1.0).value == 0
        assert tv_bruteforce([3.0], 0.0).value == 0

    def test_accepts_sampled_path(self):
        path = SampledPath([0, 0.5, 1], [0, 1, 0])
        assert tv_exact(path, 0.0).value == 2.0


class TestErrors:
    def test_non_finite(self):
        with pytest.raises(ValueError):
            tv_exact([0, np.nan, 1], 0.1)

    def test_negative_c(self):
        with pytest.raises(ValueError):
            tv_exact([0, 1], -0.1)

    def test_bruteforce_guard(self):
        with pytest.raises(ValueError, match="limited"):
            tv_bruteforce(np.zeros(21), 0.1)

    def test_unsorted_sweep(self):
        with pytest.raises(ValueError, match="sorted"):
            tv_sweep([0, 1, 0], [0.5, 0.1])


class TestOracle:
    def test_random_ten_point_paths(self):
        rng = np.random.default_rng(11)
        for _ in range(100):
            x = rng.standard_normal(10)
            for c in (0.0, 0.1, 1.0):
                assert tv_exact(x, c).value == pytest.approx(tv_bruteforce(x, c).value, abs=1e-12)

    @settings(max_examples=300, deadline=None)
    @given(short_paths, levels)
    def test_exact_equals_bruteforce(self, x, c):
        assert abs(tv_exact(x, c).value - tv_bruteforce(x, c).value) <= 1e-12 * max(1.0, len(x))

    @settings(max_examples=100, deadline=None)
    @given(short_paths, levels)
    def test_bruteforce_witness(self, x, c):
        res = tv_bruteforce(x, c)
        assert evaluate_subsequence(x, res.witness, c) == pytest.approx(res.value, abs=1e-12)

    @settings(max_examples=200, deadline=None)
    @given(st.lists(finite, min_size=1, max_size=40), levels)
    def test_witness_reevaluates(self, x, c):
        res = tv_exact(x, c, witness=True)
        w = res.witness
        assert all(a < b for a, b in zip(w, w[1:]))
        assert evaluate_subsequence(x, w, c) == pytest.approx(res.value, abs=1e-9)
        assert res.value == tv_exact(x, c).value


class TestProperties:
    @settings(max_examples=200, deadline=None)
    @given(st.lists(finite, min_size=2, max_size=30), st.lists(st.integers(0, 500), min_size=3, max_size=8, unique=True))
    def test_sweep_monotone_convex(self, x, ticks):
        grid = sorted(t / 100 for t in ticks)
        vals = np.array([v for _, v in tv_sweep(x, grid)])
        assert np.all(np.diff(vals) <= 1e-12)
        # convexity on an arbitrary grid: secant slopes are non-decreasing
        cs = np.array(grid)
        slopes = np.diff(vals) / np.diff(cs)
        assert np.all(np.diff(slopes) >= -1e-7 * (1 + np.abs(slopes[1:])))

    @settings(max_examples=200, deadline=None)
    @given(st.lists(finite, min_size=2, max_size=30), levels, levels)
    def test_lipschitz_in_c(self, x, c1, c2):
        n = len(x)
        gap = abs(tv_exact(x, c1).value - tv_exact(x, c2).value)
        assert gap <= (n - 1) * abs(c1 - c2) + 1e-12

    @settings(max_examples=200, deadline=None)
    @given(st.lists(finite, min_size=1, max_size=30), levels, st.floats(0.01, 100))
    def test_scaling(self, x, c, lam):
        x = np.array(x)
        lhs = tv_exact(lam * x, lam * c).value
        rhs = lam * tv_exact(x, c).value
        assert abs(lhs - rhs) <= 1e-10 * lam * len(x) * max(1.0, np.abs(x).max(initial=0))

    @settings(max_examples=200, deadline=None)
    @given(st.lists(finite, min_size=2, max_size=30), levels, st.data())
    def test_superadditive_in_time(self, x, c, data):
        s = data.draw(st.integers(0, len(x) - 1))
        left = tv_exact(x[: s + 1], c).value
        right = tv_exact(x[s:], c).value
        assert left + right <= tv_exact(x, c).value + 1e-12 * len(x)

    @settings(max_examples=200, deadline=None)
    @given(st.lists(finite, min_size=1, max_size=30), levels)
    def test_endpoint_lower_bound(self, x, c):
        assert tv_exact(x, c).value >= max(abs(x[-1] - x[0]) - c, 0.0) - 1e-12

    def test_total_variation_at_zero(self):
        x = np.random.default_rng(2).standard_normal(100)
        assert tv_exact(x, 0.0).value == pytest.approx(np.abs(np.diff(x)).sum(), rel=1e-12)

    def test_above_range_is_zero(self):
        x = np.random.default_rng(3).standard_normal(50)
        rng_ = x.max() - x.min()
        assert all(v == 0 for _, v in tv_sweep(x, [rng_, rng_ + 1, 10 * rng_]))


class TestSweepAndBatch:
    def test_sweep_matches_pointwise(self):
        x = np.random.default_rng(4).standard_normal(50)
        grid = np.geomspace(0.01, 3, 16)
        for c, v in tv_sweep(x, grid):
            assert v == tv_exact(x, c).value

    def test_sweep_zero_only(self):
        x = [0, 2, 1]
        assert tv_sweep(x, [0]) == [(0.0, 3.0)]

    def test_batch_rows_independent(self):
        X = np.random.default_rng(5).standard_normal((7, 40))
        grid = [0.0, 0.3, 1.0]
        out = tv_batch(X, grid)
        assert out.shape == (7, 3)
        for i in range(7):
            for j, c in enumerate(grid):
                assert out[i, j] == tv_exact(X[i], c).value

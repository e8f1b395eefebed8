import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from truncvar.chaining import (
    KParams,
    RAdicGrid,
    chain_bound_rhs,
    classify_intervals,
    compute_m_k,
    length_class,
    neighborhood,
    partition_lhs,
    project_index,
    project_pi,
    random_partition_indices,
    run_chain_trials,
    verify_chain_bound,
    verify_step_uniqueness,
)


def naive_chain_sums(values, r, N, c, m_k):
    """Direct double loop over u in T_{n+1}, v in T_{n+1} with |u - v| < 2 r^-n."""
    X = {Fraction(i, r**N): v for i, v in enumerate(values)}
    coarse = fine = 0.0
    for n in range(N):
        pts = [Fraction(i, r ** (n + 1)) for i in range(r ** (n + 1) + 1)]
        for u in pts:
            for v in pts:
                if abs(u - v) < Fraction(2, r**n):
                    g = abs(X[u] - X[v])
                    if n <= m_k:
                        coarse += g
                    else:
                        fine += max(g - 2.0 ** (m_k - n - 1) * c, 0.0)
    return coarse, fine


class TestGrid:
    def test_size_and_nesting(self):
        g2, g3 = RAdicGrid(3, 2), RAdicGrid(3, 3)
        assert g2.size == 10 and g3.size == 28
        assert set(np.round(g2.points * 27).astype(int)) <= set(np.round(g3.points * 27).astype(int))
        assert g3.spacing == Fraction(1, 27)

    @pytest.mark.parametrize("r, n", [(3, 3), (5, 4), (7, 2)])
    def test_index_of_accepts_rounded_floats(self, r, n):
        g = RAdicGrid(r, n)
        assert [g.index_of(t) for t in np.arange(g.size) / r**n] == list(range(g.size))
        with pytest.raises(ValueError):
            g.index_of(Fraction(1, r ** (n + 1)))

    def test_index_of_rejects_off_grid(self):
        with pytest.raises(ValueError):
            RAdicGrid(2, 3).index_of(0.3)


class TestProjection:
    def test_floor(self):
        assert project_pi(0.3, 2, 2) == 0.25

    def test_near_one(self):
        assert project_pi(0.999, 1, 2) == 0.5

    def test_one_maps_to_one(self):
        assert project_pi(1.0, 5, 3) == 1.0

    @pytest.mark.parametrize("r", [2, 3, 4])
    def test_idempotent_on_grid(self, r):
        for n in range(5):
            for k in range(r**n + 1):
                assert project_index(Fraction(k, r**n), n, r) == k

    def test_domain(self):
        with pytest.raises(ValueError):
            project_pi(1.2, 1, 2)
        with pytest.raises(ValueError):
            project_pi(-0.1, 1, 2)

    def test_contract_random(self):
        rng = np.random.default_rng(0)
        for _ in range(10_000):
            t = rng.uniform()
            n = int(rng.integers(0, 12))
            r = int(rng.integers(2, 6))
            s = Fraction(project_index(t, n, r), r**n)
            assert s <= Fraction(t) and Fraction(t) - s < Fraction(1, r**n)

    @settings(max_examples=300, deadline=None)
    @given(st.floats(0, 1), st.floats(0, 1), st.integers(0, 10), st.integers(2, 5))
    def test_monotone_and_refining(self, a, b, n, r):
        s, t = min(a, b), max(a, b)
        assert project_index(s, n, r) <= project_index(t, n, r)
        # pi_n(t) <= pi_{n+1}(t)
        assert r * project_index(t, n, r) <= project_index(t, n + 1, r)

    @settings(max_examples=300, deadline=None)
    @given(st.floats(0, 1), st.integers(0, 10), st.integers(2, 5))
    def test_successor_in_neighbourhood(self, t, n, r):
        u = project_index(t, n, r) * r  # pi_n(t) as an index of T_{n+1}
        v = project_index(t, n + 1, r)
        assert abs(v - u) < 2 * r


class TestNeighborhood:
    def test_example_r2(self):
        assert neighborhood(0.5, 1, 2).tolist() == [0, 0.25, 0.5, 0.75, 1]

    def test_example_r4_one_sided(self):
        pts = neighborhood(0.0, 3, 4)
        assert len(pts) == 8 <= 4 * 4 + 1
        assert np.all(pts < 2 * 4.0**-3)
        assert pts[0] == 0 and pts[1] == 4.0**-4

    @pytest.mark.parametrize("r", [2, 3, 5])
    def test_against_definition(self, r):
        for n in range(3):
            fine = [Fraction(i, r ** (n + 1)) for i in range(r ** (n + 1) + 1)]
            for u in fine:
                expected = [s for s in fine if abs(s - u) < Fraction(2, r**n)]
                got = neighborhood(u, n, r)
                assert np.allclose(got, [float(s) for s in expected])
                assert float(u) in got
                assert len(got) <= 4 * r + 1

    def test_off_grid(self):
        with pytest.raises(ValueError):
            neighborhood(0.3, 1, 2)


def test_first_step_containment():
    rng = np.random.default_rng(8)
    for _ in range(1000):
        r = int(rng.integers(2, 5))
        t = np.unique(rng.uniform(size=int(rng.integers(2, 40))))
        for m, idx in classify_intervals(t, r).items():
            for i in idx:
                a = project_index(t[i - 1], m + 1, r)
                b = project_index(t[i], m + 1, r)
                assert abs(a - b) < 2 * r  # pi_{m+1}(t_{i-1}) in I_{m+1}(pi_{m+1}(t_i))


class TestClassify:
    def test_example(self):
        assert classify_intervals([0, 0.3, 1], 2) == {1: [1], 0: [2]}

    @pytest.mark.parametrize("r", [2, 3, 4])
    def test_boundary_closed_side(self, r):
        for m in range(6):
            assert length_class(Fraction(1, r**m), r) == m

    def test_partition_random(self):
        rng = np.random.default_rng(1)
        for _ in range(1000):
            r = int(rng.integers(2, 5))
            t = np.unique(rng.uniform(size=int(rng.integers(2, 30))))
            if t.size < 2:
                continue
            classes = classify_intervals(t, r)
            members = sorted(i for v in classes.values() for i in v)
            assert members == list(range(1, t.size))
            for m, idx in classes.items():
                for i in idx:
                    L = Fraction(t[i]) - Fraction(t[i - 1])
                    assert Fraction(1, r ** (m + 1)) < L <= Fraction(1, r**m)


class TestMk:
    def test_example(self):
        M0 = 8 * math.e
        m = compute_m_k(1, 0.5, 0.5, 1.0, M0, 4)
        assert m == 4
        assert 4.0**-2 >= 1 / M0 > 4.0**-2.5

    def test_degenerate(self):
        assert compute_m_k(1, 0.5, 0.5, 30.0, 8 * math.e, 4) == -1
        assert compute_m_k(4, 0.5, 0.5, 2.0, 1.0, 2) == -1

    def test_random_tuples(self):
        rng = np.random.default_rng(2)
        for _ in range(1000):
            k = float(rng.uniform(1, 50))
            p = float(rng.uniform(0.05, 2))
            q = float(rng.uniform(0.05, 0.95))
            c = float(np.exp(rng.uniform(-8, 3)))
            M0 = float(np.exp(rng.uniform(-2, 6)))
            r = int(rng.integers(2, 9))
            m = compute_m_k(k, p, q, c, M0, r)
            if c >= M0 * k**p:
                assert m == -1
            else:
                assert k**p * r ** (-(m + 1) * q) < c / M0 <= k**p * r ** (-m * q)

    def test_domain(self):
        with pytest.raises(ValueError):
            compute_m_k(1, 0.5, 1.0, 1.0, 1.0, 2)


class TestChainBound:
    def test_constant_path(self):
        assert chain_bound_rhs(np.full(9, 3.0), 0.5, 0, 2) == (0.0, 0.0)
        rep = verify_chain_bound(np.full(9, 3.0), [0, 0.5, 1], 0.5, KParams(1, 0.5, 0.5, 10.0), 2)
        assert rep.lhs == 0 and rep.rhs == 0 and rep.holds

    def test_alternating_example(self):
        v = [0, 1, 0, 1, 0, 1, 0, 1, 0]
        got = chain_bound_rhs(v, 0.5, 0, 2)
        assert got == pytest.approx((0.0, 26.25), abs=1e-12)
        assert got == pytest.approx(naive_chain_sums(v, 2, 3, 0.5, 0), abs=1e-12)

    @pytest.mark.parametrize("r, N", [(2, 4), (3, 2), (4, 2)])
    def test_matches_naive(self, r, N):
        rng = np.random.default_rng(r * 10 + N)
        for m_k in (-1, 0, 1, N):
            x = rng.standard_normal(r**N + 1)
            assert chain_bound_rhs(x, 0.3, m_k, r) == pytest.approx(naive_chain_sums(x, r, N, 0.3, m_k), rel=1e-12)

    def test_doubling(self):
        x = np.random.default_rng(3).standard_normal(17)
        c1, f1 = chain_bound_rhs(x, 0.5, 1, 2)
        c2, f2 = chain_bound_rhs(2 * x, 0.5, 1, 2)
        assert c2 == pytest.approx(2 * c1)
        assert f2 >= f1

    def test_full_grid_zero_c(self):
        x = np.random.default_rng(4).standard_normal(2**6 + 1)
        lhs = partition_lhs(x, range(x.size), 0.0)
        coarse, fine = chain_bound_rhs(x, 0.0, 5, 2)
        assert lhs == pytest.approx(np.abs(np.diff(x)).sum())
        assert fine == 0 and math.isfinite(coarse) and lhs < 2 * coarse

    def test_off_grid_refused(self):
        with pytest.raises(ValueError, match="off the"):
            verify_chain_bound(np.zeros(9), [0, 0.3, 1], 0.5, KParams(1, 0.5, 0.5, 10.0), 2)

    def test_random_paths(self):
        rng = np.random.default_rng(5)
        N, r = 6, 2
        grid = np.arange(r**N + 1) / r**N
        for _ in range(200):
            x = np.cumsum(rng.standard_normal(r**N + 1)) / 8
            idx = random_partition_indices(rng, grid.size, 30)
            for c in (0.1, 0.5, 2.0):
                M0 = float(np.exp(rng.uniform(-2, 5)))
                rep = verify_chain_bound(x, grid[idx], c, KParams(1, 0.5, 0.5, M0), r)
                assert rep.holds, rep


class TestStepUniqueness:
    def test_single_interval(self):
        assert verify_step_uniqueness([0.1, 0.7], 2, 8) == (True, None)

    @pytest.mark.parametrize("r", [2, 3, 4])
    def test_equal_lengths(self, r):
        for m in range(1, 4):
            t = [Fraction(1, 7) / r**m + Fraction(i, r**m) for i in range(r**m)]
            ok, bad = verify_step_uniqueness(t, r, 8)
            assert ok, bad

    def test_short_intervals_excluded_at_coarse_levels(self):
        t = [0.1, 0.1 + 1e-9, 0.1 + 2e-9]
        assert verify_step_uniqueness(t, 2, 8)[0]

    def test_detector_finds_collisions(self, monkeypatch):
        # with every interval forced into J_0 the short ones share steps
        import truncvar.chaining as chaining

        monkeypatch.setattr(chaining, "length_class", lambda length, r: 0)
        ok, bad = verify_step_uniqueness([0.1, 0.1 + 1e-9, 0.1 + 2e-9], 2, 8)
        assert not ok
        assert bad.intervals == (1, 2) and bad.level == 1

    def test_random_partitions(self):
        rng = np.random.default_rng(6)
        for _ in range(300):
            r = int(rng.integers(2, 5))
            t = np.unique(rng.uniform(size=int(rng.integers(2, 52))))
            if t.size >= 2:
                assert verify_step_uniqueness(t, r, 8)[0]


def test_trials_report_is_deterministic():
    a = run_chain_trials(2, 5, 30, seed=7)
    b = run_chain_trials(2, 5, 30, seed=7)
    assert a == b
    assert a["violations"] == 0 and a["trials"] == 30

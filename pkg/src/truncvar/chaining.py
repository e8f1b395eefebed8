"""The r-adic chaining construction on [0, 1] with checks of the chain bound and step counting.

Grid points of ``T_n = {k r^-n}`` are handled through their integer index
``k`` so that projections, neighbourhoods and length classes are exact.
Times are read exactly from their binary floating-point value (or from a
:class:`fractions.Fraction`); only grid membership tolerates the rounding of
``k / r^n`` to the nearest float.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, NamedTuple, Sequence

import numpy as np


def _exact(t) -> Fraction:
    return t if isinstance(t, Fraction) else Fraction(float(t))


def _check_r(r: int):
    if int(r) != r or r < 2:
        raise ValueError(f"r must be an integer >= 2, got {r}")


def _check_unit(t: Fraction):
    if not 0 <= t <= 1:
        raise ValueError(f"time {float(t)} lies outside [0, 1]")


@dataclass(frozen=True)
class RAdicGrid:
    r: int
    n: int

    def __post_init__(self):
        _check_r(self.r)
        if self.n < 0:
            raise ValueError("grid level must be non-negative")

    @property
    def size(self) -> int:
        return self.r**self.n + 1

    @property
    def spacing(self) -> Fraction:
        return Fraction(1, self.r**self.n)

    @property
    def points(self) -> np.ndarray:
        return np.arange(self.size) / self.r**self.n

    def index_of(self, t) -> int:
        """Index of ``t`` in the grid; raises if ``t`` is not a grid point.

        Fractions must match exactly. A float matches when it is the correctly
        rounded value of a grid point, since ``k / r^n`` is rarely representable.
        """
        scale = self.r**self.n
        if isinstance(t, Fraction):
            q = t * scale
            ok = q.denominator == 1
            k = int(q) if ok else -1
        else:
            k = round(Fraction(float(t)) * scale)
            ok = float(Fraction(k, scale)) == float(t)
        if not ok or not 0 <= k <= scale:
            raise ValueError(f"{float(t)} is not a point of T_{self.n} (r={self.r})")
        return k


# -- projections and neighbourhoods ------------------------------------------


def project_index(t, n: int, r: int) -> int:
    """Index ``k`` of ``pi_n(t) = k r^-n``: the grid point with ``s <= t`` and ``t - s < r^-n``."""
    _check_r(r)
    t = _exact(t)
    _check_unit(t)
    return math.floor(t * r**n)


def project_pi(t, n: int, r: int) -> float:
    return project_index(t, n, r) / r**n


def neighborhood_indices(j: int, n: int, r: int) -> range:
    """Indices in ``T_{n+1}`` of ``I_{n+1}(u)`` for ``u`` with index ``j`` in ``T_{n+1}``.

    ``|s - u| < 2 r^-n`` is ``|i - j| < 2r`` in units of the finer spacing.
    """
    top = r ** (n + 1)
    return range(max(0, j - 2 * r + 1), min(top, j + 2 * r - 1) + 1)


def neighborhood(u, n: int, r: int) -> np.ndarray:
    """Points of ``I_{n+1}(u) = {s in T_{n+1}: |s - u| < 2 r^-n}``.

    ``u`` must be a point of ``T_{n+1}``. At most ``4r - 1`` points are returned.
    """
    _check_r(r)
    j = RAdicGrid(r, n + 1).index_of(u)
    return np.array(list(neighborhood_indices(j, n, r))) / r ** (n + 1)


# -- length classes and the cutoff level --------------------------------------


def length_class(length, r: int) -> int:
    """The ``m >= 0`` with ``r^-(m+1) < length <= r^-m`` (length in (0, 1])."""
    L = _exact(length)
    if not 0 < L <= 1:
        raise ValueError(f"interval length must lie in (0, 1], got {float(L)}")
    m = max(0, math.floor(-math.log(float(L), r)))
    while L > Fraction(1, r**m):
        m -= 1
    while L <= Fraction(1, r ** (m + 1)):
        m += 1
    return m


def classify_intervals(partition: Sequence, r: int) -> dict[int, list[int]]:
    """Map ``m -> J_m``: interval indices ``i`` (1-based) with ``|t_i - t_{i-1}|`` in class ``m``."""
    _check_r(r)
    t = _check_partition(partition)
    classes: dict[int, list[int]] = defaultdict(list)
    for i in range(1, len(t)):
        classes[length_class(t[i] - t[i - 1], r)].append(i)
    return dict(classes)


def _check_partition(partition: Sequence) -> list[Fraction]:
    t = [_exact(v) for v in partition]
    if len(t) < 2:
        raise ValueError("a partition needs at least two points")
    for a in t:
        _check_unit(a)
    if any(b <= a for a, b in zip(t, t[1:])):
        raise ValueError("partition times must be strictly increasing")
    return t


def compute_m_k(k: float, p: float, q: float, c: float, M0: float, r: int) -> int:
    """Cutoff level with ``k^p r^-(m+1)q < c/M0 <= k^p r^-mq``.

    Returns -1 when ``c >= M0 k^p``: the coarse part of the chain bound is empty.
    """
    if not (k >= 1 and c > 0 and M0 > 0 and p > 0 and 0 < q < 1):
        raise ValueError("compute_m_k needs k >= 1, c > 0, M0 > 0, p > 0, 0 < q < 1")
    _check_r(r)
    kp = k**p
    target = c / M0
    if c >= M0 * kp:
        return -1

    def ok(m):
        return kp * r ** (-(m + 1) * q) < target <= kp * r ** (-m * q)

    m0 = math.floor(math.log(M0 * kp / c, r) / q)
    for m in (m0, m0 - 1, m0 + 1):
        if m >= 0 and ok(m):
            return m
    raise ArithmeticError(f"no level satisfies the m_k inequalities near {m0} (k={k}, c={c}, M0={M0})")


# -- the chain bound -----------------------------------------------------------


class KParams(NamedTuple):
    """Moment order and envelope exponents that fix the cutoff level ``m_k``."""

    k: float
    p: float
    q: float
    M0: float


@dataclass(frozen=True)
class ChainBoundReport:
    """Pathwise chain bound for one partition.

    ``rhs_coarse`` and ``rhs_fine`` are the two double sums without the leading
    factor 2; the bound is ``lhs <= 2 * (rhs_coarse + rhs_fine)``.
    """

    lhs: float
    rhs_coarse: float
    rhs_fine: float
    m_k: int
    holds: bool

    @property
    def rhs(self) -> float:
        return 2.0 * (self.rhs_coarse + self.rhs_fine)

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs


def _grid_level(n_points: int, r: int) -> int:
    N = round(math.log(n_points - 1, r)) if n_points > 1 else 0
    if r**N + 1 != n_points:
        raise ValueError(f"{n_points} values do not fill an r-adic grid T_N for r={r}")
    return N


def chain_bound_rhs(values, c: float, m_k: int, r: int) -> tuple[float, float]:
    """Coarse and fine double sums over ``u in T_{n+1}``, ``v in I_{n+1}(u)``.

    ``values`` are the path at every point of ``T_N`` (``r^N + 1`` entries).
    Levels ``n <= m_k`` contribute ``|X(u) - X(v)|``; levels ``n > m_k``
    contribute ``(|X(u) - X(v)| - 2^(m_k - n - 1) c)_+``. The sum over levels
    stops at ``n = N - 1``; that is exact for partitions on ``T_N`` because
    every later approximation step is ``u = v``.
    """
    _check_r(r)
    if m_k < -1:
        raise ValueError("m_k must be >= -1")
    x = np.asarray(values, dtype=float)
    N = _grid_level(x.size, r)
    coarse = 0.0
    fine = 0.0
    for n in range(N):
        stride = r ** (N - n - 1)
        xs = x[::stride]  # the path on T_{n+1}
        level = 0.0
        threshold = 0.0 if n <= m_k else 2.0 ** (m_k - n - 1) * c
        for off in range(1, 2 * r):
            if off >= xs.size:
                break
            gaps = np.abs(xs[off:] - xs[:-off])
            if threshold:
                gaps = np.maximum(gaps - threshold, 0.0)
            level += 2.0 * gaps.sum()  # ordered pairs (u, v) and (v, u)
        if n <= m_k:
            coarse += level
        else:
            fine += level
    return coarse, fine


def partition_lhs(values, partition_idx: Sequence[int], c: float) -> float:
    x = np.asarray(values, dtype=float)[list(partition_idx)]
    return float(np.maximum(np.abs(np.diff(x)) - c, 0.0).sum())


def verify_chain_bound(values, partition, c: float, k_params: KParams, r: int, slack: float = 1e-9) -> ChainBoundReport:
    """Check ``sum (|dX| - c)_+ <= 2 (coarse + fine)`` for a partition on ``T_N``.

    ``partition`` holds times (which must be points of ``T_N``).
    """
    if not c > 0:
        raise ValueError("verify_chain_bound needs c > 0")
    x = np.asarray(values, dtype=float)
    N = _grid_level(x.size, r)
    grid = RAdicGrid(r, N)
    try:
        idx = [grid.index_of(t) for t in partition]
    except ValueError as exc:
        raise ValueError(f"partition is off the T_{N} grid; the truncated sum would be unsound ({exc})") from None
    _check_partition(partition)
    m_k = compute_m_k(k_params.k, k_params.p, k_params.q, c, k_params.M0, r)
    lhs = partition_lhs(x, idx, c)
    coarse, fine = chain_bound_rhs(x, c, m_k, r)
    return ChainBoundReport(lhs, coarse, fine, m_k, lhs <= 2.0 * (coarse + fine) + slack)


# -- step uniqueness ------------------------------------------------------------


@dataclass(frozen=True)
class StepCollision:
    """Two intervals that use the same approximation step in the same role."""

    level: int
    u: Fraction
    v: Fraction
    role: str  # "left" (t_{i-1}) or "right" (t_i)
    intervals: tuple[int, int]


def verify_step_uniqueness(partition: Sequence, r: int, n_max: int) -> tuple[bool, StepCollision | None]:
    """Count approximation steps ``(pi_n(t), pi_{n+1}(t))`` per role and level.

    For every level ``n <= n_max`` and each role, at most one interval ``i`` in
    ``J_m`` with ``m + 1 <= n`` may use a given step ``(u, v)``. Also checks
    that ``v`` lies in ``I_{n+1}(u)``. Returns ``(True, None)`` or the first
    collision found.
    """
    _check_r(r)
    t = _check_partition(partition)
    m_of = [None] + [length_class(t[i] - t[i - 1], r) for i in range(1, len(t))]
    proj = [[math.floor(s * r**n) for n in range(n_max + 2)] for s in t]
    for n in range(n_max + 1):
        seen: dict[tuple[str, int, int], int] = {}
        for i in range(1, len(t)):
            if m_of[i] + 1 > n:
                continue
            for role, point in (("left", i - 1), ("right", i)):
                u_idx = proj[point][n]
                v_idx = proj[point][n + 1]
                if abs(v_idx - r * u_idx) >= 2 * r:
                    raise AssertionError(f"successor step left the neighbourhood at level {n}")
                key = (role, u_idx, v_idx)
                if key in seen:
                    return False, StepCollision(
                        n, Fraction(u_idx, r**n), Fraction(v_idx, r ** (n + 1)), role, (seen[key], i)
                    )
                seen[key] = i
    return True, None


def random_partition_indices(rng: np.random.Generator, grid_size: int, max_points: int) -> np.ndarray:
    """Sorted distinct grid indices, between 2 and ``max_points`` of them."""
    size = int(rng.integers(2, min(max_points, grid_size) + 1))
    return np.sort(rng.choice(grid_size, size=size, replace=False))


def run_chain_trials(r: int, levels: int, trials: int, seed: int, c_values: Iterable[float] = (0.1, 0.5, 2.0),
                     max_points: int = 51) -> dict:
    """Randomized checks of the chain bound on Gaussian random walks over ``T_levels``
    with random grid partitions, plus step uniqueness on random real partitions.

    The cutoff is swept over its whole range by drawing ``M0`` log-uniformly,
    so both the coarse and the fine regime are exercised.
    """
    rng = np.random.default_rng(seed)
    c_values = tuple(c_values)
    size = r**levels + 1
    grid = np.arange(size) / r**levels
    chain_violations = 0
    step_violations = 0
    worst = math.inf
    for _ in range(trials):
        x = np.concatenate([[0.0], np.cumsum(rng.standard_normal(size - 1))]) / math.sqrt(size - 1)
        idx = random_partition_indices(rng, size, max_points)
        c = float(c_values[rng.integers(len(c_values))])
        k = float(rng.integers(1, 9))
        # M0 spans c/2 .. c r^(levels q) * 2 so m_k covers -1 .. levels
        lo, hi = math.log(c / 2), math.log(c * r ** (levels * 0.5) * 2)
        kp = KParams(k, 0.5, 0.5, math.exp(rng.uniform(lo, hi)))
        rep = verify_chain_bound(x, grid[idx], c, kp, r)
        worst = min(worst, rep.margin)
        chain_violations += not rep.holds
        d = int(rng.integers(1, 51))
        times = np.sort(rng.uniform(0.0, 1.0, size=d + 1))
        if np.unique(times).size == times.size:
            ok, _ = verify_step_uniqueness(times, r, levels)
            step_violations += not ok
    return {
        "trials": trials,
        "violations": chain_violations + step_violations,
        "chain_bound_violations": chain_violations,
        "step_uniqueness_violations": step_violations,
        "worst_margin": worst,
    }

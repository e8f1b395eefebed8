"""Exact truncated variation of a finite sampled path.

For sample values ``x_0..x_{n-1}`` and ``c >= 0``

    TV^c = max over subsequences i_0 < ... < i_m of sum_j (|x_{i_j} - x_{i_{j-1}}| - c)_+

computed by a single left-to-right pass. Any subsequence can be extended to
end at index ``j`` without losing value (the added term is ``>= 0``), so the
best value ending at ``j`` equals the running maximum ``M_j`` and

    M_j = max(M_{j-1}, max_{i<j} M_i + |x_j - x_i| - c)
        = max(M_{j-1}, A_{j-1} + x_j - c, B_{j-1} - x_j - c),

with ``A = max_i (M_i - x_i)`` and ``B = max_i (M_i + x_i)``.

For piecewise-linear interpolation of the samples the supremum over all
real-time partitions is attained on sample points (a monotone move is never
worth splitting), so this is the exact continuous-time value for interpolated
data, and a lower bound for a rough path observed at the samples.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from truncvar.paths import SampledPath

BRUTEFORCE_MAX_POINTS = 20
_BRUTEFORCE_CHUNK = 1 << 14


@dataclass(frozen=True)
class TVResult:
    value: float
    witness: tuple[int, ...] | None = None


def _as_values(path) -> np.ndarray:
    values = path.values if isinstance(path, SampledPath) else np.asarray(path, dtype=float)
    if values.ndim != 1 or values.size == 0:
        raise ValueError("path must be a non-empty one-dimensional sequence")
    if not np.all(np.isfinite(values)):
        raise ValueError("path values must be finite")
    return values


def _check_c(c) -> float:
    c = float(c)
    if not np.isfinite(c) or c < 0:
        raise ValueError(f"truncation level must be finite and >= 0, got {c}")
    return c


def evaluate_subsequence(values, indices: Sequence[int], c: float) -> float:
    """Sum of ``(|increment| - c)_+`` along ``values[indices]``."""
    x = np.asarray(values, dtype=float)[list(indices)]
    return float(np.sum(np.maximum(np.abs(np.diff(x)) - c, 0.0)))


def tv_exact(path, c: float, witness: bool = False) -> TVResult:
    """Truncated variation in O(n) time; O(1) memory unless ``witness`` is requested.

    The witness is a strictly increasing index subsequence attaining the value;
    ties go to the earliest index.
    """
    x = _as_values(path).tolist()
    c = _check_c(c)
    M = 0.0
    A = -x[0]
    B = x[0]
    if not witness:
        for xj in x[1:]:
            cand = max(A + xj, B - xj) - c
            if cand > M:
                M = cand
            if M - xj > A:
                A = M - xj
            if M + xj > B:
                B = M + xj
        return TVResult(M)

    # best[j]: earliest index where the running max M_j was reached
    # pred[j]: predecessor used when index j itself improved the max (-1 if it did not)
    n = len(x)
    pred = [-1] * n
    best = [0] * n
    a_idx = b_idx = 0
    m_idx = 0
    for j in range(1, n):
        xj = x[j]
        up = A + xj
        down = B - xj
        if up >= down:
            cand, src = up - c, a_idx
        else:
            cand, src = down - c, b_idx
        if cand > M:
            M = cand
            m_idx = j
            pred[j] = src
        best[j] = m_idx
        if M - xj > A:
            A, a_idx = M - xj, j
        if M + xj > B:
            B, b_idx = M + xj, j
    return TVResult(M, _backtrack(pred, best, m_idx))


def _backtrack(pred: list[int], best: list[int], end: int) -> tuple[int, ...]:
    # A chain whose value is M_i must end at i. If i did not improve the max,
    # the chain for M_i ends at best[i] < i and i is appended with a zero term.
    chain = []
    j = end
    while True:
        chain.append(j)
        if pred[j] >= 0:
            j = pred[j]
            continue
        b = best[j]
        if b == j:
            break
        j = b
    return tuple(reversed(chain))


def tv_bruteforce(path, c: float) -> TVResult:
    """Enumerate every subsequence (at most 20 points). Independent oracle for :func:`tv_exact`.

    Subsets are encoded as bit masks and scored in vectorized chunks: for each
    chosen index the gain is taken against the nearest chosen index before it.
    """
    x = _as_values(path)
    c = _check_c(c)
    n = x.size
    if n > BRUTEFORCE_MAX_POINTS:
        raise ValueError(f"brute force is limited to {BRUTEFORCE_MAX_POINTS} points, got {n}")
    idx = np.arange(n)
    best_val, best_mask = 0.0, 1
    for start in range(0, 1 << n, _BRUTEFORCE_CHUNK):
        masks = np.arange(start, min(start + _BRUTEFORCE_CHUNK, 1 << n), dtype=np.int64)
        chosen = ((masks[:, None] >> idx) & 1).astype(bool)
        last = np.maximum.accumulate(np.where(chosen, idx, -1), axis=1)
        prev = np.concatenate([np.full((masks.size, 1), -1), last[:, :-1]], axis=1)
        gains = np.maximum(np.abs(x - x[np.maximum(prev, 0)]) - c, 0.0)
        vals = np.where(chosen & (prev >= 0), gains, 0.0).sum(axis=1)
        i = int(np.argmax(vals))
        if vals[i] > best_val:
            best_val, best_mask = float(vals[i]), int(masks[i])
    return TVResult(best_val, tuple(j for j in range(n) if best_mask >> j & 1))


def tv_batch(values: np.ndarray, c_grid) -> np.ndarray:
    """Truncated variation for every row of ``values`` and every level in ``c_grid``.

    Returns an array of shape ``(rows, len(c_grid))``. The recursion is the one
    of :func:`tv_exact`, run elementwise over rows and levels, so entries agree
    with ``tv_exact`` bit for bit.
    """
    X = np.atleast_2d(np.asarray(values, dtype=float))
    c = np.asarray([_check_c(v) for v in np.atleast_1d(c_grid)], dtype=float)[None, :]
    if X.shape[1] == 0:
        raise ValueError("paths must have at least one point")
    if not np.all(np.isfinite(X)):
        raise ValueError("path values must be finite")
    rows = X.shape[0]
    shape = (rows, c.shape[1])
    M = np.zeros(shape)
    A = np.broadcast_to(-X[:, :1], shape).copy()
    B = np.broadcast_to(X[:, :1], shape).copy()
    up = np.empty(shape)
    down = np.empty(shape)
    for j in range(1, X.shape[1]):
        xj = X[:, j : j + 1]
        np.add(A, xj, out=up)
        np.subtract(B, xj, out=down)
        np.maximum(up, down, out=up)
        up -= c
        np.maximum(M, up, out=M)
        np.subtract(M, xj, out=up)
        np.maximum(A, up, out=A)
        np.add(M, xj, out=up)
        np.maximum(B, up, out=B)
    return M


def tv_sweep(path, c_grid) -> list[tuple[float, float]]:
    """``[(c, TV^c)]`` for an ascending grid of levels."""
    grid = [_check_c(v) for v in c_grid]
    if not grid:
        raise ValueError("c_grid must not be empty")
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise ValueError("c_grid must be sorted ascending")
    values = tv_batch(_as_values(path)[None, :], grid)[0]
    return [(c, float(v)) for c, v in zip(grid, values)]

"""Monte Carlo estimates of moments, tails and the small-c limit of TV^c.

Replica ``j`` is generated from the seed ``replica_seed(base_seed, j)``, so the
raw ``replica x c`` matrix does not depend on how replicas are scheduled.
Replicas are processed in fixed-size blocks; threads only decide which block
runs where.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
from scipy import stats

from truncvar import __version__
from truncvar.certificate import ChainingCertificate, build_certificate, fbm_envelope, moment_bound, tail_bound
from truncvar.paths import GeneratorSpec, generate_values
from truncvar.variation import tv_batch

BLOCK_SIZE = 32
MODES = ("moments", "tail", "lln")

# Pinned claim tolerances.
SLOPE_TOLERANCE = 0.15
MOMENT_CONFIDENCE = 0.99
TAIL_CONFIDENCE = 0.99
MIN_BATCHES = 10
LLN_BAND = (0.85, 1.05)
LLN_ZERO_LIMIT = 0.1
RESOLUTION_FACTOR = 8.0


class ReplicaError(RuntimeError):
    pass


def replica_seed(base_seed: int, j: int) -> int:
    """64-bit seed of replica ``j``: a counter-based hash of ``(base_seed, j)``."""
    ss = np.random.SeedSequence(int(base_seed), spawn_key=(int(j),))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _sorted(grid: Sequence[float], name: str) -> list[float]:
    grid = [float(v) for v in grid]
    if not grid:
        raise ValueError(f"{name} must not be empty")
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise ValueError(f"{name} must be sorted ascending")
    return grid


@dataclass(frozen=True)
class ExperimentConfig:
    generator: GeneratorSpec
    replicas: int
    c_grid: tuple[float, ...]
    k_grid: tuple[float, ...] = (1.0, 2.0, 4.0)
    u_grid: tuple[float, ...] = (1.0, 1.5, 2.0)
    base_seed: int = 0
    parallel_width: int = 1
    flavor: str = "audited"
    r: int | None = None

    def __post_init__(self):
        if int(self.replicas) != self.replicas or self.replicas < 1:
            raise ValueError("replicas must be a positive integer")
        if int(self.parallel_width) != self.parallel_width or self.parallel_width < 1:
            raise ValueError("parallel_width must be a positive integer")
        object.__setattr__(self, "c_grid", tuple(_sorted(self.c_grid, "c_grid")))
        object.__setattr__(self, "k_grid", tuple(_sorted(self.k_grid, "k_grid")))
        object.__setattr__(self, "u_grid", tuple(_sorted(self.u_grid, "u_grid")))
        if any(c < 0 for c in self.c_grid):
            raise ValueError("c_grid entries must be >= 0")
        if any(k < 1 for k in self.k_grid):
            raise ValueError("k_grid entries must be >= 1")
        if any(u < 1 for u in self.u_grid):
            raise ValueError("u_grid entries must be >= 1")

    def to_dict(self) -> dict[str, Any]:
        gen = self.generator.to_dict()
        gen.pop("seed", None)
        return {
            "generator": gen,
            "replicas": int(self.replicas),
            "c_grid": list(self.c_grid),
            "k_grid": list(self.k_grid),
            "u_grid": list(self.u_grid),
            "base_seed": int(self.base_seed),
            "parallel_width": int(self.parallel_width),
            "flavor": self.flavor,
            "r": self.r,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ExperimentConfig":
        known = {"generator", "replicas", "c_grid", "k_grid", "u_grid", "base_seed", "parallel_width", "flavor", "r"}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown config fields: {sorted(extra)}")
        kw = {k: d[k] for k in known & set(d) if k != "generator"}
        for key in ("c_grid", "k_grid", "u_grid"):
            if key in kw:
                kw[key] = tuple(kw[key])
        return cls(generator=GeneratorSpec.from_dict(d["generator"]), **kw)

    def digest(self) -> str:
        """Stable hash of the canonical config. ``parallel_width`` is excluded: it cannot change results."""
        canon = self.to_dict()
        canon.pop("parallel_width")
        blob = json.dumps(canon, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def effective_width(requested: int) -> int:
    cap = os.environ.get("TRUNCVAR_THREADS")
    if cap:
        try:
            return max(1, min(requested, int(cap)))
        except ValueError:
            raise ValueError(f"TRUNCVAR_THREADS must be an integer, got {cap!r}") from None
    return requested


def run_replicas(config: ExperimentConfig) -> np.ndarray:
    """Raw ``TV^c`` matrix of shape ``(replicas, len(c_grid))``."""
    seeds = [replica_seed(config.base_seed, j) for j in range(config.replicas)]
    blocks = [(s, min(s + BLOCK_SIZE, config.replicas)) for s in range(0, config.replicas, BLOCK_SIZE)]
    out = np.empty((config.replicas, len(config.c_grid)))

    def work(block):
        lo, hi = block
        try:
            values = generate_values(config.generator, seeds[lo:hi])
        except Exception as exc:
            raise ReplicaError(f"generator failed for replicas {lo}..{hi - 1}: {exc}") from exc
        out[lo:hi] = tv_batch(values, config.c_grid)

    width = effective_width(config.parallel_width)
    if width == 1:
        for b in blocks:
            work(b)
    else:
        with ThreadPoolExecutor(max_workers=width) as pool:
            for fut in [pool.submit(work, b) for b in blocks]:
                fut.result()
    return out


# -- estimators --------------------------------------------------------------------


@dataclass(frozen=True)
class MomentRow:
    c: float
    k: float
    estimate: float
    stderr: float
    ucb: float
    bound: float | None


@dataclass(frozen=True)
class MomentEstimate:
    rows: list[MomentRow]
    slope: float | None
    intercept: float | None


def _power_mean(x: np.ndarray, k: float) -> float:
    return float(np.mean(x**k) ** (1.0 / k))


def estimate_moments(matrix: np.ndarray, c_grid: Sequence[float], k_grid: Sequence[float],
                     cert: ChainingCertificate | None = None, batches: int = MIN_BATCHES) -> MomentEstimate:
    """Power-mean estimates of ``||TV^c||_k`` with batch standard errors.

    The upper confidence end is ``estimate + t * stderr`` with the two-sided
    99% Student quantile on ``batches - 1`` degrees of freedom. Also fits the
    least-squares slope of ``log ||TV^c||_1`` against ``log c`` (cells with
    ``c > 0`` and positive estimate).
    """
    matrix = np.asarray(matrix, dtype=float)
    n = matrix.shape[0]
    if matrix.shape[1] != len(c_grid):
        raise ValueError("matrix columns must match c_grid")
    if batches < MIN_BATCHES:
        raise ValueError(f"at least {MIN_BATCHES} batches are required")
    if max(k_grid) > 6 and n < 10_000:
        raise ValueError("moments above k = 6 need at least 10^4 replicas")
    if n < 100:
        raise ValueError("moment estimation needs at least 100 replicas")
    tq = stats.t.ppf(0.5 + MOMENT_CONFIDENCE / 2, batches - 1)
    parts = np.array_split(np.arange(n), batches)
    rows = []
    for ci, c in enumerate(c_grid):
        col = matrix[:, ci]
        for k in k_grid:
            est = _power_mean(col, k)
            per_batch = np.array([_power_mean(col[idx], k) for idx in parts])
            se = float(per_batch.std(ddof=1) / math.sqrt(batches))
            bound = moment_bound(cert, k, c) if cert is not None and c > 0 else None
            rows.append(MomentRow(float(c), float(k), est, se, est + tq * se, bound))

    l1 = np.array([_power_mean(matrix[:, ci], 1.0) for ci in range(len(c_grid))])
    cs = np.asarray(c_grid, dtype=float)
    keep = (cs > 0) & (l1 > 0)
    slope = intercept = None
    if keep.sum() >= 2:
        slope, intercept = (float(v) for v in np.polyfit(np.log(cs[keep]), np.log(l1[keep]), 1))
    return MomentEstimate(rows, slope, intercept)


@dataclass(frozen=True)
class TailRow:
    c: float
    u: float
    threshold: float
    freq: float
    ucb: float
    bound: float
    passed: bool


def binomial_upper(successes: int, trials: int, confidence: float = TAIL_CONFIDENCE) -> float:
    """Exact one-sided (Clopper-Pearson) upper confidence bound for a binomial proportion."""
    if successes >= trials:
        return 1.0
    return float(stats.beta.ppf(confidence, successes + 1, trials - successes))


def estimate_tail(matrix: np.ndarray, c_grid: Sequence[float], cert: ChainingCertificate,
                  u_grid: Sequence[float]) -> list[TailRow]:
    """Frequency of ``TV^c >= e K u c^(1-1/q)`` against ``exp(-u^(q/p))`` per ``(c, u)``."""
    matrix = np.asarray(matrix, dtype=float)
    n = matrix.shape[0]
    if not len(u_grid):
        raise ValueError("u_grid must not be empty")
    if n < 1000:
        raise ValueError("tail estimation needs at least 1000 replicas")
    rows = []
    for ci, c in enumerate(c_grid):
        if not c > 0:
            raise ValueError("tail estimation needs c > 0")
        for u in u_grid:
            thr, prob = tail_bound(cert, u, c)
            hits = int(np.count_nonzero(matrix[:, ci] >= thr))
            ucb = binomial_upper(hits, n)
            rows.append(TailRow(float(c), float(u), thr, hits / n, ucb, prob, ucb <= prob))
    return rows


@dataclass(frozen=True)
class LLNRow:
    c: float
    mean: float
    stderr: float


def lln_table(matrix: np.ndarray, c_grid: Sequence[float]) -> list[LLNRow]:
    """Mean and standard error of ``c * TV^c`` per level, in decreasing ``c``."""
    matrix = np.asarray(matrix, dtype=float)
    rows = []
    for ci in np.argsort(c_grid)[::-1]:
        c = float(c_grid[ci])
        vals = c * matrix[:, ci]
        se = float(vals.std(ddof=1) / math.sqrt(vals.size)) if vals.size > 1 else 0.0
        rows.append(LLNRow(c, float(vals.mean()), se))
    return rows


def resolution_guard(c_min: float, n_steps: int) -> float:
    """Smallest admissible ``c`` for ``n_steps``: ``8 * sqrt(1/n_steps)``."""
    floor = RESOLUTION_FACTOR * math.sqrt(1.0 / n_steps)
    if c_min < floor * (1 - 1e-12):
        raise ValueError(
            f"c={c_min:g} is below the resolution guard {floor:g} = {RESOLUTION_FACTOR:g}*sqrt(dt): "
            "the sampled path cannot resolve oscillations of that size, so TV^c would be biased down"
        )
    return floor


def lln_check(c_sequence: Sequence[float], replicas: int, n_steps: int = 2**16, base_seed: int = 0,
              generator: GeneratorSpec | None = None, parallel_width: int = 1) -> list[LLNRow]:
    """``c * TV^c`` over a decreasing sequence of levels (Brownian motion by default)."""
    cs = [float(c) for c in c_sequence]
    if any(b >= a for a, b in zip(cs, cs[1:])):
        raise ValueError("c_sequence must be strictly decreasing")
    gen = generator or GeneratorSpec("brownian", n_steps)
    resolution_guard(min(cs), gen.n_steps)
    cfg = ExperimentConfig(gen, replicas, tuple(sorted(cs)), base_seed=base_seed, parallel_width=parallel_width)
    return lln_table(run_replicas(cfg), cfg.c_grid)


# -- experiment driver ----------------------------------------------------------------


def envelope_for(gen: GeneratorSpec):
    """Moment envelope attached to a generator, or ``None`` when no theorem applies."""
    if gen.kind == "brownian":
        return fbm_envelope(0.5)
    if gen.kind == "fbm":
        return fbm_envelope(gen.H)
    return None


def quadratic_variation_target(gen: GeneratorSpec) -> float | None:
    if gen.kind == "brownian" or (gen.kind == "fbm" and gen.H == 0.5):
        return 1.0
    if gen.kind == "fbm" and gen.H > 0.5:
        return 0.0
    return None


@dataclass
class ExperimentReport:
    mode: str
    config: ExperimentConfig
    certificate: dict | None
    table_header: tuple[str, ...]
    table: list[tuple]
    claims: list[dict]
    summary: dict = field(default_factory=dict)
    wall_clock: float = 0.0

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.claims)

    def to_dict(self) -> dict:
        """Report record; the config omits ``parallel_width`` so reports at any width match byte for byte."""
        config = self.config.to_dict()
        config.pop("parallel_width")
        return {
            "mode": self.mode,
            "software_version": __version__,
            "config": config,
            "config_digest": self.config.digest(),
            "certificate": self.certificate,
            "summary": self.summary,
            "table": {"header": list(self.table_header), "rows": [list(r) for r in self.table]},
            "claims": self.claims,
            "passed": self.passed,
            "wall_clock": self.wall_clock,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def to_csv(self) -> str:
        lines = [",".join(self.table_header)]
        for row in self.table:
            lines.append(",".join("" if v is None else format(float(v), ".17g") for v in row))
        return "\n".join(lines) + "\n"


def _claim(name: str, passed: bool, tolerance: str, **detail) -> dict:
    return {"name": name, "passed": bool(passed), "tolerance": tolerance, **detail}


def run_experiment(config: ExperimentConfig, mode: str) -> ExperimentReport:
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    start = time.perf_counter()
    gen = config.generator
    env = envelope_for(gen)
    cert = build_certificate(env, r=config.r, flavor=config.flavor) if env is not None else None
    cert_dict = cert.to_dict() if cert is not None else None

    if mode == "lln":
        resolution_guard(min(config.c_grid), gen.n_steps)
    matrix = run_replicas(config)
    claims: list[dict] = []
    summary: dict = {}

    if mode == "moments":
        est = estimate_moments(matrix, config.c_grid, config.k_grid, cert)
        header = ("c", "k", "estimate", "stderr", "bound")
        table = [(r.c, r.k, r.estimate, r.stderr, r.bound) for r in est.rows]
        summary = {"slope": est.slope, "intercept": est.intercept}
        if env is not None and est.slope is not None:
            expected = 1 - 1 / env.q
            claims.append(_claim("moment_slope", abs(est.slope - expected) <= SLOPE_TOLERANCE,
                                 f"|slope - (1 - 1/q)| <= {SLOPE_TOLERANCE}", slope=est.slope, expected=expected))
        if cert is not None:
            bad = [(r.c, r.k) for r in est.rows if r.bound is not None and r.ucb > r.bound]
            claims.append(_claim("certificate_domination", not bad,
                                 f"estimate + t_{{0.995,{MIN_BATCHES - 1}}} * stderr <= K k^(p/q) c^(1-1/q)",
                                 violations=bad))
    elif mode == "tail":
        if cert is None:
            raise ValueError("tail mode needs a generator with a moment envelope (brownian or fbm)")
        rows = estimate_tail(matrix, config.c_grid, cert, config.u_grid)
        header = ("c", "u", "freq", "ucb", "bound")
        table = [(r.c, r.u, r.freq, r.ucb, r.bound) for r in rows]
        summary = {"thresholds": [[r.c, r.u, r.threshold] for r in rows]}
        claims.append(_claim("tail_bound", all(r.passed for r in rows),
                             f"{TAIL_CONFIDENCE:.0%} Clopper-Pearson upper bound <= exp(-u^(q/p))",
                             failing=[[r.c, r.u] for r in rows if not r.passed]))
    else:
        rows = lln_table(matrix, config.c_grid)
        header = ("c", "mean", "stderr")
        table = [(r.c, r.mean, r.stderr) for r in rows]
        target = quadratic_variation_target(gen)
        last = rows[-1]
        summary = {"target": target, "resolution_factor": RESOLUTION_FACTOR}
        if target == 1.0:
            lo, hi = LLN_BAND
            claims.append(_claim("lln_limit", lo <= last.mean <= hi, f"mean c*TV^c in [{lo}, {hi}]",
                                 c=last.c, mean=last.mean))
        elif target == 0.0:
            claims.append(_claim("lln_limit", last.mean < LLN_ZERO_LIMIT, f"mean c*TV^c < {LLN_ZERO_LIMIT}",
                                 c=last.c, mean=last.mean))

    report = ExperimentReport(mode, config, cert_dict, header, table, claims, summary)
    report.wall_clock = time.perf_counter() - start
    return report

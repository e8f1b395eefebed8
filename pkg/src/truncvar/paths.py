"""Sampled trajectories on [0, 1] with known increment structure.

Brownian motion, fractional Brownian motion (Hosking recursion, with a
Cholesky oracle for small sizes) and a finite-variance Student-t random walk.
All generators are pure functions of their arguments and a 64-bit seed.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
from scipy.special import gammaln

KINDS = ("brownian", "fbm", "heavy_tail_walk")
FBM_METHODS = ("hosking", "cholesky")
CHOLESKY_MAX_STEPS = 2**10


class CovarianceError(np.linalg.LinAlgError):
    """Raised when a numerical covariance matrix is not positive definite."""


@dataclass(frozen=True)
class SampledPath:
    """One trajectory: strictly increasing ``times`` in [0, 1] and ``values``."""

    times: np.ndarray
    values: np.ndarray
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if times.ndim != 1 or values.ndim != 1:
            raise ValueError("times and values must be one-dimensional")
        if times.shape != values.shape:
            raise ValueError(f"length mismatch: {times.size} times, {values.size} values")
        if times.size == 0:
            raise ValueError("a path needs at least one point")
        if not np.all(np.isfinite(values)) or not np.all(np.isfinite(times)):
            raise ValueError("path contains non-finite entries")
        if np.any(np.diff(times) <= 0):
            raise ValueError("times must be strictly increasing")
        if times[0] < 0 or times[-1] > 1:
            raise ValueError("times must lie in [0, 1]")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return self.values.size

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.values)

    def restrict(self, start: int, stop: int) -> "SampledPath":
        """Sub-path on sample indices ``start..stop`` inclusive."""
        return SampledPath(self.times[start : stop + 1], self.values[start : stop + 1], dict(self.meta))

    # -- serialization -------------------------------------------------------

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("t,x\n")
        for t, x in zip(self.times, self.values):
            buf.write(f"{t:.17g},{x:.17g}\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "SampledPath":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or [h.strip() for h in rows[0]] != ["t", "x"]:
            raise ValueError("path CSV must start with the header 't,x'")
        body = [r for r in rows[1:] if r]
        try:
            arr = np.array([[float(a), float(b)] for a, b in body], dtype=float)
        except ValueError as exc:
            raise ValueError(f"malformed path CSV: {exc}") from None
        arr = arr.reshape(-1, 2)
        return cls(arr[:, 0], arr[:, 1])

    def to_json(self) -> str:
        record = {"meta": self.meta, "times": self.times.tolist(), "values": self.values.tolist()}
        return json.dumps(record, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "SampledPath":
        record = json.loads(text)
        try:
            return cls(record["times"], record["values"], record.get("meta", {}))
        except KeyError as exc:
            raise ValueError(f"path JSON is missing {exc}") from None


@dataclass(frozen=True)
class GeneratorSpec:
    kind: str
    n_steps: int
    seed: int = 0
    H: float | None = None
    tail_dof: float | None = None
    method: str = "hosking"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown generator kind {self.kind!r}; expected one of {KINDS}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ValueError("n_steps must be a positive integer")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.kind == "fbm":
            _check_hurst(self.H)
            if self.method not in FBM_METHODS:
                raise ValueError(f"unknown fbm method {self.method!r}")
        if self.kind == "heavy_tail_walk":
            _check_dof(self.tail_dof)

    def with_seed(self, seed: int) -> "GeneratorSpec":
        return GeneratorSpec(self.kind, self.n_steps, int(seed), self.H, self.tail_dof, self.method)

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"kind": self.kind, "n_steps": int(self.n_steps), "seed": int(self.seed)}
        if self.kind == "fbm":
            out["H"] = float(self.H)
            out["method"] = self.method
        if self.kind == "heavy_tail_walk":
            out["tail_dof"] = float(self.tail_dof)
        return out

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "GeneratorSpec":
        known = {"kind", "n_steps", "seed", "H", "tail_dof", "method"}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown generator fields: {sorted(extra)}")
        return cls(
            kind=d["kind"],
            n_steps=d["n_steps"],
            seed=d.get("seed", 0),
            H=d.get("H"),
            tail_dof=d.get("tail_dof"),
            method=d.get("method", "hosking"),
        )


def _check_hurst(H):
    if H is None or not 0 < H < 1:
        raise ValueError(f"Hurst exponent must lie in (0, 1), got {H}")


def _check_dof(dof):
    if dof is None or not dof > 2:
        raise ValueError(f"tail_dof must exceed 2 for finite variance, got {dof}")


def uniform_times(n_steps: int) -> np.ndarray:
    return np.arange(n_steps + 1, dtype=float) / n_steps


def _from_increments(increments: np.ndarray) -> np.ndarray:
    """Prepend X(0) = 0 and accumulate along the last axis."""
    shape = increments.shape[:-1] + (1,)
    return np.concatenate([np.zeros(shape), np.cumsum(increments, axis=-1)], axis=-1)


# -- Gaussian utilities -------------------------------------------------------


def fgn_autocovariance(H: float, lag):
    """Autocovariance of unit-spaced, unit-variance fractional Gaussian noise.

    ``lag`` may be an integer or an integer array.
    """
    _check_hurst(H)
    j = np.abs(np.asarray(lag, dtype=float))
    h2 = 2.0 * H
    gamma = 0.5 * (np.abs(j + 1) ** h2 - 2 * j**h2 + np.abs(j - 1) ** h2)
    return float(gamma) if gamma.ndim == 0 else gamma


def gaussian_abs_moment_norm(k: float, sigma: float = 1.0) -> float:
    """k-norm ``(E|Z|^k)^(1/k)`` of ``Z ~ N(0, sigma^2)``, via log-gamma."""
    if k < 1:
        raise ValueError("k must be at least 1")
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    log_moment = 0.5 * k * math.log(2.0) + gammaln(0.5 * (k + 1)) - 0.5 * math.log(math.pi)
    return sigma * math.exp(log_moment / k)


# -- fractional Gaussian noise ------------------------------------------------


def hosking_fgn(H: float, innovations: np.ndarray) -> np.ndarray:
    """Unit-spaced fGn from standard normal innovations by the Hosking recursion.

    ``innovations`` has shape ``(n,)`` or ``(batch, n)``. Each row is mapped to
    ``X_t = sum_j phi_{t,j} X_{t-j} + sqrt(v_t) Z_t`` with Durbin-Levinson
    coefficients. This is forward substitution with the Cholesky factor of the
    Toeplitz covariance, so the output equals :func:`cholesky_fgn` for the same
    innovations up to rounding.
    """
    _check_hurst(H)
    Z = np.atleast_2d(np.asarray(innovations, dtype=float))
    n = Z.shape[1]
    gamma = fgn_autocovariance(H, np.arange(n + 1))
    if n == 1 or not np.any(gamma[1:n]):
        # uncorrelated noise (H = 1/2): every partial autocorrelation vanishes
        X = Z.copy()
        return X if np.ndim(innovations) == 2 else X[0]

    X = np.empty_like(Z)
    X[:, 0] = Z[:, 0]
    phi = np.zeros(0)
    v = 1.0
    for t in range(1, n):
        # phi holds phi_{t-1, 1..t-1}
        kappa = (gamma[t] - phi @ gamma[t - 1 : 0 : -1]) / v
        phi = np.concatenate([phi - kappa * phi[::-1], [kappa]])
        v *= 1.0 - kappa * kappa
        if v <= 0:
            raise CovarianceError(f"innovation variance collapsed at step {t} (H={H})")
        X[:, t] = X[:, :t] @ phi[::-1] + math.sqrt(v) * Z[:, t]
    return X if np.ndim(innovations) == 2 else X[0]


def fgn_covariance(H: float, n: int) -> np.ndarray:
    from scipy.linalg import toeplitz

    return toeplitz(fgn_autocovariance(H, np.arange(n)))


def cholesky_fgn(H: float, innovations: np.ndarray) -> np.ndarray:
    """Unit-spaced fGn as ``L @ Z`` with ``L`` the Cholesky factor of the covariance.

    Limited to ``n <= 2**10``. A covariance that is not numerically positive
    definite raises :class:`CovarianceError`; nothing is regularized.
    """
    Z = np.atleast_2d(np.asarray(innovations, dtype=float))
    n = Z.shape[1]
    if n > CHOLESKY_MAX_STEPS:
        raise ValueError(f"cholesky method is limited to n <= {CHOLESKY_MAX_STEPS}, got {n}")
    try:
        L = np.linalg.cholesky(fgn_covariance(H, n))
    except np.linalg.LinAlgError as exc:
        raise CovarianceError(f"fGn covariance is not positive definite (H={H}, n={n})") from exc
    X = Z @ L.T
    return X if np.ndim(innovations) == 2 else X[0]


# -- generators ---------------------------------------------------------------


def generate_bm(n_steps: int, seed: int) -> SampledPath:
    spec = GeneratorSpec("brownian", n_steps, seed)
    return generate(spec)


def generate_fbm(H: float, n_steps: int, seed: int, method: str = "hosking") -> SampledPath:
    spec = GeneratorSpec("fbm", n_steps, seed, H=H, method=method)
    return generate(spec)


def generate_heavy_tail_walk(tail_dof: float, n_steps: int, seed: int) -> SampledPath:
    spec = GeneratorSpec("heavy_tail_walk", n_steps, seed, tail_dof=tail_dof)
    return generate(spec)


def draw_innovations(spec: GeneratorSpec) -> np.ndarray:
    """The raw random stream behind ``spec``: one row of length ``n_steps``."""
    rng = np.random.default_rng(int(spec.seed))
    if spec.kind == "heavy_tail_walk":
        return rng.standard_t(spec.tail_dof, size=spec.n_steps)
    return rng.standard_normal(spec.n_steps)


def increments_from_innovations(spec: GeneratorSpec, innovations: np.ndarray) -> np.ndarray:
    """Map innovation rows to path increments at resolution ``1/n_steps``."""
    n = spec.n_steps
    if spec.kind == "brownian":
        return innovations / math.sqrt(n)
    if spec.kind == "heavy_tail_walk":
        nu = spec.tail_dof
        return innovations * math.sqrt((nu - 2.0) / nu) / math.sqrt(n)
    fgn = hosking_fgn if spec.method == "hosking" else cholesky_fgn
    return fgn(spec.H, innovations) * float(n) ** (-spec.H)


def generate(spec: GeneratorSpec) -> SampledPath:
    """Generate the path described by ``spec`` (bit-identical for equal specs)."""
    values = _from_increments(increments_from_innovations(spec, draw_innovations(spec)))
    return SampledPath(uniform_times(spec.n_steps), values, {"generator": spec.to_dict()})


def generate_values(spec: GeneratorSpec, seeds: Sequence[int]) -> np.ndarray:
    """Values of one path per seed, stacked as a ``(len(seeds), n_steps + 1)`` array.

    Row ``j`` is the path of ``spec.with_seed(seeds[j])``; the linear maps are
    applied to the whole block at once.
    """
    Z = np.stack([draw_innovations(spec.with_seed(s)) for s in seeds])
    return _from_increments(increments_from_innovations(spec, Z))

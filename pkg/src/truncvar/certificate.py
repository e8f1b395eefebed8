"""Explicit constants for the moment bound on truncated variation.

From a moment envelope ``||X(t) - X(s)||_k <= C1 k^p |t - s|^q`` this module
derives the truncation envelope ``(C2, f)``, checks the summability condition
on ``f``, and evaluates the chaining constants ``M0, D1..D4`` and
``K = D1 + D2 D4``, giving

    ||TV^c||_k <= K c^(1 - 1/q) k^(p/q)
    P(TV^c >= e K u c^(1 - 1/q)) <= exp(-u^(q/p)),  u >= 1.

Two flavors are provided. ``paper_literal`` takes ``M0 = 2^q C2 r^(2q)`` and
counts ``2r - 1`` neighbours per grid point. ``audited`` takes
``M0 = 2e C2 r^(2q)``, the choice under which every step of the bound checks
numerically, and multiplies ``D1`` and ``D3`` by ``(4r + 1) / (2r - 1)``, the
ratio of a safe neighbourhood count to the nominal one.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.special import gammaln

from truncvar.paths import gaussian_abs_moment_norm

FLAVORS = ("paper_literal", "audited")
SERIES_REL_TOL = 1e-15
SERIES_RATIO_GUARD = 0.5
SERIES_MAX_TERMS = 10_000


class CertificateError(ValueError):
    """The requested certificate cannot be issued (e.g. the growth series is not certified)."""


@dataclass(frozen=True)
class MomentEnvelope:
    C1: float
    p: float
    q: float

    def __post_init__(self):
        if not (math.isfinite(self.C1) and self.C1 > 0):
            raise ValueError("C1 must be positive and finite")
        if not (math.isfinite(self.p) and self.p > 0):
            raise ValueError("p must be positive and finite")
        if not 0 < self.q < 1:
            raise ValueError("q must lie in (0, 1)")

    def bound(self, k: float, gap: float) -> float:
        """Right-hand side ``C1 k^p |t - s|^q``."""
        return self.C1 * k**self.p * abs(gap) ** self.q


@dataclass(frozen=True)
class DecayFunction:
    """``subgaussian_derived``: ``exp(-p x^(1/p))``; ``power``: ``x^-alpha``; ``zero``: 0."""

    kind: str
    param: float = 0.0

    def __post_init__(self):
        if self.kind not in ("subgaussian_derived", "power", "zero"):
            raise ValueError(f"unknown decay kind {self.kind!r}")
        if self.kind != "zero" and not self.param > 0:
            raise ValueError("decay parameter must be positive")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(over="ignore", divide="ignore"):
            if self.kind == "subgaussian_derived":
                p = self.param
                out = np.exp(-p * x ** (1.0 / p))
            elif self.kind == "power":
                out = x ** (-self.param)
            else:
                out = np.zeros_like(x)
        return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class TruncationEnvelope:
    C2: float
    f: DecayFunction


@dataclass(frozen=True)
class GrowthCheck:
    C3: float
    partial_sum: float
    tail_bound: float
    converged: bool
    terms: int
    reason: str = ""


@dataclass(frozen=True)
class ChainingCertificate:
    envelope: MomentEnvelope
    trunc_envelope: TruncationEnvelope
    r: int
    M0: float
    D1: float
    D2: float
    D3: float
    D4: float
    K: float
    flavor: str
    growth: GrowthCheck
    conjectural: bool = False

    @property
    def D_tail(self) -> float:
        """Constant of the tail bound, ``e K``."""
        return math.e * self.K

    def to_dict(self) -> dict:
        return {
            "envelope": asdict(self.envelope),
            "trunc_envelope": {"C2": self.trunc_envelope.C2, "f": asdict(self.trunc_envelope.f)},
            "r": self.r,
            "flavor": self.flavor,
            "M0": self.M0,
            "D1": self.D1,
            "D2": self.D2,
            "D3": self.D3,
            "D4": self.D4,
            "K": self.K,
            "D_tail": self.D_tail,
            "conjectural": self.conjectural,
            "growth_check": asdict(self.growth),
        }


# -- envelopes -----------------------------------------------------------------


def fbm_envelope(H: float, k_max: int = 256) -> MomentEnvelope:
    """Envelope ``(C1, 1/2, H)`` of fBm: ``C1 = max_k ||N(0,1)||_k / sqrt(k)`` over ``k <= k_max``."""
    if not 0 < H < 1:
        raise ValueError("H must lie in (0, 1)")
    C1 = max(gaussian_abs_moment_norm(k) / math.sqrt(k) for k in range(1, k_max + 1))
    return MomentEnvelope(C1, 0.5, H)


def derive_trunc_envelope(env: MomentEnvelope) -> TruncationEnvelope:
    """Sub-Gaussian truncation envelope: ``C2 = e C1 p^p`` and ``f(x) = exp(-p x^(1/p))``.

    Substituting ``d = x C2 k^p |t-s|^q`` into
    ``(kp)^p e C1 |t-s|^q exp(-(1/k) [d / (e C1 |t-s|^q)]^(1/p))`` makes the
    exponent ``-p x^(1/p)``, independent of ``k``.
    """
    if env.p > 1:
        raise ValueError("derived truncation envelope needs p <= 1; supply f explicitly")
    C2 = math.e * env.C1 * env.p**env.p
    return TruncationEnvelope(C2, DecayFunction("subgaussian_derived", env.p))


def check_gamma_inequality(k_grid: Sequence[float], p_grid: Sequence[float], floor: float = 1e-3):
    """Test ``Gamma(kp)^(1/k) <= (kp)^p`` on a grid, in log space.

    Returns ``(ok, violations)`` where ``violations`` lists offending ``(k, p)``.
    The inequality is ``Gamma(x) <= x^x`` with ``x = kp``, true exactly when ``x >= 1``.
    """
    violations = []
    for k in k_grid:
        for p in p_grid:
            if k < 1 or not 0 < p <= 1:
                raise ValueError(f"need k >= 1 and 0 < p <= 1, got k={k}, p={p}")
            x = k * p
            if x < floor:
                raise ValueError(f"kp={x} is below the floor {floor}")
            lhs = gammaln(x) / k
            rhs = p * math.log(x)
            if lhs > rhs + 1e-15 * max(1.0, abs(rhs)):
                violations.append((k, p))
    return not violations, violations


# -- growth condition ----------------------------------------------------------


def growth_condition_check(f: Callable[[float], float], r: int, q: float, p: float, C3: float,
                           max_terms: int = SERIES_MAX_TERMS) -> GrowthCheck:
    """Sum ``r^(l(1-q)) f(C3 (r^q/2)^(l/p))`` over ``l >= 0`` with a certified tail.

    Summation stops once a term is below ``1e-15`` of the running sum and the
    last three term ratios are below 1/2; the remainder is then bounded by the
    geometric series ``term * rho / (1 - rho)``. This is an upper bound when term
    ratios do not increase, which holds for the exponential and power decays used
    here. Three consecutive zero terms end the sum with zero tail (``f`` is
    non-increasing and its argument grows).
    """
    if not C3 > 0:
        raise ValueError("C3 must be positive")
    base = r**q / 2.0
    if base < 1.0 - 1e-12:
        raise ValueError(f"growth condition needs r >= 2^(1/q); r^q/2 = {base}")
    if base <= 1.0 + 1e-12:
        if f(C3) == 0:
            return GrowthCheck(C3, 0.0, 0.0, True, 1)
        return GrowthCheck(C3, math.inf, math.inf, False, 0,
                           "r^q/2 = 1: the argument of f stays constant and the series diverges")

    total = 0.0
    ratios: list[float] = []
    zeros = 0
    prev = None
    for l in range(max_terms):
        with np.errstate(over="ignore"):
            arg = C3 * base ** (l / p) if l / p * math.log(base) < 709 else math.inf
        fv = f(arg)
        if fv == 0:
            term = 0.0
        else:
            log_term = l * (1 - q) * math.log(r) + math.log(fv)
            term = math.exp(log_term) if log_term < 709 else math.inf
        if not math.isfinite(term):
            return GrowthCheck(C3, math.inf, math.inf, False, l + 1, "terms overflow; series diverges")
        total += term
        if term == 0:
            zeros += 1
            if zeros >= 3:
                return GrowthCheck(C3, total, 0.0, True, l + 1)
            prev = term
            continue
        zeros = 0
        if prev:
            ratios.append(term / prev)
        prev = term
        recent = ratios[-3:]
        if len(recent) == 3 and max(recent) < SERIES_RATIO_GUARD and term < SERIES_REL_TOL * total:
            rho = max(recent)
            return GrowthCheck(C3, total, term * rho / (1 - rho), True, l + 1)
    return GrowthCheck(C3, total, math.inf, False, max_terms,
                       f"ratio guard not met within {max_terms} terms")


# -- chaining constants ----------------------------------------------------------


def default_r(q: float) -> int:
    """Smallest integer ``r`` with ``r^q > 2`` (strict, so the growth series can converge)."""
    r = max(2, math.ceil(2 ** (1 / q)))
    while r**q <= 2.0:
        r += 1
    return r


def chaining_constants(C1: float, C2: float, q: float, r: int, flavor: str = "audited") -> dict[str, float]:
    """``M0, D1, D2, D3`` for the given flavor (``D4`` needs the growth series)."""
    if flavor not in FLAVORS:
        raise ValueError(f"flavor must be one of {FLAVORS}")
    if flavor == "paper_literal":
        M0 = 2**q * C2 * r ** (2 * q)
        card = 1.0
    else:
        M0 = 2 * math.e * C2 * r ** (2 * q)
        card = (4 * r + 1) / (2 * r - 1)
    scale = r ** (3 - q) * M0 ** (1 / q - 1)
    return {
        "M0": M0,
        "D1": card * 8 * C1 * scale / (r ** (1 - q) - 1),
        "D2": M0 / (4 * 2**q),
        "D3": card * 4 * C2 * scale,
    }


def build_certificate(env: MomentEnvelope, trunc_env: TruncationEnvelope | None = None,
                      r: int | None = None, flavor: str = "audited") -> ChainingCertificate:
    """Issue the chaining certificate; refuses when the growth series is not certified."""
    if trunc_env is None:
        trunc_env = derive_trunc_envelope(env)
    if r is None:
        r = default_r(env.q)
    if int(r) != r or r < 2:
        raise ValueError("r must be an integer >= 2")
    if r**env.q < 2.0 - 1e-12:
        raise ValueError(f"r={r} is below 2^(1/q) = {2 ** (1 / env.q):.6g}")
    consts = chaining_constants(env.C1, trunc_env.C2, env.q, r, flavor)
    growth = growth_condition_check(trunc_env.f, r, env.q, env.p, consts["D2"])
    if not growth.converged:
        raise CertificateError(f"growth series not certified: {growth.reason}")
    D4 = consts["D3"] * growth.partial_sum
    K = consts["D1"] + consts["D2"] * D4
    return ChainingCertificate(
        envelope=env,
        trunc_envelope=trunc_env,
        r=int(r),
        M0=consts["M0"],
        D1=consts["D1"],
        D2=consts["D2"],
        D3=consts["D3"],
        D4=D4,
        K=K,
        flavor=flavor,
        growth=growth,
        conjectural=trunc_env.f.kind == "power",
    )


# -- bounds ------------------------------------------------------------------------


def moment_bound(cert: ChainingCertificate, k: float, c: float) -> float:
    """``K c^(1 - 1/q) k^(p/q)``."""
    if k < 1 or not c > 0:
        raise ValueError("moment_bound needs k >= 1 and c > 0")
    env = cert.envelope
    return cert.K * c ** (1 - 1 / env.q) * k ** (env.p / env.q)


def tail_bound(cert: ChainingCertificate, u: float, c: float) -> tuple[float, float]:
    """``(threshold, probability)`` with ``P(TV^c >= threshold) <= probability``.

    Markov's inequality at order ``k = u^(q/p)`` applied to the moment bound
    gives threshold ``e K u c^(1 - 1/q)`` and probability ``exp(-u^(q/p))``.
    """
    if u < 1:
        raise ValueError("tail bound holds for u >= 1")
    if not c > 0:
        raise ValueError("c must be positive")
    env = cert.envelope
    return cert.D_tail * u * c ** (1 - 1 / env.q), math.exp(-(u ** (env.q / env.p)))


def threshold_eligible(cert: ChainingCertificate, k: float, c: float, n: int, m_k: int, gap: float) -> bool:
    """Whether ``C2 k^p gap^q <= 2^(-(n + 1 - m_k) q) c``, the condition for applying
    the truncation envelope at chain level ``n > m_k``."""
    env = cert.envelope
    lhs = cert.trunc_envelope.C2 * k**env.p * gap**env.q
    return lhs <= 2.0 ** (-(n + 1 - m_k) * env.q) * c

"""Truncated variation of sampled paths, chaining verifiers and moment certificates."""

__version__ = "0.1.0"

from truncvar.paths import (
    GeneratorSpec,
    SampledPath,
    fgn_autocovariance,
    gaussian_abs_moment_norm,
    generate,
    generate_bm,
    generate_fbm,
    generate_heavy_tail_walk,
)
from truncvar.variation import TVResult, tv_bruteforce, tv_exact, tv_sweep
from truncvar.certificate import (
    ChainingCertificate,
    GrowthCheck,
    MomentEnvelope,
    TruncationEnvelope,
    build_certificate,
    derive_trunc_envelope,
    fbm_envelope,
    moment_bound,
    tail_bound,
)

__all__ = [
    "GeneratorSpec",
    "SampledPath",
    "fgn_autocovariance",
    "gaussian_abs_moment_norm",
    "generate",
    "generate_bm",
    "generate_fbm",
    "generate_heavy_tail_walk",
    "TVResult",
    "tv_bruteforce",
    "tv_exact",
    "tv_sweep",
    "ChainingCertificate",
    "GrowthCheck",
    "MomentEnvelope",
    "TruncationEnvelope",
    "build_certificate",
    "derive_trunc_envelope",
    "fbm_envelope",
    "moment_bound",
    "tail_bound",
]

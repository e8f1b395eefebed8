"""How ||TV^c||_1 scales with c for fractional Brownian motion, next to the certified bound.

Run: python demos/scaling_and_certificate.py   (about ten seconds)
"""
import numpy as np

from truncvar import build_certificate, fbm_envelope
from truncvar.montecarlo import ExperimentConfig, run_experiment
from truncvar.paths import GeneratorSpec

H = 0.75
cert = build_certificate(fbm_envelope(H))
print(f"H={H}: r={cert.r}, M0={cert.M0:.4g}, K={cert.K:.6g} ({cert.flavor} constants)")

# The mean truncated variation should behave like c^(1 - 1/H) once c is
# well above the grid resolution n^-H.
c_grid = tuple(np.geomspace(0.005, 0.5, 7).tolist())
config = ExperimentConfig(GeneratorSpec("fbm", 2**11, H=H), replicas=300, c_grid=c_grid, k_grid=(1, 2, 4))
report = run_experiment(config, "moments")

print(f"\nfitted slope {report.summary['slope']:.3f}, theory {1 - 1 / H:.3f}")
print(f"{'c':>8} {'k':>3} {'estimate':>10} {'bound':>12} {'ratio':>8}")
for c, k, est, se, bound in report.table:
    print(f"{c:8.4f} {k:3.0f} {est:10.4f} {bound:12.2f} {est / bound:8.1e}")

# The certificate is honest but loose: the constants come from a union of
# worst cases over the whole chaining hierarchy.
for claim in report.claims:
    print(f"claim {claim['name']}: {'passed' if claim['passed'] else 'failed'}")

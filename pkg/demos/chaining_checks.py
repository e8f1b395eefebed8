"""The chaining skeleton: projections, neighbourhoods, length classes and the pathwise bound.

Run: python demos/chaining_checks.py
"""
from fractions import Fraction

import numpy as np

from truncvar.chaining import (
    KParams,
    classify_intervals,
    compute_m_k,
    neighborhood,
    project_pi,
    run_chain_trials,
    verify_chain_bound,
)

r = 3
t = 0.61
print("projections of t = 0.61 onto 3-adic grids:", [project_pi(t, n, r) for n in range(4)])

# Neighbours of a grid point live on the next level within 2 r^-n.
u = Fraction(1, 3)
print("I_2(1/3) has", len(neighborhood(u, 1, r)), "points; the count never exceeds 4r - 1 =", 4 * r - 1)

times = [0.0, 0.05, 0.3, 0.31, 1.0]
print("length classes of", times, "->", classify_intervals(times, r))

# The cutoff level moves with c: small c pushes more levels into the coarse sum.
for c in (0.01, 0.1, 1.0):
    print(f"m_k for k=1, c={c}: {compute_m_k(1, 0.5, 0.5, c, 8 * np.e, 4)}")

# One pathwise check on a random walk over T_6 with r = 2.
rng = np.random.default_rng(3)
x = np.concatenate([[0.0], np.cumsum(rng.standard_normal(64))]) / 8
grid = np.arange(65) / 64
rep = verify_chain_bound(x, grid[[0, 5, 17, 40, 64]], 0.05, KParams(1, 0.5, 0.5, 4.0), 2)
print(f"\nlhs={rep.lhs:.3f}  2*(coarse + fine)={2 * rep.rhs:.3f}  m_k={rep.m_k}  holds={rep.holds}")

summary = run_chain_trials(r=2, levels=6, trials=300, seed=0)
print("randomized trials:", summary)

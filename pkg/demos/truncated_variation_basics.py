"""Truncated variation on a few hand-made paths and on Brownian motion.

Run: python demos/truncated_variation_basics.py
"""
import numpy as np

from truncvar import generate_bm, tv_bruteforce, tv_exact, tv_sweep

# A zigzag 0, 1, 0, 1 has three unit moves. Each move is worth (1 - c)_+,
# until c is large enough that a single move is all that remains.
zigzag = [0.0, 1.0, 0.0, 1.0]
for c in (0.0, 0.5, 0.9, 1.2):
    res = tv_exact(zigzag, c, witness=True)
    print(f"zigzag  c={c:<4} TV^c={res.value:.3f}  witness indices={res.witness}")

# The linear-time recursion agrees with enumerating every subsequence.
x = np.random.default_rng(1).standard_normal(12)
print("\nexact vs brute force on 12 points:", tv_exact(x, 0.3).value, tv_bruteforce(x, 0.3).value)

# For Brownian motion the total variation blows up as the grid refines,
# while c * TV^c settles near the quadratic variation (here 1).
path = generate_bm(2**16, seed=7)
print("\nBrownian path, n = 2^16")
print(f"  sum |dX|   = {np.abs(path.increments).sum():9.2f}")
print(f"  sum dX^2   = {np.sum(path.increments**2):9.4f}")
for c, v in tv_sweep(path, [2**-5, 2**-4, 2**-3, 2**-2]):
    print(f"  c={c:<8.5f} TV^c={v:9.3f}  c*TV^c={c * v:.4f}")

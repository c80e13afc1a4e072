"""
Why the reject sampler and the rank weight behave
=================================================

Three small numerical checks: the accept-only chain keeps pi stationary,
a one-draw geometric rank estimate runs high, and the log-chunk rank
weight stays in (0, 1].
"""

# %%
import numpy as np

from vins.analysis import (acceptance_kernel, bias_curve, exact_flux_gap, harmonic_lemma,
                           simulate_chain, verify_detailed_balance)
from vins.samplers import harmonic_weight, rank_weight
from vins.weights import DegreeWeights

rng = np.random.default_rng(1)
pi = np.array([1.0, 3.0, 2.0, 6.0])
P = acceptance_kernel(pi)
print("kernel rows sum to", P.sum(axis=1))
print("pi P == pi:", np.allclose((pi / pi.sum()) @ P, pi / pi.sum()))
print("exact flux gap:", exact_flux_gap(pi))

# %%
rep = verify_detailed_balance(DegreeWeights.from_pi(pi), 200_000, rng)
print(f"Monte Carlo flux gap {rep.max_abs_flux_gap:.2e} with {rep.trials} proposals per state")
print("chain occupancy", simulate_chain(pi, 1_000_000, rng).round(3), "target", (pi / pi.sum()).round(3))

# %%
# E[Z/X] for X ~ Geometric(r/Z): the estimate overshoots, worst for small r
for pt in bias_curve(1000, [1, 10, 100, 500, 999]):
    print(f"r={pt.r:6.0f}  E[estimate]={pt.expected_estimate:9.2f}  relative overshoot {pt.psi_ratio:.3f}")

# %%
for k, h, b in harmonic_lemma(6):
    print(f"H(2^{k}) = {h:.4f} >= {b:.1f}")

# %%
zw = 15
print("rank weight over r = 1..15:", [round(rank_weight(r, zw), 2) for r in range(1, 16)])
print("harmonic weight for comparison:", [round(harmonic_weight(r), 2) for r in (1, 2, 4, 8, 15)])

"""Chains of directions from A0 to its opposite, and what they force on the marginals.

With parameter and measurement independence, near-perfect link correlations
pin the local marginals close to zero: |<A>| <= 2 n delta.  A homogeneous
Wharton source has the same link correlations as the quantum state but
|<A>| = 1, so the chain test flags it.
"""
import math

from bell_hv_lab.estimators import MonteCarlo
from bell_hv_lab.models import QuantumCorrelated, WhartonPair
from bell_hv_lab.theorems import equiprobability_check, quantum_chain_slack

print(f"{'n':>4}{'delta_hat':>14}{'sin^2(pi/4n)':>14}{'bound 2n*delta':>16}")
for n in (2, 4, 8, 16, 32, 64):
    chk = equiprobability_check(QuantumCorrelated(), n)
    print(f"{n:>4}{chk.stats.delta_hat:>14.6f}{quantum_chain_slack(n):>14.6f}{chk.bound:>16.6f}")
print(f"the bound shrinks like pi^2/(8n): at n=64 that is {math.pi**2 / 512:.6f}")

print("\nverdicts at n = 6")
for name, src in [("quantum", QuantumCorrelated()), ("wharton born family", WhartonPair.born_family(0.2)),
                  ("wharton homogeneous", WhartonPair.homogeneous())]:
    exact = equiprobability_check(src, 6)
    mc = equiprobability_check(src, 6, mode=MonteCarlo(200_000, seed=3))
    print(f"  {name:<22} |<A>|={abs(exact.marginal.value):.4f} bound={exact.bound:.4f} "
          f"exact={exact.verdict} mc={mc.verdict}")

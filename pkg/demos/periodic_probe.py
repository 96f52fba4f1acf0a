"""Limit cycles of the synthetic normal-form backend past the crossing eps* = 0.5.

Run: python3 demos/periodic_probe.py   (about 30 s)
"""

import numpy as np

from shockhopf.dynamics import periodic_probe

deltas = [0.0125, 0.025, 0.05, 0.1]
amps = []
for d in deltas:
    r = periodic_probe(dict(eps=0.5 + d, eps_star=0.5, tau_star=1.0))
    amps.append(r["amplitude"])
    print(f"eps* + {d:<7} period / 2 pi = {r['period_estimate'] / (2 * np.pi):.5f}  "
          f"amplitude = {r['amplitude']:.5f}  localized up to eta = {r['localization_eta']:.2f}")
print(f"amplitude ~ delta^p with p = {np.polyfit(np.log(deltas), np.log(amps), 1)[0]:.4f}")
print("eps = 0.45:", periodic_probe(dict(eps=0.45, eps_star=0.5, tau_star=1.0)))

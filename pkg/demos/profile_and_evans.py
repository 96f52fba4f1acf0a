"""Profile of a gamma = 5/3 isentropic shock and its Evans-function verdict.

Run: python3 demos/profile_and_evans.py
"""

import numpy as np

from shockhopf.evans import circle_contour, evans_values, stability_check
from shockhopf.model import build_isentropic_lagrangian, rankine_hugoniot
from shockhopf.profile import decay_fit, solve_profile

model, ends = rankine_hugoniot(build_isentropic_lagrangian(5.0 / 3.0, 0.1), [1.0, 0.0], 0.7)
print(f"shock speed s = {model.speed:.6f}, right state u+ = {ends.u_plus}")

prof = solve_profile(model, ends)
fit = decay_fit(prof)
print(f"profile: {len(prof.x)} nodes on [-{prof.half_length:.2f}, {prof.half_length:.2f}], "
      f"residual {prof.residual_max:.1e}")
print(f"tail decay rate {fit.eta:.5f} (endstate prediction {fit.predicted:.5f})")

# D on the right half of the unit circle and its behaviour near the origin
lam = circle_contour(0, 1, 8)
lam = lam[lam.real >= -1e-12]
for z, d in zip(lam, evans_values(prof, lam)):
    print(f"  D({z.real:+.3f}{z.imag:+.3f}i) = {d.real:+.6e}{d.imag:+.6e}i")

v = stability_check(prof)
print(f"verdict: {v.verdict} (right half-plane winding {v.rhp_winding}, "
      f"origin winding {v.origin_winding})")
print("D(lambda)/lambda near 0:",
      np.round(evans_values(prof, [1e-3, 1e-2]) / np.array([1e-3, 1e-2]), 6))

"""Summed heat-kernel derivatives: resolvent contour versus direct partial sums.

Run: python3 demos/kernel_cancellation.py
"""

import numpy as np

from shockhopf.kernelsum import (KernelConfig, direct_partial_sum, fit_decay, kernel_l2_norms,
                                 leading_asymptotic, resolvent_sum)

cfg = KernelConfig()
x = np.array(cfg.x_grid)
S = resolvent_sum(cfg)
sums = direct_partial_sum(cfg, J_ladder=[10, 100, 1000])

print("   x      resolvent       J=10        J=100       J=1000")
for i in range(0, len(x), 40):
    print(f"{x[i]:6.2f} {S[i]: .4e} " + " ".join(f"{v: .4e}" for v in sums[:, i]))

fit = fit_decay(x, S)
print(f"downstream decay exp(-eta0 (x - y)): eta0 = {fit.eta0:.4f}, R2 = {fit.r2:.5f}")

js = np.arange(10, 101, 30)
print("||K(., jT)||_L2 (jT)^(1/4):", np.round(kernel_l2_norms(cfg, js) * (js * cfg.T) ** 0.25, 8))

# upstream the sum is set by the lambda = 0 pole, -exp(a (x - y)) / T
up = x < -3
print("upstream max |S / (-exp(x))| - 1:", f"{np.abs(S[up] / -np.exp(x[up]) - 1).max():.1e}")

# the -K/(aT) leading term is only a rough guide unless a^2 T >> 1
for T in (0.05, 0.2, 1.0):
    c = KernelConfig(T=T)
    pt = np.array([c.a * T])
    print(f"T = {T}: sum / leading term at the peak = "
          f"{resolvent_sum(c, pt)[0] / leading_asymptotic(pt, c)[0]:.3f}")

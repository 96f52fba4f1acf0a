"""Independent reference computations used by the tests.

Nothing here calls the package's numerical kernels; each routine rebuilds the
quantity from its definition with generic scipy tools.
"""

from itertools import combinations

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline
from scipy.optimize import fsolve


def rh_isentropic(gamma, v_minus, u_minus, v_plus, a0=1.0):
    """Jump conditions for v_t - u_x = 0, u_t + p(v)_x = 0 by root finding.

    In the frame moving with speed s the fluxes (-s v - u, -s u + p) agree
    at both endstates.  Returns (s, u_plus) for the branch with s < 0.
    """
    p = lambda v: a0 * v ** (-gamma)

    def eqs(z):
        s, up = z
        return [-s * v_minus - u_minus - (-s * v_plus - up),
                -s * u_minus + p(v_minus) - (-s * up + p(v_plus))]

    s, up = fsolve(eqs, [-1.0, u_minus - 0.5], xtol=1e-14)
    return s, up


def _minors(V):
    """All k x k minors of an m x k matrix, rows in lexicographic order."""
    m, k = V.shape
    return np.array([np.linalg.det(V[list(rows), :]) for rows in combinations(range(m), k)])


def _phase_matrix(profile, lam):
    """x -> M(x; lambda) for the isentropic Lagrangian eigenvalue problem.

    Unknowns (v, u, z) with z = (nu/vb) u' - (nu/vb^2) ub' v + s u - p'(vb) v,
    so that z' = lambda u and lambda v - s v' - u' = 0.
    """
    m = profile.model
    s, nu = m.speed, m.nu
    vb = CubicSpline(profile.grid, profile.values[0])
    dub = CubicSpline(profile.grid, profile.derivs[1])
    pv = lambda v: -m.gamma * m.a0 * v ** (-m.gamma - 1)

    def M(x):
        v, du = float(vb(x)), float(dub(x))
        # u' = (v/nu) (z - s u + p' v + (nu/v^2) du v)
        row_u = (v / nu) * np.array([pv(v) + nu * du / v**2, -s, 1.0])
        row_v = (np.array([lam, 0.0, 0.0]) - row_u) / s
        row_z = np.array([0.0, lam, 0.0])
        return np.array([row_v, row_u, row_z], dtype=complex)

    return M


def evans_shooting(profile, lam, lam_ref=1.0):
    """Evans function of the isentropic Lagrangian shock by direct shooting.

    The decaying eigenvectors at +-L are propagated with an adaptive
    integrator (rescaled by their asymptotic growth), combined by a 3 x 3
    determinant at the center, and gauged by projecting a fixed real
    k-vector taken from the reference point lam_ref onto the decaying
    subspace.
    """
    L = profile.grid[-1]
    x0 = 0.5 * (profile.grid[0] + profile.grid[-1])

    def ends(lm):
        Mm = _phase_matrix(profile, lm)(profile.grid[0])
        Mp = _phase_matrix(profile, lm)(profile.grid[-1])
        return Mm, Mp

    def decaying(Mx, side):
        mu, R = np.linalg.eig(Mx)
        sel = np.where(side * mu.real < 0)[0]
        return mu, R, sel

    def reference(M, side):
        mu, R, sel = decaying(M, side)
        w = _minors(R[:, sel])
        return np.real(w / w[np.argmax(np.abs(w))])

    Mm_ref, Mp_ref = ends(lam_ref)
    e = {+1: reference(Mp_ref, +1), -1: reference(Mm_ref, -1)}

    M = _phase_matrix(profile, lam)
    Mm, Mp = ends(lam)
    cols = []
    coef = {}
    for side, Mx, xs in ((+1, Mp, profile.grid[-1]), (-1, Mm, profile.grid[0])):
        mu, R, sel = decaying(Mx, side)
        others = [i for i in range(3) if i not in sel]
        k = len(sel)
        # basis of k-vectors from eigenvector subsets; coordinate of e on the decaying one
        basis = [_minors(R[:, list(c)]) for c in combinations(range(3), k)]
        labels = list(combinations(range(3), k))
        c = np.linalg.solve(np.array(basis).T, e[side].astype(complex))
        coef[side] = c[labels.index(tuple(sorted(sel)))]
        for i in sel:
            f = lambda x, y, mu_i=mu[i]: M(x) @ y - mu_i * y
            sol = solve_ivp(f, (xs, x0), R[:, i].astype(complex), method="DOP853",
                            rtol=1e-11, atol=1e-13)
            cols.append((side, sol.y[:, -1]))
    minus = [c for s_, c in cols if s_ < 0]
    plus = [c for s_, c in cols if s_ > 0]
    return np.linalg.det(np.column_stack(minus + plus)) * coef[-1] * coef[+1]


def residue_kernel_sum(x, y, a, T, n_terms=20000):
    """sum_{j>=1} K_y(x, jT; y) from the poles 2 pi i k / T of the geometric factor.

    The k-th residue of e^{lambda T}/(1 - e^{lambda T}) is -1/T; closing the
    inversion contour to the right collects (1/T) sum_k of d/dy of the
    resolvent kernel, with the k and -k terms paired.
    """
    d = x - y
    total = 0.0 + 0j
    ks = np.arange(-n_terms, n_terms + 1)
    lam = 2j * np.pi * ks / T
    root = np.sqrt(a * a + 4 * lam)
    mu = 0.5 * (a - root) if d > 0 else 0.5 * (a + root)
    terms = -mu * np.exp(mu * d) / root
    total = terms.sum() / T
    return total.real


def gaussian_l2_norm():
    """||exp(-x^2)||_{L^2(R)} = (pi/2)^{1/4}."""
    return (np.pi / 2) ** 0.25

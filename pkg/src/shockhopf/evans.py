"""Evans function of the linearization about a viscous shock profile.

Eigenvalue problem
------------------
Perturbing U_t + F(U)_x = (B(U) U_x)_x about the profile gives

    lambda u = (B u' - A_eff u)',   A_eff u = A u - (dB[u]) Ubar'

where dB[u] is the directional derivative of B.  Writing u = (u1, u2) with
the split n = (n - r) + r and y = b u2' - (A_eff u)_2, the problem becomes
the first-order system W' = (M0(x) + lambda M1) W with W = (u1, u2, y) of
size m = n + r.  The phase variable y is the integrated flux of the
parabolic block, so the system inherits the divergence form.

Evaluation
----------
The stable bundle at +L and the unstable bundle at -L are lifted to the
exterior powers of the matching dimensions and integrated to x = 0 by RK4,
each rescaled by the trace of its asymptotic spectral block.  D(lambda) is
the wedge pairing of the two at x = 0.  Initial data are

    omega(lambda) = P(lambda) e,

the spectral projection of a fixed real k-vector e (taken at a real
reference point, lambda = 1 by default), which is analytic in lambda.  The
projection could vanish at isolated points and add spurious zeros; its
relative size is monitored along contours, and the stability check repeats
the count with a second reference vector.

Spatial eigenvalues are classified by the sign of their real part away from
the origin.  For |lambda| small the n slow eigenvalues mu ~ -lambda / a_j
are labelled through the characteristic speeds a_j of the endstates, which
continues the splitting analytically through lambda = 0.  Inside a tiny disk
around the origin D is reconstructed from a ring of samples by Cauchy's
formula.
"""

import itertools
import weakref
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from scipy.integrate import trapezoid
from scipy.optimize import linear_sum_assignment

from .errors import (
    BranchAmbiguityError,
    ConsistencyError,
    ContinuationError,
    ContourError,
    ContourResolutionError,
    InvalidParameterError,
)

__all__ = [
    "EigenvalueSystem",
    "EvansSample",
    "ContourResult",
    "StabilityVerdict",
    "RootResult",
    "HopfCrossing",
    "eigenvalue_system",
    "evans_eval",
    "evans_values",
    "winding_count",
    "circle_contour",
    "d_contour",
    "essential_spectrum",
    "stability_check",
    "root_polish",
    "hopf_scan",
    "argument_moments",
    "eigenfunction",
    "zero_mass_ratio",
    "compound",
    "wedge",
    "write_contour_csv",
    "isentropic_strength_family",
    "root_product",
    "synthetic_hopf_family",
]


# -- exterior algebra ---------------------------------------------------------------

def _parity(seq):
    seq = list(seq)
    inv = sum(1 for i in range(len(seq)) for j in range(i + 1, len(seq)) if seq[i] > seq[j])
    return -1 if inv % 2 else 1


@lru_cache(maxsize=None)
def _subsets(m, k):
    return tuple(itertools.combinations(range(m), k))


@lru_cache(maxsize=None)
def _compound_map(m, k):
    """Matrix T with vec(M^[k]) = T vec(M) for the additive compound."""
    subs = _subsets(m, k)
    K = len(subs)
    index = {S: i for i, S in enumerate(subs)}
    T = np.zeros((K * K, m * m))
    for J_idx, J in enumerate(subs):
        for t, jt in enumerate(J):
            for i in range(m):
                if i == jt:
                    T[J_idx * K + J_idx, i * m + jt] += 1.0
                elif i not in J:
                    new = list(J)
                    new[t] = i
                    I_idx = index[tuple(sorted(new))]
                    T[I_idx * K + J_idx, i * m + jt] += _parity(new)
    return T


def compound(M, k):
    """k-th additive compound of (a batch of) square matrices."""
    M = np.asarray(M)
    m = M.shape[-1]
    K = len(_subsets(m, k))
    T = _compound_map(m, k)
    flat = M.reshape(M.shape[:-2] + (m * m,))
    return (flat @ T.T).reshape(M.shape[:-2] + (K, K))


def wedge(V):
    """Pluecker coordinates of the columns of V (m x k)."""
    V = np.asarray(V)
    m, k = V.shape[-2:]
    subs = _subsets(m, k)
    return np.linalg.det(np.stack([V[..., list(S), :] for S in subs], axis=-3))


def _row_wedge(Lr):
    """Coordinates of the wedge of the rows of Lr (k x m), as a dual k-vector."""
    Lr = np.asarray(Lr)
    m = Lr.shape[-1]
    k = Lr.shape[-2]
    subs = _subsets(m, k)
    return np.linalg.det(np.stack([Lr[..., :, list(S)] for S in subs], axis=-3))


@lru_cache(maxsize=None)
def _pairing_map(m, k):
    """Indices and signs so that det[W- | W+] = sum_I s_I a_I b_{I^c}."""
    subs = _subsets(m, k)
    comp = {S: i for i, S in enumerate(_subsets(m, m - k))}
    idx, sgn = [], []
    for S in subs:
        C = tuple(i for i in range(m) if i not in S)
        idx.append(comp[C])
        sgn.append(_parity(S + C))
    return np.array(idx), np.array(sgn, dtype=float)


def _pair(a, b, m, k):
    idx, sgn = _pairing_map(m, k)
    return np.sum(sgn * a * b[..., idx], axis=-1)


# -- the first-order system ------------------------------------------------------------

def _phase_matrices(model, U, dU, A_override=None):
    """M0 at the given states (nodes last) and the constant M1."""
    n, r = model.n, model.r
    p = n - r
    m = n + r
    U = np.asarray(U, float)
    dU = np.asarray(dU, float)
    A = model.flux_jacobian(U)
    B = model.viscosity(U)
    DB = model.viscosity_derivative(U)
    C = np.einsum("ikj...,k...->ij...", DB, dU)
    Ae = np.moveaxis(A - C, (0, 1), (-2, -1))   # (..., n, n)
    b = np.moveaxis(B[p:, p:], (0, 1), (-2, -1))
    binv = np.linalg.inv(b)
    A11 = Ae[..., :p, :p]
    A12 = Ae[..., :p, p:]
    A11inv = np.linalg.inv(A11)
    S = A11inv @ A12
    shape = Ae.shape[:-2]
    M0 = np.zeros(shape + (m, m))
    # u2' = b^{-1}(y + Ae21 u1 + Ae22 u2)
    row2 = np.concatenate([binv @ Ae[..., p:, :p], binv @ Ae[..., p:, p:], binv], axis=-1)
    M0[..., p:n, :] = row2
    # u1' = -A11^{-1}(lambda u1 + A12 u2')
    M0[..., :p, :] = -S @ row2
    M1 = np.zeros(shape + (m, m))
    M1[..., :p, :p] = -A11inv
    M1[..., n:, p:n] = np.eye(r)
    return M0, M1


@dataclass(frozen=True)
class EigenvalueSystem:
    """W' = M(x; lambda) W on the profile grid."""

    profile: object
    lam: complex
    m: int
    grid: np.ndarray
    M0_nodes: np.ndarray
    M1: np.ndarray
    M_minus: np.ndarray
    M_plus: np.ndarray
    k_plus: int
    k_minus: int

    def coeff(self, x):
        """M(x; lambda), linearly interpolated between nodes."""
        x = float(x)
        g = self.grid
        if x <= g[0]:
            M0 = self.M0_nodes[0]
        elif x >= g[-1]:
            M0 = self.M0_nodes[-1]
        else:
            j = min(int((x - g[0]) / (g[1] - g[0])), len(g) - 2)
            t = (x - g[j]) / (g[j + 1] - g[j])
            M0 = (1 - t) * self.M0_nodes[j] + t * self.M0_nodes[j + 1]
        return M0 + self.lam * self.M1

    @property
    def asymptotic_matrices(self):
        return self.M_minus, self.M_plus


class _Evans:
    """Per-profile precomputation shared by all evaluations."""

    ring_radius = 2e-3
    inner_radius = 1e-3
    ring_points = 64

    def __init__(self, profile, lam_ref=1.0):
        model = profile.model
        self.profile = profile
        self.n, self.r = model.n, model.r
        self.m = m = self.n + self.r
        x = profile.grid
        if len(x) < 9:
            raise InvalidParameterError("profile grid too coarse")
        self.x = x
        self.dx = float(x[1] - x[0])
        self.ic = int(np.argmin(np.abs(x - 0.5 * (x[0] + x[-1]))))
        M0, M1 = _phase_matrices(model, profile.values, profile.derivs)
        self.M0 = M0
        self.M1 = M1[0]
        um = np.asarray(profile.endstates.u_minus, float)
        up = np.asarray(profile.endstates.u_plus, float)
        z = np.zeros(self.n)
        self.M0m, _ = _phase_matrices(model, um, z)
        self.M0p, _ = _phase_matrices(model, up, z)
        self.a_minus = np.sort(np.linalg.eigvals(model.flux_jacobian(um)).real)
        self.a_plus = np.sort(np.linalg.eigvals(model.flux_jacobian(up)).real)
        # fast spatial rates at lambda = 0 set the radius of the slow region
        fast = []
        for M in (self.M0m, self.M0p):
            mu = np.linalg.eigvals(M)
            fast.append(np.sort(np.abs(mu))[self.n:].min())
        amin = min(np.abs(self.a_minus).min(), np.abs(self.a_plus).min())
        self.r_slow = 0.1 * amin * min(fast)

        # counts and fixed initial k-vectors from the real reference point
        self.k_plus = self.k_minus = None
        sp = self._split(1.0, +1)
        sm = self._split(1.0, -1)
        self.k_plus, self.k_minus = len(sp[0]), len(sm[0])
        if self.k_plus + self.k_minus != m:
            raise ConsistencyError(
                f"stable ({self.k_plus}) and unstable ({self.k_minus}) dimensions do not add to {m}")
        if lam_ref != 1.0:
            sp = self._split(float(lam_ref), +1)
            sm = self._split(float(lam_ref), -1)
        self.e_plus = self._reference(sp)
        self.e_minus = self._reference(sm)

        # compound coefficient arrays, with 4th-order midpoints for RK4
        Mh = np.empty((len(x) - 1, m, m))
        Mh[1:-1] = (-M0[:-3] + 9 * M0[1:-2] + 9 * M0[2:-1] - M0[3:]) / 16.0
        Mh[0] = 0.5 * (M0[0] + M0[1])
        Mh[-1] = 0.5 * (M0[-2] + M0[-1])
        self.Cp0, self.Cp0h = compound(M0, self.k_plus), compound(Mh, self.k_plus)
        self.Cm0, self.Cm0h = compound(M0, self.k_minus), compound(Mh, self.k_minus)
        self.Cp1 = compound(self.M1, self.k_plus)
        self.Cm1 = compound(self.M1, self.k_minus)
        self._ring = None

    # -- spectral splitting at the endstates --------------------------------------
    def _split(self, lam, side):
        """Selected eigen-indices, eigenvalues, eigenvectors and inverse."""
        M0 = self.M0p if side > 0 else self.M0m
        a = self.a_plus if side > 0 else self.a_minus
        Mx = M0 + lam * self.M1
        mu, R = np.linalg.eig(Mx)
        if abs(lam) <= self.r_slow and lam != 0:
            order = np.argsort(np.abs(mu))
            slow, fast = order[:self.n], order[self.n:]
            cost = np.abs(mu[slow][:, None] + lam / a[None, :])
            ri, ci = linear_sum_assignment(cost)
            sel = [f for f in fast if side * mu[f].real < 0]
            sel += [slow[i] for i, j in zip(ri, ci) if side * a[j] > 0]
        else:
            re = side * mu.real
            scale = 1.0 + np.abs(mu).max()
            if np.abs(re).min() < 1e-9 * scale:
                raise ConsistencyError(f"lambda={lam} lies on the essential spectrum")
            sel = list(np.where(re < 0)[0])
        k = self.k_plus if side > 0 else self.k_minus
        if k is not None and len(sel) != k:
            raise ConsistencyError(
                f"lambda={lam}: {len(sel)} decaying modes on side {side:+d}, expected {k}")
        sel = np.array(sorted(sel), dtype=int)
        rest = np.array([i for i in range(self.m) if i not in set(sel)], dtype=int)
        if len(rest) and len(sel):
            gap = np.abs(mu[sel][:, None] - mu[rest][None, :]).min()
            if gap < 1e-10 * (1.0 + np.abs(mu).max()):
                raise BranchAmbiguityError(f"spatial eigenvalue collision at lambda={lam}")
        if np.linalg.cond(R) > 1e12:
            raise BranchAmbiguityError(f"defective asymptotic matrix at lambda={lam}")
        return sel, mu, R, np.linalg.inv(R)

    @staticmethod
    def _reference(split):
        sel, mu, R, _ = split
        w = wedge(R[:, sel])
        w = w / w[np.argmax(np.abs(w))]
        return np.real(w)

    def _initial(self, lam, side):
        sel, mu, R, Rinv = self._split(lam, side)
        e = self.e_plus if side > 0 else self.e_minus
        ell = _row_wedge(Rinv[sel, :])
        c = ell @ e
        rel = abs(c) / (np.linalg.norm(ell) * np.linalg.norm(e))
        if rel < 1e-10:
            raise BranchAmbiguityError(f"reference vector degenerate at lambda={lam}")
        return wedge(R[:, sel]) * c, mu[sel].sum(), rel

    # -- integration --------------------------------------------------------------
    def _rk4(self, lams, om, sig, side):
        if side > 0:
            C0, C0h, C1 = self.Cp0, self.Cp0h, self.Cp1
            idx = range(len(self.x) - 1, self.ic, -1)
            h = -self.dx
        else:
            C0, C0h, C1 = self.Cm0, self.Cm0h, self.Cm1
            idx = range(0, self.ic)
            h = self.dx
        lam = lams[:, None]
        sg = sig[:, None]
        C1T = C1.T

        def f(Cn, w):
            return w @ Cn.T + lam * (w @ C1T) - sg * w

        w = om
        for j in idx:
            jn = j - 1 if side > 0 else j + 1
            jh = jn if side > 0 else j
            k1 = f(C0[j], w)
            k2 = f(C0h[jh], w + 0.5 * h * k1)
            k3 = f(C0h[jh], w + 0.5 * h * k2)
            k4 = f(C0[jn], w + h * k3)
            w = w + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        return w

    def direct(self, lams):
        """D, normalization exponent and relative size of the projected
        reference vectors at each lambda."""
        lams = np.atleast_1d(np.asarray(lams, dtype=complex))
        B = len(lams)
        Kp = self.Cp1.shape[0]
        Km = self.Cm1.shape[0]
        omp = np.empty((B, Kp), complex)
        omm = np.empty((B, Km), complex)
        sp = np.empty(B, complex)
        sm = np.empty(B, complex)
        fac = np.empty(B)
        for i, lam in enumerate(lams):
            omp[i], sp[i], cp = self._initial(lam, +1)
            omm[i], sm[i], cm = self._initial(lam, -1)
            fac[i] = min(cp, cm)
        wp = self._rk4(lams, omp, sp, +1)
        wm = self._rk4(lams, omm, sm, -1)
        D = _pair(wm, wp, self.m, self.k_minus)
        L = 0.5 * (self.x[-1] - self.x[0])
        return D, (sm - sp) * L, fac

    def ring(self):
        if self._ring is None:
            th = 2 * np.pi * (np.arange(self.ring_points) + 0.5) / self.ring_points
            z = self.ring_radius * np.exp(1j * th)
            self._ring = (z,) + self.direct(z)
        return self._ring

    def values(self, lams):
        lams = np.atleast_1d(np.asarray(lams, dtype=complex))
        D = np.empty(len(lams), complex)
        fac = np.empty(len(lams))
        expo = np.empty(len(lams), complex)
        inner = np.abs(lams) < self.inner_radius
        if (~inner).any():
            D[~inner], expo[~inner], fac[~inner] = self.direct(lams[~inner])
        if inner.any():
            # D and the exponent are analytic in the disk: Cauchy's formula
            z, Dz, ez, fz = self.ring()
            lin = lams[inner]
            wts = z[None, :] / (z[None, :] - lin[:, None]) / len(z)
            D[inner] = wts @ Dz
            expo[inner] = wts @ ez
            fac[inner] = fz.min()
        return D, expo.real, fac


_CACHE = weakref.WeakKeyDictionary()


def _evans_for(profile, lam_ref=1.0):
    per = _CACHE.setdefault(profile, {})
    ev = per.get(lam_ref)
    if ev is None:
        ev = _Evans(profile, lam_ref)
        per[lam_ref] = ev
    return ev


def _is_profile(target):
    return hasattr(target, "model") and hasattr(target, "grid")


# -- public evaluation API ------------------------------------------------------------------

@dataclass(frozen=True)
class EvansSample:
    lam: complex
    value: complex
    normalization_log: float


def eigenvalue_system(profile, lam):
    ev = _evans_for(profile)
    lam = complex(lam)
    ev._split(lam, +1)
    ev._split(lam, -1)
    return EigenvalueSystem(profile, lam, ev.m, ev.x, ev.M0, ev.M1,
                            ev.M0m + lam * ev.M1, ev.M0p + lam * ev.M1,
                            ev.k_plus, ev.k_minus)


def _evaluate(target, lams, lam_ref=1.0):
    """Values, normalization exponents and initialization factors."""
    lams = np.atleast_1d(np.asarray(lams, dtype=complex))
    if _is_profile(target):
        return _evans_for(target, lam_ref).values(lams)
    D = np.array([complex(target(l)) for l in lams])
    return D, np.zeros(len(lams)), np.ones(len(lams))


def evans_values(target, lams):
    """D at an array of points (profile, or any callable standing in for D)."""
    return _evaluate(target, lams)[0]


def evans_eval(target, lam):
    D, nlog, _ = _evaluate(target, [lam])
    return EvansSample(complex(lam), complex(D[0]), float(nlog[0]))


# -- contours and winding ------------------------------------------------------------------

def circle_contour(center=0.0, radius=1.0, n=64):
    th = 2 * np.pi * np.arange(n) / n
    return complex(center) + radius * np.exp(1j * th)


def d_contour(radius=10.0, re_shift=1e-3, n_arc=96, n_seg=60):
    """Counterclockwise boundary of {Re lambda > re_shift, |lambda| < radius}."""
    th0 = np.arccos(re_shift / radius)
    arc = radius * np.exp(1j * np.linspace(-th0, th0, n_arc))
    h = radius * np.sin(th0)
    y = np.geomspace(1e-4, h, n_seg)
    ys = np.concatenate([y[::-1][1:], [0.0], -y[:-1]])
    seg = re_shift + 1j * ys
    return np.concatenate([arc, seg])


def essential_spectrum(profile, xi=None):
    """Points of the curves sigma(-i xi A_pm - xi^2 B_pm), xi real."""
    if xi is None:
        x = np.geomspace(1e-4, 1e4, 4000)
        xi = np.concatenate([-x[::-1], [0.0], x])
    model = profile.model
    out = []
    for U in (profile.endstates.u_minus, profile.endstates.u_plus):
        U = np.asarray(U, float)
        A = model.flux_jacobian(U)
        B = model.viscosity(U)
        mats = -1j * xi[:, None, None] * A - (xi**2)[:, None, None] * B
        out.append(np.linalg.eigvals(mats).ravel())
    return np.concatenate(out)


def _check_standoff(profile, pts, standoff):
    # inside the slow disk D continues analytically across the curves
    r_slow = _evans_for(profile).r_slow
    near = pts[(pts.real < standoff) & (np.abs(pts) > r_slow)]
    if len(near) == 0:
        return
    curves = essential_spectrum(profile)
    curves = curves[np.isfinite(curves)]
    for chunk in np.array_split(near, max(1, len(near) // 64)):
        d = np.abs(chunk[:, None] - curves[None, :]).min(axis=1)
        if (d < standoff * (1 - 1e-9)).any():
            bad = chunk[np.argmin(d)]
            raise ContourError(
                f"contour passes within {d.min():.3g} of the essential spectrum near {bad}")


@dataclass
class ContourResult:
    lams: np.ndarray
    values: np.ndarray
    normalization_log: np.ndarray
    winding: int
    refinement_depth: int
    min_init_factor: float = 1.0

    @property
    def samples(self):
        return [EvansSample(complex(l), complex(v), float(g))
                for l, v, g in zip(self.lams, self.values, self.normalization_log)]

    def max_phase_jump(self):
        v = np.append(self.values, self.values[:1])
        return float(np.abs(np.angle(v[1:] / v[:-1])).max())


def _phase_steps(v):
    v = np.append(v, v[:1])
    return np.angle(v[1:] / v[:-1])


def winding_count(target, contour, max_depth=16, standoff=1e-3, max_points=200000,
                  lam_ref=1.0):
    """Winding number of D around the closed polyline ``contour``.

    Segments are bisected until every phase increment of D is below pi/2.
    """
    pts = np.asarray(contour, dtype=complex)
    if len(pts) > 1 and pts[0] == pts[-1]:
        pts = pts[:-1]
    if len(pts) < 3:
        raise InvalidParameterError("contour needs at least three points")
    if _is_profile(target):
        _check_standoff(target, pts, standoff)
    D, nlog, fac = _evaluate(target, pts, lam_ref)
    if np.any(D == 0) or not np.all(np.isfinite(D)):
        raise ContourResolutionError("D vanishes or is not finite on the contour")
    depth = 0
    while True:
        bad = np.abs(_phase_steps(D)) >= np.pi / 2
        if not bad.any():
            break
        depth += 1
        if depth > max_depth or len(pts) > max_points:
            raise ContourResolutionError(f"phase not resolved after {depth - 1} refinements")
        nxt = np.roll(pts, -1)
        mids = 0.5 * (pts[bad] + nxt[bad])
        if _is_profile(target):
            _check_standoff(target, mids, standoff)
        Dm, nm, fm = _evaluate(target, mids, lam_ref)
        if np.any(Dm == 0) or not np.all(np.isfinite(Dm)):
            raise ContourResolutionError("D vanishes or is not finite on the contour")
        pos = np.where(bad)[0] + 1
        pts = np.insert(pts, pos, mids)
        D = np.insert(D, pos, Dm)
        nlog = np.insert(nlog, pos, nm)
        fac = np.insert(fac, pos, fm)
    w = _phase_steps(D).sum() / (2 * np.pi)
    return ContourResult(pts, D, nlog, int(round(w)), depth, float(fac.min()))


def write_contour_csv(result, path=None):
    lines = ["lambda_re,lambda_im,D_re,D_im,norm_log"]
    for l, v, g in zip(result.lams, result.values, result.normalization_log):
        lines.append(",".join(f"{t:.17g}" for t in (l.real, l.imag, v.real, v.imag, g)))
    text = "\n".join(lines) + "\n"
    if path is None:
        return text
    with open(path, "w") as fh:
        fh.write(text)
    return path


# -- stability verdict ------------------------------------------------------------------------

@dataclass
class StabilityVerdict:
    verdict: str
    rhp_winding: int
    origin_winding: int
    excess: int
    ell: int
    min_relative_modulus: float
    notes: list = field(default_factory=list)

    def to_dict(self):
        return dict(verdict=self.verdict, rhp_winding=self.rhp_winding,
                    origin_winding=self.origin_winding, excess=self.excess, ell=self.ell,
                    min_relative_modulus=self.min_relative_modulus, notes=list(self.notes))


def stability_check(target, ell=1, radius=10.0, origin_radius=1e-2, re_shift=1e-3,
                    marginal_tol=1e-8, cross_check_ref=3.0):
    """Root count in the closed right half-plane and at the origin.

    For profiles the right-half-plane count is repeated with initial data
    projected from a second reference vector; a disagreement means the
    initialization vanished inside the contour and the verdict is marginal.
    """
    origin = winding_count(target, circle_contour(0.0, origin_radius, 64))
    rhp = winding_count(target, d_contour(radius, re_shift))
    rel = np.abs(rhp.values) / np.abs(rhp.values).max()
    relo = np.abs(origin.values) / np.abs(origin.values).max()
    mrel = float(min(rel.min(), relo.min()))
    notes = []
    consistent = True
    if _is_profile(target) and cross_check_ref is not None:
        alt = winding_count(target, d_contour(radius, re_shift), lam_ref=cross_check_ref)
        if alt.winding != rhp.winding:
            consistent = False
            notes.append(f"count {rhp.winding} changes to {alt.winding} with another reference")
    if not consistent:
        verdict = "marginal"
    elif rhp.winding > 0:
        verdict = "unstable"
    elif origin.winding != ell:
        verdict = "marginal"
        notes.append(f"origin multiplicity {origin.winding} differs from declared {ell}")
    elif mrel < marginal_tol:
        verdict = "marginal"
        notes.append("a root lies within tolerance of the contour")
    else:
        verdict = "stable"
    return StabilityVerdict(verdict, rhp.winding, origin.winding, max(rhp.winding, 0), ell,
                            mrel, notes)


# -- root polishing ------------------------------------------------------------------------------

@dataclass
class RootResult:
    root: complex
    residual: float
    converged: bool
    iterations: int
    multiplicity: Optional[int] = None
    bracket: Optional[tuple] = None


def root_polish(target, lambda0, tol=1e-10, max_iter=60, scale_radius=None, cert_radius=None):
    """Complex secant iteration from ``lambda0``.

    Convergence requires |D| < tol times the local scale (max |D| on a
    circle about lambda0) and a certificate circle around the result
    enclosing exactly one root.  Otherwise the certificate circle is
    returned as a bracket.
    """
    lam0 = complex(lambda0)
    if scale_radius is None:
        scale_radius = 0.1 * max(1.0, abs(lam0))
    ring = circle_contour(lam0, scale_radius, 16)
    scale = float(np.abs(evans_values(target, ring)).max())
    f = lambda z: complex(evans_values(target, [z])[0])
    h = 1e-4 * max(1.0, abs(lam0))
    z0, z1 = lam0, lam0 + h
    f0, f1 = f(z0), f(z1)
    it = 0
    converged = False
    while it < max_iter:
        it += 1
        if abs(f1) < tol * scale:
            converged = True
            break
        if f1 == f0:
            break
        z2 = z1 - f1 * (z1 - z0) / (f1 - f0)
        if not np.isfinite(z2):
            break
        z0, f0 = z1, f1
        z1, f1 = z2, f(z2)
    if cert_radius is None:
        cert_radius = max(1e-3 * max(1.0, abs(z1)), 10 * abs(z1 - z0))
    try:
        mult = winding_count(target, circle_contour(z1, cert_radius, 32)).winding
    except ContourError:
        mult = None
    if converged and mult == 1:
        return RootResult(z1, abs(f1) / scale, True, it, 1, None)
    return RootResult(z1, abs(f1) / scale, False, it, mult, (z1, cert_radius))


# -- Hopf scan ------------------------------------------------------------------------------------

@dataclass
class HopfCrossing:
    eps_star: float
    tau_star: float
    gamma_slope_positive: bool
    bracket: tuple
    windings: list = field(default_factory=list)

    def to_dict(self):
        return dict(eps_star=self.eps_star, tau_star=self.tau_star,
                    gamma_slope_positive=self.gamma_slope_positive,
                    bracket=list(self.bracket), windings=self.windings)


def argument_moments(result, powers=(0, 1, 2)):
    """Sums of root powers inside a resolved contour, from the unwrapped log D."""
    lam = np.append(result.lams, result.lams[:1])
    v = np.append(result.values, result.values[:1])
    dlog = np.log(np.abs(v[1:] / v[:-1])) + 1j * np.angle(v[1:] / v[:-1])
    mid = 0.5 * (lam[1:] + lam[:-1])
    return [complex(np.sum(mid**k * dlog) / (2j * np.pi)) for k in powers]


def hopf_scan(family, eps_values, radius=10.0, re_shift=1e-3, width=1e-6, ell=None,
              callback=None):
    """Scan the right-half-plane root count along a one-parameter family.

    ``family(eps)`` returns an Evans target (profile or callable).  Returns
    None when the count never jumps by two.
    """
    eps_values = [float(e) for e in eps_values]
    contour = d_contour(radius, re_shift)
    windings = []
    results = []
    for e in eps_values:
        tgt = family(e)
        res = winding_count(tgt, contour)
        if ell is not None:
            w0 = winding_count(tgt, circle_contour(0.0, 1e-2, 64)).winding
            if w0 != ell:
                raise ContinuationError(f"origin multiplicity {w0} != {ell} at eps={e}")
        windings.append(res.winding)
        results.append(res)
        if callback is not None:
            callback(e, res.winding)
    jump = None
    for i in range(len(eps_values) - 1):
        if abs(windings[i + 1] - windings[i]) == 2:
            jump = i
            break
    if jump is None:
        return None

    e_lo, e_hi = eps_values[jump], eps_values[jump + 1]
    inside = jump + 1 if windings[jump + 1] > windings[jump] else jump
    s0, s1, s2 = argument_moments(results[inside])
    prod = 0.5 * (s1 * s1 - s2)
    r = np.roots([1.0, -s1, prod])
    guess = r[np.argmax(r.imag)]

    def track(e, g):
        rr = root_polish(family(e), g)
        if not np.isfinite(rr.root) or abs(rr.root - g) > 0.5 * max(1.0, abs(g)):
            raise ContinuationError(f"lost the root pair near eps={e}")
        return rr.root

    roots = {eps_values[inside]: track(eps_values[inside], guess)}
    other = e_lo if inside == jump + 1 else e_hi
    roots[other] = track(other, roots[eps_values[inside]])
    # the contour sits at Re = re_shift, so the count can jump while gamma is
    # still slightly negative or exactly zero; widen the bracket if needed
    step = e_hi - e_lo
    for _ in range(4):
        g_lo, g_hi = roots[e_lo].real, roots[e_hi].real
        if g_lo * g_hi <= 0:
            break
        # move the endpoint on the wrong side away from the other
        if abs(g_lo) <= abs(g_hi):
            e_new = e_lo - step
            roots[e_new] = track(e_new, roots[e_lo])
            e_lo = e_new
        else:
            e_new = e_hi + step
            roots[e_new] = track(e_new, roots[e_hi])
            e_hi = e_new
    else:
        raise ContinuationError("tracked root does not change side of the imaginary axis")
    if g_lo == 0.0 or g_hi == 0.0:
        e0 = e_lo if g_lo == 0.0 else e_hi
        slope_positive = (g_hi - g_lo) / (e_hi - e_lo) > 0
        if g_hi == g_lo:
            raise ContinuationError("gamma does not vary across the bracket")
        return HopfCrossing(float(e0), float(roots[e0].imag), bool(slope_positive), (e_lo, e_hi),
                            list(zip(eps_values, windings)))
    slope_positive = (g_hi - g_lo) / (e_hi - e_lo) > 0
    a, b = e_lo, e_hi
    ra, rb = roots[e_lo], roots[e_hi]
    while b - a > width:
        c = 0.5 * (a + b)
        rc = track(c, ra if abs(c - a) < abs(c - b) else rb)
        if (rc.real > 0) == (rb.real > 0):
            b, rb = c, rc
        else:
            a, ra = c, rc
    # linear interpolation of gamma inside the final bracket
    t = ra.real / (ra.real - rb.real)
    eps_star = a + t * (b - a)
    tau = (1 - t) * ra.imag + t * rb.imag
    return HopfCrossing(float(eps_star), float(tau), bool(slope_positive), (a, b),
                        list(zip(eps_values, windings)))


# -- eigenfunctions and the zero-mass check ---------------------------------------------------------

def _rk4_matrix_step(Ma, Mh, Mb, W, h):
    k1 = Ma @ W
    k2 = Mh @ (W + 0.5 * h * k1)
    k3 = Mh @ (W + 0.5 * h * k2)
    k4 = Mb @ (W + h * k3)
    return W + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def _orthonormal_frames(ev, lam, side):
    """Orthonormal frames of the decaying bundle at every node of one half-line."""
    # the decaying subspace is continuous at 0; take it from a nearby point
    lam_split = lam if lam != 0 else 1e-7
    sel, mu, R, _ = ev._split(lam_split, side)
    N = len(ev.x)
    M = ev.M0 + lam * ev.M1
    Mh = np.empty((N - 1,) + M.shape[1:], complex)
    Mh[1:-1] = (-M[:-3] + 9 * M[1:-2] + 9 * M[2:-1] - M[3:]) / 16.0
    Mh[0] = 0.5 * (M[0] + M[1])
    Mh[-1] = 0.5 * (M[-2] + M[-1])
    Q, _ = np.linalg.qr(R[:, sel])
    frames = {}
    if side > 0:
        order = range(N - 1, ev.ic - 1, -1)
        frames[N - 1] = Q
        for j in range(N - 1, ev.ic, -1):
            W = _rk4_matrix_step(M[j], Mh[j - 1], M[j - 1], Q, -ev.dx)
            Q, _ = np.linalg.qr(W)
            frames[j - 1] = Q
    else:
        frames[0] = Q
        for j in range(0, ev.ic):
            W = _rk4_matrix_step(M[j], Mh[j], M[j + 1], Q, ev.dx)
            Q, _ = np.linalg.qr(W)
            frames[j + 1] = Q
    return frames, M, Mh


def eigenfunction(profile, lam):
    """Reconstruct the eigenfunction at a (polished) root, on the profile grid.

    The matching vector at x = 0 is the smallest singular vector of the two
    frames; it is propagated outward one step at a time and projected back
    onto the decaying frame, which suppresses the growing modes.  Returns the
    phase vector W of shape (m, N) normalized to unit max norm, and the
    relative smallest singular value (zero at an exact root).
    """
    ev = _evans_for(profile)
    lam = complex(lam)
    fp, M, Mh = _orthonormal_frames(ev, lam, +1)
    fm, _, _ = _orthonormal_frames(ev, lam, -1)
    ic = ev.ic
    Qm, Qp = fm[ic], fp[ic]
    G = np.hstack([Qm, Qp])
    _, sv, Vh = np.linalg.svd(G)
    c = Vh[-1].conj()
    w0 = Qm @ c[:Qm.shape[1]]
    N = len(ev.x)
    W = np.zeros((ev.m, N), complex)
    W[:, ic] = w0
    w = w0
    for j in range(ic, N - 1):
        w = _rk4_matrix_step(M[j], Mh[j], M[j + 1], w[:, None], ev.dx)[:, 0]
        Q = fp[j + 1]
        w = Q @ (Q.conj().T @ w)
        W[:, j + 1] = w
    w = w0
    for j in range(ic, 0, -1):
        w = _rk4_matrix_step(M[j], Mh[j - 1], M[j - 1], w[:, None], -ev.dx)[:, 0]
        Q = fm[j - 1]
        w = Q @ (Q.conj().T @ w)
        W[:, j - 1] = w
    W /= np.abs(W).max()
    return W, float(sv[-1] / sv[0])


def zero_mass_ratio(profile, lam):
    """|integral of phi| / ||phi||_L1 for the eigenfunction at ``lam``."""
    W, _ = eigenfunction(profile, lam)
    phi = W[:profile.model.n]
    dx = profile.dx
    mass = np.abs(trapezoid(phi, dx=dx, axis=1))
    l1 = trapezoid(np.abs(phi), dx=dx, axis=1)
    return float(np.linalg.norm(mass) / np.linalg.norm(l1))


def isentropic_strength_family(gamma_gas=5.0 / 3.0, nu=0.1, v_minus=1.0, u_minus=0.0,
                               v_plus_range=(0.9, 0.4), n_nodes=1001):
    """eps in [0, 1] -> profile of the Lax shock with v_plus moved linearly.

    The shock speed follows from the jump conditions, so the family is a
    speed homotopy at fixed left state.
    """
    from .model import build_isentropic_lagrangian, rankine_hugoniot
    from .profile import solve_profile

    base = build_isentropic_lagrangian(gamma_gas, nu, 0.0)
    a, b = v_plus_range
    cache = {}

    def family(eps):
        eps = float(eps)
        if eps not in cache:
            m, ends = rankine_hugoniot(base, [v_minus, u_minus], a + (b - a) * eps)
            cache[eps] = solve_profile(m, ends, n_nodes=n_nodes)
        return cache[eps]

    return family


def root_product(roots, extra=()):
    """Mock Evans function prod (lambda - r) over ``roots`` and ``extra``."""
    roots = [complex(r) for r in list(roots) + list(extra)]

    def D(lam):
        out = 1.0 + 0j
        for r in roots:
            out *= lam - r
        return out

    return D


def synthetic_hopf_family(eps_star=0.5, tau_star=1.0):
    """eps -> D(lambda; eps) with roots (eps - eps_star) +- i tau_star and -2."""
    def family(eps):
        g = float(eps) - eps_star
        return root_product([g + 1j * tau_star, g - 1j * tau_star], [-2.0])

    return family

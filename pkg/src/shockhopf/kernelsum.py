"""Periodic sums of the convected heat kernel.

For L = d^2/dx^2 - a d/dx the kernel of e^{Lt} is

    K(x, t; y) = (4 pi t)^{-1/2} exp(-(x - y - a t)^2 / (4 t)),

and the y-derivative sum  S(x, y) = sum_{j >= 1} K_y(x, jT; y)  converges
only through cancellation, since ||K(., t; y)||_{L^2} ~ t^{-1/4}.

Two routes are provided.  ``direct_partial_sum`` adds the terms.
``resolvent_sum`` sums the geometric series inside the inverse Laplace
transform,

    S(x, y) = (1 / 2 pi i) int_Gamma  e^{lambda T} / (1 - e^{lambda T})
                                      d/dy K_lambda(x, y) d lambda,

with the resolvent kernel K_lambda = e^{mu (x - y)} / sqrt(a^2 + 4 lambda),
mu the root of mu^2 - a mu - lambda = 0 that decays away from x = y.  Gamma
passes between the branch point -a^2/4 and the poles 2 pi i k / T: an arc of
radius r through -r joined to two rays leaving at angles +-3pi/4.  The
factor e^{lambda T} makes the integrand decay exponentially along the rays.
"""

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.integrate import trapezoid

from .errors import ContourResolutionError, DomainError, InvalidParameterError

__all__ = [
    "KernelConfig",
    "heat_kernel",
    "heat_kernel_dy",
    "resolvent_kernel_dy",
    "direct_partial_sum",
    "kernel_l2_norms",
    "resolvent_sum",
    "fit_decay",
    "leading_asymptotic",
    "DecayFitResult",
]


@dataclass(frozen=True)
class KernelConfig:
    a: float = 1.0
    T: float = 1.0
    x_grid: tuple = tuple(np.linspace(-8.0, 8.0, 321))
    y_ref: float = 0.0
    r: float = None          # arc radius, default 0.1 a^2/4
    J_max: int = 1000
    J_ladder: tuple = (10, 100, 1000)
    panels: int = 40         # Gauss-Legendre panels per ray
    nodes: int = 16          # nodes per panel

    def __post_init__(self):
        if not (np.isfinite(self.a) and self.a > 0):
            raise InvalidParameterError("a must be positive")
        if not (np.isfinite(self.T) and self.T > 0):
            raise InvalidParameterError("T must be positive")
        r = 0.1 * self.a**2 / 4 if self.r is None else float(self.r)
        if not 0 < r < self.a**2 / 4:
            raise InvalidParameterError("arc radius must lie in (0, a^2/4)")
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "x_grid", tuple(float(v) for v in self.x_grid))
        if max(self.J_ladder) > self.J_max:
            raise InvalidParameterError("J ladder exceeds J_max")


def heat_kernel(x, t, y=0.0, a=1.0):
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise DomainError("t must be positive")
    z = np.asarray(x, dtype=float) - y - a * t
    return np.exp(-z * z / (4 * t)) / np.sqrt(4 * np.pi * t)


def heat_kernel_dy(x, t, y=0.0, a=1.0):
    """d/dy of the heat kernel."""
    t = np.asarray(t, dtype=float)
    z = np.asarray(x, dtype=float) - y - a * t
    return z / (2 * t) * heat_kernel(x, t, y, a)


def direct_partial_sum(cfg, J_ladder=None):
    """Partial sums S_J(x) = sum_{j=1}^J K_y(x, jT; y_ref) for each J.

    Returns an array of shape (len(J_ladder), len(x_grid)).
    """
    J_ladder = sorted(cfg.J_ladder if J_ladder is None else J_ladder)
    if max(J_ladder) > cfg.J_max:
        raise InvalidParameterError("J exceeds J_max")
    x = np.asarray(cfg.x_grid)
    out = np.empty((len(J_ladder), len(x)))
    acc = np.zeros_like(x)
    j = 0
    for row, J in enumerate(J_ladder):
        while j < J:
            j += 1
            acc = acc + heat_kernel_dy(x, j * cfg.T, cfg.y_ref, cfg.a)
        out[row] = acc
    return out


def kernel_l2_norms(cfg, js, n=8001):
    """||K(., jT; y_ref)||_{L^2(x)} by trapezoidal quadrature."""
    out = []
    for j in js:
        t = j * cfg.T
        w = 20.0 * np.sqrt(t)
        x = np.linspace(cfg.y_ref + cfg.a * t - w, cfg.y_ref + cfg.a * t + w, n)
        k = heat_kernel(x, t, cfg.y_ref, cfg.a)
        out.append(np.sqrt(trapezoid(k * k, x)))
    return np.array(out)


def resolvent_kernel_dy(lam, d, a):
    """d/dy of the resolvent kernel at separation d = x - y."""
    lam = np.asarray(lam, dtype=complex)
    d = np.asarray(d, dtype=float)
    root = np.sqrt(a * a + 4 * lam)
    mu = np.where(d > 0, 0.5 * (a - root), 0.5 * (a + root))
    return -mu * np.exp(mu * d) / root


def _contour(cfg):
    """Nodes and weights (including d lambda) of Gamma, oriented upward."""
    r, T = cfg.r, cfg.T
    g, w = leggauss(cfg.nodes)
    # rays: lambda = rho e^{+-3 i pi/4}, rho in [r, rho_max]
    rho_max = r + 45.0 / (T * np.cos(np.pi / 4))
    # rho = r + s^2 clusters nodes near the arc
    s_edges = np.linspace(0.0, np.sqrt(rho_max - r), cfg.panels + 1)
    s = (0.5 * (s_edges[1:] - s_edges[:-1])[:, None] * g[None, :]
         + 0.5 * (s_edges[1:] + s_edges[:-1])[:, None]).ravel()
    ws = (0.5 * (s_edges[1:] - s_edges[:-1])[:, None] * w[None, :]).ravel()
    rho = r + s * s
    drho = 2 * s * ws
    up = np.exp(3j * np.pi / 4)
    lam_up, w_up = rho * up, drho * up
    lam_dn, w_dn = np.conj(lam_up), -np.conj(up) * drho   # traversed inward
    # arc through -r, theta from -3pi/4 down to -5pi/4
    na = cfg.nodes * 4
    ga, wa = leggauss(na)
    th = -np.pi + (np.pi / 4) * ga
    lam_arc = r * np.exp(1j * th)
    w_arc = -(np.pi / 4) * wa * 1j * lam_arc
    return (np.concatenate([lam_dn, lam_arc, lam_up]),
            np.concatenate([w_dn, w_arc, w_up]))


def resolvent_sum(cfg, x=None):
    """The infinite sum evaluated through the Laplace-inversion contour."""
    x = np.asarray(cfg.x_grid if x is None else x, dtype=float)
    lam, wts = _contour(cfg)
    eT = np.exp(lam * cfg.T)
    geo = eT / (1.0 - eT)
    d = x - cfg.y_ref
    G = resolvent_kernel_dy(lam[None, :], d[:, None], cfg.a) * geo[None, :]
    vals = (G @ wts) / (2j * np.pi)
    if not np.all(np.isfinite(vals)):
        raise ContourResolutionError("non-finite contour quadrature")
    imag = np.abs(vals.imag).max()
    if imag > 1e-8 * max(1.0, np.abs(vals.real).max()):
        raise ContourResolutionError(f"quadrature lost conjugate symmetry ({imag:.2e})")
    return vals.real


@dataclass
class DecayFitResult:
    eta0: float
    r2: float
    peaks_x: np.ndarray = field(repr=False)
    peaks_val: np.ndarray = field(repr=False)


def fit_decay(d, values, window=(1.0, 8.0)):
    """Exponential rate of |values| through its local maxima in ``window``.

    The sum oscillates in d, so the fit uses the peaks of |values|, which
    sample the envelope.
    """
    d = np.asarray(d, float)
    v = np.abs(np.asarray(values, float))
    m = (d >= window[0]) & (d <= window[1])
    dm, vm = d[m], v[m]
    k = np.where((vm[1:-1] > vm[:-2]) & (vm[1:-1] >= vm[2:]))[0] + 1
    if len(k) < 3:
        raise ContourResolutionError("fewer than three envelope peaks in the fit window")
    X, Y = dm[k], np.log(vm[k])
    A = np.vstack([X, np.ones_like(X)]).T
    coef, *_ = np.linalg.lstsq(A, Y, rcond=None)
    res = Y - A @ coef
    r2 = 1.0 - np.sum(res**2) / np.sum((Y - Y.mean()) ** 2)
    return DecayFitResult(float(-coef[0]), float(r2), X, vm[k])


def leading_asymptotic(x, cfg):
    """First term -K(x, T; y) / (a T) of the large-a expansion of the sum.

    Uses K_y = (K_t - K_yy) / a, so the sum is close to
    T^{-1} int_T^inf K_y dt = -K(x, T; y) / (a T) - (a T)^{-1} int_T^inf K_yy dt.
    The dropped integral is only small when a^2 T is large.
    """
    return -heat_kernel(x, cfg.T, cfg.y_ref, cfg.a) / (cfg.a * cfg.T)

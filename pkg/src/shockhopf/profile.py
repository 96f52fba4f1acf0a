"""Standing viscous shock profiles as heteroclinic orbits.

Because the first flux block is linear (U_1 is slaved to U_2 along the
orbit), the standing-wave equation B(U) U' = F(U) - F(U_-) reduces to an
r-dimensional ODE for U_2:

    U_1 = U_1- - A_11^{-1} A_12 (U_2 - U_2-)
    b(U) U_2' = F_2(U) - F_2(U_-)

For the isentropic gas this is a scalar ODE; it is an affine change of
variable of the scalar equation for the specific volume.
"""

import csv
import io
import json
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .errors import (
    DegenerateShockError,
    InvalidParameterError,
    NoConnectionError,
    ResolutionError,
)
from .model import EndstatePair, model_from_dict

__all__ = [
    "ShockProfile",
    "DecayFit",
    "solve_profile",
    "decay_rate",
    "decay_fit",
    "predicted_decay_rate",
    "profile_residual",
    "write_profile_csv",
    "read_profile_csv",
]


@dataclass(frozen=True, eq=False)
class ShockProfile:
    model: object
    endstates: EndstatePair
    grid: np.ndarray      # (N,)
    values: np.ndarray    # (n, N)
    derivs: np.ndarray    # (n, N)
    eta: float
    residual_max: float

    @property
    def x(self):
        return self.grid

    @property
    def dx(self):
        return float(self.grid[1] - self.grid[0])

    @property
    def half_length(self):
        return float(self.grid[-1])


@dataclass(frozen=True)
class DecayFit:
    eta: float
    eta_left: float
    eta_right: float
    r2_left: float
    r2_right: float
    n_left: int
    n_right: int
    predicted: float


class _Reduced:
    """The reduced ODE and its linear algebra."""

    def __init__(self, model, endstates):
        self.model = model
        self.um = np.asarray(endstates.u_minus, float)
        self.up = np.asarray(endstates.u_plus, float)
        n, r = model.n, model.r
        self.p = p = n - r
        A = model.flux_jacobian(self.um)
        self.S = np.linalg.solve(A[:p, :p], A[:p, p:])  # A11^{-1} A12
        self.F2m = model.flux(self.um)[p:]

    def full(self, y):
        """Full state(s) from U_2 values, y of shape (r, ...)."""
        y = np.asarray(y, float)
        d = y - self.um[self.p:].reshape((-1,) + (1,) * (y.ndim - 1))
        U1 = self.um[:self.p].reshape((-1,) + (1,) * (y.ndim - 1)) - np.tensordot(self.S, d, 1)
        return np.concatenate([U1, y], axis=0)

    def rhs(self, y):
        U = self.full(y)
        b = self.model.viscosity(U)[self.p:, self.p:]
        g = self.model.flux(U)[self.p:] - self.F2m.reshape((-1,) + (1,) * (np.ndim(y) - 1))
        if np.ndim(y) == 1:
            return np.linalg.solve(b, g)
        bb = np.moveaxis(b, (0, 1), (-2, -1))
        return np.moveaxis(np.linalg.solve(bb, np.moveaxis(g, 0, -1)[..., None])[..., 0], -1, 0)

    def jacobian(self, U):
        """Linearization of the reduced vector field at an endstate."""
        p = self.p
        A = self.model.flux_jacobian(U)
        b = self.model.viscosity(U)[p:, p:]
        Ared = A[p:, p:] - A[p:, :p] @ self.S
        return np.linalg.solve(b, Ared)

    def lift(self, w):
        """Full-space vector from a U_2 direction."""
        return np.concatenate([-self.S @ w, w])


def predicted_decay_rate(model, endstates):
    """Slowest exponential rate of the tails from the endstate linearizations."""
    red = _Reduced(model, endstates)
    em = np.linalg.eigvals(red.jacobian(red.um))
    ep = np.linalg.eigvals(red.jacobian(red.up))
    um_rates = em.real[em.real > 0]
    up_rates = -ep.real[ep.real < 0]
    if len(um_rates) == 0 or len(up_rates) == 0:
        raise NoConnectionError("endstates are not saddle/node of the profile ODE")
    return float(min(um_rates.min(), up_rates.min()))


def solve_profile(model, endstates, half_length=None, tol=1e-12, n_nodes=2001, center=0.0):
    """Compute the profile on a uniform grid over [-L, L].

    The trajectory leaves the endstate that carries a one-dimensional
    invariant manifold (unstable at U_-, or stable at U_+ when U_- is a
    repelling node) with offset 1e-6 |U_+ - U_-|.  It is integrated with an 8th-order Runge-Kutta method
    and resampled from its dense output.  The profile is translated so that
    the first component crosses its mean value at ``x = center``.
    """
    um = np.asarray(endstates.u_minus, float)
    up = np.asarray(endstates.u_plus, float)
    jump = np.linalg.norm(up - um)
    if jump == 0:
        raise DegenerateShockError("zero-strength shock")
    n_nodes = int(n_nodes)
    if n_nodes < 5:
        raise InvalidParameterError("n_nodes must be at least 5")
    red = _Reduced(model, endstates)
    p, r = red.p, model.r

    # shoot along the one-dimensional manifold: unstable at U- or stable at U+
    base, target, direction = None, None, None
    for U0, U1, sgn in ((um, up, 1.0), (up, um, -1.0)):
        w, V = np.linalg.eig(red.jacobian(U0))
        pick = np.where(sgn * w.real > 0)[0]
        if len(pick) == 1 and w[pick[0]].imag == 0:
            base, target, direction = U0, U1, sgn
            mu = float(w[pick[0]].real)
            vec = np.real(V[:, pick[0]])
            break
    if base is None:
        raise NoConnectionError("no one-dimensional invariant manifold at either endstate")
    vec = vec / np.linalg.norm(red.lift(vec))
    eta_pred = predicted_decay_rate(model, endstates)
    if half_length is None:
        half_length = 23.0 / eta_pred
    L = float(half_length)
    if not L > 0:
        raise InvalidParameterError("half_length must be positive")
    delta = 1e-6 * jump

    y_target = target[p:]
    lo = np.minimum(um, up) - 0.5 * np.abs(up - um) - 1e-12
    hi = np.maximum(um, up) + 0.5 * np.abs(up - um) + 1e-12

    def escape(t, y):
        U = red.full(y)
        return float(np.min(np.concatenate([U - lo, hi - U])))

    def arrive(t, y):
        return float(np.linalg.norm(y - y_target) - 1e-8 * jump)

    escape.terminal = True
    arrive.terminal = True
    arrive.direction = -1

    # integrate in tau = direction * x, starting at tau = 0
    span = (np.log(jump / delta) + 40.0) / abs(mu) + 10.0
    sol = None
    for sign in (1.0, -1.0):
        y0 = base[p:] + sign * delta * vec
        s = solve_ivp(lambda t, y: direction * red.rhs(y), (0.0, span), y0, method="DOP853",
                      rtol=tol, atol=tol * 1e-2 * jump, dense_output=True,
                      events=(escape, arrive))
        if s.status == -1:
            raise ResolutionError(f"profile integration failed: {s.message}")
        if s.status == 1 and len(s.t_events[1]) > 0:
            sol = s
            vec = sign * vec
            break
    if sol is None:
        raise NoConnectionError("invariant manifold does not connect the endstates")
    t_s = sol.t_events[1][0]
    z_s = sol.y_events[1][0] - y_target

    # Once within 1e-8 of the target the flow is linear to roundoff; the
    # exact linear flow avoids the error floor of the adaptive integrator.
    Jt = direction * red.jacobian(target)
    lam, W = np.linalg.eig(Jt)
    coef = np.linalg.solve(W, z_s)

    def near_target(tt):
        E = np.exp(np.outer(lam, tt - t_s)) * coef[:, None]
        return np.real(W @ E), np.real(W @ (lam[:, None] * E))

    # locate the mean crossing of the first component
    c = 0.5 * (um[0] + up[0])
    f = lambda t: red.full(sol.sol(t))[0] - c
    ts = sol.t
    vals = np.array([f(t) for t in ts])
    k = np.where(np.sign(vals[:-1]) != np.sign(vals[1:]))[0]
    if len(k) == 0:
        raise NoConnectionError("profile does not cross its mean value")
    x_c = brentq(f, ts[k[0]], ts[k[0] + 1], xtol=1e-15, rtol=1e-15)

    x = np.linspace(-L, L, n_nodes) + center
    t = direction * (x - center) + x_c
    Y = np.empty((r, n_nodes))
    dY = np.empty((r, n_nodes))
    seed = t < 0
    far = t > t_s
    mid = ~seed & ~far
    Y[:, mid] = sol.sol(t[mid])
    dY[:, mid] = red.rhs(Y[:, mid])
    # linear tail beyond the seed point
    tail = np.exp(abs(mu) * t[seed])
    Y[:, seed] = base[p:, None] + delta * vec[:, None] * tail
    dY[:, seed] = mu * delta * vec[:, None] * tail
    zf, dzf = near_target(t[far])
    Y[:, far] = y_target[:, None] + zf
    dY[:, far] = direction * dzf
    U = red.full(Y)
    dU = np.concatenate([-red.S @ dY, dY], axis=0)

    prof = ShockProfile(model, endstates, x, U, dU, eta_pred, 0.0)
    res = profile_residual(prof)
    eta = eta_pred
    try:
        eta = decay_fit(prof).eta
    except ResolutionError:
        pass
    return ShockProfile(model, endstates, x, U, dU, eta, res)


# eighth-order central first-derivative weights
_FD8 = np.array([1 / 280, -4 / 105, 1 / 5, -4 / 5, 0.0, 4 / 5, -1 / 5, 4 / 105, -1 / 280])


def _fd8(values, dx):
    N = values.shape[-1]
    out = np.zeros(values.shape[:-1] + (N - 8,))
    for j, c in enumerate(_FD8):
        if c != 0:
            out += c * values[..., j:N - 8 + j]
    return out / dx


def profile_residual(profile):
    """Sup norm of B(U)U' - F(U) + F(U_-) on interior nodes.

    U' is recomputed from the stored values by eighth-order central
    differences, so the stored derivative column is not trusted.
    """
    model = profile.model
    U = profile.values
    N = U.shape[1]
    if N < 9:
        raise InvalidParameterError("at least 9 nodes needed")
    dU = _fd8(U, profile.dx)
    Ui = U[:, 4:N - 4]
    B = model.viscosity(Ui)
    lhs = np.einsum("ijk,jk->ik", B, dU)
    Fm = model.flux(np.asarray(profile.endstates.u_minus, float))
    res = lhs - model.flux(Ui) + Fm[:, None]
    return float(np.abs(res).max())


def _tail_fit(x, dev):
    mask = (dev > 1e-12) & (dev < 1e-3)
    if mask.sum() < 20:
        raise ResolutionError("fewer than 20 tail nodes in [1e-12, 1e-3]")
    X = np.abs(x[mask])
    Y = np.log(dev[mask])
    A = np.vstack([X, np.ones_like(X)]).T
    coef, *_ = np.linalg.lstsq(A, Y, rcond=None)
    pred = A @ coef
    ss_res = np.sum((Y - pred) ** 2)
    ss_tot = np.sum((Y - Y.mean()) ** 2)
    return -coef[0], 1.0 - ss_res / ss_tot, int(mask.sum())


def decay_fit(profile):
    """Least-squares fit of the exponential tails on both sides."""
    um = np.asarray(profile.endstates.u_minus, float)
    up = np.asarray(profile.endstates.u_plus, float)
    x = profile.grid - 0.5 * (profile.grid[0] + profile.grid[-1])
    left, right = x < 0, x > 0
    dev_l = np.linalg.norm(profile.values[:, left] - um[:, None], axis=0)
    dev_r = np.linalg.norm(profile.values[:, right] - up[:, None], axis=0)
    el, rl, nl = _tail_fit(x[left], dev_l)
    er, rr, nr = _tail_fit(x[right], dev_r)
    return DecayFit(float(min(el, er)), float(el), float(er), float(rl), float(rr), nl, nr,
                    predicted_decay_rate(profile.model, profile.endstates))


def decay_rate(profile):
    return decay_fit(profile).eta


# -- CSV round trip --------------------------------------------------------------

def write_profile_csv(profile, path=None):
    """Write x, U, U' columns with 17 significant digits.

    A leading ``#`` line carries the model and endstates as JSON.  Returns
    the text when ``path`` is None.
    """
    n = profile.model.n
    meta = {"model": profile.model.to_dict(), "endstates": profile.endstates.to_dict(),
            "eta": profile.eta, "residual_max": profile.residual_max}
    buf = io.StringIO()
    buf.write("# " + json.dumps(meta, sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x"] + [f"U{k}" for k in range(n)] + [f"dU{k}" for k in range(n)])
    data = np.vstack([profile.grid[None], profile.values, profile.derivs]).T
    for row in data:
        w.writerow([f"{v:.17g}" for v in row])
    text = buf.getvalue()
    if path is None:
        return text
    with open(path, "w", newline="") as fh:
        fh.write(text)
    return path


def read_profile_csv(path):
    with open(path) as fh:
        first = fh.readline()
        if not first.startswith("# "):
            raise InvalidParameterError("missing metadata line")
        meta = json.loads(first[2:])
        rows = list(csv.reader(fh))
    data = np.array([[float(v) for v in r] for r in rows[1:]])
    model = model_from_dict(meta["model"])
    ends = EndstatePair.from_dict(meta["endstates"])
    n = model.n
    return ShockProfile(model, ends, data[:, 0].copy(), data[:, 1:1 + n].T.copy(),
                        data[:, 1 + n:1 + 2 * n].T.copy(), float(meta["eta"]),
                        float(meta["residual_max"]))

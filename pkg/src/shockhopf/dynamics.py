"""Method-of-lines time integration of perturbations of a viscous shock.

The perturbation U = W - W_bar of a steady background W_bar (a shock profile
or a constant state) solves

    U_t = R(U) := Op(W_bar + U) - Op(W_bar),

where Op is the spatially discretized right-hand side of
U_t + F(U)_x = (B(U) U_x)_x (divergence form) or
U_t + F(U)_x = B(U) U_xx (the quasilinear Eulerian form).  Convection uses
second-order central differences and diffusion the standard three-point
stencil, so the divergence-form scheme telescopes and conserves discrete mass
up to the boundary fluxes.

Time stepping is a Strang splitting: a Crank-Nicolson half step for the
frozen diffusion D U = (B(W_bar) U_x)_x, a classical RK4 step for the rest,
and a second diffusion half step.  The linearized flow uses the same scheme
with the remainder replaced by its exact discrete derivative at U = 0, so
the discrete linearized step is the derivative of the discrete nonlinear
step and the linearization error is a genuine second-order quantity.
"""

from dataclasses import dataclass, field
import time

import numpy as np
from scipy import linalg, sparse
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq
from scipy.sparse.linalg import splu

from .errors import (BlowupError, InvalidParameterError, StepRejectedError,
                     WeightedOverflowError)
from .model import IsentropicEulerian, IsentropicLagrangian
from .profile import solve_profile

__all__ = [
    "Background",
    "SimState",
    "NormProbe",
    "ExperimentReport",
    "profile_background",
    "constant_background",
    "make_state",
    "step_nonlinear",
    "step_linearized",
    "evolve",
    "stable_dt",
    "sobolev_norm",
    "energy_functional",
    "energy_bounds",
    "weighted_norm",
    "discrete_mass",
    "mass_drift",
    "kernel_mode_drift",
    "fit_slope",
    "default_shape",
    "linearization_error_experiment",
    "rough_packet",
    "transport_oracle",
    "eulerian_counterexample",
    "NormalFormBackend",
    "periodic_probe",
    "roughness_sweep",
]


# -- background and state -------------------------------------------------------

class Background:
    """Steady state W_bar on a uniform grid, with the cached linear operators."""

    def __init__(self, model, x, W, profile=None):
        self.model = model
        self.x = np.asarray(x, dtype=float)
        self.W = np.asarray(W, dtype=float)
        self.profile = profile
        if self.W.shape != (model.n, len(self.x)):
            raise InvalidParameterError("background shape does not match the grid")
        if len(self.x) < 5:
            raise InvalidParameterError("at least 5 grid nodes needed")
        self.dx = float(self.x[1] - self.x[0])
        if not np.allclose(np.diff(self.x), self.dx, rtol=1e-9, atol=0):
            raise InvalidParameterError("grid must be uniform")
        self.divergence = bool(model.divergence_form)
        # ghost nodes carry the endstate values
        self.Wg = np.concatenate([self.W[:, :1], self.W, self.W[:, -1:]], axis=1)
        self.op_bar = _op(self, self.Wg)
        self._diff = None
        self._lin = None
        self._cn = {}

    @property
    def frame(self):
        return self.model.frame

    @property
    def n(self):
        return self.model.n

    @property
    def N(self):
        return len(self.x)

    def diffusion_matrix(self):
        if self._diff is None:
            self._diff = _diffusion_matrix(self)
        return self._diff

    def cn_solver(self, dt):
        """Factorized Crank-Nicolson half step for the frozen diffusion."""
        key = float(dt)
        if key not in self._cn:
            D = self.diffusion_matrix()
            I = sparse.identity(D.shape[0], format="csc")
            h = 0.25 * dt
            lu = splu((I - h * D).tocsc())
            rhs = (I + h * D).tocsr()
            self._cn = {key: (lu, rhs)}
        return self._cn[key]


def profile_background(profile, half_length=None, dx=None):
    """Background from a shock profile, re-solved on a wider grid if asked.

    The profile tails are continued by the exact linearized flow, so the
    background remains a steady state to the profile tolerance on the
    enlarged domain.
    """
    if half_length is None and dx is None:
        return Background(profile.model, profile.x, profile.values, profile)
    L = profile.half_length if half_length is None else float(half_length)
    h = profile.dx if dx is None else float(dx)
    n_nodes = int(round(2 * L / h)) + 1
    prof = solve_profile(profile.model, profile.endstates, half_length=L, n_nodes=n_nodes)
    return Background(prof.model, prof.x, prof.values, prof)


def constant_background(model, state, x):
    state = np.asarray(state, dtype=float)
    W = np.repeat(state[:, None], len(x), axis=1)
    return Background(model, x, W)


@dataclass(frozen=True, eq=False)
class SimState:
    """Perturbation fields on the background grid at time t."""

    background: Background
    U: np.ndarray
    t: float = 0.0

    @property
    def x(self):
        return self.background.x

    @property
    def dx(self):
        return self.background.dx

    @property
    def frame(self):
        return self.background.frame

    def boundary_ratio(self):
        """Largest boundary value relative to the interior maximum."""
        a = np.abs(self.U)
        m = a.max()
        if m == 0:
            return 0.0
        return float(max(a[:, 0].max(), a[:, -1].max()) / m)

    def check(self, tol=1e-8):
        if not np.all(np.isfinite(self.U)):
            raise BlowupError("non-finite field", self)
        return self.boundary_ratio() <= tol


def make_state(background, U, t=0.0):
    U = np.array(U, dtype=float)
    if U.shape != background.W.shape:
        raise InvalidParameterError("field shape does not match the background")
    return SimState(background, U, float(t))


# -- spatial operators ----------------------------------------------------------

def _op(bg, Wg):
    """Discrete right-hand side at the ghosted state Wg, shape (n, N + 2)."""
    model, dx = bg.model, bg.dx
    F = model.flux(Wg)
    if bg.divergence:
        Fh = 0.5 * (F[:, :-1] + F[:, 1:])
        Wf = 0.5 * (Wg[:, :-1] + Wg[:, 1:])
        G = np.einsum("ijk,jk->ik", model.viscosity(Wf), np.diff(Wg, axis=1)) / dx
        return (-(Fh[:, 1:] - Fh[:, :-1]) + (G[:, 1:] - G[:, :-1])) / dx
    Wi = Wg[:, 1:-1]
    lap = (Wg[:, 2:] - 2 * Wi + Wg[:, :-2]) / dx**2
    return -(F[:, 2:] - F[:, :-2]) / (2 * dx) + np.einsum("ijk,jk->ik", model.viscosity(Wi), lap)


def _ghost(U):
    """Zero Dirichlet ghost values for the perturbation."""
    z = np.zeros((U.shape[0], 1))
    return np.concatenate([z, U, z], axis=1)


def _diffusion_matrix(bg):
    """Sparse matrix of U -> (B(W_bar) U_x)_x (or B(W_bar) U_xx), component-major."""
    model, n, N, dx = bg.model, bg.n, bg.N, bg.dx
    rows, cols, vals = [], [], []
    idx = np.arange(N)

    def add(i, j, r, c, v):
        keep = (c >= 0) & (c < N) & (v != 0)
        rows.append(i * N + r[keep])
        cols.append(j * N + c[keep])
        vals.append(v[keep])

    if bg.divergence:
        Wf = 0.5 * (bg.Wg[:, :-1] + bg.Wg[:, 1:])
        Bf = model.viscosity(Wf) / dx**2          # faces -1/2 .. N-1/2
        for i in range(n):
            for j in range(n):
                left, right = Bf[i, j, :-1], Bf[i, j, 1:]
                add(i, j, idx, idx, -(left + right))
                add(i, j, idx, idx + 1, right)
                add(i, j, idx, idx - 1, left)
    else:
        Bn = model.viscosity(bg.W) / dx**2
        for i in range(n):
            for j in range(n):
                b = Bn[i, j]
                add(i, j, idx, idx, -2 * b)
                add(i, j, idx, idx + 1, b)
                add(i, j, idx, idx - 1, b)
    return sparse.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                             shape=(n * N, n * N))


def _apply(M, U):
    return (M @ U.ravel()).reshape(U.shape)


def _full_rhs(bg, U):
    return _op(bg, bg.Wg + _ghost(U)) - bg.op_bar


def _remainder(bg, U):
    """Nonlinear remainder R(U) - D U, advanced explicitly."""
    return _full_rhs(bg, U) - _apply(bg.diffusion_matrix(), U)


def _linear_remainder(bg, U):
    """Exact derivative at U = 0 of the discrete remainder."""
    model, dx = bg.model, bg.dx
    Ug = _ghost(U)
    Wg = bg.Wg
    AU = np.einsum("ijk,jk->ik", model.flux_jacobian(Wg), Ug)
    if bg.divergence:
        Fh = 0.5 * (AU[:, :-1] + AU[:, 1:])
        Wf = 0.5 * (Wg[:, :-1] + Wg[:, 1:])
        Uf = 0.5 * (Ug[:, :-1] + Ug[:, 1:])
        dB = np.einsum("ijkf,kf->ijf", model.viscosity_derivative(Wf), Uf)
        G = np.einsum("ijk,jk->ik", dB, np.diff(Wg, axis=1)) / dx
        return (-(Fh[:, 1:] - Fh[:, :-1]) + (G[:, 1:] - G[:, :-1])) / dx
    Wi = Wg[:, 1:-1]
    lap = (Wg[:, 2:] - 2 * Wi + Wg[:, :-2]) / dx**2
    dB = np.einsum("ijkf,kf->ijf", model.viscosity_derivative(Wi), U)
    return -(AU[:, 2:] - AU[:, :-2]) / (2 * dx) + np.einsum("ijk,jk->ik", dB, lap)


def _max_speed(model, W):
    A = np.moveaxis(model.flux_jacobian(W), (0, 1), (-2, -1))
    return float(np.abs(np.linalg.eigvals(A)).max())


def _max_diffusion(B):
    Bm = np.moveaxis(B, (0, 1), (-2, -1))
    return float(np.abs(np.linalg.eigvals(Bm)).max())


def _check_dt(state, dt, mode, linear):
    bg = state.background
    if not (np.isfinite(dt) and dt > 0):
        raise InvalidParameterError("dt must be positive")
    W = bg.W if linear else bg.W + state.U
    a = _max_speed(bg.model, W)
    if a > 0 and dt > 0.4 * bg.dx / a * (1 + 1e-12):
        raise StepRejectedError(f"CFL violated: dt={dt:.3e} > {0.4 * bg.dx / a:.3e}")
    if mode == "explicit":
        b = _max_diffusion(bg.model.viscosity(W))
    elif mode == "implicit":
        # only the nonlinear part of the diffusion is explicit
        b = 0.0 if linear else _max_diffusion(bg.model.viscosity(W) - bg.model.viscosity(bg.W))
    else:
        raise InvalidParameterError(f"unknown mode {mode!r}")
    if b > 0 and dt > 0.25 * bg.dx**2 / b * (1 + 1e-12):
        raise StepRejectedError(f"diffusive step limit violated: dt={dt:.3e}")


def stable_dt(state, cfl=0.35, mode="implicit"):
    """Largest step satisfying the step limits with safety factor cfl / 0.4."""
    bg = state.background
    W = bg.W + state.U
    dt = cfl * bg.dx / max(_max_speed(bg.model, W), _max_speed(bg.model, bg.W))
    B = bg.model.viscosity(W)
    b = _max_diffusion(B if mode == "explicit" else B - bg.model.viscosity(bg.W))
    if b > 0:
        dt = min(dt, cfl / 0.4 * 0.25 * bg.dx**2 / b)
    return dt


def _rk4(f, U, dt):
    k1 = f(U)
    k2 = f(U + 0.5 * dt * k1)
    k3 = f(U + 0.5 * dt * k2)
    k4 = f(U + dt * k3)
    return U + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def _advance(state, dt, linear, mode, check=True):
    bg = state.background
    if check:
        _check_dt(state, dt, mode, linear)
    U = state.U
    if mode == "explicit":
        f = (lambda V: _linear_remainder(bg, V) + _apply(bg.diffusion_matrix(), V)) if linear \
            else (lambda V: _full_rhs(bg, V))
        U = _rk4(f, U, dt)
    else:
        lu, rhs = bg.cn_solver(dt)
        half = lambda V: lu.solve(rhs @ V.ravel()).reshape(V.shape)
        f = (lambda V: _linear_remainder(bg, V)) if linear else (lambda V: _remainder(bg, V))
        U = half(_rk4(f, half(U), dt))
    if not np.all(np.isfinite(U)):
        raise BlowupError(f"non-finite field at t={state.t + dt:.6g}", state)
    return SimState(bg, U, state.t + dt)


def step_nonlinear(state, dt, mode="implicit"):
    """One step of the nonlinear perturbation equations.

    ``mode="implicit"`` treats the frozen diffusion by Crank-Nicolson and is
    unconditionally stable in it; ``mode="explicit"`` is plain RK4 and needs
    dt <= dx^2 / (4 max b) as well as the convective CFL bound.
    """
    return _advance(state, dt, False, mode)


def step_linearized(state, dt, mode="implicit"):
    """One step of the equations linearized about the background."""
    return _advance(state, dt, True, mode)


def evolve(state, t_end, dt, linear=False, mode="implicit", callback=None):
    """Advance to ``state.t + t_end`` with steps no larger than ``dt``."""
    n_steps = max(1, int(np.ceil(t_end / dt - 1e-9)))
    h = t_end / n_steps
    # the step limits depend on the state only through the nonlinear terms
    every = n_steps + 1 if linear else 20
    for k in range(n_steps):
        state = _advance(state, h, linear, mode, check=(k % every == 0))
        if callback is not None:
            callback(state)
    return state


# -- norms ------------------------------------------------------------------------

def _derivs(U, dx, s):
    """U and its first s repeated centered differences (zero outside the grid)."""
    out = [U]
    V = U
    for _ in range(s):
        Vg = _ghost(V)
        V = (Vg[:, 2:] - Vg[:, :-2]) / (2 * dx)
        out.append(V)
    return out


def _check_order(s):
    if int(s) != s or not 0 <= s <= 4:
        raise InvalidParameterError("Sobolev order must be an integer in [0, 4]")
    return int(s)


def sobolev_norm(U, dx, s):
    """Discrete H^s norm sqrt(sum_l ||d^l U||^2) with rectangle-rule L^2."""
    s = _check_order(s)
    U = np.atleast_2d(np.asarray(U, dtype=float))
    return float(np.sqrt(sum(np.sum(V * V) for V in _derivs(U, dx, s)) * dx))


def energy_functional(state, s):
    """(1/2) sum_{l<=s} <d^l U, A0(W_bar) d^l U> with the model symmetrizer."""
    s = _check_order(s)
    bg = state.background
    A0 = bg.model.symmetrizer(bg.W)
    total = 0.0
    for V in _derivs(state.U, bg.dx, s):
        total += np.einsum("ik,ijk,jk->", V, A0, V)
    return 0.5 * float(total) * bg.dx


def energy_bounds(background):
    """(c1, c2) with c1 ||U||_{H^s}^2 <= E(U) <= c2 ||U||_{H^s}^2.

    Half the extreme eigenvalues of the symmetrized A0 along the background.
    """
    A0 = np.moveaxis(background.model.symmetrizer(background.W), (0, 1), (-2, -1))
    ev = np.linalg.eigvalsh(0.5 * (A0 + np.swapaxes(A0, -1, -2)))
    return 0.5 * float(ev.min()), 0.5 * float(ev.max())


def weighted_norm(state, s, eta):
    """||e^{eta <x>} U||_{H^s}, <x> = (1 + x^2)^{1/2}."""
    if not (np.isfinite(eta) and eta >= 0):
        raise InvalidParameterError("eta must be nonnegative")
    jx = np.sqrt(1.0 + state.x**2)
    if eta * jx.max() > 30.0:
        raise WeightedOverflowError(f"eta * max<x> = {eta * jx.max():.1f} exceeds 30")
    return sobolev_norm(np.exp(eta * jx) * state.U, state.dx, s)


@dataclass
class NormProbe:
    """Time history of a (weighted) Sobolev norm."""

    s: int = 0
    eta: float = 0.0
    history: list = field(default_factory=list)

    def __post_init__(self):
        _check_order(self.s)
        if self.eta < 0:
            raise InvalidParameterError("eta must be nonnegative")

    def __call__(self, state):
        self.history.append((state.t, weighted_norm(state, self.s, self.eta)))

    def values(self):
        return np.array([v for _, v in self.history])


def discrete_mass(state):
    return state.U.sum(axis=1) * state.dx


def mass_drift(state, t_end, dt, linear=False, mode="implicit"):
    """Largest change per unit time of the discrete mass of each component."""
    m0 = discrete_mass(state)
    end = evolve(state, t_end, dt, linear=linear, mode=mode)
    return float(np.abs(discrete_mass(end) - m0).max() / t_end), end


def kernel_mode_drift(background, t_end=1.0, dt=None, n_checks=10):
    """max_t ||U(t) - U'_bar||_{L^2} / ||U'_bar||_{L^2} for the linearized flow.

    The translation mode is taken as the profile derivative on the grid.
    """
    prof = background.profile
    if prof is None:
        raise InvalidParameterError("background has no profile")
    if dt is None:
        dt = 0.4 * background.dx / _max_speed(background.model, background.W)
    phi = prof.derivs
    state = make_state(background, phi)
    n0 = sobolev_norm(phi, background.dx, 0)
    worst = 0.0
    for _ in range(n_checks):
        state = evolve(state, t_end / n_checks, dt, linear=True)
        worst = max(worst, sobolev_norm(state.U - phi, background.dx, 0) / n0)
    return worst


# -- experiments ------------------------------------------------------------------

@dataclass
class ExperimentReport:
    amplitudes: list
    errors: list
    fitted_slope: float
    r2: float
    runtime: float
    truncated: bool = False
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.amplitudes) != len(self.errors):
            raise InvalidParameterError("amplitudes and errors differ in length")

    def to_dict(self):
        return dict(amplitudes=list(map(float, self.amplitudes)),
                    errors=list(map(float, self.errors)),
                    fitted_slope=self.fitted_slope, r2=self.r2, runtime=self.runtime,
                    truncated=self.truncated, extra=self.extra)


def fit_slope(amplitudes, errors):
    """Least-squares slope and R^2 of log(errors) against log(amplitudes)."""
    X = np.log(np.asarray(amplitudes, dtype=float))
    Y = np.log(np.asarray(errors, dtype=float))
    if len(X) < 2 or not np.all(np.isfinite(Y)):
        return float("nan"), float("nan")
    coef = np.polyfit(X, Y, 1)
    res = Y - np.polyval(coef, X)
    ss = np.sum((Y - Y.mean()) ** 2)
    r2 = 1.0 - np.sum(res**2) / ss if ss > 0 else 1.0
    return float(coef[0]), float(r2)


def _check_amplitudes(amplitudes):
    a = np.asarray(amplitudes, dtype=float)
    if len(a) < 4:
        raise InvalidParameterError("at least four amplitudes needed")
    if np.any(a <= 0):
        raise InvalidParameterError("amplitudes must be positive")
    r = np.diff(np.log(np.sort(a)))
    if not np.allclose(r, r[0], rtol=1e-6):
        raise InvalidParameterError("amplitudes must be log-spaced")
    return a


def default_shape(x, n):
    """Smooth localized data, one bump per component."""
    out = np.empty((n, len(x)))
    for i in range(n):
        c = 0.3 * (i - 0.5 * (n - 1))
        out[i] = (1.0 - 0.4 * i) * np.exp(-((x - c) / 0.5) ** 2)
    return out


def _error_ladder(bg, shape, s, T_end, amplitudes, dt, quadratic=True, components=None):
    """Run the nonlinear flow for each amplitude against the scaled linear flow."""
    shape = shape / sobolev_norm(shape, bg.dx, s)
    if dt is None:
        top = bg.W + amplitudes.max() * shape
        a = max(_max_speed(bg.model, bg.W), _max_speed(bg.model, top))
        dt = 0.35 * bg.dx / a
    lin = evolve(make_state(bg, shape), T_end, dt, linear=True).U
    errors, comp, truncated, done = [], [], False, []
    for alpha in amplitudes:
        try:
            end = evolve(make_state(bg, alpha * shape), T_end, dt, linear=not quadratic)
        except (BlowupError, StepRejectedError):
            truncated = True
            break
        diff = end.U - alpha * lin
        errors.append(sobolev_norm(diff, bg.dx, s))
        comp.append([sobolev_norm(diff[i], bg.dx, s) for i in range(bg.n)])
        done.append(alpha)
    return np.array(done), np.array(errors), np.array(comp), truncated, dt


def linearization_error_experiment(profile, s=2, T_end=1.0, amplitudes=None, shape=None,
                                   half_length=10.0, dx=None, dt=None, quadratic=True):
    """Nonlinear versus linearized evolution of alpha * U0_hat about a profile.

    Errors are ||U_nl(T) - U_lin(T)||_{H^s}; the data shape is normalized to
    unit H^s norm so the amplitude equals ||U0||_{H^s}.  ``quadratic=False``
    replaces the nonlinear flow by the linear one (the errors then vanish).
    """
    t0 = time.perf_counter()
    s = _check_order(s)
    if profile.model.frame != "Lagrangian":
        raise InvalidParameterError("the experiment requires a Lagrangian model")
    amps = _check_amplitudes(np.logspace(-1, -4, 7) if amplitudes is None else amplitudes)
    if amps.max() > 0.1 + 1e-12:
        raise InvalidParameterError("amplitudes must satisfy ||U0||_{H^s} <= 0.1")
    bg = profile_background(profile, half_length=half_length, dx=dx)
    shape = default_shape(bg.x, bg.n) if shape is None else np.asarray(shape, float)
    done, errors, comp, truncated, dt = _error_ladder(bg, shape, s, T_end, amps, dt, quadratic)
    slope, r2 = fit_slope(done, errors) if quadratic else (float("nan"), float("nan"))
    return ExperimentReport(list(done), list(errors), slope, r2, time.perf_counter() - t0,
                            truncated, dict(dx=bg.dx, dt=dt, s=s, T_end=T_end,
                                            component_errors=comp.tolist()))


def rough_packet(x, ratio=100.0, s=2, width=1.0):
    """Unit H^s-norm wave packet exp(-x^2/w^2) cos(k x) with ||d^s f|| / ||f|| = ratio.

    Returns (values, k) with the ratio computed by the same discrete
    derivatives as the norms.
    """
    dx = float(x[1] - x[0])

    def shape(k):
        return np.exp(-(x / width) ** 2) * np.cos(k * x)

    def gap(k):
        f = shape(k)[None]
        V = _derivs(f, dx, s)
        return np.log(np.sqrt(np.sum(V[s] ** 2) / np.sum(f**2)) / ratio)

    k_max = 0.5 * np.pi / dx
    k = brentq(gap, 0.0, k_max) if gap(k_max) > 0 else k_max
    f = shape(k)
    return f / sobolev_norm(f, dx, s), float(k)


def transport_oracle(x, rho0, u_history, times, t_end):
    """rho_bar(x, t) = rho0(X(x, t)) with X the backward characteristic foot.

    rho0 is a callable; u_history holds velocity snapshots u(x, times[m]); characteristics are
    traced backward with RK4 in time and cubic interpolation in space.
    """
    times = np.asarray(times, dtype=float)
    X = np.asarray(x, dtype=float).copy()
    splines = [CubicSpline(x, u) for u in u_history]

    def vel(t, pts):
        m = int(np.clip(np.searchsorted(times, t) - 1, 0, len(times) - 2))
        th = (t - times[m]) / (times[m + 1] - times[m])
        return (1 - th) * splines[m](pts) + th * splines[m + 1](pts)

    ts = times[times <= t_end + 1e-12][::-1]
    for t1, t0 in zip(ts[:-1], ts[1:]):
        h = t0 - t1
        k1 = vel(t1, X)
        k2 = vel(t1 + 0.5 * h, X + 0.5 * h * k1)
        k3 = vel(t1 + 0.5 * h, X + 0.5 * h * k2)
        k4 = vel(t0, X + h * k3)
        X = X + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    return rho0(X)


def eulerian_counterexample(s=2, T_end=0.5, amplitudes=None, nu=0.05, half_length=8.0,
                            dx=0.01, ratio=100.0, dt=None, control=True):
    """Linearization error for rough density data in Eulerian and Lagrangian form.

    Background (rho, u) = (1, 0) with p(rho) = rho, so p'(1) = 1.  The data are
    alpha * (rho_hat, u_hat) where rho_hat is a unit H^s packet with
    ||d^s rho_hat|| / ||rho_hat|| = ratio and u_hat a unit H^s Gaussian.  The
    Lagrangian control evolves the matching specific volume v - 1 = -rho_hat.
    The transport oracle advects rho_0 with the nonlinear velocity of the
    largest-amplitude run.
    """
    t0 = time.perf_counter()
    s = _check_order(s)
    amps = _check_amplitudes(np.logspace(-1, -4, 7) if amplitudes is None else amplitudes)
    n_nodes = int(round(2 * half_length / dx)) + 1
    x = np.linspace(-half_length, half_length, n_nodes)
    rho_hat, k = rough_packet(x, ratio, s)
    u_hat = np.exp(-x**2)
    u_hat = u_hat / sobolev_norm(u_hat, x[1] - x[0], s)
    euler = constant_background(IsentropicEulerian(gamma=1.0, nu=nu), [1.0, 0.0], x)
    shape = np.stack([rho_hat, u_hat])
    norm = sobolev_norm(shape, euler.dx, s)
    done, errors, comp, truncated, dt_used = _error_ladder(euler, shape, s, T_end, amps, dt)
    rho_err = comp[:, 0] if len(comp) else np.array([])
    u_err = comp[:, 1] if len(comp) else np.array([])
    rho_slope, rho_r2 = fit_slope(done, rho_err)
    u_slope, _ = fit_slope(done, u_err)
    extra = dict(dx=euler.dx, dt=dt_used, s=s, T_end=T_end, nu=nu, k=k,
                 rho_errors=rho_err.tolist(), u_errors=u_err.tolist(), u_slope=u_slope,
                 pair_norm=norm)

    # transport oracle on the largest amplitude
    alpha = float(amps.max())
    snaps, times = [alpha * u_hat], [0.0]

    def grab(st):
        snaps.append(st.U[1].copy())
        times.append(st.t)

    evolve(make_state(euler, alpha * shape / norm), T_end, dt_used, callback=grab)
    rho0 = alpha * rho_hat / norm
    rho_bar = transport_oracle(x, CubicSpline(x, rho0), np.array(snaps), np.array(times), T_end)
    oracle = sobolev_norm(rho_bar - rho0, euler.dx, s) / sobolev_norm(rho0, euler.dx, s)
    extra["transport_ratio"] = float(oracle)

    if control:
        lag = constant_background(IsentropicLagrangian(gamma=1.0, nu=nu, a0=1.0), [1.0, 0.0], x)
        lshape = np.stack([-rho_hat, u_hat])
        ldone, lerr, _, ltr, _ = _error_ladder(lag, lshape, s, T_end, amps, dt)
        lslope, lr2 = fit_slope(ldone, lerr)
        extra.update(lagrangian_errors=lerr.tolist(), lagrangian_slope=lslope,
                     lagrangian_r2=lr2, lagrangian_truncated=ltr)
    return ExperimentReport(list(done), list(rho_err), rho_slope, rho_r2,
                            time.perf_counter() - t0, truncated, extra)


# -- periodic-orbit probe ---------------------------------------------------------

@dataclass(frozen=True)
class NormalFormBackend:
    """Planar Hopf normal form coupled to a damped transverse field.

    With z = a + i b and v(x) on [-L, L] (zero Dirichlet data),

        z' = (mu + i tau) z - (1 - i beta) |z|^2 z - g <v, psi> z,
        v_t = v_xx - c v + |z|^2 psi(x),

    mu = eps - eps_star, tau = tau_star.  The represented field is
    U(x) = a phi1(x) + b phi2(x) + v(x) with phi1 = sech(kappa x),
    phi2 = sech(kappa x) tanh(kappa x), psi = sech(kappa x)^2, so U decays like
    exp(-min(kappa, sqrt(c)) |x|).
    """

    eps: float
    eps_star: float = 0.5
    tau_star: float = 1.0
    kappa: float = 1.0
    c: float = 4.0
    beta: float = 0.05
    g: float = 0.5
    half_length: float = 12.0
    n_nodes: int = 241

    @property
    def x(self):
        return np.linspace(-self.half_length, self.half_length, self.n_nodes)

    @property
    def dx(self):
        return 2 * self.half_length / (self.n_nodes - 1)

    @property
    def decay_rate(self):
        return min(self.kappa, np.sqrt(self.c))

    def modes(self):
        x = self.x
        sech = 1.0 / np.cosh(self.kappa * x)
        return sech, sech * np.tanh(self.kappa * x), sech**2

    def _laplacian(self):
        N = self.n_nodes
        return sparse.diags([np.ones(N - 1), -2 * np.ones(N), np.ones(N - 1)], [-1, 0, 1]) / self.dx**2

    def linear_matrix(self):
        mu, tau = self.eps - self.eps_star, self.tau_star
        top = np.array([[mu, -tau], [tau, mu]])
        bottom = (self._laplacian() - self.c * sparse.identity(self.n_nodes)).toarray()
        return np.block([[top, np.zeros((2, self.n_nodes))],
                         [np.zeros((self.n_nodes, 2)), bottom]])

    def rhs_factory(self):
        mu, tau = self.eps - self.eps_star, self.tau_star
        _, _, psi = self.modes()
        Lv = (self._laplacian() - self.c * sparse.identity(self.n_nodes)).tocsr()
        dx = self.dx

        def rhs(t, Y):
            z = Y[0] + 1j * Y[1]
            v = Y[2:]
            r2 = z.real**2 + z.imag**2
            dz = (mu + 1j * tau) * z - (1 - 1j * self.beta) * r2 * z - self.g * (v @ psi) * dx * z
            return np.concatenate([[dz.real, dz.imag], Lv @ v + r2 * psi])

        return rhs

    def field(self, Y):
        phi1, phi2, _ = self.modes()
        Y = np.asarray(Y)
        return Y[0] * phi1[:, None] + Y[1] * phi2[:, None] + Y[2:] if Y.ndim == 2 \
            else Y[0] * phi1 + Y[1] * phi2 + Y[2:]


def _oscillatory_pair(M):
    """Eigenvalue with the largest real part among those with Im > 0 and its left vector."""
    w, vl, vr = linalg.eig(M, left=True, right=True)
    cand = np.where(w.imag > 1e-12)[0]
    if len(cand) == 0:
        raise InvalidParameterError("linearization has no oscillatory pair")
    k = cand[np.argmax(w.real[cand])]
    left = vl[:, k].conj()
    return w[k], left / (left @ vr[:, k])


def periodic_probe(run_config):
    """Observe a small-amplitude periodic orbit near a Hopf crossing.

    ``run_config`` holds ``eps`` and the crossing (``eps_star``,
    ``tau_star``), optionally ``backend`` (a NormalFormBackend), ``t_max``,
    ``r0`` (initial projected amplitude), ``tol`` (return-map tolerance).
    The trajectory is projected on the oscillatory eigenpair of the
    linearization, computed numerically; returns to the section Im w = 0,
    Re w > 0 define the return map.  Returns None when the projection decays
    or no cycle is found before ``t_max``.
    """
    cfg = dict(run_config)
    crossing = cfg.pop("crossing", None)
    if crossing is not None:
        cfg.setdefault("eps_star", crossing.eps_star)
        cfg.setdefault("tau_star", crossing.tau_star)
    if "eps" not in cfg or "eps_star" not in cfg or "tau_star" not in cfg:
        raise InvalidParameterError("probe needs eps and a Hopf crossing (eps_star, tau_star)")
    backend = cfg.get("backend") or NormalFormBackend(cfg["eps"], cfg["eps_star"], cfg["tau_star"])
    t_max = float(cfg.get("t_max", 4000.0))
    r0 = float(cfg.get("r0", 1e-2))
    tol = float(cfg.get("tol", 1e-4))
    floor = float(cfg.get("decay_floor", 1e-3))

    lam, left = _oscillatory_pair(backend.linear_matrix())
    Y0 = np.zeros(backend.n_nodes + 2)
    Y0[0] = r0
    rhs = backend.rhs_factory()

    def section(t, Y):
        return float(np.imag(left @ Y))

    section.direction = 1.0   # w ~ exp(lambda t) turns counterclockwise

    def small(t, Y):
        return abs(left @ Y) - floor * r0

    small.terminal = True
    small.direction = -1.0

    radii, times = [], []
    t0, Y = 0.0, Y0
    converged = False
    while t0 < t_max and not converged:
        t1 = min(t_max, t0 + 200.0)
        sol = solve_ivp(rhs, (t0, t1), Y, method="LSODA", rtol=1e-10, atol=1e-12,
                        events=(section, small))
        for te, ye in zip(sol.t_events[0], sol.y_events[0]):
            w = left @ ye
            if w.real > 0:
                times.append(te)
                radii.append(abs(w))
        if sol.status == 1 and len(sol.t_events[1]):
            return None
        if len(radii) >= 3:
            r = np.array(radii[-3:])
            converged = bool(np.all(np.abs(np.diff(r)) < tol * r[1:]))
        t0, Y = sol.t[-1], sol.y[:, -1]
    if not converged:
        return None

    period = float(np.mean(np.diff(times[-4:])))
    # one more revolution, sampled, for the amplitude and localization
    ts = np.linspace(t0, t0 + period, 65)
    sol = solve_ivp(rhs, (t0, t0 + period), Y, method="LSODA", rtol=1e-10, atol=1e-12, t_eval=ts)
    U = backend.field(sol.y)
    x = backend.x
    etas = np.linspace(0.0, backend.decay_rate, 21)[:-1]
    loc = 0.0
    inner = np.abs(x) <= 0.8 * backend.half_length
    for eta in etas:
        wU = np.exp(eta * np.abs(x))[:, None] * np.abs(U)
        if np.isfinite(wU).all() and wU[~inner].max() <= wU[inner].max():
            loc = float(eta)
        else:
            break
    return dict(period_estimate=period, amplitude=float(radii[-1]), localization_eta=loc,
                eigenvalue=complex(lam), returns=len(radii), t_final=float(t0),
                weighted_sup=float((np.exp(0.5 * backend.decay_rate * np.abs(x))[:, None]
                                    * np.abs(U)).max()))


def roughness_sweep(ratios=(10.0, 30.0, 100.0, 300.0), alpha=1e-3, s=2, T_end=0.5, nu=0.05,
                    half_length=8.0, dx=0.005):
    """Linearization-error constants E / alpha^2 against the roughness of rho_0.

    For each ratio ||d^s rho_hat|| / ||rho_hat|| the Eulerian rho-error and the
    Lagrangian v-error of the amplitude-alpha run are divided by alpha^2.
    """
    n_nodes = int(round(2 * half_length / dx)) + 1
    x = np.linspace(-half_length, half_length, n_nodes)
    u_hat = np.exp(-x**2)
    u_hat = u_hat / sobolev_norm(u_hat, x[1] - x[0], s)
    euler = constant_background(IsentropicEulerian(gamma=1.0, nu=nu), [1.0, 0.0], x)
    lag = constant_background(IsentropicLagrangian(gamma=1.0, nu=nu, a0=1.0), [1.0, 0.0], x)
    amps = np.array([alpha])
    out = dict(ratios=list(map(float, ratios)), k=[], eulerian=[], lagrangian=[])
    for ratio in ratios:
        rho_hat, k = rough_packet(x, ratio, s)
        _, _, ce, _, _ = _error_ladder(euler, np.stack([rho_hat, u_hat]), s, T_end, amps, None)
        _, _, cl, _, _ = _error_ladder(lag, np.stack([-rho_hat, u_hat]), s, T_end, amps, None)
        out["k"].append(k)
        out["eulerian"].append(float(ce[0, 0] / alpha**2))
        out["lagrangian"].append(float(cl[0, 0] / alpha**2))
    return out

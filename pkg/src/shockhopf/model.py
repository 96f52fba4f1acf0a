"""Conservation-law systems in the moving frame and their structural checks.

All state arrays are component-first: ``U`` has shape ``(n, ...)`` and the
maps below broadcast over the trailing axes.  Matrices come back with shape
``(n, n, ...)``.

Three concrete systems are provided:

* ``IsentropicLagrangian``  U = (v, u), p(v) = a0 v^-gamma, b = nu / v
* ``IsentropicEulerian``    U = (rho, u) in quasilinear form, viscous term
  nu u_xx / rho (not in divergence form)
* ``FullNSLagrangian``      U = (v, u, E), ideal gas p = Gamma e / v, T = e / cv
"""

from dataclasses import dataclass, field, fields, replace
from typing import ClassVar

import numpy as np
from scipy.linalg import solve_continuous_lyapunov

from .errors import (
    DegenerateShockError,
    InvalidParameterError,
    NoConnectionError,
    NonAdmissibleError,
)

__all__ = [
    "SystemModel",
    "IsentropicLagrangian",
    "IsentropicEulerian",
    "FullNSLagrangian",
    "EndstatePair",
    "AssumptionReport",
    "build_isentropic_lagrangian",
    "build_isentropic_eulerian",
    "build_full_ns_lagrangian",
    "rankine_hugoniot",
    "check_structure",
    "model_from_dict",
]


def _finite(**kw):
    for k, v in kw.items():
        if not np.isfinite(v):
            raise InvalidParameterError(f"{k} must be finite, got {v!r}")


@dataclass(frozen=True)
class SystemModel:
    """Base class.  Subclasses set ``n``, ``r``, ``frame`` and the maps."""

    speed: float = 0.0
    epsilon: float = 0.0

    n: ClassVar[int] = 0
    r: ClassVar[int] = 0
    frame: ClassVar[str] = ""
    kind: ClassVar[str] = ""
    divergence_form: ClassVar[bool] = True

    # -- maps to be provided ------------------------------------------------
    def flux(self, U):
        raise NotImplementedError

    def flux_jacobian(self, U):
        raise NotImplementedError

    def viscosity(self, U):
        raise NotImplementedError

    def viscosity_derivative(self, U):
        """Tensor ``D[i, j, k] = dB_ij / dU_k``, shape ``(n, n, n, ...)``."""
        raise NotImplementedError

    def symmetrizer(self, U):
        raise NotImplementedError

    # -- derived ------------------------------------------------------------
    @property
    def params(self):
        return {k: v for k, v in self.to_dict().items() if k != "kind"}

    def with_speed(self, speed):
        return replace(self, speed=float(speed))

    def to_dict(self):
        d = {"kind": self.kind}
        for f in fields(self):
            d[f.name] = float(getattr(self, f.name))
        return d

    def admissible_state(self, U):
        """True when the state lies in the physical domain."""
        return bool(np.all(np.asarray(U)[0] > 0))

    def parabolic_block(self, U):
        return self.viscosity(U)[self.n - self.r:, self.n - self.r:]


@dataclass(frozen=True)
class IsentropicLagrangian(SystemModel):
    gamma: float = 5.0 / 3.0
    nu: float = 0.1
    a0: float = 1.0

    n: ClassVar[int] = 2
    r: ClassVar[int] = 1
    frame: ClassVar[str] = "Lagrangian"
    kind: ClassVar[str] = "isentropic_lagrangian"

    def pressure(self, v):
        return self.a0 * np.asarray(v, dtype=float) ** (-self.gamma)

    def pressure_v(self, v):
        return -self.gamma * self.a0 * np.asarray(v, dtype=float) ** (-self.gamma - 1.0)

    def sound_speed(self, v):
        return np.sqrt(-self.pressure_v(v))

    def flux(self, U):
        v, u = U[0], U[1]
        s = self.speed
        return np.stack([-s * v - u, -s * u + self.pressure(v)])

    def flux_jacobian(self, U):
        v = np.asarray(U[0])
        s = self.speed
        z, one = np.zeros_like(v, dtype=float), np.ones_like(v, dtype=float)
        return np.array([[-s * one, -one], [self.pressure_v(v), -s * one]])

    def viscosity(self, U):
        v = np.asarray(U[0], dtype=float)
        z = np.zeros_like(v)
        return np.array([[z, z], [z, self.nu / v]])

    def viscosity_derivative(self, U):
        v = np.asarray(U[0], dtype=float)
        D = np.zeros((2, 2, 2) + v.shape)
        D[1, 1, 0] = -self.nu / v**2
        return D

    def symmetrizer(self, U):
        v = np.asarray(U[0], dtype=float)
        z = np.zeros_like(v)
        return np.array([[-self.pressure_v(v), z], [z, np.ones_like(v)]])


@dataclass(frozen=True)
class IsentropicEulerian(SystemModel):
    """Quasilinear (rho, u) form with p = a0 rho^gamma.

    The default ``a0 = 1/gamma`` normalizes p'(1) = 1, so the linearization
    about (1, 0) at zero speed has characteristic speeds +-1.
    """

    gamma: float = 1.0
    nu: float = 0.05
    a0: float = -1.0  # sentinel: replaced by 1/gamma

    n: ClassVar[int] = 2
    r: ClassVar[int] = 1
    frame: ClassVar[str] = "Eulerian"
    kind: ClassVar[str] = "isentropic_eulerian"
    divergence_form: ClassVar[bool] = False

    def __post_init__(self):
        if self.a0 < 0:
            object.__setattr__(self, "a0", 1.0 / self.gamma)

    def pressure(self, rho):
        return self.a0 * np.asarray(rho, dtype=float) ** self.gamma

    def pressure_rho(self, rho):
        return self.a0 * self.gamma * np.asarray(rho, dtype=float) ** (self.gamma - 1.0)

    def enthalpy(self, rho):
        """h with h' = p'/rho."""
        rho = np.asarray(rho, dtype=float)
        if self.gamma == 1.0:
            return self.a0 * np.log(rho)
        return self.a0 * self.gamma / (self.gamma - 1.0) * rho ** (self.gamma - 1.0)

    def flux(self, U):
        rho, u = U[0], U[1]
        s = self.speed
        return np.stack([rho * u - s * rho, 0.5 * u**2 + self.enthalpy(rho) - s * u])

    def flux_jacobian(self, U):
        rho = np.asarray(U[0], dtype=float)
        u = np.asarray(U[1], dtype=float)
        s = self.speed
        return np.array([[u - s, rho], [self.pressure_rho(rho) / rho, u - s]])

    def viscosity(self, U):
        rho = np.asarray(U[0], dtype=float)
        z = np.zeros_like(rho)
        return np.array([[z, z], [z, self.nu / rho]])

    def viscosity_derivative(self, U):
        rho = np.asarray(U[0], dtype=float)
        D = np.zeros((2, 2, 2) + rho.shape)
        D[1, 1, 0] = -self.nu / rho**2
        return D

    def symmetrizer(self, U):
        rho = np.asarray(U[0], dtype=float)
        z = np.zeros_like(rho)
        return np.array([[self.pressure_rho(rho) / rho**2, z], [z, np.ones_like(rho)]])


@dataclass(frozen=True)
class FullNSLagrangian(SystemModel):
    """Ideal polytropic gas, U = (v, u, E) with E = e + u^2/2.

    A single viscosity ``nu`` is used in the momentum and energy equations.
    """

    Gamma: float = 0.4
    nu: float = 0.1
    kappa: float = 0.1
    cv: float = 1.0

    n: ClassVar[int] = 3
    r: ClassVar[int] = 2
    frame: ClassVar[str] = "Lagrangian"
    kind: ClassVar[str] = "full_ns_lagrangian"

    def internal_energy(self, U):
        return U[2] - 0.5 * U[1] ** 2

    def temperature(self, U):
        return self.internal_energy(U) / self.cv

    def pressure(self, U):
        return self.Gamma * self.internal_energy(U) / U[0]

    def admissible_state(self, U):
        U = np.asarray(U, dtype=float)
        return bool(np.all(U[0] > 0) and np.all(self.internal_energy(U) > 0))

    def flux(self, U):
        v, u, E = U[0], U[1], U[2]
        s = self.speed
        p = self.pressure(U)
        return np.stack([-s * v - u, -s * u + p, -s * E + p * u])

    def flux_jacobian(self, U):
        v, u, E = (np.asarray(c, dtype=float) for c in U)
        s = self.speed
        p = self.pressure(U)
        pv, pu, pE = -p / v, -self.Gamma * u / v, self.Gamma / v
        one = np.ones_like(v)
        z = np.zeros_like(v)
        return np.array([
            [-s * one, -one, z],
            [pv, -s + pu, pE],
            [pv * u, pu * u + p, -s + pE * u],
        ])

    def viscosity(self, U):
        v, u = np.asarray(U[0], dtype=float), np.asarray(U[1], dtype=float)
        z = np.zeros_like(v)
        c = self.nu - self.kappa / self.cv
        return np.array([
            [z, z, z],
            [z, self.nu / v, z],
            [z, c * u / v, self.kappa / (self.cv * v)],
        ])

    def viscosity_derivative(self, U):
        v, u = np.asarray(U[0], dtype=float), np.asarray(U[1], dtype=float)
        c = self.nu - self.kappa / self.cv
        D = np.zeros((3, 3, 3) + v.shape)
        D[1, 1, 0] = -self.nu / v**2
        D[2, 1, 0] = -c * u / v**2
        D[2, 1, 1] = c / v
        D[2, 2, 0] = -self.kappa / (self.cv * v**2)
        return D

    def symmetrizer(self, U):
        """Block-diagonal A0 = diag(-p_v, P) with P b + b^T P = I."""
        U = np.asarray(U, dtype=float)
        shape = U.shape[1:]
        flat = U.reshape(3, -1)
        out = np.zeros((3, 3, flat.shape[1]))
        p = self.pressure(flat)
        out[0, 0] = p / flat[0]
        B = self.viscosity(flat)
        for j in range(flat.shape[1]):
            b = B[1:, 1:, j]
            out[1:, 1:, j] = solve_continuous_lyapunov(b.T, np.eye(2))
        return out.reshape((3, 3) + shape)


# -- builders -----------------------------------------------------------------

def build_isentropic_lagrangian(gamma_gas=5.0 / 3.0, nu=0.1, speed=0.0, a0=1.0):
    _finite(gamma_gas=gamma_gas, nu=nu, speed=speed, a0=a0)
    if gamma_gas <= 1.0:
        raise InvalidParameterError("gamma_gas must exceed 1")
    if nu <= 0 or a0 <= 0:
        raise InvalidParameterError("nu and a0 must be positive")
    return IsentropicLagrangian(speed=float(speed), gamma=float(gamma_gas), nu=float(nu), a0=float(a0))


def build_isentropic_eulerian(gamma_gas=1.0, nu=0.05, speed=0.0, a0=None):
    """Isentropic Eulerian model.  ``gamma_gas = 1`` is the isothermal limit."""
    _finite(gamma_gas=gamma_gas, nu=nu, speed=speed)
    if gamma_gas < 1.0:
        raise InvalidParameterError("gamma_gas must be at least 1")
    if nu <= 0:
        raise InvalidParameterError("nu must be positive")
    a0 = 1.0 / gamma_gas if a0 is None else float(a0)
    _finite(a0=a0)
    if a0 <= 0:
        raise InvalidParameterError("a0 must be positive")
    return IsentropicEulerian(speed=float(speed), gamma=float(gamma_gas), nu=float(nu), a0=a0)


def build_full_ns_lagrangian(params=None, speed=0.0):
    params = dict(params or {})
    Gamma = float(params.pop("Gamma", 0.4))
    nu = float(params.pop("nu", params.pop("mu", 0.1)))
    kappa = float(params.pop("kappa", 0.1))
    cv = float(params.pop("cv", 1.0))
    if params:
        raise InvalidParameterError(f"unknown parameters {sorted(params)}")
    _finite(Gamma=Gamma, nu=nu, kappa=kappa, cv=cv, speed=speed)
    if nu <= 0 or kappa <= 0:
        raise InvalidParameterError("nu and kappa must be positive")
    if Gamma <= 0 or cv <= 0:
        raise InvalidParameterError("Gamma and cv must be positive")
    return FullNSLagrangian(speed=float(speed), Gamma=Gamma, nu=nu, kappa=kappa, cv=cv)


_KINDS = {
    "isentropic_lagrangian": IsentropicLagrangian,
    "isentropic_eulerian": IsentropicEulerian,
    "full_ns_lagrangian": FullNSLagrangian,
}


def model_from_dict(d):
    """Inverse of ``SystemModel.to_dict``; also accepts builder-style keys."""
    d = dict(d)
    kind = d.pop("kind")
    speed = float(d.pop("speed", 0.0))
    if kind == "isentropic_lagrangian":
        return build_isentropic_lagrangian(
            d.pop("gamma", d.pop("gamma_gas", 5.0 / 3.0)), d.pop("nu", 0.1), speed, d.pop("a0", 1.0))
    if kind == "isentropic_eulerian":
        return build_isentropic_eulerian(
            d.pop("gamma", d.pop("gamma_gas", 1.0)), d.pop("nu", 0.05), speed, d.pop("a0", None))
    if kind == "full_ns_lagrangian":
        d.pop("epsilon", None)
        return build_full_ns_lagrangian(d, speed)
    raise InvalidParameterError(f"unknown model kind {kind!r}")


# -- endstates -----------------------------------------------------------------

@dataclass(frozen=True)
class EndstatePair:
    u_minus: np.ndarray
    u_plus: np.ndarray
    speed: float
    lax_indices: tuple

    def to_dict(self):
        return {
            "u_minus": [float(x) for x in self.u_minus],
            "u_plus": [float(x) for x in self.u_plus],
            "speed": float(self.speed),
            "lax_indices": [int(k) for k in self.lax_indices],
        }

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["u_minus"], float), np.asarray(d["u_plus"], float),
                   float(d["speed"]), tuple(d["lax_indices"]))


def _lax_counts(model, um, up):
    em = np.linalg.eigvals(model.flux_jacobian(um))
    ep = np.linalg.eigvals(model.flux_jacobian(up))
    return int(np.sum(em.real < 0)), int(np.sum(ep.real > 0))


def _is_lax(model, um, up):
    # one more incoming characteristic on the right than the left
    neg_m = np.sum(np.linalg.eigvals(model.flux_jacobian(um)).real < 0)
    neg_p = np.sum(np.linalg.eigvals(model.flux_jacobian(up)).real < 0)
    return neg_p == neg_m + 1


def rankine_hugoniot(model, u_minus, v_plus, max_iter=60, tol=1e-13):
    """Right state and speed of the Lax shock leaving ``u_minus``.

    ``v_plus`` prescribes the first component of the right state.  Of the two
    roots +-s, the one satisfying the Lax entropy condition is returned.
    """
    um = np.asarray(u_minus, dtype=float)
    if um.shape != (model.n,):
        raise InvalidParameterError(f"u_minus must have {model.n} components")
    v_plus = float(v_plus)
    if not np.all(np.isfinite(um)) or not np.isfinite(v_plus):
        raise InvalidParameterError("non-finite endstate")
    if v_plus == um[0]:
        raise DegenerateShockError("zero-strength shock: v_plus equals v_minus")
    if v_plus <= 0 or um[0] <= 0:
        raise NonAdmissibleError("first component must be positive")

    if isinstance(model, IsentropicLagrangian):
        dv = v_plus - um[0]
        s2 = -(model.pressure(v_plus) - model.pressure(um[0])) / dv
        if not s2 > 0:
            raise NonAdmissibleError("s^2 <= 0")
        candidates = []
        for s in (np.sqrt(s2), -np.sqrt(s2)):
            up = np.array([v_plus, um[1] - s * dv])
            candidates.append((model.with_speed(s), up))
    else:
        candidates = [_rh_newton(model, um, v_plus, sign, max_iter, tol) for sign in (1.0, -1.0)]
        candidates = [c for c in candidates if c is not None]
        if not candidates:
            raise NoConnectionError("Newton iteration for the Hugoniot locus did not converge")

    for m, up in candidates:
        if _is_lax(m, um, up):
            return m, EndstatePair(um.copy(), up, m.speed, _lax_counts(m, um, up))
    raise NonAdmissibleError("no Lax-admissible shock between the given states")


def _rh_newton(model, um, v_plus, sign, max_iter, tol):
    """Solve f(U+) - f(U-) = s (U+ - U-) for (s, U+[1:]) by damped Newton."""
    m0 = model.with_speed(0.0)
    f_minus = m0.flux(um)
    # isentropic-like guess from a frozen-energy pressure jump
    Ug = um.copy()
    Ug[0] = v_plus
    dp = m0.flux(Ug)[1] - f_minus[1]
    s2 = -dp / (v_plus - um[0])
    if not s2 > 0:
        s2 = abs(s2) + 1.0
    s = sign * np.sqrt(s2)
    up = um.copy()
    up[0] = v_plus
    up[1] = um[1] - s * (v_plus - um[0])
    z = np.concatenate([[s], up[1:]])

    def resid(z):
        U = np.concatenate([[v_plus], z[1:]])
        return m0.flux(U) - f_minus - z[0] * (U - um)

    for _ in range(max_iter):
        R = resid(z)
        nrm = np.linalg.norm(R)
        if nrm < tol * (1 + np.linalg.norm(f_minus)):
            U = np.concatenate([[v_plus], z[1:]])
            if not model.admissible_state(U) or abs(z[0]) < 1e-14:
                return None
            return model.with_speed(z[0]), U
        U = np.concatenate([[v_plus], z[1:]])
        J = np.empty((model.n, model.n))
        J[:, 0] = -(U - um)
        J[:, 1:] = m0.flux_jacobian(U)[:, 1:] - z[0] * np.eye(model.n)[:, 1:]
        try:
            dz = np.linalg.solve(J, -R)
        except np.linalg.LinAlgError:
            return None
        t = 1.0
        while t > 1e-6:
            zt = z + t * dz
            Ut = np.concatenate([[v_plus], zt[1:]])
            if model.admissible_state(Ut) and np.linalg.norm(resid(zt)) < (1 - 0.25 * t) * nrm:
                break
            t *= 0.5
        z = z + t * dz
    return None


# -- structural hypotheses ------------------------------------------------------

@dataclass
class AssumptionReport:
    a1_ok: bool
    a2_ok: bool
    h1_ok: bool
    h2_ok: bool
    h3_ok: bool
    h3_theta: float
    details: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "a1_ok": self.a1_ok, "a2_ok": self.a2_ok, "h1_ok": self.h1_ok,
            "h2_ok": self.h2_ok, "h3_ok": self.h3_ok, "h3_theta": self.h3_theta,
            "details": self.details,
        }


def default_xi_grid(n=241):
    return np.logspace(-3, 4, n)


def h3_theta(model, U, xi_grid):
    """Largest theta with max Re sigma(i xi A - xi^2 B) <= -theta xi^2/(1+xi^2)."""
    A = model.flux_jacobian(U)
    B = model.viscosity(U)
    xi = np.asarray(xi_grid, dtype=float)
    xi = xi[xi != 0]
    mats = 1j * xi[:, None, None] * A - (xi**2)[:, None, None] * B
    re = np.linalg.eigvals(mats).real.max(axis=1)
    ratio = -re * (1 + xi**2) / xi**2
    return float(ratio.min()), re


def _f1_second_difference(model, U, rng):
    p = model.n - model.r
    V = rng.standard_normal(model.n) * 0.1
    W = rng.standard_normal(model.n) * 0.1
    F = lambda X: model.flux(X)[:p]
    r = F(U + V + W) - F(U + V) - F(U + W) + F(U)
    scale = 1 + np.abs(F(U)).max()
    return float(np.abs(r).max() / scale)


def check_structure(model, states, xi_grid=None):
    """Numerically check the block-structure and dissipativity hypotheses.

    Each state in ``states`` is tested for every flag; ``h2`` and ``h3`` are
    meant for endstates.  Failures are reported, never raised.
    """
    states = [np.asarray(U, dtype=float) for U in states]
    if not states:
        raise InvalidParameterError("states must be nonempty")
    xi_grid = default_xi_grid() if xi_grid is None else np.asarray(xi_grid, float)
    n, r = model.n, model.r
    p = n - r
    rng = np.random.default_rng(12345)
    det = {"states": [U.tolist() for U in states], "h4": "not verified"}

    # (A1)
    block_zero, b_nonsing, lin_res = True, True, []
    for U in states:
        B = model.viscosity(U)
        block_zero &= bool(np.all(B[:p, :] == 0) and np.all(B[:, :p] == 0))
        b_nonsing &= bool(np.linalg.cond(B[p:, p:]) < 1e12)
        lin_res.append(_f1_second_difference(model, U, rng))
    f1_linear = max(lin_res) < 1e-12
    a1 = block_zero and b_nonsing and f1_linear and model.divergence_form
    det["a1"] = {"block_zero": block_zero, "b_nonsingular": b_nonsing,
                 "f1_second_difference": lin_res, "divergence_form": model.divergence_form}

    # (A2)
    a2 = True
    a2d = []
    for U in states:
        A0 = model.symmetrizer(U)
        A = model.flux_jacobian(U)
        b = model.viscosity(U)[p:, p:]
        S = A0[:p, :p] @ A[:p, :p]
        asym = float(np.abs(S - S.T).max())
        block_diag = bool(np.all(A0[:p, p:] == 0) and np.all(A0[p:, :p] == 0))
        pd0 = float(np.linalg.eigvalsh(0.5 * (A0 + A0.T)).min())
        M = A0[p:, p:] @ b
        pdb = float(np.linalg.eigvalsh(0.5 * (M + M.T)).min())
        ok = asym < 1e-12 * (1 + np.abs(S).max()) and block_diag and pd0 > 0 and pdb > 0
        a2 &= ok
        a2d.append({"asymmetry": asym, "min_eig_A0": pd0, "min_eig_sym_A0b": pdb})
    det["a2"] = a2d

    # (H1)
    h1, mults, h1d = True, [], []
    for U in states:
        A11 = model.flux_jacobian(U)[:p, :p]
        w, V = np.linalg.eig(A11)
        cond = float(np.linalg.cond(V))
        real = bool(np.all(np.abs(w.imag) <= 1e-12 * (1 + np.abs(w))))
        nonzero = bool(np.all(np.abs(w) > 1e-12))
        h1 &= real and nonzero and cond < 1e8
        mults.append(len(np.unique(np.round(w.real, 10))))
        h1d.append({"eigenvalues": w.real.tolist(), "eigvec_cond": cond})
    h1 &= len(set(mults)) == 1
    det["h1"] = h1d

    # (H2)
    h2, h2d = True, []
    for U in states:
        w = np.linalg.eigvals(model.flux_jacobian(U))
        real = bool(np.all(np.abs(w.imag) <= 1e-10 * (1 + np.abs(w))))
        ws = np.sort(w.real)
        simple = bool(np.all(np.diff(ws) > 1e-10))
        nonzero = bool(np.all(np.abs(ws) > 1e-12))
        h2 &= real and simple and nonzero
        h2d.append({"eigenvalues": ws.tolist()})
    det["h2"] = h2d

    # (H3), with the xi -> infinity limit through the parabolic block
    thetas = []
    for U in states:
        th, _ = h3_theta(model, U, xi_grid)
        b = model.viscosity(U)[p:, p:]
        lim = float(np.linalg.eigvals(b).real.min())
        thetas.append(min(th, lim) if lim > 0 else min(th, 0.0))
    theta = float(min(thetas))
    h3 = theta > 0
    det["h3"] = {"theta_per_state": thetas}

    return AssumptionReport(bool(a1), bool(a2), bool(h1), bool(h2), bool(h3), theta, det)

import time

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from shockhopf.dynamics import (NormProbe, NormalFormBackend, constant_background,
                                default_shape, discrete_mass, energy_bounds, energy_functional,
                                eulerian_counterexample, evolve, fit_slope, kernel_mode_drift,
                                linearization_error_experiment, make_state, mass_drift,
                                periodic_probe, profile_background, rough_packet, sobolev_norm,
                                stable_dt, step_linearized, step_nonlinear, transport_oracle,
                                weighted_norm)
from shockhopf.dynamics import _full_rhs, _linear_remainder, _apply
from shockhopf.errors import (BlowupError, InvalidParameterError, StepRejectedError,
                              WeightedOverflowError)
from shockhopf.model import IsentropicEulerian, IsentropicLagrangian
from shockhopf.profile import decay_rate


@pytest.fixture(scope="module")
def bg(iso_profile):
    return profile_background(iso_profile, half_length=10.0, dx=0.02)


@pytest.fixture(scope="module")
def bump(bg):
    return 1e-3 * default_shape(bg.x, bg.n)


def test_zero_is_preserved(bg):
    state = make_state(bg, np.zeros_like(bg.W))
    dt = stable_dt(state)
    assert np.all(step_nonlinear(state, dt).U == 0)
    assert np.all(step_linearized(state, dt).U == 0)
    assert np.all(step_nonlinear(state, stable_dt(state, mode="explicit"), mode="explicit").U == 0)


def test_mass_drift_compact_data(bg, bump):
    state = make_state(bg, bump)
    drift, end = mass_drift(state, 1.0, stable_dt(state))
    assert drift < 1e-10
    assert end.boundary_ratio() < 1e-8


def test_mass_drift_linearized(bg, bump):
    state = make_state(bg, bump)
    drift, _ = mass_drift(state, 1.0, stable_dt(state), linear=True)
    assert drift < 1e-10


def test_superposition(bg):
    U = default_shape(bg.x, bg.n)
    V = np.roll(U[::-1], 50, axis=1)
    dt = stable_dt(make_state(bg, U))
    run = lambda W: evolve(make_state(bg, W), 0.5, dt, linear=True).U
    lhs = run(2.0 * U - 0.7 * V)
    rhs = 2.0 * run(U) - 0.7 * run(V)
    assert np.abs(lhs - rhs).max() < 1e-10 * np.abs(lhs).max()


def test_linear_remainder_is_frechet_derivative(bg):
    U = default_shape(bg.x, bg.n)
    lin = _linear_remainder(bg, U) + _apply(bg.diffusion_matrix(), U)
    errs = []
    for h in (1e-3, 5e-4):
        errs.append(np.abs(_full_rhs(bg, h * U) / h - lin).max())
    assert errs[1] < 0.55 * errs[0]


def test_implicit_matches_explicit(bg, bump):
    state = make_state(bg, bump)
    dt = stable_dt(state, mode="explicit")
    a = evolve(state, 0.2, dt, mode="explicit").U
    b = evolve(state, 0.2, dt, mode="implicit").U
    assert np.abs(a - b).max() < 1e-6 * np.abs(a).max()


def test_h1_growth_constant(iso_profile):
    big = profile_background(iso_profile, half_length=20.0, dx=0.02)
    U0 = 1e-3 * default_shape(big.x, big.n)
    n0 = sobolev_norm(U0, big.dx, 1)
    hist = []
    state = make_state(big, U0)
    evolve(state, 5.0, stable_dt(state), callback=lambda s: hist.append(sobolev_norm(s.U, s.dx, 1)))
    C = max(hist) / n0
    print(f"measured H1 growth constant on [0, 5]: {C:.3f}")
    assert C < 3


def test_kernel_mode_is_stationary(iso_profile):
    bgp = profile_background(iso_profile)
    assert kernel_mode_drift(bgp, t_end=1.0) <= 1e-4


def test_cfl_violation_rejected(bg, bump):
    state = make_state(bg, bump)
    with pytest.raises(StepRejectedError):
        step_nonlinear(state, 10 * stable_dt(state))
    with pytest.raises(StepRejectedError):
        step_nonlinear(state, stable_dt(state), mode="explicit")


def test_blowup_reports_last_state(bg):
    U = np.zeros_like(bg.W)
    U[0, 10] = np.nan
    state = make_state(bg, U)
    with pytest.raises(BlowupError) as info:
        step_linearized(state, 1e-3)
    assert info.value.last_state is state


def test_state_validation(bg):
    with pytest.raises(InvalidParameterError):
        make_state(bg, np.zeros((3, bg.N)))


# -- norms

def test_energy_zero_and_scaling(bg):
    assert energy_functional(make_state(bg, np.zeros_like(bg.W)), 2) == 0.0
    U = default_shape(bg.x, bg.n)
    e1 = energy_functional(make_state(bg, U), 2)
    e2 = energy_functional(make_state(bg, 2 * U), 2)
    assert abs(e2 - 4 * e1) < 1e-12 * e2


def test_energy_equivalence_constants(bg):
    c1, c2 = energy_bounds(bg)
    assert 0 < c1 <= c2
    rng = np.random.default_rng(7)
    for _ in range(20):
        U = rng.standard_normal(bg.W.shape) * np.exp(-bg.x**2 / 4)
        s = int(rng.integers(0, 5))
        ratio = energy_functional(make_state(bg, U), s) / sobolev_norm(U, bg.dx, s) ** 2
        assert c1 * (1 - 1e-12) <= ratio <= c2 * (1 + 1e-12)


def test_sobolev_order_checked(bg):
    with pytest.raises(InvalidParameterError):
        sobolev_norm(bg.W, bg.dx, 5)


def test_gaussian_l2_norm():
    x = np.linspace(-10, 10, 4001)
    bg = constant_background(IsentropicLagrangian(), [1.0, 0.0], x)
    U = np.stack([np.exp(-x**2), np.zeros_like(x)])
    assert abs(weighted_norm(make_state(bg, U), 0, 0.0) - (np.pi / 2) ** 0.25) < 1e-10


def test_zero_weight_is_plain_norm(bg):
    U = default_shape(bg.x, bg.n)
    for s in range(5):
        a = weighted_norm(make_state(bg, U), s, 0.0)
        assert abs(a - sobolev_norm(U, bg.dx, s)) <= 1e-10 * a


@settings(max_examples=20, deadline=None)
@given(eta=st.floats(0.01, 1.4), seed=st.integers(0, 1000))
def test_weight_monotone(bg, eta, seed):
    U = np.random.default_rng(seed).standard_normal(bg.W.shape) * np.exp(-bg.x**2)
    state = make_state(bg, U)
    assert weighted_norm(state, 1, 2 * eta) > weighted_norm(state, 1, eta)


def test_profile_derivative_weighted_norm_finite(iso_profile):
    # below the decay rate the norm converges as the domain grows; above it, it does not
    rate = decay_rate(iso_profile)
    vals = {}
    for L in (3.0, 4.0):
        bgp = profile_background(iso_profile, half_length=L, dx=0.005)
        state = make_state(bgp, bgp.profile.derivs)
        vals[L] = [weighted_norm(state, 2, f * rate) for f in (0.5, 0.75, 1.1)]
    for k in (0, 1):
        assert abs(vals[4.0][k] / vals[3.0][k] - 1) < 1e-2
    assert vals[4.0][2] / vals[3.0][2] > 1.2


def test_weight_overflow_guard(bg):
    with pytest.raises(WeightedOverflowError):
        weighted_norm(make_state(bg, bg.W), 0, 4.0)


def test_norm_probe_history(bg, bump):
    probe = NormProbe(s=1, eta=0.5)
    state = make_state(bg, bump)
    evolve(state, 0.1, stable_dt(state), callback=probe)
    assert len(probe.history) > 0 and np.all(probe.values() > 0)
    with pytest.raises(InvalidParameterError):
        NormProbe(eta=-1.0)


# -- experiments

@pytest.fixture(scope="module")
def lin_report(iso_profile):
    return linearization_error_experiment(iso_profile, dx=0.02)


def test_linearization_slope(lin_report):
    assert 1.85 <= lin_report.fitted_slope <= 2.15
    assert lin_report.r2 > 0.999
    assert not lin_report.truncated


def test_linearization_superlinear(lin_report):
    ratio = np.array(lin_report.errors) / np.array(lin_report.amplitudes)
    assert np.all(np.diff(ratio) < 0)          # amplitudes are decreasing
    assert ratio[-1] < 1e-2 * ratio[0]


def test_linear_only_has_no_error(iso_profile):
    rep = linearization_error_experiment(iso_profile, dx=0.04, T_end=0.2, quadratic=False)
    # identical flows; only the rounding of alpha * U_lin versus U_lin(alpha U0) remains
    assert np.all(np.array(rep.errors) <= 1e-12 * np.array(rep.amplitudes))


def test_experiment_preconditions(iso_profile):
    with pytest.raises(InvalidParameterError):
        linearization_error_experiment(iso_profile, amplitudes=[0.5, 0.05, 0.005, 0.0005])
    with pytest.raises(InvalidParameterError):
        linearization_error_experiment(iso_profile, amplitudes=[1e-2, 1e-3, 1e-4])
    with pytest.raises(InvalidParameterError):
        linearization_error_experiment(iso_profile, amplitudes=[1e-2, 5e-3, 1e-3, 1e-4])


def test_fit_slope_exact():
    a = np.logspace(-1, -4, 7)
    slope, r2 = fit_slope(a, 3 * a**2)
    assert abs(slope - 2) < 1e-12 and abs(r2 - 1) < 1e-12


def test_rough_packet_ratio():
    x = np.linspace(-8, 8, 1601)
    f, k = rough_packet(x, 100.0, 2)
    dx = x[1] - x[0]
    assert abs(sobolev_norm(f, dx, 2) - 1) < 1e-12
    assert k > 5


def test_transport_oracle_constant_velocity():
    x = np.linspace(-5, 5, 501)
    times = np.linspace(0, 1, 11)
    u = np.full((11, len(x)), 0.3)
    rho0 = lambda y: np.exp(-y**2)
    out = transport_oracle(x, rho0, u, times, 1.0)
    assert np.abs(out - np.exp(-(x - 0.3) ** 2)).max() < 1e-10


def test_eulerian_background_steady():
    x = np.linspace(-4, 4, 401)
    bgE = constant_background(IsentropicEulerian(gamma=1.0, nu=0.05), [1.0, 0.0], x)
    state = make_state(bgE, np.zeros_like(bgE.W))
    assert np.all(evolve(state, 0.1, stable_dt(state)).U == 0)


# -- periodic probe

def test_probe_period_and_localization():
    out = periodic_probe(dict(eps=0.55, eps_star=0.5, tau_star=1.0))
    assert out is not None
    assert abs(out["period_estimate"] / (2 * np.pi) - 1) < 1e-2
    assert out["localization_eta"] >= 0.5 * NormalFormBackend(0.55).decay_rate
    assert np.isfinite(out["weighted_sup"])


def test_probe_below_threshold_returns_none():
    assert periodic_probe(dict(eps=0.45, eps_star=0.5, tau_star=1.0)) is None


def test_probe_needs_crossing():
    with pytest.raises(InvalidParameterError):
        periodic_probe(dict(eps=0.6))


def test_probe_amplitude_scaling():
    deltas = np.array([0.0125, 0.05])
    amps = [periodic_probe(dict(eps=0.5 + d, eps_star=0.5, tau_star=1.0))["amplitude"]
            for d in deltas]
    slope = np.log(amps[1] / amps[0]) / np.log(deltas[1] / deltas[0])
    assert abs(slope - 0.5) < 0.1

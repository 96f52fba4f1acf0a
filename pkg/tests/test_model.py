import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import rh_isentropic
from shockhopf.errors import DegenerateShockError, InvalidParameterError
from shockhopf.model import (EndstatePair, build_full_ns_lagrangian, build_isentropic_eulerian,
                             build_isentropic_lagrangian, check_structure, h3_theta,
                             default_xi_grid, model_from_dict, rankine_hugoniot)


def test_rh_isentropic_matches_root_finder(iso_shock):
    model, ends = iso_shock
    s_ref, up_ref = rh_isentropic(5.0 / 3.0, 1.0, 0.0, 0.7)
    assert abs(model.speed - s_ref) < 1e-12
    assert abs(ends.u_plus[1] - up_ref) < 1e-12
    # frozen from the oracle
    assert abs(model.speed - (-1.6452446455853353)) < 1e-10
    assert abs(ends.u_plus[1] - (-0.4935733936756007)) < 1e-10


def test_rh_speed_magnitude_matches_tabulated(iso_shock):
    # tabulated magnitudes 1.6455 and 0.4937 (sign convention differs)
    model, ends = iso_shock
    assert abs(abs(model.speed) - 1.6455) < 1e-3
    assert abs(abs(ends.u_plus[1]) - 0.4937) < 1e-3


def test_lax_indices(iso_shock):
    _, ends = iso_shock
    assert ends.lax_indices == (0, 1)


def test_ns_rh_and_lax():
    model, ends = rankine_hugoniot(build_full_ns_lagrangian(), [1.0, 0.0, 1.0], 0.7)
    assert ends.lax_indices == (0, 2)
    assert abs(model.speed - (-0.93541)) < 1e-5
    F = model.flux
    assert np.abs(F(ends.u_minus) - F(ends.u_plus)).max() < 1e-12
    assert np.allclose(ends.u_plus, [0.7, -0.28062, 1.19875], atol=1e-5)


@settings(max_examples=40, deadline=None)
@given(gamma=st.floats(1.1, 3.0), v_plus=st.floats(0.3, 0.95), u_minus=st.floats(-1, 1))
def test_rh_residual_vanishes(gamma, v_plus, u_minus):
    model, ends = rankine_hugoniot(build_isentropic_lagrangian(gamma, 0.1), [1.0, u_minus], v_plus)
    r = model.flux(ends.u_minus) - model.flux(ends.u_plus)
    assert np.abs(r).max() < 1e-12


@settings(max_examples=30, deadline=None)
@given(gamma=st.floats(1.1, 3.0), v_plus=st.floats(0.3, 0.95))
def test_rh_reflection_swap(gamma, v_plus):
    # x -> -x maps (v, u) to (v, -u); the swapped problem reverses the speed
    base = build_isentropic_lagrangian(gamma, 0.1)
    model, ends = rankine_hugoniot(base, [1.0, 0.0], v_plus)
    um, up = ends.u_minus, ends.u_plus
    m2, e2 = rankine_hugoniot(base, [up[0], -up[1]], um[0])
    assert abs(m2.speed + model.speed) < 1e-10
    assert abs(e2.u_plus[1] + um[1]) < 1e-10


def test_degenerate_shock_raises():
    with pytest.raises(DegenerateShockError):
        rankine_hugoniot(build_isentropic_lagrangian(), [1.0, 0.0], 1.0)


@pytest.mark.parametrize("kw", [dict(gamma_gas=-1.0), dict(nu=0.0), dict(nu=float("nan"))])
def test_invalid_parameters(kw):
    with pytest.raises(InvalidParameterError):
        build_isentropic_lagrangian(**kw)


def _fd_jacobian(f, U, h=1e-6):
    cols = []
    for k in range(len(U)):
        e = np.zeros(len(U))
        e[k] = h
        cols.append((f(U + e) - f(U - e)) / (2 * h))
    return np.stack(cols, axis=-1)


MODELS = [
    (build_isentropic_lagrangian(1.4, 0.2, 0.3), [0.8, 0.1]),
    (build_isentropic_eulerian(1.4, 0.05, 0.2), [1.2, -0.3]),
    (build_full_ns_lagrangian({"Gamma": 0.4, "nu": 0.1, "kappa": 0.2}, 0.5), [0.9, 0.1, 1.3]),
]


@pytest.mark.parametrize("model,U", MODELS)
def test_flux_jacobian_matches_finite_differences(model, U):
    U = np.array(U)
    assert np.allclose(model.flux_jacobian(U), _fd_jacobian(model.flux, U), atol=1e-8)


@pytest.mark.parametrize("model,U", MODELS)
def test_viscosity_derivative_matches_finite_differences(model, U):
    U = np.array(U)
    assert np.allclose(model.viscosity_derivative(U), _fd_jacobian(model.viscosity, U), atol=1e-8)


@pytest.mark.parametrize("model,U", MODELS[:2])
def test_symmetrizer_symmetrizes_flux_jacobian(model, U):
    U = np.array(U)
    A0, A = model.symmetrizer(U), model.flux_jacobian(U)
    assert np.allclose(A0, A0.T)
    assert np.all(np.linalg.eigvalsh(A0) > 0)
    assert np.allclose(A0 @ A, (A0 @ A).T, atol=1e-12)


def test_ns_symmetrizer_lyapunov_block():
    model, U = MODELS[2]
    A0 = model.symmetrizer(np.array(U))
    b = model.viscosity(np.array(U))[1:, 1:]
    P = A0[1:, 1:]
    assert np.allclose(P @ b + b.T @ P, np.eye(2), atol=1e-12)


def test_structure_report_isentropic(iso_shock):
    model, ends = iso_shock
    rep = check_structure(model, [ends.u_minus, ends.u_plus])
    assert rep.a1_ok and rep.a2_ok and rep.h1_ok and rep.h2_ok and rep.h3_ok
    assert abs(rep.h3_theta - 0.05) < 1e-6
    assert rep.details["h4"] == "not verified"


def test_structure_report_ns():
    model, ends = rankine_hugoniot(build_full_ns_lagrangian(), [1.0, 0.0, 1.0], 0.7)
    rep = check_structure(model, [ends.u_minus, ends.u_plus])
    assert rep.a1_ok and rep.a2_ok and rep.h1_ok and rep.h2_ok and rep.h3_ok
    assert abs(rep.h3_theta - 0.0643) < 5e-4


def test_eulerian_form_fails_block_structure():
    rep = check_structure(build_isentropic_eulerian(), [[1.0, 0.0]])
    assert not rep.a1_ok


@settings(max_examples=25, deadline=None)
@given(v=st.floats(0.3, 3.0), u=st.floats(-2, 2))
def test_h3_theta_positive_on_physical_states(v, u):
    model = build_isentropic_lagrangian(5.0 / 3.0, 0.1, -1.2)
    theta, _ = h3_theta(model, np.array([v, u]), default_xi_grid())
    assert theta > 0


@pytest.mark.parametrize("model,_", MODELS)
def test_model_dict_roundtrip(model, _):
    assert model_from_dict(model.to_dict()) == model


def test_endstate_pair_roundtrip(iso_shock):
    _, ends = iso_shock
    back = EndstatePair.from_dict(ends.to_dict())
    assert np.array_equal(back.u_plus, ends.u_plus) and back.lax_indices == ends.lax_indices

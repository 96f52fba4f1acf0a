"""Acceptance criteria, each printing one PASS/FAIL line (run with -s to see them)."""

import time

import numpy as np
import pytest

from shockhopf.cli import main
from shockhopf.dynamics import (NormalFormBackend, default_shape, eulerian_counterexample,
                                linearization_error_experiment, make_state, mass_drift,
                                periodic_probe, profile_background, stable_dt)
from shockhopf.evans import (circle_contour, evans_eval, evans_values, hopf_scan, root_product,
                             stability_check, synthetic_hopf_family, winding_count)
from shockhopf.kernelsum import (KernelConfig, direct_partial_sum, fit_decay, kernel_l2_norms,
                                 resolvent_sum)
from shockhopf.model import build_isentropic_lagrangian, rankine_hugoniot
from shockhopf.profile import decay_fit, predicted_decay_rate, solve_profile


def verdict(n, name, ok, detail):
    print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {n} ({name}): {detail}")
    assert ok, detail


def _shock():
    return rankine_hugoniot(build_isentropic_lagrangian(5.0 / 3.0, 0.1), [1.0, 0.0], 0.7)


def test_criterion_01_profile_fidelity():
    t0 = time.perf_counter()
    model, ends = _shock()
    prof = solve_profile(model, ends)
    elapsed = time.perf_counter() - t0
    fit = decay_fit(prof)
    pred = predicted_decay_rate(model, ends)
    monotone = bool(np.all(np.diff(prof.values[0]) < 0))
    ok = (prof.residual_max < 1e-8 and monotone and abs(fit.eta / pred - 1) < 0.2
          and min(fit.r2_left, fit.r2_right) >= 0.99 and elapsed < 1.0)
    verdict(1, "profile fidelity", ok,
            f"residual {prof.residual_max:.2e}, monotone {monotone}, eta {fit.eta:.5f} vs "
            f"{pred:.5f}, R2 {min(fit.r2_left, fit.r2_right):.6f}, {elapsed:.2f} s")


def test_criterion_02_translation_zero(iso_profile):
    t0 = time.perf_counter()
    D0 = abs(evans_eval(iso_profile, 0.0).value)
    ring = circle_contour(0, 1, 64)
    scale = np.abs(evans_values(iso_profile, ring[ring.real >= 0])).max()
    w = winding_count(iso_profile, circle_contour(0, 1e-2, 64)).winding
    elapsed = time.perf_counter() - t0
    ok = D0 / scale < 1e-6 and w == 1 and elapsed < 10
    verdict(2, "translation zero", ok,
            f"|D(0)|/scale {D0 / scale:.2e}, origin winding {w}, {elapsed:.1f} s")


def test_criterion_03_stability_verdict(iso_profile_2000):
    t0 = time.perf_counter()
    vs = [stability_check(iso_profile_2000, radius=r) for r in (9.0, 10.0, 11.0)]
    elapsed = time.perf_counter() - t0
    ok = all(v.verdict == "stable" and v.rhp_winding == 0 for v in vs) and elapsed < 30
    verdict(3, "stability verdict", ok,
            f"verdicts {[v.verdict for v in vs]}, windings {[v.rhp_winding for v in vs]}, "
            f"{elapsed:.1f} s")


def test_criterion_04_evans_properties(iso_profile):
    rng = np.random.default_rng(2024)
    lam = rng.uniform(0.05, 5, 50) + 1j * rng.uniform(-5, 5, 50)
    a = evans_values(iso_profile, lam)
    b = evans_values(iso_profile, np.conj(lam))
    sym = float(np.max(np.abs(b - np.conj(a)) / np.abs(a)))
    w1 = winding_count(lambda z: z - 1, circle_contour(0, 2, 8)).winding
    w2 = winding_count(root_product([0.5, 0.5]), circle_contour(0, 2, 8)).winding
    ok = sym < 1e-8 and w1 == 1 and w2 == 2
    verdict(4, "Evans properties", ok, f"conjugate symmetry {sym:.1e}, mock windings {w1}, {w2}")


def test_criterion_05_hopf_detector():
    t0 = time.perf_counter()
    h = hopf_scan(synthetic_hopf_family(0.5, 1.0), np.linspace(0, 1, 11))
    elapsed = time.perf_counter() - t0
    ok = (h is not None and abs(h.eps_star - 0.5) < 1e-4 and abs(h.tau_star - 1) < 1e-6
          and h.gamma_slope_positive and elapsed < 5)
    verdict(5, "Hopf detector", ok,
            f"eps* {h.eps_star:.12f}, tau* {h.tau_star:.12f}, "
            f"slope positive {h.gamma_slope_positive}, {elapsed:.3f} s")


def test_criterion_06_kernel_cancellation():
    t0 = time.perf_counter()
    far = KernelConfig(x_grid=tuple(np.linspace(1, 8, 71)))
    fit = fit_decay(np.array(far.x_grid), resolvent_sum(far))
    near = KernelConfig(x_grid=tuple(np.linspace(-5, 5, 101)))
    S = resolvent_sum(near)
    direct = direct_partial_sum(near, J_ladder=[1000])[-1]
    rel = float(np.abs(S - direct).max() / np.abs(S).max())
    js = np.arange(10, 101)
    scaled = kernel_l2_norms(near, js) * (js * near.T) ** 0.25
    spread = float(scaled.max() / scaled.min() - 1)
    elapsed = time.perf_counter() - t0
    ok = fit.eta0 > 0 and fit.r2 > 0.98 and rel < 0.05 and spread < 0.01 and elapsed < 20
    verdict(6, "kernel cancellation", ok,
            f"eta0 {fit.eta0:.4f}, R2 {fit.r2:.5f}, direct vs resolvent {rel:.1e}, "
            f"L2 spread {spread:.1e}, {elapsed:.2f} s")


def test_criterion_07_quadratic_linearization(iso_profile):
    t0 = time.perf_counter()
    coarse = linearization_error_experiment(iso_profile, dx=0.02)
    fine = linearization_error_experiment(iso_profile, dx=0.01)
    elapsed = time.perf_counter() - t0
    shift = abs(fine.fitted_slope - coarse.fitted_slope)
    ok = (1.85 <= fine.fitted_slope <= 2.15 and 1.85 <= coarse.fitted_slope <= 2.15
          and shift < 0.05 and elapsed < 120)
    verdict(7, "quadratic linearization bound", ok,
            f"slope {coarse.fitted_slope:.5f} (dx 0.02), {fine.fitted_slope:.5f} (dx 0.01), "
            f"shift {shift:.1e}, {elapsed:.1f} s")


def test_criterion_08_eulerian_dichotomy():
    t0 = time.perf_counter()
    rep = eulerian_counterexample()
    elapsed = time.perf_counter() - t0
    rho, lag = rep.fitted_slope, rep.extra["lagrangian_slope"]
    tr = rep.extra["transport_ratio"]
    ok = rho < 1.3 and lag - rho >= 0.5 and tr >= 0.5 and elapsed < 120
    verdict(8, "Eulerian dichotomy", ok,
            f"rho-slope {rho:.4f}, Lagrangian slope {lag:.4f}, gap {lag - rho:.4f}, "
            f"transport ratio {tr:.4f}, {elapsed:.1f} s")


def test_criterion_09_periodic_probe():
    t0 = time.perf_counter()
    deltas = np.array([0.0125, 0.025, 0.05, 0.1])
    runs = [periodic_probe(dict(eps=0.5 + d, eps_star=0.5, tau_star=1.0)) for d in deltas]
    below = periodic_probe(dict(eps=0.45, eps_star=0.5, tau_star=1.0))
    elapsed = time.perf_counter() - t0
    found = all(r is not None for r in runs)
    period_err = max(abs(r["period_estimate"] / (2 * np.pi) - 1) for r in runs) if found else 1
    slope = np.polyfit(np.log(deltas), np.log([r["amplitude"] for r in runs]), 1)[0] \
        if found else float("nan")
    half_rate = 0.5 * NormalFormBackend(0.6).decay_rate
    localized = found and all(r["localization_eta"] >= half_rate for r in runs)
    ok = (found and period_err < 0.01 and abs(slope - 0.5) <= 0.1 and below is None
          and localized and elapsed < 60)
    verdict(9, "periodic probe", ok,
            f"period error {period_err:.2e}, amplitude slope {slope:.4f}, below threshold "
            f"{'none' if below is None else 'cycle'}, localized {localized}, {elapsed:.1f} s")


def test_criterion_10_conservation_and_determinism(iso_profile, tmp_path):
    bg = profile_background(iso_profile, half_length=10.0, dx=0.02)
    state = make_state(bg, 1e-3 * default_shape(bg.x, bg.n))
    drift, _ = mass_drift(state, 1.0, stable_dt(state))
    same = True
    for cmd, csv in (("profile", "profile.csv"), ("kernelsum", "kernelsum.csv")):
        main([cmd, "--out", str(tmp_path / f"{cmd}1"), "--seed", "1"])
        main([cmd, "--out", str(tmp_path / f"{cmd}2"), "--seed", "1"])
        same &= (tmp_path / f"{cmd}1" / csv).read_bytes() == (tmp_path / f"{cmd}2" / csv).read_bytes()
    ok = drift < 1e-10 and same
    verdict(10, "conservation and determinism", ok,
            f"mass drift {drift:.1e} per unit time, byte-identical CSVs {same}")

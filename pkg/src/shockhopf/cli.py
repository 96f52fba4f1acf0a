"""Command-line front end.

Every subcommand reads a flat TOML config (``--config``), merges it over the
command's defaults, writes its reports into ``--out`` and records a
``run_manifest.json`` with the resolved config and its SHA-256 digest.

Exit codes: 0 ok, 1 config, 2 no connection / degenerate shock, 3 contour,
4 integration blowup, 5 time budget exceeded.
"""

import argparse
import hashlib
import json
import os
import sys
import time

from . import errors

try:  # Python >= 3.11
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - exercised on 3.10
    import tomli as tomllib

EXIT_OK, EXIT_CONFIG, EXIT_CONNECTION, EXIT_CONTOUR, EXIT_BLOWUP, EXIT_BUDGET = range(6)

_MODEL_KEYS = dict(model="isentropic_lagrangian", gamma=5.0 / 3.0, nu=0.1, a0=1.0,
                   Gamma=0.4, kappa=0.1, cv=1.0,
                   v_minus=1.0, u_minus=0.0, E_minus=1.0, v_plus=0.7)

DEFAULTS = {
    "profile": dict(_MODEL_KEYS, n_nodes=2001, half_length=0.0),
    "evans": dict(_MODEL_KEYS, n_nodes=2000, half_length=0.0, ell=1, radius=10.0,
                  origin_radius=1e-2, re_shift=1e-3, mock_roots=[]),
    "hopf": dict(family="synthetic", eps_star=0.5, tau_star=1.0, eps_min=0.0, eps_max=1.0,
                 n_eps=11, gamma=5.0 / 3.0, nu=0.1, v_minus=1.0, u_minus=0.0,
                 v_plus_start=0.9, v_plus_end=0.4, n_nodes=1001, radius=10.0, re_shift=1e-3),
    "kernelsum": dict(a=1.0, T=1.0, x_min=-8.0, x_max=8.0, n_x=321, y_ref=0.0,
                      J_max=1000, r_factor=0.1, panels=40, nodes=16),
    "energy": dict(_MODEL_KEYS, s=2, T_end=1.0, amp_max=0.1, amp_min=1e-4, n_amp=7,
                   dx=0.01, half_length=10.0, shape="default"),
    "eulerian": dict(s=2, T_end=0.5, nu=0.05, amp_max=0.1, amp_min=1e-4, n_amp=7,
                     dx=0.01, half_length=8.0, ratio=100.0),
    "probe": dict(eps=[0.5125, 0.525, 0.55, 0.6], eps_star=0.5, tau_star=1.0, kappa=1.0,
                  c=4.0, beta=0.05, g=0.5, probe_half_length=12.0, probe_nodes=241,
                  t_max=4000.0, r0=1e-2, tol=1e-4),
    "check": dict(_MODEL_KEYS),
}
_COMMON = dict(budget_seconds=0.0)


# -- config and output plumbing -------------------------------------------------

def load_config(command, path):
    """Defaults for ``command`` overlaid by the TOML file at ``path`` (if any)."""
    cfg = dict(DEFAULTS[command], **_COMMON)
    if path is None:
        return cfg
    try:
        with open(path, "rb") as fh:
            user = tomllib.load(fh)
    except FileNotFoundError:
        raise errors.ConfigError(f"config file not found: {path}")
    except tomllib.TOMLDecodeError as exc:
        raise errors.ConfigError(f"cannot parse {path}: {exc}")
    unknown = sorted(set(user) - set(cfg))
    if unknown:
        raise errors.ConfigError(f"unknown keys for '{command}': {', '.join(unknown)}")
    for k, v in user.items():
        want = type(cfg[k])
        if want is float and isinstance(v, int) and not isinstance(v, bool):
            v = float(v)
        if not isinstance(v, want) or (want is int and isinstance(v, bool)):
            raise errors.ConfigError(f"key '{k}' expects {want.__name__}, got {type(v).__name__}")
        cfg[k] = v
    return cfg


def config_hash(cfg):
    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()


def _fmt(v):
    return f"{float(v):.16e}"


class _Outputs:
    def __init__(self, out_dir):
        self.dir = out_dir
        self.paths = []
        os.makedirs(out_dir, exist_ok=True)

    def path(self, name):
        p = os.path.join(self.dir, name)
        self.paths.append(p)
        return p

    def csv(self, name, header, rows):
        with open(self.path(name), "w") as fh:
            fh.write(",".join(header) + "\n")
            for row in rows:
                fh.write(",".join(v if isinstance(v, str) else _fmt(v) for v in row) + "\n")

    def json(self, name, obj):
        with open(self.path(name), "w") as fh:
            json.dump(obj, fh, indent=2, sort_keys=True, default=_jsonable)
            fh.write("\n")


def _jsonable(o):
    if isinstance(o, complex):
        return [o.real, o.imag]
    if hasattr(o, "tolist"):
        return o.tolist()
    if hasattr(o, "to_dict"):
        return o.to_dict()
    raise TypeError(f"not serializable: {type(o).__name__}")


# -- model helpers ----------------------------------------------------------------

def _model_and_ends(cfg):
    from .model import build_full_ns_lagrangian, build_isentropic_lagrangian, rankine_hugoniot

    kind = cfg["model"]
    if kind == "isentropic_lagrangian":
        base = build_isentropic_lagrangian(cfg["gamma"], cfg["nu"], 0.0, cfg["a0"])
        um = [cfg["v_minus"], cfg["u_minus"]]
    elif kind == "full_ns_lagrangian":
        base = build_full_ns_lagrangian(dict(Gamma=cfg["Gamma"], nu=cfg["nu"],
                                             kappa=cfg["kappa"], cv=cfg["cv"]))
        um = [cfg["v_minus"], cfg["u_minus"], cfg["E_minus"]]
    else:
        raise errors.ConfigError(f"unknown model '{kind}'")
    if cfg["v_plus"] == cfg["v_minus"]:
        raise errors.DegenerateShockError("zero-strength shock")
    return rankine_hugoniot(base, um, cfg["v_plus"])


def _profile(cfg):
    from .profile import solve_profile

    model, ends = _model_and_ends(cfg)
    L = cfg["half_length"] if cfg["half_length"] > 0 else None
    return solve_profile(model, ends, half_length=L, n_nodes=cfg["n_nodes"])


def _amplitudes(cfg):
    import numpy as np

    if cfg["n_amp"] < 4:
        raise errors.ConfigError("n_amp must be at least 4")
    return np.logspace(np.log10(cfg["amp_max"]), np.log10(cfg["amp_min"]), cfg["n_amp"])


# -- subcommands ------------------------------------------------------------------

def cmd_profile(cfg, out, seed):
    from .profile import decay_fit, predicted_decay_rate, write_profile_csv

    prof = _profile(cfg)
    write_profile_csv(prof, out.path("profile.csv"))
    fit = decay_fit(prof)
    out.json("summary.json", dict(speed=prof.model.speed, eta=prof.eta,
                                  eta_predicted=predicted_decay_rate(prof.model, prof.endstates),
                                  r2_left=fit.r2_left, r2_right=fit.r2_right,
                                  residual=prof.residual_max,
                                  endstates=prof.endstates.to_dict()))


def _root(r):
    """A mock root given as a number or as a [re, im] pair."""
    if isinstance(r, (int, float)):
        return complex(r)
    if isinstance(r, list) and len(r) == 2 and all(isinstance(v, (int, float)) for v in r):
        return complex(r[0], r[1])
    raise errors.ConfigError(f"mock root {r!r} is neither a number nor a [re, im] pair")


def cmd_evans(cfg, out, seed):
    from .evans import d_contour, root_product, stability_check, winding_count, write_contour_csv

    if cfg["mock_roots"]:
        target = root_product([_root(r) for r in cfg["mock_roots"]])
    else:
        target = _profile(cfg)
    verdict = stability_check(target, ell=cfg["ell"], radius=cfg["radius"],
                              origin_radius=cfg["origin_radius"], re_shift=cfg["re_shift"])
    res = winding_count(target, d_contour(cfg["radius"], cfg["re_shift"]))
    write_contour_csv(res, out.path("contour.csv"))
    out.json("verdict.json", verdict.to_dict())


def cmd_hopf(cfg, out, seed):
    import numpy as np
    from .evans import hopf_scan, isentropic_strength_family, synthetic_hopf_family

    if cfg["family"] == "synthetic":
        fam = synthetic_hopf_family(cfg["eps_star"], cfg["tau_star"])
    elif cfg["family"] == "isentropic":
        fam = isentropic_strength_family(cfg["gamma"], cfg["nu"], cfg["v_minus"], cfg["u_minus"],
                                         (cfg["v_plus_start"], cfg["v_plus_end"]), cfg["n_nodes"])
    else:
        raise errors.ConfigError(f"unknown family '{cfg['family']}'")
    eps = np.linspace(cfg["eps_min"], cfg["eps_max"], cfg["n_eps"])
    seen = []
    crossing = hopf_scan(fam, eps, radius=cfg["radius"], re_shift=cfg["re_shift"],
                         callback=lambda e, w: seen.append((e, w)))
    out.csv("windings.csv", ["eps", "winding"], seen)
    out.json("hopf.json", dict(crossing=crossing.to_dict() if crossing else None))


def cmd_kernelsum(cfg, out, seed):
    import numpy as np
    from .kernelsum import (KernelConfig, direct_partial_sum, fit_decay, kernel_l2_norms,
                            resolvent_sum)

    x = np.linspace(cfg["x_min"], cfg["x_max"], cfg["n_x"])
    kc = KernelConfig(a=cfg["a"], T=cfg["T"], x_grid=tuple(x), y_ref=cfg["y_ref"],
                      r=cfg["r_factor"] * cfg["a"] ** 2 / 4, J_max=cfg["J_max"],
                      J_ladder=(cfg["J_max"],), panels=cfg["panels"], nodes=cfg["nodes"])
    S = resolvent_sum(kc)
    direct = direct_partial_sum(kc)[-1]
    d = x - cfg["y_ref"]
    fit = fit_decay(d, S)
    near = np.abs(d) <= 5
    scale = np.abs(S[near]).max()
    js = np.arange(10, 101)
    norms = kernel_l2_norms(kc, js) * (js * cfg["T"]) ** 0.25
    out.csv("kernelsum.csv", ["x", "resolvent", "direct"], zip(x, S, direct))
    out.json("summary.json", dict(eta0=fit.eta0, r2=fit.r2,
                                  direct_vs_resolvent=float(np.abs(S - direct)[near].max() / scale),
                                  l2_scaled_spread=float(norms.max() / norms.min() - 1)))


def _random_shape(x, n, seed):
    import numpy as np

    rng = np.random.default_rng(seed)
    out = np.zeros((n, len(x)))
    for i in range(n):
        for _ in range(3):
            c, w, a = rng.uniform(-1, 1), rng.uniform(0.3, 0.8), rng.normal()
            out[i] += a * np.exp(-((x - c) / w) ** 2)
    return out


def cmd_energy(cfg, out, seed):
    from .dynamics import linearization_error_experiment, profile_background

    prof = _profile(dict(cfg, n_nodes=2001, half_length=0.0))
    shape = None
    if cfg["shape"] == "random":
        bg = profile_background(prof, cfg["half_length"], cfg["dx"])
        shape = _random_shape(bg.x, bg.n, seed)
    elif cfg["shape"] != "default":
        raise errors.ConfigError("shape must be 'default' or 'random'")
    rep = linearization_error_experiment(prof, s=cfg["s"], T_end=cfg["T_end"],
                                         amplitudes=_amplitudes(cfg), shape=shape,
                                         half_length=cfg["half_length"], dx=cfg["dx"])
    out.csv("energy.csv", ["amplitude", "error"], zip(rep.amplitudes, rep.errors))
    rep.runtime = 0.0  # timing lives in the manifest
    out.json("report.json", rep.to_dict())


def cmd_eulerian(cfg, out, seed):
    from .dynamics import eulerian_counterexample

    rep = eulerian_counterexample(s=cfg["s"], T_end=cfg["T_end"], amplitudes=_amplitudes(cfg),
                                  nu=cfg["nu"], half_length=cfg["half_length"], dx=cfg["dx"],
                                  ratio=cfg["ratio"])
    out.csv("eulerian.csv", ["amplitude", "rho_error", "u_error", "lagrangian_error"],
            zip(rep.amplitudes, rep.extra["rho_errors"], rep.extra["u_errors"],
                rep.extra["lagrangian_errors"]))
    rep.runtime = 0.0
    out.json("report.json", rep.to_dict())


def cmd_probe(cfg, out, seed):
    import numpy as np
    from .dynamics import NormalFormBackend, periodic_probe

    rows, results = [], []
    for eps in cfg["eps"]:
        be = NormalFormBackend(float(eps), cfg["eps_star"], cfg["tau_star"], cfg["kappa"],
                               cfg["c"], cfg["beta"], cfg["g"], cfg["probe_half_length"],
                               cfg["probe_nodes"])
        r = periodic_probe(dict(eps=float(eps), eps_star=cfg["eps_star"],
                                tau_star=cfg["tau_star"], backend=be, t_max=cfg["t_max"],
                                r0=cfg["r0"], tol=cfg["tol"]))
        results.append(dict(eps=float(eps), result=r))
        if r is None:
            rows.append((eps, "nan", "nan", "nan"))
        else:
            rows.append((eps, r["period_estimate"], r["amplitude"], r["localization_eta"]))
    out.csv("probe.csv", ["eps", "period", "amplitude", "localization_eta"], rows)
    found = [(d["eps"] - cfg["eps_star"], d["result"]["amplitude"]) for d in results
             if d["result"] is not None and d["eps"] > cfg["eps_star"]]
    slope = None
    if len(found) >= 2:
        dd, aa = np.array(found).T
        slope = float(np.polyfit(np.log(dd), np.log(aa), 1)[0])
    out.json("report.json", dict(runs=results, amplitude_slope=slope,
                                 target_period=2 * np.pi / cfg["tau_star"]))


def cmd_check(cfg, out, seed):
    from .model import check_structure

    model, ends = _model_and_ends(cfg)
    rep = check_structure(model, [ends.u_minus, ends.u_plus])
    out.json("structure.json", dict(report=rep.to_dict(), speed=model.speed,
                                    endstates=ends.to_dict()))


COMMANDS = {
    "profile": cmd_profile, "evans": cmd_evans, "hopf": cmd_hopf, "kernelsum": cmd_kernelsum,
    "energy": cmd_energy, "eulerian": cmd_eulerian, "probe": cmd_probe, "check": cmd_check,
}


def _exit_code(exc):
    if isinstance(exc, (errors.ConfigError, errors.InvalidParameterError)):
        return EXIT_CONFIG
    if isinstance(exc, errors.ConnectionFailure):
        return EXIT_CONNECTION
    if isinstance(exc, errors.ContourError):
        return EXIT_CONTOUR
    if isinstance(exc, errors.IntegrationFailure):
        return EXIT_BLOWUP
    if isinstance(exc, errors.BudgetExceededError):
        return EXIT_BUDGET
    return None


def build_parser():
    p = argparse.ArgumentParser(prog="shockhopf", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", default=None, help="TOML config file")
        sp.add_argument("--out", default="shockhopf_out", help="output directory")
        sp.add_argument("--threads", type=int, default=1, help="maximum worker threads")
        sp.add_argument("--seed", type=int, default=0, help="seed for randomized data")
    return p


def _limit_threads(n):
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[var] = str(n)


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        print("error: --threads must be positive", file=sys.stderr)
        return EXIT_CONFIG
    _limit_threads(args.threads)
    t0 = time.perf_counter()
    try:
        cfg = load_config(args.command, args.config)
    except errors.ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = _Outputs(args.out)
    code = EXIT_OK
    message = None
    try:
        COMMANDS[args.command](cfg, out, args.seed)
        if cfg["budget_seconds"] > 0 and time.perf_counter() - t0 > cfg["budget_seconds"]:
            raise errors.BudgetExceededError(
                f"run took {time.perf_counter() - t0:.1f} s > budget {cfg['budget_seconds']} s")
    except errors.ShockHopfError as exc:
        code = _exit_code(exc)
        if code is None:
            raise
        message = str(exc)
        print(f"error: {exc}", file=sys.stderr)
    manifest = dict(command=args.command, config_hash=config_hash(cfg), seed=args.seed,
                    threads=args.threads, config=cfg, outputs=sorted(out.paths),
                    wall_time=time.perf_counter() - t0, exit_code=code, message=message)
    with open(os.path.join(args.out, "run_manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

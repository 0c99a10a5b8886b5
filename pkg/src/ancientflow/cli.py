"""Command-line entry point.

Sub-commands::

    ancientflow verify-tensor   randomized sweep of the pointwise inequalities
    ancientflow scan-functions  sign checks and tables for G, phi, psi, theta
    ancientflow simulate        run a fixture and write trajectory and monitors
    ancientflow oracle          exact umbilical families against numerical ODE
    ancientflow functionals     integral monitors along a rotational flow

Settings come from an optional ``--config`` file (YAML or JSON, one flat
mapping, unknown keys rejected) overridden by flags.  Reports are JSON with
sorted keys and contain no timestamps, so a fixed seed gives byte-identical
output.  Exit status: 0 all checks passed, 1 a verification failed,
2 configuration or usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from fractions import Fraction
from pathlib import Path
from typing import Any, Mapping

import numpy as np
import yaml

from . import __version__
from .errors import ConfigError, DomainError, ImmersionError, InsufficientDataError
from .exact import UmbilicalSolution, pinching_witness
from .flow import (
    FIXTURES,
    UMBILICAL_STEP,
    FlowState,
    SimulationConfig,
    Trajectory,
    run,
    step,
    verify_gradient_estimates,
)
from .functionals import (
    IntegralConstants,
    decay_monitor_2d,
    gauss_bonnet_combination_residual,
    gauss_bonnet_residual,
    sobolev_minimal_B,
    u_moment_monitor,
    write_csv_report,
)
from .pinching import (
    RATIO_KINDS,
    GParams,
    PhiParams,
    G_sup_y,
    certify_G_negative,
    phi,
    phi_combination_bound,
    phi_double_prime,
    phi_log_derivative_identity,
    phi_prime,
    psi,
    psi_argmax,
    psi_sup,
    theta,
    theta_prime,
    thresholds,
)
from .sweeps import tensor_sweep
from .tensor_core import xi_constants

log = logging.getLogger("ancientflow")

REPORT_SCHEMA = "ancientflow.report"
REPORT_VERSION = 1

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2

COMMANDS = ("verify-tensor", "scan-functions", "simulate", "oracle", "functionals")

_SIM_KEYS = {
    "fixture", "n", "c", "params", "grid", "order", "t0", "t1", "dt", "kappa",
    "record_every", "monitors", "a", "b", "eps", "extinction_factor", "max_steps",
}
# keys accepted by each command besides "command", "seed", "out" and "tolerance"
KEYS: dict[str, set[str]] = {
    "verify-tensor": {"n", "p", "samples"},
    "scan-functions": {"samples", "n", "eps"},
    "simulate": set(_SIM_KEYS),
    "oracle": {"n", "c", "times", "C", "eps"},
    "functionals": _SIM_KEYS | {"sobolev_constant", "q"},
}
COMMON_KEYS = {"command", "seed", "out", "tolerance"}
RANDOMIZED = {"verify-tensor", "scan-functions"}

DEFAULT_TOLERANCE = {
    "verify-tensor": 1e-12,
    "scan-functions": 1e-12,
    "simulate": 1e-8,
    "oracle": 1e-8,
    "functionals": 1e-6,
}


# ---------------------------------------------------------------------------
# configuration


def load_config_file(path: str | Path) -> dict:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a single mapping")
    return {str(k).replace("-", "_"): v for k, v in data.items()}


def int_list(value, name: str) -> list[int]:
    """Accept ``3``, ``[2, 3]``, ``"2,3,5"`` or the inclusive range ``"2..6"``."""
    if isinstance(value, bool):
        raise ConfigError(f"{name}: expected integers")
    if isinstance(value, int):
        return [value]
    if isinstance(value, (list, tuple)):
        out = []
        for v in value:
            out.extend(int_list(v, name))
        return out
    if isinstance(value, str):
        try:
            if ".." in value:
                lo, hi = value.split("..")
                return list(range(int(lo), int(hi) + 1))
            return [int(v) for v in value.split(",") if v.strip()]
        except ValueError as exc:
            raise ConfigError(f"{name}: cannot parse {value!r}") from exc
    raise ConfigError(f"{name}: expected integers, got {value!r}")


def float_list(value, name: str) -> list[float]:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return [float(value)]
    if isinstance(value, str):
        value = value.split(",")
    if isinstance(value, (list, tuple)):
        try:
            return [float(v) for v in value]
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{name}: cannot parse {value!r}") from exc
    raise ConfigError(f"{name}: expected numbers, got {value!r}")


def parse_params(items) -> dict[str, float]:
    if items is None:
        return {}
    if isinstance(items, Mapping):
        try:
            return {str(k): float(v) for k, v in items.items()}
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"params: {exc}") from exc
    out = {}
    for item in items:
        key, sep, val = str(item).partition("=")
        if not sep:
            raise ConfigError(f"--param expects key=value, got {item!r}")
        try:
            out[key.strip()] = float(val)
        except ValueError as exc:
            raise ConfigError(f"--param {key}: {exc}") from exc
    return out


def resolve_settings(command: str, args: argparse.Namespace) -> dict:
    """Merge the config file with explicit flags and validate the key set."""
    settings: dict[str, Any] = {}
    if args.config:
        settings.update(load_config_file(args.config))
    if "command" in settings and settings["command"] != command:
        raise ConfigError(f"config is for {settings['command']!r}, not {command!r}")
    settings.pop("command", None)
    for key, value in vars(args).items():
        if key in ("config", "command", "handler", "verbose") or value is None:
            continue
        if key == "param":
            settings["params"] = {**parse_params(settings.get("params")), **parse_params(value)}
            continue
        if key == "monitor":
            key = "monitors"
        settings[key] = value
    allowed = KEYS[command] | COMMON_KEYS | {"fault_scale"}
    unknown = sorted(set(settings) - allowed)
    if unknown:
        raise ConfigError(f"unknown keys for {command}: {unknown}")
    if command in RANDOMIZED and settings.get("seed") is None:
        raise ConfigError(f"{command} is randomized: --seed is mandatory")
    settings.setdefault("tolerance", DEFAULT_TOLERANCE[command])
    return settings


def simulation_config(settings: Mapping[str, Any]) -> SimulationConfig:
    kw = {k: settings[k] for k in _SIM_KEYS if k in settings}
    kw.setdefault("fixture", "perturbed-sphere")
    if "params" in kw:
        kw["params"] = parse_params(kw["params"])
    if "monitors" in kw:
        m = kw["monitors"]
        kw["monitors"] = tuple([m] if isinstance(m, str) else m)
    if kw["fixture"] == "random-perturbed-sphere" and settings.get("seed") is None:
        raise ConfigError("random-perturbed-sphere is randomized: --seed is mandatory")
    kw["seed"] = int(settings.get("seed") or 0)
    try:
        return SimulationConfig(**kw)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


# ---------------------------------------------------------------------------
# output helpers


def _jsonable(obj):
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def dumps(report: Mapping) -> str:
    return json.dumps(_jsonable(report), sort_keys=True, indent=2) + "\n"


def _envelope(command: str, settings: Mapping, body: Mapping, passed: bool) -> dict:
    return {
        "schema": REPORT_SCHEMA,
        "version": REPORT_VERSION,
        "command": command,
        "settings": {k: v for k, v in sorted(settings.items()) if k != "out"},
        "passed": bool(passed),
        **body,
    }


def _out_dir(settings: Mapping) -> Path | None:
    out = settings.get("out")
    if out is None:
        return None
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _emit(settings: Mapping, name: str, report: Mapping, summary: str) -> None:
    out = _out_dir(settings)
    text = dumps(report)
    if out is None:
        sys.stdout.write(text)
    else:
        (out / name).write_text(text, encoding="utf-8")
        print(summary)


def _write_rows(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow(["" if v is None else (repr(float(v)) if isinstance(v, (float, np.floating)) else v) for v in row])


# ---------------------------------------------------------------------------
# verify-tensor


def cmd_verify_tensor(settings: dict) -> int:
    n_values = int_list(settings.get("n", "2..6"), "n")
    p_values = int_list(settings.get("p", "2..4"), "p")
    if min(n_values) < 2 or min(p_values) < 1:
        raise ConfigError("need n >= 2 and p >= 1")
    samples = int(settings.get("samples", 100_000))
    if samples < 1:
        raise ConfigError("samples must be positive")
    tol = float(settings["tolerance"])
    scale = float(settings.get("fault_scale", 1.0))
    rep = tensor_sweep(n_values, p_values, samples, int(settings["seed"]), tolerance=tol, rhs_scale=scale)
    body = rep.as_dict()
    if not rep.passed:
        w = rep.worst()
        log.warning("verification failed in %d checks; worst %s at n=%d p=%d index=%d value=%.3e", len(rep.failures()), w.check, w.n, w.p, w.index, w.value)
        log.warning("worst sample: %s", json.dumps(w.sample))
    report = _envelope("verify-tensor", settings, {"sweep": body}, rep.passed)
    _emit(settings, "verify_tensor.json", report, f"verify-tensor: {'PASS' if rep.passed else 'FAIL'} ({len(rep.failures())} failing checks)")
    return EXIT_OK if rep.passed else EXIT_FAIL


# ---------------------------------------------------------------------------
# scan-functions


def _random_admissible(rng: np.random.Generator, m: int) -> list[GParams]:
    out = []
    b = rng.uniform(1e-4, 2.0 / 3.0, size=m)
    u = rng.uniform(0.0, 1.0, size=m)
    for bi, ui in zip(b, u):
        hi = 1.0 / bi - 1.0
        out.append(GParams(float(bi), float(0.5 + ui * (hi - 0.5) * (1 - 1e-12))))
    return out


def _psi_grid_sup(eps: float, points: int = 200_001) -> float:
    # dense grid refined around the maximizer
    y = np.linspace(1e-9, 1 - 1e-9, points)
    k = int(np.argmax(psi(y, eps)))
    lo, hi = y[max(k - 1, 0)], y[min(k + 1, points - 1)]
    fine = np.linspace(lo, hi, 2001)
    return float(np.max(psi(fine, eps)))


def cmd_scan_functions(settings: dict) -> int:
    rng = np.random.default_rng(int(settings["seed"]))
    samples = int(settings.get("samples", 1000))
    tol = float(settings["tolerance"])
    n_values = int_list(settings.get("n", "2..10"), "n")
    eps_values = float_list(settings.get("eps", [0.1, 0.5, 1.0, 2.0, 5.0]), "eps")
    out = _out_dir(settings)

    # G: random admissible pairs plus the pairs used by the codimension >= 2 arguments
    named = {f"xi(p={p})": GParams(0.05, float(xi_constants(p)[0])) for p in (2, 3)}
    params = list(named.values()) + _random_admissible(rng, samples)
    certs = [certify_G_negative(gp) for gp in params]
    g_fail = [
        {"b": c.params.b, "xi": c.params.xi, "grid_max": c.grid_max, "coeffs": list(c.coeffs)}
        for c in certs
        if not c.certified
    ]
    g_ok = not g_fail
    if out is not None:
        x = np.concatenate([[0.0], np.logspace(-6, 6, 121)])
        curves = list(named.items()) + [(f"random{k}", gp) for k, gp in enumerate(params[len(named) : len(named) + 3])]
        _write_rows(
            out / "g_sup_y.csv",
            ["x"] + [f"{name}:b={gp.b:.6g}:xi={gp.xi:.6g}" for name, gp in curves],
            ([xv] + [G_sup_y(xv, gp) for _, gp in curves] for xv in x),
        )

    # phi identities on random (n, eps, x)
    m = max(samples, 1) * 10
    ns = rng.integers(1, 11, size=m)
    es = np.exp(rng.uniform(np.log(1e-2), np.log(10.0), size=m))
    xs = ns**2 * (1.0 + np.exp(rng.uniform(np.log(1e-3), np.log(1e3), size=m)))
    id_err = 0.0
    comb_min = math.inf
    for n, e, x in zip(ns, es, xs):
        pp = PhiParams(int(n), float(e))
        lhs, rhs = phi_log_derivative_identity(float(x), pp)
        id_err = max(id_err, abs(lhs - rhs) / max(1.0, abs(rhs)))
        comb_min = min(comb_min, phi_combination_bound(float(x), pp))
    phi_ok = id_err <= tol and comb_min > 0

    psi_rows = []
    for e in eps_values:
        sup = psi_sup(e)
        grid = _psi_grid_sup(e)
        psi_rows.append(
            {
                "eps": e,
                "argmax": psi_argmax(e),
                "psi_sup": sup,
                "grid_sup": grid,
                "abs_diff": abs(sup - grid),
                "theta": theta(e),
                "theta_prime": theta_prime(e),
            }
        )
    log_eps = np.logspace(-4, 4, 401)
    theta_prime_max = float(max(theta_prime(float(e)) for e in log_eps))
    psi_ok = all(r["psi_sup"] < 4 and r["abs_diff"] <= 1e-8 for r in psi_rows) and theta_prime_max < 0

    table = [thresholds(n, p, "sphere").as_dict() for n in n_values for p in (1, 2, 3, 4)]
    table += [thresholds(n, p, "hyperbolic").as_dict() for n in n_values for p in (1, 2)]
    if out is not None:
        xs_tab = [1.0 + 10.0**k for k in range(-3, 4)]
        _write_rows(
            out / "phi.csv",
            ["n", "eps", "x", "phi", "phi_prime", "phi_double_prime", "identity_lhs", "identity_rhs", "combination_bound"],
            (
                [n, e, n * n * s, phi(n * n * s, PhiParams(n, e)), phi_prime(n * n * s, PhiParams(n, e)),
                 phi_double_prime(n * n * s, PhiParams(n, e)), *phi_log_derivative_identity(n * n * s, PhiParams(n, e)),
                 phi_combination_bound(n * n * s, PhiParams(n, e))]
                for n in (2, 3) for e in eps_values for s in xs_tab
            ),
        )
        keys = ["eps", "argmax", "psi_sup", "grid_sup", "abs_diff", "theta", "theta_prime"]
        _write_rows(out / "psi_theta.csv", keys, ([r[k] for k in keys] for r in psi_rows))
        keys = list(table[0])
        _write_rows(out / "thresholds.csv", keys, ([json.dumps(_jsonable(r[k])) if isinstance(r[k], list) else r[k] for k in keys] for r in table))

    passed = g_ok and phi_ok and psi_ok
    body = {
        "G": {
            "pairs": len(certs),
            "certified": sum(c.certified for c in certs),
            "max_grid_value": max(c.grid_max for c in certs),
            "failures": g_fail,
            "named": {k: {"b": v.b, "xi": v.xi} for k, v in named.items()},
        },
        "phi": {"samples": int(m), "identity_max_rel_error": id_err, "combination_bound_min": comb_min},
        "psi": psi_rows,
        "theta_prime_max": theta_prime_max,
        "thresholds": table,
    }
    report = _envelope("scan-functions", settings, body, passed)
    _emit(settings, "scan_functions.json", report, f"scan-functions: {'PASS' if passed else 'FAIL'}")
    return EXIT_OK if passed else EXIT_FAIL


# ---------------------------------------------------------------------------
# simulate and functionals


def _umbilical_error(traj: Trajectory) -> float | None:
    cfg = traj.config
    if FIXTURES[cfg.fixture].mode != "umbilical":
        return None
    sol = UmbilicalSolution(cfg.ambient, cfg.n, float(cfg.params.get("C", 0.5)))
    return float(max(abs(s.radius - float(sol.radius(s.t))) for s in traj.states))


def _monitor_summary(traj: Trajectory) -> dict:
    out = {}
    for kind in traj.config.monitors:
        vals = traj.max_f(kind)
        inc = float(np.max(np.diff(vals))) if vals.size > 1 else 0.0
        out[kind] = {
            "initial": float(vals[0]),
            "final": float(vals[-1]),
            "max_increase": inc,
            "decay_exponent": traj.decay_exponent(kind),
        }
    if traj.pinching:
        out["ring_excess_running"] = traj.pinching[-1].running_ring_excess
        out["ring_excess_initial"] = traj.pinching[0].ring_excess
    return out


def _write_trajectory_files(out: Path, traj: Trajectory) -> None:
    traj.to_jsonl(out / "trajectory.jsonl")
    kinds = list(traj.config.monitors)
    _write_rows(
        out / "pinching.csv",
        ["t"] + [f"max_f_{k}" for k in kinds] + ["ring_excess", "running_ring_excess", "decay_exponent"],
        ([r.t] + [r.max_f[k] for k in kinds] + [r.ring_excess, r.running_ring_excess, r.decay_exponent] for r in traj.pinching),
    )
    _write_rows(
        out / "plot_max_f.csv",
        ["t"] + kinds,
        ([r.t] + [r.max_f[k] for k in kinds] for r in traj.pinching),
    )
    _write_rows(
        out / "plot_H.csv",
        ["t", "min_H", "max_H", "max_ring_sq"],
        (
            [s.t, float(np.min(np.abs(s.fields.H))), float(np.max(np.abs(s.fields.H))), float(np.max(s.fields.ring_sq))]
            for s in traj.states
        ),
    )
    if traj.functionals:
        jkeys = sorted({k for r in traj.functionals for k in r.J})
        _write_rows(
            out / "plot_functionals.csv",
            ["t", "vol", "I", "W", "H2"] + [f"J_{k}" for k in jkeys],
            ([r.t, r.vol, r.I, r.W, r.H2] + [r.J[k] for k in jkeys] for r in traj.functionals),
        )


def _run_checked(cfg: SimulationConfig) -> Trajectory:
    try:
        return run(cfg)
    except ImmersionError as exc:
        raise _VerificationAbort(str(exc)) from exc


class _VerificationAbort(Exception):
    pass


def cmd_simulate(settings: dict) -> int:
    cfg = simulation_config(settings)
    tol = float(settings["tolerance"])
    traj = _run_checked(cfg)
    checks: dict[str, bool] = {"stable": traj.status != "instability"}
    body: dict[str, Any] = {
        "status": traj.status,
        "message": traj.message,
        "steps": traj.steps,
        "records": len(traj.states),
        "t_final": traj.final.t,
        "monitors": _monitor_summary(traj),
    }
    err = _umbilical_error(traj)
    if err is not None:
        body["oracle_max_abs_error"] = err
        checks["oracle"] = err <= tol
    if traj.final.profile is not None:
        slacks = [verify_gradient_estimates(s) for s in traj.states]
        body["gradient_slack_min"] = {
            "h": min(g.slack_h for g in slacks),
            "ring": min(g.slack_ring for g in slacks),
        }
    if traj.functionals and traj.functionals[0].gb_residual is not None:
        body["gauss_bonnet_max_residual"] = max(r.gb_residual for r in traj.functionals)
    passed = all(checks.values())
    body["checks"] = checks
    out = _out_dir(settings)
    if out is not None:
        _write_trajectory_files(out, traj)
    report = _envelope("simulate", {**settings, "resolved": cfg.as_dict()}, body, passed)
    _emit(settings, "simulate.json", report, f"simulate: {traj.status} after {traj.steps} steps, {'PASS' if passed else 'FAIL'}")
    return EXIT_OK if passed else EXIT_FAIL


def cmd_functionals(settings: dict) -> int:
    settings.setdefault("fixture", "ellipsoid")
    cfg = simulation_config(settings)
    if FIXTURES[cfg.fixture].mode != "profile":
        raise ConfigError("functionals needs a profile fixture")
    tol = float(settings["tolerance"])
    B = float(settings.get("sobolev_constant", 1.0))
    if B <= 0:
        raise ConfigError("sobolev constant must be positive")
    traj = _run_checked(cfg)
    n, c = cfg.n, cfg.ambient
    recs = traj.functionals
    body: dict[str, Any] = {"status": traj.status, "records": len(recs), "t_final": traj.final.t}
    checks: dict[str, bool] = {"stable": traj.status != "instability"}
    constants: dict[str, Any] = {"B": B, "n": n, "c": c}
    slack_cols: dict[str, list] = {}
    if n >= 2:
        K = IntegralConstants(n, B)
        body["constants"] = K.as_dict()
    if n == 2:
        gb = max(gauss_bonnet_residual(s) for s in traj.states)
        comb = max(gauss_bonnet_combination_residual(s) for s in traj.states)
        body["gauss_bonnet"] = {"max_residual": gb, "max_combination_residual": comb}
        checks["gauss_bonnet"] = gb <= tol and comb <= tol
        if c >= 0 and len(recs) >= 3:
            C = float(K.C_surface("sphere" if c > 0 else "euclidean"))
            rep = decay_monitor_2d(recs, c=c)
            body["decay"] = {
                "smallness_constant": C,
                "sup_I": rep.C,
                "C_bar": rep.C_bar,
                "min_slack": rep.min_slack,
                "violations": rep.violations,
                "vol_margin": rep.vol_margin,
                "log_bound_holds": rep.log_bound_holds,
                "initial_I_below_smallness": recs[0].I < C,
            }
            constants.update(C=C, C_bar=rep.C_bar)
            slack_cols["decay_slack"] = [None] + [b - d for b, d in zip(rep.bound, rep.dIdt)] + [None]
    elif n >= 3 and c >= 0 and len(traj.states) >= 3:
        q = settings.get("q")
        rep = u_moment_monitor(traj.states, q=None if q is None else float(q), B=B)
        Cn = K.C_n_sphere() if c > 0 else K.C_n_euclidean()[0]
        body["moments"] = {
            "q": rep.q,
            "min_slack": rep.min_slack,
            "J_high_initial": rep.J_high[0],
            "J_high_final": rep.J_high[-1],
            "max_increase": rep.max_increase,
            "nonincreasing": rep.nonincreasing,
            "smallness_constant": Cn,
            "initial_W_below_smallness": recs[0].W < Cn,
        }
        constants.update(q=rep.q, C_n=Cn)
        slack_cols["moment_slack"] = [None] + [r - lh for r, lh in zip(rep.rhs, rep.lhs)] + [None]
    if c >= 0:
        body["sobolev_min_B_initial"] = sobolev_minimal_B(traj.states[0], np.ones_like(traj.states[0].fields.H))
    passed = all(checks.values())
    body["checks"] = checks
    out = _out_dir(settings)
    if out is not None:
        write_csv_report(out / "functionals.csv", recs, constants, slack_cols)
        _write_trajectory_files(out, traj)
    report = _envelope("functionals", {**settings, "resolved": cfg.as_dict()}, body, passed)
    _emit(settings, "functionals.json", report, f"functionals: {traj.status}, {'PASS' if passed else 'FAIL'}")
    return EXIT_OK if passed else EXIT_FAIL


# ---------------------------------------------------------------------------
# oracle

_FAMILY = {-1: "hyperbolic-sphere", 0: "euclidean-sphere", 1: "sphere-cap"}
_DEFAULT_TIMES = {
    -1: [-5.0, -2.0, -1.0, -0.5, -0.1],
    0: [-4.0, -2.0, -1.0, -0.5, -0.1],
    1: [-1.0, -0.5, 0.0, 0.2],
}
ASYMPTOTE_TIMES = (-2.0, -5.0, -10.0)


def _integrate_radius(sol: UmbilicalSolution, times: list[float]) -> dict[float, float]:
    """Numerical ``r(t)`` from ``dr/dt = -|H|(r)`` started at the exact ``r(times[0])``."""
    ts = sorted(times)
    state = FlowState(sol.c, sol.n, ts[0], radius=float(sol.radius(ts[0])))
    out = {ts[0]: state.radius}
    for t in ts[1:]:
        while state.t < t - 1e-15 * max(1.0, abs(t)):
            dt = min(UMBILICAL_STEP * state.radius / abs(state.velocity()), t - state.t)
            state = step(state, dt)
        out[t] = state.radius
    return out


def cmd_oracle(settings: dict) -> int:
    n_values = int_list(settings.get("n", 2), "n")
    c_values = int_list(settings.get("c", [-1, 0, 1]), "c")
    if any(c not in (-1, 0, 1) for c in c_values) or min(n_values) < 1:
        raise ConfigError("need c in {-1, 0, 1} and n >= 1")
    C = float(settings.get("C", 0.5))
    eps = float(settings.get("eps", 1.0))
    tol = float(settings["tolerance"])
    rows = []
    asymptote = []
    for c in c_values:
        for n in n_values:
            try:
                sol = UmbilicalSolution(c, n, C)
            except DomainError as exc:
                raise ConfigError(str(exc)) from exc
            times = float_list(settings["times"], "times") if "times" in settings else _DEFAULT_TIMES[c]
            valid, bad = [], {}
            for t in times:
                try:
                    sol.radius(t)
                    valid.append(t)
                except DomainError as exc:
                    bad[t] = str(exc)
            numeric = _integrate_radius(sol, valid) if valid else {}
            for t in times:
                row = {"family": _FAMILY[c], "c": c, "n": n, "t": t}
                if t in bad:
                    row["domain_error"] = bad[t]
                    rows.append(row)
                    continue
                r = float(sol.radius(t))
                row.update(r=r, H=float(sol.Hnorm(t)), r_numeric=numeric[t], abs_error=abs(numeric[t] - r))
                row["ode_residual"] = float(sol.ode_residual(t))
                if c != 0 and n >= 2:
                    w = pinching_witness(sol, t, "hyperbolic" if c < 0 else "sphere", eps=eps)
                    row["pinching_margin"] = w.margin
                rows.append(row)
            if c < 0:
                for t in ASYMPTOTE_TIMES:
                    asymptote.append({"n": n, "t": t, "H": float(sol.Hnorm(t)), "H_minus_n": float(sol.Hnorm(t)) - n})
    errs = [r["abs_error"] for r in rows if "abs_error" in r]
    passed = all(e <= tol for e in errs)
    body = {"rows": rows, "asymptote": asymptote, "max_abs_error": max(errs) if errs else None}
    _print_oracle_table(rows, asymptote)
    out = _out_dir(settings)
    if out is not None:
        keys = ["family", "c", "n", "t", "r", "H", "r_numeric", "abs_error", "ode_residual", "pinching_margin", "domain_error"]
        _write_rows(out / "oracle.csv", keys, ([r.get(k) for k in keys] for r in rows))
        (out / "oracle.json").write_text(dumps(_envelope("oracle", settings, body, passed)), encoding="utf-8")
    return EXIT_OK if passed else EXIT_FAIL


def _print_oracle_table(rows, asymptote) -> None:
    print(f"{'family':<18} {'n':>2} {'t':>8} {'r(t)':>14} {'|H|(t)':>14} {'|r_num - r|':>12} {'margin':>12}")
    for r in rows:
        if "domain_error" in r:
            print(f"{r['family']:<18} {r['n']:>2} {r['t']:>8.3g}  domain error: {r['domain_error']}")
            continue
        margin = r.get("pinching_margin")
        m = f"{margin:12.5g}" if margin is not None else f"{'':>12}"
        print(f"{r['family']:<18} {r['n']:>2} {r['t']:>8.3g} {r['r']:>14.9f} {r['H']:>14.9f} {r['abs_error']:>12.3e} {m}")
    if asymptote:
        print("hyperbolic |H| as t -> -inf")
        for a in asymptote:
            print(f"  n={a['n']} t={a['t']:>6.3g} |H|={a['H']:.12f} |H|-n={a['H_minus_n']:.3e}")


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("common options")
    g.add_argument("--config", help="YAML or JSON file with settings; flags override it")
    g.add_argument("--seed", type=int, help="RNG seed (mandatory for randomized commands)")
    g.add_argument("--samples", type=int, help="number of random samples")
    g.add_argument("--grid", type=int, help="profile grid intervals N")
    g.add_argument("--dt", type=float, help="fixed time step (default: adaptive)")
    g.add_argument("--out", help="output directory; without it the JSON report goes to stdout")
    g.add_argument("--tolerance", type=float, help="verification tolerance")
    g.add_argument("--sobolev-constant", dest="sobolev_constant", type=float, help="Sobolev constant B(n)")
    # test hook: scales the right-hand side of the inequalities
    g.add_argument("--fault-scale", dest="fault_scale", type=float, help=argparse.SUPPRESS)
    g.add_argument("-v", "--verbose", action="store_true", default=None, help="log progress to stderr")

    parser = argparse.ArgumentParser(prog="ancientflow", description="Numerical checks for pinched ancient mean curvature flows.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify-tensor", parents=[common], help="randomized sweep of the tensor inequalities")
    p.add_argument("--n", help="dimensions, e.g. 2..6 or 2,3,4")
    p.add_argument("--p", help="codimensions, e.g. 2..4 (1 gives the hypersurface identities)")

    p = sub.add_parser("scan-functions", parents=[common], help="sign checks and tables for the auxiliary functions")
    p.add_argument("--n", help="dimensions for the threshold table")
    p.add_argument("--eps", help="comma-separated eps values for the psi/theta table")

    for name, help_ in (("simulate", "run a fixture"), ("functionals", "integral monitors along a flow")):
        p = sub.add_parser(name, parents=[common], help=help_)
        p.add_argument("--fixture", help=f"one of {', '.join(sorted(FIXTURES))}")
        p.add_argument("--n", type=int)
        p.add_argument("--c", type=int, help="ambient curvature -1, 0 or 1")
        p.add_argument("--param", action="append", metavar="KEY=VALUE", help="fixture parameter (repeatable)")
        p.add_argument("--order", type=int, help="stencil order 2 or 4")
        p.add_argument("--t0", type=float)
        p.add_argument("--t1", type=float, help="end time (default: run to extinction)")
        p.add_argument("--kappa", type=float, help="safety factor of the stability bound")
        p.add_argument("--record-every", dest="record_every", type=int)
        p.add_argument("--monitor", action="append", help=f"ratio to monitor: {', '.join(RATIO_KINDS)}")
        p.add_argument("--a", type=float, help="constant in the codimension-one sphere ratio")
        p.add_argument("--b", type=float, help="constant in the shifted sphere ratio")
        p.add_argument("--eps", type=float, help="exponent margin in the hyperbolic ratio")
        p.add_argument("--max-steps", dest="max_steps", type=int)
        if name == "functionals":
            p.add_argument("--q", type=float, help="moment exponent (Euclidean ambient)")

    p = sub.add_parser("oracle", parents=[common], help="tabulate the exact umbilical families")
    p.add_argument("--n", help="dimensions")
    p.add_argument("--c", help="ambient curvatures, e.g. -1,0,1")
    p.add_argument("--times", help="comma-separated times")
    p.add_argument("--C", type=float, help="sphere-cap constant in (0, 1)")
    p.add_argument("--eps", type=float, help="exponent margin of the hyperbolic witness")
    return parser


HANDLERS = {
    "verify-tensor": cmd_verify_tensor,
    "scan-functions": cmd_scan_functions,
    "simulate": cmd_simulate,
    "oracle": cmd_oracle,
    "functionals": cmd_functionals,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        settings = resolve_settings(args.command, args)
        settings.pop("verbose", None)
        return HANDLERS[args.command](settings)
    except (ConfigError, DomainError, InsufficientDataError) as exc:
        print(f"ancientflow {args.command}: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _VerificationAbort as exc:
        print(f"ancientflow {args.command}: run aborted: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    raise SystemExit(main())

"""Command-line front end: YAML-configured runs with hashed output manifests.

Exit codes: 0 success, 2 configuration error, 3 numerical non-convergence.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import platform
import sys
import time
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .dynamics import DynamicsError, Noise, quench_sweep, sweep_manifest
from .ion import HardwareBounds, TWO_PI, feasibility_report, from_model
from .model import ModelError, ModelParams
from .phase import (ConvergenceError, TrackingError, locate_multicritical, locate_tricritical_exact, minimize,
                    phase_header, phase_rows, trace_first_order)
from .scaling import (MF_KINDS, CollapseError, FitError, collapse, fit_power_law, mf_scaling_data,
                      perturbed_spreads, predicted_exponents, sliding_window_fits)
from .series import energy_functional_ns
from .spectrum import gap_scan, write_scan_csv

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
MANIFEST = "manifest.json"


class ConfigError(ValueError):
    pass


# -- config ---------------------------------------------------------------------

def _key_lines(node, prefix=""):
    """Map dotted key paths to 1-based source lines of a composed YAML node."""
    out = {}
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            path = f"{prefix}{k.value}"
            out[path] = k.start_mark.line + 1
            out.update(_key_lines(v, path + "."))
    return out


def load_config(path):
    text = Path(path).read_text()
    try:
        data = yaml.safe_load(text) or {}
        lines = _key_lines(yaml.compose(text))
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return data, lines


SCHEMAS = {
    "phase-diagram": {
        "n_fractions": list, "eps_tilde": list, "h_tilde": list, "g_tilde": dict, "vary_eps": dict,
        "trace": bool,
    },
    "locate": {"M": int, "n_fractions": list, "initial_guess": list, "exact": bool, "max_iter": int},
    "gap-scan": {"n_fractions": list, "g_tilde": (float, int), "eps_tilde": list, "h_tilde": list,
                 "N": int, "eta": list, "fit_window": list, "n_max_cap": int},
    "exponents": {"M": int, "n_fractions": list, "deltas": dict, "window_width": int},
    "quench-collapse": {"M": int, "n_fractions": list, "eta": list, "omega_tau": list,
                        "gamma_down_per_omega": (float, int), "gamma_up_per_omega": (float, int),
                        "integrator_tol": (float, int), "method": str, "magnus_dt_per_omega": (float, int),
                        "n_max": int},
    "ion": {"g_tilde": (float, int), "eps_tilde": (float, int), "omega_hz": (float, int),
            "ratios": list, "eta0": (float, int), "omega_tau": list, "bounds": dict},
}


def validate(command, data, lines, path="config"):
    schema = SCHEMAS[command]
    for key, value in data.items():
        where = f"{path}:{lines.get(key, '?')}"
        if key not in schema:
            raise ConfigError(f"{where}: unknown key {key!r} for {command}")
        if not isinstance(value, schema[key]) or (schema[key] is int and isinstance(value, bool)):
            raise ConfigError(f"{where}: key {key!r} has type {type(value).__name__}")
    return data


def _linspace(spec, name):
    try:
        start, stop, num = float(spec["start"]), float(spec["stop"]), int(spec["num"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{name} needs start/stop/num") from exc
    if num < 1:
        raise ConfigError(f"{name} grid is empty")
    return np.linspace(start, stop, num)


def _params(cfg, **kw):
    try:
        return ModelParams(tuple(cfg["n_fractions"]), float(cfg.get("g_tilde", 0.0)), tuple(cfg["eps_tilde"]),
                           tuple(cfg["h_tilde"]) if "h_tilde" in cfg else None, **kw)
    except KeyError as exc:
        raise ConfigError(f"missing key {exc}") from exc
    except ModelError as exc:
        raise ConfigError(str(exc)) from exc


# -- outputs --------------------------------------------------------------------

def _sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    return x


def write_json(path, obj):
    Path(path).write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])


def write_manifest(out, command, cfg, files, meta, wall):
    canon = json.dumps(_jsonable(cfg), sort_keys=True).encode()
    manifest = {
        "command": command,
        "config": _jsonable(cfg),
        "config_sha256": hashlib.sha256(canon).hexdigest(),
        "version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "outputs": {f: _sha256(out / f) for f in files},
        "meta": meta,
        "wall_time_s": wall,
    }
    write_json(out / MANIFEST, manifest)
    return manifest


# -- commands -------------------------------------------------------------------

def cmd_phase_diagram(cfg, out, jobs, tol):
    g_grid = _linspace(cfg.get("g_tilde", {}), "g_tilde")
    base = _params({**cfg, "g_tilde": 0.0})
    eps_axis = cfg.get("vary_eps")
    if eps_axis is not None:
        idx = int(eps_axis.get("index", 0))
        if not 0 <= idx < base.M:
            raise ConfigError("vary_eps.index out of range")
        e_grid = _linspace(eps_axis, "vary_eps")
    else:
        idx, e_grid = 0, [base.eps_tilde[0]]

    def at(e):
        eps = list(base.eps_tilde)
        eps[idx] = float(e)
        return base.with_(eps_tilde=tuple(eps))

    points = [minimize(at(e).with_(g_tilde=float(g))) for e in e_grid for g in g_grid]
    rows = phase_rows(points)
    coex = []
    if cfg.get("trace", False):
        for e in e_grid:
            p_e = at(e)
            coex += trace_first_order(lambda s, p_e=p_e: p_e.with_(g_tilde=float(s)), g_grid)
        for c in coex:
            p = c.params
            rows.append([p.g_tilde, *p.eps_tilde, *p.h_tilde, c.label,
                         ";".join(f"{z:.12g}" for z in c.minimizers),
                         float(energy_functional_ns(c.minimizers[0], p))])
    write_csv(out / "phase_diagram.csv", phase_header(base.M), rows)
    labels = sorted({r[-3] for r in rows})
    return ["phase_diagram.csv"], {"n_rows": len(rows), "labels": labels, "n_coexistence": len(coex)}


def cmd_locate(cfg, out, jobs, tol):
    M = cfg.get("M")
    n = cfg.get("n_fractions")
    if M is None or n is None:
        raise ConfigError("locate needs M and n_fractions")
    t0 = time.perf_counter()
    cp = locate_multicritical(int(M), tuple(float(x) for x in n), cfg.get("initial_guess"),
                              tol=tol or 1e-10, max_iter=int(cfg.get("max_iter", 100)))
    res = {"coords": list(cp.coords), "order": cp.order, "residuals": cp.residuals, "v": cp.v,
           "iterations": cp.iterations, "n_fractions": list(cp.n_fractions),
           "runtime_s": time.perf_counter() - t0}
    if cfg.get("exact", False):
        if int(M) != 1:
            raise ConfigError("exact mode is available for M=1 only")
        g_t, e_t, num = locate_tricritical_exact()
        res["exact"] = {"g_tilde": str(g_t), "eps_tilde": str(e_t), "u1_numerator": str(num)}
    write_json(out / "critical_point.json", res)
    return ["critical_point.json"], {"iterations": cp.iterations}


def cmd_gap_scan(cfg, out, jobs, tol):
    params = _params(cfg, N=int(cfg.get("N", 1)))
    etas = cfg.get("eta")
    if not etas:
        raise ConfigError("gap-scan needs a non-empty eta list")
    scan = gap_scan(params, etas, tol=tol or 1e-9, n_max_cap=int(cfg.get("n_max_cap", 512)), jobs=jobs)
    write_scan_csv(out / "gap_scan.csv", scan)
    x = [e for e, _ in scan]
    y = [r.gap for _, r in scan]
    fit = fit_power_law(x, y, cfg.get("fit_window"))
    write_json(out / "gap_fit.json", {"delta_eps": fit.exponent, "stderr": fit.stderr, "window": fit.window,
                                      "n_points": fit.n_points})
    return ["gap_scan.csv", "gap_fit.json"], {"n_max_used": [r.n_max_used for _, r in scan]}


def cmd_exponents(cfg, out, jobs, tol):
    M = int(cfg.get("M", 1))
    table = predicted_exponents(M)
    res = {"predicted": {k: str(v) if not isinstance(v, tuple) else [str(x) for x in v]
                         for k, v in table.__dict__.items() if k != "M"}}
    res["crossover"] = {f"{a}/{b}": str(table.crossover(a, b)) for a in table.variables()
                        for b in table.variables() if a != b}
    files = ["exponents.json"]
    if "n_fractions" in cfg:
        cp = locate_multicritical(M, tuple(cfg["n_fractions"]))
        deltas = cfg.get("deltas", {})
        width = int(cfg.get("window_width", 5))
        defaults = {"beta_r": (-9, -3), "gamma_eps_r": (-9, -3), "gamma_eps_w1": (-12, -6)}
        rows = []
        fits = {}
        for kind in MF_KINDS:
            lo, hi, num = deltas.get(kind, [*defaults[kind], 13])
            x, y = mf_scaling_data(cp, kind, np.logspace(lo, hi, int(num)))
            rows += [[kind, xi, yi] for xi, yi in zip(x, y)]
            fits[kind] = {"exponent": fit_power_law(x, y).exponent,
                          "sliding": [f.exponent for f in sliding_window_fits(x, y, width)]}
        res["mean_field_fits"] = fits
        res["critical_point"] = list(cp.coords)
        write_csv(out / "exponent_data.csv", ["kind", "delta", "value"], rows)
        files.append("exponent_data.csv")
    write_json(out / "exponents.json", res)
    return files, {}


def cmd_quench_collapse(cfg, out, jobs, tol):
    M = int(cfg.get("M", 1))
    n = tuple(cfg.get("n_fractions", [1.0]))
    etas = cfg.get("eta", [])
    taus = cfg.get("omega_tau", [])
    if len(set(etas)) < 2:
        raise ConfigError("need >= 2 distinct eta values")
    if not taus:
        raise ConfigError("omega_tau list is empty")
    cp = locate_multicritical(M, n)
    noise = Noise(float(cfg.get("gamma_down_per_omega", 0.0)), float(cfg.get("gamma_up_per_omega", 0.0)))
    noise = noise if noise.active else None
    kw = {"integrator_tol": tol or float(cfg.get("integrator_tol", 1e-9)),
          "method": cfg.get("method", "dop853"), "magnus_dt": float(cfg.get("magnus_dt_per_omega", 0.05))}
    if "n_max" in cfg:
        kw["n_max"] = int(cfg["n_max"])
    results = quench_sweep(cp.params(), etas, taus, noise, jobs=jobs, **kw)
    exps = predicted_exponents(M).quench_exponents()
    summary = {"exponents": [str(e) for e in exps], "critical_point": list(cp.coords)}
    try:
        curves, spread = collapse(results, exps)
        summary["spread"] = spread
        summary["perturbed"] = perturbed_spreads(results, exps)
    except CollapseError as exc:
        summary["spread"] = None
        summary["error"] = str(exc)
        curves = {}
    rows = []
    a, b = (float(e) for e in exps)
    for r in results:
        rows.append([r.eta, r.tau, r.jz_final, r.jz_ground, r.jz_residual, r.tau * r.eta**b,
                     r.jz_residual * r.eta**(-a), r.n_max_used])
    write_csv(out / "quench.csv", ["eta", "omega_tau", "jz_final", "jz_ground", "jz_residual", "X", "Y",
                                   "n_max_used"], rows)
    write_json(out / "collapse.json", summary)
    write_json(out / "sweep.json", sweep_manifest(cp.params(), results, noise, kw))
    files = ["quench.csv", "collapse.json", "sweep.json"]
    meta = {"n_max_used": [r.n_max_used for r in results], "wall_times": [r.wall_time for r in results]}
    if summary["spread"] is None:
        # raw data stays useful; record it before reporting the failure
        write_manifest(out, "quench-collapse", cfg, files, {**meta, "status": "failed"},
                       sum(r.wall_time for r in results))
        raise CollapseError(summary["error"])
    return files, meta


def cmd_ion(cfg, out, jobs, tol):
    g = float(cfg.get("g_tilde", (5 / 4) ** 0.75))
    e = float(cfg.get("eps_tilde", 0.5))
    omega = TWO_PI * float(cfg.get("omega_hz", 200.0))
    eta0 = float(cfg.get("eta0", 0.06))
    try:
        bounds = HardwareBounds.from_dict(cfg.get("bounds", {}))
    except ModelError as exc:
        raise ConfigError(str(exc)) from exc
    reports = {}
    for ratio in cfg.get("ratios", [50, 400]):
        ion = from_model(g, e, omega, float(ratio) * omega, eta0)
        reports[repr(float(ratio))] = feasibility_report(ion, bounds, cfg.get("omega_tau", (0.75, 2.0)))
    write_json(out / "ion_feasibility.json", reports)
    return ["ion_feasibility.json"], {"pass": all(r["pass"] for r in reports.values())}


COMMANDS = {
    "phase-diagram": cmd_phase_diagram,
    "locate": cmd_locate,
    "gap-scan": cmd_gap_scan,
    "exponents": cmd_exponents,
    "quench-collapse": cmd_quench_collapse,
    "ion": cmd_ion,
}


def verify(out: Path) -> list[str]:
    """Files whose hash no longer matches the manifest."""
    manifest = json.loads((out / MANIFEST).read_text())
    return [f for f, h in manifest["outputs"].items() if not (out / f).exists() or _sha256(out / f) != h]


def build_parser():
    p = argparse.ArgumentParser(prog="multicrit", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", type=Path, help="YAML configuration file")
        s.add_argument("--out", type=Path, default=Path("out"))
        s.add_argument("--jobs", type=int, default=1)
        s.add_argument("--tol", type=float, default=None)
        s.add_argument("--serial", action="store_true", help="force a single worker")
    v = sub.add_parser("verify")
    v.add_argument("--out", type=Path, default=Path("out"))
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "verify":
        try:
            bad = verify(args.out)
        except (OSError, ValueError, KeyError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        for f in bad:
            print(f"hash mismatch: {f}", file=sys.stderr)
        return EXIT_NUMERIC if bad else EXIT_OK
    jobs = 1 if args.serial else max(1, args.jobs)
    t0 = time.perf_counter()
    try:
        cfg, lines = load_config(args.config) if args.config else ({}, {})
        validate(args.command, cfg, lines, str(args.config or "config"))
        args.out.mkdir(parents=True, exist_ok=True)
        files, meta = COMMANDS[args.command](cfg, args.out, jobs, args.tol)
    except (ConfigError, ModelError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConvergenceError, TrackingError, DynamicsError, CollapseError, FitError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    write_manifest(args.out, args.command, cfg, files, meta, time.perf_counter() - t0)
    print(json.dumps({"command": args.command, "outputs": files}, indent=None))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

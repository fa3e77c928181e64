"""Command-line front end: ``bslab run <config.json>``.

A config names a measure descriptor, one command and its parameters::

    {"measure": {"type": "circle", "r": 1, "n": 512},
     "command": "bound_state",
     "parameters": {"alpha": [0.4, 0.2, 0.1]},
     "output": {"path": "bound_state.csv", "format": "csv"}}

Flags ``--measure``, ``--command``, ``--alpha``, ``--k`` and ``--out``
build or override a config for one-off runs. Exit status is 0 on
success, 2 for an invalid config and 3 when the numerics fail.
"""
from __future__ import annotations

import argparse
import copy
import hashlib
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import jsonschema

from . import __version__
from .bskernel import r_form
from .field import eigenfunction_grid, norm_limit_report
from .measure import MeasureError, from_descriptor, kato_diagnostic, kato_flag, refine
from .spectral import (c_mu, gamma_top, lambda_asymptotic, perturbation_report,
                       solve_bound_state)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

_POS = {"type": "number", "exclusiveMinimum": 0}
_POS_LIST = {"type": "array", "items": _POS, "minItems": 1}
_INT2 = {"type": "integer", "minimum": 2}


def _params(props, required=()):
    return {"type": "object", "properties": props, "required": list(required),
            "additionalProperties": False}


PARAMETER_SCHEMAS = {
    "gamma_sweep": _params({"k": _POS_LIST}, ["k"]),
    "bound_state": _params({"alpha": _POS_LIST}, ["alpha"]),
    "cmu": _params({}),
    "eigenfunction": _params({
        "alpha": _POS, "nx": _INT2, "ny": _INT2, "box_factor": _POS,
        "box": {"type": "array", "items": {"type": "number"}, "minItems": 4, "maxItems": 4},
    }, ["alpha"]),
    "kato_check": _params({"eps": _POS_LIST, "drop": _POS}, ["eps"]),
    "perturbation": _params({"k": _POS_LIST}, ["k"]),
    "convergence": _params({"k": _POS, "levels": {"type": "integer", "minimum": 3}}, ["k"]),
    "norm_limit": _params({"alpha": _POS_LIST}, ["alpha"]),
}

# sweeps whose list must run toward the asymptotic regime
_DECREASING = {"perturbation": "k", "kato_check": "eps", "norm_limit": "alpha"}

DEFAULTS = {
    "eigenfunction": {"nx": 128, "ny": 128, "box_factor": 8.0},
    "kato_check": {"drop": 0.5},
    "convergence": {"levels": 4},
}

_MEASURE_SCHEMA = {
    "type": "object",
    "required": ["type"],
    "properties": {"type": {"enum": ["circle", "segment", "polyline", "radial_density",
                                     "grid_density", "union"]}},
    "allOf": [
        {"if": {"properties": {"type": {"const": "circle"}}},
         "then": {"properties": {"type": {}, "r": _POS, "n": {"type": "integer", "minimum": 3}},
                  "required": ["r", "n"], "additionalProperties": False}},
        {"if": {"properties": {"type": {"const": "segment"}}},
         "then": {"properties": {"type": {}, "n": {"type": "integer", "minimum": 1},
                                 "a": {"$ref": "#/$defs/point"},
                                 "b": {"$ref": "#/$defs/point"}},
                  "required": ["a", "b", "n"], "additionalProperties": False}},
        {"if": {"properties": {"type": {"const": "polyline"}}},
         "then": {"properties": {"type": {}, "n_per_unit": _POS,
                                 "vertices": {"type": "array", "minItems": 2,
                                              "items": {"$ref": "#/$defs/point"}}},
                  "required": ["vertices", "n_per_unit"], "additionalProperties": False}},
        {"if": {"properties": {"type": {"const": "radial_density"}}},
         "then": {"properties": {"type": {}, "gamma": {"type": "number", "exclusiveMinimum": 2},
                                 "n_r": {"type": "integer", "minimum": 1},
                                 "n_theta": {"type": "integer", "minimum": 1}},
                  "required": ["gamma", "n_r", "n_theta"], "additionalProperties": False}},
        {"if": {"properties": {"type": {"const": "grid_density"}}},
         "then": {"properties": {"type": {},
                                 "density": {"type": "object", "required": ["name"],
                                             "properties": {"name": {"enum": ["constant", "gaussian", "disc"]}}},
                                 "box": {"type": "array", "items": {"type": "number"},
                                         "minItems": 4, "maxItems": 4},
                                 "n_x": {"type": "integer", "minimum": 1},
                                 "n_y": {"type": "integer", "minimum": 1}},
                  "required": ["density", "box", "n_x", "n_y"], "additionalProperties": False}},
        {"if": {"properties": {"type": {"const": "union"}}},
         "then": {"properties": {"type": {}, "parts": {"type": "array", "minItems": 1,
                                                       "items": {"$ref": "#/$defs/measure"}}},
                  "required": ["parts"], "additionalProperties": False}},
    ],
}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "$defs": {
        "point": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
        "measure": _MEASURE_SCHEMA,
    },
    "type": "object",
    "required": ["measure", "command"],
    "additionalProperties": False,
    "properties": {
        "measure": {"$ref": "#/$defs/measure"},
        "command": {"enum": sorted(PARAMETER_SCHEMAS)},
        "parameters": {"type": "object"},
        "output": {"type": "object", "additionalProperties": False,
                   "properties": {"path": {"type": "string", "minLength": 1},
                                  "format": {"enum": ["csv", "json"]}}},
    },
    "allOf": [
        {"if": {"properties": {"command": {"const": name}}},
         "then": {"properties": {"parameters": schema}}}
        for name, schema in PARAMETER_SCHEMAS.items()
    ],
}


class ConfigError(ValueError):
    """Config failed to parse or validate; message names the line or field."""


# ---------------------------------------------------------------- config


def _field_path(err) -> str:
    out = ""
    for part in err.absolute_path:
        out += f"[{part}]" if isinstance(part, int) else (f".{part}" if out else part)
    return out or "<root>"


def validate(cfg: dict) -> dict:
    """Schema-check a config and fill parameter defaults; returns a new dict."""
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        # prefer the deepest (most specific) error
        err = max(errors, key=lambda e: len(e.absolute_path))
        raise ConfigError(f"field {_field_path(err)}: {err.message}")
    cfg = copy.deepcopy(cfg)
    params = {**DEFAULTS.get(cfg["command"], {}), **cfg.get("parameters", {})}
    cfg["parameters"] = params
    key = _DECREASING.get(cfg["command"])
    if key and any(a <= b for a, b in zip(params[key], params[key][1:])):
        raise ConfigError(f"field parameters.{key}: must be strictly decreasing")
    return cfg


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc


def _canonical(obj):
    # ints and floats hash alike: 1 and 1.0 are the same setting
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return obj
    if isinstance(obj, (int, float)):
        return float(obj)
    if isinstance(obj, dict):
        return {k: _canonical(v) for k, v in obj.items()}
    return [_canonical(v) for v in obj]


def config_hash(cfg: dict) -> str:
    """sha256 over measure, command and (defaulted) parameters; output is excluded."""
    sem = {"measure": cfg["measure"], "command": cfg["command"],
           "parameters": cfg.get("parameters", {})}
    blob = json.dumps(_canonical(sem), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


# ---------------------------------------------------------------- formatting


def fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, int):
        return str(x)
    return f"{float(x):.17g}"


def _json_text(obj, indent=0) -> str:
    pad = "  " * (indent + 1)
    if isinstance(obj, dict):
        items = [f"{pad}{json.dumps(k)}: {_json_text(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + "  " * indent + "}"
    if isinstance(obj, list):
        if not obj:
            return "[]"
        items = [f"{pad}{_json_text(v, indent + 1)}" for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + "  " * indent + "]"
    if isinstance(obj, str) or obj is None:
        return json.dumps(obj)
    x = fmt(obj)
    return {"nan": "NaN", "inf": "Infinity", "-inf": "-Infinity"}.get(x, x)


class Table:
    """Named columns plus comment lines describing what they realise."""

    def __init__(self, columns, rows, notes=(), extra=None):
        self.columns = list(columns)
        self.rows = [list(r) for r in rows]
        self.notes = list(notes)
        self.extra = extra or {}


# ---------------------------------------------------------------- commands


def _threads():
    try:
        return max(1, int(os.environ.get("BSLAB_THREADS", "1")))
    except ValueError:
        return 1


def _ordered_map(fn, items):
    """map() that may run concurrently but always returns input order."""
    items = list(items)
    n = min(_threads(), len(items))
    if n <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(n) as ex:
        return list(ex.map(fn, items))


def cmd_gamma_sweep(m, p):
    pts = _ordered_map(lambda k: gamma_top(m, k), p["k"])
    rows = [(q.k, q.gamma, q.iterations, q.residual) for q in pts]
    return Table(["k", "gamma", "iterations", "residual"], rows,
                 ["gamma = top eigenvalue of Q(-k^2), kernel K0(k|x-y|)/2pi on L2(mu)"])


def cmd_bound_state(m, p):
    def one(a):
        bs = solve_bound_state(m, a)
        asym = lambda_asymptotic(m, a)
        ratio = bs.lam / asym if asym != 0 else math.nan
        return (a, bs.k_alpha, bs.lam, asym, ratio)
    return Table(["alpha", "k", "lambda", "lambda_asym", "ratio"], _ordered_map(one, p["alpha"]),
                 ["lambda = -k^2 with alpha gamma(k) = 1",
                  "lambda_asym = -C_mu exp(-4 pi / (alpha mu_T))"])


def cmd_cmu(m, p):
    return Table(["mu_total", "r_form", "c_mu"], [(m.total_mass, r_form(m), c_mu(m))],
                 ["C_mu = exp(4 pi (R1,1) / mu_T^2)"])


def cmd_kato_check(m, p):
    table = kato_diagnostic(m, p["eps"])
    flag = kato_flag(table, p["drop"])
    return Table(["eps", "sup_log_integral"], table,
                 ["sup_log_integral = max over atoms of int_{|x-y|<eps} |ln|x-y|| dmu(y)",
                  f"kato_like = {fmt(flag)}"], extra={"kato_like": flag})


def cmd_perturbation(m, p):
    rows = perturbation_report(m, p["k"])
    cols = ["k", "gamma", "omega", "second", "gap", "diam_sigma0", "dev",
            "omega_scaled", "dev_scaled"]
    return Table(cols, [[getattr(r, c) for c in cols] for r in rows],
                 ["omega = top eigenvalue of T(k) = -2 pi Q(-k^2) / (mu_T ln k)",
                  "omega_scaled = (omega - 1) ln k; dev = |phi_k - 1/|1||"])


def cmd_convergence(m, p):
    measures = [m]
    for _ in range(p["levels"] - 1):
        measures.append(refine(measures[-1]))
    gammas = _ordered_map(lambda mm: gamma_top(mm, p["k"]).gamma, measures)
    rows = []
    for i, (mm, g) in enumerate(zip(measures, gammas)):
        diff = g - gammas[i - 1] if i >= 1 else math.nan
        order = rich = math.nan
        if i >= 2:
            prev = gammas[i - 1] - gammas[i - 2]
            if diff != 0 and prev / diff > 0:
                order = math.log2(prev / diff)
                rich = g + diff / (2.0 ** order - 1.0) if order != 0 else math.nan
        rows.append((mm.n, g, diff, order, rich))
    return Table(["n", "gamma", "diff", "observed_order", "richardson"], rows,
                 [f"gamma at fixed k = {fmt(p['k'])} under resolution doubling",
                  "observed_order = log2(diff_prev / diff); richardson = gamma + diff / (2^order - 1)"])


def cmd_norm_limit(m, p):
    rows = norm_limit_report(m, p["alpha"])
    cols = ["alpha", "k", "norm", "norm_leading", "limit", "deviation"]
    return Table(cols, [[getattr(r, c) for c in cols] for r in rows],
                 ["norm = |f_alpha| in L2(R^2), f_alpha = k R(-k^2) phi mu; limit = mu_T / (2 sqrt(pi))"])


def cmd_eigenfunction(m, p):
    bs = solve_bound_state(m, p["alpha"])
    box = p.get("box")
    if box is None:
        half = p["box_factor"] / bs.k_alpha + m.radius
        box = (-half, half, -half, half)
    grid = eigenfunction_grid(m, bs, box, p["nx"], p["ny"])
    notes = ["f_alpha(x) = (k / 2 pi) sum_j w_j phi_j K0(k|x - x_j|)",
             f"alpha = {fmt(p['alpha'])}", f"k = {fmt(grid.k)}",
             f"l2_norm_kernel = {fmt(grid.l2_norm_kernel)}",
             f"l2_norm_grid = {fmt(grid.l2_norm_grid)}",
             f"norms_comparable = {fmt(grid.comparable)}"]
    return Table([], [], notes, extra={"grid": grid})


COMMANDS = {
    "gamma_sweep": cmd_gamma_sweep,
    "bound_state": cmd_bound_state,
    "cmu": cmd_cmu,
    "eigenfunction": cmd_eigenfunction,
    "kato_check": cmd_kato_check,
    "perturbation": cmd_perturbation,
    "convergence": cmd_convergence,
    "norm_limit": cmd_norm_limit,
}


# ---------------------------------------------------------------- output


def _provenance(cfg, m):
    return {"tool": f"bslab {__version__}", "config_sha256": config_hash(cfg),
            "measure": json.dumps(cfg["measure"], sort_keys=True, separators=(",", ":")),
            "mu_total": m.total_mass}


def render(cfg, m, table: Table) -> str:
    fmt_kind = cfg.get("output", {}).get("format")
    if fmt_kind is None:
        fmt_kind = "json" if cfg["command"] == "cmu" else "csv"
    prov = _provenance(cfg, m)
    if fmt_kind == "json":
        if "grid" in table.extra:
            raise ConfigError("field output.format: eigenfunction grids are csv only")
        body = {"provenance": {k: (v if isinstance(v, str) else float(v)) for k, v in prov.items()},
                "notes": table.notes}
        records = [dict(zip(table.columns, r)) for r in table.rows]
        if len(records) == 1:
            body.update(records[0])
        else:
            body["rows"] = records
        for k, v in table.extra.items():
            body[k] = v if not isinstance(v, bool) else fmt(v)
        return _json_text(body) + "\n"
    lines = [f"# {k} = {v if isinstance(v, str) else fmt(v)}\n" for k, v in prov.items()]
    lines += [f"# {note}\n" for note in table.notes]
    if "grid" in table.extra:
        lines.extend(table.extra["grid"].csv_lines())
    else:
        lines.append(",".join(table.columns) + "\n")
        lines += [",".join(fmt(x) for x in r) + "\n" for r in table.rows]
    return "".join(lines)


def execute(cfg: dict) -> str:
    """Validate, run and render a config; raises ConfigError or numeric errors."""
    cfg = validate(cfg)
    try:
        m = from_descriptor(cfg["measure"])
    except (MeasureError, KeyError, TypeError) as exc:
        raise ConfigError(f"field measure: {exc}") from exc
    table = COMMANDS[cfg["command"]](m, cfg["parameters"])
    return render(cfg, m, table)


# ---------------------------------------------------------------- entry point


def _apply_flags(cfg, args):
    if args.measure is not None:
        try:
            cfg["measure"] = json.loads(args.measure)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"--measure:{exc.colno}: {exc.msg}") from exc
    if args.command is not None:
        cfg["command"] = args.command
    params = cfg.setdefault("parameters", {})
    scalar = cfg.get("command") in ("eigenfunction", "convergence")
    if args.alpha is not None:
        params["alpha"] = args.alpha[0] if scalar else args.alpha
    if args.k is not None:
        params["k"] = args.k[0] if scalar else args.k
    if args.out is not None:
        out = cfg.setdefault("output", {})
        out["path"] = args.out
        if args.out.endswith(".json"):
            out["format"] = "json"
        elif args.out.endswith(".csv"):
            out["format"] = "csv"
    return cfg


def build_parser():
    ap = argparse.ArgumentParser(prog="bslab", description="Weak-coupling bound states of -Delta - alpha mu in 2D.")
    ap.add_argument("--version", action="version", version=f"bslab {__version__}")
    sub = ap.add_subparsers(dest="action", required=True)
    run = sub.add_parser("run", help="run a config file and/or flag shortcuts")
    run.add_argument("config", nargs="?", help="JSON config file")
    run.add_argument("--measure", help='measure descriptor as JSON, e.g. \'{"type":"circle","r":1,"n":512}\'')
    run.add_argument("--command", choices=sorted(COMMANDS))
    run.add_argument("--alpha", type=float, nargs="+")
    run.add_argument("--k", type=float, nargs="+")
    run.add_argument("--out", help="output path (default: stdout)")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else {}
        cfg = _apply_flags(cfg, args)
        text = execute(cfg)
    except ConfigError as exc:
        print(f"bslab: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ArithmeticError, RuntimeError, ValueError) as exc:
        print(f"bslab: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    path = cfg.get("output", {}).get("path")
    if path:
        with open(path, "w", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

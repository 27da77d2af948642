"""Command-line front end.

Every subcommand writes one JSON document (or a CSV table) to ``--out`` or
standard output. Option precedence: explicit flag > ``--config`` file >
``EQONE_SEED`` environment variable (seed only) > built-in default.

Exit status: 0 success, 2 configuration error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from importlib import resources

import numpy as np

from . import __version__, faraday, harness, limits
from .errors import ConfigError, NumericError
from .faraday import OpticalMedium
from .limits import SensorParams
from .protocol import SAMPLERS, ProtocolConfig, run_campaign, system_for
from .rng import DEFAULT_SEED, SEED_ENV_VAR

log = logging.getLogger("eqone")

SCHEMA_VERSION = "1.0"
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

GLOBAL_DEFAULTS = {
    "units": "natural",
    "format": None,
    "out": "-",
    "workers": 1,
    "verbose": 0,
}

# subcommand -> option defaults (None means "not set")
COMMAND_DEFAULTS = {
    "formula": {"j": 0.5, "gamma": 1.0, "n": 1.0, "t": 1.0, "g": 1.0, "e_field": None, "t1": None},
    "simulate": {"j": 0.5, "omega": 0.0, "gamma": 1.0, "t1": None, "n": 100, "reps": 100, "g": 1.0, "sampler": "multinomial"},
    "sweep": {
        "model": "mc",
        "param": "n_spins",
        "values": "1000,3162,10000,31623,100000",
        "campaigns": 200,
        "weighted": False,
        "j": 0.5,
        "omega": 0.0,
        "gamma": 1.0,
        "t1": None,
        "n": 100,
        "reps": 100,
        "t": 1.0,
        "x": 2.0,
        "detuning": 0.0,
        "doppler_width": 0.0,
        "saturation": 1.0,
        "g": 1.0,
    },
    "faraday": {
        "gamma": 1.0,
        "x": 2.0,
        "n": 1.0,
        "t": 1.0,
        "omega": 0.0,
        "detuning": 0.0,
        "doppler_width": 0.0,
        "saturation": 1.0,
        "g": 1.0,
        "scan": None,
    },
    "optimize": {"gamma": 1.0, "n": 1.0, "t": 1.0, "detuning": 0.0, "doppler_width": 0.0, "saturation": 1.0},
    "equivalence": {"j": 0.5, "omega": 0.0, "gamma": 1.0, "t1": None, "n": 100, "reps": 100, "campaigns": 200, "g": 1.0},
}


def load_constants(path: str | None = None) -> dict:
    """CODATA constants; the packaged file unless ``path`` is given."""
    if path is None:
        text = resources.files("eqone").joinpath("data/codata2018.json").read_text()
    else:
        with open(path) as fh:
            text = fh.read()
    return json.loads(text)


def _add_globals(p: argparse.ArgumentParser) -> None:
    S = argparse.SUPPRESS
    p.add_argument("--seed", type=_seed, default=S, help=f"64-bit RNG seed (default {DEFAULT_SEED}, or ${SEED_ENV_VAR})")
    p.add_argument("--units", choices=("natural", "si"), default=S)
    p.add_argument("--config", default=S, help="JSON file of option values")
    p.add_argument("--out", default=S, help="output path ('-' for stdout)")
    p.add_argument("--format", choices=("json", "csv"), default=S)
    p.add_argument("--workers", type=int, default=S, help="worker threads; results do not depend on it")
    p.add_argument("-v", "--verbose", action="count", default=S)


def _seed(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError(f"seed must be a 64-bit unsigned integer, got {text}")
    return v


def build_parser() -> argparse.ArgumentParser:
    S = argparse.SUPPRESS
    parser = argparse.ArgumentParser(prog="eqone", description="Spin-projection-noise sensitivity toolkit.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _add_globals(parser)
    sub = parser.add_subparsers(dest="command", required=True)

    def cmd(name, help):
        p = sub.add_parser(name, help=help)
        _add_globals(p)
        return p

    def spin_args(p):
        p.add_argument("--j", default=S, help="spin quantum number, e.g. 0.5 or 3/2")
        p.add_argument("--omega", type=float, default=S, help="Larmor angular frequency")
        p.add_argument("--gamma", type=float, default=S, help="relaxation rate")
        p.add_argument("--t1", type=float, default=S, help="single-shot precession time (default 1/gamma)")
        p.add_argument("--n", type=int, default=S, help="number of spins")
        p.add_argument("--reps", type=int, default=S, help="repetitions per spin")
        p.add_argument("--g", type=float, default=S, help="Lande factor (SI conversion only)")

    def medium_args(p):
        p.add_argument("--gamma", type=float, default=S, help="natural linewidth")
        p.add_argument("--n", type=float, default=S, help="number of atoms")
        p.add_argument("--t", type=float, default=S, help="measurement time")
        p.add_argument("--detuning", type=float, default=S)
        p.add_argument("--doppler-width", dest="doppler_width", type=float, default=S)
        p.add_argument("--saturation", type=float, default=S)

    p = cmd("formula", "closed-form sensitivity limits")
    p.add_argument("--j", default=S)
    p.add_argument("--gamma", type=float, default=S)
    p.add_argument("--n", type=float, default=S)
    p.add_argument("--t", type=float, default=S)
    p.add_argument("--g", type=float, default=S)
    p.add_argument("--e-field", dest="e_field", type=float, default=S)
    p.add_argument("--t1", type=float, default=S, help="also report the repeated single-spin estimate")

    p = cmd("simulate", "one Monte Carlo campaign")
    spin_args(p)
    p.add_argument("--sampler", choices=SAMPLERS, default=S)

    p = cmd("sweep", "parameter sweep with power-law fit")
    p.add_argument("--model", choices=("mc", "faraday", "formula"), default=S)
    p.add_argument("--param", choices=harness.SWEEP_PARAMETERS, default=S)
    p.add_argument("--values", default=S, help="comma-separated, strictly increasing")
    p.add_argument("--campaigns", type=int, default=S)
    p.add_argument("--weighted", action="store_true", default=S)
    spin_args(p)
    p.add_argument("--t", type=float, default=S, help="measurement time (faraday/formula models)")
    p.add_argument("--x", type=float, default=S, help="optical depth (faraday model)")
    p.add_argument("--detuning", type=float, default=S)
    p.add_argument("--doppler-width", dest="doppler_width", type=float, default=S)
    p.add_argument("--saturation", type=float, default=S)

    p = cmd("faraday", "Faraday-rotation magnetometer point or depth scan")
    medium_args(p)
    p.add_argument("--x", type=float, default=S, help="optical depth l/l0")
    p.add_argument("--omega", type=float, default=S)
    p.add_argument("--g", type=float, default=S)
    p.add_argument("--scan", default=S, help="depth scan 'start:stop:points' (CSV output)")

    p = cmd("optimize", "optimal optical depth")
    medium_args(p)

    p = cmd("equivalence", "cross-model equivalence report")
    spin_args(p)
    p.add_argument("--campaigns", type=int, default=S)
    return parser


def resolve_options(ns: argparse.Namespace, environ=os.environ) -> dict:
    given = vars(ns).copy()
    command = given.pop("command")
    file_opts: dict = {}
    if "config" in given:
        try:
            with open(given["config"]) as fh:
                file_opts = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {given['config']!r}: {exc}") from exc
        if not isinstance(file_opts, dict):
            raise ConfigError("config file must contain a JSON object")
    allowed = set(GLOBAL_DEFAULTS) | set(COMMAND_DEFAULTS[command]) | {"seed", "constants"}
    unknown = set(file_opts) - allowed
    if unknown:
        raise ConfigError(f"unknown config keys for {command!r}: {sorted(unknown)}")

    opts = {**GLOBAL_DEFAULTS, **COMMAND_DEFAULTS[command]}
    seed = DEFAULT_SEED
    if SEED_ENV_VAR in environ:
        try:
            seed = _seed(environ[SEED_ENV_VAR])
        except (ValueError, argparse.ArgumentTypeError) as exc:
            raise ConfigError(f"invalid {SEED_ENV_VAR}: {exc}") from exc
    opts["seed"] = seed
    opts.update(file_opts)
    opts.update({k: v for k, v in given.items() if k != "config"})
    opts["command"] = command

    constants = load_constants()
    constants.update(opts.get("constants") or {})
    if opts["units"] == "si":
        for name in ("hbar", "bohr_magneton"):
            v = constants.get(name)
            if not (isinstance(v, (int, float)) and v > 0):
                raise ConfigError(f"SI mode needs a positive constant {name!r}, got {v!r}")
    opts["constants"] = constants
    return opts


def _clean(obj):
    """Make ``obj`` strict-JSON serializable: non-finite floats become null."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def _envelope(kind: str, opts: dict, **body) -> dict:
    return {"schema": f"eqone/{kind}", "schema_version": SCHEMA_VERSION, "units": opts["units"], **body}


def _field_scale(opts: dict) -> float:
    """Multiplier taking a Larmor frequency to a field (1 in natural units)."""
    if opts["units"] == "natural":
        return 1.0
    c = opts["constants"]
    return c["hbar"] / (opts["g"] * c["bohr_magneton"])


def _protocol_config(opts: dict) -> ProtocolConfig:
    return ProtocolConfig(
        j=opts["j"],
        omega=float(opts["omega"]),
        gamma=float(opts["gamma"]),
        t1=opts["t1"],
        n_spins=opts["n"],
        n_reps=opts["reps"],
        seed=opts["seed"],
    )


def _medium(opts: dict, x: float = faraday.REFERENCE_DEPTH) -> OpticalMedium:
    return OpticalMedium(
        gamma=float(opts["gamma"]),
        optical_depth=float(x),
        n_atoms=float(opts["n"]),
        doppler_width=float(opts["doppler_width"]),
        saturation=float(opts["saturation"]),
        detuning=float(opts["detuning"]),
    )


def cmd_formula(opts: dict):
    hbar, mu0 = 1.0, 1.0
    if opts["units"] == "si":
        hbar, mu0 = opts["constants"]["hbar"], opts["constants"]["bohr_magneton"]
    p = SensorParams(
        j=opts["j"],
        gamma=float(opts["gamma"]),
        n=float(opts["n"]),
        t=float(opts["t"]),
        g=float(opts["g"]),
        mu0=mu0,
        hbar=hbar,
        e_field=opts["e_field"],
    )
    db = limits.delta_b(p)
    out = {
        "inputs": {"j": p.j.j, "gamma": p.gamma, "n": p.n, "t": p.t, "g": p.g, "e_field": p.e_field, "hbar": hbar, "mu0": mu0},
        "delta_b": db,
        "delta_d": limits.delta_d(p) if p.e_field is not None else None,
        "snr_single_at_delta_b": limits.snr_single(p, db),
        "snr_ensemble_at_delta_b": limits.snr_ensemble(p, db),
    }
    if opts["t1"] is not None:
        out["delta_b_single_spin"] = limits.delta_b_single_spin(p, float(opts["t1"]))
    return _envelope("formula", opts, **out)


def cmd_simulate(opts: dict):
    cfg = _protocol_config(opts)
    res = run_campaign(system_for(cfg), cfg, workers=opts["workers"], sampler=opts["sampler"])
    scale = _field_scale(opts)
    return _envelope(
        "campaign",
        opts,
        config=cfg.to_dict(),
        result=res.to_dict(),
        field={"b_hat": res.omega_hat * scale, "sigma_b": res.sigma_omega * scale},
    )


def cmd_sweep(opts: dict):
    try:
        values = tuple(float(v) for v in str(opts["values"]).split(",") if v.strip())
    except ValueError as exc:
        raise ConfigError(f"bad --values: {exc}") from exc
    model = opts["model"]
    if model == "mc":
        base = _protocol_config(opts)
    elif model == "faraday":
        base = _medium(opts, opts["x"])
    else:
        base = SensorParams(j=opts["j"], gamma=float(opts["gamma"]), n=float(opts["n"]), t=float(opts["t"]))
    spec = harness.SweepSpec(
        swept_parameter=opts["param"],
        values=values,
        base_config=base,
        campaigns_per_point=opts["campaigns"],
        seed=opts["seed"],
        t_total=float(opts["t"]),
    )
    table = harness.run_sweep(spec, workers=opts["workers"])
    scale = _field_scale(opts)
    if scale != 1.0:
        table = harness.SweepResult(
            table.swept_parameter,
            table.model,
            tuple(harness.SweepRow(r.param, r.delta_b * scale, r.delta_b_err * scale, r.error) for r in table.rows),
        )
    if opts["format"] == "csv" or opts["format"] is None:
        return table.to_csv()
    fit = None
    try:
        fit = harness.fit_power_law(table, weighted=opts["weighted"]).to_dict()
    except ConfigError as exc:
        log.warning("no power-law fit: %s", exc)
    return _envelope("sweep", opts, seed=opts["seed"], campaigns_per_point=opts["campaigns"], **table.to_dict(), fit=fit)


def _parse_scan(text: str) -> np.ndarray:
    try:
        start, stop, num = text.split(":")
        xs = np.linspace(float(start), float(stop), int(num))
    except ValueError as exc:
        raise ConfigError(f"--scan must be 'start:stop:points', got {text!r}") from exc
    if xs.size < 1 or np.any(xs < 0):
        raise ConfigError("scan depths must be non-negative")
    return xs


def cmd_faraday(opts: dict):
    t = float(opts["t"])
    scale = _field_scale(opts)
    if opts["scan"] is not None:
        m = _medium(opts, opts["x"])
        rows = faraday.depth_scan(m, t, _parse_scan(opts["scan"]))
        if opts["format"] == "json":
            return _envelope("faraday-scan", opts, rows=rows)
        lines = [",".join(harness.SCAN_CSV_COLUMNS)]
        for r in rows:
            lines.append(f"{r['x']!r},{r['snr']!r},{r['delta_b_scaled'] * scale!r}")
        return "\n".join(lines) + "\n"
    m = _medium(opts, opts["x"])
    res = faraday.magnetometer_sensitivity(m, t, float(opts["omega"]))
    body = res.to_dict()
    body["delta_b"] = res.delta_b_scaled * scale
    return _envelope("faraday", opts, medium=m.to_dict(), t=t, result=body)


def cmd_optimize(opts: dict):
    m = _medium(opts)
    x = faraday.optimize_optical_depth(m, float(opts["t"]))
    return _envelope("optimize", opts, optimal_optical_depth=x, formatted=f"{x:.3f}")


def cmd_equivalence(opts: dict):
    spin = _protocol_config(opts)
    optical = OpticalMedium(gamma=spin.gamma, n_atoms=spin.n_spins)
    report = harness.equivalence_report(spin, optical, n_campaigns=opts["campaigns"], workers=opts["workers"])
    report["units"] = opts["units"]
    return report


COMMANDS = {
    "formula": cmd_formula,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "faraday": cmd_faraday,
    "optimize": cmd_optimize,
    "equivalence": cmd_equivalence,
}


def _emit(payload, path: str) -> None:
    text = payload if isinstance(payload, str) else json.dumps(_clean(payload), indent=2, allow_nan=False) + "\n"
    if path == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        opts = resolve_options(ns)
        logging.basicConfig(level=logging.WARNING - 10 * min(int(opts["verbose"]), 2), format="%(levelname)s: %(message)s")
        if int(opts["workers"]) < 1:
            raise ConfigError("--workers must be at least 1")
        payload = COMMANDS[opts["command"]](opts)
        if opts["format"] == "csv" and not isinstance(payload, str):
            raise ConfigError(f"{opts['command']!r} produces JSON only")
        _emit(payload, opts["out"])
    except ConfigError as exc:
        print(f"eqone: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"eqone: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

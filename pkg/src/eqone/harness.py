"""Parameter sweeps, log-log power-law fits and the cross-model comparison."""

from __future__ import annotations

import csv
import io
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import faraday, limits
from .angmom import SpinQuantumNumber
from .errors import ConfigError, NumericError
from .faraday import OpticalMedium
from .limits import SensorParams
from .protocol import ProtocolConfig, sensitivity_mc, system_for
from .rng import DEFAULT_SEED

log = logging.getLogger(__name__)

SWEEP_PARAMETERS = ("n_spins", "t_total", "gamma", "spin_j", "optical_depth", "detuning")
SWEEP_CSV_COLUMNS = ("param", "delta_b", "delta_b_err")
SCAN_CSV_COLUMNS = ("x", "snr", "delta_b_scaled")
CSV_SCHEMA_VERSION = "1"
REPORT_SCHEMA_VERSION = "1.0"

# (N, Gamma, T) multipliers applied to the caller's matched configuration
BUILTIN_TRIPLE_SCALES = ((1, 1, 1), (4, 1, 1), (1, 4, 1), (1, 1, 4), (2, 2, 2))
RATIO_STABILITY = 0.20
MC_FORMULA_BAND = (0.5, 2.0)


@dataclass(frozen=True)
class SweepSpec:
    swept_parameter: str
    values: tuple[float, ...]
    base_config: ProtocolConfig | OpticalMedium | SensorParams
    campaigns_per_point: int = 200
    seed: int = DEFAULT_SEED
    t_total: float = 1.0  # measurement time for the optical model only

    def __post_init__(self):
        if self.swept_parameter not in SWEEP_PARAMETERS:
            raise ConfigError(f"unknown swept parameter {self.swept_parameter!r}; expected one of {SWEEP_PARAMETERS}")
        vals = tuple(float(v) for v in self.values)
        if not vals:
            raise ConfigError("sweep needs at least one value")
        if any(not (math.isfinite(v) and v > 0) for v in vals):
            raise ConfigError("sweep values must be finite and positive")
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise ConfigError("sweep values must be strictly increasing")
        object.__setattr__(self, "values", vals)
        if not isinstance(self.base_config, (ProtocolConfig, OpticalMedium, SensorParams)):
            raise ConfigError(f"unsupported base_config type {type(self.base_config).__name__}")

    @property
    def model(self) -> str:
        if isinstance(self.base_config, ProtocolConfig):
            return "mc"
        if isinstance(self.base_config, OpticalMedium):
            return "faraday"
        return "formula"


@dataclass(frozen=True)
class SweepRow:
    param: float
    delta_b: float
    delta_b_err: float
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass(frozen=True)
class SweepResult:
    swept_parameter: str
    model: str
    rows: tuple[SweepRow, ...]

    def successful(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        ok = [r for r in self.rows if r.ok]
        return (
            np.array([r.param for r in ok], dtype=float),
            np.array([r.delta_b for r in ok], dtype=float),
            np.array([r.delta_b_err for r in ok], dtype=float),
        )

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SWEEP_CSV_COLUMNS)
        for r in self.rows:
            if r.ok:
                w.writerow([repr(r.param), repr(r.delta_b), repr(r.delta_b_err)])
            else:
                w.writerow([repr(r.param), "nan", "nan"])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "swept_parameter": self.swept_parameter,
            "model": self.model,
            "rows": [
                {
                    "param": r.param,
                    "delta_b": r.delta_b if r.ok else None,
                    "delta_b_err": r.delta_b_err if r.ok else None,
                    "error": r.error,
                }
                for r in self.rows
            ],
        }


def _integer(value: float, what: str) -> int:
    n = round(value)
    if n < 1 or abs(n - value) > 1e-9 * max(1.0, abs(value)):
        raise ConfigError(f"{what} must be a positive integer, got {value!r}")
    return int(n)


def configure_point(spec: SweepSpec, value: float):
    """Return ``base_config`` with the swept parameter set to ``value``."""
    base, p = spec.base_config, spec.swept_parameter
    if isinstance(base, ProtocolConfig):
        if p == "n_spins":
            return replace(base, n_spins=_integer(value, "n_spins"))
        if p == "t_total":
            return replace(base, n_reps=_integer(value / base.t1, "t_total / t1"))
        if p == "gamma":
            # total time held fixed; t1 tracks 1/gamma
            t1 = base.t1 * base.gamma / value
            return replace(base, gamma=value, t1=t1, n_reps=_integer(base.total_time / t1, "t_total / t1"))
        if p == "spin_j":
            return replace(base, j=SpinQuantumNumber.from_value(value))
    elif isinstance(base, OpticalMedium):
        mapping = {"n_spins": "n_atoms", "gamma": "gamma", "optical_depth": "optical_depth", "detuning": "detuning"}
        if p in mapping:
            return base.with_(**{mapping[p]: value})
        if p == "t_total":
            return base
    else:
        mapping = {"n_spins": "n", "t_total": "t", "gamma": "gamma", "spin_j": "j"}
        if p in mapping:
            return base.with_(**{mapping[p]: value if p != "spin_j" else SpinQuantumNumber.from_value(value)})
    raise ConfigError(f"parameter {p!r} cannot be swept for the {spec.model} model")


def _run_point(spec: SweepSpec, index: int, value: float, workers: int) -> SweepRow:
    try:
        cfg = configure_point(spec, value)
        if spec.model == "mc":
            cfg = replace(cfg, seed=spec.seed)
            est = sensitivity_mc(system_for(cfg), cfg, spec.campaigns_per_point, key=(index,), workers=workers)
            return SweepRow(value, est.delta_omega, est.delta_omega_err)
        if spec.model == "faraday":
            t = value if spec.swept_parameter == "t_total" else spec.t_total
            return SweepRow(value, faraday.magnetometer_sensitivity(cfg, t).delta_b_scaled, 0.0)
        return SweepRow(value, limits.delta_b(cfg), 0.0)
    except (ConfigError, NumericError) as exc:
        log.warning("sweep point %s=%r failed: %s", spec.swept_parameter, value, exc)
        return SweepRow(value, math.nan, math.nan, error=str(exc))


def run_sweep(spec: SweepSpec, workers: int = 1) -> SweepResult:
    """Evaluate the sensitivity at each sweep value.

    Point ``i`` draws from streams keyed ``(seed, i, ...)``; a failed point is
    recorded with its error message instead of aborting the sweep.
    """
    if workers > 1 and spec.model == "mc":
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(lambda iv: _run_point(spec, iv[0], iv[1], 1), enumerate(spec.values)))
    else:
        rows = [_run_point(spec, i, v, 1) for i, v in enumerate(spec.values)]
    return SweepResult(spec.swept_parameter, spec.model, tuple(rows))


@dataclass(frozen=True)
class PowerLawFit:
    exponent: float
    exponent_stderr: float
    log_prefactor: float
    r_squared: float
    n_points: int = field(default=0)

    def to_dict(self) -> dict:
        return {
            "exponent": self.exponent,
            "exponent_stderr": self.exponent_stderr,
            "log_prefactor": self.log_prefactor,
            "r_squared": self.r_squared,
            "n_points": self.n_points,
        }


def fit_power_law_xy(x, y, y_err=None, weighted: bool = False) -> PowerLawFit:
    """Least-squares fit of ``log y = log_prefactor + exponent * log x``.

    With ``weighted=True`` each point is weighted by ``(y / y_err)**2``, the
    inverse variance of ``log y``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ConfigError("x and y must be 1-D arrays of equal length")
    if x.size < 4:
        raise ConfigError(f"power-law fit needs at least 4 points, got {x.size}")
    if np.any(~np.isfinite(x)) or np.any(~np.isfinite(y)) or np.any(x <= 0) or np.any(y <= 0):
        raise ConfigError("power-law fit requires finite, strictly positive data")
    lx, ly = np.log(x), np.log(y)
    if weighted:
        if y_err is None:
            raise ConfigError("weighted fit needs y_err")
        y_err = np.asarray(y_err, dtype=float)
        if np.any(~(y_err > 0)):
            raise ConfigError("weighted fit needs strictly positive y_err")
        w = (y / y_err) ** 2
    else:
        w = np.ones_like(lx)
    design = np.column_stack([np.ones_like(lx), lx])
    sw = np.sqrt(w)
    coef, *_ = np.linalg.lstsq(design * sw[:, None], ly * sw, rcond=None)
    resid = ly - design @ coef
    rss = float(np.sum(w * resid**2))
    dof = x.size - 2
    cov = np.linalg.inv(design.T @ (design * w[:, None])) * (rss / dof)
    ybar = np.sum(w * ly) / np.sum(w)
    tss = float(np.sum(w * (ly - ybar) ** 2))
    r2 = 1.0 if tss == 0 else 1.0 - rss / tss
    return PowerLawFit(
        exponent=float(coef[1]),
        exponent_stderr=float(math.sqrt(max(cov[1, 1], 0.0))),
        log_prefactor=float(coef[0]),
        r_squared=float(min(1.0, max(0.0, r2))),
        n_points=int(x.size),
    )


def fit_power_law(table: SweepResult, weighted: bool = False) -> PowerLawFit:
    """Fit the successful rows of a sweep; failed rows are skipped."""
    x, y, err = table.successful()
    return fit_power_law_xy(x, y, err if weighted else None, weighted=weighted)


def _scaled_pair(spin: ProtocolConfig, optical: OpticalMedium, t: float, scales) -> tuple[ProtocolConfig, OpticalMedium, float]:
    a_n, a_g, a_t = scales
    # phi = omega * t1 held fixed so the estimator stays on the same branch
    spin_s = replace(
        spin,
        n_spins=spin.n_spins * a_n,
        gamma=spin.gamma * a_g,
        t1=spin.t1 / a_g,
        omega=spin.omega * a_g,
        n_reps=spin.n_reps * a_t * a_g,
    )
    optical_s = optical.with_(
        n_atoms=optical.n_atoms * a_n,
        gamma=optical.gamma * a_g,
        doppler_width=optical.doppler_width * a_g,
        detuning=optical.detuning * a_g,
    )
    return spin_s, optical_s, t * a_t


def _check_matched(spin: ProtocolConfig, optical: OpticalMedium) -> None:
    if optical.n_atoms != spin.n_spins:
        raise ConfigError(f"N mismatch: spin n_spins={spin.n_spins}, optical n_atoms={optical.n_atoms}")
    if not math.isclose(optical.gamma, spin.gamma, rel_tol=1e-12):
        raise ConfigError(f"Gamma mismatch: spin gamma={spin.gamma}, optical gamma={optical.gamma}")


def equivalence_report(
    spin_cfg: ProtocolConfig,
    optical_cfg: OpticalMedium,
    n_campaigns: int = 200,
    workers: int = 1,
) -> dict:
    """Compare Monte Carlo, Faraday and closed-form sensitivities.

    All three are evaluated for the caller's matched (N, Gamma, T) and for the
    built-in rescalings in ``BUILTIN_TRIPLE_SCALES``. T is the spin
    protocol's total precession time. Ratio stability means max/min of each
    pairwise ratio across the triples is at most ``1 + RATIO_STABILITY``.
    """
    _check_matched(spin_cfg, optical_cfg)
    t_total = spin_cfg.total_time
    rows = []
    for i, scales in enumerate(BUILTIN_TRIPLE_SCALES):
        spin, optical, t = _scaled_pair(spin_cfg, optical_cfg, t_total, scales)
        est = sensitivity_mc(system_for(spin), spin, n_campaigns, key=(i,), workers=workers)
        params = SensorParams(j=spin.j, gamma=spin.gamma, n=spin.n_spins, t=spin.total_time)
        db_formula = limits.delta_b(params)
        db_faraday = faraday.magnetometer_sensitivity(optical, t).delta_b_optimal
        rows.append(
            {
                "n": spin.n_spins,
                "gamma": spin.gamma,
                "t": spin.total_time,
                "delta_b_mc": est.delta_omega,
                "delta_b_mc_err": est.delta_omega_err,
                "delta_b_faraday": db_faraday,
                "delta_b_formula": db_formula,
                "ratio_mc_formula": est.delta_omega / db_formula,
                "ratio_faraday_formula": db_faraday / db_formula,
                "ratio_mc_faraday": est.delta_omega / db_faraday,
            }
        )
    stability = {}
    for key in ("ratio_mc_formula", "ratio_faraday_formula", "ratio_mc_faraday"):
        vals = [r[key] for r in rows]
        spread = max(vals) / min(vals)
        stability[key] = {"max_over_min": spread, "stable": spread <= 1.0 + RATIO_STABILITY}
    lo, hi = MC_FORMULA_BAND
    return {
        "schema": "eqone/equivalence",
        "schema_version": REPORT_SCHEMA_VERSION,
        "spin_j": spin_cfg.j.j,
        "n_campaigns": n_campaigns,
        "seed": spin_cfg.seed,
        "triples": rows,
        "stability": stability,
        "ratios_stable": all(s["stable"] for s in stability.values()),
        "mc_formula_within_band": all(lo <= r["ratio_mc_formula"] <= hi for r in rows),
    }

"""Closed-form spin-projection-noise sensitivity limits.

All prefactors of order unity are taken as exactly 1; hbar and the magnetic
moment unit are explicit inputs so natural-unit and SI evaluations share one
code path.
"""

from __future__ import annotations

import math
import numbers
from dataclasses import dataclass, replace

from .angmom import SpinQuantumNumber
from .errors import ConfigError


@dataclass(frozen=True)
class SensorParams:
    j: SpinQuantumNumber
    gamma: float
    n: float
    t: float
    g: float = 1.0
    mu0: float = 1.0
    hbar: float = 1.0
    e_field: float | None = None

    def __post_init__(self):
        if not isinstance(self.j, SpinQuantumNumber):
            object.__setattr__(self, "j", SpinQuantumNumber.from_value(self.j))
        if self.j.two_j < 1:
            raise ConfigError("sensor spin must be at least 1/2")
        for name in ("gamma", "n", "t", "g", "mu0", "hbar"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, numbers.Real) or not (math.isfinite(v) and v > 0):
                raise ConfigError(f"{name} must be finite and positive, got {v!r}")
        if self.e_field is not None and not (math.isfinite(self.e_field) and self.e_field > 0):
            raise ConfigError(f"e_field must be finite and positive, got {self.e_field!r}")

    def with_(self, **changes) -> "SensorParams":
        return replace(self, **changes)


def _rate_factor(p: SensorParams) -> float:
    return math.sqrt(p.gamma / (p.n * p.t))


def delta_b(p: SensorParams) -> float:
    """Field uncertainty  hbar / (g mu0 sqrt(2J)) * sqrt(Gamma / (N T))."""
    return p.hbar / (p.g * p.mu0 * math.sqrt(p.j.two_j)) * _rate_factor(p)


def delta_d(p: SensorParams) -> float:
    """EDM uncertainty  hbar sqrt(J/2) / E * sqrt(Gamma / (N T))."""
    if p.e_field is None:
        raise ConfigError("delta_d requires e_field")
    return p.hbar * math.sqrt(p.j.j / 2) / p.e_field * _rate_factor(p)


def delta_b_single_spin(p: SensorParams, t1: float) -> float:
    """Repeated single-spin estimate  hbar / (g mu0) / t1 * sqrt(t1 / T).

    Independent of ``p.n`` and ``p.j``; divide by sqrt(N) for an ensemble.
    """
    if not (math.isfinite(t1) and t1 > 0):
        raise ConfigError(f"t1 must be finite and positive, got {t1!r}")
    if t1 > p.t:
        raise ConfigError(f"t1={t1!r} exceeds the total time t={p.t!r}")
    return p.hbar / (p.g * p.mu0) / t1 * math.sqrt(t1 / p.t)


def snr_single(p: SensorParams, b: float) -> float:
    """Single-shot signal-to-noise  (g mu0 b / hbar) sqrt(2J) / Gamma."""
    return p.g * p.mu0 * b / p.hbar * math.sqrt(p.j.two_j) / p.gamma


def snr_ensemble(p: SensorParams, b: float) -> float:
    """N spins, T / (1/Gamma) repetitions: ``snr_single * sqrt(N T Gamma)``."""
    return snr_single(p, b) * math.sqrt(p.n * p.t * p.gamma)


def min_detectable_field(p: SensorParams) -> float:
    """Field at which :func:`snr_ensemble` equals one."""
    return 1.0 / snr_ensemble(p, 1.0)

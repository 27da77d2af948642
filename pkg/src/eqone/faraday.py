"""Shot-noise-limited linear Faraday-rotation (Macaluso-Corbino) magnetometer.

Natural units: ``omega`` stands for g mu0 B / hbar, and sensitivities are
returned as the equivalent Larmor-frequency uncertainty (multiply by
hbar / (g mu0) for a field).

Photon model: at unit saturation the sample absorbs about N Gamma photons per
unit time, and at the optimal optical depth x = 2 the transmitted count is of
the same order, N Gamma T. The incident flux is held fixed while the optical
depth varies, so the transmitted count is N Gamma T exp(-(x - 2)).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

from .errors import ConfigError

OPTIMAL_DEPTH_BRACKET = (1e-6, 50.0)
LINEAR_WARN = 0.1
LINEAR_LIMIT = 0.3
REFERENCE_DEPTH = 2.0

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


class OutOfLinearRegimeError(ConfigError):
    """Field too large for the rotation to be linear in B."""


class LinearityWarning(UserWarning):
    pass


@dataclass(frozen=True)
class OpticalMedium:
    gamma: float
    optical_depth: float = REFERENCE_DEPTH
    n_atoms: float = 1.0
    doppler_width: float = 0.0
    saturation: float = 1.0
    detuning: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.gamma) and self.gamma > 0):
            raise ConfigError(f"gamma must be finite and positive, got {self.gamma!r}")
        if not (math.isfinite(self.optical_depth) and self.optical_depth >= 0):
            raise ConfigError(f"optical_depth must be finite and >= 0, got {self.optical_depth!r}")
        if not (math.isfinite(self.n_atoms) and self.n_atoms >= 0):
            raise ConfigError(f"n_atoms must be finite and >= 0, got {self.n_atoms!r}")
        if not (math.isfinite(self.doppler_width) and self.doppler_width >= 0):
            raise ConfigError(f"doppler_width must be finite and >= 0, got {self.doppler_width!r}")
        if not (math.isfinite(self.saturation) and self.saturation >= 0):
            raise ConfigError(f"saturation must be finite and >= 0, got {self.saturation!r}")
        if self.saturation > 1.0:
            # bleaching: rotation no longer grows with intensity, not modeled
            raise ConfigError(f"saturation {self.saturation!r} > 1 is outside the low-intensity model")
        if not math.isfinite(self.detuning):
            raise ConfigError(f"detuning must be finite, got {self.detuning!r}")

    def with_(self, **changes) -> "OpticalMedium":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return {
            "gamma": self.gamma,
            "optical_depth": self.optical_depth,
            "n_atoms": self.n_atoms,
            "doppler_width": self.doppler_width,
            "saturation": self.saturation,
            "detuning": self.detuning,
        }


@dataclass(frozen=True)
class FaradayResult:
    rotation_angle: float
    n_photons: float
    delta_phi: float
    delta_b_scaled: float
    delta_b_optimal: float

    @property
    def noise_infinite(self) -> bool:
        return math.isinf(self.delta_phi)

    def to_dict(self) -> dict:
        def enc(v):
            return v if math.isfinite(v) else None

        return {
            "rotation_angle": self.rotation_angle,
            "n_photons": self.n_photons,
            "delta_phi": enc(self.delta_phi),
            "delta_phi_infinite": self.noise_infinite,
            "delta_b_scaled": enc(self.delta_b_scaled),
            "delta_b_optimal": enc(self.delta_b_optimal),
        }


def rotation_angle(m: OpticalMedium, omega: float) -> float:
    """Resonant small-field rotation (omega / Gamma) * (l / l0)."""
    ratio = omega / m.gamma
    if abs(ratio) > LINEAR_LIMIT:
        raise OutOfLinearRegimeError(
            f"|omega/gamma| = {abs(ratio):.3g} exceeds {LINEAR_LIMIT}; rotation is no longer linear in the field"
        )
    if abs(ratio) > LINEAR_WARN:
        warnings.warn(f"|omega/gamma| = {abs(ratio):.3g} is near the edge of the linear regime", LinearityWarning, stacklevel=2)
    return ratio * m.optical_depth


def photon_budget(m: OpticalMedium, t: float) -> float:
    """Transmitted photons at x = 2: N * Gamma * t, scaled by the saturation parameter."""
    if not (math.isfinite(t) and t > 0):
        raise ConfigError(f"t must be finite and positive, got {t!r}")
    return m.n_atoms * m.gamma * t * m.saturation


def transmitted_photons(m: OpticalMedium, t: float, optical_depth: float | None = None) -> float:
    x = m.optical_depth if optical_depth is None else optical_depth
    return photon_budget(m, t) * math.exp(REFERENCE_DEPTH - x)


def polarimeter_noise(n_photons: float) -> float:
    """Ideal-polarimeter angle noise 1 / (2 sqrt(N_phot)); infinite with no photons."""
    if not n_photons > 0:
        return math.inf
    return 1.0 / (2.0 * math.sqrt(n_photons))


def detuned_snr_relative(delta_over_gamma: float) -> float:
    """SNR relative to resonance when detuned by ``delta_over_gamma`` linewidths.

    Rotation falls as 1/(1 + d^2) while the bleaching-limited photon rate grows
    as (1 + d^2), so shot-noise-limited SNR goes as 1/sqrt(1 + d^2).
    """
    if not delta_over_gamma >= 0:
        raise ConfigError(f"delta_over_gamma must be >= 0, got {delta_over_gamma!r}")
    if math.isinf(delta_over_gamma):
        return 0.0
    return 1.0 / math.hypot(1.0, delta_over_gamma)


def doppler_penalty(gamma: float, gamma_d: float) -> float:
    """Peak-rotation reduction factor min(1, Gamma / Gamma_D)."""
    if not (gamma > 0 and gamma_d > 0):
        raise ConfigError(f"rates must be positive, got gamma={gamma!r}, gamma_d={gamma_d!r}")
    return min(1.0, gamma / gamma_d)


def _knob_factor(m: OpticalMedium) -> float:
    f = detuned_snr_relative(abs(m.detuning) / m.gamma)
    if m.doppler_width > 0:
        f *= doppler_penalty(m.gamma, m.doppler_width)
    return f


def delta_b_at_depth(m: OpticalMedium, t: float, x: float) -> float:
    """Larmor-frequency uncertainty at optical depth ``x``; infinite if x = 0."""
    dphi = polarimeter_noise(transmitted_photons(m, t, x))
    slope = x / m.gamma * _knob_factor(m)
    if slope == 0 or math.isinf(dphi):
        return math.inf
    return dphi / slope


def magnetometer_sensitivity(m: OpticalMedium, t: float, omega: float = 0.0) -> FaradayResult:
    """Model chain rotation -> transmitted photons -> angle noise -> field noise."""
    n_ph = transmitted_photons(m, t)
    return FaradayResult(
        rotation_angle=rotation_angle(m, omega),
        n_photons=n_ph,
        delta_phi=polarimeter_noise(n_ph),
        delta_b_scaled=delta_b_at_depth(m, t, m.optical_depth),
        delta_b_optimal=delta_b_at_depth(m, t, REFERENCE_DEPTH),
    )


def golden_section_minimize(f, lo: float, hi: float, tol: float = 1e-10, max_iter: int = 500) -> float:
    """Minimize a unimodal ``f`` on [lo, hi]; returns the bracket midpoint."""
    if not lo < hi:
        raise ConfigError(f"empty bracket [{lo}, {hi}]")
    a, b = lo, hi
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= tol * max(1.0, abs(a) + abs(b)):
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def snr_per_unit_field(m: OpticalMedium, t: float, x: float) -> float:
    db = delta_b_at_depth(m, t, x)
    return 0.0 if math.isinf(db) else 1.0 / db


def optimize_optical_depth(m: OpticalMedium, t: float = 1.0, bracket=OPTIMAL_DEPTH_BRACKET) -> float:
    """Optical depth maximizing the single-pass SNR (analytically x = 2)."""
    if photon_budget(m, t) <= 0:
        raise ConfigError("no photons: optical depth cannot be optimized")
    # log keeps the objective well-scaled for any (N, Gamma, T)
    return golden_section_minimize(lambda x: math.log(delta_b_at_depth(m, t, x)), *bracket)


def depth_scan(m: OpticalMedium, t: float, depths) -> list[dict]:
    """Rows of (x, snr, delta_b_scaled) for a sensitivity-versus-depth curve."""
    rows = []
    for x in depths:
        db = delta_b_at_depth(m, t, float(x))
        rows.append({"x": float(x), "snr": 0.0 if math.isinf(db) else 1.0 / db, "delta_b_scaled": db})
    return rows

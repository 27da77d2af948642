"""Monte Carlo of the pump-precession-probe magnetometer.

Each shot prepares |J,J>_x, precesses about z by phi = omega * t1 and
projectively measures Jy. Natural units are used throughout (hbar = g mu0 = 1,
so the field B and the Larmor frequency omega coincide).

Shots are grouped into fixed-size blocks. Block ``b`` of a campaign with
stream key ``key`` draws from ``rng.stream(seed, *key, b)``, and blocks are
reduced to integer outcome counts, so results do not depend on how many
workers process the blocks.
"""

from __future__ import annotations

import logging
import math
import warnings
from functools import lru_cache
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import rng as _rng
from .angmom import (
    SpinQuantumNumber,
    SpinSystem,
    build_spin_system,
    eigenstates,
    evolve,
    max_projection_state,
)
from .errors import ConfigError

log = logging.getLogger(__name__)

BLOCK_SHOTS = 1 << 20
BOOTSTRAP_RESAMPLES = 200
SAMPLERS = ("multinomial", "shots")

# spawn-key tags separating campaign streams from bootstrap streams
_CAMPAIGN_TAG = 0
_BOOTSTRAP_TAG = 1


class SaturatedEstimatorWarning(RuntimeWarning):
    """Mean projection hit |<Jy>| = J, so arcsin estimator is at its branch edge."""


@dataclass(frozen=True)
class ProtocolConfig:
    j: SpinQuantumNumber
    omega: float
    gamma: float
    n_spins: int
    n_reps: int
    t1: float | None = None
    seed: int = _rng.DEFAULT_SEED

    def __post_init__(self):
        if not isinstance(self.j, SpinQuantumNumber):
            object.__setattr__(self, "j", SpinQuantumNumber.from_value(self.j))
        if self.j.two_j < 1:
            raise ConfigError("protocol requires J >= 1/2")
        if not (math.isfinite(self.gamma) and self.gamma > 0):
            raise ConfigError(f"gamma must be finite and positive, got {self.gamma!r}")
        if self.t1 is None:
            object.__setattr__(self, "t1", 1.0 / self.gamma)
        if not (math.isfinite(self.t1) and self.t1 > 0):
            raise ConfigError(f"t1 must be finite and positive, got {self.t1!r}")
        if not math.isfinite(self.omega):
            raise ConfigError(f"omega must be finite, got {self.omega!r}")
        if abs(self.omega * self.t1) >= math.pi / 2:
            raise ConfigError(
                f"|omega * t1| = {abs(self.omega * self.t1):.4g} must be below pi/2 for the arcsin estimator"
            )
        for name in ("n_spins", "n_reps"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ConfigError(f"{name} must be a positive integer, got {v!r}")
            object.__setattr__(self, name, int(v))
        if not (0 <= int(self.seed) < 2**64):
            raise ConfigError(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")

    @property
    def phi(self) -> float:
        return self.omega * self.t1

    @property
    def shots(self) -> int:
        return self.n_spins * self.n_reps

    @property
    def total_time(self) -> float:
        return self.n_reps * self.t1

    def to_dict(self) -> dict:
        d = asdict(self)
        d["j"] = self.j.j
        return d


@dataclass(frozen=True)
class CampaignResult:
    mean_jy: float
    variance: float
    omega_hat: float
    sigma_omega: float
    shots: int
    saturated: bool
    counts: tuple[int, ...] = field(default=(), repr=False, compare=True)

    def to_dict(self) -> dict:
        sigma = self.sigma_omega if math.isfinite(self.sigma_omega) else None
        return {
            "mean_jy": self.mean_jy,
            "variance": self.variance,
            "omega_hat": self.omega_hat,
            "sigma_omega": sigma,
            "shots": self.shots,
            "saturated": self.saturated,
        }


def born_probabilities(system: SpinSystem, phi: float) -> tuple[np.ndarray, np.ndarray]:
    """Outcome values m (descending) and probabilities of a Jy measurement.

    The state is |J,J>_x rotated about z by ``phi``.
    """
    psi = evolve(max_projection_state(system, (1.0, 0.0, 0.0)), system.jz, phi)
    w, v = eigenstates(system, (0.0, 1.0, 0.0))
    probs = np.abs(v.conj().T @ psi.amplitudes) ** 2
    probs = probs / probs.sum()
    m = np.round(2 * w) / 2
    return m, probs


@lru_cache(maxsize=256)
def _cached_probs(two_j: int, phi: float) -> np.ndarray:
    _, probs = born_probabilities(build_spin_system(SpinQuantumNumber(two_j)), phi)
    probs.setflags(write=False)
    return probs


def sample_shots(system: SpinSystem, config: ProtocolConfig, gen: np.random.Generator, size: int) -> np.ndarray:
    """Draw ``size`` independent measured m-values by inverse-CDF sampling."""
    probs = _cached_probs(system.j.two_j, config.phi)
    return system.m_values[_inverse_cdf(probs, gen, size)]


def single_shot(system: SpinSystem, config: ProtocolConfig, gen: np.random.Generator) -> float:
    return float(sample_shots(system, config, gen, 1)[0])


def _inverse_cdf(probs: np.ndarray, gen: np.random.Generator, size: int) -> np.ndarray:
    cdf = np.cumsum(probs)
    cdf[-1] = 1.0
    return np.searchsorted(cdf, gen.random(size), side="right")


def _block_counts(probs, seed, key, block, n, sampler) -> np.ndarray:
    gen = _rng.stream(seed, *key, block)
    if sampler == "multinomial":
        return gen.multinomial(n, probs)
    return np.bincount(_inverse_cdf(probs, gen, n), minlength=probs.size)


def outcome_counts(
    system: SpinSystem,
    config: ProtocolConfig,
    key: tuple[int, ...] = (),
    workers: int = 1,
    sampler: str = "multinomial",
) -> np.ndarray:
    """Integer counts of each Jy outcome (ordered m = J..-J) over all shots."""
    if sampler not in SAMPLERS:
        raise ConfigError(f"unknown sampler {sampler!r}; expected one of {SAMPLERS}")
    probs = _cached_probs(system.j.two_j, config.phi)
    total = config.shots
    sizes = [BLOCK_SHOTS] * (total // BLOCK_SHOTS)
    if total % BLOCK_SHOTS:
        sizes.append(total % BLOCK_SHOTS)

    def work(b):
        return _block_counts(probs, config.seed, key, b, sizes[b], sampler)

    if workers > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(work, range(len(sizes))))
    else:
        parts = [work(b) for b in range(len(sizes))]
    counts = np.zeros(probs.size, dtype=np.int64)
    for part in parts:
        counts += part
    return counts


def estimate(system: SpinSystem, config: ProtocolConfig, counts) -> CampaignResult:
    """Arcsin estimator of omega from outcome counts, with delta-method error."""
    counts = [int(c) for c in counts]
    two_m = [system.j.two_j - 2 * i for i in range(system.dim)]
    n = sum(counts)
    if n < 2:
        raise ConfigError("a campaign needs at least 2 shots")
    # exact integer moments of 2m
    s1 = sum(c * t for c, t in zip(counts, two_m))
    s2 = sum(c * t * t for c, t in zip(counts, two_m))
    mean = s1 / (2 * n)
    var = (n * s2 - s1 * s1) / (4 * n * (n - 1))
    jj = system.j.j
    ratio = mean / jj
    saturated = abs(ratio) >= 1.0
    if saturated:
        warnings.warn(
            f"mean Jy = {mean} saturates the estimator (|<Jy>| = J); clamping",
            SaturatedEstimatorWarning,
            stacklevel=2,
        )
    phi_hat = math.asin(min(1.0, max(-1.0, ratio)))
    cos_phi = math.cos(phi_hat)
    if saturated or cos_phi == 0.0:
        sigma = math.inf
    else:
        sigma = math.sqrt(var) / (jj * cos_phi * math.sqrt(n)) / config.t1
    return CampaignResult(
        mean_jy=mean,
        variance=var,
        omega_hat=phi_hat / config.t1,
        sigma_omega=sigma,
        shots=n,
        saturated=saturated,
        counts=tuple(counts),
    )


def run_campaign(
    system: SpinSystem,
    config: ProtocolConfig,
    key: tuple[int, ...] = (),
    workers: int = 1,
    sampler: str = "multinomial",
) -> CampaignResult:
    """Simulate ``n_spins * n_reps`` shots and estimate omega."""
    if system.j != config.j:
        raise ConfigError(f"system spin {system.j} does not match config spin {config.j}")
    if config.shots < 2:
        raise ConfigError("n_spins * n_reps must be at least 2")
    counts = outcome_counts(system, config, key=key, workers=workers, sampler=sampler)
    return estimate(system, config, counts)


@dataclass(frozen=True)
class SensitivityEstimate:
    delta_omega: float
    delta_omega_err: float
    mean_omega_hat: float
    mean_sigma_omega: float
    omega_hats: np.ndarray = field(repr=False, compare=False)

    @property
    def n_campaigns(self) -> int:
        return self.omega_hats.size


def bootstrap_std_error(values: np.ndarray, gen: np.random.Generator, resamples: int = BOOTSTRAP_RESAMPLES) -> float:
    """Bootstrap standard error of the sample standard deviation of ``values``."""
    values = np.asarray(values, dtype=float)
    idx = gen.integers(0, values.size, size=(resamples, values.size))
    return float(np.std(np.std(values[idx], axis=1, ddof=1), ddof=1))


def sensitivity_mc(
    system: SpinSystem,
    config: ProtocolConfig,
    n_campaigns: int,
    key: tuple[int, ...] = (),
    workers: int = 1,
    sampler: str = "multinomial",
) -> SensitivityEstimate:
    """Empirical spread of omega_hat over independent campaigns.

    Campaign ``k`` uses stream key ``(*key, 0, k)``; the bootstrap uses
    ``(*key, 1)``.
    """
    if n_campaigns < 30:
        raise ConfigError(f"n_campaigns must be at least 30, got {n_campaigns}")

    def one(k):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", SaturatedEstimatorWarning)
            return run_campaign(system, config, key=(*key, _CAMPAIGN_TAG, k), sampler=sampler)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, range(n_campaigns)))
    else:
        results = [one(k) for k in range(n_campaigns)]
    n_sat = sum(r.saturated for r in results)
    if n_sat:
        log.warning("%d of %d campaigns saturated the estimator", n_sat, n_campaigns)
    omega_hats = np.array([r.omega_hat for r in results])
    sigmas = np.array([r.sigma_omega for r in results])
    boot = _rng.stream(config.seed, *key, _BOOTSTRAP_TAG)
    return SensitivityEstimate(
        delta_omega=float(np.std(omega_hats, ddof=1)),
        delta_omega_err=bootstrap_std_error(omega_hats, boot),
        mean_omega_hat=float(np.mean(omega_hats)),
        mean_sigma_omega=float(np.mean(sigmas[np.isfinite(sigmas)])) if np.isfinite(sigmas).any() else math.inf,
        omega_hats=omega_hats,
    )


def analytic_delta_omega(config: ProtocolConfig) -> float:
    """Delta-method prediction for the spread of omega_hat.

    A coherent state tilted by phi has Var(Jy) = (J/2) cos^2 phi and
    d<Jy>/dphi = J cos phi, so the cosines cancel.
    """
    return 1.0 / (config.t1 * math.sqrt(config.j.two_j * config.shots))


def system_for(config: ProtocolConfig) -> SpinSystem:
    return build_spin_system(config.j)

"""Spin-projection-noise sensitivity limits: Monte Carlo and analytic models.

The package reproduces the sensitivity limit

    dB ~ hbar / (g mu0 sqrt(2J)) * sqrt(Gamma / (N T))

two ways: by simulating the pump-precession-probe protocol spin by spin, and by
optimizing a shot-noise-limited linear Faraday-rotation magnetometer.
"""

from .errors import ConfigError, NumericError

__version__ = "0.1.0"

__all__ = ["ConfigError", "NumericError", "__version__"]

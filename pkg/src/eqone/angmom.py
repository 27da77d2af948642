"""Finite-dimensional angular-momentum algebra.

Operators are dimensionless (hbar factored out) and written in the Jz
eigenbasis ordered m = J, J-1, ..., -J.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import ConfigError, NumericError

MAX_TWO_J = 2000

HERMITIAN_TOL = 1e-12
NORM_TOL = 1e-12
AXIS_TOL = 1e-9


@dataclass(frozen=True)
class SpinQuantumNumber:
    """Angular momentum quantum number stored as the integer 2J."""

    two_j: int

    def __post_init__(self):
        if int(self.two_j) != self.two_j or self.two_j < 0:
            raise ConfigError(f"two_j must be a non-negative integer, got {self.two_j!r}")
        object.__setattr__(self, "two_j", int(self.two_j))

    @classmethod
    def from_value(cls, j) -> "SpinQuantumNumber":
        """Build from J given as int, float, str or Fraction (e.g. ``0.5``, ``"3/2"``)."""
        try:
            two = 2 * Fraction(j)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"cannot interpret {j!r} as a spin quantum number") from exc
        if two.denominator != 1:
            raise ConfigError(f"J must be an integer or half-integer, got {j!r}")
        return cls(int(two))

    @property
    def j(self) -> float:
        return self.two_j / 2

    @property
    def dim(self) -> int:
        return self.two_j + 1

    def __str__(self) -> str:
        return str(self.two_j // 2) if self.two_j % 2 == 0 else f"{self.two_j}/2"


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SpinSystem:
    j: SpinQuantumNumber
    jx: np.ndarray
    jy: np.ndarray
    jz: np.ndarray
    jplus: np.ndarray
    jminus: np.ndarray

    @property
    def dim(self) -> int:
        return self.j.dim

    @property
    def m_values(self) -> np.ndarray:
        """Magnetic quantum numbers in basis order (descending)."""
        return self.j.j - np.arange(self.dim)

    def component(self, axis) -> np.ndarray:
        """Return ``axis . J`` for a 3-vector ``axis``."""
        n = np.asarray(axis, dtype=float)
        return n[0] * self.jx + n[1] * self.jy + n[2] * self.jz


def build_spin_system(j, max_two_j: int = MAX_TWO_J) -> SpinSystem:
    """Construct Jx, Jy, Jz, J+ and J- for spin ``j``.

    ``j`` may be a :class:`SpinQuantumNumber` or anything accepted by
    :meth:`SpinQuantumNumber.from_value`.
    """
    if not isinstance(j, SpinQuantumNumber):
        j = SpinQuantumNumber.from_value(j)
    if j.two_j > max_two_j:
        raise ConfigError(f"two_j={j.two_j} exceeds the dimension cap {max_two_j}")
    jj = j.j
    m = jj - np.arange(j.dim)
    # <m+1|J+|m> = sqrt(J(J+1) - m(m+1)); row index of m+1 is one above m
    ladder = np.sqrt(np.clip(jj * (jj + 1) - m[1:] * (m[1:] + 1), 0.0, None))
    jplus = np.diag(ladder, k=1).astype(complex)
    jminus = jplus.conj().T.copy()
    jz = np.diag(m).astype(complex)
    jx = 0.5 * (jplus + jminus)
    jy = -0.5j * (jplus - jminus)
    return SpinSystem(
        j=j,
        jx=_readonly(jx),
        jy=_readonly(jy),
        jz=_readonly(jz),
        jplus=_readonly(jplus),
        jminus=_readonly(jminus),
    )


@dataclass(frozen=True, eq=False)
class StateVector:
    """Normalized complex amplitude vector."""

    amplitudes: np.ndarray

    def __post_init__(self):
        a = np.array(self.amplitudes, dtype=complex)
        if a.ndim != 1 or a.size == 0:
            raise ConfigError("state amplitudes must be a non-empty 1-D array")
        norm = np.linalg.norm(a)
        if abs(norm - 1.0) > NORM_TOL:
            raise ConfigError(f"state is not normalized (norm={norm!r})")
        object.__setattr__(self, "amplitudes", _readonly(a))

    @classmethod
    def normalized(cls, amplitudes) -> "StateVector":
        a = np.asarray(amplitudes, dtype=complex)
        norm = np.linalg.norm(a)
        if norm == 0:
            raise ConfigError("cannot normalize the zero vector")
        return cls(a / norm)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def inner(self, other: "StateVector") -> complex:
        return complex(np.vdot(self.amplitudes, other.amplitudes))


def fix_phase(vec: np.ndarray) -> np.ndarray:
    """Rotate the global phase so the largest-magnitude amplitude is real positive.

    Ties are broken by the lowest index.
    """
    k = int(np.argmax(np.round(np.abs(vec), 12)))
    return vec * (abs(vec[k]) / vec[k])


def _check_hermitian(op: np.ndarray) -> None:
    if op.ndim != 2 or op.shape[0] != op.shape[1]:
        raise ConfigError(f"operator must be square, got shape {op.shape}")
    dev = np.max(np.abs(op - op.conj().T)) if op.size else 0.0
    if dev > HERMITIAN_TOL * max(1.0, np.max(np.abs(op))):
        raise ConfigError(f"operator is not Hermitian (max deviation {dev:.3g})")


def eigenstates(system: SpinSystem, axis) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (descending) and phase-fixed eigenvectors (columns) of ``axis . J``."""
    op = system.component(axis)
    w, v = np.linalg.eigh(op)
    order = np.argsort(w)[::-1]
    w = w[order]
    v = v[:, order]
    for i in range(v.shape[1]):
        v[:, i] = fix_phase(v[:, i])
    return w, v


def max_projection_state(system: SpinSystem, axis) -> StateVector:
    """The |J, J> eigenstate along ``axis`` (unit 3-vector)."""
    n = np.asarray(axis, dtype=float)
    if n.shape != (3,) or not np.all(np.isfinite(n)):
        raise ConfigError(f"axis must be a finite 3-vector, got {axis!r}")
    if abs(np.linalg.norm(n) - 1.0) > AXIS_TOL:
        raise ConfigError(f"axis must have unit norm, got |axis|={np.linalg.norm(n)!r}")
    w, v = eigenstates(system, n)
    if abs(w[0] - system.j.j) > 1e-8 * max(1.0, system.j.j):
        raise NumericError(f"top eigenvalue {w[0]!r} differs from J={system.j.j!r}")
    return StateVector.normalized(v[:, 0])


def evolve(state: StateVector, generator: np.ndarray, angle: float) -> StateVector:
    """Return ``exp(-i * angle * generator) |state>`` via exact diagonalization.

    With ``generator = Jz`` this is a right-handed rotation about z by
    ``angle``: positive angles carry <J> from x toward y.
    """
    g = np.asarray(generator)
    _check_hermitian(g)
    if g.shape[0] != state.dim:
        raise ConfigError(f"generator dim {g.shape[0]} != state dim {state.dim}")
    if angle == 0:
        return state
    w, v = np.linalg.eigh(g)
    psi = v @ (np.exp(-1j * angle * w) * (v.conj().T @ state.amplitudes))
    # renormalize away rounding drift; eigh basis is unitary to ~1e-15
    return StateVector.normalized(psi)


def _check_dims(state: StateVector, op: np.ndarray) -> np.ndarray:
    op = np.asarray(op)
    if op.ndim != 2 or op.shape != (state.dim, state.dim):
        raise ConfigError(f"operator shape {op.shape} incompatible with state dim {state.dim}")
    return op


def expectation(state: StateVector, op: np.ndarray) -> float:
    op = _check_dims(state, op)
    val = np.vdot(state.amplitudes, op @ state.amplitudes)
    if abs(val.imag) >= 1e-10 * max(1.0, abs(val.real)):
        raise ConfigError(f"expectation value has imaginary part {val.imag:.3g}; operator not Hermitian?")
    return float(val.real)


def variance(state: StateVector, op: np.ndarray) -> float:
    op = _check_dims(state, op)
    mean = expectation(state, op)
    var = expectation(state, op @ op) - mean**2
    if var < 0:
        if var < -1e-12 * max(1.0, mean**2):
            raise ConfigError(f"negative variance {var!r}")
        var = 0.0
    return var


def operators_to_json(system: SpinSystem) -> str:
    """Debug dump: each operator row-major as ``[re, im]`` pairs."""

    def enc(a):
        return [[[float(z.real), float(z.imag)] for z in row] for row in a]

    return json.dumps(
        {
            "two_j": system.j.two_j,
            "basis": "Jz eigenbasis, m descending",
            "operators": {
                "jx": enc(system.jx),
                "jy": enc(system.jy),
                "jz": enc(system.jz),
                "jplus": enc(system.jplus),
                "jminus": enc(system.jminus),
            },
        }
    )

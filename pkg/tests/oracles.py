"""Brute-force reference computations, independent of the eqone package."""

from fractions import Fraction
import math

import numpy as np
from scipy.linalg import expm


def textbook_spin_matrices(j):
    """Jx, Jy, Jz from <m'|J_i|m> formulas with explicit Kronecker deltas.

    Basis m = j, j-1, ..., -j.
    """
    j = Fraction(j)
    ms = [j - k for k in range(int(2 * j) + 1)]
    d = len(ms)
    jx = np.zeros((d, d), dtype=complex)
    jy = np.zeros((d, d), dtype=complex)
    jz = np.zeros((d, d), dtype=complex)
    for a, mp in enumerate(ms):
        for b, m in enumerate(ms):
            up = math.sqrt(j * (j + 1) - m * (m + 1)) if mp == m + 1 else 0.0
            down = math.sqrt(j * (j + 1) - m * (m - 1)) if mp == m - 1 else 0.0
            jx[a, b] = 0.5 * (up + down)
            jy[a, b] = -0.5j * (up - down)
            jz[a, b] = float(m) if mp == m else 0.0
    return jx, jy, jz


def dense_born_probabilities(j, phi):
    """Jy outcome probabilities (m descending) after rotating |j,j>_x about z by phi."""
    jx, jy, jz = textbook_spin_matrices(j)
    wx, vx = np.linalg.eigh(jx)
    psi0 = vx[:, np.argmax(wx)]
    psi = expm(-1j * phi * jz) @ psi0
    wy, vy = np.linalg.eigh(jy)
    order = np.argsort(wy)[::-1]
    return wy[order], np.abs(vy[:, order].conj().T @ psi) ** 2


def spin_half_plus_probability(phi):
    """Closed form for J = 1/2: P(m_y = +1/2) = (1 + sin phi) / 2."""
    return 0.5 * (1.0 + math.sin(phi))


def bernoulli_delta_omega(phi, shots, t1):
    """Spread of arcsin(2 * mean m) / t1 for J = 1/2 via the delta method."""
    p = spin_half_plus_probability(phi)
    var_m = p * (1 - p)  # m = +-1/2, so Var(m) = p(1-p)
    return math.sqrt(var_m / shots) / (0.5 * math.cos(phi)) / t1


def fd_derivative(f, x, h=1e-5):
    return (f(x + h) - f(x - h)) / (2 * h)

"""Independent brute-force constructions used as oracles in tests.

Everything here is built from explicit Kronecker products of 2x2 Pauli
matrices, deliberately avoiding the engine code paths (bit arithmetic,
Hadamard rate matrices, jump-operator decompositions) so the two can be
compared.  Local basis order is (|down>, |up>) and spin 1 is the first
Kronecker factor, matching the engine convention.
"""

from __future__ import annotations

from functools import reduce

import numpy as np

I2 = np.eye(2, dtype=complex)
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[-1, 0], [0, 1]], dtype=complex)  # z|down> = -|down>
SMINUS = np.array([[0, 1], [0, 0]], dtype=complex)  # |down><up|
SPLUS = SMINUS.conj().T


def site_op(n: int, site: int, op: np.ndarray) -> np.ndarray:
    """Operator acting on one site (1-based) of an n-spin register."""
    mats = [I2] * n
    mats[site - 1] = op
    return reduce(np.kron, mats)


def hamiltonian_kron(n: int, omega_q: float, coupling: np.ndarray) -> np.ndarray:
    h = omega_q * sum(site_op(n, j, SZ) for j in range(1, n + 1))
    for j in range(1, n + 1):
        for k in range(j + 1, n + 1):
            g = coupling[j - 1, k - 1]
            if g:
                h = h + (g / 2.0) * (
                    site_op(n, j, SX) @ site_op(n, k, SX)
                    + site_op(n, j, SY) @ site_op(n, k, SY)
                )
    return h


def dephasing_double_sum(
    rho: np.ndarray, v: np.ndarray, k: np.ndarray, c: float
) -> np.ndarray:
    n = len(v)
    out = np.zeros_like(rho, dtype=complex)
    for j in range(1, n + 1):
        zj = site_op(n, j, SZ)
        for m in range(1, n + 1):
            zm = site_op(n, m, SZ)
            w = c * v[j - 1] * v[m - 1] * k[j - 1, m - 1]
            out += w * (zm @ rho @ zj - 0.5 * (zj @ zm @ rho + rho @ zj @ zm))
    return out


def relaxation_double_sum(
    rho: np.ndarray,
    nu: np.ndarray,
    k: np.ndarray,
    c_down: float,
    c_up: float = 0.0,
) -> np.ndarray:
    n = len(nu)
    out = np.zeros_like(rho, dtype=complex)
    for j in range(1, n + 1):
        sp_j = site_op(n, j, SPLUS)
        sm_j = site_op(n, j, SMINUS)
        for m in range(1, n + 1):
            w = nu[j - 1] * nu[m - 1] * k[j - 1, m - 1]
            sm_m = site_op(n, m, SMINUS)
            sp_m = site_op(n, m, SPLUS)
            if c_down:
                out += (w * c_down) * (
                    sm_m @ rho @ sp_j - 0.5 * (sp_j @ sm_m @ rho + rho @ sp_j @ sm_m)
                )
            if c_up:
                out += (w * c_up) * (
                    sp_m @ rho @ sm_j - 0.5 * (sm_j @ sp_m @ rho + rho @ sm_j @ sp_m)
                )
    return out


def random_density(rng: np.random.Generator, dim: int) -> np.ndarray:
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = a @ a.conj().T
    return rho / np.trace(rho)


def fit_decay_rate(times: np.ndarray, values: np.ndarray) -> float:
    """Exponential decay rate by least squares on the log (values > 0)."""
    slope, _ = np.polyfit(times, np.log(values), 1)
    return float(-slope)

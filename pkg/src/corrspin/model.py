"""Spin-network, noise, and spatial-correlation model types.

Conventions (hbar = 1):
    - The level splitting enters the Hamiltonian as omega_q * sigma_z per
      spin, so one excitation sits 2*omega_q above the ground state.
    - Site positions are expressed in units of the inter-spin distance d;
      the default chain layout is x_j = j - 1 for j = 1..N.
    - The spatial correlation of the bath between sites j and k is the
      Gaussian kernel K_jk = 2**(-((x_j - x_k)/xi)**2) with correlation
      length xi, normalised so that K_jj = 1.  xi = 0 means statistically
      independent baths (identity kernel); xi = inf means one common bath
      (all-ones kernel).

All model values are immutable after construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError, NotPositiveSemidefiniteError

# PSD tolerance for correlation kernels, relative to the largest eigenvalue.
KERNEL_PSD_TOL = 1e-12
# Kernel entries below this are flushed to exact zeros to keep the
# uncorrelated regime sparse.
KERNEL_FLUSH_TOL = 1e-15


def _readonly(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=float)
    out.setflags(write=False)
    return out


def _broadcast_site_values(value, n: int, name: str) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.size == 1:
        arr = np.full(n, float(arr[0]))
    if arr.shape != (n,):
        raise InputError(f"{name} must be a scalar or length-{n} array")
    if np.any(arr < 0) or not np.all(np.isfinite(arr)):
        raise InputError(f"{name} entries must be finite and >= 0")
    return arr


@dataclass(frozen=True)
class NetworkSpec:
    """A network of two-level systems with XY couplings and bath couplings.

    coupling[j, k] is the strength of the flip-flop term between spins j
    and k; it must be symmetric with zero diagonal.  dephasing_couplings
    and relaxation_couplings are the per-site strengths of the
    longitudinal (sigma_z) and transversal (sigma_x) bath couplings.
    """

    n_spins: int
    omega_q: float
    coupling: np.ndarray
    positions: np.ndarray
    dephasing_couplings: np.ndarray
    relaxation_couplings: np.ndarray

    def __post_init__(self):
        n = self.n_spins
        if n < 1:
            raise InputError("n_spins must be >= 1")
        if not (self.omega_q > 0 and math.isfinite(self.omega_q)):
            raise InputError("omega_q must be a finite positive number")
        coupling = np.asarray(self.coupling, dtype=float)
        if coupling.shape != (n, n):
            raise InputError(f"coupling must have shape ({n}, {n})")
        if not np.allclose(coupling, coupling.T, atol=1e-12, rtol=0):
            raise InputError("coupling matrix must be symmetric")
        if np.any(np.abs(np.diag(coupling)) > 0):
            raise InputError("coupling matrix must have zero diagonal")
        positions = np.asarray(self.positions, dtype=float)
        if positions.shape != (n,):
            raise InputError(f"positions must have length {n}")
        if not np.all(np.isfinite(positions)):
            raise InputError("positions must be finite")
        if n > 1 and not np.all(np.diff(positions) > 0):
            raise InputError("positions must be strictly increasing")
        object.__setattr__(self, "coupling", _readonly(coupling))
        object.__setattr__(self, "positions", _readonly(positions))
        object.__setattr__(
            self,
            "dephasing_couplings",
            _readonly(_broadcast_site_values(self.dephasing_couplings, n, "dephasing_couplings")),
        )
        object.__setattr__(
            self,
            "relaxation_couplings",
            _readonly(_broadcast_site_values(self.relaxation_couplings, n, "relaxation_couplings")),
        )

    @classmethod
    def chain(
        cls,
        n_spins: int,
        g: float = 1.0,
        omega_q: float = 100.0,
        dephasing: float | np.ndarray = 0.0,
        relaxation: float | np.ndarray = 0.0,
        positions: np.ndarray | None = None,
    ) -> "NetworkSpec":
        """Linear chain with the perfect-transfer coupling profile."""
        if positions is None:
            positions = np.arange(n_spins, dtype=float)
        return cls(
            n_spins=n_spins,
            omega_q=omega_q,
            coupling=chain_coupling_profile(n_spins, g),
            positions=positions,
            dephasing_couplings=dephasing,
            relaxation_couplings=relaxation,
        )

    @classmethod
    def uncoupled(
        cls,
        n_spins: int,
        omega_q: float = 100.0,
        dephasing: float | np.ndarray = 0.0,
        relaxation: float | np.ndarray = 1.0,
        positions: np.ndarray | None = None,
    ) -> "NetworkSpec":
        """Spins with no coherent coupling, sharing only the bath."""
        if positions is None:
            positions = np.arange(n_spins, dtype=float)
        return cls(
            n_spins=n_spins,
            omega_q=omega_q,
            coupling=np.zeros((n_spins, n_spins)),
            positions=positions,
            dephasing_couplings=dephasing,
            relaxation_couplings=relaxation,
        )


@dataclass(frozen=True)
class NoiseSpec:
    """Spectral amplitudes of the environment.

    c_dephasing is the longitudinal spectral amplitude at zero frequency;
    c_relax_down / c_relax_up are the transversal amplitudes at plus/minus
    the level splitting.  A vacuum (low-temperature) bath has
    c_relax_up = 0, which is the default.  The kernels used here are flat
    in frequency, so a single scalar per process is sufficient.
    """

    xi: float
    c_dephasing: float = 0.0
    c_relax_down: float = 0.0
    c_relax_up: float = 0.0

    def __post_init__(self):
        if not (self.xi >= 0):  # also rejects NaN; inf is allowed
            raise InputError("xi must be >= 0")
        for name in ("c_dephasing", "c_relax_down", "c_relax_up"):
            val = getattr(self, name)
            if not (val >= 0 and not math.isnan(val)):
                raise InputError(f"{name} must be >= 0")


@dataclass(frozen=True)
class CorrelationKernel:
    """Symmetric PSD matrix of inter-site bath correlations, K_jj = 1."""

    k: np.ndarray

    def __post_init__(self):
        k = np.asarray(self.k, dtype=float)
        if k.ndim != 2 or k.shape[0] != k.shape[1]:
            raise InputError("kernel must be a square matrix")
        if not np.allclose(k, k.T, atol=1e-14, rtol=0):
            raise InputError("kernel must be symmetric")
        if not np.allclose(np.diag(k), 1.0, atol=1e-14, rtol=0):
            raise InputError("kernel diagonal must be 1")
        if np.any(k < 0) or np.any(k > 1 + 1e-14):
            raise InputError("kernel entries must lie in [0, 1]")
        eigs = np.linalg.eigvalsh(k)
        if eigs[0] < -KERNEL_PSD_TOL * max(eigs[-1], 1.0):
            raise NotPositiveSemidefiniteError(
                f"kernel eigenvalue {eigs[0]:.3e} below PSD tolerance"
            )
        object.__setattr__(self, "k", _readonly(k))

    @property
    def n(self) -> int:
        return self.k.shape[0]


def build_kernel(positions: np.ndarray, xi: float) -> CorrelationKernel:
    """Gaussian spatial correlation kernel K_jk = 2**(-((x_j-x_k)/xi)**2).

    xi = 0 returns the identity matrix exactly (independent baths) and
    xi = inf the all-ones matrix (one common bath).  Entries below
    KERNEL_FLUSH_TOL are flushed to zero.
    """
    positions = np.asarray(positions, dtype=float)
    if positions.ndim != 1 or positions.size == 0:
        raise InputError("positions must be a non-empty 1-D array")
    if not np.all(np.isfinite(positions)):
        raise InputError("positions must be finite")
    if not (xi >= 0):
        raise InputError("xi must be >= 0")
    n = positions.size
    if xi == 0.0:
        return CorrelationKernel(np.eye(n))
    delta = positions[:, None] - positions[None, :]
    if math.isinf(xi):
        k = np.ones((n, n))
    else:
        k = np.exp2(-((delta / xi) ** 2))
        k[k < KERNEL_FLUSH_TOL] = 0.0
        np.fill_diagonal(k, 1.0)
    return CorrelationKernel(k)


def chain_coupling_profile(n_spins: int, g: float = 1.0) -> np.ndarray:
    """Tridiagonal coupling matrix g_j = g*sqrt(j*(N-j)), j = 1..N-1.

    This profile is strongest in the middle of the chain and yields a
    lossless end-to-end excitation transfer in time pi/(2g).
    """
    if n_spins < 2:
        raise InputError("a chain needs n_spins >= 2")
    if not (g > 0 and math.isfinite(g)):
        raise InputError("g must be a finite positive number")
    j = np.arange(1, n_spins, dtype=float)
    gj = g * np.sqrt(j * (n_spins - j))
    coupling = np.zeros((n_spins, n_spins))
    coupling[np.arange(n_spins - 1), np.arange(1, n_spins)] = gj
    coupling[np.arange(1, n_spins), np.arange(n_spins - 1)] = gj
    return coupling

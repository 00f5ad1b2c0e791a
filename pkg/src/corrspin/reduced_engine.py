"""Propagation restricted to the single-excitation subspace plus ground.

Valid whenever the initial state lives in span{|1>, ..., |N>, |g>}:
dephasing conserves excitation number, and vacuum relaxation
(c_relax_up = 0) only moves population from the single-excitation block
to the ground state.  Basis order is |1>, ..., |N>, |g> with the ground
state last, so the (N+1)x(N+1) density matrix splits into the block
rho[:N, :N], the ground population rho[N, N], and the block-to-ground
coherences rho[:N, N].

In this sector the dephasing double sum is exactly a per-element decay
of coherences,

    d rho_ab / dt = -Lambda_ab rho_ab,
    Lambda_ab = (c_deph / 2) (z_a - z_b)^T V K V (z_a - z_b),

and the relaxation double sum is governed by the PSD matrix
M_jk = nu_j nu_k K_jk c_down: population flows to the ground state at
rate tr(M rho_block) while the block is damped by -{M, rho}/2.  The
diagonal (jump operator) form of the same dissipator is exposed by
build_jump_operators for analysis and cross-checks.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import analytics
from .errors import InputError, NotPositiveSemidefiniteError
from .evolution import TimeSeries, _SeriesCollector, default_dt, propagate, resolve_grid
from .model import CorrelationKernel, NetworkSpec, NoiseSpec

HERMITICITY_TOL = 1e-10
TRACE_TOL = 1e-10
POSITIVITY_TOL = 1e-8


@dataclass
class ReducedState:
    """Hermitian unit-trace density matrix in the {|1..N>, |g>} basis."""

    rho: np.ndarray

    @classmethod
    def site(cls, n_spins: int, site: int) -> "ReducedState":
        """Pure state with the excitation on one site (1-based)."""
        if not 1 <= site <= n_spins:
            raise InputError(f"site {site} outside 1..{n_spins}")
        rho = np.zeros((n_spins + 1, n_spins + 1), dtype=complex)
        rho[site - 1, site - 1] = 1.0
        return cls(rho)

    @classmethod
    def ground(cls, n_spins: int) -> "ReducedState":
        rho = np.zeros((n_spins + 1, n_spins + 1), dtype=complex)
        rho[n_spins, n_spins] = 1.0
        return cls(rho)

    @classmethod
    def from_vector(cls, psi: np.ndarray) -> "ReducedState":
        psi = np.asarray(psi, dtype=complex)
        norm = np.linalg.norm(psi)
        if norm == 0:
            raise InputError("state vector must be nonzero")
        psi = psi / norm
        return cls(np.outer(psi, psi.conj()))

    @property
    def n_spins(self) -> int:
        return self.rho.shape[0] - 1

    def validate(self, positivity: bool = True) -> None:
        rho = self.rho
        if abs(np.trace(rho) - 1.0) > TRACE_TOL:
            raise InputError(f"trace deviates from 1 by {abs(np.trace(rho) - 1.0):.3e}")
        if np.max(np.abs(rho - rho.conj().T)) > HERMITICITY_TOL:
            raise InputError("density matrix is not Hermitian")
        if positivity:
            min_eig = float(np.linalg.eigvalsh(rho)[0])
            if min_eig < -POSITIVITY_TOL:
                raise InputError(f"negative eigenvalue {min_eig:.3e}")


@dataclass(frozen=True)
class DephasingRateMatrix:
    """Per-element coherence decay rates; Lambda_ab >= 0, zero diagonal."""

    lam: np.ndarray


@dataclass(frozen=True)
class JumpOperatorSet:
    """Collective lowering channels |g><w_alpha| with rates lam_alpha.

    weights[alpha] is the block vector w_alpha = sqrt(lam_alpha) u_alpha
    from the eigendecomposition M = sum_alpha lam_alpha u u^T, so that
    sum_alpha L_alpha^dag L_alpha reproduces M on the block.
    """

    rates: np.ndarray
    weights: np.ndarray  # (n_ops, N)
    n_spins: int

    def operators(self) -> list[np.ndarray]:
        """Materialised (N+1)x(N+1) jump matrices."""
        n = self.n_spins
        ops = []
        for w in self.weights:
            mat = np.zeros((n + 1, n + 1), dtype=complex)
            mat[n, :n] = w
            ops.append(mat)
        return ops

    def absorption_matrix(self) -> np.ndarray:
        """sum_alpha L^dag L, nonzero only on the block: equals M."""
        m = np.zeros((self.n_spins + 1, self.n_spins + 1))
        if len(self.weights):
            m[: self.n_spins, : self.n_spins] = self.weights.T @ self.weights
        return m


def _z_rows(n_spins: int) -> np.ndarray:
    """(N+1, N) sigma_z eigenvalue vectors of the reduced basis states."""
    z = -np.ones((n_spins + 1, n_spins))
    z[np.arange(n_spins), np.arange(n_spins)] = 1.0
    return z


def build_hamiltonian_reduced(net: NetworkSpec, frame: str = "rotating") -> np.ndarray:
    """(N+1)x(N+1) Hamiltonian in the reduced basis.

    Off-diagonal block elements are the couplings; the block diagonal is
    the single-excitation energy 2*omega_q above ground in the lab frame
    and 0 in the rotating frame.  XY coupling conserves excitation
    number, so there are no block-to-ground elements.
    """
    if frame not in ("lab", "rotating"):
        raise InputError(f"unknown frame {frame!r}")
    n = net.n_spins
    h = np.zeros((n + 1, n + 1))
    h[:n, :n] = net.coupling
    if frame == "lab":
        h[np.arange(n), np.arange(n)] = 2.0 * net.omega_q
    return h


def build_dephasing_rates(
    net: NetworkSpec, kernel: CorrelationKernel, noise: NoiseSpec
) -> DephasingRateMatrix:
    """Closed-form coherence decay rates for the reduced basis.

    Lambda[j, k] = 2 c (v_j^2 + v_k^2 - 2 v_j v_k K_jk) within the block
    and Lambda[j, g] = 2 c v_j^2, which is independent of the kernel
    because K_jj = 1; the coherence to the ground state always dephases
    at the single-site rate.
    """
    n = net.n_spins
    z = _z_rows(n)
    v = net.dephasing_couplings
    w = noise.c_dephasing * (v[:, None] * v[None, :]) * kernel.k
    gram = z @ w @ z.T
    diag = np.diag(gram)
    lam = 0.5 * (diag[:, None] + diag[None, :]) - gram
    lam = np.maximum(lam, 0.0)  # exact zeros may round to -1e-17
    np.fill_diagonal(lam, 0.0)
    return DephasingRateMatrix(lam)


def build_jump_operators(
    net: NetworkSpec, kernel: CorrelationKernel, noise: NoiseSpec
) -> JumpOperatorSet:
    """Diagonalise M_jk = nu_j nu_k K_jk c_down into lowering channels.

    Eigenvalues below the PSD tolerance are clamped to zero; a negative
    eigenvalue beyond tolerance raises.  In the all-ones-kernel limit the
    set contains a single operator proportional to |g><d| with the
    decaying state |d> ~ sum_j nu_j |j>.
    """
    n = net.n_spins
    nu = net.relaxation_couplings
    m = noise.c_relax_down * (nu[:, None] * nu[None, :]) * kernel.k
    lams, vecs = np.linalg.eigh(m)
    if lams[0] < -1e-12 * max(lams[-1], 1.0):
        raise NotPositiveSemidefiniteError(
            f"relaxation matrix eigenvalue {lams[0]:.3e} below PSD tolerance"
        )
    lams = np.clip(lams, 0.0, None)
    keep = lams > 1e-12 * max(lams[-1], 0.0) if lams[-1] > 0 else lams > 0
    rates = lams[keep]
    weights = np.sqrt(rates)[:, None] * vecs.T[keep]
    return JumpOperatorSet(rates=rates, weights=weights, n_spins=n)


@dataclass
class ReducedGenerator:
    """Action of the reduced master equation, pieces precomputed."""

    h: np.ndarray
    lam: Optional[np.ndarray]
    m_block: Optional[np.ndarray]  # (N+1)x(N+1), zero ground row/col
    frame_omega: float
    energy_scale: float

    def apply(self, rho: np.ndarray) -> np.ndarray:
        out = (-1j) * (self.h @ rho - rho @ self.h)
        if self.lam is not None:
            out -= self.lam * rho
        if self.m_block is not None:
            n = rho.shape[0] - 1
            # feed and anticommutator carry the same tr(M rho), so the
            # total trace derivative cancels exactly
            out[n, n] += np.einsum("jk,kj->", self.m_block[:n, :n], rho[:n, :n])
            out -= 0.5 * (self.m_block @ rho + rho @ self.m_block)
        return out

    __call__ = apply


def make_generator(
    net: NetworkSpec,
    kernel: CorrelationKernel,
    noise: NoiseSpec,
    frame: str = "rotating",
) -> ReducedGenerator:
    if noise.c_relax_up > 0:
        raise InputError(
            "the reduced engine requires c_relax_up = 0; excitation gain "
            "leaves the single-excitation sector (use the full engine)"
        )
    h = build_hamiltonian_reduced(net, frame=frame)
    lam = None
    if noise.c_dephasing > 0 and np.any(net.dephasing_couplings > 0):
        lam = build_dephasing_rates(net, kernel, noise).lam
    m_block = None
    if noise.c_relax_down > 0 and np.any(net.relaxation_couplings > 0):
        jumps = build_jump_operators(net, kernel, noise)
        m_block = jumps.absorption_matrix()
    coupling_scale = float(np.abs(np.linalg.eigvalsh(h)).max())
    rate_scale = 0.0
    if lam is not None:
        rate_scale = max(rate_scale, float(lam.max()))
    if m_block is not None:
        rate_scale = max(rate_scale, float(np.trace(m_block)))
    return ReducedGenerator(
        h=h,
        lam=lam,
        m_block=m_block,
        frame_omega=net.omega_q if frame == "rotating" else 0.0,
        energy_scale=max(coupling_scale, rate_scale),
    )


def generator_from_parts(
    hamiltonian: np.ndarray,
    rates: DephasingRateMatrix | None,
    jumps: JumpOperatorSet | None,
    frame_omega: float = 0.0,
) -> ReducedGenerator:
    """Assemble a generator from explicitly built pieces."""
    lam = rates.lam if rates is not None else None
    m_block = jumps.absorption_matrix() if jumps is not None else None
    coupling_scale = float(np.abs(np.linalg.eigvalsh(hamiltonian)).max())
    rate_scale = 0.0
    if lam is not None:
        rate_scale = max(rate_scale, float(lam.max()))
    if m_block is not None:
        rate_scale = max(rate_scale, float(np.trace(m_block)))
    return ReducedGenerator(
        h=np.asarray(hamiltonian),
        lam=lam,
        m_block=m_block,
        frame_omega=frame_omega,
        energy_scale=max(coupling_scale, rate_scale),
    )


def _site_observables(n_spins: int):
    def site_sz(rho: np.ndarray) -> np.ndarray:
        return 2.0 * np.diag(rho)[:n_spins].real - 1.0

    def site_splus(rho: np.ndarray) -> np.ndarray:
        # <S+_j> = tr(rho |j><g|) = rho[g, j]
        return np.array(rho[n_spins, :n_spins])

    return site_sz, site_splus


def evolve_reduced(
    rho0: ReducedState | np.ndarray,
    hamiltonian: np.ndarray | ReducedGenerator,
    rates: DephasingRateMatrix | None = None,
    jumps: JumpOperatorSet | None = None,
    t_final: float = 1.0,
    dt: float | None = None,
    sample_every: int = 1,
    fidelity_target: np.ndarray | None = None,
    store_states: bool = False,
) -> tuple[TimeSeries, ReducedState]:
    """Propagate and sample observables; returns (series, final state).

    Accepts either a prebuilt ReducedGenerator or the separate pieces
    (hamiltonian, rates, jumps).
    """
    rho = rho0.rho if isinstance(rho0, ReducedState) else np.asarray(rho0, dtype=complex)
    if isinstance(hamiltonian, ReducedGenerator):
        gen = hamiltonian
    else:
        gen = generator_from_parts(hamiltonian, rates, jumps)
    if dt is None:
        dt = default_dt(gen.energy_scale)
    n_steps, dt = resolve_grid(t_final, dt, sample_every)
    fid = None
    if fidelity_target is not None:
        target = fidelity_target

        def fid(r: np.ndarray) -> float:
            return analytics.fidelity(r, target)

    site_sz, site_splus = _site_observables(rho.shape[0] - 1)
    collector = _SeriesCollector(
        site_sz=site_sz, site_splus=site_splus, fidelity_fn=fid, store_states=store_states
    )
    final = propagate(gen.apply, rho, n_steps, dt, sample_every, collector)
    series = collector.to_series(dt, gen.frame_omega)
    return series, ReducedState(final)


def evolve_to_stationary(
    rho0: ReducedState | np.ndarray,
    gen: ReducedGenerator,
    rate_floor: float = 1e-9,
    dt: float | None = None,
) -> tuple[ReducedState, float, bool]:
    """Evolve until the excited population is stationary.

    Runs in chunks until the total excited population changes by less
    than rate_floor per unit time, capped at 50 over the smallest
    nonzero decay rate of the generator.  Returns (state, time reached,
    capped flag).
    """
    rho = np.array(rho0.rho if isinstance(rho0, ReducedState) else rho0, dtype=complex)
    n = rho.shape[0] - 1
    rates = []
    if gen.m_block is not None:
        block_rates = np.linalg.eigvalsh(gen.m_block[:n, :n])
        rates.extend(r for r in block_rates if r > 1e-12 * max(block_rates[-1], 1.0))
    if gen.lam is not None:
        rates.extend(r for r in np.unique(gen.lam) if r > 0)
    if not rates:
        return ReducedState(rho), 0.0, False
    t_cap = 50.0 / min(rates)
    if dt is None:
        dt = default_dt(gen.energy_scale)
    chunk = max(1.0, 10.0 * dt)
    n_steps, dt_chunk = resolve_grid(chunk, dt, 1)
    t = 0.0
    capped = False
    while True:
        excited_before = np.trace(rho[:n, :n]).real
        rho = propagate(gen.apply, rho, n_steps, dt_chunk)
        t += chunk
        excited_after = np.trace(rho[:n, :n]).real
        if abs(excited_after - excited_before) / chunk < rate_floor:
            break
        if t >= t_cap:
            capped = True
            break
    return ReducedState(rho), t, capped

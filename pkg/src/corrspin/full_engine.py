"""Exact 2^N density-matrix propagation under correlated dissipators.

Basis convention: tensor product of per-spin {|down>, |up>} with spin 1
as the most significant factor.  Basis index b therefore has bit (N - j)
set exactly when spin j is up; the ground state is index 0 and the
single-excitation state of spin j is index 2**(N - j).

The master equation is

    drho/dt = i[rho, H]
            + sum_jk v_j v_k c_deph K_jk (Z_k rho Z_j - {Z_j Z_k, rho}/2)
            + sum_jk nu_j nu_k c_down K_jk (S-_k rho S+_j - {S+_j S-_k, rho}/2)
            + sum_jk nu_j nu_k c_up   K_jk (S+_k rho S-_j - {S-_j S+_k, rho}/2)

with K the spatial correlation kernel.  The dephasing double sum acts
elementwise in the computational basis and is applied as a precomputed
Hadamard rate matrix; the relaxation double sum is applied in diagonal
(jump operator) form after eigendecomposition of the PSD matrix
M_jk = nu_j nu_k K_jk.

Evolution defaults to the frame rotating at the level splitting.  All
dissipator terms are form-invariant under that transformation, so the
rotating-frame equation simply drops the omega_q * sigma_z diagonal.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp

from . import analytics
from .errors import InputError, NotPositiveSemidefiniteError, ResourceLimitError
from .evolution import TimeSeries, _SeriesCollector, default_dt, propagate, resolve_grid
from .model import CorrelationKernel, NetworkSpec, NoiseSpec

# Largest N the exact engine accepts by default; beyond this the reduced
# engine is the intended tool.
FULL_SIZE_CAP = 10

HERMITICITY_TOL = 1e-10
TRACE_TOL = 1e-10
POSITIVITY_TOL = 1e-8


def check_size(n_spins: int, cap: int = FULL_SIZE_CAP) -> None:
    if n_spins > cap:
        raise ResourceLimitError(
            f"full engine supports at most {cap} spins (got {n_spins}); "
            "use the reduced engine for longer chains"
        )


def basis_index(n_spins: int, up_sites: Sequence[int]) -> int:
    """Computational-basis index of the state with the given spins up.

    Sites are 1-based; spin 1 is the most significant bit.
    """
    idx = 0
    for j in up_sites:
        if not 1 <= j <= n_spins:
            raise InputError(f"site {j} outside 1..{n_spins}")
        idx |= 1 << (n_spins - j)
    return idx


def sigma_z_diagonals(n_spins: int) -> np.ndarray:
    """(N, 2^N) array of sigma_z eigenvalues per site and basis state."""
    dim = 1 << n_spins
    states = np.arange(dim)
    z = np.empty((n_spins, dim))
    for j in range(1, n_spins + 1):
        z[j - 1] = np.where(states & (1 << (n_spins - j)), 1.0, -1.0)
    return z


def sigma_minus(n_spins: int, site: int) -> sp.csr_matrix:
    """Sparse lowering operator |down><up| on one site."""
    dim = 1 << n_spins
    bit = 1 << (n_spins - site)
    src = np.array([i for i in range(dim) if i & bit], dtype=int)
    dst = src - bit
    data = np.ones(src.size)
    return sp.csr_matrix((data, (dst, src)), shape=(dim, dim))


@dataclass
class FullState:
    """Hermitian unit-trace density matrix in the 2^N basis."""

    rho: np.ndarray

    @classmethod
    def computational(cls, n_spins: int, up_sites: Sequence[int]) -> "FullState":
        dim = 1 << n_spins
        rho = np.zeros((dim, dim), dtype=complex)
        idx = basis_index(n_spins, up_sites)
        rho[idx, idx] = 1.0
        return cls(rho)

    @classmethod
    def from_vector(cls, psi: np.ndarray) -> "FullState":
        psi = np.asarray(psi, dtype=complex)
        norm = np.linalg.norm(psi)
        if norm == 0:
            raise InputError("state vector must be nonzero")
        psi = psi / norm
        return cls(np.outer(psi, psi.conj()))

    @property
    def n_spins(self) -> int:
        return int(round(np.log2(self.rho.shape[0])))

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


def build_hamiltonian_full(
    net: NetworkSpec, frame: str = "lab", cap: int = FULL_SIZE_CAP
) -> np.ndarray:
    """Dense 2^N Hamiltonian: omega_q sum_j Z_j plus XY couplings.

    The coupling term (g_jk/2)(X_j X_k + Y_j Y_k) is the excitation
    hopping g_jk (|j><k| + |k><j|) within each fixed-excitation sector.
    frame="rotating" drops the omega_q diagonal.
    """
    check_size(net.n_spins, cap)
    if frame not in ("lab", "rotating"):
        raise InputError(f"unknown frame {frame!r}")
    n = net.n_spins
    dim = 1 << n
    h = np.zeros((dim, dim))
    if frame == "lab":
        z = sigma_z_diagonals(n)
        h[np.diag_indices(dim)] = net.omega_q * z.sum(axis=0)
    states = np.arange(dim)
    for j in range(1, n + 1):
        bit_j = 1 << (n - j)
        for k in range(j + 1, n + 1):
            g = net.coupling[j - 1, k - 1]
            if g == 0.0:
                continue
            bit_k = 1 << (n - k)
            # hopping: spin j up, spin k down  ->  spin j down, spin k up
            src = states[(states & bit_j > 0) & (states & bit_k == 0)]
            dst = src - bit_j + bit_k
            h[dst, src] += g
            h[src, dst] += g
    return h


def dephasing_rate_matrix(
    net: NetworkSpec, kernel: CorrelationKernel, noise: NoiseSpec
) -> np.ndarray:
    """Hadamard generator of the dephasing double sum.

    Returns R with (D[rho])_ab = R_ab * rho_ab; R_ab = -Gamma_ab <= 0 and
    R_aa = 0, where Gamma_ab is the decay rate of the coherence between
    computational basis states a and b:

        Gamma_ab = (c_deph / 2) (z_a - z_b)^T V K V (z_a - z_b)

    with z_a the vector of sigma_z eigenvalues of state a and
    V = diag(v_j).
    """
    n = net.n_spins
    z = sigma_z_diagonals(n)  # (N, dim)
    v = net.dephasing_couplings
    w = noise.c_dephasing * (v[:, None] * v[None, :]) * kernel.k
    gram = z.T @ w @ z  # (dim, dim)
    diag = np.diag(gram)
    return gram - 0.5 * (diag[:, None] + diag[None, :])


def apply_dephasing_dissipator(
    rho: np.ndarray, net: NetworkSpec, kernel: CorrelationKernel, noise: NoiseSpec
) -> np.ndarray:
    """Dephasing contribution to drho/dt (traceless, Hermitian)."""
    return dephasing_rate_matrix(net, kernel, noise) * rho


def relaxation_jump_operators(
    net: NetworkSpec, kernel: CorrelationKernel, noise: NoiseSpec
) -> list[sp.csr_matrix]:
    """Jump operators diagonalising the relaxation double sum.

    Eigendecomposes M_jk = nu_j nu_k K_jk; each eigenpair (lam, u) with
    lam > 0 yields a collective lowering operator
    sqrt(lam * c_down) * sum_k u_k S-_k, plus the raising counterpart
    scaled by c_up when excitation gain is enabled.
    """
    n = net.n_spins
    nu = net.relaxation_couplings
    m = nu[:, None] * nu[None, :] * kernel.k
    lams, vecs = np.linalg.eigh(m)
    if lams[0] < -1e-12 * max(lams[-1], 1.0):
        raise NotPositiveSemidefiniteError(
            f"relaxation matrix eigenvalue {lams[0]:.3e} below PSD tolerance"
        )
    lams = np.clip(lams, 0.0, None)
    rank_floor = 1e-12 * lams[-1] if lams[-1] > 0 else 0.0
    lowering = [sigma_minus(n, j) for j in range(1, n + 1)]
    ops: list[sp.csr_matrix] = []
    for lam, u in zip(lams, vecs.T):
        if lam <= rank_floor:
            continue
        combo = sum(u[k] * lowering[k] for k in range(n))
        if noise.c_relax_down > 0:
            ops.append(np.sqrt(lam * noise.c_relax_down) * combo)
        if noise.c_relax_up > 0:
            ops.append(np.sqrt(lam * noise.c_relax_up) * combo.T.conj())
    return [sp.csr_matrix(op) for op in ops]


def apply_relaxation_dissipator(
    rho: np.ndarray, net: NetworkSpec, kernel: CorrelationKernel, noise: NoiseSpec
) -> np.ndarray:
    """Relaxation contribution to drho/dt (traceless, Hermitian)."""
    out = np.zeros_like(rho, dtype=complex)
    for op in relaxation_jump_operators(net, kernel, noise):
        op_dag = op.conj().T
        out += op @ rho @ op_dag.toarray()
        q = (op_dag @ op).toarray()
        out -= 0.5 * (q @ rho + rho @ q)
    return out


@dataclass
class Liouvillian:
    """Action rho -> i[rho, H] + dissipators, with pieces precomputed."""

    h: sp.csr_matrix
    h_t: sp.csr_matrix
    deph: Optional[np.ndarray]
    jumps: list[sp.csr_matrix]
    jump_daggers: list[np.ndarray]
    q_half: Optional[np.ndarray]
    frame_omega: float
    energy_scale: float

    def apply(self, rho: np.ndarray) -> np.ndarray:
        out = (-1j) * (self.h @ rho - (self.h_t @ rho.T).T)
        if self.deph is not None:
            out += self.deph * rho
        if self.jumps:
            for op, op_dag in zip(self.jumps, self.jump_daggers):
                out += op @ (rho @ op_dag)
            out -= self.q_half @ rho + rho @ self.q_half
        return out

    __call__ = apply


def make_liouvillian(
    net: NetworkSpec,
    kernel: CorrelationKernel,
    noise: NoiseSpec,
    frame: str = "rotating",
    cap: int = FULL_SIZE_CAP,
) -> Liouvillian:
    h = build_hamiltonian_full(net, frame=frame, cap=cap)
    deph = None
    if noise.c_dephasing > 0 and np.any(net.dephasing_couplings > 0):
        deph = dephasing_rate_matrix(net, kernel, noise)
    jumps = []
    q_half = None
    if (noise.c_relax_down > 0 or noise.c_relax_up > 0) and np.any(
        net.relaxation_couplings > 0
    ):
        jumps = relaxation_jump_operators(net, kernel, noise)
        q_half = sum(0.5 * (op.conj().T @ op) for op in jumps).toarray()
    # |h|_inf bounds the spectral radius; cheap and adequate for dt choice
    coupling_scale = float(np.abs(h).sum(axis=1).max()) if h.size else 0.0
    rate_scale = 0.0
    if deph is not None:
        rate_scale = max(rate_scale, float(-deph.min()))
    if q_half is not None:
        rate_scale = max(rate_scale, 2.0 * float(np.diag(q_half).real.max()))
    h_csr = sp.csr_matrix(h)
    return Liouvillian(
        h=h_csr,
        h_t=sp.csr_matrix(h_csr.T),
        deph=deph,
        jumps=jumps,
        jump_daggers=[op.conj().T.toarray() for op in jumps],
        q_half=q_half,
        frame_omega=net.omega_q if frame == "rotating" else 0.0,
        energy_scale=max(coupling_scale, rate_scale),
    )


def _site_observables(n_spins: int):
    z = sigma_z_diagonals(n_spins)
    bits = [1 << (n_spins - j) for j in range(1, n_spins + 1)]
    dim = 1 << n_spins
    states = np.arange(dim)
    # <S+_j> = sum over states x with spin j down of rho[x + bit, x]
    gather = []
    for bit in bits:
        src = states[states & bit == 0]
        gather.append((src + bit, src))

    def site_sz(rho: np.ndarray) -> np.ndarray:
        pops = np.diag(rho).real
        return z @ pops

    def site_splus(rho: np.ndarray) -> np.ndarray:
        return np.array([rho[rows, cols].sum() for rows, cols in gather])

    return site_sz, site_splus


def evolve_full(
    rho0: FullState | np.ndarray,
    liouvillian: Liouvillian,
    t_final: float,
    dt: float | None = None,
    sample_every: int = 1,
    fidelity_target: np.ndarray | None = None,
    store_states: bool = False,
) -> tuple[TimeSeries, FullState]:
    """Propagate and sample observables; returns (series, final state).

    dt defaults to a fraction of the shortest generator period; values
    with dt * energy_scale > 0.1 degrade accuracy and risk divergence,
    which is detected at sample points.
    """
    rho = rho0.rho if isinstance(rho0, FullState) else np.asarray(rho0, dtype=complex)
    n = int(round(np.log2(rho.shape[0])))
    if dt is None:
        dt = default_dt(liouvillian.energy_scale)
    n_steps, dt = resolve_grid(t_final, dt, sample_every)
    fid = None
    if fidelity_target is not None:
        target = fidelity_target

        def fid(r: np.ndarray) -> float:
            return analytics.fidelity(r, target)

    site_sz, site_splus = _site_observables(n)
    collector = _SeriesCollector(
        site_sz=site_sz, site_splus=site_splus, fidelity_fn=fid, store_states=store_states
    )
    final = propagate(liouvillian.apply, rho, n_steps, dt, sample_every, collector)
    series = collector.to_series(dt, liouvillian.frame_omega)
    return series, FullState(final)


def project_to_reduced(rho_full: np.ndarray, n_spins: int) -> np.ndarray:
    """Restrict a full-space state to the (N+1) single-excitation basis.

    Basis order matches the reduced engine: |1>, ..., |N>, |g>.
    """
    idx = [basis_index(n_spins, [j]) for j in range(1, n_spins + 1)]
    idx.append(0)
    idx = np.array(idx)
    return rho_full[np.ix_(idx, idx)]

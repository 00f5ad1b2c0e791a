"""Fixed-step RK4 propagation shared by both engines.

The master equations handled here are time independent, so a fixed-step
classical Runge-Kutta integrator is sufficient; accuracy is controlled by
dt relative to the largest frequency/rate in the generator.  Evolution is
normally performed in the frame rotating at the level splitting, which
removes omega_q from the relevant scales.  The frame is recorded on the
returned series so lab-frame transversal magnetisation can be
reconstructed (see analytics.lab_sigma_x).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import InputError, IntegrationDivergedError

# Default number of RK4 steps per shortest generator period 2*pi/Omega.
DT_DIVISOR = 40
# Mid-run divergence thresholds (looser than the state invariants so that
# benign roundoff never trips them).
DIVERGENCE_TRACE_TOL = 1e-6
DIVERGENCE_HERM_TOL = 1e-6


@dataclass
class TimeSeries:
    """Sampled observables of one evolution.

    sz[i, j] is <sigma_z> of site j at times[i].  splus[i, j] is
    <sigma_+> of site j in the evolution frame; abs_sx = 2*|splus| is the
    magnitude of the transversal magnetisation with the fast 2*omega_q
    harmonic discarded, and is frame independent.
    """

    times: np.ndarray
    sz: np.ndarray
    splus: np.ndarray
    purity: np.ndarray
    dt: float
    frame_omega: float = 0.0
    fidelity: Optional[np.ndarray] = None
    states: Optional[list] = None

    @property
    def abs_sx(self) -> np.ndarray:
        return 2.0 * np.abs(self.splus)

    @property
    def n_sites(self) -> int:
        return self.sz.shape[1]


def default_dt(energy_scale: float, divisor: int = DT_DIVISOR) -> float:
    """Step size resolving the dominant frequency or rate."""
    scale = max(float(energy_scale), 1e-12)
    return (2.0 * np.pi / scale) / divisor


def _check_state(rho: np.ndarray, t: float) -> None:
    if not np.all(np.isfinite(rho)):
        raise IntegrationDivergedError(
            f"non-finite density matrix at t={t:.6g}; reduce dt"
        )
    # every element of a unit-trace PSD matrix is bounded by 1
    peak = np.max(np.abs(rho))
    if peak > 10.0:
        raise IntegrationDivergedError(
            f"state diverged (peak element {peak:.3e}) at t={t:.6g}; reduce dt"
        )
    trace_err = abs(np.trace(rho).real - 1.0) + abs(np.trace(rho).imag)
    if trace_err > DIVERGENCE_TRACE_TOL:
        raise IntegrationDivergedError(
            f"trace drifted by {trace_err:.3e} at t={t:.6g}; reduce dt"
        )
    herm_err = np.max(np.abs(rho - rho.conj().T))
    if herm_err > DIVERGENCE_HERM_TOL:
        raise IntegrationDivergedError(
            f"hermiticity violated by {herm_err:.3e} at t={t:.6g}; reduce dt"
        )


def rk4_step(rhs: Callable[[np.ndarray], np.ndarray], rho: np.ndarray, dt: float) -> np.ndarray:
    k1 = rhs(rho)
    k2 = rhs(rho + (0.5 * dt) * k1)
    k3 = rhs(rho + (0.5 * dt) * k2)
    k4 = rhs(rho + dt * k3)
    return rho + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def resolve_grid(t_final: float, dt: float, sample_every: int) -> tuple[int, float]:
    """Round the step count so the grid hits t_final and every sample.

    Returns (n_steps, adjusted_dt) with n_steps a multiple of
    sample_every and n_steps * adjusted_dt == t_final.
    """
    if dt <= 0:
        raise InputError("dt must be > 0")
    if sample_every < 1:
        raise InputError("sample_every must be >= 1")
    if t_final <= 0:
        raise InputError("t_final must be > 0")
    n_steps = max(1, round(t_final / dt))
    n_steps = sample_every * int(np.ceil(n_steps / sample_every))
    return n_steps, t_final / n_steps


def propagate(
    rhs: Callable[[np.ndarray], np.ndarray],
    rho0: np.ndarray,
    n_steps: int,
    dt: float,
    sample_every: int = 1,
    observer: Callable[[np.ndarray, float], None] | None = None,
) -> np.ndarray:
    """Run n_steps RK4 steps, calling observer at each sample point.

    The sample at t = 0 is included.  Returns the final state.
    """
    rho = np.array(rho0, dtype=complex)
    if observer is not None:
        observer(rho, 0.0)
    for step in range(1, n_steps + 1):
        rho = rk4_step(rhs, rho, dt)
        if step % sample_every == 0:
            t = step * dt
            _check_state(rho, t)
            if observer is not None:
                observer(rho, t)
    return rho


@dataclass
class _SeriesCollector:
    """Accumulates per-sample observables during propagation."""

    site_sz: Callable[[np.ndarray], np.ndarray]
    site_splus: Callable[[np.ndarray], np.ndarray]
    fidelity_fn: Optional[Callable[[np.ndarray], float]] = None
    store_states: bool = False
    times: list = field(default_factory=list)
    sz: list = field(default_factory=list)
    splus: list = field(default_factory=list)
    purity: list = field(default_factory=list)
    fidelity: list = field(default_factory=list)
    states: list = field(default_factory=list)

    def __call__(self, rho: np.ndarray, t: float) -> None:
        self.times.append(t)
        self.sz.append(self.site_sz(rho))
        self.splus.append(self.site_splus(rho))
        self.purity.append(float(np.sum(np.abs(rho) ** 2)))
        if self.fidelity_fn is not None:
            self.fidelity.append(self.fidelity_fn(rho))
        if self.store_states:
            self.states.append(rho.copy())

    def to_series(self, dt: float, frame_omega: float) -> TimeSeries:
        return TimeSeries(
            times=np.array(self.times),
            sz=np.array(self.sz),
            splus=np.array(self.splus),
            purity=np.array(self.purity),
            dt=dt,
            frame_omega=frame_omega,
            fidelity=np.array(self.fidelity) if self.fidelity_fn is not None else None,
            states=self.states if self.store_states else None,
        )

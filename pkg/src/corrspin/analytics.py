"""Closed-form constructions and observable extraction.

Covers the analytic side of the correlated-noise story: the stationary
(relaxation-free) subspace and its decaying complement in the
single-excitation sector, the final-state predictor for uncoupled spins
under a common bath, dephasing-rate limits, transfer-quality and
packet-width measures, critical-correlation-length extraction, and
generic state functionals (purity, Uhlmann fidelity).

Reduced-basis vectors here follow the engine convention
|1>, ..., |N>, |g> with the ground state last.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import curve_fit

from .errors import (
    ContractError,
    DegenerateInputError,
    InputError,
    SamplingGridError,
    StepExtractionError,
    UndefinedWidthError,
)
from .evolution import TimeSeries
from .model import NetworkSpec


# ---------------------------------------------------------------------------
# stationary subspace and blocking predictor


@dataclass(frozen=True)
class StationaryBasis:
    """Basis split of the single-excitation block under a common bath.

    states[j] (j = 0..N-2) are the unnormalised stationary vectors
    nu_{j+2} |1> - nu_1 |j+2>; decaying is the normalised vector
    sum_j nu_j |j> / sqrt(sum nu_j^2).  orthonormal holds a Gram-Schmidt
    orthonormalisation of states for projections.  All vectors are
    length N (block components only).
    """

    states: np.ndarray
    decaying: np.ndarray
    orthonormal: np.ndarray


def stationary_subspace(relaxation_couplings: Sequence[float]) -> StationaryBasis:
    """Stationary vectors and the decaying state for given couplings.

    Raises DegenerateInputError when every coupling vanishes (the whole
    block is stationary) or when the pairing construction loses rank
    (nu_1 = 0).
    """
    nu = np.asarray(relaxation_couplings, dtype=float)
    if nu.ndim != 1 or nu.size < 1:
        raise InputError("relaxation couplings must be a 1-D array")
    if np.any(nu < 0):
        raise InputError("relaxation couplings must be >= 0")
    n = nu.size
    norm2 = float(nu @ nu)
    if norm2 == 0.0:
        raise DegenerateInputError(
            "all relaxation couplings are zero; every state is stationary"
        )
    decaying = nu / np.sqrt(norm2)
    states = np.zeros((n - 1, n))
    for j in range(1, n):
        states[j - 1, 0] = nu[j]
        states[j - 1, j] = -nu[0]
    if n > 1:
        q, r = np.linalg.qr(states.T)
        rank = int(np.sum(np.abs(np.diag(r)) > 1e-12 * max(1.0, np.abs(r).max())))
        if rank < n - 1:
            raise DegenerateInputError(
                "stationary vectors are rank deficient (first coupling is zero)"
            )
        orthonormal = q.T[: n - 1]
    else:
        orthonormal = np.zeros((0, 1))
    return StationaryBasis(states=states, decaying=decaying, orthonormal=orthonormal)


@dataclass(frozen=True)
class BlockingPrediction:
    """Closed-form final state of one excited spin among uncoupled spins.

    Valid for a perfectly correlated bath (all-ones kernel), zero
    coherent coupling, and no excitation gain.  rho is in the reduced
    basis.  sz_first is <sigma_z> of the initially excited spin,
    sz_total_plus_n is <S_z> + n (energy above ground), and sigma_trf
    the excitation fraction transferred to the other spins, measured as
    sum_{j>=2} (<sigma_z_j> + 1).
    """

    rho: np.ndarray
    sz_first: float
    sz_total_plus_n: float
    sigma_trf: float


def predict_final_state(relaxation_couplings: Sequence[float]) -> BlockingPrediction:
    """Final state of |1> after full relaxation under a common bath.

    The initial state splits into a stationary part |1> - <d|1> |d> and
    a decaying part that ends up in the ground state:

        rho_f = |p_s><p_s| + |<d|1>|^2 |g><g|.
    """
    nu = np.asarray(relaxation_couplings, dtype=float)
    if nu.ndim != 1 or nu.size < 1 or np.any(nu < 0):
        raise InputError("relaxation couplings must be a 1-D array of values >= 0")
    norm2 = float(nu @ nu)
    if norm2 == 0.0:
        raise DegenerateInputError("all relaxation couplings are zero")
    n = nu.size
    d = nu / np.sqrt(norm2)
    overlap = d[0]  # <d|1> = nu_1 / sqrt(sum nu^2)
    p_s = np.zeros(n)
    p_s[0] = 1.0
    p_s -= overlap * d
    rho = np.zeros((n + 1, n + 1), dtype=complex)
    rho[:n, :n] = np.outer(p_s, p_s)
    rho[n, n] = overlap**2
    rest2 = norm2 - nu[0] ** 2
    sz_first = -1.0 + 2.0 * rest2**2 / norm2**2
    sz_total_plus_n = 2.0 - 2.0 * nu[0] ** 2 / norm2
    sigma_trf = 2.0 * overlap**2 * (1.0 - overlap**2)
    return BlockingPrediction(
        rho=rho,
        sz_first=sz_first,
        sz_total_plus_n=sz_total_plus_n,
        sigma_trf=sigma_trf,
    )


def check_blocking_preconditions(net: NetworkSpec, kernel_k: np.ndarray, c_relax_up: float) -> None:
    """Raise ContractError outside the regime where the predictor holds."""
    if np.any(net.coupling != 0):
        raise ContractError("blocking prediction requires uncoupled spins")
    if not np.allclose(kernel_k, 1.0, atol=1e-12):
        raise ContractError("blocking prediction requires a perfectly correlated kernel")
    if c_relax_up != 0:
        raise ContractError("blocking prediction requires a vacuum bath (c_relax_up = 0)")


# ---------------------------------------------------------------------------
# dephasing-rate limits


def rate_oracle(
    up_sites_a: Iterable[int],
    up_sites_b: Iterable[int],
    limit: str,
    gamma: float,
) -> float:
    """Predicted dephasing rate of the coherence |a><b| in a kernel limit.

    limit="uncorrelated" (xi -> 0) gives n_f * gamma with n_f the number
    of flipped spins; limit="common" (xi -> inf) gives n_e^2 * gamma with
    n_e the excitation-number difference.  gamma is the single-site
    dephasing rate 2 v^2 c_deph.
    """
    a, b = set(up_sites_a), set(up_sites_b)
    if limit == "uncorrelated":
        return gamma * len(a ^ b)
    if limit == "common":
        return gamma * (len(a) - len(b)) ** 2
    raise InputError(f"unknown kernel limit {limit!r}; use 'uncorrelated' or 'common'")


# ---------------------------------------------------------------------------
# transfer measures


def transfer_quality(series: TimeSeries, net: NetworkSpec) -> float:
    """<sigma_z> of the end spin at the arrival time pi/(2g).

    g is inferred from the first chain coupling.  The series must
    contain a sample within dt/2 of the arrival time.
    """
    t_arrival = arrival_time(net)
    idx = int(np.argmin(np.abs(series.times - t_arrival)))
    if abs(series.times[idx] - t_arrival) > 0.5 * series.dt:
        raise SamplingGridError(
            f"no sample within dt/2 of the arrival time {t_arrival:.6g}"
        )
    return float(series.sz[idx, -1])


def arrival_time(net: NetworkSpec) -> float:
    """pi/(2g) for a perfect-transfer chain; g from the first coupling."""
    if net.n_spins < 2:
        raise InputError("arrival time needs a chain of at least 2 spins")
    g = net.coupling[0, 1] / np.sqrt(net.n_spins - 1.0)
    if g <= 0:
        raise InputError("network has no chain coupling between spins 1 and 2")
    return np.pi / (2.0 * g)


def packet_halfwidth(profile: Sequence[float], positions: Sequence[float] | None = None) -> float:
    """Half width at half maximum of an excitation profile over sites.

    Crossings of half maximum are located by linear interpolation between
    sites, measured from the profile maximum.  If the profile never
    falls below half maximum on one side, the chain end is used for that
    side; if it falls below on neither side (flat symmetric case), the
    degenerate value N/2 is returned.  A zero profile has no width.
    """
    p = np.asarray(profile, dtype=float)
    n = p.size
    if positions is None:
        positions = np.arange(1.0, n + 1.0)
    x = np.asarray(positions, dtype=float)
    if p.size < 2 or x.size != n:
        raise InputError("profile and positions must have equal length >= 2")
    if np.any(p < -1e-12):
        raise InputError("profile must be nonnegative")
    pmax = p.max()
    if pmax <= 0.0 or pmax - p.min() <= 1e-15:
        if pmax <= 0.0:
            raise UndefinedWidthError("flat zero profile has no packet width")
        return n / 2.0
    half = 0.5 * pmax
    imax = int(np.argmax(p))

    def crossing(indices):
        prev = imax
        for i in indices:
            if p[i] <= half:
                # interpolate between prev (above half) and i
                frac = (p[prev] - half) / (p[prev] - p[i])
                return x[prev] + frac * (x[i] - x[prev])
            prev = i
        return None

    right = crossing(range(imax + 1, n))
    left = crossing(range(imax - 1, -1, -1))
    if right is None and left is None:
        return n / 2.0
    if right is None:
        right = x[-1]
    if left is None:
        left = x[0]
    return float(0.5 * (right - left))


def critical_xi(quality_curve: Sequence[tuple[float, float]]) -> float:
    """Correlation length of maximal transfer-quality gradient.

    Finite differences of quality are taken on the log-xi axis (the
    natural axis of a decade-spanning sweep; the linear-axis gradient
    collapses onto the left edge of the rise and tracks the noise
    strength instead of the step).  The discrete maximum is refined by a
    three-point quadratic fit in log xi.  Requires at least 8 points, a
    visible step (overall rise of 0.1 or more), and xi > 0 throughout.
    """
    pts = sorted((float(x), float(q)) for x, q in quality_curve)
    if len(pts) < 8:
        raise InputError("need at least 8 sweep points to extract the step")
    xs = np.array([p[0] for p in pts])
    qs = np.array([p[1] for p in pts])
    if np.any(xs <= 0):
        raise InputError("sweep points must have xi > 0")
    if qs[-1] - qs[0] < 0.1:
        raise StepExtractionError(
            f"no step found: quality rises only {qs[-1] - qs[0]:.3g} over the sweep"
        )
    ls = np.log(xs)
    grads = np.diff(qs) / np.diff(ls)
    mids = 0.5 * (ls[1:] + ls[:-1])
    i = int(np.argmax(grads))
    if grads[i] <= 0:
        raise StepExtractionError("no positive quality gradient in the sweep")
    if i == 0 or i == grads.size - 1:
        return float(np.exp(mids[i]))
    x0, x1, x2 = mids[i - 1 : i + 2]
    g0, g1, g2 = grads[i - 1 : i + 2]
    denom = (x1 - x0) * (g1 - g2) - (x1 - x2) * (g1 - g0)
    if abs(denom) < 1e-300:
        return float(np.exp(x1))
    vertex = x1 - 0.5 * ((x1 - x0) ** 2 * (g1 - g2) - (x1 - x2) ** 2 * (g1 - g0)) / denom
    return float(np.exp(np.clip(vertex, x0, x2)))


# ---------------------------------------------------------------------------
# state functionals


def purity(rho: np.ndarray) -> float:
    """tr(rho^2); equals 1 exactly for pure states."""
    rho = np.asarray(rho)
    return float(np.sum(np.abs(rho) ** 2))


def _psd_sqrt(rho: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(rho)
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ v.conj().T


def fidelity(rho: np.ndarray, target: np.ndarray) -> float:
    """Uhlmann fidelity (tr sqrt(sqrt(rho) sigma sqrt(rho)))^2.

    A 1-D target is treated as a pure state, for which the form reduces
    to <psi| rho |psi>.
    """
    rho = np.asarray(rho, dtype=complex)
    target = np.asarray(target, dtype=complex)
    if target.ndim == 1:
        psi = target / np.linalg.norm(target)
        return float(np.real(psi.conj() @ rho @ psi))
    s = _psd_sqrt(rho)
    inner = s @ target @ s
    w = np.clip(np.linalg.eigvalsh(inner), 0.0, None)
    return float(np.sum(np.sqrt(w)) ** 2)


def end_pair_mixture(n_spins: int, sign: int = +1) -> np.ndarray:
    """Half-ground mixture with an entangled end pair, reduced basis.

    Returns 0.5 |psi><psi| + 0.5 |g><g| with
    psi = (|1> + sign |N>)/sqrt(2).
    """
    if n_spins < 2:
        raise InputError("end-pair mixture needs at least 2 spins")
    if sign not in (+1, -1):
        raise InputError("sign must be +1 or -1")
    psi = np.zeros(n_spins + 1)
    psi[0] = 1.0 / np.sqrt(2.0)
    psi[n_spins - 1] = sign / np.sqrt(2.0)
    rho = 0.5 * np.outer(psi, psi)
    rho[n_spins, n_spins] = 0.5
    return rho


def lab_sigma_x(series: TimeSeries, site: int) -> np.ndarray:
    """Reconstruct lab-frame <sigma_x> of a site (1-based) from a series.

    In the rotating frame <sigma_+> acquires the phase exp(2i omega t)
    when transformed back, so
    <sigma_x>_lab = 2 Re(exp(2i omega t) <sigma_+>_rot).
    """
    phase = np.exp(2j * series.frame_omega * series.times)
    return 2.0 * np.real(phase * series.splus[:, site - 1])


# ---------------------------------------------------------------------------
# fits


@dataclass(frozen=True)
class TwoExponentialFit:
    """Fit of a decaying series to A exp(-f t) + B exp(-s t), f >= s."""

    fast_rate: float
    slow_rate: float
    fast_amplitude: float
    slow_amplitude: float
    ok: bool

    @property
    def rate_ratio(self) -> float:
        return self.slow_rate / self.fast_rate

    def crossover_time(self, fraction: float = 0.05) -> float:
        """Time after which the fast component is below `fraction` of the
        slow one; marks the transition between the two regimes.  Falls
        back to 1/fast_rate when the components never cross."""
        f, s = self.fast_rate, self.slow_rate
        a, b = self.fast_amplitude, self.slow_amplitude
        if f <= s or a <= 0 or b <= 0:
            return 1.0 / max(f, 1e-300)
        return np.log(a / (fraction * b)) / (f - s)


def two_exponential_fit(
    times: Sequence[float], values: Sequence[float], floor: float = 1e-12
) -> TwoExponentialFit:
    """Nonlinear least squares of a two-exponential decay.

    A log-space breakpoint scan seeds the optimiser: the fast rate from
    the leading points, the slow rate from the trailing half.  A plain
    piecewise log-linear fit is not used as the result because it blends
    the early transient into the fast segment and underestimates the
    scale separation.  For a single-exponential series both fitted rates
    coincide.  Points at or below floor are discarded; ok=False signals
    that no fit was possible.
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    keep = y > floor
    t, y = t[keep], y[keep]
    if t.size < 6:
        return TwoExponentialFit(np.nan, np.nan, np.nan, np.nan, False)
    log_y = np.log(y)
    n_lead = max(3, t.size // 20)
    fast0 = max(-np.polyfit(t[:n_lead], log_y[:n_lead], 1)[0], 1e-9)
    slow0 = max(-np.polyfit(t[t.size // 2 :], log_y[t.size // 2 :], 1)[0], 1e-9)
    if fast0 < slow0:
        fast0, slow0 = slow0, fast0
    scale = float(y[0])

    def model(tt, a, f, b, s):
        return a * np.exp(-f * tt) + b * np.exp(-s * tt)

    try:
        params, _ = curve_fit(
            model,
            t,
            y,
            p0=[0.6 * scale, fast0, 0.4 * scale, slow0],
            bounds=([0.0, 0.0, 0.0, 0.0], [2.0 * scale, np.inf, 2.0 * scale, np.inf]),
            maxfev=20000,
        )
    except (RuntimeError, ValueError):
        return TwoExponentialFit(np.nan, np.nan, np.nan, np.nan, False)
    a, f, b, s = params
    if f < s:
        a, f, b, s = b, s, a, f
    return TwoExponentialFit(
        fast_rate=float(f),
        slow_rate=float(s),
        fast_amplitude=float(a),
        slow_amplitude=float(b),
        ok=True,
    )


def linear_fit(x: Sequence[float], y: Sequence[float]) -> tuple[float, float, float]:
    """Least-squares line fit; returns (slope, intercept, r_squared)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 2:
        raise InputError("need at least two points for a line fit")
    slope, intercept = np.polyfit(x, y, 1)
    pred = slope * x + intercept
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), r2


def exponential_rate(times: Sequence[float], values: Sequence[float]) -> float:
    """Decay rate from a log-linear fit; values must be positive."""
    t = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    if np.any(y <= 0):
        raise InputError("values must be positive for an exponential fit")
    slope, _ = np.polyfit(t, np.log(y), 1)
    return float(-slope)

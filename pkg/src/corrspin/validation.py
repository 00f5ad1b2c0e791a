"""Self-check suite behind the validate scenario.

Each check returns (name, passed, detail).  The suite cross-checks the
two engines against each other and against closed-form results, and
verifies the structural invariants of the propagation (trace,
hermiticity, positivity, integrator convergence order).  Failures are
collected, never raised, so one bad check cannot mask the others.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from . import analytics, full_engine, reduced_engine
from .errors import IntegrationDivergedError
from .evolution import default_dt
from .model import NetworkSpec, NoiseSpec, build_kernel

Check = tuple[str, bool, str]


def _run_check(name: str, fn: Callable[[], str]) -> Check:
    try:
        return name, True, fn()
    except IntegrationDivergedError as exc:
        return name, False, f"integration diverged: {exc}"
    except AssertionError as exc:
        return name, False, str(exc)
    except Exception as exc:  # keep the suite running past hard errors
        return name, False, f"{type(exc).__name__}: {exc}"


def check_kernel_psd() -> str:
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(20):
        positions = np.sort(rng.uniform(0, 10, size=6))
        positions += np.arange(6) * 1e-3  # keep strictly increasing
        xi = rng.uniform(0.05, 50)
        k = build_kernel(positions, xi).k
        eigs = np.linalg.eigvalsh(k)
        worst = min(worst, eigs[0] / max(eigs[-1], 1.0))
    assert worst > -1e-12, f"kernel eigenvalue ratio {worst:.3e} below -1e-12"
    return f"20 random kernels PSD (worst relative eigenvalue {worst:.1e})"


def check_dephasing_closed_form() -> str:
    rng = np.random.default_rng(11)
    net = NetworkSpec.chain(3, dephasing=rng.uniform(0.2, 1.5, size=3))
    noise = NoiseSpec(xi=1.3, c_dephasing=0.7)
    kernel = build_kernel(net.positions, noise.xi)
    rho = _random_density(rng, 8)
    fast = full_engine.apply_dephasing_dissipator(rho, net, kernel, noise)
    slow = _dephasing_double_sum(rho, net, kernel.k, noise.c_dephasing)
    err = np.max(np.abs(fast - slow))
    assert err < 1e-12, f"Hadamard dephasing deviates from double sum by {err:.3e}"
    return f"Hadamard form matches double sum (max dev {err:.1e})"


def check_jump_reconstruction() -> str:
    rng = np.random.default_rng(13)
    net = NetworkSpec.chain(4, relaxation=rng.uniform(0.2, 1.5, size=4))
    noise = NoiseSpec(xi=2.0, c_relax_down=0.9)
    kernel = build_kernel(net.positions, noise.xi)
    jumps = reduced_engine.build_jump_operators(net, kernel, noise)
    rho = _random_density(rng, 5)
    out = np.zeros_like(rho)
    for op in jumps.operators():
        out += op @ rho @ op.conj().T - 0.5 * (
            op.conj().T @ op @ rho + rho @ op.conj().T @ op
        )
    direct = _reduced_relaxation_double_sum(rho, net, kernel.k, noise.c_relax_down)
    err = np.max(np.abs(out - direct))
    assert err < 1e-10, f"jump operators deviate from double sum by {err:.3e}"
    return f"jump set reproduces double sum (max dev {err:.1e})"


def check_engine_equivalence(mutated_reduced_h=None) -> str:
    n = 4
    worst = 0.0
    for v, nu in ((1.0, 0.0), (0.0, 1.0)):
        net = NetworkSpec.chain(n, dephasing=v, relaxation=nu)
        noise = NoiseSpec(xi=2.0, c_dephasing=1.0, c_relax_down=1.0)
        kernel = build_kernel(net.positions, noise.xi)
        dt = 2e-3
        liou = full_engine.make_liouvillian(net, kernel, noise)
        s_full, _ = full_engine.evolve_full(
            full_engine.FullState.computational(n, [1]),
            liou,
            t_final=np.pi,
            dt=dt,
            sample_every=100,
            store_states=True,
        )
        h_red = (
            mutated_reduced_h(net)
            if mutated_reduced_h is not None
            else reduced_engine.build_hamiltonian_reduced(net)
        )
        gen = reduced_engine.generator_from_parts(
            h_red,
            reduced_engine.build_dephasing_rates(net, kernel, noise) if v else None,
            reduced_engine.build_jump_operators(net, kernel, noise) if nu else None,
            frame_omega=net.omega_q,
        )
        s_red, _ = reduced_engine.evolve_reduced(
            reduced_engine.ReducedState.site(n, 1),
            gen,
            t_final=np.pi,
            dt=dt,
            sample_every=100,
            store_states=True,
        )
        for full_state, red_state in zip(s_full.states, s_red.states):
            projected = full_engine.project_to_reduced(full_state, n)
            worst = max(worst, float(np.max(np.abs(projected - red_state))))
    assert worst < 1e-6, f"engines deviate by {worst:.3e} (tolerance 1e-6)"
    return f"full and reduced engines agree (max element dev {worst:.1e})"


def check_trace_hermiticity(dt: float | None = None) -> str:
    net = NetworkSpec.chain(4, dephasing=1.0, relaxation=1.0)
    noise = NoiseSpec(xi=2.0, c_dephasing=1.0, c_relax_down=1.0)
    kernel = build_kernel(net.positions, noise.xi)
    liou = full_engine.make_liouvillian(net, kernel, noise)
    if dt is None:
        dt = default_dt(liou.energy_scale)
    series, final = full_engine.evolve_full(
        full_engine.FullState.computational(4, [1]),
        liou,
        t_final=np.pi,
        dt=dt,
        sample_every=1,
        store_states=True,
    )
    trace_err = max(abs(np.trace(s).real - 1.0) for s in series.states)
    herm_err = max(np.max(np.abs(s - s.conj().T)) for s in series.states)
    assert trace_err < 1e-8, f"trace drift {trace_err:.3e}"
    assert herm_err < 1e-8, f"hermiticity drift {herm_err:.3e}"
    return f"trace/hermiticity preserved (drifts {trace_err:.1e}, {herm_err:.1e})"


def check_positivity() -> str:
    net = NetworkSpec.chain(4, dephasing=1.0, relaxation=1.0)
    noise = NoiseSpec(xi=0.5, c_dephasing=1.0, c_relax_down=1.0)
    kernel = build_kernel(net.positions, noise.xi)
    liou = full_engine.make_liouvillian(net, kernel, noise)
    series, _ = full_engine.evolve_full(
        full_engine.FullState.computational(4, [1]),
        liou,
        t_final=np.pi,
        dt=None,
        sample_every=10,
        store_states=True,
    )
    min_eig = min(float(np.linalg.eigvalsh(s)[0]) for s in series.states)
    assert min_eig > -1e-6, f"negative eigenvalue {min_eig:.3e}"
    return f"positivity preserved (min eigenvalue {min_eig:.1e})"


def check_rk4_convergence(dt: float | None = None) -> str:
    net = NetworkSpec.chain(4, dephasing=1.0)
    noise = NoiseSpec(xi=1.0, c_dephasing=1.0)
    kernel = build_kernel(net.positions, noise.xi)
    liou = full_engine.make_liouvillian(net, kernel, noise)
    base_dt = dt if dt is not None else default_dt(liou.energy_scale)
    finals = []
    for factor in (1, 2, 4):
        _, final = full_engine.evolve_full(
            full_engine.FullState.computational(4, [1]),
            liou,
            t_final=np.pi / 2,
            dt=base_dt / factor,
        )
        finals.append(final.rho)
    err_coarse = np.max(np.abs(finals[0] - finals[1]))
    err_fine = np.max(np.abs(finals[1] - finals[2]))
    assert err_fine < 1e-7, f"halved-dt deviation {err_fine:.3e} too large"
    ratio = err_coarse / max(err_fine, 1e-300)
    assert 8.0 < ratio < 40.0, (
        f"error ratio {ratio:.1f} inconsistent with 4th-order convergence"
    )
    return f"4th-order convergence (halving ratio {ratio:.1f}, residual {err_fine:.1e})"


def check_transfer_coherent() -> str:
    net = NetworkSpec.chain(8)
    gen = reduced_engine.make_generator(net, build_kernel(net.positions, 0.0), NoiseSpec(xi=0.0))
    series, _ = reduced_engine.evolve_reduced(
        reduced_engine.ReducedState.site(8, 1), gen, t_final=np.pi / 2, dt=2e-4
    )
    q = analytics.transfer_quality(series, net)
    assert q >= 1.0 - 1e-6, f"coherent transfer quality {q:.8f} < 1 - 1e-6"
    return f"coherent transfer quality {q:.8f}"


def check_blocking_closed_form() -> str:
    net = NetworkSpec.uncoupled(4, relaxation=1.0)
    noise = NoiseSpec(xi=float("inf"), c_relax_down=1.0)
    gen = reduced_engine.make_generator(net, build_kernel(net.positions, noise.xi), noise)
    state, _, capped = reduced_engine.evolve_to_stationary(
        reduced_engine.ReducedState.site(4, 1), gen
    )
    assert not capped, "long-time evolution hit the time cap"
    sz1 = 2.0 * state.rho[0, 0].real - 1.0
    predicted = analytics.predict_final_state(net.relaxation_couplings).sz_first
    err = abs(sz1 - predicted)
    assert err < 1e-3, f"blocking value deviates from closed form by {err:.3e}"
    return f"blocking closed form matched (dev {err:.1e})"


ALL_CHECKS: list[tuple[str, Callable[[], str]]] = [
    ("kernel-psd", check_kernel_psd),
    ("dephasing-closed-form", check_dephasing_closed_form),
    ("jump-reconstruction", check_jump_reconstruction),
    ("engine-equivalence", check_engine_equivalence),
    ("trace-hermiticity", check_trace_hermiticity),
    ("positivity", check_positivity),
    ("rk4-convergence", check_rk4_convergence),
    ("transfer-coherent", check_transfer_coherent),
    ("blocking-closed-form", check_blocking_closed_form),
]


def run_all(cfg=None) -> list[Check]:
    """Run every check; cfg.dt (if set) overrides the step of the
    step-sensitive checks so forced-failure runs can be exercised."""
    dt = getattr(cfg, "dt", None) if cfg is not None else None
    results = []
    for name, fn in ALL_CHECKS:
        if dt is not None and name in ("trace-hermiticity", "rk4-convergence"):
            results.append(_run_check(name, lambda f=fn: f(dt=dt)))
        else:
            results.append(_run_check(name, fn))
    return results


# --- independent double-sum oracles (kept dumb on purpose) -----------------


def _random_density(rng: np.random.Generator, dim: int) -> np.ndarray:
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = a @ a.conj().T
    return rho / np.trace(rho)


def _dephasing_double_sum(
    rho: np.ndarray, net: NetworkSpec, k: np.ndarray, c: float
) -> np.ndarray:
    n = net.n_spins
    z = full_engine.sigma_z_diagonals(n)
    v = net.dephasing_couplings
    out = np.zeros_like(rho, dtype=complex)
    for j in range(n):
        for m in range(n):
            w = c * v[j] * v[m] * k[j, m]
            zj = np.diag(z[j])
            zm = np.diag(z[m])
            out += w * (zm @ rho @ zj - 0.5 * (zj @ zm @ rho + rho @ zj @ zm))
    return out


def _reduced_relaxation_double_sum(
    rho: np.ndarray, net: NetworkSpec, k: np.ndarray, c: float
) -> np.ndarray:
    n = net.n_spins
    nu = net.relaxation_couplings
    out = np.zeros_like(rho, dtype=complex)
    for j in range(n):
        sm_j = np.zeros((n + 1, n + 1))
        sm_j[n, j] = 1.0  # |g><j|
        for m in range(n):
            sm_m = np.zeros((n + 1, n + 1))
            sm_m[n, m] = 1.0
            w = c * nu[j] * nu[m] * k[j, m]
            out += w * (
                sm_m @ rho @ sm_j.T
                - 0.5 * (sm_j.T @ sm_m @ rho + rho @ sm_j.T @ sm_m)
            )
    return out

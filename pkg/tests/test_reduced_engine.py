import numpy as np
import pytest

from helpers import fit_decay_rate, random_density

from corrspin import full_engine as fe, reduced_engine as red
from corrspin.errors import InputError, NotPositiveSemidefiniteError
from corrspin.model import CorrelationKernel, NetworkSpec, NoiseSpec, build_kernel


class TestHamiltonian:
    def test_pair_block_lab_frame(self):
        net = NetworkSpec.chain(2, g=1.0, omega_q=100.0)
        h = red.build_hamiltonian_reduced(net, frame="lab")
        assert np.allclose(h, [[200.0, 1.0, 0.0], [1.0, 200.0, 0.0], [0.0, 0.0, 0.0]])

    def test_single_spin(self):
        net = NetworkSpec(1, 50.0, np.zeros((1, 1)), [0.0], [0.0], [0.0])
        h = red.build_hamiltonian_reduced(net, frame="lab")
        assert np.allclose(h, np.diag([100.0, 0.0]))

    def test_spectrum_subset_of_full(self):
        for n in (3, 4, 6):
            net = NetworkSpec.chain(n, g=1.3, omega_q=40.0)
            reduced_eigs = np.sort(np.linalg.eigvalsh(
                red.build_hamiltonian_reduced(net, frame="lab")))
            full_h = fe.build_hamiltonian_full(net, frame="lab")
            ground_energy = -n * net.omega_q
            full_eigs = np.sort(np.linalg.eigvalsh(full_h)) - ground_energy
            for ev in reduced_eigs:
                assert np.min(np.abs(full_eigs - ev)) < 1e-9


class TestDephasingRates:
    def test_diagonal_zero_symmetric_nonnegative(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            n = int(rng.integers(2, 7))
            net = NetworkSpec.chain(n, dephasing=rng.uniform(0, 2, size=n))
            noise = NoiseSpec(xi=10 ** rng.uniform(-2, 2), c_dephasing=rng.uniform(0.1, 2))
            lam = red.build_dephasing_rates(
                net, build_kernel(net.positions, noise.xi), noise).lam
            assert np.allclose(lam, lam.T)
            assert np.all(np.diag(lam) == 0.0)
            assert np.all(lam >= 0.0)

    def test_uncorrelated_counts_flipped_spins(self):
        # K = identity, equal v: block rate 2*gamma, ground rate gamma
        c, v = 0.7, 1.0
        gamma = 2.0 * c * v**2
        net = NetworkSpec.chain(4, dephasing=v)
        noise = NoiseSpec(xi=0.0, c_dephasing=c)
        lam = red.build_dephasing_rates(net, build_kernel(net.positions, 0.0), noise).lam
        block = lam[:4, :4]
        off = block[~np.eye(4, dtype=bool)]
        assert np.allclose(off, 2.0 * gamma)
        assert np.allclose(lam[:4, 4], gamma)

    def test_common_bath_block_is_decoherence_free(self):
        c, v = 0.9, 1.0
        for n in (2, 5, 9):
            net = NetworkSpec.chain(n, dephasing=v)
            noise = NoiseSpec(xi=np.inf, c_dephasing=c)
            lam = red.build_dephasing_rates(
                net, build_kernel(net.positions, np.inf), noise).lam
            assert np.max(np.abs(lam[:n, :n])) == 0.0
            assert np.allclose(lam[:n, n], 2.0 * c * v**2)

    def test_ground_coherence_rate_independent_of_xi(self):
        rng = np.random.default_rng(4)
        v = rng.uniform(0.1, 2.0, size=5)
        c = 1.3
        net = NetworkSpec.chain(5, dephasing=v)
        for xi in (0.0, 0.3, 2.0, 50.0, np.inf):
            lam = red.build_dephasing_rates(
                net, build_kernel(net.positions, xi), NoiseSpec(xi=xi, c_dephasing=c)).lam
            assert np.max(np.abs(lam[:5, 5] - 2.0 * c * v**2)) < 1e-12


class TestJumpOperators:
    def test_identity_kernel_gives_site_channels(self):
        nu = np.array([0.5, 1.0, 1.5])
        net = NetworkSpec.chain(3, relaxation=nu)
        noise = NoiseSpec(xi=0.0, c_relax_down=0.8)
        jumps = red.build_jump_operators(net, build_kernel(net.positions, 0.0), noise)
        assert len(jumps.rates) == 3
        assert np.allclose(np.sort(jumps.rates), np.sort(0.8 * nu**2))
        for op in jumps.operators():
            # each operator lowers exactly one site into the ground state
            assert np.count_nonzero(np.abs(op) > 1e-12) == 1
            assert np.all(np.abs(op[:3, :]) < 1e-12)

    def test_common_bath_single_channel_into_decaying_state(self):
        nu = np.array([1.0, 2.0, 2.0])
        net = NetworkSpec.chain(3, relaxation=nu)
        noise = NoiseSpec(xi=np.inf, c_relax_down=1.0)
        jumps = red.build_jump_operators(net, build_kernel(net.positions, np.inf), noise)
        assert len(jumps.rates) == 1
        assert jumps.rates[0] == pytest.approx(float(nu @ nu))
        direction = jumps.weights[0] / np.linalg.norm(jumps.weights[0])
        d = nu / np.linalg.norm(nu)
        assert np.allclose(np.abs(direction), d)

    def test_trace_identity(self):
        net = NetworkSpec.chain(4, relaxation=1.0)
        noise = NoiseSpec(xi=2.0, c_relax_down=0.6)
        jumps = red.build_jump_operators(net, build_kernel(net.positions, 2.0), noise)
        assert np.sum(jumps.rates) == pytest.approx(4 * 0.6)

    def test_reconstructs_double_sum_on_random_states(self):
        rng = np.random.default_rng(6)
        nu = rng.uniform(0.3, 1.4, size=4)
        net = NetworkSpec.chain(4, relaxation=nu)
        noise = NoiseSpec(xi=1.6, c_relax_down=0.9)
        kernel = build_kernel(net.positions, noise.xi)
        jumps = red.build_jump_operators(net, kernel, noise)
        m = noise.c_relax_down * (nu[:, None] * nu[None, :]) * kernel.k
        assert np.max(np.abs(jumps.absorption_matrix()[:4, :4] - m)) < 1e-12
        for _ in range(5):
            rho = random_density(rng, 5)
            via_ops = np.zeros_like(rho)
            for op in jumps.operators():
                via_ops += op @ rho @ op.conj().T - 0.5 * (
                    op.conj().T @ op @ rho + rho @ op.conj().T @ op
                )
            # direct evaluation of the double sum with |g><k| projectors
            direct = np.zeros_like(rho)
            for j in range(4):
                for k in range(4):
                    sm_k = np.zeros((5, 5)); sm_k[4, k] = 1.0
                    sm_j = np.zeros((5, 5)); sm_j[4, j] = 1.0
                    direct += m[j, k] * (
                        sm_k @ rho @ sm_j.conj().T
                        - 0.5 * (sm_j.conj().T @ sm_k @ rho + rho @ sm_j.conj().T @ sm_k)
                    )
            assert np.max(np.abs(via_ops - direct)) < 1e-10

    def test_rejects_non_psd_kernel(self):
        bad = np.array([[1.0, 0.9, 0.1], [0.9, 1.0, 0.9], [0.1, 0.9, 1.0]])
        kernel = CorrelationKernel.__new__(CorrelationKernel)
        object.__setattr__(kernel, "k", bad)
        net = NetworkSpec.chain(3, relaxation=1.0)
        noise = NoiseSpec(xi=1.0, c_relax_down=1.0)
        with pytest.raises(NotPositiveSemidefiniteError):
            red.build_jump_operators(net, kernel, noise)


class TestEvolution:
    def test_dephasing_keeps_populations(self):
        rng = np.random.default_rng(7)
        net = NetworkSpec.chain(5, dephasing=1.0)
        noise = NoiseSpec(xi=1.0, c_dephasing=1.0)
        gen = red.ReducedGenerator(
            h=np.zeros((6, 6)),
            lam=red.build_dephasing_rates(net, build_kernel(net.positions, 1.0), noise).lam,
            m_block=None, frame_omega=net.omega_q, energy_scale=4.0,
        )
        rho0 = random_density(rng, 6)
        series, final = red.evolve_reduced(red.ReducedState(rho0), gen,
                                           t_final=2.0, dt=1e-3, store_states=True)
        assert np.allclose(np.diag(final.rho), np.diag(rho0), atol=1e-12)

    def test_perfect_transfer_and_periodicity_n20(self):
        net = NetworkSpec.chain(20, g=1.0)
        gen = red.make_generator(net, build_kernel(net.positions, 0.0), NoiseSpec(xi=0.0))
        # 6400 steps over [0, pi]: the arrival time pi/2 falls on sample 50
        series, final = red.evolve_reduced(
            red.ReducedState.site(20, 1), gen, t_final=np.pi, dt=np.pi / 6400,
            sample_every=64, store_states=True,
        )
        arrival = int(np.argmin(np.abs(series.times - np.pi / 2)))
        assert abs(series.times[arrival] - np.pi / 2) < 1e-12
        assert series.sz[arrival, -1] == pytest.approx(1.0, abs=1e-6)
        assert final.rho[0, 0].real == pytest.approx(1.0, abs=1e-6)

    def test_uncoupled_common_bath_blocking_value(self):
        for n, expected in ((2, -0.5), (10, 0.62)):
            net = NetworkSpec.uncoupled(n, relaxation=1.0)
            noise = NoiseSpec(xi=np.inf, c_relax_down=1.0)
            gen = red.make_generator(net, build_kernel(net.positions, np.inf), noise)
            state, t, capped = red.evolve_to_stationary(red.ReducedState.site(n, 1), gen)
            assert not capped
            sz1 = 2.0 * state.rho[0, 0].real - 1.0
            assert sz1 == pytest.approx(expected, abs=1e-3)

    def test_matches_full_engine_elementwise(self):
        n = 4
        for v, nu in ((1.0, 0.0), (0.0, 1.0)):
            net = NetworkSpec.chain(n, dephasing=v, relaxation=nu)
            noise = NoiseSpec(xi=2.0, c_dephasing=1.0, c_relax_down=1.0)
            kernel = build_kernel(net.positions, noise.xi)
            dt = 2e-3
            liou = fe.make_liouvillian(net, kernel, noise)
            s_full, _ = fe.evolve_full(
                fe.FullState.computational(n, [1]), liou,
                t_final=np.pi, dt=dt, sample_every=157, store_states=True,
            )
            gen = red.make_generator(net, kernel, noise)
            s_red, _ = red.evolve_reduced(
                red.ReducedState.site(n, 1), gen,
                t_final=np.pi, dt=dt, sample_every=157, store_states=True,
            )
            for rho_f, rho_r in zip(s_full.states, s_red.states):
                proj = fe.project_to_reduced(rho_f, n)
                assert np.max(np.abs(proj - rho_r)) < 1e-10

    def test_rejects_excitation_gain(self):
        net = NetworkSpec.chain(3, relaxation=1.0)
        noise = NoiseSpec(xi=1.0, c_relax_down=1.0, c_relax_up=0.5)
        with pytest.raises(InputError, match="full engine"):
            red.make_generator(net, build_kernel(net.positions, 1.0), noise)

    def test_site_relaxation_rate(self):
        net = NetworkSpec.uncoupled(1, relaxation=1.0)
        noise = NoiseSpec(xi=0.0, c_relax_down=0.8)
        gen = red.make_generator(net, build_kernel(net.positions, 0.0), noise)
        series, _ = red.evolve_reduced(red.ReducedState.site(1, 1), gen,
                                       t_final=3.0, dt=1e-3, sample_every=100)
        excited = (series.sz[1:, 0] + 1.0) / 2.0
        assert fit_decay_rate(series.times[1:], excited) == pytest.approx(0.8, rel=1e-4)

import numpy as np
import pytest

from corrspin.errors import InputError, NotPositiveSemidefiniteError
from corrspin.model import (
    CorrelationKernel,
    NetworkSpec,
    NoiseSpec,
    build_kernel,
    chain_coupling_profile,
)


class TestBuildKernel:
    def test_delta_correlated_limit_is_identity(self):
        k = build_kernel([0.0, 1.0], 0.0)
        assert np.array_equal(k.k, np.eye(2))

    def test_gaussian_value_at_unit_distance(self):
        # 2**(-((1-0)/1)**2) = 0.5
        k = build_kernel([0.0, 1.0], 1.0)
        assert k.k[0, 1] == pytest.approx(0.5, abs=1e-15)

    def test_long_correlation_regime(self):
        k = build_kernel([0.0, 1.0, 2.0], 20.0)
        assert np.all(k.k >= 2.0 ** (-0.01) - 1e-12)

    def test_infinite_xi_is_all_ones(self):
        k = build_kernel(np.arange(5.0), np.inf)
        assert np.array_equal(k.k, np.ones((5, 5)))

    def test_rejects_non_finite_positions(self):
        with pytest.raises(InputError):
            build_kernel([0.0, np.nan], 1.0)
        with pytest.raises(InputError):
            build_kernel([0.0, 1.0], -1.0)

    def test_tiny_entries_flushed_to_zero(self):
        k = build_kernel([0.0, 20.0], 0.5)  # 2**(-1600)
        assert k.k[0, 1] == 0.0

    def test_symmetric_psd_for_random_inputs(self):
        rng = np.random.default_rng(3)
        for _ in range(25):
            n = rng.integers(2, 9)
            positions = np.sort(rng.uniform(0, 20, size=n))
            positions += np.arange(n) * 1e-6
            xi = 10 ** rng.uniform(-2, 2)
            k = build_kernel(positions, xi).k
            assert np.array_equal(k, k.T)
            eigs = np.linalg.eigvalsh(k)
            assert eigs[0] >= -1e-12 * max(eigs[-1], 1.0)

    def test_off_diagonal_monotone_in_xi(self):
        positions = np.arange(6.0)
        xis = np.logspace(-2, 3, 40)
        prev = -np.inf
        for xi in xis:
            val = build_kernel(positions, xi).k[0, 5]
            assert val >= prev - 1e-15
            prev = val


class TestChainCouplingProfile:
    def test_two_spins(self):
        c = chain_coupling_profile(2, 1.0)
        assert c[0, 1] == pytest.approx(1.0)

    def test_four_spins(self):
        c = chain_coupling_profile(4, 1.0)
        expected = [np.sqrt(3.0), 2.0, np.sqrt(3.0)]
        assert np.allclose(np.diag(c, 1), expected)

    def test_twenty_spins_maximal_in_middle(self):
        c = chain_coupling_profile(20, 1.0)
        gj = np.diag(c, 1)
        assert gj[9] == pytest.approx(10.0)
        assert np.argmax(gj) in (9, 10)

    def test_mirror_symmetry(self):
        for n in (3, 8, 13):
            gj = np.diag(chain_coupling_profile(n, 0.7), 1)
            assert np.allclose(gj, gj[::-1])

    def test_rejects_single_spin(self):
        with pytest.raises(InputError):
            chain_coupling_profile(1, 1.0)


class TestSpecs:
    def test_network_validation(self):
        with pytest.raises(InputError):
            NetworkSpec(2, 100.0, np.array([[0.0, 1.0], [2.0, 0.0]]),
                        [0.0, 1.0], [0.0, 0.0], [0.0, 0.0])
        with pytest.raises(InputError):
            NetworkSpec.chain(3, positions=np.array([0.0, 2.0, 1.0]))
        with pytest.raises(InputError):
            NetworkSpec.chain(3, dephasing=-1.0)

    def test_network_arrays_are_readonly(self):
        net = NetworkSpec.chain(4)
        with pytest.raises(ValueError):
            net.coupling[0, 1] = 5.0

    def test_scalar_couplings_broadcast(self):
        net = NetworkSpec.chain(5, dephasing=0.5, relaxation=1.0)
        assert np.all(net.dephasing_couplings == 0.5)
        assert net.relaxation_couplings.shape == (5,)

    def test_noise_validation(self):
        NoiseSpec(xi=np.inf, c_dephasing=1.0)
        with pytest.raises(InputError):
            NoiseSpec(xi=-0.1)
        with pytest.raises(InputError):
            NoiseSpec(xi=1.0, c_relax_down=-1.0)

    def test_kernel_type_rejects_non_psd(self):
        bad = np.array([[1.0, 0.9, 0.1], [0.9, 1.0, 0.9], [0.1, 0.9, 1.0]])
        assert np.linalg.eigvalsh(bad)[0] < -1e-6
        with pytest.raises(NotPositiveSemidefiniteError):
            CorrelationKernel(bad)

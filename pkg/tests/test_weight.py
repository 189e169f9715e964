import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qthermo.errors import ValidationError
from qthermo.weight import (
    GaussianWavepacket,
    OffsetMixture,
    WeightConfig,
    fannes_bound,
    gram_matrix,
    gram_overlap,
    mixture_entropy,
    mixture_mean_energy,
    mixture_position_variance,
    mixture_spectrum,
    mixture_trace_distance,
)

X = np.linspace(-40, 40, 2**15)
DX = X[1] - X[0]


def grid_density(m: OffsetMixture) -> np.ndarray:
    """Density matrix of a mixture sampled on a coarse grid (oracle only)."""
    x = np.linspace(-12, 12, 600)
    dx = x[1] - x[0]
    rho = np.zeros((x.size, x.size), dtype=complex)
    for p, a in zip(m.probabilities, m.offsets):
        psi = m.base.amplitude(x - a) * np.exp(1j * m.base.p0 * a) * np.sqrt(dx)
        rho += p * np.outer(psi, psi.conj())
    return rho


class TestGaussianWavepacket:
    def test_normalised(self):
        w = GaussianWavepacket(center=0.3, sigma=0.7, p0=2.0)
        assert np.sum(np.abs(w.amplitude(X)) ** 2) * DX == pytest.approx(1.0, abs=1e-12)

    def test_sigma_is_position_std(self):
        w = GaussianWavepacket(sigma=1.3)
        dens = np.abs(w.amplitude(X)) ** 2 * DX
        assert np.sum(X**2 * dens) == pytest.approx(1.3**2, rel=1e-10)

    def test_rejects_bad_width(self):
        with pytest.raises(ValidationError):
            GaussianWavepacket(sigma=0.0)


class TestGram:
    def test_same_state(self):
        assert gram_overlap(0.4, 0.4, GaussianWavepacket()) == pytest.approx(1.0)

    def test_one_sigma_grid_oracle(self):
        w = GaussianWavepacket(sigma=1.0)
        grid = np.sum(w.amplitude(X).conj() * w.amplitude(X - 1.0)) * DX
        assert grid.real == pytest.approx(np.exp(-1 / 8), abs=1e-12)
        assert gram_overlap(0.0, 1.0, w).real == pytest.approx(grid.real, abs=1e-12)
        assert gram_overlap(0.0, 1.0, w).real == pytest.approx(0.8825, abs=5e-5)

    def test_momentum_phase_grid_oracle(self):
        w = GaussianWavepacket(sigma=0.8, p0=1.7)
        a, b = 0.3, -0.9
        # Gamma_a psi(x) = psi(x - a)
        grid = np.sum(w.amplitude(X - a).conj() * w.amplitude(X - b)) * DX
        assert gram_overlap(a, b, w) == pytest.approx(grid, abs=1e-12)

    def test_far_packets_are_zero(self):
        assert gram_overlap(0.0, 100.0, GaussianWavepacket(sigma=1.0)) == 0.0

    def test_matrix_hermitian_psd(self, rng):
        a = rng.normal(size=6)
        g = gram_matrix(a, a, GaussianWavepacket(sigma=0.5, p0=0.4))
        np.testing.assert_allclose(g, g.conj().T, atol=1e-15)
        assert np.linalg.eigvalsh(g).min() > -1e-12


class TestMixtureEntropy:
    def test_single(self):
        assert mixture_entropy(OffsetMixture.single(GaussianWavepacket(), 3.0)) == 0.0

    def test_orthogonal_limit(self):
        m = OffsetMixture([0.5, 0.5], [0.0, 200.0], GaussianWavepacket())
        assert mixture_entropy(m) == pytest.approx(np.log(2), abs=1e-9)

    def test_one_sigma_pair(self):
        m = OffsetMixture([0.5, 0.5], [0.0, 1.0], GaussianWavepacket())
        c = np.exp(-1 / 8)
        lam = np.array([(1 + c) / 2, (1 - c) / 2])
        ref = float(-np.sum(lam * np.log(lam)))
        assert mixture_entropy(m) == pytest.approx(ref, abs=1e-14)
        grid_lam = np.linalg.eigvalsh(grid_density(m))[::-1][:2]
        np.testing.assert_allclose(grid_lam, lam, atol=1e-9)

    def test_random_mixture_grid_oracle(self, rng):
        p = rng.dirichlet(np.ones(4))
        m = OffsetMixture(p, rng.uniform(-2, 2, 4), GaussianWavepacket(sigma=0.6, p0=0.9))
        lam = np.clip(np.linalg.eigvalsh(grid_density(m)), 0, None)
        lam = lam[lam > 1e-14]
        assert mixture_entropy(m) == pytest.approx(float(-np.sum(lam * np.log(lam))), abs=1e-8)

    def test_momentum_phase_irrelevant(self, rng):
        p = rng.dirichlet(np.ones(5))
        a = rng.normal(size=5)
        s = np.sqrt(p)
        full = s[:, None] * gram_matrix(a, a, GaussianWavepacket(sigma=0.4, p0=3.1)) * s[None, :]
        lam = np.sort(np.linalg.eigvalsh(full))[::-1]
        np.testing.assert_allclose(mixture_spectrum(OffsetMixture(p, a, GaussianWavepacket(sigma=0.4, p0=3.1))),
                                   np.clip(lam, 0, None), atol=1e-13)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**31), st.integers(2, 40), st.floats(0.02, 50.0), st.floats(-3, 3))
    def test_grid_and_gram_forms_agree(self, seed, n, sigma, p0):
        rng = np.random.default_rng(seed)
        m = OffsetMixture(rng.dirichlet(np.ones(n)), rng.normal(size=n), GaussianWavepacket(sigma=sigma, p0=p0))
        a, b = mixture_spectrum(m, "grid"), mixture_spectrum(m, "gram")
        k = min(a.size, b.size)
        np.testing.assert_allclose(a[:k], b[:k], atol=1e-13)
        assert np.all(a[k:] < 1e-13) and np.all(b[k:] < 1e-13)

    def test_unknown_form(self):
        with pytest.raises(ValidationError):
            mixture_spectrum(OffsetMixture.single(GaussianWavepacket()), "fourier")

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**31), st.integers(2, 6))
    def test_non_increasing_in_width(self, seed, n):
        rng = np.random.default_rng(seed)
        p, a = rng.dirichlet(np.ones(n)), rng.normal(size=n)
        s = [mixture_entropy(OffsetMixture(p, a, GaussianWavepacket(sigma=w))) for w in (0.1, 1.0, 10.0)]
        assert s[0] + 1e-12 >= s[1] >= s[2] - 1e-12
        assert s[0] <= float(-np.sum(p * np.log(p))) + 1e-12


class TestMoments:
    def test_single_mean(self):
        assert mixture_mean_energy(OffsetMixture.single(GaussianWavepacket())) == 0.0

    def test_weighted_mean(self):
        m = OffsetMixture([0.3, 0.7], [1.0, -1.0], GaussianWavepacket())
        assert mixture_mean_energy(m) == pytest.approx(-0.4)
        assert mixture_mean_energy(m, WeightConfig(mg=2.0)) == pytest.approx(-0.8)

    def test_variance_single(self):
        assert mixture_position_variance(OffsetMixture.single(GaussianWavepacket(sigma=0.7))) == pytest.approx(0.49)

    def test_variance_bernoulli(self):
        m = OffsetMixture([0.5, 0.5], [0.0, 2.0], GaussianWavepacket(sigma=1.0))
        assert mixture_position_variance(m) == pytest.approx(2.0)

    def test_variance_grid_oracle(self, rng):
        m = OffsetMixture(rng.dirichlet(np.ones(4)), rng.uniform(-3, 3, 4), GaussianWavepacket(sigma=0.9))
        dens = sum(p * np.abs(m.base.amplitude(X - a)) ** 2 for p, a in zip(m.probabilities, m.offsets)) * DX
        mean = np.sum(X * dens)
        assert mixture_position_variance(m) == pytest.approx(np.sum((X - mean) ** 2 * dens), abs=1e-6)


class TestMixtureConstruction:
    def test_merges_equal_offsets(self):
        m = OffsetMixture.from_entries([(0.25, 1.0), (0.25, 1.0 + 1e-14), (0.5, 0.0)], GaussianWavepacket())
        assert len(m) == 2
        np.testing.assert_allclose(m.probabilities, [0.5, 0.5])

    def test_rejects_bad_probabilities(self):
        with pytest.raises(ValidationError):
            OffsetMixture([0.5, 0.6], [0.0, 1.0])
        with pytest.raises(ValidationError):
            OffsetMixture([1.0], [np.inf])


class TestTraceDistanceAndFannes:
    def test_grid_oracle(self, rng):
        w = GaussianWavepacket(sigma=0.7)
        m1 = OffsetMixture(rng.dirichlet(np.ones(3)), rng.uniform(-1, 1, 3), w)
        m2 = OffsetMixture(rng.dirichlet(np.ones(2)), rng.uniform(-1, 1, 2), w)
        ref = np.sum(np.abs(np.linalg.eigvalsh(grid_density(m1) - grid_density(m2))))
        assert mixture_trace_distance(m1, m2) == pytest.approx(ref, abs=1e-8)

    def test_orthogonal_pure(self):
        w = GaussianWavepacket()
        d = mixture_trace_distance(OffsetMixture.single(w, 0.0), OffsetMixture.single(w, 100.0))
        assert d == pytest.approx(2.0, abs=1e-12)

    def test_fannes_inequality_holds(self, rng):
        w = GaussianWavepacket(sigma=0.3)
        for _ in range(20):
            m1 = OffsetMixture(rng.dirichlet(np.ones(3)), rng.uniform(-1, 1, 3), w)
            m2 = OffsetMixture(rng.dirichlet(np.ones(3)), rng.uniform(-1, 1, 3), w)
            ds, D, bound = fannes_bound(m1, m2)
            if D < 1 / np.e:
                assert ds <= bound + 1e-12

    def test_broad_packet_makes_mixture_nearly_pure(self):
        m = OffsetMixture([0.5, 0.5], [0.0, 1.0], GaussianWavepacket(sigma=100.0))
        ds, D, bound = fannes_bound(m, OffsetMixture.single(m.base, 0.5))
        assert D < 1e-4
        assert ds <= bound

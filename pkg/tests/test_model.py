import numpy as np
import pytest

from mblkit.model import (
    ChainSpec,
    DimensionCapError,
    DisorderRealization,
    build_dense_hamiltonian,
    build_hamiltonian_mpo,
    build_shifted_mpo,
    sample_disorder,
)


def realization(length, spin="half", w=6.0, seed=0, dist="symmetric"):
    spec = ChainSpec(length=length, local_spin=spin, disorder_strength=w,
                     field_distribution=dist, seed=seed)
    return sample_disorder(spec)


class TestChainSpec:
    def test_rejects_short_chain(self):
        with pytest.raises(ValueError):
            ChainSpec(length=1)

    def test_rejects_negative_disorder(self):
        with pytest.raises(ValueError):
            ChainSpec(length=4, disorder_strength=-1.0)

    def test_rejects_unknown_spin(self):
        with pytest.raises(ValueError):
            ChainSpec(length=4, local_spin="three_halves")

    def test_local_dims(self):
        assert ChainSpec(length=2, local_spin="half").local_dim == 2
        assert ChainSpec(length=2, local_spin="one").local_dim == 3


class TestSampleDisorder:
    def test_zero_disorder_gives_zero_fields(self):
        r = realization(12, w=0.0, seed=3)
        assert np.all(r.fields == 0.0)

    def test_deterministic_given_seed(self):
        spec = ChainSpec(length=12, disorder_strength=6.0, seed=42)
        assert np.array_equal(sample_disorder(spec).fields,
                              sample_disorder(spec).fields)

    def test_different_seeds_differ(self):
        a = realization(12, seed=1).fields
        b = realization(12, seed=2).fields
        assert not np.array_equal(a, b)

    def test_symmetric_support(self):
        r = realization(16, w=6.0, seed=9)
        assert np.all(r.fields >= -6.0) and np.all(r.fields <= 6.0)

    def test_positive_support(self):
        r = realization(16, w=6.0, seed=9, dist="positive")
        assert np.all(r.fields >= 0.0) and np.all(r.fields <= 6.0)

    def test_uniform_moments(self):
        # mean of uniform(-6, 6) over 1e4 x 16 samples, 3 sigma band
        samples = np.concatenate(
            [realization(16, w=6.0, seed=s).fields for s in range(10_000)]
        )
        sigma_mean = (12.0 / np.sqrt(12.0)) / np.sqrt(samples.size)
        assert abs(samples.mean()) < 3.0 * sigma_mean

    def test_fields_validated_against_support(self):
        spec = ChainSpec(length=4, disorder_strength=1.0)
        with pytest.raises(ValueError):
            DisorderRealization(spec=spec, fields=np.array([0.0, 2.0, 0.0, 0.0]))


class TestDenseHamiltonian:
    def test_two_site_spin_half_spectrum(self):
        ham = build_dense_hamiltonian(realization(2, w=0.0))
        np.testing.assert_allclose(
            np.linalg.eigvalsh(ham.entries), [-1.5, 0.5, 0.5, 0.5], atol=1e-12
        )

    def test_two_site_spin_one_spectrum(self):
        ham = build_dense_hamiltonian(realization(2, spin="one", w=0.0))
        expected = [-1.0] + [-0.5] * 3 + [0.5] * 5
        np.testing.assert_allclose(
            np.linalg.eigvalsh(ham.entries), expected, atol=1e-12
        )

    def test_hermitian(self):
        ham = build_dense_hamiltonian(realization(6, seed=5)).entries
        assert np.max(np.abs(ham - ham.conj().T)) <= 1e-12

    def test_traceless(self):
        for spin, length in (("half", 7), ("one", 4)):
            ham = build_dense_hamiltonian(realization(length, spin=spin, seed=8))
            assert abs(np.trace(ham.entries)) <= 1e-10

    def test_dimension_cap(self):
        with pytest.raises(DimensionCapError):
            build_dense_hamiltonian(realization(6), dense_cap=32)


class TestHamiltonianMpo:
    @pytest.mark.parametrize("length", range(2, 9))
    def test_matches_dense_spin_half(self, length):
        r = realization(length, seed=length)
        dense = build_dense_hamiltonian(r).entries
        err = np.max(np.abs(build_hamiltonian_mpo(r).to_dense() - dense))
        assert err <= 1e-12

    @pytest.mark.parametrize("length", range(2, 6))
    def test_matches_dense_spin_one(self, length):
        r = realization(length, spin="one", seed=10 + length)
        dense = build_dense_hamiltonian(r).entries
        err = np.max(np.abs(build_hamiltonian_mpo(r).to_dense() - dense))
        assert err <= 1e-12

    def test_clean_two_site_spectrum_through_mpo(self):
        r = realization(2, w=0.0)
        vals = np.linalg.eigvalsh(build_hamiltonian_mpo(r).to_dense())
        np.testing.assert_allclose(vals, [-1.5, 0.5, 0.5, 0.5], atol=1e-12)

    def test_bond_dimension_is_five(self):
        mpo = build_hamiltonian_mpo(realization(6))
        assert [t.shape[3] for t in mpo.tensors[:-1]] == [5] * 5

    def test_contracted_mpo_hermitian(self):
        dense = build_hamiltonian_mpo(realization(5, seed=2)).to_dense()
        assert np.max(np.abs(dense - dense.conj().T)) <= 1e-12


class TestShiftedMpo:
    def test_zero_shift_is_plain_hamiltonian(self):
        r = realization(4, seed=6)
        a = build_hamiltonian_mpo(r).to_dense()
        b = build_shifted_mpo(r, 0.0).to_dense()
        assert np.max(np.abs(a - b)) <= 1e-12

    def test_shift_subtracts_identity(self):
        r = realization(3, seed=7)
        dense = build_dense_hamiltonian(r).entries
        shifted = build_shifted_mpo(r, 1.0).to_dense()
        assert np.max(np.abs(shifted - (dense - np.eye(8)))) <= 1e-12

    def test_spectral_shift_on_eigenpair(self):
        r = realization(4, seed=11)
        dense = build_dense_hamiltonian(r).entries
        energy, vecs = np.linalg.eigh(dense)
        lam = 0.7
        shifted = build_shifted_mpo(r, lam).to_dense()
        v = vecs[:, 3]
        np.testing.assert_allclose(shifted @ v, (energy[3] - lam) * v, atol=1e-10)

import numpy as np
import pytest

from mblkit.entanglement import (
    TwoSiteDensityMatrix,
    concurrence,
    fit_entanglement_length,
    geometric_entanglement_dense,
    geometric_entanglement_mps,
    negativity,
    negativity_lower_bound,
    npr,
    pair_profile,
    partial_transpose,
    spin_flip,
    total_nn,
    two_site_rdm_dense,
)
from mblkit.mps import basis_product_mps, mps_from_dense

BELL = np.array([1.0, 0.0, 0.0, 1.0]) / np.sqrt(2)


def dm(matrix, d=2):
    return TwoSiteDensityMatrix(entries=matrix, local_dim=d)


def bell_dm():
    return dm(np.outer(BELL, BELL))


def werner(p):
    return dm(p * np.outer(BELL, BELL) + (1 - p) * np.eye(4) / 4)


def random_dm(rng, d=2, rank=4):
    a = rng.standard_normal((d * d, rank)) + 1j * rng.standard_normal((d * d, rank))
    rho = a @ a.conj().T
    return dm(rho / np.trace(rho).real, d=d)


def random_state(rng, n):
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return v / np.linalg.norm(v)


class TestSpinFlip:
    def test_bell_invariant(self):
        rho = bell_dm()
        assert np.max(np.abs(spin_flip(rho).entries - rho.entries)) <= 1e-14

    def test_flips_basis_state(self):
        rho = dm(np.diag([1.0, 0, 0, 0]))
        flipped = spin_flip(rho).entries
        assert abs(flipped[3, 3] - 1.0) <= 1e-14

    def test_involution(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            rho = random_dm(rng)
            back = spin_flip(spin_flip(rho)).entries
            assert np.max(np.abs(back - rho.entries)) <= 1e-12

    def test_rejects_qutrits(self):
        with pytest.raises(ValueError):
            spin_flip(dm(np.eye(9) / 9, d=3))


class TestConcurrence:
    def test_bell(self):
        assert abs(concurrence(bell_dm()) - 1.0) <= 1e-10

    def test_product(self):
        assert concurrence(dm(np.diag([1.0, 0, 0, 0]))) == 0.0

    def test_werner_closed_form(self):
        for p in (0.0, 0.2, 1 / 3, 0.5, 0.8, 1.0):
            expected = max(0.0, (3 * p - 1) / 2)
            assert abs(concurrence(werner(p)) - expected) <= 1e-10

    def test_range(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            c = concurrence(random_dm(rng))
            assert 0.0 <= c <= 1.0 + 1e-12


class TestPartialTranspose:
    def test_product_state_factorizes(self):
        rng = np.random.default_rng(2)
        a = random_dm(rng).entries[:2, :2]
        a = a / np.trace(a)
        b = random_dm(rng).entries[:2, :2]
        b = b / np.trace(b)
        rho = np.kron(a, b)
        np.testing.assert_allclose(
            partial_transpose(dm(rho), "first"), np.kron(a.T, b), atol=1e-12
        )
        np.testing.assert_allclose(
            partial_transpose(dm(rho), "second"), np.kron(a, b.T), atol=1e-12
        )

    def test_double_application_is_identity(self):
        rng = np.random.default_rng(3)
        for d in (2, 3):
            rho = random_dm(rng, d=d, rank=d * d).entries
            once = partial_transpose(rho, "first")
            twice = partial_transpose(once, "first")
            assert np.max(np.abs(twice - rho)) <= 1e-14

    def test_trace_preserved(self):
        rng = np.random.default_rng(4)
        for _ in range(100):
            rho = random_dm(rng)
            assert abs(np.trace(partial_transpose(rho)) - 1.0) <= 1e-12


class TestNegativity:
    def test_bell(self):
        assert abs(negativity(bell_dm()) - 0.5) <= 1e-10

    def test_separable_states(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            # random mixture of product states satisfies the transpose test
            rho = np.zeros((4, 4), dtype=complex)
            weights = rng.dirichlet(np.ones(4))
            for w in weights:
                a = random_state(rng, 2)
                b = random_state(rng, 2)
                v = np.kron(a, b)
                rho += w * np.outer(v, v.conj())
            assert negativity(dm(rho)) <= 1e-10

    def test_werner(self):
        assert abs(negativity(werner(0.5)) - 0.125) <= 1e-10

    def test_qutrit_pairs(self):
        rng = np.random.default_rng(6)
        vec = random_state(rng, 3**4)
        rho = two_site_rdm_dense(vec, 0, 2, local_dim=3)
        n = negativity(rho)
        assert n >= 0.0

    def test_maximally_entangled_qutrits(self):
        vec = np.zeros(9)
        vec[0] = vec[4] = vec[8] = 1 / np.sqrt(3)
        n = negativity(dm(np.outer(vec, vec), d=3))
        assert abs(n - 1.0) <= 1e-10  # (d-1)/2 * (2/d) * d/2 = 1 for d=3


class TestBounds:
    def test_two_qubit_bound_chain(self):
        # C >= ||rho^T||_1 - 1 >= sqrt((1-C)^2 + C^2) - (1-C), the trace-norm
        # negativity being twice the negative-eigenvalue sum
        rng = np.random.default_rng(7)
        for _ in range(100):
            vec = random_state(rng, 2**6)
            i, j = sorted(rng.choice(6, size=2, replace=False))
            rho = two_site_rdm_dense(vec, int(i), int(j))
            c = concurrence(rho)
            n2 = 2.0 * negativity(rho)
            assert c >= n2 - 1e-8
            assert n2 >= negativity_lower_bound(c) - 1e-8

    def test_pure_states_saturate_upper_bound(self):
        rng = np.random.default_rng(8)
        for _ in range(20):
            vec = random_state(rng, 4)
            rho = dm(np.outer(vec, vec.conj()))
            assert abs(concurrence(rho) - 2 * negativity(rho)) <= 1e-10

    def test_ill_ordering_pair_exists(self):
        # rank-2 state near the lower bound vs a pure state: larger
        # concurrence, smaller negativity
        psi01 = np.array([0.0, 1.0, 0.0, 0.0])
        rho1 = dm(0.9 * np.outer(BELL, BELL) + 0.1 * np.outer(psi01, psi01))
        a = np.sqrt((1 + np.sqrt(1 - 0.85**2)) / 2)
        b = 0.85 / (2 * a)
        pure = np.array([a, 0.0, 0.0, b])
        rho2 = dm(np.outer(pure, pure))
        c1, c2 = concurrence(rho1), concurrence(rho2)
        n1, n2 = negativity(rho1), negativity(rho2)
        assert c1 > c2 and n1 < n2


class TestLocalUnitaryInvariance:
    def test_pair_measures(self):
        rng = np.random.default_rng(9)
        vec = random_state(rng, 2**4)
        rho = two_site_rdm_dense(vec, 1, 3)
        c0, n0 = concurrence(rho), negativity(rho)
        for _ in range(5):
            u1 = np.linalg.qr(rng.standard_normal((2, 2))
                              + 1j * rng.standard_normal((2, 2)))[0]
            u2 = np.linalg.qr(rng.standard_normal((2, 2))
                              + 1j * rng.standard_normal((2, 2)))[0]
            u = np.kron(u1, u2)
            rotated = dm(u @ rho.entries @ u.conj().T)
            assert abs(concurrence(rotated) - c0) <= 1e-10
            assert abs(negativity(rotated) - n0) <= 1e-10

    def test_geometric_entanglement(self):
        rng = np.random.default_rng(10)
        vec = random_state(rng, 2**4)
        lam0, _ = geometric_entanglement_dense(
            vec, restarts=60, tol=1e-14, max_sweeps=3000, seed=1
        )
        full = np.eye(1)
        for _ in range(4):
            u = np.linalg.qr(rng.standard_normal((2, 2))
                             + 1j * rng.standard_normal((2, 2)))[0]
            full = np.kron(full, u)
        lam1, _ = geometric_entanglement_dense(
            full @ vec, restarts=60, tol=1e-14, max_sweeps=3000, seed=2
        )
        assert abs(lam0 - lam1) <= 1e-10


class TestTotals:
    def test_product_state(self):
        vec = np.zeros(2**5)
        vec[0] = 1.0
        rdms = [two_site_rdm_dense(vec, i, i + 1) for i in range(4)]
        assert total_nn("concurrence", rdms) == 0.0
        assert total_nn("negativity", rdms) == 0.0

    def test_bell_pair_chain(self):
        # three disjoint adjacent Bell pairs on six sites
        vec = BELL
        for _ in range(2):
            vec = np.kron(vec, BELL)
        rdms = [two_site_rdm_dense(vec, i, i + 1) for i in range(5)]
        assert abs(total_nn("concurrence", rdms) - 3.0) <= 1e-10
        assert abs(total_nn("negativity", rdms) - 1.5) <= 1e-10


class TestPairProfile:
    def test_product_ensemble_is_zero(self):
        states = []
        for k in range(3):
            vec = np.zeros(2**6)
            vec[k] = 1.0
            states.append(vec)
        profile = pair_profile(states, measure="both")
        assert np.all(profile.mean_concurrence == 0.0)
        assert np.all(profile.mean_negativity == 0.0)
        assert list(profile.distances) == [1, 2, 3]

    def test_known_marginals(self):
        # Bell pairs on (0,1), (2,3), (4,5): of the five distance-1 pairs
        # three are Bell (C = 1), so the mean is 3/5
        vec = np.kron(np.kron(BELL, BELL), BELL)
        profile = pair_profile([vec], measure="both")
        assert abs(profile.mean_concurrence[0] - 0.6) <= 1e-10
        assert abs(profile.mean_negativity[0] - 0.3) <= 1e-10
        assert profile.counts[0] == 5

    def test_mps_states_accepted(self):
        psi = basis_product_mps(6, 2, [0, 0, 1, 1, 0, 1])
        profile = pair_profile([psi], measure="negativity")
        assert np.all(profile.mean_negativity == 0.0)


class TestDecayFit:
    def test_exact_exponential(self):
        d = np.arange(1, 7)
        means = np.exp(-d / 1.1)
        fit = fit_entanglement_length(d, means)
        assert abs(fit.slope - (-1 / 1.1)) <= 1e-10
        assert abs(fit.xi - 1.1) <= 1e-10
        assert fit.r_squared > 1 - 1e-12
        assert fit.excluded_distances == ()

    def test_excludes_nonpositive(self):
        d = np.arange(1, 6)
        means = np.exp(-d.astype(float))
        means[3] = 0.0
        fit = fit_entanglement_length(d, means)
        assert fit.excluded_distances == (4,)
        assert abs(fit.slope - (-1.0)) <= 1e-10

    def test_needs_three_points(self):
        with pytest.raises(ValueError):
            fit_entanglement_length([1, 2], [0.5, 0.2])


class TestGeometricEntanglement:
    def test_product_state(self):
        vec = np.zeros(2**5)
        vec[7] = 1.0
        lam, s_g = geometric_entanglement_dense(vec, restarts=10, seed=3)
        assert abs(lam - 1.0) <= 1e-12
        assert abs(s_g) <= 1e-12

    def test_ghz_three_qubits(self):
        ghz = np.zeros(8)
        ghz[0] = ghz[7] = 1 / np.sqrt(2)
        lam, _ = geometric_entanglement_dense(ghz, restarts=40, seed=4)
        assert abs(lam - 0.5) <= 1e-8

    def test_w_state_three_qubits(self):
        w = np.zeros(8)
        w[1] = w[2] = w[4] = 1 / np.sqrt(3)
        lam, _ = geometric_entanglement_dense(w, restarts=40, seed=5)
        assert abs(lam - 4 / 9) <= 1e-8

    def test_brute_force_grid_oracle(self):
        # real-angle product grid cannot beat the optimizer on these states
        def grid_best(vec):
            best = 0.0
            thetas = np.linspace(0, np.pi, 61)
            tensor = vec.reshape(2, 2, 2)
            for t1 in thetas:
                v1 = np.array([np.cos(t1), np.sin(t1)])
                red1 = np.tensordot(v1, tensor, axes=([0], [0]))
                for t2 in thetas:
                    v2 = np.array([np.cos(t2), np.sin(t2)])
                    red2 = v2 @ red1
                    best = max(best, float(np.linalg.norm(red2)) ** 2)
            return best

        ghz = np.zeros(8)
        ghz[0] = ghz[7] = 1 / np.sqrt(2)
        w = np.zeros(8)
        w[1] = w[2] = w[4] = 1 / np.sqrt(3)
        for vec, expected in ((ghz, 0.5), (w, 4 / 9)):
            lam, _ = geometric_entanglement_dense(vec, restarts=40, seed=6)
            assert lam >= grid_best(vec) - 1e-6
            assert abs(lam - expected) <= 1e-8

    def test_mps_product_input(self):
        psi = basis_product_mps(6, 2, [0, 1, 1, 0, 1, 0])
        lam, s_g = geometric_entanglement_mps(psi, restarts=8, seed=7)
        assert abs(lam - 1.0) <= 1e-10
        assert s_g <= 1e-10

    def test_mps_matches_dense(self):
        rng = np.random.default_rng(11)
        for length in (4, 5, 6):
            vec = random_state(rng, 2**length)
            lam_d, _ = geometric_entanglement_dense(vec, restarts=40, seed=8)
            psi = mps_from_dense(vec, length, 2)
            lam_m, _ = geometric_entanglement_mps(psi, restarts=40, seed=9)
            assert abs(lam_d - lam_m) <= 1e-6

    def test_log_base(self):
        ghz = np.zeros(8)
        ghz[0] = ghz[7] = 1 / np.sqrt(2)
        _, s_e = geometric_entanglement_dense(ghz, restarts=20, seed=10)
        _, s_2 = geometric_entanglement_dense(ghz, restarts=20, seed=10, log_base=2)
        assert abs(s_e - np.log(2.0)) <= 1e-8
        assert abs(s_2 - 1.0) <= 1e-8


class TestNpr:
    def test_basis_state(self):
        assert npr([0, 0, 1, 0]) == 1.0

    def test_uniform(self):
        vec = np.ones(8) / np.sqrt(8)
        assert abs(npr(vec) - 8.0) <= 1e-12
        assert abs(npr(vec, normalize_by_dim=True) - 1.0) <= 1e-12

    def test_two_configuration_state(self):
        assert abs(npr([1 / np.sqrt(2), 1 / np.sqrt(2), 0, 0]) - 2.0) <= 1e-12

    def test_range(self):
        rng = np.random.default_rng(12)
        for _ in range(50):
            vec = random_state(rng, 64)
            p = npr(vec)
            assert 1.0 - 1e-12 <= p <= 64.0 + 1e-9

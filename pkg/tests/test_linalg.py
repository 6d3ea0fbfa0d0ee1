import numpy as np
import pytest

from ofsmpc import (ConvergenceError, FactorizationError, ValidationError,
                    chol_solve, dare, psd_leq, sym_eig)
from ofsmpc.linalg import psd_sqrt, riccati_map, spectral_radius

from oracles import riccati_fixed_point


class TestSymEig:
    def test_identity(self):
        res = sym_eig(np.eye(2))
        assert np.allclose(res.eigenvalues, [1.0, 1.0])
        assert np.allclose(res.eigenvectors @ res.eigenvectors.T, np.eye(2))

    def test_diagonal(self):
        res = sym_eig(np.diag([4.0, 1.0]))
        assert np.allclose(res.eigenvalues, [4.0, 1.0])
        assert np.allclose(np.abs(res.eigenvectors), np.eye(2), atol=1e-12)

    def test_hand_solved_2x2(self):
        # characteristic polynomial of [[2,1],[1,2]]: (2-l)^2 - 1 = 0
        res = sym_eig(np.array([[2.0, 1.0], [1.0, 2.0]]))
        assert np.allclose(res.eigenvalues, [3.0, 1.0])
        v0 = res.eigenvectors[:, 0]
        v1 = res.eigenvectors[:, 1]
        assert np.allclose(np.abs(v0), [1, 1] / np.sqrt(2))
        assert np.allclose(np.abs(v1 @ np.array([1, 1]) / np.sqrt(2)), 0, atol=1e-12)

    def test_reconstruction_random(self):
        rng = np.random.default_rng(7)
        for _ in range(25):
            n = rng.integers(1, 7)
            mat = rng.normal(size=(n, n))
            mat = mat + mat.T
            res = sym_eig(mat)
            recon = res.eigenvectors @ np.diag(res.eigenvalues) @ res.eigenvectors.T
            assert np.abs(recon - mat).max() <= 1e-9
            assert np.abs(res.eigenvectors @ res.eigenvectors.T - np.eye(n)).max() <= 1e-10
            for j in range(n):
                resid = mat @ res.eigenvectors[:, j] \
                    - res.eigenvalues[j] * res.eigenvectors[:, j]
                assert np.abs(resid).max() <= 1e-9 * (1 + np.abs(mat).max())

    def test_rejects_nonsymmetric(self):
        with pytest.raises(ValidationError):
            sym_eig(np.array([[0.0, 1.0], [0.0, 0.0]]))


class TestPsdLeq:
    def test_identity_pairs(self):
        assert psd_leq(np.eye(2), 2 * np.eye(2), 1e-9)
        assert not psd_leq(2 * np.eye(2), np.eye(2), 1e-9)

    def test_indefinite_difference(self):
        # eigenvalues of diag(3,1) - diag(1,3) are +-2
        assert not psd_leq(np.diag([1.0, 3.0]), np.diag([3.0, 1.0]), 1e-9)

    def test_reflexive(self):
        rng = np.random.default_rng(3)
        mat = rng.normal(size=(4, 4))
        mat = mat + mat.T
        assert psd_leq(mat, mat, 1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(ValidationError):
            psd_leq(np.eye(2), np.eye(3), 1e-9)


class TestDare:
    def test_nilpotent_scalar(self):
        p = dare([[0.0]], [[1.0]], [[1.0]], [[1.0]])
        assert np.allclose(p, [[1.0]], atol=1e-12)

    def test_scalar_quadratic_root(self):
        # closed form: root of P^2 - 0.25 P - 1 = 0
        p = dare([[0.5]], [[1.0]], [[1.0]], [[1.0]])
        expected = (0.25 + np.sqrt(0.0625 + 4.0)) / 2.0
        assert abs(p[0, 0] - expected) <= 1e-10

    def test_paper_system_against_fixed_point_oracle(self, paper_model):
        a, b = paper_model.a, paper_model.b
        q_lqr = np.diag([100.0, 1.0])
        r_lqr = np.array([[1.0]])
        p = dare(a, b, q_lqr, r_lqr)
        oracle = riccati_fixed_point(a, b, q_lqr, r_lqr)
        assert np.abs(p - oracle).max() <= 1e-8
        resid = np.abs(riccati_map(p, a, b, q_lqr, r_lqr) - p).max()
        assert resid <= 1e-10

    def test_result_is_psd(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            a = rng.normal(size=(3, 3)) * 0.6
            b = rng.normal(size=(3, 1))
            q = rng.normal(size=(3, 3))
            q = q @ q.T + 0.1 * np.eye(3)
            p = dare(a, b, q, [[1.0]])
            assert np.linalg.eigvalsh(p)[0] >= -1e-10

    def test_divergence_error(self):
        # uncontrollable unstable direction cannot converge
        with pytest.raises(ConvergenceError) as exc:
            dare([[2.0]], [[0.0]], [[1.0]], [[1.0]], max_iter=50)
        assert exc.value.residual is not None


class TestCholSolve:
    def test_identity(self):
        b = np.array([1.0, 2.0])
        assert np.allclose(chol_solve(np.eye(2), b), b)

    def test_diagonal(self):
        sol = chol_solve(np.diag([2.0, 4.0]), np.array([2.0, 4.0]))
        assert np.allclose(sol, [1.0, 1.0])

    def test_random_spd_multiply_back(self):
        rng = np.random.default_rng(5)
        mat = rng.normal(size=(3, 3))
        spd = mat @ mat.T + 3 * np.eye(3)
        rhs = rng.normal(size=(3, 2))
        sol = chol_solve(spd, rhs)
        assert np.abs(spd @ sol - rhs).max() <= 1e-9 * np.abs(rhs).max()

    def test_non_pd_rejected(self):
        with pytest.raises(FactorizationError):
            chol_solve(np.diag([1.0, -1.0]), np.array([1.0, 1.0]))


def test_psd_sqrt_roundtrip():
    rng = np.random.default_rng(9)
    mat = rng.normal(size=(3, 2))
    cov = mat @ mat.T   # rank deficient PSD
    root = psd_sqrt(cov)
    assert np.abs(root @ root.T - cov).max() <= 1e-10


def test_spectral_radius():
    assert spectral_radius(np.diag([0.5, -0.9])) == pytest.approx(0.9)

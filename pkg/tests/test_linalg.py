import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ffu import linalg
from ffu.errors import DimensionMismatch, NotPositiveDefinite


def random_spd(rng, k, cond=100.0):
    q, _ = np.linalg.qr(rng.standard_normal((k, k)))
    eig = np.geomspace(1.0, cond, k)
    return (q * eig) @ q.T


class TestCholesky:
    def test_identity(self):
        f = linalg.cholesky(np.eye(2))
        np.testing.assert_array_equal(f.lower, np.eye(2))

    def test_two_by_two(self):
        f = linalg.cholesky([[1, 0.5], [0.5, 1]])
        np.testing.assert_allclose(f.lower, [[1, 0], [0.5, np.sqrt(0.75)]], atol=1e-15)
        np.testing.assert_allclose(f.lower @ f.lower.T, [[1, 0.5], [0.5, 1]], atol=1e-15)

    def test_indefinite(self):
        with pytest.raises(NotPositiveDefinite):
            linalg.cholesky([[1, 2], [2, 1]])

    def test_numerically_singular(self):
        v = np.array([1.0, 2.0, 3.0])
        with pytest.raises(NotPositiveDefinite):
            linalg.cholesky(np.outer(v, v) + 1e-15 * np.eye(3))

    def test_diag_positive(self):
        f = linalg.cholesky(random_spd(np.random.default_rng(0), 6))
        assert np.all(np.diag(f.lower) > 0)

    @settings(max_examples=40, deadline=None)
    @given(k=st.integers(1, 8), seed=st.integers(0, 10_000), logcond=st.floats(0, 6))
    def test_reconstruction(self, k, seed, logcond):
        a = random_spd(np.random.default_rng(seed), k, 10.0**logcond)
        f = linalg.cholesky(a)
        err = np.linalg.norm(f.lower @ f.lower.T - a) / np.linalg.norm(a)
        assert err < 1e-10


class TestSolves:
    def test_identity_solve(self):
        v = np.array([3.0, -1.0, 2.0])
        np.testing.assert_allclose(linalg.solve_spd(linalg.cholesky(np.eye(3)), v), v)

    def test_diagonal_solve(self):
        f = linalg.cholesky([[4, 0], [0, 9]])
        np.testing.assert_allclose(linalg.solve_spd(f, [2, 3]), [0.5, 1 / 3], rtol=1e-14)

    def test_random_residual(self):
        rng = np.random.default_rng(5)
        a = random_spd(rng, 5)
        b = rng.standard_normal(5)
        x = linalg.solve_spd(linalg.cholesky(a), b)
        assert np.linalg.norm(a @ x - b) / np.linalg.norm(b) < 1e-9

    def test_matrix_rhs(self):
        rng = np.random.default_rng(6)
        a = random_spd(rng, 4)
        b = rng.standard_normal((4, 3))
        x = linalg.solve_spd(linalg.cholesky(a), b)
        assert x.shape == (4, 3)
        np.testing.assert_allclose(a @ x, b, atol=1e-10)

    def test_mismatch(self):
        with pytest.raises(DimensionMismatch):
            linalg.solve_spd(linalg.cholesky(np.eye(3)), np.ones(2))

    def test_inverse_identity(self):
        np.testing.assert_allclose(linalg.inverse_spd(linalg.cholesky(np.eye(4))), np.eye(4))

    def test_inverse_two_by_two(self):
        inv = linalg.inverse_spd(linalg.cholesky([[1, 0.5], [0.5, 1]]))
        np.testing.assert_allclose(inv, (4 / 3) * np.array([[1, -0.5], [-0.5, 1]]), rtol=1e-14)

    def test_inverse_random(self):
        a = random_spd(np.random.default_rng(7), 6)
        inv = linalg.inverse_spd(linalg.cholesky(a))
        np.testing.assert_allclose(a @ inv, np.eye(6), atol=1e-9)
        assert np.array_equal(inv, inv.T)

    @settings(max_examples=30, deadline=None)
    @given(k=st.integers(1, 8), seed=st.integers(0, 10_000))
    def test_inverse_involution(self, k, seed):
        a = random_spd(np.random.default_rng(seed), k)
        back = linalg.inverse_spd(linalg.cholesky(linalg.inverse_spd(linalg.cholesky(a))))
        assert np.linalg.norm(back - a) / np.linalg.norm(a) < 1e-8


def penrose_ok(a, p, tol=1e-8):
    return (
        np.allclose(a @ p @ a, a, atol=tol)
        and np.allclose(p @ a @ p, p, atol=tol)
        and np.allclose((a @ p).T, a @ p, atol=tol)
        and np.allclose((p @ a).T, p @ a, atol=tol)
    )


class TestPseudoInverse:
    def test_identity(self):
        np.testing.assert_allclose(linalg.pseudo_inverse(np.eye(3)), np.eye(3))

    def test_scalar(self):
        np.testing.assert_allclose(linalg.pseudo_inverse([[2.0]]), [[0.5]])

    def test_rank_deficient(self):
        a = np.array([[1.0, 0.0], [1.0, 0.0]])
        p = linalg.pseudo_inverse(a)
        np.testing.assert_allclose(p, [[0.5, 0.5], [0.0, 0.0]], atol=1e-15)
        assert penrose_ok(a, p)

    @pytest.mark.parametrize("shape", [(3, 5), (5, 3), (4, 4)])
    def test_random_penrose(self, shape):
        rng = np.random.default_rng(sum(shape))
        a = rng.standard_normal(shape)
        a[:, 0] = a[:, 1]
        assert penrose_ok(a, linalg.pseudo_inverse(a))


class TestKronApply:
    def test_identity(self):
        c = np.arange(6.0).reshape(2, 3)
        np.testing.assert_array_equal(linalg.kron_apply(np.eye(3), np.eye(2), c), c)

    def test_scalar(self):
        np.testing.assert_array_equal(linalg.kron_apply([[2]], [[3]], [[5]]), [[30]])

    def test_mismatch(self):
        with pytest.raises(DimensionMismatch):
            linalg.kron_apply(np.eye(2), np.eye(3), np.eye(4))

    @settings(max_examples=50, deadline=None)
    @given(
        p=st.integers(1, 4), q=st.integers(1, 4), r=st.integers(1, 4), s=st.integers(1, 4),
        seed=st.integers(0, 10_000),
    )
    def test_matches_materialized(self, p, q, r, s, seed):
        rng = np.random.default_rng(seed)
        a = rng.standard_normal((p, r))
        b = rng.standard_normal((q, s))
        c = rng.standard_normal((s, r))
        expected = linalg.unvec(np.kron(a, b) @ linalg.vec(c), q, p)
        got = linalg.kron_apply(a, b, c)
        assert np.linalg.norm(got - expected) <= 1e-12 * max(1.0, np.linalg.norm(expected))


def test_matrix_csv_roundtrip(tmp_path):
    m = np.random.default_rng(1).standard_normal((3, 4)) / 7
    path = tmp_path / "m.csv"
    linalg.write_matrix(path, m)
    back = linalg.read_matrix(path)
    np.testing.assert_array_equal(back, m)
    first = path.read_text().splitlines()[0]
    assert "," in first and not first.startswith("#")

"""Tests for the dense symmetric-matrix utilities."""

import numpy as np
import pytest

from kfls.exceptions import DefinitenessError, SingularMatrixError
from kfls.spd import (
    Definiteness,
    SpdMatrix,
    check_definiteness,
    inversion_lemma,
    spd_inverse,
    symmetrize,
)


class TestCheckDefiniteness:
    def test_identity_is_definite(self):
        assert check_definiteness(np.eye(2), 1e-10) is Definiteness.POSITIVE_DEFINITE

    def test_zero_is_semidefinite(self):
        assert check_definiteness(np.zeros((2, 2))) is Definiteness.POSITIVE_SEMIDEFINITE

    def test_sign_mixed_diagonal_is_indefinite(self):
        assert check_definiteness(np.diag([1.0, -1.0])) is Definiteness.INDEFINITE

    def test_negative_definite_is_rejected_as_indefinite(self):
        assert check_definiteness(-np.eye(3)) is Definiteness.INDEFINITE

    def test_rank_deficient_is_semidefinite(self):
        v = np.array([[1.0], [2.0]])
        assert check_definiteness(v @ v.T) is Definiteness.POSITIVE_SEMIDEFINITE

    def test_non_square_raises(self):
        with pytest.raises(ValueError, match="square"):
            check_definiteness(np.ones((2, 3)))

    def test_asymmetric_raises(self):
        with pytest.raises(ValueError, match="symmetric"):
            check_definiteness(np.array([[1.0, 2.0], [0.0, 1.0]]))

    def test_agrees_with_eigendecomposition(self):
        # Independent eigenvalue-based classification on random symmetric
        # matrices spanning all three classes.
        rng = np.random.default_rng(7)
        for _ in range(200):
            n = int(rng.integers(1, 6))
            q, _ = np.linalg.qr(rng.normal(size=(n, n)))
            kind = rng.integers(0, 3)
            if kind == 0:
                eigs = rng.uniform(0.1, 2.0, n)
                expected = Definiteness.POSITIVE_DEFINITE
            elif kind == 1 and n > 1:
                eigs = rng.uniform(0.1, 2.0, n)
                eigs[: int(rng.integers(1, n))] = 0.0
                expected = Definiteness.POSITIVE_SEMIDEFINITE
            else:
                eigs = rng.uniform(0.1, 2.0, n)
                eigs[0] = -eigs[0]
                expected = Definiteness.INDEFINITE
            m = symmetrize(q @ np.diag(eigs) @ q.T)
            assert check_definiteness(m) is expected


class TestSpdInverse:
    def test_identity(self):
        np.testing.assert_allclose(spd_inverse(np.eye(3)), np.eye(3))

    def test_diagonal_reciprocal(self):
        np.testing.assert_allclose(spd_inverse(np.diag([2.0, 4.0])), np.diag([0.5, 0.25]))

    def test_random_spd_inverse_multiplies_to_identity(self):
        rng = np.random.default_rng(1)
        g = rng.normal(size=(3, 3))
        m = g @ g.T + 3 * np.eye(3)
        inv = spd_inverse(m)
        np.testing.assert_allclose(m @ inv, np.eye(3), rtol=0, atol=1e-9)

    def test_double_inverse_is_identity_map(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            n = int(rng.integers(1, 6))
            g = rng.normal(size=(n, n))
            m = g @ g.T + n * np.eye(n)
            back = spd_inverse(spd_inverse(m))
            assert np.linalg.norm(back - m) / np.linalg.norm(m) < 1e-8

    def test_semidefinite_input_raises(self):
        with pytest.raises(DefinitenessError):
            spd_inverse(np.zeros((2, 2)))

    def test_indefinite_input_raises(self):
        with pytest.raises(DefinitenessError):
            spd_inverse(np.diag([1.0, -1.0]))


class TestInversionLemma:
    def test_zero_update_returns_a_inv(self):
        a_inv = np.diag([0.5, 0.25])
        out = inversion_lemma(a_inv, np.zeros((2, 1)), np.eye(1), np.zeros((1, 2)))
        np.testing.assert_allclose(out, a_inv)

    def test_scalar_case(self):
        out = inversion_lemma(np.eye(1), np.eye(1), np.eye(1), np.eye(1))
        np.testing.assert_allclose(out, [[0.5]])

    def test_matches_direct_inversion(self):
        rng = np.random.default_rng(3)
        a = rng.normal(size=(4, 4)) + 4 * np.eye(4)
        u = rng.normal(size=(4, 2))
        c = rng.normal(size=(2, 2)) + 2 * np.eye(2)
        v = rng.normal(size=(2, 4))
        out = inversion_lemma(np.linalg.inv(a), u, c, v)
        np.testing.assert_allclose(out, np.linalg.inv(a + u @ c @ v), rtol=0, atol=1e-10)

    def test_random_well_conditioned_instances(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            n = int(rng.integers(1, 5))
            q = int(rng.integers(1, 4))
            a = rng.normal(size=(n, n)) + (n + 1) * np.eye(n)
            u = rng.normal(size=(n, q))
            c = rng.normal(size=(q, q)) + (q + 1) * np.eye(q)
            v = rng.normal(size=(q, n))
            direct = np.linalg.inv(a + u @ c @ v)
            if np.linalg.cond(a + u @ c @ v) > 1e6:
                continue
            out = inversion_lemma(np.linalg.inv(a), u, c, v)
            assert np.linalg.norm(out - direct) / np.linalg.norm(direct) < 1e-9

    def test_singular_inner_term_raises(self):
        # u = -c^{-1} v a makes the inner term exactly zero in 1x1.
        a_inv = np.eye(1)
        with pytest.raises(SingularMatrixError):
            inversion_lemma(a_inv, np.array([[-1.0]]), np.eye(1), np.array([[1.0]]))

    def test_nonconformable_raises(self):
        with pytest.raises(ValueError, match="nonconformable"):
            inversion_lemma(np.eye(2), np.zeros((3, 1)), np.eye(1), np.zeros((1, 2)))


class TestSpdMatrix:
    def test_constructor_symmetrizes(self):
        m = SpdMatrix(np.array([[1.0, 1e-13], [0.0, 1.0]]))
        assert np.abs(m.entries - m.entries.T).max() == 0.0

    def test_definite_requires_cholesky(self):
        with pytest.raises(DefinitenessError):
            SpdMatrix(np.zeros((2, 2)), definite=True)

    def test_indefinite_rejected(self):
        with pytest.raises(DefinitenessError):
            SpdMatrix(np.diag([1.0, -1.0]))

    def test_entries_read_only(self):
        m = SpdMatrix(np.eye(2))
        with pytest.raises(ValueError):
            m.entries[0, 0] = 2.0

    def test_definiteness_implies_invertible(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            g = rng.normal(size=(3, 3))
            m = symmetrize(g @ g.T + 0.5 * np.eye(3))
            if check_definiteness(m) is Definiteness.POSITIVE_DEFINITE:
                spd_inverse(m)  # must not raise

    def test_inverse_round_trip(self):
        m = SpdMatrix(np.diag([2.0, 8.0]))
        np.testing.assert_allclose(m.inverse().entries, np.diag([0.5, 0.125]))

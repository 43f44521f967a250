"""Jacobi eigendecomposition and the ICA row solver.

numpy.linalg serves as the independent oracle for the hand-rolled
routines; hand-derived closed forms cover the small fixed cases.
"""

import numpy as np
import pytest

from dsukit.errors import ConfigError, NumericalError
from dsukit.linalg import eigh, solve_row


def random_symmetric(rng, n):
    a = rng.normal(size=(n, n))
    return (a + a.T) / 2.0


class TestEighFixedCases:
    def test_identity(self):
        e = eigh(np.eye(3))
        np.testing.assert_array_equal(e.values, [1.0, 1.0, 1.0])
        np.testing.assert_array_equal(e.vectors, np.eye(3))

    def test_diagonal(self):
        e = eigh(np.diag([4.0, 1.0]))
        np.testing.assert_array_equal(e.values, [4.0, 1.0])
        np.testing.assert_array_equal(e.vectors, np.eye(2))

    def test_two_by_two_hand_solved(self):
        # [[2,1],[1,2]]: characteristic polynomial gives 3 and 1 with
        # eigenvectors (1,1)/sqrt(2) and (1,-1)/sqrt(2).
        e = eigh(np.array([[2.0, 1.0], [1.0, 2.0]]))
        np.testing.assert_allclose(e.values, [3.0, 1.0], atol=1e-12)
        s = 1.0 / np.sqrt(2.0)
        np.testing.assert_allclose(e.vectors[:, 0], [s, s], atol=1e-12)
        np.testing.assert_allclose(e.vectors[:, 1], [s, -s], atol=1e-12)

    def test_descending_order_permuted_diagonal(self):
        e = eigh(np.diag([1.0, 5.0, 3.0]))
        np.testing.assert_array_equal(e.values, [5.0, 3.0, 1.0])


class TestEighProperties:
    def test_against_numpy_oracle(self):
        rng = np.random.default_rng(42)
        for n in (2, 3, 5, 16, 33):
            a = random_symmetric(rng, n)
            e = eigh(a)
            np.testing.assert_allclose(e.values, np.sort(np.linalg.eigvalsh(a))[::-1], atol=1e-10)

    def test_reconstruction_and_orthonormality(self):
        rng = np.random.default_rng(7)
        for n in (4, 12, 40):
            a = random_symmetric(rng, n)
            e = eigh(a)
            recon = e.vectors @ np.diag(e.values) @ e.vectors.T
            assert np.max(np.abs(recon - a)) <= 1e-8 * max(np.max(np.abs(a)), 1.0)
            assert np.max(np.abs(e.vectors.T @ e.vectors - np.eye(n))) <= 1e-10

    def test_trace_matches_eigenvalue_sum(self):
        rng = np.random.default_rng(9)
        for _ in range(10):
            a = random_symmetric(rng, 8)
            e = eigh(a)
            assert abs(e.values.sum() - np.trace(a)) <= 1e-9 * max(abs(np.trace(a)), 1.0)

    def test_sign_convention(self):
        rng = np.random.default_rng(21)
        for _ in range(5):
            e = eigh(random_symmetric(rng, 6))
            for j in range(6):
                lead = np.argmax(np.abs(e.vectors[:, j]))
                assert e.vectors[lead, j] > 0.0

    def test_bitwise_deterministic(self):
        a = random_symmetric(np.random.default_rng(3), 10)
        e1, e2 = eigh(a.copy()), eigh(a.copy())
        assert e1.values.tobytes() == e2.values.tobytes()
        assert e1.vectors.tobytes() == e2.vectors.tobytes()

    def test_input_validation(self):
        with pytest.raises(ConfigError, match="square"):
            eigh(np.ones((2, 3)))
        with pytest.raises(ConfigError, match="non-finite"):
            eigh(np.array([[np.nan, 0.0], [0.0, 1.0]]))
        with pytest.raises(ConfigError, match="not symmetric"):
            eigh(np.array([[1.0, 2.0], [0.0, 1.0]]))

    def test_near_symmetric_accepted(self):
        a = np.array([[1.0, 2.0], [2.0 + 1e-10, 1.0]])
        e = eigh(a)
        np.testing.assert_allclose(e.values, [3.0, -1.0], atol=1e-9)


class TestSolveRow:
    def test_identity_system(self):
        np.testing.assert_allclose(solve_row(np.eye(3), np.eye(3), 0), [1.0, 0.0, 0.0], atol=1e-14)

    def test_diagonal_v_normalized(self):
        # (W V) w = e_0 with V = diag(4,1) gives w = (0.25, 0); the
        # w^T V w = 1 rescale then lands on (0.5, 0).
        w = solve_row(np.eye(2), np.diag([4.0, 1.0]), 0)
        np.testing.assert_allclose(w, [0.5, 0.0], atol=1e-14)

    def test_post_condition_random(self):
        rng = np.random.default_rng(17)
        for _ in range(10):
            w = rng.normal(size=(5, 5))
            b = rng.normal(size=(5, 5))
            v = b @ b.T + 5.0 * np.eye(5)
            for d in range(5):
                x = solve_row(w, v, d)
                assert abs(x @ v @ x - 1.0) <= 1e-9
                # Direction agrees with the numpy solve oracle.
                ref = np.linalg.solve(w @ v, np.eye(5)[d])
                ref = ref / np.sqrt(ref @ v @ ref)
                np.testing.assert_allclose(x, np.sign(x[np.argmax(np.abs(x))] * ref[np.argmax(np.abs(x))]) * ref, atol=1e-8)

    def test_singular_names_component(self):
        with pytest.raises(NumericalError, match="component 1"):
            solve_row(np.eye(2), np.zeros((2, 2)), 1)

    def test_index_validation(self):
        with pytest.raises(ConfigError, match="out of range"):
            solve_row(np.eye(2), np.eye(2), 2)

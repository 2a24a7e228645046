import tempfile
from pathlib import Path

import numpy as np
import scipy.io
import scipy.sparse as sp
from django.test import SimpleTestCase

from cutfem.exceptions import ConfigInvalid, DegenerateConstraint, NonFinite, SingularMatrix
from cutfem.linalg import (
    bordered_matrix,
    dump_matrix,
    estimate_condition,
    relative_residual,
    solve,
    solve_bordered,
)


def laplacian_1d(n):
    return sp.diags([-np.ones(n - 1), 2.5 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1], format="csr")


class SolveTests(SimpleTestCase):
    def test_direct_solve(self):
        matrix = np.array([[4.0, 1.0], [1.0, 3.0]])
        b = np.array([1.0, 2.0])
        np.testing.assert_allclose(solve(matrix, b), np.linalg.solve(matrix, b), rtol=1e-14)

    def test_gmres_matches_lu(self):
        matrix = laplacian_1d(60)
        b = np.linspace(0.0, 1.0, 60)
        x = solve(matrix, b, method="gmres", tol=1e-12)
        np.testing.assert_allclose(x, solve(matrix, b), rtol=1e-8, atol=1e-10)
        self.assertLess(relative_residual(matrix, x, b), 1e-10)

    def test_singular_matrix(self):
        with self.assertRaises(SingularMatrix):
            solve(np.array([[1.0, 0.0], [0.0, 0.0]]), np.ones(2))

    def test_empty_system(self):
        self.assertEqual(solve(sp.csr_matrix((0, 0)), np.zeros(0)).shape, (0,))

    def test_unknown_method(self):
        with self.assertRaises(ConfigInvalid):
            solve(np.eye(2), np.ones(2), method="cg")

    def test_non_finite_entries(self):
        with self.assertRaises(NonFinite):
            solve(np.array([[1.0, np.nan], [0.0, 1.0]]), np.ones(2))

    def test_shape_mismatch(self):
        with self.assertRaises(ValueError):
            solve(np.eye(3), np.ones(2))


class BorderedSolveTests(SimpleTestCase):
    def test_identity_with_sum_constraint(self):
        x, multiplier = solve_bordered(np.eye(3), np.ones(3), [1.0, 2.0, 3.0], 3.0)
        np.testing.assert_allclose(x, [0.0, 1.0, 2.0], atol=1e-14)
        self.assertAlmostEqual(multiplier, 1.0, places=14)

    def test_bordered_layout(self):
        system = bordered_matrix(np.eye(2), [1.0, 2.0]).toarray()
        np.testing.assert_array_equal(system, [[1, 0, 1], [0, 1, 2], [1, 2, 0]])

    def test_vanishing_constraint(self):
        with self.assertRaises(DegenerateConstraint):
            solve_bordered(np.eye(2), np.zeros(2), np.ones(2), 1.0)


class ConditionTests(SimpleTestCase):
    def test_diagonal_matrix(self):
        estimate = estimate_condition(sp.diags(np.array([1.0, 10.0, 100.0])))
        self.assertAlmostEqual(estimate, 100.0, delta=1e-6)

    def test_same_seed_same_estimate(self):
        matrix = laplacian_1d(30)
        self.assertEqual(estimate_condition(matrix, seed=4), estimate_condition(matrix, seed=4))


class DumpTests(SimpleTestCase):
    def test_matrix_market_file(self):
        matrix = laplacian_1d(5)
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "step_0001.mtx"
            dump_matrix(matrix, path, comment="t=0.1")
            loaded = scipy.io.mmread(str(path))
            self.assertIn("t=0.1", path.read_text())
        np.testing.assert_array_equal(loaded.toarray(), matrix.toarray())

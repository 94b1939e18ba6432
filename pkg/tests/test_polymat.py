import sys
from pathlib import Path
sys.path.insert(0, str(Path(__file__).resolve().parents[1]))

import unittest

import numpy as np
import pytest

from parsreduce.polymat import (Polynomial, PolynomialMatrix, block, block_diag, embed_monomial,
                                monomial_basis)


def random_pmat(rng, rows, cols, num_vars, degree):
    return PolynomialMatrix(rows, cols, num_vars,
                            {m: rng.standard_normal((rows, cols)) for m in monomial_basis(num_vars, degree)})


class test_polymat(unittest.TestCase):

    def test_basis_order(self):
        self.assertEqual(monomial_basis(2, 2), [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)])
        self.assertEqual(len(monomial_basis(3, 3)), 20)
        self.assertEqual(monomial_basis(0, 2), [()])
        with self.assertRaises(ValueError):
            monomial_basis(2, -1)

    def test_polynomial_arithmetic(self):
        a1 = Polynomial.variable(2, 0)
        a2 = Polynomial.variable(2, 1)
        q = Polynomial.constant(2, 1.0) - a1 * a1
        self.assertEqual(q.degree(), 2)
        self.assertAlmostEqual(q.evaluate([0.5, 3.0]), 0.75)
        r = (a1 + a2) * (a1 - a2)
        self.assertEqual(r, a1 * a1 - a2 * a2)
        self.assertEqual((a1 - a1).terms, {})

    def test_matmul_matches_numpy(self):
        rng = np.random.default_rng(0)
        X = random_pmat(rng, 3, 2, 2, 2)
        Y = random_pmat(rng, 2, 4, 2, 1)
        Z = X @ Y
        self.assertEqual(Z.shape, (3, 4))
        self.assertEqual(Z.degree(), 3)
        for alpha in rng.uniform(-1, 1, (5, 2)):
            np.testing.assert_allclose(Z.evaluate(alpha), X.evaluate(alpha) @ Y.evaluate(alpha), atol=1e-12)

    def test_mul_poly_and_transpose(self):
        rng = np.random.default_rng(1)
        X = random_pmat(rng, 2, 3, 2, 1)
        q = Polynomial(2, {(0, 0): 1.0, (1, 1): -2.0})
        alpha = np.array([0.3, -0.7])
        np.testing.assert_allclose((X * q).evaluate(alpha), q.evaluate(alpha) * X.evaluate(alpha), atol=1e-12)
        np.testing.assert_allclose(X.T.evaluate(alpha), X.evaluate(alpha).T, atol=1e-12)
        S = X @ X.T
        self.assertTrue(S.is_symmetric())

    def test_substitute(self):
        rng = np.random.default_rng(2)
        X = random_pmat(rng, 2, 2, 2, 2)
        Xs = X.substitute({1: 0.4})
        self.assertEqual(Xs.num_vars, 2)
        self.assertTrue(all(m[1] == 0 for m in Xs.monomials()))
        for a1 in (-1.0, 0.0, 0.6):
            np.testing.assert_allclose(Xs.evaluate([a1, 123.0]), X.evaluate([a1, 0.4]), atol=1e-12)

    def test_embed_restrict(self):
        rng = np.random.default_rng(3)
        X = random_pmat(rng, 2, 2, 1, 2)
        E = X.embed(3)
        self.assertTrue(E.depends_only_on_leading(1))
        np.testing.assert_allclose(E.evaluate([0.5, 9.0, -9.0]), X.evaluate([0.5]), atol=1e-12)
        self.assertEqual(E.restrict(1).max_abs_diff(X), 0.0)
        with self.assertRaises(ValueError):
            random_pmat(rng, 1, 1, 2, 1).restrict(1)
        self.assertEqual(embed_monomial((2,), 3), (2, 0, 0))
        with self.assertRaises(ValueError):
            embed_monomial((1, 1), 1)

    def test_pruning_and_truncation(self):
        X = PolynomialMatrix(1, 1, 1, {(0,): [[1.0]], (1,): [[1e-14]], (2,): [[3.0]]})
        self.assertEqual(X.monomials(), [(0,), (2,)])
        self.assertEqual(X.truncate_degree(1).monomials(), [(0,)])
        self.assertTrue((X - X).is_zero())

    def test_block(self):
        I2 = PolynomialMatrix.identity(2, 1)
        z = PolynomialMatrix.zeros(2, 1, 1)
        a = PolynomialMatrix(1, 1, 1, {(1,): [[2.0]]})
        M = block([[I2, z], [z.T, a]])
        self.assertEqual(M.shape, (3, 3))
        np.testing.assert_allclose(M.evaluate([0.5]), np.diag([1.0, 1.0, 1.0]))
        D = block_diag([I2, a])
        self.assertEqual(D.max_abs_diff(M), 0.0)
        with self.assertRaises(ValueError):
            block([[I2, a]])
        with self.assertRaises(ValueError):
            block([[I2, z], [a]])
        with self.assertRaises(ValueError):
            I2 @ PolynomialMatrix.identity(2, 2)

    def test_invalid_terms(self):
        with self.assertRaises(ValueError):
            PolynomialMatrix(2, 2, 1, {(0, 0): np.eye(2)})
        with self.assertRaises(ValueError):
            PolynomialMatrix(2, 2, 1, {(0,): np.eye(3)})
        with self.assertRaises(ValueError):
            Polynomial(1, {(-1,): 1.0})


if __name__ == '__main__':
    pytest.main(["-v", "tests/test_polymat.py"])

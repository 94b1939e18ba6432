import sys
from pathlib import Path
sys.path.insert(0, str(Path(__file__).resolve().parents[1]))

import unittest

import numpy as np
import pytest

from parsreduce.polymat import PolynomialMatrix
from parsreduce.sdp import solve
from parsreduce.sos import (SosProgram, compile, extract, gram_to_poly, matmul, min_eig_on_grid,
                            trace_product)


def scalar_poly(coeffs):
    """1x1 polynomial matrix in one variable, coeffs[k] multiplies alpha^k."""
    return PolynomialMatrix(1, 1, 1, {(k,): [[c]] for k, c in enumerate(coeffs)})


class test_sos(unittest.TestCase):

    def _certify(self, target, degree):
        prog = SosProgram(1)
        S = prog.declare_sos_matrix(target.rows, degree, name="S")
        prog.assert_poly_eq(S.expr - target)
        prob, index_map = compile(prog)
        sol = solve(prob)
        return S, prob, index_map, sol

    def test_gram_layout(self):
        prog = SosProgram(1)
        S = prog.declare_sos_matrix(2, 2)
        self.assertEqual(S.gram_basis, [(0,), (1,)])
        self.assertEqual(S.gram_side, 4)
        self.assertEqual(len(S.var_ids), 10)
        self.assertTrue(S.expr.is_symmetric())
        self.assertEqual(S.expr.degree(), 2)
        with self.assertRaises(ValueError):
            prog.declare_sos_matrix(0, 2)

    def test_sos_certificates(self):
        for coeffs in ([1.0, 0.0, 1.0], [1.0, 2.0, 2.0]):
            target = scalar_poly(coeffs)
            S, prob, index_map, sol = self._certify(target, 2)
            self.assertTrue(sol.feasible, sol.message)
            X = extract(sol, S, prob, index_map)
            self.assertLessEqual(X.max_abs_diff(target), 1e-6)
            self.assertGreaterEqual(np.linalg.eigvalsh(sol.blocks[0])[0], -1e-8)

    def test_matrix_certificate(self):
        # [[1 + a^2, a], [a, 1]] = [[1, a], [0, 1]] [[1, 0], [a, 1]]
        target = PolynomialMatrix(2, 2, 1, {(0,): np.eye(2), (1,): [[0.0, 1.0], [1.0, 0.0]],
                                           (2,): [[1.0, 0.0], [0.0, 0.0]]})
        S, prob, index_map, sol = self._certify(target, 2)
        self.assertTrue(sol.feasible, sol.message)
        X = extract(sol, S, prob, index_map)
        self.assertLessEqual(X.max_abs_diff(target), 1e-6)

    def test_not_sos(self):
        # alpha changes sign, so it has no Gram representation
        S, prob, index_map, sol = self._certify(scalar_poly([0.0, 1.0]), 2)
        self.assertFalse(sol.feasible)
        with self.assertRaises(ValueError):
            extract(sol, S, prob, index_map)

    def test_free_matrix_and_equalities(self):
        prog = SosProgram(1)
        S = prog.declare_sos_matrix(2, 2, name="S")
        F = prog.declare_free_matrix(2, 2, 2, name="F")
        self.assertEqual(len(F.basis), 3)
        con = prog.assert_poly_eq(S.expr - F.expr, symmetric=True)
        # 3 monomials times 3 upper triangle entries
        self.assertEqual(len(con.rows), 9)
        self.assertEqual(prog.num_equalities(), 9)

        prog2 = SosProgram(2)
        G = prog2.declare_free_matrix(1, 1, 2, active_vars=1)
        self.assertEqual(G.basis, [(0, 0), (1, 0), (2, 0)])
        with self.assertRaises(ValueError):
            prog2.declare_free_matrix(1, 1, 1, active_vars=3)

    def test_bilinear_rejected(self):
        prog = SosProgram(1)
        P = prog.declare_sos_matrix(1, 0, name="P")
        F = prog.declare_free_matrix(1, 1, 0, name="A")
        with self.assertRaises(ValueError) as cm:
            matmul(P.expr, F.expr)
        self.assertIn("bilinear", str(cm.exception))
        # products with data are fine
        expr = matmul(scalar_poly([1.0, 1.0]), F.expr)
        self.assertEqual(expr.degree(), 1)

    def test_trace_product(self):
        prog = SosProgram(0)
        F = prog.declare_free_matrix(2, 2, 0, name="F")
        W = np.array([[1.0, 2.0], [3.0, 4.0]])
        t = trace_product(W, F.expr)
        self.assertEqual(t.shape, (1, 1))
        vals = {v: float(i + 1) for i, v in enumerate(sorted(F.expr.lin))}
        F_num = F.expr.substitute_values(vals).evaluate([])
        np.testing.assert_allclose(t.substitute_values(vals).evaluate([]), [[np.trace(W @ F_num)]])

        with self.assertRaises(ValueError):
            trace_product(np.eye(3), F.expr)
        prog1 = SosProgram(1)
        G = prog1.declare_free_matrix(1, 1, 1)
        with self.assertRaises(ValueError):
            trace_product(np.eye(1), G.expr)

    def test_minimize(self):
        # smallest c such that c - 2a + a^2 is SOS: c = 1
        prog = SosProgram(1)
        S = prog.declare_sos_matrix(1, 2)
        c = prog.declare_free_matrix(1, 1, 0, name="c", active_vars=0)
        prog.assert_poly_eq(S.expr - c.expr - scalar_poly([0.0, -2.0, 1.0]))
        prog.minimize(c.expr)
        prob, index_map = compile(prog)
        sol = solve(prob)
        self.assertTrue(sol.feasible, sol.message)
        self.assertAlmostEqual(float(extract(sol, c, prob, index_map).coeff((0,))[0, 0]), 1.0, delta=1e-6)
        with self.assertRaises(ValueError):
            prog.minimize(S.expr)

    def test_gram_to_poly(self):
        Q = np.array([[2.0, 1.0], [1.0, 3.0]])
        X = gram_to_poly(Q, [(0,), (1,)], 1, 1)
        self.assertLessEqual(X.max_abs_diff(scalar_poly([2.0, 2.0, 3.0])), 1e-12)
        self.assertGreater(min_eig_on_grid(X, np.linspace(-1, 1, 11)[:, None]), 0.0)


if __name__ == '__main__':
    pytest.main(["-v", "tests/test_sos.py"])

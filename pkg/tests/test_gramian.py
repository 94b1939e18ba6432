import sys
from pathlib import Path
sys.path.insert(0, str(Path(__file__).resolve().parents[1]))

import unittest

import numpy as np
import pytest

from parsreduce.gramian import (GramianOptions, StructuredGramians, _balance_block, balance_and_truncate,
                                gramian_reduce, lft_realize, lyapunov_residuals, normalize_state_signs,
                                solve_gramians, structured_singular_values)
from parsreduce.model_io import read_model
from parsreduce.polymat import PolynomialMatrix
from parsreduce.psys import ParamStateSpace, SemialgebraicSet, sampled_sup_error

REF = Path(__file__).resolve().parent / "reference_files"
QUIET = GramianOptions(max_iters=20, quiet=True)


def one_param_system(A_terms, B, C, time_domain="discrete"):
    ps = SemialgebraicSet(1, [], [(-1.0, 1.0)])
    n = len(B)
    return ParamStateSpace(time_domain, PolynomialMatrix(n, n, 1, A_terms),
                           PolynomialMatrix.from_array(B, 1), PolynomialMatrix.from_array(C, 1),
                           PolynomialMatrix.zeros(1, 1, 1), ps)


class test_lft(unittest.TestCase):

    def test_structure(self):
        G = read_model(REF / "discrete_two_state.json")
        lft = lft_realize(G)
        self.assertEqual(lft.block_sizes, [2, 1, 1])
        self.assertEqual(lft.Abar.shape, (4, 4))
        self.assertEqual(lft.offsets, [0, 2, 3, 4])
        np.testing.assert_allclose(lft.Abar[:2, :2], G.A.coeff((0, 0)))
        for ell, mono in ((1, (1, 0)), (2, (0, 1))):
            s = lft.block_slice(ell)
            U, A_l = lft.Abar[:2, s], lft.Abar[s, :2]
            np.testing.assert_allclose(U @ A_l, G.A.coeff(mono), atol=1e-12)
            self.assertGreater(U[np.argmax(np.abs(U[:, 0])), 0], 0)
        np.testing.assert_allclose(lft.Bbar, [[1.0], [0.0], [0.0], [0.0]])

    def test_rank(self):
        G = one_param_system({(0,): [[0.2, 0.0], [0.0, 0.1]], (1,): [[0.3, 0.0], [0.0, 0.2]]},
                             [[1.0], [1.0]], [[1.0, 1.0]])
        self.assertEqual(lft_realize(G).block_sizes, [2, 2])
        G = one_param_system({(0,): [[0.5]]}, [[1.0]], [[1.0]])
        self.assertEqual(lft_realize(G).block_sizes, [1, 0])

    def test_rejects(self):
        with self.assertRaises(ValueError) as cm:
            lft_realize(read_model(REF / "scalar_continuous.json"))
        self.assertIn("discrete", str(cm.exception))
        with self.assertRaises(ValueError) as cm:
            lft_realize(one_param_system({(0,): [[0.1]], (2,): [[0.2]]}, [[1.0]], [[1.0]]))
        self.assertIn("affine", str(cm.exception))
        ps = SemialgebraicSet(1, [], [(-1.0, 1.0)])
        param_B = ParamStateSpace("discrete", PolynomialMatrix.from_array([[0.1]], 1),
                                  PolynomialMatrix(1, 1, 1, {(1,): [[1.0]]}), PolynomialMatrix.from_array([[1.0]], 1),
                                  PolynomialMatrix.zeros(1, 1, 1), ps)
        with self.assertRaises(ValueError):
            lft_realize(param_B)


class test_structured_gramians(unittest.TestCase):

    def test_scalar(self):
        # 0.25 x - x + 1 <= 0 is tight at x = 4/3
        lft = lft_realize(one_param_system({(0,): [[0.5]]}, [[1.0]], [[1.0]]))
        grams = solve_gramians(lft, QUIET)
        self.assertAlmostEqual(float(grams.X[0, 0]), 4.0 / 3.0, delta=1e-4)
        self.assertAlmostEqual(float(grams.Y[0, 0]), 4.0 / 3.0, delta=1e-4)
        res_x, res_y = lyapunov_residuals(lft, grams.X, grams.Y)
        self.assertLessEqual(max(res_x, res_y), 1e-7)
        self.assertTrue(grams.converged)
        self.assertTrue(all(b <= a + 1e-6 for a, b in zip(grams.objective_history, grams.objective_history[1:])))

    def test_not_lft_stable(self):
        lft = lft_realize(one_param_system({(0,): [[1.5]]}, [[1.0]], [[1.0]]))
        with self.assertRaises(ValueError) as cm:
            solve_gramians(lft, QUIET)
        self.assertIn("no structured Gramians", str(cm.exception))

    def test_balance_block(self):
        rng = np.random.default_rng(3)
        for n in (1, 2, 4):
            M1, M2 = rng.standard_normal((n, n)), rng.standard_normal((n, n))
            X, Y = M1 @ M1.T + 0.1 * np.eye(n), M2 @ M2.T + 0.1 * np.eye(n)
            T, T_inv, sigma = _balance_block(X, Y, 0)
            np.testing.assert_allclose(T @ T_inv, np.eye(n), atol=1e-8)
            np.testing.assert_allclose(T.T @ X @ T, np.diag(sigma), atol=1e-8)
            np.testing.assert_allclose(T_inv @ Y @ T_inv.T, np.diag(sigma), atol=1e-8)
            self.assertTrue(np.all(np.diff(sigma) <= 1e-12))
            ref = structured_singular_values(StructuredGramians(X, Y, [n]))[0]
            np.testing.assert_allclose(sigma, ref, rtol=1e-6)
        with self.assertRaises(ValueError) as cm:
            _balance_block(np.diag([1.0, 0.0]), np.eye(2), 2)
        self.assertIn("singular Gramian block 2", str(cm.exception))


class test_truncation(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.G = read_model(REF / "discrete_two_state.json")
        cls.lft = lft_realize(cls.G)
        cls.grams = solve_gramians(cls.lft, QUIET)

    def test_keep_all(self):
        reduced, bound, info = balance_and_truncate(self.lft, self.grams, [2, 1, 1])
        self.assertEqual(bound, 0.0)
        self.assertEqual(info["p_prime"], 2)
        err, _, _ = sampled_sup_error(self.G, reduced, 2, grid_per_dim=5)
        self.assertLessEqual(err, 1e-6)

    def test_bound(self):
        for keep in ([1, 1, 0], [1, 1, 1], [2, 1, 0]):
            reduced, bound, info = balance_and_truncate(self.lft, self.grams, keep)
            self.assertEqual(reduced.p, info["p_prime"])
            err, _, _ = sampled_sup_error(self.G, reduced, reduced.p, grid_per_dim=5)
            self.assertLessEqual(err, bound * (1 + 1e-6) + 1e-6)

    def test_bound_forms(self):
        # one value dropped from one block: both forms agree
        _, bound, info = balance_and_truncate(self.lft, self.grams, [2, 1, 0])
        self.assertAlmostEqual(info["bound_block_max"], bound, delta=1e-12)
        _, bound, info = balance_and_truncate(self.lft, self.grams, [1, 1, 0])
        dropped = np.concatenate(info["truncated"])
        self.assertAlmostEqual(bound, 2.0 * float(np.sum(dropped)), delta=1e-12)
        self.assertLessEqual(info["bound_block_max"], bound + 1e-12)

    def test_keep_validation(self):
        for keep in ([1, 1], [3, 1, 1], [0, 1, 1], [1, -1, 0]):
            with self.assertRaises(ValueError):
                balance_and_truncate(self.lft, self.grams, keep)

    def test_normalize_state_signs(self):
        G = one_param_system({(0,): [[0.5, 0.1], [0.0, 0.2]], (1,): [[0.1, 0.0], [0.0, 0.1]]},
                             [[-1.0], [2.0]], [[1.0, 1.0]])
        Gn = normalize_state_signs(G)
        self.assertTrue(np.all(Gn.B.coeff((0,)) > 0))
        for a in (-1.0, 0.3):
            for w in (0.0, 2.0):
                np.testing.assert_allclose(Gn.evaluate([a]).freqresp(w), G.evaluate([a]).freqresp(w), atol=1e-12)

    def test_gramian_reduce(self):
        reduced, bound, info = gramian_reduce(self.G, [1, 1, 0], QUIET)
        self.assertEqual((reduced.n, reduced.p), (1, 1))
        self.assertGreaterEqual(float(reduced.B.coeff((0,))[0, 0]), 0.0)
        self.assertIn("objective_history", info)
        self.assertGreater(bound, 0.0)


if __name__ == '__main__':
    pytest.main(["-v", "tests/test_gramian.py"])

"""
The bounded-real blocks checked against the H-infinity oracle on random fixed systems:
with a decoupled zero reduced model the error system is G itself, so the first P step
must be Feasible at ||G||_inf + 1e-3 and Infeasible, with a verified dual ray, at
||G||_inf - 1e-3.
"""
import sys
from pathlib import Path
sys.path.insert(0, str(Path(__file__).resolve().parents[1]))

import unittest

import numpy as np
import pytest

from parsreduce.polymat import PolynomialMatrix
from parsreduce.psys import ParamStateSpace, SemialgebraicSet, hinf_norm, random_stable_system
from parsreduce.reduce import ReductionConfig, build_continuous_blocks, build_discrete_blocks, step_P

NUM_SYSTEMS = 20
MARGIN = 1e-3  # absolute, around the H-infinity norm


def as_param_system(fixed):
    ps = SemialgebraicSet(0, [], [])
    return ParamStateSpace(fixed.time_domain, *(PolynomialMatrix.from_array(M, 0)
                                                for M in (fixed.A, fixed.B, fixed.C, fixed.D)), ps)


def zero_model(G):
    pole = -1.0 if G.time_domain == "continuous" else 0.0
    ps = SemialgebraicSet(0, [], [])
    return ParamStateSpace(G.time_domain, PolynomialMatrix.from_array([[pole]], 0),
                           PolynomialMatrix.zeros(1, G.m, 0), PolynomialMatrix.zeros(G.o, 1, 0),
                           PolynomialMatrix.zeros(G.o, G.m, 0), ps)


class test_bounded_real(unittest.TestCase):

    cfg = ReductionConfig(n_prime=1, p_prime=0, d_P=0, d_Q0=0, epsilon=1e-9)

    def _check_domain(self, time_domain, seed):
        rng = np.random.default_rng(seed)
        for _ in range(NUM_SYSTEMS):
            n = int(rng.integers(1, 4))
            m, o = int(rng.integers(1, 3)), int(rng.integers(1, 3))
            fixed = random_stable_system(rng, n, m, o, time_domain)
            norm = hinf_norm(fixed)
            G = as_param_system(fixed)
            Gp = zero_model(G)
            above = step_P(G, Gp, norm + MARGIN, self.cfg)
            self.assertEqual(above.status, "Feasible", f"{time_domain} n={n}: not certified above the norm "
                                                       f"({above.message})")
            below = step_P(G, Gp, norm - MARGIN, self.cfg)
            self.assertEqual(below.status, "Infeasible", f"{time_domain} n={n}: {below.status} below the norm "
                                                         f"({below.message})")

    def test_discrete(self):
        self._check_domain("discrete", 11)

    def test_continuous(self):
        self._check_domain("continuous", 12)

    def test_block_shapes(self):
        rng = np.random.default_rng(0)
        G = as_param_system(random_stable_system(rng, 3, 2, 1, "discrete"))
        P = PolynomialMatrix.identity(4, 0)
        blocks = build_discrete_blocks(G, zero_model(G), P, 1.0)
        self.assertEqual(blocks.shape, (2 * 4 + 2 + 1, 2 * 4 + 2 + 1))
        self.assertTrue(blocks.is_symmetric())
        with self.assertRaises(ValueError):
            build_continuous_blocks(G, zero_model(G), P, 1.0)

        Gc = as_param_system(random_stable_system(rng, 3, 2, 1, "continuous"))
        blocks = build_continuous_blocks(Gc, zero_model(Gc), P, 1.0)
        self.assertEqual(blocks.shape, (4 + 2 + 1, 4 + 2 + 1))
        with self.assertRaises(ValueError):
            build_discrete_blocks(Gc, zero_model(Gc), P, 1.0)


if __name__ == '__main__':
    pytest.main(["-v", "tests/test_bounded_real.py"])

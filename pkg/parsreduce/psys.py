"""
Parameter-dependent state-space systems over semi-algebraic parameter sets, the
augmented error system and a sampled H-infinity validation oracle.
"""
import itertools
from dataclasses import dataclass, field
from functools import partial
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import linalg

from parsreduce.config import get_hinf_cross_check
from parsreduce.polymat import Polynomial, PolynomialMatrix, block, block_diag
from parsreduce.libs import parallel_map

TIME_DOMAINS = ("continuous", "discrete")
STABILITY_MARGIN = 1e-9
ADMISSIBLE_TOL = 1e-9


@dataclass
class SemialgebraicSet:
    """
    {alpha : q_l(alpha) >= 0 for all l} inside the sampling box.

    witnesses: optional Archimedean certificate polynomials w_l, carried along but not
    used by the sampling code.
    """
    num_vars: int
    constraints: List[Polynomial] = field(default_factory=list)
    box: List[Tuple[float, float]] = field(default_factory=list)
    witnesses: List[Polynomial] = field(default_factory=list)

    def __post_init__(self):
        self.box = [(float(lo), float(hi)) for lo, hi in self.box]
        if len(self.box) != self.num_vars:
            raise ValueError(f"sampling box has {len(self.box)} intervals for {self.num_vars} parameters")
        for i, (lo, hi) in enumerate(self.box):
            if lo > hi:
                raise ValueError(f"sampling box interval {i} is empty: [{lo}, {hi}]")
        for q in self.constraints + self.witnesses:
            if q.num_vars != self.num_vars:
                raise ValueError(f"constraint polynomial has {q.num_vars} variables, set has {self.num_vars}")

    def contains(self, alpha, tol=ADMISSIBLE_TOL) -> bool:
        return all(q.evaluate(alpha) >= -tol for q in self.constraints)

    def center(self) -> np.ndarray:
        return np.array([0.5 * (lo + hi) for lo, hi in self.box])

    def grid(self, grid_per_dim: int = 21) -> np.ndarray:
        """
        Admissible points of the regular grid on the box, row-major (last parameter
        varies fastest).
        """
        if grid_per_dim < 1:
            raise ValueError(f"grid_per_dim must be >= 1, got {grid_per_dim}")
        axes = [np.linspace(lo, hi, grid_per_dim) if grid_per_dim > 1 else np.array([0.5 * (lo + hi)])
                for lo, hi in self.box]
        points = [np.array(p, dtype=float) for p in itertools.product(*axes)]
        points = [p for p in points if self.contains(p)]
        return np.array(points).reshape(len(points), self.num_vars)

    def project(self, p_prime: int) -> "SemialgebraicSet":
        """Set over the leading p_prime parameters: box projection plus the constraints that only use them."""
        if p_prime > self.num_vars:
            raise ValueError(f"p_prime={p_prime} exceeds the {self.num_vars} parameters")
        cons = [q.restrict(p_prime) for q in self.constraints if q.depends_only_on_leading(p_prime)]
        wits = [w.restrict(p_prime) for w in self.witnesses if w.depends_only_on_leading(p_prime)]
        return SemialgebraicSet(p_prime, cons, self.box[:p_prime], wits)


@dataclass
class FixedStateSpace:
    time_domain: str
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        if self.time_domain not in TIME_DOMAINS:
            raise ValueError(f"unknown time domain: {self.time_domain}")
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float)) if np.size(self.A) else np.zeros((0, 0))
        n = self.A.shape[0]
        self.D = np.atleast_2d(np.asarray(self.D, dtype=float))
        o, m = self.D.shape
        self.B = np.asarray(self.B, dtype=float).reshape(n, m)
        self.C = np.asarray(self.C, dtype=float).reshape(o, n)
        if self.A.shape != (n, n):
            raise ValueError(f"A must be square, got {self.A.shape}")

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.B.shape[1]

    @property
    def o(self):
        return self.C.shape[0]

    def poles(self):
        return np.linalg.eigvals(self.A) if self.n else np.zeros(0)

    def stability_measure(self) -> float:
        """Spectral abscissa (continuous) or spectral radius (discrete)."""
        poles = self.poles()
        if not len(poles):
            return -np.inf if self.time_domain == "continuous" else 0.0
        return float(np.max(poles.real)) if self.time_domain == "continuous" else float(np.max(np.abs(poles)))

    def is_stable(self, margin=STABILITY_MARGIN) -> bool:
        if self.time_domain == "continuous":
            return self.stability_measure() < -margin
        return self.stability_measure() < 1.0 - margin

    def freqresp(self, w: float) -> np.ndarray:
        """Transfer matrix at s = jw (continuous) or z = exp(jw) (discrete)."""
        s = 1j * w if self.time_domain == "continuous" else np.exp(1j * w)
        if not self.n:
            return self.D.astype(complex)
        return self.C @ np.linalg.solve(s * np.eye(self.n) - self.A, self.B) + self.D

    def sigma_max(self, w: float) -> float:
        return float(np.linalg.norm(self.freqresp(w), 2))


@dataclass
class ParamStateSpace:
    time_domain: str
    A: PolynomialMatrix
    B: PolynomialMatrix
    C: PolynomialMatrix
    D: PolynomialMatrix
    param_set: SemialgebraicSet

    def __post_init__(self):
        if self.time_domain not in TIME_DOMAINS:
            raise ValueError(f"unknown time domain: {self.time_domain}")
        n, m, o = self.A.rows, self.B.cols, self.C.rows
        expected = {"A": (n, n), "B": (n, m), "C": (o, n), "D": (o, m)}
        for name, shape in expected.items():
            mat = getattr(self, name)
            if mat.shape != shape:
                raise ValueError(f"{name} has shape {mat.shape}, expected {shape}")
            if mat.num_vars != self.param_set.num_vars:
                raise ValueError(f"{name} has {mat.num_vars} variables, parameter set has {self.param_set.num_vars}")

    @property
    def n(self):
        return self.A.rows

    @property
    def m(self):
        return self.B.cols

    @property
    def o(self):
        return self.C.rows

    @property
    def p(self):
        return self.param_set.num_vars

    def evaluate(self, alpha) -> FixedStateSpace:
        return FixedStateSpace(self.time_domain, self.A.evaluate(alpha), self.B.evaluate(alpha),
                               self.C.evaluate(alpha), self.D.evaluate(alpha))

    def matrices(self):
        return {"A": self.A, "B": self.B, "C": self.C, "D": self.D}

    def embed(self, num_vars: int, param_set: SemialgebraicSet) -> "ParamStateSpace":
        return ParamStateSpace(self.time_domain, self.A.embed(num_vars), self.B.embed(num_vars),
                               self.C.embed(num_vars), self.D.embed(num_vars), param_set)

    def check_stable_on(self, points) -> None:
        for a in points:
            fixed = self.evaluate(a)
            if not fixed.is_stable():
                raise ValueError(f"system is not stable at alpha={np.round(a, 6).tolist()} "
                                 f"(stability measure {fixed.stability_measure():.6g})")


def project_params(alpha, p_prime: int) -> np.ndarray:
    alpha = np.asarray(alpha, dtype=float).ravel()
    if p_prime > len(alpha) or p_prime < 0:
        raise ValueError(f"p_prime={p_prime} is not in [0, {len(alpha)}]")
    return alpha[:p_prime]


def augment(G: ParamStateSpace, Gp: ParamStateSpace, p_prime: int) -> ParamStateSpace:
    """
    Error system G - Gp o T with state (x, x'):

        A~ = diag(A, A'),  B~ = [B; B'],  C~ = [C, -C'],  D~ = D - D'
    """
    if G.time_domain != Gp.time_domain:
        raise ValueError(f"time domains differ: {G.time_domain} vs {Gp.time_domain}")
    if (G.m, G.o) != (Gp.m, Gp.o):
        raise ValueError(f"input/output dimensions differ: (m={G.m}, o={G.o}) vs (m={Gp.m}, o={Gp.o})")
    if p_prime > G.p:
        raise ValueError(f"p_prime={p_prime} exceeds the {G.p} parameters of the original system")
    if Gp.p != p_prime:
        raise ValueError(f"reduced system has {Gp.p} parameters, expected p_prime={p_prime}")
    red = Gp.embed(G.p, G.param_set)
    A = block_diag([G.A, red.A])
    B = block([[G.B], [red.B]])
    C = block([[G.C, -red.C]])
    D = G.D - red.D
    return ParamStateSpace(G.time_domain, A, B, C, D, G.param_set)


def _check_hinf_input(sys: FixedStateSpace):
    if not sys.is_stable():
        raise ValueError(f"infinite H∞ norm: system not stable (stability measure {sys.stability_measure():.6g})")


def _hankel_upper_bound(sys: FixedStateSpace) -> float:
    Wc, Wo = gramians(sys)
    hsv = np.sqrt(np.clip(np.real(np.linalg.eigvals(Wc @ Wo)), 0.0, None))
    return float(np.linalg.norm(sys.D, 2) + 2.0 * np.sum(hsv))


def _candidate_frequencies(sys: FixedStateSpace) -> np.ndarray:
    poles = sys.poles()
    if sys.time_domain == "continuous":
        w = np.concatenate([[0.0], np.abs(poles.imag), np.abs(poles)])
        scale = max(1.0, float(np.max(np.abs(poles), initial=1.0)))
        w = np.concatenate([w, np.logspace(-3, 3, 61) * scale])
    else:
        w = np.concatenate([[0.0, np.pi], np.abs(np.angle(poles)), np.linspace(0, np.pi, 65)])
    return np.unique(w)


def _crossings_continuous(sys: FixedStateSpace, g: float) -> np.ndarray:
    A, B, C, D = sys.A, sys.B, sys.C, sys.D
    R_inv = np.linalg.inv(g ** 2 * np.eye(sys.m) - D.T @ D)
    Ar = A + B @ R_inv @ D.T @ C
    H = np.block([[Ar, B @ R_inv @ B.T],
                  [-C.T @ (np.eye(sys.o) + D @ R_inv @ D.T) @ C, -Ar.T]])
    eigs = np.linalg.eigvals(H)
    on_axis = np.abs(eigs.real) <= 1e-6 * (1.0 + np.abs(eigs))
    return np.unique(np.abs(eigs[on_axis].imag))


def _crossings_discrete(sys: FixedStateSpace, g: float) -> np.ndarray:
    """
    Generalised eigenvalues z of the symplectic pencil M - z N on the unit circle are
    exactly the frequencies where sigma_max(G(z)) = g.
    """
    A, B, C, D = sys.A, sys.B, sys.C, sys.D
    n, m = sys.n, sys.m
    Z = np.zeros
    M = np.block([[A, Z((n, n)), B],
                  [-C.T @ C, np.eye(n), -C.T @ D],
                  [D.T @ C, Z((m, n)), D.T @ D - g ** 2 * np.eye(m)]])
    N = np.block([[np.eye(n), Z((n, n)), Z((n, m))],
                  [Z((n, n)), A.T, Z((n, m))],
                  [Z((m, n)), -B.T, Z((m, m))]])
    eigs = linalg.eig(M, N, right=False)
    eigs = eigs[np.isfinite(eigs)]
    eigs = eigs[np.abs(eigs) < 1e8]
    on_circle = np.abs(np.abs(eigs) - 1.0) <= 1e-6
    return np.unique(np.abs(np.angle(eigs[on_circle])))


def hinf_norm(sys: FixedStateSpace, tol: float = 1e-8, cross_check: Optional[bool] = None) -> float:
    """
    H-infinity norm by bisection on gamma. The crossing test is the Hamiltonian
    imaginary-axis test (continuous) or the symplectic pencil unit-circle test
    (discrete). Lower bounds only ever come from evaluated frequency responses, so
    the result stays within tol*(1+value) of the true norm.

    cross_check: compare against frequency_sweep_norm (discrete and continuous) and keep
    the larger value. None defers to PARS_REDUCE_HINF_CROSS_CHECK.
    """
    _check_hinf_input(sys)
    sd = float(np.linalg.norm(sys.D, 2)) if sys.D.size else 0.0
    if sys.n == 0 or not np.any(sys.B) or not np.any(sys.C):
        return sd

    lo = max([sd] + [sys.sigma_max(w) for w in _candidate_frequencies(sys)])
    hi = max(_hankel_upper_bound(sys), lo) * (1 + 1e-9) + 1e-12
    crossings = _crossings_continuous if sys.time_domain == "continuous" else _crossings_discrete

    for _ in range(200):
        if hi - lo <= tol * (1.0 + lo):
            break
        g = 0.5 * (lo + hi)
        freqs = crossings(sys, g)
        best = 0.0
        if len(freqs):
            refined = np.concatenate([freqs, 0.5 * (freqs[1:] + freqs[:-1])])
            best = max(sys.sigma_max(w) for w in refined)
        if best >= g * (1 - 1e-7):
            lo = max(lo, best)
            hi = max(hi, lo)
        else:
            hi = g
    value = 0.5 * (lo + hi)

    if cross_check is None:
        cross_check = get_hinf_cross_check()
    if cross_check:
        sweep = frequency_sweep_norm(sys)
        if sweep > value * (1 + 1e-6) + 1e-12:
            print(f"WARNING: frequency sweep ({sweep:.10g}) exceeds bisection result ({value:.10g}); using sweep")
            value = sweep
    return value


def _golden_max(fn, a, b, iters=60):
    gr = (np.sqrt(5) - 1) / 2
    c, d = b - gr * (b - a), a + gr * (b - a)
    fc, fd = fn(c), fn(d)
    for _ in range(iters):
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - gr * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + gr * (b - a)
            fd = fn(d)
    return max(fc, fd)


def frequency_sweep_norm(sys: FixedStateSpace, num_points: int = 2048) -> float:
    """Dense frequency sweep with golden-section refinement around the best sample."""
    _check_hinf_input(sys)
    if sys.n == 0:
        return float(np.linalg.norm(sys.D, 2)) if sys.D.size else 0.0
    if sys.time_domain == "discrete":
        w = np.linspace(0.0, np.pi, num_points)
    else:
        scale = max(1.0, float(np.max(np.abs(sys.poles()))))
        w = np.concatenate([[0.0], np.logspace(-4, 4, num_points - 1) * scale])
    vals = np.array([sys.sigma_max(x) for x in w])
    k = int(np.argmax(vals))
    a, b = w[max(k - 1, 0)], w[min(k + 1, len(w) - 1)]
    return float(max(vals[k], _golden_max(sys.sigma_max, a, b)))


def _point_error(aug: ParamStateSpace, tol: float, cross_check, alpha) -> float:
    return hinf_norm(aug.evaluate(alpha), tol=tol, cross_check=cross_check)


def sampled_sup_error(G: ParamStateSpace, Gp: ParamStateSpace, p_prime: int, grid_per_dim: int = 21,
                      nr_threads: int = 1, tol: float = 1e-8, quiet: bool = True,
                      cross_check: Optional[bool] = None):
    """
    max over the admissible grid of ||G(alpha) - Gp(T alpha)||_inf.

    returns: (max_error, argmax_alpha, table) where table is a DataFrame with one row
    per admissible grid point in traversal order (parameters alpha_1.. and error).
    """
    points = G.param_set.grid(grid_per_dim)
    if not len(points):
        raise ValueError("empty admissible grid: no grid point satisfies the parameter constraints")
    aug = augment(G, Gp, p_prime)
    errors = parallel_map(partial(_point_error, aug, tol, cross_check), list(points), nr_threads=nr_threads,
                          quiet=quiet, desc="H∞ grid")
    errors = np.array(errors, dtype=float)
    k = int(np.argmax(errors))
    table = pd.DataFrame(points, columns=[f"alpha_{i + 1}" for i in range(points.shape[1])])
    table["error"] = errors
    return float(errors[k]), points[k].copy(), table


def max_spectral_diff_on_grid(P1: PolynomialMatrix, P2: PolynomialMatrix, points: Sequence[np.ndarray]) -> float:
    return float(max((np.linalg.norm(P1.evaluate(a) - P2.evaluate(a), 2) for a in points), default=0.0))


def random_stable_system(rng: np.random.Generator, n: int, m: int, o: int, time_domain: str,
                         margin: Optional[float] = None) -> FixedStateSpace:
    """Random stable system, used for oracle cross-checks."""
    A = rng.standard_normal((n, n))
    if time_domain == "continuous":
        shift = np.max(np.linalg.eigvals(A).real) + (margin if margin is not None else 0.5)
        A = A - shift * np.eye(n)
    else:
        rho = np.max(np.abs(np.linalg.eigvals(A)))
        A = A * ((margin if margin is not None else 0.8) / rho)
    B = rng.standard_normal((n, m))
    C = rng.standard_normal((o, n))
    D = 0.1 * rng.standard_normal((o, m))
    return FixedStateSpace(time_domain, A, B, C, D)


def _psd_factor(W):
    """L with W ~= L L^T for a symmetric PSD W (eigenvalues clipped at 0)."""
    lam, E = np.linalg.eigh(0.5 * (W + W.T))
    return E * np.sqrt(np.clip(lam, 0.0, None))


def gramians(sys: FixedStateSpace):
    if sys.time_domain == "continuous":
        Wc = linalg.solve_continuous_lyapunov(sys.A, -sys.B @ sys.B.T)
        Wo = linalg.solve_continuous_lyapunov(sys.A.T, -sys.C.T @ sys.C)
    else:
        Wc = linalg.solve_discrete_lyapunov(sys.A, sys.B @ sys.B.T)
        Wo = linalg.solve_discrete_lyapunov(sys.A.T, sys.C.T @ sys.C)
    return Wc, Wo


def balanced_truncation(sys: FixedStateSpace, r: int):
    """
    Square-root balanced truncation of a stable fixed system.

    returns: (W, V, hsv) with W^T V = I_r; the reduced system is
    (W^T A V, W^T B, C V, D) and hsv are the Hankel singular values.
    """
    _check_hinf_input(sys)
    if not 1 <= r <= sys.n:
        raise ValueError(f"truncation order r={r} must be in [1, {sys.n}]")
    Wc, Wo = gramians(sys)
    Lc, Lo = _psd_factor(Wc), _psd_factor(Wo)
    U, s, Vt = np.linalg.svd(Lo.T @ Lc)
    s_r = np.maximum(s[:r], 1e-14 * max(s[0], 1e-300))
    scale = 1.0 / np.sqrt(s_r)
    V = (Lc @ Vt[:r].T) * scale
    W = (Lo @ U[:, :r]) * scale
    return W, V, s

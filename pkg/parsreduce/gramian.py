"""
Gramian-based baseline for discrete-time systems with affine parameter dependence:
LFT realisation, structured (block-diagonal) Gramians from alternating trace
minimisation, per-block balancing and truncation with its a-priori error bound.
"""
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg
from tqdm import tqdm

from parsreduce import sos
from parsreduce.polymat import PolynomialMatrix
from parsreduce.psys import ParamStateSpace, SemialgebraicSet
from parsreduce.sdp import SdpOptions, solve

RANK_TOL = 1e-10
SINGULAR_TOL = 1e-10
LYAPUNOV_TOL = 1e-7


@dataclass
class LftRealization:
    """
    A(alpha) = A0 + sum_l alpha_l U_l A_l written as the constant system

        Abar = [[A0, U_1, ..., U_p], [A_1, 0, ..., 0], ..., [A_p, 0, ..., 0]]
        Bbar = [B; 0; ...],  Cbar = [C, 0, ...]

    block_sizes = [n, r_1, ..., r_p]; a parameter that does not enter A has r_l = 0.
    """
    Abar: np.ndarray
    Bbar: np.ndarray
    Cbar: np.ndarray
    D: np.ndarray
    block_sizes: List[int]
    param_set: SemialgebraicSet

    @property
    def offsets(self) -> List[int]:
        return np.concatenate([[0], np.cumsum(self.block_sizes)]).astype(int).tolist()

    def block_slice(self, i: int) -> slice:
        offs = self.offsets
        return slice(offs[i], offs[i + 1])


@dataclass
class GramianOptions:
    eps_alg: float = 1e-6
    max_iters: int = 100
    sdp: SdpOptions = field(default_factory=SdpOptions)
    quiet: bool = False
    verbose: bool = False


@dataclass
class StructuredGramians:
    X: np.ndarray
    Y: np.ndarray
    block_sizes: List[int]
    objective_history: List[float] = field(default_factory=list)
    iterations: int = 0
    converged: bool = False

    def blocks(self, which: str) -> List[np.ndarray]:
        M = self.X if which == "X" else self.Y
        offs = np.concatenate([[0], np.cumsum(self.block_sizes)]).astype(int)
        return [M[offs[i]:offs[i + 1], offs[i]:offs[i + 1]] for i in range(len(self.block_sizes))]


def lft_realize(G: ParamStateSpace) -> LftRealization:
    if G.time_domain != "discrete":
        raise ValueError("baseline requires discrete time")
    if G.A.degree() > 1 or not (G.B.is_constant() and G.C.is_constant() and G.D.is_constant()):
        raise ValueError("baseline requires affine LFT form")

    p, n = G.p, G.n
    zero = (0,) * p
    A0 = G.A.coeff(zero)
    Us, As = [], []
    for ell in range(p):
        mono = tuple(1 if i == ell else 0 for i in range(p))
        U, s, Vt = np.linalg.svd(G.A.coeff(mono))
        r = int(np.sum(s > RANK_TOL))
        U_l, A_l = U[:, :r].copy(), s[:r, None] * Vt[:r]
        # largest entry of every column of U_l positive
        for k in range(r):
            if U_l[np.argmax(np.abs(U_l[:, k])), k] < 0:
                U_l[:, k] *= -1.0
                A_l[k] *= -1.0
        Us.append(U_l)
        As.append(A_l)

    sizes = [n] + [u.shape[1] for u in Us]
    N = sum(sizes)
    Abar = np.zeros((N, N))
    Abar[:n, :n] = A0
    off = n
    for U_l, A_l in zip(Us, As):
        r = U_l.shape[1]
        Abar[:n, off:off + r] = U_l
        Abar[off:off + r, :n] = A_l
        off += r
    Bbar = np.vstack([G.B.coeff(zero), np.zeros((N - n, G.m))])
    Cbar = np.hstack([G.C.coeff(zero), np.zeros((G.o, N - n))])
    return LftRealization(Abar, Bbar, Cbar, G.D.coeff(zero), sizes, G.param_set)


def _structured_program(lft: LftRealization, weights: Optional[Tuple[np.ndarray, np.ndarray]] = None):
    """
    Block-diagonal X, Y with
        Abar^T X Abar - X + Cbar^T Cbar <= 0,   Abar Y Abar^T - Y + Bbar Bbar^T <= 0
    as an SOS program without parameters. weights = (X_old, Y_old) adds the
    objective trace(X_old Y + X Y_old).
    """
    prog = sos.SosProgram(0)
    N = lft.Abar.shape[0]
    nonempty = [i for i, s in enumerate(lft.block_sizes) if s > 0]

    def structured(name):
        declared = {i: prog.declare_sos_matrix(lft.block_sizes[i], 0, f"{name}{i}") for i in nonempty}
        grid = [[declared[i].expr if i == j else sos.zeros(lft.block_sizes[i], lft.block_sizes[j], 0)
                 for j in nonempty] for i in nonempty]
        return sos.block(grid)

    X, Y = structured("X"), structured("Y")
    Ab = PolynomialMatrix.from_array(lft.Abar, 0)
    CtC = PolynomialMatrix.from_array(lft.Cbar.T @ lft.Cbar, 0)
    BBt = PolynomialMatrix.from_array(lft.Bbar @ lft.Bbar.T, 0)
    slack_x = prog.declare_sos_matrix(N, 0, "SX")
    slack_y = prog.declare_sos_matrix(N, 0, "SY")
    prog.assert_poly_eq(Ab.T @ X @ Ab - X + CtC + slack_x.expr, symmetric=True, name="observability")
    prog.assert_poly_eq(Ab @ Y @ Ab.T - Y + BBt + slack_y.expr, symmetric=True, name="controllability")
    if weights is not None:
        X_old, Y_old = weights
        prog.minimize(sos.trace_product(X_old, Y) + sos.trace_product(Y_old, X))
    return prog, X, Y


def _solve_structured(lft: LftRealization, opts: GramianOptions, weights=None):
    prog, X, Y = _structured_program(lft, weights)
    prob, index_map = sos.compile(prog)
    sol = solve(prob, opts.sdp)
    if not sol.feasible:
        return None, sol
    vals = {v: val for v, val in enumerate(sos.scalar_values(sol, prob, index_map))}
    return (X.substitute_values(vals).coeff(()), Y.substitute_values(vals).coeff(())), sol


def lyapunov_residuals(lft: LftRealization, X: np.ndarray, Y: np.ndarray) -> Tuple[float, float]:
    # both values <= 0 when X and Y satisfy their inequalities
    A, B, C = lft.Abar, lft.Bbar, lft.Cbar
    Lx = A.T @ X @ A - X + C.T @ C
    Ly = A @ Y @ A.T - Y + B @ B.T
    return float(np.linalg.eigvalsh(0.5 * (Lx + Lx.T))[-1]), float(np.linalg.eigvalsh(0.5 * (Ly + Ly.T))[-1])


def solve_gramians(lft: LftRealization, opts: GramianOptions = None) -> StructuredGramians:
    """
    Alternating linearised minimisation of trace(XY): each step solves
    min trace(X_old Y + X Y_old) over the structured Lyapunov inequalities and stops
    once ||X - X_old|| + ||Y - Y_old|| <= eps_alg.
    """
    opts = opts if opts is not None else GramianOptions()
    first, sol = _solve_structured(lft, opts)
    if first is None:
        raise ValueError(f"no structured Gramians (system not LFT-stable): SDP status {sol.status.value} "
                         f"{sol.message}".rstrip())
    X_old, Y_old = first
    history = [float(np.trace(X_old @ Y_old))]
    converged = False
    it = 0
    for it in tqdm(range(1, opts.max_iters + 1), disable=opts.quiet, desc="Gramians"):
        nxt, sol = _solve_structured(lft, opts, weights=(X_old, Y_old))
        if nxt is None:
            if not opts.quiet:
                print(f"WARNING: Gramian alternation stopped at iteration {it}: SDP status {sol.status.value}")
            break
        X, Y = nxt
        change = np.linalg.norm(X - X_old) + np.linalg.norm(Y - Y_old)
        history.append(float(np.trace(X @ Y)))
        if opts.verbose:
            print(f"  Gramian iteration {it}: trace(XY)={history[-1]:.6g} change={change:.3g}")
        X_old, Y_old = X, Y
        if change <= opts.eps_alg:
            converged = True
            break

    res_x, res_y = lyapunov_residuals(lft, X_old, Y_old)
    if max(res_x, res_y) > LYAPUNOV_TOL and not opts.quiet:
        print(f"WARNING: structured Gramians violate the Lyapunov inequalities by {max(res_x, res_y):.2e}")
    return StructuredGramians(X_old, Y_old, list(lft.block_sizes), history, it, converged)


def _balance_block(X: np.ndarray, Y: np.ndarray, i: int):
    """T with T^T X T = T^-1 Y T^-T = diag(sigma), sigma descending."""
    for name, M in (("X", X), ("Y", Y)):
        lam_min = np.linalg.eigvalsh(0.5 * (M + M.T))[0]
        if lam_min < SINGULAR_TOL:
            raise ValueError(f"singular Gramian block {i} of {name} (smallest eigenvalue {lam_min:.3g})")
    R = linalg.cholesky(0.5 * (Y + Y.T), lower=True)
    U, s2, _ = np.linalg.svd(R.T @ X @ R)
    sigma = np.sqrt(s2)
    T = R @ U / np.sqrt(sigma)
    T_inv = (np.sqrt(sigma)[:, None] * U.T) @ linalg.solve_triangular(R, np.eye(len(R)), lower=True)
    return T, T_inv, sigma


def structured_singular_values(grams: StructuredGramians) -> List[np.ndarray]:
    """Generalised Hankel singular values per block: sqrt(eig(X_ii Y_ii)), descending."""
    out = []
    for X, Y in zip(grams.blocks("X"), grams.blocks("Y")):
        if not len(X):
            out.append(np.zeros(0))
            continue
        ev = np.real(np.linalg.eigvals(X @ Y))
        out.append(np.sort(np.sqrt(np.clip(ev, 0.0, None)))[::-1])
    return out


def balance_and_truncate(lft: LftRealization, grams: StructuredGramians,
                         keep: Sequence[int]) -> Tuple[ParamStateSpace, float, dict]:
    """
    keep: retained size per block ([states, channel 1, ..., channel p]).

    returns: (reduced system over the leading parameters whose channels are kept,
              error bound 2 * sum of truncated singular values, info)

    The bound counts every dropped singular value. The single-value form 2 * sqrt(sigma_max(X_jj Y_jj))
    coincides with it when one block drops one value, and is reported as info["bound_block_max"];
    it is not an upper bound once a block drops several distinct values.
    """
    keep = [int(k) for k in keep]
    sizes = lft.block_sizes
    if len(keep) != len(sizes):
        raise ValueError(f"keep has {len(keep)} entries, LFT has {len(sizes)} blocks")
    for i, (k, s) in enumerate(zip(keep, sizes)):
        if not 0 <= k <= s:
            raise ValueError(f"keep[{i}]={k} is not in [0, {s}]")
    if keep[0] < 1:
        raise ValueError("at least one state must be kept")

    Xb, Yb = grams.blocks("X"), grams.blocks("Y")
    Ts, T_invs, sigmas = [], [], []
    for i, s in enumerate(sizes):
        if s == 0:
            Ts.append(np.zeros((0, 0)))
            T_invs.append(np.zeros((0, 0)))
            sigmas.append(np.zeros(0))
        elif keep[i] == 0:
            # dropped channel: only its singular values enter the bound
            Ts.append(np.eye(s))
            T_invs.append(np.eye(s))
            sigmas.append(structured_singular_values(
                StructuredGramians(Xb[i], Yb[i], [s]))[0])
        else:
            T, T_inv, sigma = _balance_block(Xb[i], Yb[i], i)
            Ts.append(T)
            T_invs.append(T_inv)
            sigmas.append(sigma)

    T = linalg.block_diag(*Ts)
    T_inv = linalg.block_diag(*T_invs)
    Ab = T_inv @ lft.Abar @ T
    Bb = T_inv @ lft.Bbar
    Cb = lft.Cbar @ T

    offs = lft.offsets
    kept = [list(range(offs[i], offs[i] + keep[i])) for i in range(len(sizes))]
    k0 = kept[0]
    p_prime = max([ell for ell in range(1, len(sizes)) if keep[ell] > 0], default=0)
    A_r = PolynomialMatrix.from_array(Ab[np.ix_(k0, k0)], p_prime)
    for ell in range(1, p_prime + 1):
        if not keep[ell]:
            continue
        U_r = Ab[np.ix_(k0, kept[ell])]
        A_l = Ab[np.ix_(kept[ell], k0)]
        mono = tuple(1 if i == ell - 1 else 0 for i in range(p_prime))
        A_r = A_r + PolynomialMatrix(len(k0), len(k0), p_prime, {mono: U_r @ A_l})
    reduced = ParamStateSpace("discrete", A_r,
                              PolynomialMatrix.from_array(Bb[k0], p_prime),
                              PolynomialMatrix.from_array(Cb[:, k0], p_prime),
                              PolynomialMatrix.from_array(lft.D, p_prime),
                              lft.param_set.project(p_prime))
    truncated = [sigma[keep[i]:] for i, sigma in enumerate(sigmas)]
    bound = 2.0 * float(sum(np.sum(t) for t in truncated))
    block_max = 2.0 * float(sum(t[0] for t in truncated if len(t)))
    info = {"singular_values": sigmas, "truncated": truncated, "bound_block_max": block_max, "keep": keep,
            "p_prime": p_prime}
    return reduced, bound, info


def normalize_state_signs(sys: ParamStateSpace) -> ParamStateSpace:
    # largest-magnitude entry of every row of B(0) made positive
    B0 = sys.B.coeff((0,) * sys.p)
    signs = np.ones(sys.n)
    for i in range(sys.n):
        if B0.shape[1] and B0[i, np.argmax(np.abs(B0[i]))] < 0:
            signs[i] = -1.0
    S = PolynomialMatrix.from_array(np.diag(signs), sys.p)
    return ParamStateSpace(sys.time_domain, S @ sys.A @ S, S @ sys.B, sys.C @ S, sys.D, sys.param_set)


def gramian_reduce(G: ParamStateSpace, keep: Sequence[int], opts: GramianOptions = None):
    lft = lft_realize(G)
    grams = solve_gramians(lft, opts)
    reduced, bound, info = balance_and_truncate(lft, grams, keep)
    reduced = normalize_state_signs(reduced)
    info["objective_history"] = grams.objective_history
    info["iterations"] = grams.iterations
    info["converged"] = grams.converged
    return reduced, bound, info

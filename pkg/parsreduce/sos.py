"""
Sum-of-squares programs over polynomial matrices, lowered to block-diagonal SDPs.

An SOS matrix variable X(alpha) of side n and Gram basis m(alpha) is

    X(alpha) = (m(alpha) kron I_n)^T Q (m(alpha) kron I_n),   Q PSD,

so X[k, l] = sum_{i,j} m_i m_j Q[i*n + k, j*n + l]. Free polynomial matrix variables
carry one scalar per (monomial, row, col). Constraints are affine expressions that
must vanish identically; they become one linear equality per (monomial, entry).
"""
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
import scipy.sparse as sp
from scipy import linalg

from parsreduce.polymat import (PRUNE_TOL, Monomial, Polynomial, PolynomialMatrix, block as poly_block,
                                embed_monomial, monomial_basis, monomial_degree, monomial_mul, monomial_sort_key)
from parsreduce.sdp import SdpProblem, SdpSolution


class AffinePolyMatrix:
    """
    const(alpha) + sum_v x_v * lin[v](alpha), with x_v scalar decision variables.

    groups holds the names of the variable groups that occur, for error messages.
    """

    def __init__(self, const: PolynomialMatrix, lin: Dict[int, PolynomialMatrix] = None, groups=frozenset()):
        self.const = const
        self.lin = {v: M for v, M in (lin or {}).items() if not M.is_zero()}
        self.groups = frozenset(groups) if self.lin else frozenset()

    @classmethod
    def lift(cls, x: Union["AffinePolyMatrix", PolynomialMatrix]) -> "AffinePolyMatrix":
        if isinstance(x, AffinePolyMatrix):
            return x
        if isinstance(x, PolynomialMatrix):
            return cls(x)
        raise TypeError(f"cannot use {type(x).__name__} in a polynomial matrix expression")

    @property
    def rows(self):
        return self.const.rows

    @property
    def cols(self):
        return self.const.cols

    @property
    def shape(self):
        return self.const.shape

    @property
    def num_vars(self):
        return self.const.num_vars

    def is_constant(self) -> bool:
        return not self.lin

    def degree(self) -> int:
        return max([self.const.degree()] + [M.degree() for M in self.lin.values()])

    def is_symmetric(self) -> bool:
        return self.const.is_symmetric() and all(M.is_symmetric() for M in self.lin.values())

    def _map(self, fn) -> "AffinePolyMatrix":
        return AffinePolyMatrix(fn(self.const), {v: fn(M) for v, M in self.lin.items()}, self.groups)

    def transpose(self):
        return self._map(lambda M: M.transpose())

    @property
    def T(self):
        return self.transpose()

    def scale(self, factor):
        return self._map(lambda M: M.scale(factor))

    def mul_poly(self, poly: Polynomial):
        return self._map(lambda M: M.mul_poly(poly))

    def __add__(self, other):
        other = AffinePolyMatrix.lift(other)
        if self.shape != other.shape:
            raise ValueError(f"shape mismatch in add: {self.shape} vs {other.shape}")
        lin = dict(self.lin)
        for v, M in other.lin.items():
            lin[v] = lin[v] + M if v in lin else M
        return AffinePolyMatrix(self.const + other.const, lin, self.groups | other.groups)

    __radd__ = __add__

    def __neg__(self):
        return self.scale(-1.0)

    def __sub__(self, other):
        return self + (-AffinePolyMatrix.lift(other))

    def __rsub__(self, other):
        return AffinePolyMatrix.lift(other) + (-self)

    def __mul__(self, other):
        if isinstance(other, Polynomial):
            return self.mul_poly(other)
        return self.scale(other)

    __rmul__ = __mul__

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def substitute_values(self, values: Dict[int, float]) -> PolynomialMatrix:
        """Evaluate the decision variables; missing variables count as zero."""
        res = self.const
        for v, M in self.lin.items():
            if v in values:
                res = res + M.scale(values[v])
        return res


def matmul(left, right) -> AffinePolyMatrix:
    left, right = AffinePolyMatrix.lift(left), AffinePolyMatrix.lift(right)
    if left.cols != right.rows:
        raise ValueError(f"shape mismatch in matmul: {left.shape} @ {right.shape}")
    if left.lin and right.lin:
        raise ValueError(f"bilinear expression: product of decision variables {sorted(left.groups)} and "
                         f"{sorted(right.groups)}")
    if right.lin:
        C = left.const
        return AffinePolyMatrix(C @ right.const, {v: C @ M for v, M in right.lin.items()}, right.groups)
    C = right.const
    return AffinePolyMatrix(left.const @ C, {v: M @ C for v, M in left.lin.items()}, left.groups)


def block(rows: List[List[Union[AffinePolyMatrix, PolynomialMatrix]]]) -> AffinePolyMatrix:
    """Block assembly of affine expressions (see polymat.block)."""
    rows = [[AffinePolyMatrix.lift(b) for b in r] for r in rows]
    num_vars = rows[0][0].num_vars
    const = poly_block([[b.const for b in r] for r in rows])
    all_vars = sorted(set(v for r in rows for b in r for v in b.lin))
    groups = frozenset().union(*[b.groups for r in rows for b in r])
    lin = {}
    for v in all_vars:
        grid = [[b.lin.get(v, PolynomialMatrix.zeros(b.rows, b.cols, num_vars)) for b in r] for r in rows]
        lin[v] = poly_block(grid)
    return AffinePolyMatrix(const, lin, groups)


def zeros(rows, cols, num_vars) -> AffinePolyMatrix:
    return AffinePolyMatrix(PolynomialMatrix.zeros(rows, cols, num_vars))


def trace_product(W: np.ndarray, expr) -> AffinePolyMatrix:
    """trace(W expr) as a 1x1 expression, for parameter-free expressions (objectives)."""
    expr = AffinePolyMatrix.lift(expr)
    W = np.asarray(W, dtype=float)
    if W.shape != (expr.cols, expr.rows):
        raise ValueError(f"trace weight has shape {W.shape}, expected {(expr.cols, expr.rows)}")
    if expr.const.degree() > 0 or any(M.degree() > 0 for M in expr.lin.values()):
        raise ValueError("trace_product needs an expression that does not depend on the parameters")
    zero = (0,) * expr.num_vars

    def tr(M: PolynomialMatrix):
        return PolynomialMatrix(1, 1, expr.num_vars, {zero: np.array([[np.sum(W.T * M.coeff(zero))]])})

    return AffinePolyMatrix(tr(expr.const), {v: tr(M) for v, M in expr.lin.items()}, expr.groups)


def _tri_pairs(side):
    r, c = np.triu_indices(side)
    return list(zip(r.tolist(), c.tolist()))


@dataclass
class SosMatrixVar:
    name: str
    size: int
    degree: int
    gram_basis: List[Monomial]
    block_index: int
    var_ids: Dict[Tuple[int, int], int]
    expr: AffinePolyMatrix = None
    # Gram matrix is face @ W @ face.T with W the PSD block; None means W is the Gram matrix
    face: Optional[np.ndarray] = None

    @property
    def gram_side(self):
        if self.face is not None:
            return self.face.shape[1]
        return self.size * len(self.gram_basis)

    def gram_matrix(self, W: np.ndarray) -> np.ndarray:
        return W if self.face is None else self.face @ W @ self.face.T


@dataclass
class FreePolyMatrixVar:
    name: str
    rows: int
    cols: int
    degree: int
    basis: List[Monomial]
    var_ids: Dict[Tuple[int, int, int], int]
    expr: AffinePolyMatrix = None


@dataclass
class Constraint:
    name: str
    rows: List[Tuple[Dict[int, float], float]]
    symmetric: bool
    index: int


@dataclass
class SosProgram:
    """
    num_vars: number of polynomial variables (parameters) of the program.
    """
    num_vars: int
    sos_vars: List[SosMatrixVar] = field(default_factory=list)
    free_vars: List[FreePolyMatrixVar] = field(default_factory=list)
    constraints: List[Constraint] = field(default_factory=list)
    objective: Dict[int, float] = field(default_factory=dict)
    num_scalars: int = 0
    # scalar id -> ("psd", block, r, c) or ("free", var index, monomial index, row, col)
    scalar_kind: Dict[int, tuple] = field(default_factory=dict)

    def declare_sos_matrix(self, n: int, degree: int, name: Optional[str] = None,
                           face: Optional[np.ndarray] = None) -> SosMatrixVar:
        """
        Allocate an SOS polynomial matrix of side n. The Gram basis has degree ceil(degree/2).
        face (see gram_face) restricts the Gram matrix to face @ W @ face.T, W PSD.
        """
        if n < 1:
            raise ValueError(f"SOS matrix side must be >= 1, got {n}")
        if degree < 0:
            raise ValueError(f"SOS matrix degree must be >= 0, got {degree}")
        name = name or f"S{len(self.sos_vars)}"
        basis = monomial_basis(self.num_vars, (degree + 1) // 2)
        full_side = n * len(basis)
        if face is not None:
            face = np.asarray(face, dtype=float)
            if face.ndim != 2 or face.shape[0] != full_side or face.shape[1] < 1:
                raise ValueError(f"face for {name} must have shape ({full_side}, k>=1), got {face.shape}")
        side = full_side if face is None else face.shape[1]
        block_index = len(self.sos_vars)
        var_ids = {}
        for a, b in _tri_pairs(side):
            var_ids[(a, b)] = self.num_scalars
            self.scalar_kind[self.num_scalars] = ("psd", block_index, a, b)
            self.num_scalars += 1

        lin = {}
        for (a, b), v in var_ids.items():
            if face is not None:
                E = np.outer(face[:, a], face[:, b])
                lin[v] = gram_to_poly(E + E.T if a != b else E, basis, n, self.num_vars)
                continue
            i, k = divmod(a, n)
            j, l = divmod(b, n)
            E = np.zeros((n, n))
            E[k, l] += 1.0
            if a != b:
                E[l, k] += 1.0
            mono = monomial_mul(basis[i], basis[j])
            lin[v] = PolynomialMatrix(n, n, self.num_vars, {mono: E})
        var = SosMatrixVar(name, n, degree, basis, block_index, var_ids, face=face)
        var.expr = AffinePolyMatrix(PolynomialMatrix.zeros(n, n, self.num_vars), lin, {name})
        self.sos_vars.append(var)
        return var

    def declare_free_matrix(self, rows: int, cols: int, degree: int, name: Optional[str] = None,
                            active_vars: Optional[int] = None) -> FreePolyMatrixVar:
        """
        Allocate a polynomial matrix with free coefficients. active_vars restricts the
        monomials to the leading variables (e.g. alpha' = first p' parameters).
        """
        if degree < 0:
            raise ValueError(f"free matrix degree must be >= 0, got {degree}")
        active = self.num_vars if active_vars is None else active_vars
        if active > self.num_vars:
            raise ValueError(f"active_vars={active} exceeds the {self.num_vars} program variables")
        name = name or f"F{len(self.free_vars)}"
        basis = [embed_monomial(m, self.num_vars) for m in monomial_basis(active, degree)]
        var_ids = {}
        lin = {}
        for mi, mono in enumerate(basis):
            for r in range(rows):
                for c in range(cols):
                    v = self.num_scalars
                    var_ids[(mi, r, c)] = v
                    self.scalar_kind[v] = ("free", len(self.free_vars), mi, r, c)
                    self.num_scalars += 1
                    E = np.zeros((rows, cols))
                    E[r, c] = 1.0
                    lin[v] = PolynomialMatrix(rows, cols, self.num_vars, {mono: E})
        var = FreePolyMatrixVar(name, rows, cols, degree, basis, var_ids)
        var.expr = AffinePolyMatrix(PolynomialMatrix.zeros(rows, cols, self.num_vars), lin, {name})
        self.free_vars.append(var)
        return var

    def assert_poly_eq(self, expr, symmetric: Optional[bool] = None, name: Optional[str] = None) -> Constraint:
        """
        Require expr(alpha) == 0 identically. Symmetric expressions only emit the upper
        triangle. Rows are collected in graded-lex monomial order, then by entry.
        """
        expr = AffinePolyMatrix.lift(expr)
        if expr.num_vars != self.num_vars:
            raise ValueError(f"expression has {expr.num_vars} variables, program has {self.num_vars}")
        if symmetric is None:
            symmetric = expr.is_symmetric()

        collected = {}

        def emit(M: PolynomialMatrix, key):
            for mono, coeff in M.terms.items():
                if symmetric:
                    coeff = np.triu(coeff)
                rr, cc = np.nonzero(np.abs(coeff) > PRUNE_TOL)
                for r, c in zip(rr.tolist(), cc.tolist()):
                    row = collected.setdefault((mono, r, c), [{}, 0.0])
                    if key is None:
                        row[1] -= coeff[r, c]
                    else:
                        row[0][key] = row[0].get(key, 0.0) + coeff[r, c]

        emit(expr.const, None)
        for v in sorted(expr.lin):
            emit(expr.lin[v], v)

        rows = []
        for (mono, r, c) in sorted(collected, key=lambda k: (monomial_sort_key(k[0]), k[1], k[2])):
            coeffs, rhs = collected[(mono, r, c)]
            coeffs = {v: x for v, x in coeffs.items() if abs(x) > PRUNE_TOL}
            if not coeffs and abs(rhs) <= PRUNE_TOL:
                continue
            rows.append((coeffs, rhs))
        con = Constraint(name or f"eq{len(self.constraints)}", rows, symmetric, len(self.constraints))
        self.constraints.append(con)
        return con

    def minimize(self, expr):
        """Linear objective; expr must be 1x1 and constant in alpha."""
        expr = AffinePolyMatrix.lift(expr)
        if expr.shape != (1, 1):
            raise ValueError(f"objective must be 1x1, got {expr.shape}")
        zero = (0,) * self.num_vars
        obj = {}
        for v, M in expr.lin.items():
            if any(m != zero for m in M.terms):
                raise ValueError("objective must not depend on the parameters")
            obj[v] = float(M.coeff(zero)[0, 0])
        self.objective = obj

    def num_equalities(self) -> int:
        return sum(len(c.rows) for c in self.constraints)


@dataclass
class IndexMap:
    """Program scalar id -> SDP scalar index (-1 for free scalars that occur nowhere)."""
    sdp_index: np.ndarray


def compile(prog: SosProgram) -> Tuple[SdpProblem, IndexMap]:
    """
    Lower prog to an SdpProblem. PSD blocks are the Gram blocks in declaration order;
    free scalars follow in declaration order, minus those not used by any row.
    """
    used = set()
    for con in prog.constraints:
        for coeffs, _ in con.rows:
            used.update(coeffs)
    used.update(prog.objective)

    block_sizes = [v.gram_side for v in prog.sos_vars]
    offsets = [0]
    for s in block_sizes:
        offsets.append(offsets[-1] + s * (s + 1) // 2)

    sdp_index = -np.ones(prog.num_scalars, dtype=int)
    num_free = 0
    for sid in range(prog.num_scalars):
        kind = prog.scalar_kind[sid]
        if kind[0] == "psd":
            _, blk, r, c = kind
            s = block_sizes[blk]
            sdp_index[sid] = offsets[blk] + r * s - r * (r - 1) // 2 + (c - r)
        elif sid in used:
            sdp_index[sid] = offsets[-1] + num_free
            num_free += 1

    rows, cols, vals, b = [], [], [], []
    i = 0
    for con in prog.constraints:
        for coeffs, rhs in con.rows:
            for v, x in coeffs.items():
                rows.append(i)
                cols.append(sdp_index[v])
                vals.append(x)
            b.append(rhs)
            i += 1
    n_scalars = offsets[-1] + num_free
    A = sp.csr_matrix((vals, (rows, cols)), shape=(i, n_scalars))
    c = np.zeros(n_scalars)
    for v, x in prog.objective.items():
        c[sdp_index[v]] += x
    return SdpProblem(block_sizes, num_free, A, np.array(b, dtype=float), c), IndexMap(sdp_index)


def scalar_values(sol: SdpSolution, prob: SdpProblem, index_map: IndexMap) -> np.ndarray:
    x = prob.pack(sol.blocks, sol.free)
    vals = np.zeros(len(index_map.sdp_index))
    mask = index_map.sdp_index >= 0
    vals[mask] = x[index_map.sdp_index[mask]]
    return vals


def extract(sol: SdpSolution, var: Union[SosMatrixVar, FreePolyMatrixVar], prob: SdpProblem,
            index_map: IndexMap) -> PolynomialMatrix:
    """Rebuild the polynomial matrix of var from a Feasible solution."""
    if not sol.feasible:
        raise ValueError(f"cannot extract {var.name} from a solution with status {sol.status.value}")
    vals = scalar_values(sol, prob, index_map)
    num_vars = var.expr.num_vars
    if isinstance(var, SosMatrixVar):
        Q = var.gram_matrix(sol.blocks[var.block_index])
        return gram_to_poly(Q, var.gram_basis, var.size, num_vars)
    terms = {}
    for (mi, r, c), v in var.var_ids.items():
        mono = var.basis[mi]
        if mono not in terms:
            terms[mono] = np.zeros((var.rows, var.cols))
        terms[mono][r, c] = vals[v]
    return PolynomialMatrix(var.rows, var.cols, num_vars, terms)


def gram_to_poly(Q: np.ndarray, basis: List[Monomial], n: int, num_vars: int) -> PolynomialMatrix:
    """(m kron I_n)^T Q (m kron I_n) as a polynomial matrix."""
    Q = 0.5 * (Q + Q.T)
    terms = {}
    nb = len(basis)
    for i in range(nb):
        for j in range(nb):
            mono = monomial_mul(basis[i], basis[j])
            blk = Q[i * n:(i + 1) * n, j * n:(j + 1) * n]
            terms[mono] = terms[mono] + blk if mono in terms else np.array(blk)
    return PolynomialMatrix(n, n, num_vars, terms).symmetrize()


def gram_face(num_vars: int, degree: int, n: int, factors: List[PolynomialMatrix], reach: int,
              tol: float = 1e-9) -> Optional[np.ndarray]:
    """
    Columns R spanning the Gram matrices Q = R W R^T of an SOS matrix X of side n for
    which every F in factors has F(alpha) X(alpha) free of terms above degree reach.

    Those terms can only come from the top homogeneous parts, F_f X_top == 0. With
    X_top = Z^T T Z for the top Gram block T, this holds iff T (m_top kron I) F_f^T == 0,
    so T lives on the null space of the stacked coefficients. Returns None when no
    direction is removed, and an array with zero columns when X is forced to vanish.
    """
    basis = monomial_basis(num_vars, (degree + 1) // 2)
    h = max(monomial_degree(m) for m in basis)
    top = [i for i, m in enumerate(basis) if monomial_degree(m) == h]
    stacked = []
    for F in factors:
        if F.cols != n:
            raise ValueError(f"factor has {F.cols} columns, SOS matrix has side {n}")
        f = F.degree()
        if F.is_zero() or 2 * h + f <= reach:
            continue
        Z = {}
        for mono, coeff in F.terms.items():
            if monomial_degree(mono) != f:
                continue
            for t, i in enumerate(top):
                Zg = Z.setdefault(monomial_mul(basis[i], mono), np.zeros((len(top) * n, F.rows)))
                Zg[t * n:(t + 1) * n, :] += coeff.T
        stacked.extend(Z[g] for g in sorted(Z, key=monomial_sort_key))
    if not stacked:
        return None
    U = linalg.null_space(np.hstack(stacked).T, rcond=tol)
    if U.shape[1] == len(top) * n:
        return None

    side = n * len(basis)
    top_idx = np.concatenate([np.arange(i * n, (i + 1) * n) for i in top])
    low_idx = np.setdiff1d(np.arange(side), top_idx)
    R = np.zeros((side, len(low_idx) + U.shape[1]))
    R[low_idx, np.arange(len(low_idx))] = 1.0
    R[np.ix_(top_idx, len(low_idx) + np.arange(U.shape[1]))] = U
    return R


def min_eig_on_grid(X: PolynomialMatrix, points) -> float:
    """Smallest eigenvalue of the symmetric part of X over the given parameter points."""
    eigs = []
    for a in points:
        Xa = X.evaluate(a)
        eigs.append(np.linalg.eigvalsh(0.5 * (Xa + Xa.T))[0])
    return float(min(eigs, default=0.0))

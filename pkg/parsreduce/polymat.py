"""
Multivariate polynomials and polynomial matrices in the parameter vector alpha.

Coefficients are dense float arrays keyed by exponent tuples. All objects are
treated as immutable: every operation returns a new object.
"""
from math import comb
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np

Monomial = Tuple[int, ...]

PRUNE_TOL = 1e-12
SYM_TOL = 1e-10


def monomial_degree(mono: Monomial) -> int:
    return int(sum(mono))


def monomial_mul(m1: Monomial, m2: Monomial) -> Monomial:
    return tuple(a + b for a, b in zip(m1, m2))


def monomial_sort_key(mono: Monomial):
    """
    Graded-lex key: total degree first, then exponents in descending lexicographic order,
    so that for two variables the degree-1 block is [alpha_1, alpha_2].
    """
    return (monomial_degree(mono), tuple(-e for e in mono))


def _exponents_of_degree(num_vars: int, degree: int) -> List[Monomial]:
    if num_vars == 0:
        return [()] if degree == 0 else []
    if num_vars == 1:
        return [(degree,)]
    res = []
    for first in range(degree, -1, -1):
        for rest in _exponents_of_degree(num_vars - 1, degree - first):
            res.append((first,) + rest)
    return res


def monomial_basis(num_vars: int, max_degree: int) -> List[Monomial]:
    """
    All monomials of total degree <= max_degree in graded-lex order.

    len(result) == comb(num_vars + max_degree, max_degree)
    """
    if max_degree < 0:
        raise ValueError(f"max_degree must be >= 0, got {max_degree}")
    basis = []
    for d in range(max_degree + 1):
        basis.extend(_exponents_of_degree(num_vars, d))
    assert len(basis) == comb(num_vars + max_degree, max_degree)
    return basis


def monomial_value(alpha: np.ndarray, mono: Monomial) -> float:
    # powers by repeated multiplication
    val = 1.0
    for a, e in zip(alpha, mono):
        for _ in range(e):
            val *= a
    return val


def embed_monomial(mono: Monomial, num_vars: int) -> Monomial:
    """Pad a monomial over the leading variables with zero exponents."""
    if len(mono) > num_vars:
        raise ValueError(f"cannot embed monomial {mono} into {num_vars} variables")
    return tuple(mono) + (0,) * (num_vars - len(mono))


class Polynomial:
    """Scalar polynomial. terms: monomial -> float coefficient."""

    def __init__(self, num_vars: int, terms: Dict[Monomial, float] = None):
        self.num_vars = int(num_vars)
        self.terms = {}
        for mono, c in (terms or {}).items():
            mono = tuple(int(e) for e in mono)
            if len(mono) != self.num_vars:
                raise ValueError(f"monomial {mono} does not have {self.num_vars} exponents")
            if any(e < 0 for e in mono):
                raise ValueError(f"negative exponent in monomial {mono}")
            c = float(c)
            if abs(c) > PRUNE_TOL:
                self.terms[mono] = self.terms.get(mono, 0.0) + c
        self.terms = {m: c for m, c in self.terms.items() if abs(c) > PRUNE_TOL}

    @classmethod
    def constant(cls, num_vars, value):
        return cls(num_vars, {(0,) * num_vars: value})

    @classmethod
    def variable(cls, num_vars, idx):
        mono = tuple(1 if i == idx else 0 for i in range(num_vars))
        return cls(num_vars, {mono: 1.0})

    def degree(self) -> int:
        if not self.terms:
            return 0
        return max(monomial_degree(m) for m in self.terms)

    def evaluate(self, alpha) -> float:
        alpha = np.asarray(alpha, dtype=float).ravel()
        if len(alpha) != self.num_vars:
            raise ValueError(f"alpha has length {len(alpha)}, polynomial has {self.num_vars} variables")
        return float(sum(c * monomial_value(alpha, m) for m, c in self.sorted_terms()))

    def sorted_terms(self):
        return sorted(self.terms.items(), key=lambda t: monomial_sort_key(t[0]))

    def embed(self, num_vars: int) -> "Polynomial":
        return Polynomial(num_vars, {embed_monomial(m, num_vars): c for m, c in self.terms.items()})

    def depends_only_on_leading(self, k: int) -> bool:
        return all(all(e == 0 for e in m[k:]) for m in self.terms)

    def restrict(self, k: int) -> "Polynomial":
        """Drop the trailing variables; only valid when they do not occur."""
        if not self.depends_only_on_leading(k):
            raise ValueError(f"polynomial depends on variables beyond the first {k}")
        return Polynomial(k, {m[:k]: c for m, c in self.terms.items()})

    def __add__(self, other):
        if not isinstance(other, Polynomial):
            if not np.isscalar(other):
                return NotImplemented
            other = Polynomial.constant(self.num_vars, other)
        _check_vars(self.num_vars, other.num_vars)
        terms = dict(self.terms)
        for m, c in other.terms.items():
            terms[m] = terms.get(m, 0.0) + c
        return Polynomial(self.num_vars, terms)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(self.num_vars, {m: -c for m, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if not isinstance(other, Polynomial):
            if not np.isscalar(other):
                return NotImplemented
            return Polynomial(self.num_vars, {m: c * float(other) for m, c in self.terms.items()})
        _check_vars(self.num_vars, other.num_vars)
        terms = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                m = monomial_mul(m1, m2)
                terms[m] = terms.get(m, 0.0) + c1 * c2
        return Polynomial(self.num_vars, terms)

    __rmul__ = __mul__

    def __eq__(self, other):
        return isinstance(other, Polynomial) and self.num_vars == other.num_vars and \
            self.terms.keys() == other.terms.keys() and \
            all(abs(self.terms[m] - other.terms[m]) <= PRUNE_TOL for m in self.terms)

    def __repr__(self):
        return f"Polynomial({self.num_vars}, {dict(self.sorted_terms())})"


def _check_vars(n1, n2):
    if n1 != n2:
        raise ValueError(f"number of variables differs: {n1} vs {n2}")


class PolynomialMatrix:
    """
    Matrix with polynomial entries, stored as monomial -> (rows x cols) coefficient array.
    """

    def __init__(self, rows: int, cols: int, num_vars: int, terms: Dict[Monomial, np.ndarray] = None):
        self.rows = int(rows)
        self.cols = int(cols)
        self.num_vars = int(num_vars)
        self.terms = {}
        for mono, coeff in (terms or {}).items():
            mono = tuple(int(e) for e in mono)
            if len(mono) != self.num_vars:
                raise ValueError(f"monomial {mono} does not have {self.num_vars} exponents")
            if any(e < 0 for e in mono):
                raise ValueError(f"negative exponent in monomial {mono}")
            if np.size(coeff) != self.rows * self.cols:
                raise ValueError(f"coefficient of shape {np.shape(coeff)} does not fit a "
                                 f"{self.rows}x{self.cols} matrix")
            coeff = np.array(coeff, dtype=float).reshape(self.rows, self.cols)
            if mono in self.terms:
                coeff = coeff + self.terms[mono]
            self.terms[mono] = coeff
        self.terms = {m: c for m, c in self.terms.items() if np.max(np.abs(c), initial=0.0) > PRUNE_TOL}
        for c in self.terms.values():
            c.setflags(write=False)

    # constructors
    @classmethod
    def zeros(cls, rows, cols, num_vars):
        return cls(rows, cols, num_vars, {})

    @classmethod
    def from_array(cls, arr, num_vars):
        arr = np.atleast_2d(np.asarray(arr, dtype=float))
        return cls(arr.shape[0], arr.shape[1], num_vars, {(0,) * num_vars: arr})

    @classmethod
    def identity(cls, n, num_vars):
        return cls.from_array(np.eye(n), num_vars)

    @property
    def shape(self):
        return (self.rows, self.cols)

    def sorted_terms(self):
        return sorted(self.terms.items(), key=lambda t: monomial_sort_key(t[0]))

    def monomials(self) -> List[Monomial]:
        return [m for m, _ in self.sorted_terms()]

    def degree(self) -> int:
        if not self.terms:
            return 0
        return max(monomial_degree(m) for m in self.terms)

    def is_zero(self) -> bool:
        return not self.terms

    def is_constant(self) -> bool:
        return all(monomial_degree(m) == 0 for m in self.terms)

    def is_symmetric(self, tol=SYM_TOL) -> bool:
        if self.rows != self.cols:
            return False
        return all(np.max(np.abs(c - c.T), initial=0.0) <= tol for c in self.terms.values())

    def coeff(self, mono: Monomial) -> np.ndarray:
        mono = tuple(mono)
        if mono in self.terms:
            return np.array(self.terms[mono])
        return np.zeros((self.rows, self.cols))

    def evaluate(self, alpha) -> np.ndarray:
        alpha = np.asarray(alpha, dtype=float).ravel()
        if len(alpha) != self.num_vars:
            raise ValueError(f"alpha has length {len(alpha)}, polynomial matrix has {self.num_vars} variables")
        res = np.zeros((self.rows, self.cols))
        for mono, c in self.sorted_terms():
            res = res + monomial_value(alpha, mono) * c
        return res

    def transpose(self) -> "PolynomialMatrix":
        return PolynomialMatrix(self.cols, self.rows, self.num_vars, {m: c.T for m, c in self.terms.items()})

    @property
    def T(self):
        return self.transpose()

    def scale(self, factor: float) -> "PolynomialMatrix":
        terms = {m: c * float(factor) for m, c in self.terms.items()}
        return PolynomialMatrix(self.rows, self.cols, self.num_vars, terms)

    def add(self, other: "PolynomialMatrix") -> "PolynomialMatrix":
        _check_vars(self.num_vars, other.num_vars)
        if self.shape != other.shape:
            raise ValueError(f"shape mismatch in add: {self.shape} vs {other.shape}")
        terms = {m: np.array(c) for m, c in self.terms.items()}
        for m, c in other.terms.items():
            terms[m] = terms[m] + c if m in terms else np.array(c)
        return PolynomialMatrix(self.rows, self.cols, self.num_vars, terms)

    def matmul(self, other: "PolynomialMatrix") -> "PolynomialMatrix":
        _check_vars(self.num_vars, other.num_vars)
        if self.cols != other.rows:
            raise ValueError(f"shape mismatch in matmul: {self.shape} @ {other.shape}")
        terms = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                m = monomial_mul(m1, m2)
                prod = c1 @ c2
                terms[m] = terms[m] + prod if m in terms else prod
        return PolynomialMatrix(self.rows, other.cols, self.num_vars, terms)

    def mul_poly(self, poly: Polynomial) -> "PolynomialMatrix":
        """Entrywise product with a scalar polynomial."""
        _check_vars(self.num_vars, poly.num_vars)
        terms = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in poly.terms.items():
                m = monomial_mul(m1, m2)
                terms[m] = terms[m] + c1 * c2 if m in terms else c1 * c2
        return PolynomialMatrix(self.rows, self.cols, self.num_vars, terms)

    def symmetrize(self) -> "PolynomialMatrix":
        terms = {m: 0.5 * (c + c.T) for m, c in self.terms.items()}
        return PolynomialMatrix(self.rows, self.cols, self.num_vars, terms)

    def truncate_degree(self, max_degree: int) -> "PolynomialMatrix":
        return PolynomialMatrix(self.rows, self.cols, self.num_vars,
                                {m: c for m, c in self.terms.items() if monomial_degree(m) <= max_degree})

    def embed(self, num_vars: int) -> "PolynomialMatrix":
        """Re-index a matrix over the leading variables into a space with num_vars variables."""
        return PolynomialMatrix(self.rows, self.cols, num_vars,
                                {embed_monomial(m, num_vars): c for m, c in self.terms.items()})

    def depends_only_on_leading(self, k: int) -> bool:
        return all(all(e == 0 for e in m[k:]) for m in self.terms)

    def restrict(self, k: int) -> "PolynomialMatrix":
        if not self.depends_only_on_leading(k):
            raise ValueError(f"polynomial matrix depends on variables beyond the first {k}")
        return PolynomialMatrix(self.rows, self.cols, k, {m[:k]: c for m, c in self.terms.items()})

    def substitute(self, values: Dict[int, float]) -> "PolynomialMatrix":
        """
        Fix some variables to numbers. The number of variables is unchanged; the
        substituted variables simply no longer occur.

        values: variable index -> value
        """
        terms = {}
        for m, c in self.terms.items():
            factor = 1.0
            new_m = list(m)
            for idx, val in values.items():
                for _ in range(m[idx]):
                    factor *= val
                new_m[idx] = 0
            new_m = tuple(new_m)
            terms[new_m] = terms[new_m] + factor * c if new_m in terms else factor * c
        return PolynomialMatrix(self.rows, self.cols, self.num_vars, terms)

    def max_abs_diff(self, other: "PolynomialMatrix") -> float:
        diff = self - other
        if diff.is_zero():
            return 0.0
        return float(max(np.max(np.abs(c)) for c in diff.terms.values()))

    def __add__(self, other):
        if not isinstance(other, PolynomialMatrix):
            return NotImplemented
        return self.add(other)

    def __sub__(self, other):
        if not isinstance(other, PolynomialMatrix):
            return NotImplemented
        return self.add(other.scale(-1.0))

    def __neg__(self):
        return self.scale(-1.0)

    def __matmul__(self, other):
        if not isinstance(other, PolynomialMatrix):
            return NotImplemented
        return self.matmul(other)

    def __mul__(self, other):
        if isinstance(other, Polynomial):
            return self.mul_poly(other)
        if not np.isscalar(other):
            return NotImplemented
        return self.scale(other)

    __rmul__ = __mul__

    def __repr__(self):
        return f"PolynomialMatrix({self.rows}x{self.cols}, vars={self.num_vars}, monomials={self.monomials()})"


def block(rows: Sequence[Sequence[PolynomialMatrix]]) -> PolynomialMatrix:
    """
    Assemble a block matrix. Blocks in a block-row share their row count and blocks
    in a block-column share their column count.
    """
    num_vars = rows[0][0].num_vars
    row_sizes = [r[0].rows for r in rows]
    col_sizes = [b.cols for b in rows[0]]
    for i, r in enumerate(rows):
        if len(r) != len(col_sizes):
            raise ValueError(f"block row {i} has {len(r)} blocks, expected {len(col_sizes)}")
        for j, b in enumerate(r):
            _check_vars(num_vars, b.num_vars)
            if b.shape != (row_sizes[i], col_sizes[j]):
                raise ValueError(f"block ({i},{j}) has shape {b.shape}, expected {(row_sizes[i], col_sizes[j])}")
    r_off = np.concatenate([[0], np.cumsum(row_sizes)]).astype(int)
    c_off = np.concatenate([[0], np.cumsum(col_sizes)]).astype(int)
    terms = {}
    for i, r in enumerate(rows):
        for j, b in enumerate(r):
            for m, c in b.terms.items():
                if m not in terms:
                    terms[m] = np.zeros((r_off[-1], c_off[-1]))
                terms[m][r_off[i]:r_off[i + 1], c_off[j]:c_off[j + 1]] += c
    return PolynomialMatrix(int(r_off[-1]), int(c_off[-1]), num_vars, terms)


def block_diag(mats: Iterable[PolynomialMatrix]) -> PolynomialMatrix:
    mats = list(mats)
    num_vars = mats[0].num_vars
    grid = [[m if i == j else PolynomialMatrix.zeros(m.rows, o.cols, num_vars) for j, o in enumerate(mats)]
            for i, m in enumerate(mats)]
    return block(grid)

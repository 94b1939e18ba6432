"""
ModelFile JSON codec.

    {
      "timeDomain": "continuous" | "discrete",
      "dims": {"n": .., "m": .., "o": .., "p": ..},
      "matrices": {"A": [{"monomial": [e_1, ..., e_p], "coeff": [[..], ..]}, ...], "B": .., "C": .., "D": ..},
      "paramSet": {"constraints": [[{"monomial": [..], "coeff": c}, ...], ...],
                   "box": [[lo, hi], ...],
                   "witnesses": [...]}            # optional
    }

Parsing is strict: unknown fields are rejected and every error names the JSON path of
the offending field. Serialisation is canonical (graded-lex monomial order, floats
written with enough digits to round-trip).
"""
import json
from pathlib import Path
from typing import List, Union

import numpy as np

from parsreduce.polymat import Polynomial, PolynomialMatrix
from parsreduce.psys import TIME_DOMAINS, ParamStateSpace, SemialgebraicSet
from parsreduce.reduce import ReductionConfig

MODEL_KEYS = ("timeDomain", "dims", "matrices", "paramSet")
DIM_KEYS = ("n", "m", "o", "p")
MATRIX_KEYS = ("A", "B", "C", "D")
PARAM_SET_KEYS = ("constraints", "box", "witnesses")


def load_json(file_in: Union[str, Path]):
    """json.load with 'file:line:column' diagnostics for syntax errors."""
    with open(file_in) as f:
        text = f.read()
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise ValueError(f"{file_in}:{e.lineno}:{e.colno}: invalid JSON: {e.msg}") from None


def _check_keys(obj, path, allowed, required):
    if not isinstance(obj, dict):
        raise ValueError(f"{path}: expected an object, got {type(obj).__name__}")
    unknown = [k for k in obj if k not in allowed]
    if unknown:
        raise ValueError(f"{path}: unknown field(s) {', '.join(sorted(unknown))}")
    for k in required:
        if k not in obj:
            raise ValueError(f"{path}.{k}: required field missing")


def _number(x, path) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ValueError(f"{path}: expected a number, got {x!r}")
    return float(x)


def _count(x, path) -> int:
    if isinstance(x, bool) or not isinstance(x, int) or x < 0:
        raise ValueError(f"{path}: expected a non-negative integer, got {x!r}")
    return x


def _monomial(x, path, p):
    if not isinstance(x, list) or len(x) != p:
        raise ValueError(f"{path}: expected a list of {p} exponents, got {x!r}")
    return tuple(_count(e, f"{path}[{i}]") for i, e in enumerate(x))


def _parse_matrix(terms, path, rows, cols, p) -> PolynomialMatrix:
    if not isinstance(terms, list):
        raise ValueError(f"{path}: expected a list of terms")
    parsed = {}
    for t, term in enumerate(terms):
        tpath = f"{path}[{t}]"
        _check_keys(term, tpath, ("monomial", "coeff"), ("monomial", "coeff"))
        mono = _monomial(term["monomial"], f"{tpath}.monomial", p)
        if mono in parsed:
            raise ValueError(f"{tpath}.monomial: duplicate monomial {list(mono)}")
        coeff = term["coeff"]
        if not isinstance(coeff, list) or len(coeff) != rows:
            raise ValueError(f"{tpath}.coeff: expected {rows} rows")
        mat = np.zeros((rows, cols))
        for r, row in enumerate(coeff):
            if not isinstance(row, list) or len(row) != cols:
                raise ValueError(f"{tpath}.coeff[{r}]: expected {cols} entries")
            for c, v in enumerate(row):
                mat[r, c] = _number(v, f"{tpath}.coeff[{r}][{c}]")
        parsed[mono] = mat
    return PolynomialMatrix(rows, cols, p, parsed)


def _parse_polynomial(terms, path, p) -> Polynomial:
    if not isinstance(terms, list):
        raise ValueError(f"{path}: expected a list of terms")
    parsed = {}
    for t, term in enumerate(terms):
        tpath = f"{path}[{t}]"
        _check_keys(term, tpath, ("monomial", "coeff"), ("monomial", "coeff"))
        mono = _monomial(term["monomial"], f"{tpath}.monomial", p)
        if mono in parsed:
            raise ValueError(f"{tpath}.monomial: duplicate monomial {list(mono)}")
        parsed[mono] = _number(term["coeff"], f"{tpath}.coeff")
    return Polynomial(p, parsed)


def parse_model(obj, source: str = "model") -> ParamStateSpace:
    _check_keys(obj, source, MODEL_KEYS, MODEL_KEYS)
    td = obj["timeDomain"]
    if td not in TIME_DOMAINS:
        raise ValueError(f"{source}.timeDomain: expected one of {TIME_DOMAINS}, got {td!r}")
    _check_keys(obj["dims"], f"{source}.dims", DIM_KEYS, DIM_KEYS)
    n, m, o, p = (_count(obj["dims"][k], f"{source}.dims.{k}") for k in DIM_KEYS)

    _check_keys(obj["matrices"], f"{source}.matrices", MATRIX_KEYS, MATRIX_KEYS)
    shapes = {"A": (n, n), "B": (n, m), "C": (o, n), "D": (o, m)}
    mats = {k: _parse_matrix(obj["matrices"][k], f"{source}.matrices.{k}", *shapes[k], p) for k in MATRIX_KEYS}

    ps_path = f"{source}.paramSet"
    ps = obj["paramSet"]
    _check_keys(ps, ps_path, PARAM_SET_KEYS, ("constraints", "box"))
    if not isinstance(ps["constraints"], list):
        raise ValueError(f"{ps_path}.constraints: expected a list of polynomials")
    constraints = [_parse_polynomial(q, f"{ps_path}.constraints[{i}]", p) for i, q in enumerate(ps["constraints"])]
    witnesses = [_parse_polynomial(w, f"{ps_path}.witnesses[{i}]", p) for i, w in enumerate(ps.get("witnesses", []))]
    box = ps["box"]
    if not isinstance(box, list) or len(box) != p:
        raise ValueError(f"{ps_path}.box: expected {p} intervals")
    intervals = []
    for i, iv in enumerate(box):
        if not isinstance(iv, list) or len(iv) != 2:
            raise ValueError(f"{ps_path}.box[{i}]: expected [lo, hi]")
        lo, hi = _number(iv[0], f"{ps_path}.box[{i}][0]"), _number(iv[1], f"{ps_path}.box[{i}][1]")
        if lo > hi:
            raise ValueError(f"{ps_path}.box[{i}]: empty interval [{lo}, {hi}]")
        intervals.append((lo, hi))

    return ParamStateSpace(td, mats["A"], mats["B"], mats["C"], mats["D"],
                           SemialgebraicSet(p, constraints, intervals, witnesses))


def _matrix_terms(M: PolynomialMatrix) -> List[dict]:
    return [{"monomial": list(mono), "coeff": [[float(v) for v in row] for row in c]} for mono, c in M.sorted_terms()]


def _poly_terms(q: Polynomial) -> List[dict]:
    return [{"monomial": list(mono), "coeff": float(c)} for mono, c in q.sorted_terms()]


def model_to_dict(sys: ParamStateSpace) -> dict:
    ps = sys.param_set
    param_set = {"constraints": [_poly_terms(q) for q in ps.constraints],
                 "box": [[float(lo), float(hi)] for lo, hi in ps.box]}
    if ps.witnesses:
        param_set["witnesses"] = [_poly_terms(w) for w in ps.witnesses]
    return {
        "timeDomain": sys.time_domain,
        "dims": {"n": sys.n, "m": sys.m, "o": sys.o, "p": sys.p},
        "matrices": {k: _matrix_terms(M) for k, M in sys.matrices().items()},
        "paramSet": param_set,
    }


def dumps_model(sys: ParamStateSpace) -> str:
    return json.dumps(model_to_dict(sys), indent=2) + "\n"


def read_model(file_in: Union[str, Path]) -> ParamStateSpace:
    return parse_model(load_json(file_in), source=str(file_in))


def write_model(sys: ParamStateSpace, file_out: Union[str, Path]):
    with open(file_out, "w") as f:
        f.write(dumps_model(sys))


def read_config(file_in: Union[str, Path]) -> ReductionConfig:
    return ReductionConfig.from_dict(load_json(file_in), path=str(file_in))

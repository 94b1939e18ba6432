"""
Reduction of parameter-dependent systems by alternating SOS feasibility problems.

With gamma fixed, the bounded-real condition for the error system G - G' is bilinear
in the storage function P(alpha) and the reduced model (A', B', C', D'). Fixing one
group turns it into an SOS program in the other; the two steps alternate until P
settles. An outer bisection over gamma searches for the smallest certified bound.
"""
import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np
import pandas as pd

from parsreduce import sos
from parsreduce.config import get_nr_threads
from parsreduce.libs import to_jsonable
from parsreduce.polymat import PolynomialMatrix, block as poly_block, block_diag
from parsreduce.psys import ParamStateSpace, balanced_truncation, max_spectral_diff_on_grid, sampled_sup_error
from parsreduce.sdp import SdpOptions, solve
from parsreduce.sdpa_io import write_sdpa
from parsreduce.sos import AffinePolyMatrix

INIT_STRATEGIES = ("truncated", "random")
GAMMA_DOUBLING_CAP = 2 ** 10
CERT_EIG_TOL = 1e-7


@dataclass
class ReductionConfig:
    n_prime: int
    p_prime: int
    d_A: int = 1
    d_B: int = 0
    d_C: int = 0
    d_D: int = 0
    d_P: int = 2
    d_Q0: int = 2
    d_Q: Optional[List[int]] = None  # one entry per constraint q_l, default 0 each
    delta: float = 1e-4
    epsilon: float = 1e-6
    gamma: Optional[float] = None  # fixed gamma, skips bisection
    gamma_lo: float = 0.0
    gamma_hi: float = 1.0
    gamma_tol: Optional[float] = None  # default 0.01 * gamma_hi
    max_outer_iters: int = 40
    max_alternations: int = 30
    grid_per_dim: int = 21
    init_strategy: str = "truncated"
    seed: int = 0
    sdp_backend: str = "reference"
    sdp_max_iters: int = 200
    dump_sdp: Optional[str] = None

    @classmethod
    def from_dict(cls, d: dict, path: str = "config") -> "ReductionConfig":
        if not isinstance(d, dict):
            raise ValueError(f"{path}: expected an object, got {type(d).__name__}")
        known = {f.name: f for f in fields(cls)}
        unknown = sorted(set(d) - set(known))
        if unknown:
            raise ValueError(f"{path}: unknown field(s) {', '.join(unknown)}")
        for req in ("n_prime", "p_prime"):
            if req not in d:
                raise ValueError(f"{path}.{req}: required field missing")
        ints = {"n_prime", "p_prime", "d_A", "d_B", "d_C", "d_D", "d_P", "d_Q0", "max_outer_iters",
                "max_alternations", "grid_per_dim", "seed", "sdp_max_iters"}
        floats = {"delta", "epsilon", "gamma", "gamma_lo", "gamma_hi", "gamma_tol"}
        for key, val in d.items():
            if val is None and known[key].default is None:
                continue
            if key in ints and (isinstance(val, bool) or not isinstance(val, int)):
                raise ValueError(f"{path}.{key}: expected an integer, got {val!r}")
            if key in floats and (isinstance(val, bool) or not isinstance(val, (int, float))):
                raise ValueError(f"{path}.{key}: expected a number, got {val!r}")
            if key in ("init_strategy", "sdp_backend", "dump_sdp") and not isinstance(val, str):
                raise ValueError(f"{path}.{key}: expected a string, got {val!r}")
            if key == "d_Q" and (not isinstance(val, list) or
                                 any(isinstance(x, bool) or not isinstance(x, int) for x in val)):
                raise ValueError(f"{path}.d_Q: expected a list of integers, got {val!r}")
        cfg = cls(**d)
        for key in floats:
            if getattr(cfg, key) is not None:
                setattr(cfg, key, float(getattr(cfg, key)))
        return cfg

    def to_dict(self) -> dict:
        return asdict(self)

    def multiplier_degrees(self, num_constraints: int) -> List[int]:
        return list(self.d_Q) if self.d_Q is not None else [0] * num_constraints

    def sdp_options(self, verbose=False) -> SdpOptions:
        return SdpOptions(backend=self.sdp_backend, max_iters=self.sdp_max_iters, verbose=verbose)

    def bisection_tol(self) -> float:
        return self.gamma_tol if self.gamma_tol is not None else 0.01 * self.gamma_hi

    def validate(self, G: ParamStateSpace):
        if self.n_prime < 1:
            raise ValueError(f"n_prime must be >= 1, got {self.n_prime}")
        if not 0 <= self.p_prime <= G.p:
            raise ValueError(f"p_prime must be in [0, {G.p}], got {self.p_prime}")
        if G.m < 1 or G.o < 1:
            raise ValueError(f"system needs at least one input and one output (m={G.m}, o={G.o})")
        for name in ("d_A", "d_B", "d_C", "d_D", "d_P", "d_Q0"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)}")
        d_Q = self.multiplier_degrees(len(G.param_set.constraints))
        if len(d_Q) != len(G.param_set.constraints):
            raise ValueError(f"d_Q has {len(d_Q)} entries, parameter set has {len(G.param_set.constraints)} "
                             f"constraints")
        if any(d < 0 for d in d_Q):
            raise ValueError(f"d_Q entries must be >= 0, got {d_Q}")
        if self.delta <= 0:
            raise ValueError(f"delta must be > 0, got {self.delta}")
        if self.epsilon < 0:
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")
        if self.gamma is not None and self.gamma <= 0:
            raise ValueError(f"gamma must be > 0, got {self.gamma}")
        if self.gamma_lo < 0:
            raise ValueError(f"gamma_lo must be >= 0, got {self.gamma_lo}")
        if self.gamma_hi <= self.gamma_lo:
            raise ValueError(f"gamma_hi ({self.gamma_hi}) must exceed gamma_lo ({self.gamma_lo})")
        if self.bisection_tol() <= 0:
            raise ValueError(f"gamma_tol must be > 0, got {self.gamma_tol}")
        if self.max_alternations < 1 or self.max_outer_iters < 0:
            raise ValueError("max_alternations must be >= 1 and max_outer_iters >= 0")
        if self.grid_per_dim < 1:
            raise ValueError(f"grid_per_dim must be >= 1, got {self.grid_per_dim}")
        if self.init_strategy not in INIT_STRATEGIES:
            raise ValueError(f"init_strategy must be one of {INIT_STRATEGIES}, got {self.init_strategy!r}")
        if self.sdp_backend not in ("reference", "cvxpy"):
            raise ValueError(f"unknown SDP backend: {self.sdp_backend}")


@dataclass
class ModelExpr:
    """Reduced-model matrices as expressions over all p parameters (fixed or decision variables)."""
    A: AffinePolyMatrix
    B: AffinePolyMatrix
    C: AffinePolyMatrix
    D: AffinePolyMatrix

    @classmethod
    def from_system(cls, Gp: ParamStateSpace, num_vars: int) -> "ModelExpr":
        return cls(*(AffinePolyMatrix.lift(M.embed(num_vars)) for M in (Gp.A, Gp.B, Gp.C, Gp.D)))

    @property
    def n(self):
        return self.A.rows


@dataclass
class StepResult:
    subproblem: str
    ok: bool
    status: str
    message: str = ""
    residuals: Dict[str, float] = field(default_factory=dict)
    num_rows: int = 0
    block_sizes: List[int] = field(default_factory=list)
    solve_time: float = 0.0
    P: Optional[PolynomialMatrix] = None
    model: Optional[ParamStateSpace] = None
    multipliers: List[PolynomialMatrix] = field(default_factory=list)


@dataclass
class ReductionResult:
    feasible: bool
    reduced: Optional[ParamStateSpace] = None
    certificate: Optional[PolynomialMatrix] = None
    multipliers: List[PolynomialMatrix] = field(default_factory=list)
    certified_gamma: Optional[float] = None
    converged: bool = False
    iteration_log: List[dict] = field(default_factory=list)
    sampled_error: Optional[float] = None
    argmax_alpha: Optional[np.ndarray] = None
    error_table: Optional[pd.DataFrame] = None
    certificate_min_eig: Optional[float] = None
    bisection_log: List[dict] = field(default_factory=list)
    gamma_lower: Optional[float] = None
    # no certificate, but the first P step was Indeterminate rather than proven infeasible
    undecided: bool = False
    message: str = ""


def _as_model(Gp: Union[ParamStateSpace, ModelExpr], num_vars: int) -> ModelExpr:
    return Gp if isinstance(Gp, ModelExpr) else ModelExpr.from_system(Gp, num_vars)


def _augmented(G: ParamStateSpace, model: ModelExpr):
    p, n, k = G.p, G.n, model.n
    At = sos.block([[G.A, sos.zeros(n, k, p)], [sos.zeros(k, n, p), model.A]])
    Bt = sos.block([[G.B], [model.B]])
    Ct = sos.block([[G.C, -model.C]])
    Dt = AffinePolyMatrix.lift(G.D) - model.D
    return At, Bt, Ct, Dt


def build_continuous_blocks(G: ParamStateSpace, Gp: Union[ParamStateSpace, ModelExpr], P, gamma: float):
    """
    [[At^T P + P At, P Bt, Ct^T], [Bt^T P, -I, Dt^T], [Ct, Dt, -gamma^2 I]]; the error
    system has H-infinity norm below gamma when this is negative definite for a PD P.
    """
    if G.time_domain != "continuous":
        raise ValueError("discrete system passed to the continuous block builder")
    At, Bt, Ct, Dt = _augmented(G, _as_model(Gp, G.p))
    p, m, o = G.p, G.m, G.o
    PAt = sos.matmul(P, At)
    PBt = sos.matmul(P, Bt)
    return sos.block([
        [PAt.T + PAt, PBt, Ct.T],
        [PBt.T, PolynomialMatrix.identity(m, p).scale(-1.0), Dt.T],
        [Ct, Dt, PolynomialMatrix.identity(o, p).scale(-gamma ** 2)],
    ])


def build_discrete_blocks(G: ParamStateSpace, Gp: Union[ParamStateSpace, ModelExpr], P, gamma: float):
    """
    [[P, At P, Bt, 0], [P At^T, P, 0, P Ct^T], [Bt^T, 0, I, Dt^T], [0, Ct P, Dt, gamma^2 I]],
    positive definite when the error system has H-infinity norm below gamma.
    Side 2(n + n') + m + o.
    """
    if G.time_domain != "discrete":
        raise ValueError("continuous system passed to the discrete block builder")
    At, Bt, Ct, Dt = _augmented(G, _as_model(Gp, G.p))
    p, m, o = G.p, G.m, G.o
    N = At.rows
    P = AffinePolyMatrix.lift(P)
    AtP = sos.matmul(At, P)
    CtP = sos.matmul(Ct, P)
    return sos.block([
        [P, AtP, Bt, sos.zeros(N, o, p)],
        [AtP.T, P, sos.zeros(N, m, p), CtP.T],
        [Bt.T, sos.zeros(m, N, p), PolynomialMatrix.identity(m, p), Dt.T],
        [sos.zeros(o, N, p), CtP, Dt, PolynomialMatrix.identity(o, p).scale(gamma ** 2)],
    ])


def multiplier_reach(G: ParamStateSpace, cfg: ReductionConfig) -> int:
    """Highest degree the multiplier term Q0 + sum_l Q_l q_l can produce."""
    reach = 2 * math.ceil(cfg.d_Q0 / 2)
    for q, d in zip(G.param_set.constraints, cfg.multiplier_degrees(len(G.param_set.constraints))):
        reach = max(reach, 2 * math.ceil(d / 2) + q.degree())
    return reach


def degree_deficiency(G: ParamStateSpace, cfg: ReductionConfig) -> Optional[str]:
    """
    Message when the multipliers cannot reach the top degree of the certificate
    expression, so those terms are forced to cancel exactly. None if degrees fit.
    """
    d_P = 2 * math.ceil(cfg.d_P / 2)
    deg = {k: max(getattr(G, k).degree(), getattr(cfg, f"d_{k}")) for k in ("A", "B", "C", "D")}
    if G.time_domain == "continuous":
        top = max(d_P + max(deg["A"], deg["B"]), deg["C"], deg["D"])
    else:
        top = max(d_P + max(deg["A"], deg["C"]), deg["B"], deg["D"])
    reach = multiplier_reach(G, cfg)
    if top <= reach:
        return None
    return (f"multipliers reach degree {reach} but the certificate expression has degree {top}; "
            f"terms above degree {reach} must cancel exactly (raise d_Q0 or d_Q)")


def _certify(prog: sos.SosProgram, G: ParamStateSpace, blocks: AffinePolyMatrix, cfg: ReductionConfig):
    """Add eps*I and the multipliers Q0 + sum_l Q_l q_l to blocks and require the sum to vanish."""
    N, p = blocks.rows, G.p
    Qs = [prog.declare_sos_matrix(N, cfg.d_Q0, "Q0")]
    mult = Qs[0].expr
    for ell, (q, d) in enumerate(zip(G.param_set.constraints,
                                     cfg.multiplier_degrees(len(G.param_set.constraints))), start=1):
        Q = prog.declare_sos_matrix(N, d, f"Q{ell}")
        Qs.append(Q)
        mult = mult + Q.expr.mul_poly(q)
    eps = PolynomialMatrix.identity(N, p).scale(cfg.epsilon)
    if G.time_domain == "continuous":
        expr = blocks + eps + mult
    else:
        expr = blocks - eps - mult
    prog.assert_poly_eq(expr, symmetric=True, name="bounded_real")
    return Qs


def _run_program(prog, subproblem, cfg, dump_file, verbose):
    prob, index_map = sos.compile(prog)
    if dump_file is not None:
        Path(dump_file).parent.mkdir(parents=True, exist_ok=True)
        write_sdpa(dump_file, prob, title=f"parsreduce {subproblem} step")
    sol = solve(prob, cfg.sdp_options(verbose))
    res = StepResult(subproblem, sol.feasible, sol.status.value, sol.message,
                     {k: float(v) for k, v in sol.residuals.items()}, prob.num_rows, list(prob.block_sizes),
                     sol.solve_time)
    return res, sol, prob, index_map


def storage_face(G: ParamStateSpace, model: ParamStateSpace, cfg: ReductionConfig):
    """
    Gram face of P(alpha) left by the products F(alpha) P(alpha) of the bounded-real
    block whose top terms no multiplier reaches (see sos.gram_face). Discrete: P itself,
    At P and Ct P. Continuous: Bt^T P; the symmetrised At^T P + P At gives no face.
    """
    At, Bt, Ct, _ = _augmented(G, _as_model(model, G.p))
    N = At.rows
    if G.time_domain == "discrete":
        factors = [PolynomialMatrix.identity(N, G.p), At.const, Ct.const]
    else:
        factors = [Bt.const.transpose()]
    return sos.gram_face(G.p, cfg.d_P, N, factors, multiplier_reach(G, cfg))


def step_P(G: ParamStateSpace, model: ParamStateSpace, gamma: float, cfg: ReductionConfig,
           dump_file=None, verbose=False) -> StepResult:
    """Fixed reduced model: search a storage function P(alpha) and the multipliers."""
    face = storage_face(G, model, cfg)
    if face is not None and face.shape[1] == 0:
        return StepResult("P", False, "Infeasible", "terms above the multiplier degree force P(alpha) = 0; "
                          "raise d_Q0 or d_Q")
    prog = sos.SosProgram(G.p)
    P = prog.declare_sos_matrix(G.n + model.n, cfg.d_P, "P", face=face)
    builder = build_continuous_blocks if G.time_domain == "continuous" else build_discrete_blocks
    Qs = _certify(prog, G, builder(G, model, P.expr, gamma), cfg)
    res, sol, prob, index_map = _run_program(prog, "P", cfg, dump_file, verbose)
    if res.ok:
        res.P = sos.extract(sol, P, prob, index_map)
        res.multipliers = [sos.extract(sol, Q, prob, index_map) for Q in Qs]
        res.model = model
    return res


def step_model(G: ParamStateSpace, P: PolynomialMatrix, gamma: float, cfg: ReductionConfig,
               dump_file=None, verbose=False) -> StepResult:
    """Fixed P(alpha): search reduced-model coefficients over the leading p' parameters."""
    p, k, pp = G.p, cfg.n_prime, cfg.p_prime
    prog = sos.SosProgram(p)
    free = [prog.declare_free_matrix(k, k, cfg.d_A, "A'", active_vars=pp),
            prog.declare_free_matrix(k, G.m, cfg.d_B, "B'", active_vars=pp),
            prog.declare_free_matrix(G.o, k, cfg.d_C, "C'", active_vars=pp),
            prog.declare_free_matrix(G.o, G.m, cfg.d_D, "D'", active_vars=pp)]
    model = ModelExpr(*(v.expr for v in free))
    builder = build_continuous_blocks if G.time_domain == "continuous" else build_discrete_blocks
    Qs = _certify(prog, G, builder(G, model, P, gamma), cfg)
    res, sol, prob, index_map = _run_program(prog, "model", cfg, dump_file, verbose)
    if res.ok:
        A, B, C, D = (sos.extract(sol, v, prob, index_map).restrict(pp) for v in free)
        res.model = ParamStateSpace(G.time_domain, A, B, C, D, G.param_set.project(pp))
        res.multipliers = [sos.extract(sol, Q, prob, index_map) for Q in Qs]
        res.P = P
    return res


def initial_model(G: ParamStateSpace, cfg: ReductionConfig) -> ParamStateSpace:
    """
    truncated: fix the dropped parameters at their box centre, then balanced-truncate
    the nominal system at the box centre and push the parameter-dependent terms through
    the same projection (zero-padded when n' > n).
    random: constant stable model drawn with cfg.seed.
    """
    pp, k = cfg.p_prime, cfg.n_prime
    param_set = G.param_set.project(pp)
    if cfg.init_strategy == "random":
        rng = np.random.default_rng(cfg.seed)
        A = rng.standard_normal((k, k))
        if G.time_domain == "continuous":
            A = A - (np.max(np.linalg.eigvals(A).real) + 1.0) * np.eye(k)
        else:
            A = A * (0.5 / max(np.max(np.abs(np.linalg.eigvals(A))), 1e-12))
        mats = [A, rng.standard_normal((k, G.m)), rng.standard_normal((G.o, k)), np.zeros((G.o, G.m))]
        return ParamStateSpace(G.time_domain, *(PolynomialMatrix.from_array(M, pp) for M in mats), param_set)

    center = G.param_set.center()
    fixed = {i: float(center[i]) for i in range(pp, G.p)}
    A, B, C, D = (M.substitute(fixed).restrict(pp).truncate_degree(d)
                  for M, d in ((G.A, cfg.d_A), (G.B, cfg.d_B), (G.C, cfg.d_C), (G.D, cfg.d_D)))
    if k < G.n:
        W, V, _ = balanced_truncation(G.evaluate(center), k)
        Wt, Vm = PolynomialMatrix.from_array(W.T, pp), PolynomialMatrix.from_array(V, pp)
        A, B, C = Wt @ A @ Vm, Wt @ B, C @ Vm
    elif k > G.n:
        extra = k - G.n
        pole = -1.0 if G.time_domain == "continuous" else 0.0
        A = block_diag([A, PolynomialMatrix.identity(extra, pp).scale(pole)])
        B = poly_block([[B], [PolynomialMatrix.zeros(extra, G.m, pp)]])
        C = poly_block([[C, PolynomialMatrix.zeros(G.o, extra, pp)]])
    return ParamStateSpace(G.time_domain, A, B, C, D, param_set)


def _emit(entry: dict, quiet: bool, verbose: bool, json_log: bool):
    if json_log:
        print(json.dumps(to_jsonable(entry)))
    elif verbose or not quiet:
        change = entry.get("p_change")
        extra = f" |P-P_old|={change:.3g}" if change is not None else ""
        print(f"  gamma={entry['gamma']:.6g} step {entry['step']} ({entry['subproblem']}): "
              f"{entry['status']}{extra}")


def _dump_file(cfg: ReductionConfig, gamma: float, step: int, subproblem: str):
    if not cfg.dump_sdp:
        return None
    return Path(cfg.dump_sdp) / f"gamma{gamma:.6g}_step{step:03d}_{subproblem}.dat-s"


def evaluate_result(G: ParamStateSpace, result: ReductionResult, cfg: ReductionConfig, quiet=True):
    """Sampled H-infinity error and certificate positivity on the validation grid."""
    if not result.feasible:
        return result
    err, arg, table = sampled_sup_error(G, result.reduced, cfg.p_prime, cfg.grid_per_dim,
                                        nr_threads=get_nr_threads(), quiet=quiet)
    result.sampled_error, result.argmax_alpha, result.error_table = err, arg, table
    result.certificate_min_eig = sos.min_eig_on_grid(result.certificate, G.param_set.grid(cfg.grid_per_dim))
    if result.certificate_min_eig < -CERT_EIG_TOL and not quiet:
        print(f"WARNING: certificate P has eigenvalue {result.certificate_min_eig:.3g} on the grid")
    return result


def run_alternation(G: ParamStateSpace, cfg: ReductionConfig, gamma: float,
                   init_model: Optional[ParamStateSpace] = None, quiet=False, verbose=False,
                   json_log=False, evaluate=True, warn_degrees=True) -> ReductionResult:
    """
    Alternate step_P and step_model at fixed gamma until the grid maximum of
    ||P - P_old||_2 drops to cfg.delta or cfg.max_alternations is reached.
    """
    cfg.validate(G)
    points = G.param_set.grid(cfg.grid_per_dim)
    if not len(points):
        raise ValueError("empty admissible grid: no grid point satisfies the parameter constraints")
    G.check_stable_on(points)
    if warn_degrees and not quiet:
        msg = degree_deficiency(G, cfg)
        if msg:
            print(f"WARNING: {msg}")

    model = init_model if init_model is not None else initial_model(G, cfg)
    result = ReductionResult(feasible=False)
    P_old = None
    for k in range(1, cfg.max_alternations + 1):
        rP = step_P(G, model, gamma, cfg, _dump_file(cfg, gamma, k, "P"), verbose)
        p_change = None
        if rP.ok and P_old is not None:
            p_change = max_spectral_diff_on_grid(rP.P, P_old, points)
        entry = {"event": "step", "gamma": gamma, "step": k, "subproblem": "P", "status": rP.status,
                 "residuals": rP.residuals, "p_change": p_change}
        result.iteration_log.append(entry)
        _emit(entry, quiet, verbose, json_log)
        if not rP.ok:
            if k == 1:
                result.undecided = rP.status != "Infeasible"
                result.message = f"first P step not feasible at gamma={gamma:g}: {rP.status} {rP.message}".strip()
            else:
                result.message = f"P step {k} returned {rP.status}; keeping the last certified pair"
            break

        result.feasible = True
        result.certificate, result.reduced, result.multipliers = rP.P, model, rP.multipliers

        rM = step_model(G, rP.P, gamma, cfg, _dump_file(cfg, gamma, k, "model"), verbose)
        entry = {"event": "step", "gamma": gamma, "step": k, "subproblem": "model", "status": rM.status,
                 "residuals": rM.residuals, "p_change": p_change}
        result.iteration_log.append(entry)
        _emit(entry, quiet, verbose, json_log)
        if not rM.ok:
            result.message = f"model step {k} returned {rM.status}; keeping the last certified pair"
            break
        model = rM.model
        result.reduced, result.multipliers = model, rM.multipliers

        if p_change is not None and p_change <= cfg.delta:
            result.converged = True
            break
        P_old = rP.P

    if result.feasible:
        result.certified_gamma = gamma
        if not result.converged and not result.message:
            result.message = f"not converged after {cfg.max_alternations} alternations"
        if evaluate:
            evaluate_result(G, result, cfg, quiet)
    return result


def bisect_gamma(G: ParamStateSpace, cfg: ReductionConfig, quiet=False, verbose=False,
                 json_log=False) -> ReductionResult:
    """
    Smallest certified gamma by bisection on the feasibility of run_alternation. gamma_hi
    is doubled until feasible; every attempt warm-starts from the best feasible model.

    An attempt whose first P step is Indeterminate is retried once from the initial
    model. If it stays undecided the search still moves up, but only attempts proven
    infeasible count towards gamma_lower.
    """
    cfg.validate(G)
    if not quiet:
        msg = degree_deficiency(G, cfg)
        if msg:
            print(f"WARNING: {msg}")
    kwargs = dict(quiet=quiet, verbose=verbose, json_log=json_log, evaluate=False, warn_degrees=False)
    if cfg.gamma is not None:
        res = run_alternation(G, cfg, cfg.gamma, **kwargs)
        if res.feasible:
            evaluate_result(G, res, cfg, quiet)
        return res

    log = []
    init = initial_model(G, cfg)

    def attempt(gamma, start):
        r = run_alternation(G, cfg, gamma, start, **kwargs)
        if r.undecided and start is not init:
            r = run_alternation(G, cfg, gamma, init, **kwargs)
        outcome = "feasible" if r.feasible else ("unknown" if r.undecided else "infeasible")
        log.append({"event": "bisection", "gamma": gamma, "outcome": outcome, "feasible": r.feasible,
                    "converged": r.converged})
        if json_log:
            print(json.dumps(to_jsonable(log[-1])))
        elif not quiet:
            print(f"gamma={gamma:.6g}: {outcome}")
        return r

    lo, hi = cfg.gamma_lo, cfg.gamma_hi
    proven_lo = lo
    tol = cfg.bisection_tol()
    best = attempt(hi, init)
    while not best.feasible:
        if not best.undecided:
            proven_lo = hi
        lo, hi = hi, 2.0 * hi
        if hi > GAMMA_DOUBLING_CAP * cfg.gamma_hi:
            unknown = sum(e["outcome"] == "unknown" for e in log)
            extra = f"; the SDP solver was inconclusive at {unknown} of {len(log)} values" if unknown else ""
            raise ValueError(f"no certificate up to gamma={hi / 2:g}: increase degrees (keep increasing d_P)"
                             f"{extra}")
        best = attempt(hi, init)

    while hi - lo > tol and len(log) < cfg.max_outer_iters:
        mid = 0.5 * (lo + hi)
        r = attempt(mid, best.reduced)
        if r.feasible:
            best, hi = r, mid
        else:
            lo = mid
            if not r.undecided:
                proven_lo = mid

    best.bisection_log = log
    best.gamma_lower = proven_lo
    evaluate_result(G, best, cfg, quiet)
    return best

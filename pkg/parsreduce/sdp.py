"""
Block-diagonal semidefinite programs in primal standard form

    minimize    sum_j <C_j, X_j> + c_f^T x_f
    subject to  sum_j <A_ij, X_j> + a_if^T x_f = b_i
                X_j PSD, x_f free

Scalar unknowns are the upper-triangle entries of every block (row-major, r <= c)
followed by the free scalars. A row coefficient on entry (r, c) multiplies the
value X[r, c] itself, so an off-diagonal coefficient a corresponds to a/2 on both
(r, c) and (c, r) in trace form.
"""
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional

import numpy as np
import scipy.sparse as sp
from scipy import linalg


class SdpStatus(str, Enum):
    FEASIBLE = "Feasible"
    INFEASIBLE = "Infeasible"
    INDETERMINATE = "Indeterminate"


@dataclass
class SdpOptions:
    backend: str = "reference"
    tol_gap: float = 1e-8
    tol_feas: float = 1e-8
    max_iters: int = 200
    step_fraction: float = 0.95
    verbose: bool = False


@dataclass
class SdpProblem:
    block_sizes: List[int]
    num_free: int
    A: sp.csr_matrix
    b: np.ndarray
    c: Optional[np.ndarray] = None

    def __post_init__(self):
        self.block_sizes = [int(s) for s in self.block_sizes]
        self.A = sp.csr_matrix(self.A, dtype=float)
        self.b = np.asarray(self.b, dtype=float).ravel()
        if self.c is None:
            self.c = np.zeros(self.num_scalars)
        self.c = np.asarray(self.c, dtype=float).ravel()
        if self.A.shape != (len(self.b), self.num_scalars):
            raise ValueError(f"equality matrix has shape {self.A.shape}, expected {(len(self.b), self.num_scalars)}")
        if len(self.c) != self.num_scalars:
            raise ValueError(f"objective has length {len(self.c)}, expected {self.num_scalars}")
        if any(s < 1 for s in self.block_sizes):
            raise ValueError(f"PSD block sizes must be >= 1: {self.block_sizes}")

    @property
    def num_rows(self) -> int:
        return len(self.b)

    @property
    def block_offsets(self) -> List[int]:
        offs = [0]
        for s in self.block_sizes:
            offs.append(offs[-1] + s * (s + 1) // 2)
        return offs

    @property
    def num_psd_scalars(self) -> int:
        return self.block_offsets[-1]

    @property
    def num_scalars(self) -> int:
        return self.num_psd_scalars + self.num_free

    def entry_index(self, block: int, r: int, c: int) -> int:
        s = self.block_sizes[block]
        if r > c:
            r, c = c, r
        return self.block_offsets[block] + r * s - r * (r - 1) // 2 + (c - r)

    def free_index(self, k: int) -> int:
        return self.num_psd_scalars + k

    def pack(self, blocks: List[np.ndarray], free: np.ndarray) -> np.ndarray:
        parts = [np.asarray(X)[np.triu_indices(s)] for X, s in zip(blocks, self.block_sizes)]
        parts.append(np.asarray(free, dtype=float).ravel())
        return np.concatenate(parts) if parts else np.zeros(0)

    def unpack(self, x: np.ndarray):
        offs = self.block_offsets
        blocks = []
        for j, s in enumerate(self.block_sizes):
            X = np.zeros((s, s))
            iu = np.triu_indices(s)
            X[iu] = x[offs[j]:offs[j + 1]]
            X = X + np.triu(X, 1).T
            blocks.append(X)
        return blocks, np.array(x[self.num_psd_scalars:])

    def block_trace_form(self, vec: np.ndarray, block: int) -> np.ndarray:
        """Symmetric matrix W with <W, X_j> equal to vec restricted to block j."""
        s = self.block_sizes[block]
        offs = self.block_offsets
        U = np.zeros((s, s))
        U[np.triu_indices(s)] = vec[offs[block]:offs[block + 1]]
        return 0.5 * (U + U.T)


@dataclass
class SdpSolution:
    status: SdpStatus
    blocks: List[np.ndarray] = field(default_factory=list)
    free: np.ndarray = field(default_factory=lambda: np.zeros(0))
    y: Optional[np.ndarray] = None
    certificate: Optional[np.ndarray] = None
    residuals: Dict[str, float] = field(default_factory=dict)
    objective: float = 0.0
    iterations: int = 0
    message: str = ""
    solve_time: float = 0.0

    @property
    def feasible(self) -> bool:
        return self.status == SdpStatus.FEASIBLE


def solve(prob: SdpProblem, opts: SdpOptions = None) -> SdpSolution:
    """
    Solve prob with the backend named in opts. Feasible and Infeasible answers are
    re-verified with check_solution (primal point, resp. improving ray) and downgraded
    to Indeterminate if the verification fails.
    """
    opts = opts if opts is not None else SdpOptions()
    st = time.time()
    if opts.backend == "reference":
        sol = _solve_reference(prob, opts)
    elif opts.backend == "cvxpy":
        sol = _solve_cvxpy(prob, opts)
    else:
        raise ValueError(f"unknown SDP backend: {opts.backend}")
    sol.solve_time = time.time() - st

    if sol.status == SdpStatus.FEASIBLE:
        report = check_solution(prob, sol)
        sol.residuals.update({k: v for k, v in report.items() if isinstance(v, float)})
        if not report["primal_ok"]:
            sol.status = SdpStatus.INDETERMINATE
            sol.message = f"solution failed verification (eq residual {report['eq_residual']:.2e}, " \
                          f"min eig {report['min_eig']:.2e})"
    elif sol.status == SdpStatus.INFEASIBLE:
        report = check_solution(prob, sol) if sol.certificate is not None else {}
        if report.get("ray_ok") is not True:
            sol.status = SdpStatus.INDETERMINATE
            sol.message = f"{sol.message}; infeasibility not confirmed by a dual ray".lstrip("; ")
            sol.certificate = None
        else:
            sol.residuals.update({k: v for k, v in report.items() if isinstance(v, float)})
    if opts.verbose:
        print(f"  SDP [{opts.backend}] blocks={prob.block_sizes} rows={prob.num_rows} free={prob.num_free}: "
              f"{sol.status.value} after {sol.iterations} it ({sol.solve_time:.2f}s) {sol.message}")
    return sol


def check_solution(prob: SdpProblem, sol: SdpSolution, tol_eq=1e-7, tol_eig=1e-8) -> dict:
    """
    Recompute residuals from the problem data alone.

    eq_residual is measured per row relative to the row's infinity norm (rows are
    solved in that scaling).
    """
    report = {}
    x = None
    if len(sol.blocks) == len(prob.block_sizes) and len(sol.free) == prob.num_free:
        x = prob.pack(sol.blocks, sol.free)
    if x is not None:
        row_norm = np.maximum(1.0, _row_inf_norm(prob.A))
        r = (prob.A @ x - prob.b) / row_norm
        report["eq_residual"] = float(np.max(np.abs(r), initial=0.0))
        report["min_eig"] = float(min([np.linalg.eigvalsh(0.5 * (X + X.T))[0] for X in sol.blocks], default=0.0))
        report["objective"] = float(prob.c @ x)
        report["primal_ok"] = report["eq_residual"] <= tol_eq and report["min_eig"] >= -tol_eig
    else:
        report["primal_ok"] = False

    if sol.y is not None and x is not None and len(sol.y) == prob.num_rows:
        s_vec = prob.c - prob.A.T @ sol.y
        dual_eigs = [np.linalg.eigvalsh(prob.block_trace_form(s_vec, j))[0] for j in range(len(prob.block_sizes))]
        report["dual_min_eig"] = float(min(dual_eigs, default=0.0))
        report["dual_free_residual"] = float(np.max(np.abs(s_vec[prob.num_psd_scalars:]), initial=0.0))
        report["gap"] = float(abs(prob.c @ x - prob.b @ sol.y))

    if sol.certificate is not None and len(sol.certificate) == prob.num_rows:
        y = sol.certificate
        s_vec = -(prob.A.T @ y)
        eigs = [np.linalg.eigvalsh(prob.block_trace_form(s_vec, j))[0] for j in range(len(prob.block_sizes))]
        scale = max(1.0, float(np.max(np.abs(y), initial=0.0)))
        report["ray_by"] = float(prob.b @ y)
        report["ray_min_eig"] = float(min(eigs, default=0.0)) / scale
        report["ray_free_residual"] = float(np.max(np.abs(s_vec[prob.num_psd_scalars:]), initial=0.0)) / scale
        report["ray_ok"] = (report["ray_by"] > 0 and report["ray_min_eig"] >= -1e-6
                            and report["ray_free_residual"] <= 1e-6)
    return report


def _row_inf_norm(A: sp.csr_matrix) -> np.ndarray:
    if A.shape[0] == 0:
        return np.zeros(0)
    return np.asarray(abs(A).max(axis=1).todense()).ravel()


def _full_vec_blocks(prob: SdpProblem, A: sp.csr_matrix):
    """
    Split the scalar columns of A into one sparse (rows x s^2) matrix per block whose
    rows are the trace-form matrices A_ij in row-major vec layout.
    """
    A = sp.csc_matrix(A)
    offs = prob.block_offsets
    res = []
    for j, s in enumerate(prob.block_sizes):
        sub = sp.coo_matrix(A[:, offs[j]:offs[j + 1]])
        iu_r, iu_c = np.triu_indices(s)
        r, c = iu_r[sub.col], iu_c[sub.col]
        diag = r == c
        rows = np.concatenate([sub.row[diag], sub.row[~diag], sub.row[~diag]])
        cols = np.concatenate([r[diag] * s + c[diag], r[~diag] * s + c[~diag], c[~diag] * s + r[~diag]])
        vals = np.concatenate([sub.data[diag], 0.5 * sub.data[~diag], 0.5 * sub.data[~diag]])
        res.append(sp.csr_matrix((vals, (rows, cols)), shape=(A.shape[0], s * s)))
    return res


def _sym(M):
    return 0.5 * (M + M.T)


def _max_step(X, dX):
    try:
        L = linalg.cholesky(X, lower=True)
    except linalg.LinAlgError:
        return 0.0
    W = linalg.solve_triangular(L, dX, lower=True)
    W = linalg.solve_triangular(L, W.T, lower=True)
    lam = np.linalg.eigvalsh(_sym(W))[0]
    return np.inf if lam >= 0 else -1.0 / lam


def _inv_pd(S):
    c = linalg.cho_factor(S, lower=True)
    return linalg.cho_solve(c, np.eye(S.shape[0]))


def _trivial_rows(prob: SdpProblem):
    """Rows without coefficients: empty with b=0 are dropped, with b!=0 prove infeasibility."""
    norms = _row_inf_norm(prob.A)
    empty = norms <= 1e-14
    bad = np.where(empty & (np.abs(prob.b) > 1e-12))[0]
    return empty, bad


def _independent_rows(A: sp.csr_matrix, b: np.ndarray, tol=1e-9):
    """
    Indices of a maximal independent subset of the (scaled) rows, found by pivoted QR
    of A^T. If the dependent rows contradict b, returns the least-squares residual
    r = b - A x_ls as a ray (A^T r = 0, b^T r > 0) instead.
    """
    Ad = A.toarray()
    m = Ad.shape[0]
    _, R, piv = linalg.qr(Ad.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    rank = int(np.sum(diag > tol * max(diag[0], 1.0))) if len(diag) else 0
    if rank == m:
        return np.arange(m), None
    x_ls = np.linalg.lstsq(Ad, b, rcond=None)[0]
    r = b - Ad @ x_ls
    if np.max(np.abs(r), initial=0.0) > 1e-8 * (1.0 + np.max(np.abs(b), initial=0.0)):
        return None, r
    return np.sort(piv[:rank]), None


def _solve_reference(prob: SdpProblem, opts: SdpOptions) -> SdpSolution:
    empty, bad = _trivial_rows(prob)
    if len(bad):
        i = bad[0]
        y = np.zeros(prob.num_rows)
        y[i] = 1.0 / prob.b[i]
        return SdpSolution(SdpStatus.INFEASIBLE, certificate=y,
                           message=f"equality row {i} has no coefficients but right-hand side {prob.b[i]:.3e}")

    keep = np.where(~empty)[0]
    A = prob.A[keep]
    b = prob.b[keep]
    m = len(b)
    nf = prob.num_free
    nblk = len(prob.block_sizes)

    if m == 0:
        return _solve_unconstrained(prob)

    # scale every row to unit infinity norm
    d = 1.0 / _row_inf_norm(A)
    A = sp.diags(d) @ A
    b = b * d

    indep, ray = _independent_rows(A, b)
    if ray is not None:
        certificate = np.zeros(prob.num_rows)
        certificate[keep] = d * ray / (b @ ray)
        return SdpSolution(SdpStatus.INFEASIBLE, certificate=certificate,
                           message="inconsistent linear equalities")
    if len(indep) < m:
        keep, A, b, d = keep[indep], A[indep], b[indep], d[indep]
        m = len(b)

    A_blocks = _full_vec_blocks(prob, A)
    A_free = A[:, prob.num_psd_scalars:].toarray()
    C_blocks = [prob.block_trace_form(prob.c, j) for j in range(nblk)]
    c_free = prob.c[prob.num_psd_scalars:]
    sizes = prob.block_sizes
    nu = sum(sizes)

    X = [np.eye(s) for s in sizes]
    S = [np.eye(s) for s in sizes]
    xf = np.zeros(nf)
    y = np.zeros(m)
    tau, kappa = 1.0, 1.0
    b_norm = 1.0 + np.max(np.abs(b), initial=0.0)
    c_norm = 1.0 + np.max(np.abs(prob.c), initial=0.0)

    def apply_A(Xs, xf_):
        res = A_free @ xf_ if nf else np.zeros(m)
        for Aj, Xj in zip(A_blocks, Xs):
            res = res + Aj @ Xj.ravel()
        return res

    def apply_At(y_, j):
        s = sizes[j]
        return (A_blocks[j].T @ y_).reshape(s, s)

    status = SdpStatus.INDETERMINATE
    message = f"iteration limit {opts.max_iters} reached"
    certificate = None
    it = 0
    stalls = 0
    residuals = {}
    for it in range(1, opts.max_iters + 1):
        rp = apply_A(X, xf) - b * tau
        rd = [apply_At(y, j) + S[j] - C_blocks[j] * tau for j in range(nblk)]
        rdf = A_free.T @ y - c_free * tau if nf else np.zeros(0)
        cx = sum(np.vdot(Cj, Xj) for Cj, Xj in zip(C_blocks, X)) + (c_free @ xf if nf else 0.0)
        by = b @ y
        rg = cx - by + kappa
        xs = sum(np.vdot(Xj, Sj) for Xj, Sj in zip(X, S))
        mu = (xs + tau * kappa) / (nu + 1)

        pres = np.max(np.abs(rp), initial=0.0) / tau / b_norm
        dres = max([np.max(np.abs(r)) for r in rd] + [np.max(np.abs(rdf), initial=0.0)]) / tau / c_norm
        pobj, dobj = cx / tau, by / tau
        gap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
        residuals = {"primal": float(pres), "dual": float(dres), "gap": float(gap)}
        if opts.verbose:
            print(f"    it {it:3d}  pres {pres:.2e}  dres {dres:.2e}  gap {gap:.2e}  tau {tau:.2e}  kappa {kappa:.2e}")

        if pres <= opts.tol_feas and dres <= opts.tol_feas and gap <= opts.tol_gap:
            status = SdpStatus.FEASIBLE
            message = "converged"
            break
        if by > 0:
            ray = max([np.max(np.abs(apply_At(y, j) + S[j])) for j in range(nblk)] +
                      [np.max(np.abs(A_free.T @ y), initial=0.0) if nf else 0.0]) / by
            if ray <= opts.tol_feas and tau <= 1e-4 * kappa:
                status = SdpStatus.INFEASIBLE
                certificate = np.zeros(prob.num_rows)
                certificate[keep] = d * (y / by)
                message = "primal infeasible (dual improving ray)"
                break
        if cx < 0:
            ray = np.max(np.abs(apply_A(X, xf)), initial=0.0) / -cx
            if ray <= opts.tol_feas and tau <= 1e-4 * kappa:
                message = "dual infeasible (primal improving ray)"
                break

        try:
            Z = [_inv_pd(Sj) for Sj in S]
        except linalg.LinAlgError:
            message = "dual iterate lost definiteness"
            break

        M = np.zeros((m, m))
        h = np.zeros(m)
        cxcz = 0.0
        for j in range(nblk):
            K = np.kron(X[j], Z[j])
            T = A_blocks[j] @ K
            M += (A_blocks[j] @ T.T).T
            XCZ = X[j] @ C_blocks[j] @ Z[j]
            h += A_blocks[j] @ XCZ.ravel()
            cxcz += np.vdot(C_blocks[j], XCZ)
        M = _sym(M)

        n_sys = m + nf + 1
        K_sys = np.zeros((n_sys, n_sys))
        K_sys[:m, :m] = M
        K_sys[:m, m:m + nf] = A_free
        K_sys[:m, -1] = -(h + b)
        K_sys[m:m + nf, :m] = A_free.T
        K_sys[m:m + nf, -1] = -c_free
        K_sys[-1, :m] = h - b
        K_sys[-1, m:m + nf] = c_free
        K_sys[-1, -1] = -(cxcz + kappa / tau)
        try:
            lu = linalg.lu_factor(K_sys, check_finite=True)
            solve_sys = lambda rhs: linalg.lu_solve(lu, rhs)
        except (linalg.LinAlgError, ValueError):
            solve_sys = lambda rhs: np.linalg.lstsq(K_sys, rhs, rcond=None)[0]

        def direction(sigma, corr=None):
            target = sigma * mu
            D = [-(1 - sigma) * rd[j] for j in range(nblk)]
            E = []
            for j in range(nblk):
                Ej = target * Z[j] - X[j] - _sym(X[j] @ D[j] @ Z[j])
                if corr is not None:
                    Ej = Ej - _sym(corr[0][j] @ corr[1][j] @ Z[j])
                E.append(Ej)
            comp_tk = target - tau * kappa - (corr[2] * corr[3] if corr is not None else 0.0)
            r1 = -(1 - sigma) * rp - apply_A(E, np.zeros(nf))
            r2 = -(1 - sigma) * rdf if nf else np.zeros(0)
            r3 = -(1 - sigma) * rg - sum(np.vdot(C_blocks[j], E[j]) for j in range(nblk)) - comp_tk / tau
            sol_ = solve_sys(np.concatenate([r1, r2, [r3]]))
            if not np.all(np.isfinite(sol_)):
                sol_ = np.linalg.lstsq(K_sys, np.concatenate([r1, r2, [r3]]), rcond=None)[0]
            dy, dxf, dtau = sol_[:m], sol_[m:m + nf], sol_[-1]
            dkappa = (comp_tk - kappa * dtau) / tau
            dS, dX = [], []
            for j in range(nblk):
                AtDy = apply_At(dy, j)
                dS.append(D[j] - AtDy + C_blocks[j] * dtau)
                dX.append(_sym(E[j] + _sym(X[j] @ AtDy @ Z[j]) - _sym(X[j] @ C_blocks[j] @ Z[j]) * dtau))
            return dX, dS, dxf, dy, dtau, dkappa

        def step_length(dX, dS, dtau, dkappa):
            a = np.inf
            for j in range(nblk):
                a = min(a, _max_step(X[j], dX[j]), _max_step(S[j], dS[j]))
            if dtau < 0:
                a = min(a, -tau / dtau)
            if dkappa < 0:
                a = min(a, -kappa / dkappa)
            return a

        dX, dS, dxf, dy, dtau, dkappa = direction(0.0)
        a_aff = min(1.0, step_length(dX, dS, dtau, dkappa))
        mu_aff = (sum(np.vdot(X[j] + a_aff * dX[j], S[j] + a_aff * dS[j]) for j in range(nblk)) +
                  (tau + a_aff * dtau) * (kappa + a_aff * dkappa)) / (nu + 1)
        sigma = float(np.clip((mu_aff / mu) ** 3, 0.0, 1.0))
        dX, dS, dxf, dy, dtau, dkappa = direction(sigma, corr=(dX, dS, dtau, dkappa))
        a = min(1.0, opts.step_fraction * step_length(dX, dS, dtau, dkappa))
        if not np.isfinite(a) or a < 1e-12:
            stalls += 1
            if stalls >= 3:
                message = "step length collapsed"
                break
            continue
        stalls = 0

        X = [_sym(X[j] + a * dX[j]) for j in range(nblk)]
        S = [_sym(S[j] + a * dS[j]) for j in range(nblk)]
        xf = xf + a * dxf
        y = y + a * dy
        tau = tau + a * dtau
        kappa = kappa + a * dkappa

    blocks = [Xj / tau for Xj in X]
    free = xf / tau
    y_full = np.zeros(prob.num_rows)
    y_full[keep] = d * y / tau
    sol = SdpSolution(status, blocks=blocks, free=free, y=y_full, certificate=certificate,
                      residuals=residuals, iterations=it, message=message)
    sol.objective = float(prob.c @ prob.pack(blocks, free))
    return sol


def _solve_unconstrained(prob: SdpProblem) -> SdpSolution:
    blocks = [np.zeros((s, s)) for s in prob.block_sizes]
    c_free = prob.c[prob.num_psd_scalars:]
    bounded = np.all(np.abs(c_free) <= 1e-14) and \
        all(np.linalg.eigvalsh(prob.block_trace_form(prob.c, j))[0] >= 0 for j in range(len(prob.block_sizes)))
    if not bounded:
        return SdpSolution(SdpStatus.INDETERMINATE, message="no equalities and objective unbounded below")
    return SdpSolution(SdpStatus.FEASIBLE, blocks=blocks, free=np.zeros(prob.num_free), y=np.zeros(prob.num_rows),
                       message="no equalities", residuals={"primal": 0.0, "dual": 0.0, "gap": 0.0})


def _solve_cvxpy(prob: SdpProblem, opts: SdpOptions) -> SdpSolution:
    import cvxpy as cp

    blocks = [cp.Variable((s, s), PSD=True) for s in prob.block_sizes]
    free = cp.Variable(prob.num_free) if prob.num_free else None
    parts = []
    for X, s in zip(blocks, prob.block_sizes):
        r, c = np.triu_indices(s)
        parts.append(X[r, c])
    if free is not None:
        parts.append(free)
    if not parts:
        return _solve_unconstrained(prob)
    x = cp.hstack(parts)
    constraints = [prob.A @ x == prob.b] if prob.num_rows else []
    problem = cp.Problem(cp.Minimize(prob.c @ x), constraints)
    solver = cp.CLARABEL if cp.CLARABEL in cp.installed_solvers() else cp.SCS
    try:
        problem.solve(solver=solver, verbose=opts.verbose)
    except cp.error.SolverError as e:
        return SdpSolution(SdpStatus.INDETERMINATE, message=f"cvxpy solver error: {e}")

    if problem.status in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE):
        vals = [np.asarray(X.value) for X in blocks]
        fvals = np.asarray(free.value).ravel() if free is not None else np.zeros(0)
        y = None
        if constraints and constraints[0].dual_value is not None:
            # cvxpy reports duals of A x == b with the opposite sign convention
            y = -np.asarray(constraints[0].dual_value).ravel()
        return SdpSolution(SdpStatus.FEASIBLE, blocks=vals, free=fvals, y=y, objective=float(problem.value),
                           message=f"cvxpy/{solver}: {problem.status}")
    if problem.status == cp.INFEASIBLE:
        y = None
        if constraints and constraints[0].dual_value is not None:
            y = -np.asarray(constraints[0].dual_value).ravel()
            if prob.b @ y < 0:
                y = -y
            by = prob.b @ y
            y = y / by if by > 0 else None
        return SdpSolution(SdpStatus.INFEASIBLE, certificate=y, message=f"cvxpy/{solver}: {problem.status}")
    return SdpSolution(SdpStatus.INDETERMINATE, message=f"cvxpy/{solver}: {problem.status}")

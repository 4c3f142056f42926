"""Small dense convex-optimization kernels.

Two solvers live here: a log-det barrier interior-point method for tiny
semidefinite programs (the lifted 4x4 placement relaxation) and a two-phase
dense-tableau simplex for the linear relaxations used by branch-and-bound.
Both are deterministic and allocation-happy by design; problem sizes are a few
hundred variables at most, so clarity wins over sparse machinery.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
MAX_ITERATIONS = "max_iterations"

LP_PIVOT_TOL = 1e-10
LP_FEAS_TOL = 1e-8
SDP_MAX_ITERATIONS = 200


@dataclass
class SolveStatus:
    kind: str
    iterations: int = 0
    residuals: dict = field(default_factory=dict)   # populated for optimal only
    duals: dict = field(default_factory=dict)
    trace: list = field(default_factory=list)       # (primal, dual bound) pairs

    @property
    def ok(self) -> bool:
        return self.kind == OPTIMAL


# --------------------------------------------------------------------------
# linear programming
# --------------------------------------------------------------------------

@dataclass
class LpProblem:
    """min c.x subject to a_ub x <= b_ub, a_eq x = b_eq, bounds per variable.

    bounds default to (0, None); a None bound means unbounded on that side.
    """

    c: np.ndarray
    a_ub: np.ndarray | None = None
    b_ub: np.ndarray | None = None
    a_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None
    bounds: list | None = None

    def __post_init__(self) -> None:
        self.c = np.asarray(self.c, dtype=float)
        n = self.c.size
        for name in ("a_ub", "a_eq"):
            mat = getattr(self, name)
            if mat is not None:
                mat = np.asarray(mat, dtype=float).reshape(-1, n)
                setattr(self, name, mat)
        for mat_name, rhs_name in (("a_ub", "b_ub"), ("a_eq", "b_eq")):
            mat, rhs = getattr(self, mat_name), getattr(self, rhs_name)
            if (mat is None) != (rhs is None):
                raise ValueError(f"{mat_name} and {rhs_name} must be given together")
            if rhs is not None:
                rhs = np.asarray(rhs, dtype=float).ravel()
                if rhs.size != mat.shape[0]:
                    raise ValueError(f"{rhs_name} length does not match {mat_name}")
                setattr(self, rhs_name, rhs)
        if self.bounds is None:
            self.bounds = [(0.0, None)] * n
        if len(self.bounds) != n:
            raise ValueError("bounds length does not match cost vector")

    @property
    def n_vars(self) -> int:
        return self.c.size


def solve_lp(problem: LpProblem, max_iterations: int = 50000):
    """Two-phase dense simplex with Bland's rule.

    Returns (x, objective, status). Duals for the original rows are reported in
    status.duals as "ineq" and "eq" arrays when optimal.
    """
    n = problem.n_vars
    # substitute x = lo + u (u >= 0); free variables are split u_pos - u_neg
    col_of = []          # (orig index, sign) per standard column
    shift = np.zeros(n)
    extra_ub_rows = []   # (std col pattern applied later) rows u_i <= hi - lo
    for i, (lo, hi) in enumerate(problem.bounds):
        if lo is not None and hi is not None and hi < lo:
            return np.full(n, np.nan), math.nan, SolveStatus(INFEASIBLE)
        if lo is None:
            col_of.append((i, 1.0))
            col_of.append((i, -1.0))
            if hi is not None:
                extra_ub_rows.append((len(col_of) - 2, len(col_of) - 1, hi))
        else:
            shift[i] = lo
            col_of.append((i, 1.0))
            if hi is not None:
                extra_ub_rows.append((len(col_of) - 1, None, hi - lo))
    ns = len(col_of)

    def to_std(mat):
        cols = [sign * mat[:, i] for i, sign in col_of]
        return np.column_stack(cols) if cols else np.zeros((mat.shape[0], 0))

    a_blocks, b_parts, senses = [], [], []
    if problem.a_ub is not None and problem.a_ub.shape[0]:
        a_blocks.append(to_std(problem.a_ub))
        b_parts.append(problem.b_ub - problem.a_ub @ shift)
        senses += ["<="] * problem.a_ub.shape[0]
    n_orig_ub = len(senses)
    if problem.a_eq is not None and problem.a_eq.shape[0]:
        a_blocks.append(to_std(problem.a_eq))
        b_parts.append(problem.b_eq - problem.a_eq @ shift)
        senses += ["=="] * problem.a_eq.shape[0]
    n_orig_eq = len(senses) - n_orig_ub
    for pos_col, neg_col, limit in extra_ub_rows:
        row = np.zeros(ns)
        row[pos_col] = 1.0
        if neg_col is not None:
            row[neg_col] = -1.0
        a_blocks.append(row[None, :])
        b_parts.append(np.array([limit]))
        senses.append("<=")
    if a_blocks:
        a = np.vstack(a_blocks)
        b = np.concatenate(b_parts)
    else:
        a = np.zeros((0, ns))
        b = np.zeros(0)
    c_std = np.array([sign * problem.c[i] for i, sign in col_of])
    obj_shift = float(problem.c @ shift)

    x_std, obj, status = _simplex_standard(c_std, a, b, senses, max_iterations)
    x = np.full(n, np.nan)
    if x_std is not None:
        x = shift.copy()
        for k, (i, sign) in enumerate(col_of):
            x[i] += sign * x_std[k]
    if status.kind == OPTIMAL:
        obj += obj_shift
        duals = status.duals.pop("rows")
        status.duals["ineq"] = duals[:n_orig_ub]
        status.duals["eq"] = duals[n_orig_ub:n_orig_ub + n_orig_eq]
        res = {}
        if problem.a_ub is not None and problem.a_ub.shape[0]:
            res["primal_ub"] = float(np.max(np.maximum(problem.a_ub @ x - problem.b_ub, 0.0), initial=0.0))
            res["comp_slack"] = float(np.max(np.abs(status.duals["ineq"] * (problem.b_ub - problem.a_ub @ x)), initial=0.0))
        if problem.a_eq is not None and problem.a_eq.shape[0]:
            res["primal_eq"] = float(np.max(np.abs(problem.a_eq @ x - problem.b_eq), initial=0.0))
        status.residuals = res
    else:
        obj = math.nan
    return x, obj, status


def _simplex_standard(c, a, b, senses, max_iterations):
    """Simplex on min c.u, A u (<=,==) b, u >= 0, dense two-phase tableau."""
    m, ns = a.shape
    a = a.copy()
    b = b.copy()
    senses = list(senses)
    flipped = np.zeros(m, dtype=bool)
    for r in range(m):
        if b[r] < 0:
            a[r] *= -1.0
            b[r] *= -1.0
            flipped[r] = True
            if senses[r] == "<=":
                senses[r] = ">="
            elif senses[r] == ">=":
                senses[r] = "<="
    n_slack = sum(1 for s in senses if s == "<=")
    n_surp = sum(1 for s in senses if s == ">=")
    n_art = sum(1 for s in senses if s in (">=", "=="))
    total = ns + n_slack + n_surp + n_art
    tab = np.zeros((m, total + 1))
    tab[:, :ns] = a
    tab[:, -1] = b
    basis = np.empty(m, dtype=int)
    slack_col_of_row = np.full(m, -1, dtype=int)
    art_col_of_row = np.full(m, -1, dtype=int)
    i_slack, i_surp, i_art = ns, ns + n_slack, ns + n_slack + n_surp
    art_cols = []
    for r, sense in enumerate(senses):
        if sense == "<=":
            tab[r, i_slack] = 1.0
            basis[r] = i_slack
            slack_col_of_row[r] = i_slack
            i_slack += 1
        else:
            if sense == ">=":
                tab[r, i_surp] = -1.0
                slack_col_of_row[r] = i_surp
                i_surp += 1
            tab[r, i_art] = 1.0
            basis[r] = i_art
            art_col_of_row[r] = i_art
            art_cols.append(i_art)
            i_art += 1
    art_cols = np.array(art_cols, dtype=int)
    is_art = np.zeros(total, dtype=bool)
    if art_cols.size:
        is_art[art_cols] = True

    iterations = 0

    def run_phase(cost, blocked):
        nonlocal iterations, tab
        red = cost.copy()
        neg_obj = 0.0   # bottom-row rhs carries the negated objective value
        for r in range(m):
            if abs(red[basis[r]]) > 0:
                coef = red[basis[r]]
                red -= coef * tab[r, :-1]
                neg_obj -= coef * tab[r, -1]
        while iterations < max_iterations:
            candidates = np.nonzero((red < -LP_PIVOT_TOL) & ~blocked)[0]
            if candidates.size == 0:
                return -neg_obj, red, OPTIMAL
            enter = int(candidates[0])           # Bland: lowest eligible index
            col = tab[:, enter]
            rows = np.nonzero(col > LP_PIVOT_TOL)[0]
            if rows.size == 0:
                return -neg_obj, red, UNBOUNDED
            ratios = tab[rows, -1] / col[rows]
            best = np.min(ratios)
            tie_rows = rows[ratios <= best + 1e-12]
            leave = int(tie_rows[np.argmin(basis[tie_rows])])   # Bland tie-break
            pivot = tab[leave, enter]
            tab[leave] /= pivot
            factors = tab[:, enter].copy()
            factors[leave] = 0.0
            tab -= np.outer(factors, tab[leave])
            coef = red[enter]
            neg_obj -= coef * tab[leave, -1]
            red -= coef * tab[leave, :-1]
            red[enter] = 0.0
            basis[leave] = enter
            iterations += 1
        return None, None, MAX_ITERATIONS

    # phase 1: drive artificial variables to zero
    if art_cols.size:
        cost1 = np.zeros(total)
        cost1[art_cols] = 1.0
        obj1, _, kind = run_phase(cost1, np.zeros(total, dtype=bool))
        if kind == MAX_ITERATIONS:
            return None, math.nan, SolveStatus(MAX_ITERATIONS, iterations)
        if kind == UNBOUNDED or obj1 > LP_FEAS_TOL * (1.0 + float(np.max(np.abs(b), initial=0.0))):
            return None, math.nan, SolveStatus(INFEASIBLE, iterations)
        # pivot remaining artificials out of the basis when possible
        for r in range(m):
            if is_art[basis[r]]:
                row = tab[r, :-1]
                options = np.nonzero((np.abs(row) > LP_PIVOT_TOL) & ~is_art)[0]
                if options.size:
                    enter = int(options[0])
                    pivot = tab[r, enter]
                    tab[r] /= pivot
                    factors = tab[:, enter].copy()
                    factors[r] = 0.0
                    tab -= np.outer(factors, tab[r])
                    basis[r] = enter

    cost2 = np.zeros(total)
    cost2[:ns] = c
    obj, red, kind = run_phase(cost2, is_art)
    if kind != OPTIMAL:
        status = SolveStatus(kind if kind else MAX_ITERATIONS, iterations)
        return None, math.nan, status
    u = np.zeros(total)
    u[basis] = tab[:, -1]
    x_std = u[:ns]
    # row multipliers, convention L = c.x + m.(Ax - b): recovered from the
    # reduced cost of each row's slack, surplus or artificial column, with a
    # sign correction for rows that were negated to make the rhs nonnegative
    duals = np.zeros(m)
    for r, sense in enumerate(senses):
        if sense == "<=":
            native = -red[slack_col_of_row[r]]
        elif sense == ">=":
            native = red[slack_col_of_row[r]]
        else:
            native = -red[art_col_of_row[r]]
        duals[r] = native if flipped[r] else -native
    status = SolveStatus(OPTIMAL, iterations)
    status.duals["rows"] = duals
    return x_std, float(obj), status


# --------------------------------------------------------------------------
# semidefinite programming
# --------------------------------------------------------------------------

@dataclass
class SdpConstraint:
    a: np.ndarray
    b: float
    sense: str = "<="   # "<=" or "=="


@dataclass
class SdpProblem:
    """min <C, Z> subject to <A_t, Z> (<=,==) b_t and Z PSD."""

    n: int
    c: np.ndarray
    constraints: list

    def __post_init__(self) -> None:
        self.c = _sym(np.asarray(self.c, dtype=float), "objective")
        if self.c.shape != (self.n, self.n):
            raise ValueError("objective matrix has the wrong shape")
        checked = []
        for t, con in enumerate(self.constraints):
            a = _sym(np.asarray(con.a, dtype=float), f"constraint {t}")
            if a.shape != (self.n, self.n):
                raise ValueError(f"constraint {t} has the wrong shape")
            if con.sense not in ("<=", "=="):
                raise ValueError(f"constraint {t} has unknown sense {con.sense!r}")
            checked.append(SdpConstraint(a, float(con.b), con.sense))
        self.constraints = checked


def _sym(mat: np.ndarray, what: str) -> np.ndarray:
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError(f"{what} must be square")
    if np.max(np.abs(mat - mat.T), initial=0.0) > 1e-9 * (1.0 + np.max(np.abs(mat), initial=0.0)):
        raise ValueError(f"{what} must be symmetric")
    return 0.5 * (mat + mat.T)


def _svec_indices(n: int):
    return [(i, j) for i in range(n) for j in range(i, n)]


def _svec_basis(n: int) -> np.ndarray:
    idx = _svec_indices(n)
    basis = np.zeros((len(idx), n, n))
    for k, (i, j) in enumerate(idx):
        if i == j:
            basis[k, i, i] = 1.0
        else:
            basis[k, i, j] = basis[k, j, i] = 1.0 / math.sqrt(2.0)
    return basis


def svec(mat: np.ndarray, basis: np.ndarray) -> np.ndarray:
    return np.einsum("kij,ij->k", basis, mat)


def smat(vec: np.ndarray, basis: np.ndarray) -> np.ndarray:
    return np.einsum("kij,k->ij", basis, vec)


def _chol_ok(mat: np.ndarray) -> bool:
    try:
        np.linalg.cholesky(mat)
        return True
    except np.linalg.LinAlgError:
        return False


def _newton_step(hess, grad):
    try:
        return np.linalg.solve(hess, -grad)
    except np.linalg.LinAlgError:
        ridge = 1e-12 * (1.0 + float(np.trace(hess)) / max(hess.shape[0], 1))
        return np.linalg.solve(hess + ridge * np.eye(hess.shape[0]), -grad)


class _Lifted:
    """Shared geometry: equality-subspace parameterization of svec(Z)."""

    def __init__(self, problem: SdpProblem):
        n = problem.n
        self.n = n
        self.basis = _svec_basis(n)
        self.dim = len(self.basis)
        self.c_s = svec(problem.c, self.basis)
        self.ineq = [con for con in problem.constraints if con.sense == "<="]
        self.eq = [con for con in problem.constraints if con.sense == "=="]
        self.a_ineq = np.array([svec(con.a, self.basis) for con in self.ineq]).reshape(-1, self.dim)
        self.b_ineq = np.array([con.b for con in self.ineq])
        self.a_eq = np.array([svec(con.a, self.basis) for con in self.eq]).reshape(-1, self.dim)
        self.b_eq = np.array([con.b for con in self.eq])
        self.scale = max(1.0, float(np.max(np.abs(self.b_ineq), initial=0.0)),
                         float(np.max(np.abs(self.b_eq), initial=0.0)))

    def solve_equalities(self):
        """Particular solution and nullspace basis for the equality rows."""
        if self.a_eq.shape[0] == 0:
            return np.zeros(self.dim), np.eye(self.dim), True
        z0, *_ = np.linalg.lstsq(self.a_eq, self.b_eq, rcond=None)
        consistent = np.max(np.abs(self.a_eq @ z0 - self.b_eq), initial=0.0) <= 1e-8 * self.scale
        _, sv, vt = np.linalg.svd(self.a_eq, full_matrices=True)
        rank = int(np.sum(sv > 1e-12 * max(sv[0], 1.0))) if sv.size else 0
        null = vt[rank:].T
        return z0, null, consistent

    def z_of(self, z_s: np.ndarray) -> np.ndarray:
        return smat(z_s, self.basis)

    def barrier_hessian(self, w: np.ndarray) -> np.ndarray:
        return np.einsum("aij,jk,bkl,li->ab", self.basis, w, self.basis, w, optimize=True)


def solve_sdp(problem: SdpProblem, tol: float = 1e-6):
    """Barrier path-following solve of a small dense SDP.

    Returns (Z, objective, status). status.duals carries multipliers for the
    inequality and equality rows plus the dual objective; status.trace records
    (primal, dual bound) after each centering step, the bound never exceeding
    the primal value.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    lift = _Lifted(problem)
    z0, null, consistent = lift.solve_equalities()
    if not consistent:
        return np.full((lift.n, lift.n), np.nan), math.nan, SolveStatus(INFEASIBLE)
    iterations = 0

    feas = _phase1(lift, z0, null, tol)
    iterations += feas["iterations"]
    if feas["status"] == MAX_ITERATIONS:
        return np.full((lift.n, lift.n), np.nan), math.nan, SolveStatus(MAX_ITERATIONS, iterations)
    if feas["status"] == INFEASIBLE:
        return np.full((lift.n, lift.n), np.nan), math.nan, SolveStatus(INFEASIBLE, iterations)

    return _phase2(lift, z0, null, feas["y"], tol, iterations)


def _phase1(lift: _Lifted, z0: np.ndarray, null: np.ndarray, tol: float) -> dict:
    """Find a strictly feasible point by minimizing the infeasibility margin s."""
    k = null.shape[1]
    y = np.zeros(k)
    z_s = z0
    z = lift.z_of(z_s)
    eig_min = float(np.linalg.eigvalsh(z)[0])
    slacks = lift.b_ineq - lift.a_ineq @ z_s
    worst = min(eig_min, float(np.min(slacks)) if slacks.size else math.inf)
    if worst > 1e-9 * lift.scale:
        return {"status": OPTIMAL, "y": y, "iterations": 0}
    s = max(0.0, -worst) * 2.0 + lift.scale
    radius_sq = (1e6 * (1.0 + float(np.linalg.norm(z0)))) ** 2
    n_terms = lift.n + len(lift.b_ineq) + 1
    t = 1.0
    iterations = 0

    def pieces(y_vec, s_val):
        z_s_local = z0 + null @ y_vec
        z_local = lift.z_of(z_s_local) + s_val * np.eye(lift.n)
        slack = s_val + lift.b_ineq - lift.a_ineq @ z_s_local
        ball = radius_sq - float(y_vec @ y_vec)
        return z_local, slack, ball

    def value(y_vec, s_val):
        z_local, slack, ball = pieces(y_vec, s_val)
        if ball <= 0 or np.any(slack <= 0) or not _chol_ok(z_local):
            return math.inf
        sign, logdet = np.linalg.slogdet(z_local)
        if sign <= 0:
            return math.inf
        return t * s_val - logdet - float(np.sum(np.log(slack))) - math.log(ball)

    while iterations < SDP_MAX_ITERATIONS:
        for _ in range(60):
            if iterations >= SDP_MAX_ITERATIONS:
                break
            z_local, slack, ball = pieces(y, s)
            w = np.linalg.inv(z_local)
            w = 0.5 * (w + w.T)
            w_s = svec(w, lift.basis)
            inv_slack = 1.0 / slack
            grad_y = null.T @ (-w_s + lift.a_ineq.T @ inv_slack) + (2.0 / ball) * y
            grad_s = t - float(np.trace(w)) - float(np.sum(inv_slack))
            h_w = lift.barrier_hessian(w)
            core = h_w + (lift.a_ineq.T * inv_slack**2) @ lift.a_ineq
            h_yy = null.T @ core @ null + (2.0 / ball) * np.eye(k) + (4.0 / ball**2) * np.outer(y, y)
            w2_s = svec(w @ w, lift.basis)
            h_ys = null.T @ (w2_s - lift.a_ineq.T @ inv_slack**2)
            h_ss = float(np.trace(w @ w)) + float(np.sum(inv_slack**2))
            grad = np.concatenate([grad_y, [grad_s]])
            hess = np.zeros((k + 1, k + 1))
            hess[:k, :k] = h_yy
            hess[:k, k] = h_ys
            hess[k, :k] = h_ys
            hess[k, k] = h_ss
            step = _newton_step(hess, grad)
            decrement_sq = float(-grad @ step)
            iterations += 1
            accepted = False
            # in the quadratic regime a full step is reliable and avoids
            # Armijo comparisons that sit below float noise of the objective
            if 0.0 <= decrement_sq <= 0.2 and value(y + step[:k], s + step[k]) < math.inf:
                y = y + step[:k]
                s = s + step[k]
                accepted = True
            if not accepted:
                alpha = 1.0
                base = value(y, s)
                for _ in range(50):
                    y_new = y + alpha * step[:k]
                    s_new = s + alpha * step[k]
                    if value(y_new, s_new) <= base + 0.25 * alpha * float(grad @ step):
                        y, s = y_new, s_new
                        accepted = True
                        break
                    alpha *= 0.5
            if s < -1e-9 * lift.scale:
                return {"status": OPTIMAL, "y": y, "iterations": iterations}
            if not accepted or decrement_sq * 0.5 < 1e-12:
                break
        # central-path bound: the true minimum margin is at least s - n_terms/t,
        # so a positive bound certifies that no nonpositive margin exists
        if s - n_terms / t > 1e-12 * lift.scale:
            return {"status": INFEASIBLE, "y": y, "iterations": iterations}
        if n_terms / t <= 1e-9 * lift.scale:
            break
        if iterations >= SDP_MAX_ITERATIONS:
            return {"status": MAX_ITERATIONS, "y": y, "iterations": iterations}
        t *= 10.0
    if s < -1e-12 * lift.scale:
        return {"status": OPTIMAL, "y": y, "iterations": iterations}
    return {"status": INFEASIBLE, "y": y, "iterations": iterations}


def _phase2(lift: _Lifted, z0: np.ndarray, null: np.ndarray, y: np.ndarray,
            tol: float, iterations: int):
    k = null.shape[1]
    n_bar = lift.n + len(lift.b_ineq)
    unbounded_floor = -1e15 * max(1.0, float(np.max(np.abs(lift.c_s), initial=0.0))) * lift.scale
    trace = []

    def pieces(y_vec):
        z_s_local = z0 + null @ y_vec
        slack = lift.b_ineq - lift.a_ineq @ z_s_local
        return z_s_local, lift.z_of(z_s_local), slack

    def value(y_vec, t):
        z_s_local, z_local, slack = pieces(y_vec)
        if np.any(slack <= 0) or not _chol_ok(z_local):
            return math.inf
        sign, logdet = np.linalg.slogdet(z_local)
        if sign <= 0:
            return math.inf
        return t * float(lift.c_s @ z_s_local) - logdet - float(np.sum(np.log(slack)))

    z_s, z, slacks = pieces(y)
    obj = float(lift.c_s @ z_s)
    t = max(1.0, n_bar / (1.0 + abs(obj)))
    final_t = t
    def center(y_vec, t, target):
        nonlocal iterations
        prev_dec = math.inf
        for _ in range(80):
            if iterations >= SDP_MAX_ITERATIONS:
                break
            z_s_local, z_local, slack = pieces(y_vec)
            w = np.linalg.inv(z_local)
            w = 0.5 * (w + w.T)
            inv_slack = 1.0 / slack
            grad = null.T @ (t * lift.c_s - svec(w, lift.basis) + lift.a_ineq.T @ inv_slack)
            core = lift.barrier_hessian(w) + (lift.a_ineq.T * inv_slack**2) @ lift.a_ineq
            hess = null.T @ core @ null
            step = _newton_step(hess, grad)
            decrement_sq = float(-grad @ step)
            iterations += 1
            accepted = False
            # in the quadratic regime a full step is reliable and avoids
            # Armijo comparisons that sit below float noise of the objective
            if 0.0 <= decrement_sq <= 0.2 and value(y_vec + step, t) < math.inf:
                y_vec = y_vec + step
                accepted = True
            if not accepted:
                alpha = 1.0
                base = value(y_vec, t)
                for _ in range(50):
                    if value(y_vec + alpha * step, t) <= base + 0.25 * alpha * float(grad @ step):
                        y_vec = y_vec + alpha * step
                        accepted = True
                        break
                    alpha *= 0.5
            stalled = decrement_sq < 1e-6 and decrement_sq > 0.25 * prev_dec
            prev_dec = decrement_sq
            if not accepted or decrement_sq * 0.5 < target or stalled:
                break
        return y_vec

    status_kind = OPTIMAL
    while True:
        # rough centering keeps path-following stable; only the final round,
        # where duals are read off, needs a near-exact center
        y = center(y, t, 5e-3)
        z_s, z, slacks = pieces(y)
        obj = float(lift.c_s @ z_s)
        final_t = t
        if obj < unbounded_floor:
            trace.append((obj, obj - n_bar / t))
            status_kind = UNBOUNDED
            break
        if n_bar / t <= tol * (1.0 + abs(obj)):
            y = center(y, t, 1e-12)
            z_s, z, slacks = pieces(y)
            obj = float(lift.c_s @ z_s)
            trace.append((obj, obj - n_bar / t))
            break
        trace.append((obj, obj - n_bar / t))
        if iterations >= SDP_MAX_ITERATIONS:
            status_kind = MAX_ITERATIONS
            break
        t *= 10.0

    if status_kind == UNBOUNDED:
        return np.full((lift.n, lift.n), np.nan), math.nan, SolveStatus(UNBOUNDED, iterations)

    status = SolveStatus(status_kind, iterations)
    status.trace = trace
    if status_kind == OPTIMAL:
        w = np.linalg.inv(z)
        w = 0.5 * (w + w.T)
        lam = 1.0 / (final_t * slacks) if slacks.size else np.zeros(0)
        resid_vec = final_t * lift.c_s - svec(w, lift.basis) + (lift.a_ineq.T @ (1.0 / slacks)
                                                                if slacks.size else 0.0)
        if lift.a_eq.shape[0]:
            coef, *_ = np.linalg.lstsq(lift.a_eq.T, resid_vec, rcond=None)
            nu = -coef / final_t
        else:
            nu = np.zeros(0)
        lam, nu, dual_obj, s_mat = _pick_dual(
            lift, obj, [(lam, nu), _polish_duals(lift, z, slacks)])
        eig_z = float(np.linalg.eigvalsh(z)[0])
        eig_s = float(np.linalg.eigvalsh(s_mat)[0])
        primal_ineq = float(np.max(np.maximum(lift.a_ineq @ z_s - lift.b_ineq, 0.0), initial=0.0))
        primal_eq = float(np.max(np.abs(lift.a_eq @ z_s - lift.b_eq), initial=0.0))
        status.duals = {"ineq": lam, "eq": nu, "dual_objective": dual_obj}
        status.residuals = {
            "primal_ineq": primal_ineq,
            "primal_eq": primal_eq,
            "min_eig_z": eig_z,
            "min_eig_dual": eig_s,
            "gap": obj - dual_obj,
        }
    return 0.5 * (z + z.T), obj, status


def _dual_pack(lift: _Lifted, lam: np.ndarray, nu: np.ndarray):
    s_vec = lift.c_s.copy()
    if lam.size:
        s_vec = s_vec + lift.a_ineq.T @ lam
    if nu.size:
        s_vec = s_vec + lift.a_eq.T @ nu
    s_mat = lift.z_of(s_vec)
    dual_obj = -float(lam @ lift.b_ineq) - float(nu @ lift.b_eq)
    return dual_obj, s_mat


def _pick_dual(lift: _Lifted, obj: float, candidates):
    """Keep the multiplier set whose worst normalized KKT residual is least.

    Infeasibility and gap are weighed on a common relative scale; comparing
    raw values instead lets a slightly-infeasible set with a large gap win on
    problems where the dual slack matrix has large entries.
    """
    best = None
    for lam, nu in candidates:
        dual_obj, s_mat = _dual_pack(lift, lam, nu)
        neg_eig = max(0.0, -float(np.linalg.eigvalsh(s_mat)[0]))
        neg_lam = max(0.0, -float(np.min(lam, initial=0.0)))
        score = max(neg_eig / (1.0 + float(np.abs(s_mat).max())),
                    neg_lam,
                    abs(obj - dual_obj) / (1.0 + abs(obj)))
        if best is None or score < best[0]:
            best = (score, lam, nu, dual_obj, s_mat)
    return best[1:]


def _polish_duals(lift: _Lifted, z: np.ndarray, slacks: np.ndarray):
    """Least-squares KKT fit restricted to the complementary subspace of Z.

    At an optimum the dual slack matrix is supported on the nullspace of Z and
    only constraints with zero slack carry multipliers, so fitting in that
    reduced space recovers duals without requiring an extremely tight center.
    """
    eigvals, eigvecs = np.linalg.eigh(z)
    top = max(float(eigvals[-1]), 1e-12)
    null_cols = eigvecs[:, eigvals < 1e-6 * top]
    k0 = null_cols.shape[1]
    active = (np.nonzero(slacks <= 1e-6 * lift.scale)[0]
              if slacks.size else np.array([], dtype=int))
    blocks = []
    if active.size:
        blocks.append(lift.a_ineq[active].T)
    n_eq = lift.a_eq.shape[0]
    if n_eq:
        blocks.append(lift.a_eq.T)
    if k0:
        sub = _svec_basis(k0)
        m_cols = np.stack(
            [svec(null_cols @ bm @ null_cols.T, lift.basis) for bm in sub], axis=1)
        blocks.append(-m_cols)
    design = np.column_stack(blocks) if blocks else np.zeros((lift.dim, 0))
    sol, *_ = np.linalg.lstsq(design, -lift.c_s, rcond=None)
    lam = np.zeros(len(lift.b_ineq))
    if active.size:
        lam[active] = np.maximum(sol[:active.size], 0.0)
    nu = sol[active.size:active.size + n_eq] if n_eq else np.zeros(0)
    return lam, nu

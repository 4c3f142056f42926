"""User to base-station assignment under coverage, delay, and backhaul rules.

With the ABS positions held fixed and every BS assumed to split its band
equally over the users it could plausibly serve, each link's transmit power
becomes a constant and picking a server per user is a binary linear program.
Branch and bound on the LP relaxation solves it exactly; the MBS column is
always admissible, so the program is never infeasible.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass

import numpy as np

from .channel import (MIN_GROUND_DISTANCE, ChannelParams, backhaul_capacity,
                      elevation_angles, min_elevation, power_coefficient,
                      slant_distances)
from .sdp_kernel import INFEASIBLE, OPTIMAL, LpProblem, SolveStatus, solve_lp

INTEGRALITY_TOL = 1e-7
DEFAULT_NODE_BUDGET = 100_000

# users this close to the cone boundary (rad) still count as covered
CONE_EDGE_TOL = 1e-12


@dataclass(frozen=True)
class AssociationProblem:
    """Assignment costs and constraint data for one set of ABS positions.

    Column 0 is the MBS, columns 1..J the ABSs, matching the layout of the
    scenario's cache association matrix. Pairs ruled out by the coverage
    cone or the delay rule carry an infinite cost and are never assigned.
    """

    cost: np.ndarray               # (I, J+1) W, +inf where ineligible
    eligible: np.ndarray           # (I, J+1) bool, column 0 all True
    backhaul_load: np.ndarray      # (I, J) bits/s drawn from ABS j by user i
    capacity: np.ndarray           # (J,) backhaul budget per ABS, bits/s

    def __post_init__(self) -> None:
        cost = np.asarray(self.cost, dtype=float)
        eligible = np.asarray(self.eligible, dtype=bool)
        load = np.asarray(self.backhaul_load, dtype=float)
        cap = np.asarray(self.capacity, dtype=float).ravel()
        if cost.ndim != 2 or cost.shape[1] < 1:
            raise ValueError("cost must be (n_users, n_bs) with the MBS first")
        if eligible.shape != cost.shape:
            raise ValueError("eligibility mask must match the cost shape")
        n_users, n_bs = cost.shape
        if load.shape != (n_users, n_bs - 1):
            raise ValueError("backhaul load must be (n_users, n_abs)")
        if cap.shape != (n_bs - 1,):
            raise ValueError("capacity must have one entry per ABS")
        if n_users and not np.all(eligible[:, 0]):
            raise ValueError("the MBS column must be eligible for every user")
        if np.any(~np.isfinite(cost[eligible])) or np.any(cost[eligible] < 0):
            raise ValueError("eligible costs must be finite and non-negative")
        if np.any(load < 0):
            raise ValueError("backhaul loads must be non-negative")
        if np.any(cap < 0):
            raise ValueError("backhaul capacities must be non-negative")
        for name, arr in (("cost", cost), ("eligible", eligible),
                          ("backhaul_load", load), ("capacity", cap)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_users(self) -> int:
        return self.cost.shape[0]

    @property
    def n_abs(self) -> int:
        return self.cost.shape[1] - 1


@dataclass(frozen=True)
class AssociationResult:
    rho: np.ndarray      # (I, J+1) bool, one server per row
    objective: float     # W
    optimal: bool        # False when the node budget ran out
    nodes: int           # LP relaxations solved

    def __post_init__(self) -> None:
        rho = np.asarray(self.rho, dtype=bool)
        rho.setflags(write=False)
        object.__setattr__(self, "rho", rho)


def build_bilp(scenario, positions, params: ChannelParams,
               cache_association: np.ndarray | None = None) -> AssociationProblem:
    """Equal-share linearization of the joint assignment and band-split problem.

    Every ABS is assumed to divide its band over all users inside its
    coverage cone and the MBS over the whole population, so each candidate
    link has a fixed bandwidth fraction and therefore a fixed power. The
    fractions are later refined for the chosen assignment.
    """
    geometry = min_elevation(params)
    pos = np.asarray(positions, dtype=float).reshape(-1, 3)
    n_abs = pos.shape[0]
    if n_abs != scenario.abs_count:
        raise ValueError("positions must provide one row per ABS in the scenario")
    if cache_association is None:
        cache = scenario.cache_association
    else:
        cache = np.asarray(cache_association, dtype=bool)
        if cache.shape != (scenario.n_users, n_abs + 1):
            raise ValueError("cache association must be (n_users, n_abs+1)")
        if scenario.n_users and not np.all(cache[:, 0]):
            raise ValueError("MBS column of the cache association must be all true")
    user_pos = scenario.user_positions()
    rates = scenario.rate_demands()
    delay = scenario.delay_flags()
    n_users = scenario.n_users

    eligible = np.zeros((n_users, n_abs + 1), dtype=bool)
    eligible[:, 0] = True
    cost = np.full((n_users, n_abs + 1), np.inf)

    mbs = np.asarray(scenario.mbs_position, dtype=float)
    d_mbs = np.hypot(user_pos[:, 0] - mbs[0], user_pos[:, 1] - mbs[1])
    d_mbs = np.maximum(d_mbs, MIN_GROUND_DISTANCE)
    beta_mbs = 1.0 / max(1, n_users)
    for i in range(n_users):
        cost[i, 0] = power_coefficient(rates[i], "mbs", beta_mbs, 1.0, params,
                                       distance=d_mbs[i])

    for j in range(n_abs):
        elev = elevation_angles(pos[j], user_pos)
        in_cone = elev >= geometry.b - CONE_EDGE_TOL
        beta_j = 1.0 / max(1, int(np.count_nonzero(in_cone)))
        slants = slant_distances(pos[j], user_pos)
        serve = in_cone & (~delay | cache[:, j + 1])
        eligible[:, j + 1] = serve
        for i in np.flatnonzero(serve):
            a_coef = power_coefficient(rates[i], "abs", beta_j, geometry.g0,
                                       params, los=True)
            cost[i, j + 1] = a_coef * slants[i] ** 2

    load = rates[:, None] * (1.0 - cache[:, 1:].astype(float))
    d_backhaul = np.sqrt((pos[:, 0] - mbs[0]) ** 2
                         + (pos[:, 1] - mbs[1]) ** 2 + pos[:, 2] ** 2)
    cap = np.array([backhaul_capacity(d_backhaul[j], n_abs, params)
                    for j in range(n_abs)], dtype=float)
    return AssociationProblem(cost, eligible, load, cap)


def _round_relaxation(problem: AssociationProblem, rel: "_Relaxation",
                      x: np.ndarray) -> tuple[np.ndarray, float]:
    """Feasible assignment built from a (fractional) relaxation point.

    Each user takes the column holding most of its LP mass; overloaded
    stations then shed users to the MBS, cheapest extra power per freed
    bit first. The MBS column is always admissible, so this terminates.
    """
    n_users, n_bs = problem.cost.shape
    choice = np.zeros(n_users, dtype=int)
    mass = np.zeros(n_users)
    for k, (i, j) in enumerate(rel.pairs):
        if j == 0:
            mass[i] = x[k]
    for k, (i, j) in enumerate(rel.pairs):
        if j != 0 and x[k] > mass[i]:
            mass[i] = x[k]
            choice[i] = j
    for j in range(1, n_bs):
        users = np.flatnonzero(choice == j)
        load = float(problem.backhaul_load[users, j - 1].sum())
        capacity = float(problem.capacity[j - 1])
        if load <= capacity:
            continue
        delta = problem.cost[users, 0] - problem.cost[users, j]
        per_bit = delta / np.maximum(problem.backhaul_load[users, j - 1], 1.0)
        for i in users[np.argsort(per_bit, kind="stable")]:
            if load <= capacity:
                break
            choice[i] = 0
            load -= float(problem.backhaul_load[i, j - 1])
    rho = np.zeros((n_users, n_bs), dtype=bool)
    rho[np.arange(n_users), choice] = True
    return rho, float(problem.cost[rho].sum())


class _Relaxation:
    """LP relaxation over the eligible pairs, reusable across search nodes.

    Each node's LP is presolved before the simplex sees it: users pinned to
    a station drop out (their load debits the capacity), and the MBS share
    of every remaining user is eliminated through its row sum. The reduced
    program has only <= rows with nonnegative right-hand sides, so the
    all-MBS point is a ready starting basis and phase one disappears; only
    users whose MBS column is pinned to zero keep an equality row.
    """

    def __init__(self, problem: AssociationProblem):
        self.problem = problem
        eligible = problem.eligible
        self.pairs = [(i, j) for i in range(problem.n_users)
                      for j in range(problem.n_abs + 1) if eligible[i, j]]
        self.index = {pair: k for k, pair in enumerate(self.pairs)}
        self.mbs_index = np.array([self.index[(i, 0)]
                                   for i in range(problem.n_users)], dtype=int)
        self.abs_vars_of_user: list[list[tuple[int, int]]] = [
            [] for _ in range(problem.n_users)]
        for k, (i, j) in enumerate(self.pairs):
            if j != 0:
                self.abs_vars_of_user[i].append((k, j))

    def solve(self, fixed: dict) -> tuple[np.ndarray | None, float, object]:
        problem = self.problem
        n_users = problem.n_users
        infeasible = (None, math.inf, SolveStatus(INFEASIBLE))
        chosen: dict[int, int] = {}
        banned: set[tuple[int, int]] = set()
        for pair, value in fixed.items():
            if int(value) == 1:
                i, j = pair
                if chosen.setdefault(i, j) != j:
                    return infeasible
            else:
                banned.add(pair)
        for i, j in chosen.items():
            if (i, j) in banned:
                return infeasible
        remaining = problem.capacity.astype(float).copy()
        for i, j in chosen.items():
            if j >= 1:
                remaining[j - 1] -= problem.backhaul_load[i, j - 1]
        if np.any(remaining < -1e-9 * np.maximum(problem.capacity, 1.0)):
            return infeasible
        remaining = np.maximum(remaining, 0.0)

        undecided = [i for i in range(n_users) if i not in chosen]
        mbs_banned = {i for i in undecided if (i, 0) in banned}
        var_full: list[int] = []      # full pair index per reduced variable
        var_user: list[int] = []
        var_abs: list[int] = []
        for i in undecided:
            for k, j in self.abs_vars_of_user[i]:
                if (i, j) in banned:
                    continue
                load = problem.backhaul_load[i, j - 1]
                if load > 0.0 and remaining[j - 1] == 0.0:
                    continue
                var_full.append(k)
                var_user.append(i)
                var_abs.append(j)
        constant = float(sum(problem.cost[i, j] for i, j in chosen.items()))
        constant += float(sum(problem.cost[i, 0] for i in undecided))
        vars_of_user: dict[int, list[int]] = {}
        for r, i in enumerate(var_user):
            vars_of_user.setdefault(i, []).append(r)
        for i in mbs_banned:
            if not vars_of_user.get(i):
                return infeasible

        nv = len(var_full)
        x = np.zeros(len(self.pairs))
        for i, j in chosen.items():
            x[self.index[(i, j)]] = 1.0
        if nv == 0:
            for i in undecided:
                x[self.mbs_index[i]] = 1.0
            return x, constant, SolveStatus(OPTIMAL)

        c_red = np.array([problem.cost[self.pairs[k]] - problem.cost[self.pairs[k][0], 0]
                          for k in var_full])
        ub_rows, ub_rhs = [], []
        eq_rows, eq_rhs = [], []
        for i in undecided:
            rows_i = vars_of_user.get(i)
            if not rows_i:
                continue
            row = np.zeros(nv)
            row[rows_i] = 1.0
            if i in mbs_banned:
                eq_rows.append(row)
                eq_rhs.append(1.0)
            else:
                ub_rows.append(row)
                ub_rhs.append(1.0)
        for j in range(problem.n_abs):
            cols = [r for r in range(nv)
                    if var_abs[r] == j + 1
                    and problem.backhaul_load[var_user[r], j] > 0.0]
            if not cols:
                continue
            row = np.zeros(nv)
            for r in cols:
                row[r] = problem.backhaul_load[var_user[r], j]
            # loads are bits/s while assignment rows are O(1); rescaling to
            # units of the remaining capacity keeps the tableau conditioned
            scale = remaining[j] if remaining[j] > 0 else row.max()
            ub_rows.append(row / scale)
            ub_rhs.append(remaining[j] / scale)
        lp = LpProblem(c_red,
                       a_ub=np.vstack(ub_rows) if ub_rows else None,
                       b_ub=np.array(ub_rhs) if ub_rows else None,
                       a_eq=np.vstack(eq_rows) if eq_rows else None,
                       b_eq=np.array(eq_rhs) if eq_rows else None)
        u, objective, status = solve_lp(lp)
        if not status.ok:
            return None, math.inf if status.kind == INFEASIBLE else math.nan, status
        for r, k in enumerate(var_full):
            x[k] = u[r]
        for i in undecided:
            share = sum(u[r] for r in vars_of_user.get(i, ()))
            x[self.mbs_index[i]] = 0.0 if i in mbs_banned else max(0.0, 1.0 - share)
        return x, objective + constant, status


def lp_bound(problem: AssociationProblem, fixed=None) -> float:
    """Optimal value of the LP relaxation with some assignments pinned.

    ``fixed`` maps (user, column) pairs to 0 or 1. Pinning an ineligible
    pair to 1, or producing any other contradiction, yields +inf so the
    search can prune the node.
    """
    rel = _Relaxation(problem)
    if not rel.pairs:
        return 0.0
    pinned: dict = {}
    for pair, value in dict(fixed or {}).items():
        if pair not in rel.index:
            if int(value) == 1:
                return math.inf
            continue
        pinned[pair] = int(value)
    _, objective, status = rel.solve(pinned)
    if status.kind == INFEASIBLE:
        return math.inf
    if not status.ok:
        raise RuntimeError(f"relaxation ended with status {status.kind}")
    return objective


def solve_bilp(problem: AssociationProblem,
               node_budget: int = DEFAULT_NODE_BUDGET) -> AssociationResult:
    """Best-bound branch and bound over the assignment LP relaxation.

    The all-MBS assignment seeds the incumbent, so a result is always
    returned; ``optimal`` reports whether the search tree was exhausted
    within the node budget.
    """
    n_users, n_bs = problem.cost.shape
    best_rho = np.zeros((n_users, n_bs), dtype=bool)
    best_rho[:, 0] = True
    best_obj = float(problem.cost[:, 0].sum())
    if n_users == 0:
        return AssociationResult(best_rho, 0.0, True, 0)

    rel = _Relaxation(problem)
    nodes = 0
    counter = itertools.count()
    heap: list = []

    def push(fixed: dict) -> None:
        nonlocal nodes, best_obj, best_rho
        nodes += 1
        x, objective, status = rel.solve(fixed)
        if status.kind == INFEASIBLE:
            return
        if not status.ok:
            raise RuntimeError(f"relaxation ended with status {status.kind}")
        # rounding every relaxation point keeps the incumbent near the bound,
        # so pruning stays sharp and a budget fallback is still a good answer
        rounded_rho, rounded_obj = _round_relaxation(problem, rel, x)
        if rounded_obj < best_obj:
            best_obj = rounded_obj
            best_rho = rounded_rho
        heapq.heappush(heap, (objective, next(counter), fixed, x))

    push({})
    proven = True
    while heap:
        if nodes >= node_budget:
            proven = False
            break
        bound, _, fixed, x = heapq.heappop(heap)
        if bound >= best_obj - 1e-10 * (1.0 + abs(best_obj)):
            continue
        x = x.copy()
        for pair, value in fixed.items():
            # pinned coordinates may carry solver roundoff; snapping them
            # keeps the branch choice off pairs that are already decided
            x[rel.index[pair]] = float(value)
        frac = np.abs(x - np.round(x))
        if float(frac.max(initial=0.0)) <= INTEGRALITY_TOL:
            rho = np.zeros((n_users, n_bs), dtype=bool)
            for k, pair in enumerate(rel.pairs):
                if x[k] > 0.5:
                    rho[pair] = True
            objective = float(problem.cost[rho].sum())
            if objective < best_obj:
                best_obj = objective
                best_rho = rho
            continue
        branch_pair = rel.pairs[int(np.argmax(frac))]
        for value in (1, 0):
            child = dict(fixed)
            child[branch_pair] = value
            push(child)
    return AssociationResult(best_rho, best_obj, proven, nodes)

"""Alternating assignment/band-split and placement loop, plus the clustering baseline.

One outer iteration first re-solves the user assignment and the per-BS band
split at the current ABS positions, then re-places every ABS for the chosen
assignment. Assignments are only adopted when they beat the incumbent under
refined band splits, and each placement starts from the incumbent position,
so the recorded power trace never increases. The loop stops when one full
iteration improves total power by less than epsilon.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .association import build_bilp, solve_bilp
from .bandwidth import refine_bandwidth
from .channel import (MIN_GROUND_DISTANCE, ChannelParams, min_elevation,
                      path_loss_linear, power_coefficient, slant_distances)
from .placement import PlacementResult, build_qcqp, place_abs

INFEASIBILITY_POLICIES = ("keep", "min_violation")


@dataclass(frozen=True)
class SolverConfig:
    epsilon: float = 1e-3              # W, full-iteration improvement threshold
    max_outer_iterations: int = 50
    n_samples: int = 100               # randomization draws per placement
    seed: int | None = None
    infeasibility_policy: str = "keep"
    node_budget: int = 100_000         # assignment search nodes

    def __post_init__(self) -> None:
        if self.epsilon <= 0.0:
            raise ValueError("epsilon must be positive")
        if self.max_outer_iterations < 1:
            raise ValueError("max_outer_iterations must be at least 1")
        if self.n_samples < 1:
            raise ValueError("n_samples must be at least 1")
        if self.infeasibility_policy not in INFEASIBILITY_POLICIES:
            raise ValueError(f"unknown infeasibility policy "
                             f"{self.infeasibility_policy!r}")
        if self.node_budget < 1:
            raise ValueError("node_budget must be at least 1")


@dataclass(frozen=True)
class TraceRecord:
    iteration: int
    phase: str                       # "association", "placement", "baseline"
    total_power: float               # W
    abs_power: float                 # W, ABS links only
    positions: np.ndarray            # (J, 3) snapshot
    placement_feasible: tuple       # per-ABS flags, all True off placement

    def __post_init__(self) -> None:
        positions = np.array(self.positions, dtype=float).reshape(-1, 3)
        positions.setflags(write=False)
        object.__setattr__(self, "positions", positions)
        object.__setattr__(self, "placement_feasible",
                           tuple(bool(v) for v in self.placement_feasible))


@dataclass(frozen=True)
class Solution:
    abs_positions: np.ndarray     # (J, 3)
    rho: np.ndarray               # (I, J+1) bool, MBS first
    beta: np.ndarray              # (I, J+1) fractions, zero off served links
    link_powers: np.ndarray       # (I, J+1) W, zero off served links
    total_power: float            # W
    abs_total_power: float        # W
    backhaul_usage: np.ndarray    # (J,) bits/s drawn from each ABS
    iterations: int
    converged: bool
    trace: tuple

    def __post_init__(self) -> None:
        positions = np.array(self.abs_positions, dtype=float).reshape(-1, 3)
        rho = np.array(self.rho, dtype=bool)
        beta = np.array(self.beta, dtype=float)
        powers = np.array(self.link_powers, dtype=float)
        usage = np.array(self.backhaul_usage, dtype=float).ravel()
        n_users, n_bs = rho.shape
        if positions.shape[0] != n_bs - 1:
            raise ValueError("one position row is needed per ABS")
        if beta.shape != rho.shape or powers.shape != rho.shape:
            raise ValueError("rho, beta, and link_powers must share a shape")
        if usage.shape != (n_bs - 1,):
            raise ValueError("backhaul usage needs one entry per ABS")
        if n_users and not np.all(rho.sum(axis=1) == 1):
            raise ValueError("every user needs exactly one serving BS")
        if np.any(beta[~rho] != 0.0) or np.any(powers[~rho] != 0.0):
            raise ValueError("beta and power entries off served links must be zero")
        if np.any(beta[rho] <= 0.0) or np.any(beta[rho] > 1.0 + 1e-12):
            raise ValueError("served fractions must lie in (0, 1]")
        total = float(powers[rho].sum()) if n_users else 0.0
        if not math.isclose(total, self.total_power,
                            rel_tol=1e-9, abs_tol=1e-15):
            raise ValueError("total_power must equal the served link power sum")
        for name, arr in (("abs_positions", positions), ("rho", rho),
                          ("beta", beta), ("link_powers", powers),
                          ("backhaul_usage", usage)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "trace", tuple(self.trace))

    @property
    def abs_user_count(self) -> int:
        return int(self.rho[:, 1:].sum())


def compute_link_powers(rho, beta, positions, scenario,
                        params: ChannelParams) -> np.ndarray:
    """Per-link transmit powers meeting each served user's rate exactly, W."""
    geometry = min_elevation(params)
    rho = np.asarray(rho, dtype=bool)
    beta = np.asarray(beta, dtype=float)
    pos = np.asarray(positions, dtype=float).reshape(-1, 3)
    user_pos = scenario.user_positions()
    rates = scenario.rate_demands()
    powers = np.zeros_like(beta)
    mbs = np.asarray(scenario.mbs_position, dtype=float)
    for i in np.flatnonzero(rho[:, 0]):
        d = math.hypot(user_pos[i, 0] - mbs[0], user_pos[i, 1] - mbs[1])
        d = max(d, MIN_GROUND_DISTANCE)
        powers[i, 0] = power_coefficient(rates[i], "mbs", beta[i, 0], 1.0,
                                         params, distance=d)
    for j in range(pos.shape[0]):
        served = np.flatnonzero(rho[:, j + 1])
        if served.size == 0:
            continue
        slants = slant_distances(pos[j], user_pos[served])
        for idx, i in enumerate(served):
            a_coef = power_coefficient(rates[i], "abs", beta[i, j + 1],
                                       geometry.g0, params, los=True)
            powers[i, j + 1] = a_coef * slants[idx] ** 2
    return powers


def total_power(rho, beta, positions, scenario,
                params: ChannelParams) -> tuple[float, np.ndarray]:
    """Total transmit power and the per-BS breakdown (MBS first), W."""
    powers = compute_link_powers(rho, beta, positions, scenario, params)
    per_bs = powers.sum(axis=0)
    return float(per_bs.sum()), per_bs


def backhaul_usage(rho, scenario) -> np.ndarray:
    """Backhaul rate drawn from each ABS by its uncached traffic, bits/s."""
    rho = np.asarray(rho, dtype=bool)
    rates = scenario.rate_demands()
    cached = scenario.cache_association[:, 1:]
    uncached = rho[:, 1:] & ~cached
    return (rates[:, None] * uncached).sum(axis=0)


def _refine_fractions(rho, positions, scenario, params: ChannelParams) -> np.ndarray:
    """Optimal per-BS band split for a fixed assignment."""
    geometry = min_elevation(params)
    rho = np.asarray(rho, dtype=bool)
    pos = np.asarray(positions, dtype=float).reshape(-1, 3)
    user_pos = scenario.user_positions()
    rates = scenario.rate_demands()
    beta = np.zeros(rho.shape, dtype=float)
    mbs = np.asarray(scenario.mbs_position, dtype=float)

    served = np.flatnonzero(rho[:, 0])
    if served.size:
        d = np.hypot(user_pos[served, 0] - mbs[0], user_pos[served, 1] - mbs[1])
        d = np.maximum(d, MIN_GROUND_DISTANCE)
        losses = path_loss_linear("mbs_user", d, params)
        scales = np.atleast_1d(losses) * params.effective_noise_density \
            * params.access_bandwidth
        beta[served, 0] = refine_bandwidth(scales, rates[served], params).beta
    for j in range(pos.shape[0]):
        served = np.flatnonzero(rho[:, j + 1])
        if served.size == 0:
            continue
        slants = slant_distances(pos[j], user_pos[served])
        losses = path_loss_linear("abs_los", slants, params)
        scales = np.atleast_1d(losses) / geometry.g0 \
            * params.effective_noise_density * params.access_bandwidth
        beta[served, j + 1] = refine_bandwidth(scales, rates[served], params).beta
    return beta


def handle_infeasible_placement(abs_index: int, incumbent,
                                result: PlacementResult,
                                policy: str = "keep") -> np.ndarray:
    """Position to adopt when a placement subproblem came back infeasible.

    The default keeps the incumbent, which stays feasible because the
    assignment was computed against it; "min_violation" adopts the least
    violating point and lets the next assignment step re-evaluate
    eligibility there.
    """
    if policy not in INFEASIBILITY_POLICIES:
        raise ValueError(f"unknown infeasibility policy {policy!r}")
    if policy == "keep":
        return np.array(incumbent, dtype=float)
    return np.array(result.position, dtype=float)


def _rho_feasible(problem, rho) -> bool:
    """Whether an assignment satisfies the eligibility and backhaul rows."""
    if not np.all(problem.eligible[rho]):
        return False
    for j in range(problem.n_abs):
        used = float((problem.backhaul_load[:, j] * rho[:, j + 1]).sum())
        if used > problem.capacity[j] * (1.0 + 1e-12):
            return False
    return True


def _assignment_step(scenario, positions, params, config,
                     rho_prev) -> tuple[np.ndarray, np.ndarray, float]:
    """Best assignment at the given positions, never worse than keeping rho_prev."""
    problem = build_bilp(scenario, positions, params)
    solved = solve_bilp(problem, config.node_budget)
    rho = solved.rho
    beta = _refine_fractions(rho, positions, scenario, params)
    power, _ = total_power(rho, beta, positions, scenario, params)
    if rho_prev is not None and not np.array_equal(rho_prev, rho) \
            and _rho_feasible(problem, rho_prev):
        beta_keep = _refine_fractions(rho_prev, positions, scenario, params)
        power_keep, _ = total_power(rho_prev, beta_keep, positions,
                                    scenario, params)
        if power_keep < power:
            return rho_prev, beta_keep, power_keep
    return rho, beta, power


def _placement_step(scenario, positions, rho, beta, params, config,
                    rng) -> tuple[np.ndarray, list]:
    """Re-place every ABS for the fixed assignment, keeping served users covered."""
    geometry = min_elevation(params)
    user_pos = scenario.user_positions()
    rates = scenario.rate_demands()
    cached = scenario.cache_association[:, 1:]
    mbs = np.asarray(scenario.mbs_position, dtype=float)
    n_abs = positions.shape[0]
    budget = params.mbs_backhaul_power / (
        path_loss_linear("backhaul", 1.0, params)
        * params.effective_noise_density * params.backhaul_bandwidth)
    new_positions = positions.copy()
    flags = []
    for j in range(n_abs):
        served = np.flatnonzero(rho[:, j + 1])
        if served.size == 0:
            flags.append(True)
            continue
        coeffs = [power_coefficient(rates[i], "abs", beta[i, j + 1],
                                    geometry.g0, params, los=True)
                  for i in served]
        demand = float((rates[served] * ~cached[served, j]).sum())
        load = 2.0 ** (demand * n_abs / params.backhaul_bandwidth) - 1.0
        instance = build_qcqp(user_pos[served], coeffs, geometry.V,
                              mbs, load, budget,
                              (params.z_min, params.z_max))
        result = place_abs(instance, rng, incumbent=positions[j],
                           n_samples=config.n_samples)
        flags.append(bool(result.feasible))
        if result.feasible:
            incumbent_power = instance.objective(positions[j])
            if result.objective <= incumbent_power:
                new_positions[j] = result.position
        else:
            new_positions[j] = handle_infeasible_placement(
                j, positions[j], result, config.infeasibility_policy)
    return new_positions, flags


def _finish(scenario, params, positions, rho, beta, iterations, converged,
            trace) -> Solution:
    powers = compute_link_powers(rho, beta, positions, scenario, params)
    per_bs = powers.sum(axis=0)
    return Solution(abs_positions=positions, rho=rho, beta=beta,
                    link_powers=powers, total_power=float(per_bs.sum()),
                    abs_total_power=float(per_bs[1:].sum()),
                    backhaul_usage=backhaul_usage(rho, scenario),
                    iterations=iterations, converged=converged, trace=trace)


def _mbs_only(scenario, params: ChannelParams) -> Solution:
    n_users = scenario.n_users
    rho = np.zeros((n_users, scenario.abs_count + 1), dtype=bool)
    rho[:, 0] = True
    positions = np.zeros((scenario.abs_count, 3))
    positions[:, 2] = params.z_min
    beta = _refine_fractions(rho, positions, scenario, params)
    powers = compute_link_powers(rho, beta, positions, scenario, params)
    record = TraceRecord(1, "association", float(powers.sum()),
                         0.0, positions, (True,) * scenario.abs_count)
    return _finish(scenario, params, positions, rho, beta, 1, True, (record,))


def optimize(scenario, params: ChannelParams,
             config: SolverConfig | None = None) -> Solution:
    """Alternating minimization of total downlink power.

    Deterministic given (scenario, params, config): all randomness flows
    from config.seed.
    """
    config = config or SolverConfig()
    if scenario.abs_count == 0 or scenario.n_users == 0:
        return _mbs_only(scenario, params)
    rng = np.random.default_rng(config.seed)
    region = scenario.region_side
    n_abs = scenario.abs_count
    positions = np.column_stack([
        rng.uniform(0.0, region, n_abs),
        rng.uniform(0.0, region, n_abs),
        rng.uniform(params.z_min, 0.5 * params.z_max, n_abs),
    ])
    trace = []
    rho = None
    beta = None
    prev_power = math.inf
    converged = False
    iterations = 0
    for t in range(1, config.max_outer_iterations + 1):
        iterations = t
        rho, beta, assoc_power = _assignment_step(scenario, positions, params,
                                                  config, rho)
        abs_p = assoc_power - float(
            compute_link_powers(rho, beta, positions, scenario,
                                params)[:, 0].sum())
        trace.append(TraceRecord(t, "association", assoc_power, abs_p,
                                 positions, (True,) * n_abs))
        positions, flags = _placement_step(scenario, positions, rho, beta,
                                           params, config, rng)
        place_power, per_bs = total_power(rho, beta, positions, scenario,
                                          params)
        trace.append(TraceRecord(t, "placement", place_power,
                                 float(per_bs[1:].sum()), positions,
                                 tuple(flags)))
        if prev_power - place_power < config.epsilon:
            converged = True
            break
        prev_power = place_power
    if config.infeasibility_policy == "min_violation" and not all(flags):
        # the adopted min-violation points may strand served users; one more
        # assignment pass restores a consistent state at the final positions
        rho, beta, final_power = _assignment_step(scenario, positions, params,
                                                  config, None)
        abs_p = final_power - float(
            compute_link_powers(rho, beta, positions, scenario,
                                params)[:, 0].sum())
        trace.append(TraceRecord(iterations, "association", final_power,
                                 abs_p, positions, (True,) * n_abs))
    return _finish(scenario, params, positions, rho, beta, iterations,
                   converged, tuple(trace))


def _kmeans(points: np.ndarray, k: int, rng) -> np.ndarray:
    """Lloyd's iterations on 2D points; empty clusters re-seed at far points."""
    n = points.shape[0]
    if n == 0:
        raise ValueError("clustering needs at least one point")
    if k >= n:
        centers = points[np.argsort(rng.random(n))].copy()
        extra = points[rng.integers(0, n, max(0, k - n))]
        return np.vstack([centers, extra]) if k > n else centers
    start = rng.choice(n, size=k, replace=False)
    centers = points[start].copy()
    assign = np.full(n, -1)
    for _ in range(100):
        d2 = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new_assign = np.argmin(d2, axis=1)
        for j in range(k):
            members = new_assign == j
            if not np.any(members):
                farthest = int(np.argmax(d2[np.arange(n), new_assign]))
                centers[j] = points[farthest]
                new_assign[farthest] = j
                members = new_assign == j
            centers[j] = points[members].mean(axis=0)
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
    return centers


def baseline(scenario, params: ChannelParams,
             config: SolverConfig | None = None) -> Solution:
    """Clustering heuristic: k-means ground spots, coverage-driven altitudes.

    Users start on their nearest cluster's ABS; those the altitude cap
    cannot cover, delay-sensitive users without a local cache copy, and
    greedy backhaul evictions (largest uncached demand first) fall back to
    the MBS. Every BS then splits its band equally among its users.
    """
    config = config or SolverConfig()
    if scenario.abs_count == 0 or scenario.n_users == 0:
        return _mbs_only(scenario, params)
    rng = np.random.default_rng(config.seed)
    geometry = min_elevation(params)
    n_users = scenario.n_users
    n_abs = scenario.abs_count
    user_pos = scenario.user_positions()
    rates = scenario.rate_demands()
    delay = scenario.delay_flags()
    cached = scenario.cache_association[:, 1:]
    mbs = np.asarray(scenario.mbs_position, dtype=float)

    centers = _kmeans(user_pos, n_abs, rng)
    d2 = ((user_pos[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    cluster = np.argmin(d2, axis=1)
    on_abs = np.ones(n_users, dtype=bool)
    radii = np.sqrt(d2[np.arange(n_users), cluster])
    tan_b = math.tan(geometry.b)

    def altitude(j: int) -> float:
        members = on_abs & (cluster == j)
        need = float(radii[members].max() * tan_b) if np.any(members) else 0.0
        return min(max(need, params.z_min), params.z_max)

    # altitude cap: users needing more height than allowed go to the MBS
    need_z = radii * tan_b
    for j in range(n_abs):
        members = on_abs & (cluster == j)
        on_abs[members & (need_z > altitude(j))] = False
    # delay rule: sensitive users stay only where their content is cached
    on_abs[delay & ~cached[np.arange(n_users), cluster]] = False
    # greedy backhaul relief: drop the largest uncached demand first
    for j in range(n_abs):
        z_j = altitude(j)
        d_hub = math.sqrt(float(((centers[j] - mbs) ** 2).sum()) + z_j ** 2)
        cap = (params.backhaul_bandwidth / n_abs) * math.log2(
            1.0 + params.mbs_backhaul_power / (
                path_loss_linear("backhaul", d_hub, params)
                * params.effective_noise_density * params.backhaul_bandwidth))
        while True:
            members = np.flatnonzero(on_abs & (cluster == j))
            loads = rates[members] * ~cached[members, j]
            if loads.sum() <= cap:
                break
            on_abs[members[int(np.argmax(loads))]] = False

    positions = np.column_stack([centers,
                                 [altitude(j) for j in range(n_abs)]])
    rho = np.zeros((n_users, n_abs + 1), dtype=bool)
    rho[np.arange(n_users), np.where(on_abs, cluster + 1, 0)] = True
    beta = np.zeros_like(rho, dtype=float)
    for col in range(n_abs + 1):
        served = rho[:, col]
        if np.any(served):
            beta[served, col] = 1.0 / int(served.sum())
    powers = compute_link_powers(rho, beta, positions, scenario, params)
    per_bs = powers.sum(axis=0)
    record = TraceRecord(1, "baseline", float(per_bs.sum()),
                         float(per_bs[1:].sum()), positions, (True,) * n_abs)
    return _finish(scenario, params, positions, rho, beta, 1, True, (record,))

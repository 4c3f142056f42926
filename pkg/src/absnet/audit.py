"""Independent constraint checker for finished solutions.

Re-derives every serving rule from the scenario, the channel model, and the
raw solution arrays, without trusting any cached field: one server per user,
per-BS band budgets, rate satisfaction from the recorded link powers, delay
placement, LoS coverage, backhaul capacity at the final positions, and the
altitude box. Serving ABS links are evaluated at the main-lobe gain; whether
a user actually sits inside the serving cone is the LoS rule's own check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import (ChannelParams, backhaul_capacity, elevation_angles,
                      min_elevation, p_los, path_loss_linear, slant_distances)

RATE_REL_TOL = 1e-9
BAND_TOL = 1e-9
LOS_TOL = 1e-4
BACKHAUL_REL_TOL = 1e-5
ALTITUDE_TOL = 1e-9
POWER_REL_TOL = 1e-9


@dataclass(frozen=True)
class AuditReport:
    ok: bool
    violations: tuple
    margins: dict  # rule name -> smallest slack encountered (negative = broken)

    def __str__(self) -> str:  # pragma: no cover - debugging aid
        if self.ok:
            return "audit: all constraints hold"
        return "audit: " + "; ".join(self.violations)


def _achieved_rate(power: float, gain: float, loss: float, beta: float,
                   params: ChannelParams) -> float:
    band = params.access_bandwidth * beta
    snr = power * gain / (loss * params.effective_noise_density * band)
    return band * math.log2(1.0 + snr)


def check_solution(scenario, solution, params: ChannelParams) -> AuditReport:
    """Verify a solution against every serving constraint of the model."""
    geometry = min_elevation(params)
    rho = np.asarray(solution.rho, dtype=bool)
    beta = np.asarray(solution.beta, dtype=float)
    powers = np.asarray(solution.link_powers, dtype=float)
    positions = np.asarray(solution.abs_positions, dtype=float).reshape(-1, 3)
    user_pos = scenario.user_positions()
    rates = scenario.rate_demands()
    delay = scenario.delay_flags()
    cache = scenario.cache_association
    mbs = np.asarray(scenario.mbs_position, dtype=float)
    n_users = scenario.n_users
    n_abs = scenario.abs_count

    violations: list[str] = []
    margins: dict[str, float] = {}

    def record(rule: str, slack: float, message: str | None = None) -> None:
        margins[rule] = min(margins.get(rule, math.inf), slack)
        if slack < 0.0 and message:
            violations.append(message)

    if rho.shape != (n_users, n_abs + 1):
        return AuditReport(False, (f"rho has shape {rho.shape}, expected "
                                   f"{(n_users, n_abs + 1)}",), {})

    # one serving BS per user
    for i in range(n_users):
        row = int(rho[i].sum())
        record("single_server", float(1 - abs(row - 1)),
               f"user {i} has {row} serving BSs")

    # per-BS band budget
    for col in range(n_abs + 1):
        used = float(beta[rho[:, col], col].sum())
        record("band_budget", 1.0 + BAND_TOL - used,
               f"BS column {col} allocates {used:.12f} of its band")

    # recorded powers meet every served rate
    for i in range(n_users):
        col = int(np.argmax(rho[i]))
        if not rho[i, col]:
            continue
        frac = float(beta[i, col])
        if frac <= 0.0:
            record("rate", -1.0, f"user {i} served with zero bandwidth")
            continue
        if col == 0:
            d = max(math.hypot(user_pos[i, 0] - mbs[0],
                               user_pos[i, 1] - mbs[1]), 1e-12)
            loss = float(path_loss_linear("mbs_user", d, params))
            gain = 1.0
        else:
            d = float(slant_distances(positions[col - 1],
                                      user_pos[i:i + 1])[0])
            loss = float(path_loss_linear("abs_los", d, params))
            gain = geometry.g0
        achieved = _achieved_rate(float(powers[i, col]), gain, loss, frac,
                                  params)
        record("rate", achieved - rates[i] * (1.0 - RATE_REL_TOL),
               f"user {i} achieves {achieved:.3f} b/s of {rates[i]:.3f}")

    # delay-sensitive users sit on a BS holding their content
    for i in np.flatnonzero(delay):
        col = int(np.argmax(rho[i]))
        record("delay", 1.0 if cache[i, col] else -1.0,
               f"delay-sensitive user {i} served without a cache copy")

    # LoS coverage of every served ABS link
    for j in range(n_abs):
        served = np.flatnonzero(rho[:, j + 1])
        if served.size == 0:
            continue
        elev = elevation_angles(positions[j], user_pos[served])
        probs = p_los(elev, params)
        for idx, i in enumerate(served):
            record("los", float(probs[idx]) - (params.los_threshold - LOS_TOL),
                   f"user {i} on ABS {j} has LoS probability "
                   f"{float(probs[idx]):.6f}")

    # backhaul capacity at the final positions
    for j in range(n_abs):
        served = rho[:, j + 1]
        demand = float((rates * served * ~cache[:, j + 1]).sum())
        d_hub = math.sqrt(float(((positions[j, :2] - mbs) ** 2).sum())
                          + positions[j, 2] ** 2)
        cap = backhaul_capacity(d_hub, n_abs, params)
        record("backhaul", cap * (1.0 + BACKHAUL_REL_TOL) - demand,
               f"ABS {j} draws {demand:.3f} b/s of {cap:.3f}")

    # altitude box
    for j in range(n_abs):
        z = float(positions[j, 2])
        record("altitude", min(z - params.z_min, params.z_max - z)
               + ALTITUDE_TOL, f"ABS {j} altitude {z:.3f} out of bounds")

    # bookkeeping fields match the raw arrays
    total = float(powers[rho].sum()) if n_users else 0.0
    record("bookkeeping",
           POWER_REL_TOL * (1.0 + abs(total))
           - abs(total - solution.total_power),
           f"total_power field {solution.total_power} != {total}")
    abs_total = float(powers[:, 1:][rho[:, 1:]].sum()) if n_users else 0.0
    record("bookkeeping",
           POWER_REL_TOL * (1.0 + abs(abs_total))
           - abs(abs_total - solution.abs_total_power),
           f"abs_total_power field {solution.abs_total_power} != {abs_total}")
    for j in range(n_abs):
        demand = float((rates * rho[:, j + 1] * ~cache[:, j + 1]).sum())
        recorded = float(solution.backhaul_usage[j])
        record("bookkeeping",
               POWER_REL_TOL * (1.0 + demand) - abs(demand - recorded),
               f"backhaul_usage[{j}] field {recorded} != {demand}")

    return AuditReport(not violations, tuple(violations), margins)

"""Single-ABS 3D placement under coverage and backhaul footprints.

At a fixed association and bandwidth split, the transmit power of one ABS is a
positive quadratic in its position xi = (x, y, z), and every side condition
(per-user coverage cone, backhaul ball, altitude limits) is quadratic as well.
The solve path is: lift to a 4x4 semidefinite relaxation for a certified lower
bound, recover candidates by Gaussian randomization, then run an exact
coordinate-descent polish that is monotone and feasibility-preserving.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .sdp_kernel import (
    INFEASIBLE,
    OPTIMAL,
    SdpConstraint,
    SdpProblem,
    SolveStatus,
    solve_sdp,
)

FEAS_TOL = 1e-6          # on per-constraint normalized violations
DEFAULT_SAMPLES = 100    # Gaussian randomization draws
MAX_SWEEPS = 200


@dataclass(frozen=True)
class QcqpConstraint:
    """One quadratic side condition 0.5 xi'G xi + q'xi + n <= 0."""

    g: np.ndarray
    q: np.ndarray
    n: float
    label: str = ""


@dataclass
class QcqpInstance:
    """min 0.5 xi'G0 xi + q0'xi + n0 subject to quadratic constraints and
    z_bounds[0] <= z <= z_bounds[1]."""

    g0: np.ndarray
    q0: np.ndarray
    n0: float
    constraints: list
    z_bounds: tuple[float, float]

    def __post_init__(self) -> None:
        self.g0 = np.asarray(self.g0, dtype=float).reshape(3, 3)
        self.q0 = np.asarray(self.q0, dtype=float).reshape(3)
        self.n0 = float(self.n0)
        lo, hi = self.z_bounds
        if not (0.0 <= lo <= hi):
            raise ValueError("z bounds must satisfy 0 <= z_min <= z_max")
        checked = []
        for con in self.constraints:
            g = np.asarray(con.g, dtype=float).reshape(3, 3)
            q = np.asarray(con.q, dtype=float).reshape(3)
            checked.append(QcqpConstraint(0.5 * (g + g.T), q, float(con.n), con.label))
        self.constraints = checked

    def objective(self, xi) -> float:
        xi = np.asarray(xi, dtype=float)
        return float(0.5 * xi @ self.g0 @ xi + self.q0 @ xi + self.n0)

    def normalizers(self) -> np.ndarray:
        """Per-constraint magnitude scale used for violation measurements."""
        scales = []
        for con in self.constraints:
            scales.append(max(np.max(np.abs(con.g)), np.max(np.abs(con.q)),
                              abs(con.n), 1e-30))
        return np.asarray(scales)

    def violations(self, xi) -> np.ndarray:
        """Normalized constraint values; positive entries are violations."""
        xi = np.asarray(xi, dtype=float)
        raw = np.array([0.5 * xi @ con.g @ xi + con.q @ xi + con.n
                        for con in self.constraints])
        return raw / self.normalizers() if len(raw) else raw

    def max_violation(self, xi) -> float:
        v = self.violations(xi)
        return float(np.max(v)) if v.size else 0.0

    def is_feasible(self, xi, tol: float = FEAS_TOL) -> bool:
        lo, hi = self.z_bounds
        z = float(np.asarray(xi, dtype=float)[2])
        return self.max_violation(xi) <= tol and lo - 1e-9 <= z <= hi + 1e-9


def build_qcqp(user_positions, power_coefficients, v_constant: float,
               mbs_position, backhaul_load: float, backhaul_budget: float,
               z_bounds) -> QcqpInstance:
    """Assemble the placement problem of one ABS.

    user_positions (n, 2) and power_coefficients (n,) describe the served
    users; the required transmit power is sum_i A_i * d_i^2. v_constant is the
    negative cone constant of the coverage condition. backhaul_load is the
    equivalent-load factor L >= 0 and backhaul_budget the matching ball
    radius-squared budget D, giving L * |xi - mbs|^2 <= D; a zero load drops
    the ball entirely.
    """
    pos = np.asarray(user_positions, dtype=float).reshape(-1, 2)
    coeffs = np.asarray(power_coefficients, dtype=float).reshape(-1)
    if len(pos) != len(coeffs):
        raise ValueError("one power coefficient is needed per user")
    if len(pos) == 0:
        raise ValueError("placement needs at least one served user")
    if np.any(coeffs < 0):
        raise ValueError("power coefficients must be non-negative")
    if v_constant >= 0:
        raise ValueError("the coverage cone constant must be negative")
    if backhaul_load < 0:
        raise ValueError("backhaul load must be non-negative")

    total = float(coeffs.sum())
    g0 = 2.0 * total * np.eye(3)
    q0 = np.array([-2.0 * float(coeffs @ pos[:, 0]),
                   -2.0 * float(coeffs @ pos[:, 1]), 0.0])
    n0 = float(coeffs @ (pos[:, 0] ** 2 + pos[:, 1] ** 2))

    cons = []
    for k, (x_i, y_i) in enumerate(pos):
        cons.append(QcqpConstraint(
            g=np.diag([2.0, 2.0, 2.0 * v_constant]),
            q=np.array([-2.0 * x_i, -2.0 * y_i, 0.0]),
            n=float(x_i * x_i + y_i * y_i),
            label=f"coverage[{k}]",
        ))
    if backhaul_load > 0.0:
        x0, y0 = float(mbs_position[0]), float(mbs_position[1])
        cons.append(QcqpConstraint(
            g=2.0 * backhaul_load * np.eye(3),
            q=np.array([-2.0 * backhaul_load * x0, -2.0 * backhaul_load * y0, 0.0]),
            n=float(backhaul_load * (x0 * x0 + y0 * y0) - backhaul_budget),
            label="backhaul",
        ))
    return QcqpInstance(g0=g0, q0=q0, n0=n0, constraints=cons,
                        z_bounds=(float(z_bounds[0]), float(z_bounds[1])))


@dataclass
class PlacementResult:
    position: np.ndarray
    objective: float
    feasible: bool
    lower_bound: float          # nan when the relaxation did not solve
    max_violation: float
    sdp_status: SolveStatus | None = None
    candidates_tried: int = 0


def _lift_matrix(g: np.ndarray, q: np.ndarray) -> np.ndarray:
    c = np.zeros((4, 4))
    c[:3, :3] = 0.5 * g
    c[:3, 3] = 0.5 * q
    c[3, :3] = 0.5 * q
    return c


def sdr_suggest(instance: QcqpInstance, rng, n_samples: int = DEFAULT_SAMPLES,
                scale_hint: float | None = None):
    """Semidefinite relaxation of the lifted placement problem.

    Returns (candidate_positions, lower_bound, status). Candidate positions
    (k, 3) come from the relaxation mean and Gaussian randomization around it,
    already clamped to the altitude box; the lower bound is valid for the
    original problem whenever the status is optimal.
    """
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    if scale_hint is None:
        extents = [np.max(np.abs(con.q)) / max(np.max(np.abs(con.g)), 1e-30)
                   for con in instance.constraints]
        scale_hint = max(max(extents, default=1.0), instance.z_bounds[1], 1.0)
    s = float(scale_hint)

    obj_g = instance.g0 * s * s
    obj_q = instance.q0 * s
    w = max(np.max(np.abs(obj_g)), np.max(np.abs(obj_q)), 1e-30)

    constraints = [SdpConstraint(a=_basis_e33(), b=1.0, sense="==")]
    for con in instance.constraints:
        g = con.g * s * s
        q = con.q * s
        m = max(np.max(np.abs(g)), np.max(np.abs(q)), abs(con.n), 1e-30)
        constraints.append(SdpConstraint(a=_lift_matrix(g / m, q / m), b=-con.n / m))
    lo, hi = instance.z_bounds
    e_z = np.zeros(3)
    e_z[2] = 1.0
    constraints.append(SdpConstraint(a=_lift_matrix(np.zeros((3, 3)), e_z), b=hi / s))
    constraints.append(SdpConstraint(a=_lift_matrix(np.zeros((3, 3)), -e_z), b=-lo / s))

    problem = SdpProblem(n=4, c=_lift_matrix(obj_g / w, obj_q / w), constraints=constraints)
    z, obj, status = solve_sdp(problem, tol=1e-8)
    if status.kind != OPTIMAL:
        return np.empty((0, 3)), math.nan, status

    # the dual value is the certified side of the relaxation optimum; the
    # primal iterate sits slightly above it and would not be a valid bound
    bound_scaled = status.duals.get("dual_objective", obj)
    lower_bound = w * min(obj, bound_scaled) + instance.n0
    mean = z[:3, 3].copy()
    cov = z[:3, :3] - np.outer(mean, mean)
    eigvals, eigvecs = np.linalg.eigh(0.5 * (cov + cov.T))
    root = eigvecs * np.sqrt(np.clip(eigvals, 0.0, None))
    draws = rng.standard_normal(size=(n_samples, 3)) @ root.T + mean
    candidates = np.vstack([mean[None, :], draws]) * s
    candidates[:, 2] = np.clip(candidates[:, 2], lo, hi)
    return candidates, float(lower_bound), status


def _basis_e33() -> np.ndarray:
    a = np.zeros((4, 4))
    a[3, 3] = 1.0
    return a


def _coordinate_quadratics(instance: QcqpInstance, xi: np.ndarray, k: int):
    """Per-constraint (a, b, c) with v_t(u) = a u^2 + b u + c along coordinate k."""
    rows = []
    for con in instance.constraints:
        a = 0.5 * con.g[k, k]
        b = con.q[k] + float(con.g[k] @ xi) - con.g[k, k] * xi[k]
        v_cur = 0.5 * xi @ con.g @ xi + con.q @ xi + con.n
        c = v_cur - a * xi[k] * xi[k] - b * xi[k]
        rows.append((a, b, c))
    return rows


def _objective_quadratic(instance: QcqpInstance, xi: np.ndarray, k: int):
    a = 0.5 * instance.g0[k, k]
    b = instance.q0[k] + float(instance.g0[k] @ xi) - instance.g0[k, k] * xi[k]
    return a, b


def _phase1_coordinate(instance: QcqpInstance, xi: np.ndarray, k: int,
                       norms: np.ndarray) -> float:
    """Exact minimizer of the max normalized violation along coordinate k."""
    rows = _coordinate_quadratics(instance, xi, k)
    scaled = [(a / m, b / m, c / m) for (a, b, c), m in zip(rows, norms)]
    candidates = [xi[k]]
    if k == 2:
        candidates.extend(instance.z_bounds)
    for a, b, c in scaled:
        if a > 1e-30:
            candidates.append(-b / (2.0 * a))
    for i in range(len(scaled)):
        for j in range(i + 1, len(scaled)):
            da = scaled[i][0] - scaled[j][0]
            db = scaled[i][1] - scaled[j][1]
            dc = scaled[i][2] - scaled[j][2]
            if abs(da) < 1e-30:
                if abs(db) > 1e-30:
                    candidates.append(-dc / db)
                continue
            disc = db * db - 4.0 * da * dc
            if disc >= 0.0:
                r = math.sqrt(disc)
                candidates.append((-db - r) / (2.0 * da))
                candidates.append((-db + r) / (2.0 * da))
    lo, hi = instance.z_bounds
    best_u, best_val = xi[k], math.inf
    for u in candidates:
        if not math.isfinite(u):
            continue
        if k == 2:
            u = min(max(u, lo), hi)
        val = max(a * u * u + b * u + c for a, b, c in scaled)
        if val < best_val - 1e-15 or (val <= best_val and abs(u - xi[k]) < abs(best_u - xi[k])):
            best_u, best_val = u, val
    return best_u


def _phase2_coordinate(instance: QcqpInstance, xi: np.ndarray, k: int) -> float:
    """Objective minimizer along coordinate k within the feasible interval."""
    rows = _coordinate_quadratics(instance, xi, k)
    lo = -math.inf
    hi = math.inf
    u_cur = xi[k]
    if k == 2:
        lo, hi = instance.z_bounds
    for a, b, c in rows:
        if abs(a) < 1e-30:
            if abs(b) < 1e-30:
                continue   # constant along this coordinate
            bound = -c / b
            if b > 0:
                hi = min(hi, bound)
            else:
                lo = max(lo, bound)
            continue
        disc = b * b - 4.0 * a * c
        if a > 0:
            if disc < 0.0:
                return u_cur   # numerically empty; stay put
            r = math.sqrt(disc)
            lo = max(lo, (-b - r) / (2.0 * a))
            hi = min(hi, (-b + r) / (2.0 * a))
        else:
            if disc < 0.0:
                continue       # concave and always satisfied
            r = math.sqrt(disc)
            r1 = (-b + r) / (2.0 * a)   # left root (a < 0)
            r2 = (-b - r) / (2.0 * a)
            # satisfied outside (r1, r2); keep the side holding the current point
            if u_cur <= 0.5 * (r1 + r2):
                hi = min(hi, r1)
            else:
                lo = max(lo, r2)
    if lo > hi:
        return u_cur
    a0, b0 = _objective_quadratic(instance, xi, k)
    if a0 > 1e-30:
        target = -b0 / (2.0 * a0)
    else:
        target = lo if b0 > 0 else hi
    if not math.isfinite(target):
        target = u_cur
    return min(max(target, lo), hi)


def improve(instance: QcqpInstance, start, max_sweeps: int = MAX_SWEEPS,
            tol: float = 1e-6):
    """Two-phase exact coordinate descent from a starting position.

    Phase one reduces the worst normalized violation until the point is
    feasible; phase two descends the objective while staying feasible. Returns
    (position, objective, feasible flag, max violation).
    """
    xi = np.asarray(start, dtype=float).copy().reshape(3)
    lo, hi = instance.z_bounds
    xi[2] = min(max(xi[2], lo), hi)
    norms = instance.normalizers()

    if instance.constraints:
        worst = instance.max_violation(xi)
        for _ in range(max_sweeps):
            if worst <= FEAS_TOL:
                break
            for k in range(3):
                xi[k] = _phase1_coordinate(instance, xi, k, norms)
            new_worst = instance.max_violation(xi)
            if new_worst >= worst * (1.0 - tol) and new_worst > FEAS_TOL:
                worst = new_worst
                break
            worst = new_worst
        if worst > FEAS_TOL:
            return xi, instance.objective(xi), False, worst

    obj = instance.objective(xi)
    for _ in range(max_sweeps):
        for k in range(3):
            xi[k] = _phase2_coordinate(instance, xi, k)
        new_obj = instance.objective(xi)
        if new_obj >= obj - tol * (1.0 + abs(obj)):
            obj = min(obj, new_obj)
            break
        obj = new_obj
    return xi, instance.objective(xi), True, instance.max_violation(xi)


def place_abs(instance: QcqpInstance, rng, incumbent=None,
              n_samples: int = DEFAULT_SAMPLES) -> PlacementResult:
    """Full placement pipeline: relaxation, randomization, local polish.

    The incumbent position, when given, is always polished too, so the result
    is never worse than a feasible incumbent.
    """
    candidates, lower_bound, status = sdr_suggest(instance, rng, n_samples=n_samples)
    starts = []
    if candidates.shape[0]:
        # feasible samples ranked by power, then infeasible ones by violation
        keys = []
        for cand in candidates:
            violation = instance.max_violation(cand)
            if violation <= FEAS_TOL:
                keys.append((0, instance.objective(cand)))
            else:
                keys.append((1, violation))
        order = sorted(range(len(candidates)), key=lambda idx: keys[idx])
        starts.extend(candidates[idx] for idx in order[:5])
    if incumbent is not None:
        starts.append(np.asarray(incumbent, dtype=float).reshape(3))
    if not starts:
        center = np.array([0.0, 0.0, 0.5 * sum(instance.z_bounds)])
        starts.append(center)

    best = None
    for start in starts:
        xi, obj, feasible, violation = improve(instance, start)
        key = (not feasible, obj if feasible else violation)
        if best is None or key < best[0]:
            best = (key, xi, obj, feasible, violation)
    _, xi, obj, feasible, violation = best
    return PlacementResult(
        position=xi,
        objective=obj,
        feasible=feasible,
        lower_bound=lower_bound,
        max_violation=violation,
        sdp_status=status,
        candidates_tried=len(starts),
    )

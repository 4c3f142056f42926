"""Unit tests for single-ABS placement: QCQP build, relaxation, polish."""

import math

import numpy as np
import pytest

from absnet.channel import ChannelParams, min_elevation
from absnet.placement import (
    QcqpConstraint,
    QcqpInstance,
    build_qcqp,
    improve,
    place_abs,
    sdr_suggest,
)
from absnet.sdp_kernel import INFEASIBLE, OPTIMAL

PARAMS = ChannelParams()
GEO = min_elevation(PARAMS)
Z_BOUNDS = (PARAMS.z_min, PARAMS.z_max)


def _symmetric_pair_instance(spread=100.0, coeff=1.0):
    pos = np.array([[spread, 0.0], [-spread, 0.0]])
    return build_qcqp(pos, [coeff, coeff], GEO.V, (0.0, 0.0), 0.0, 0.0, Z_BOUNDS)


# --------------------------------------------------------------------------
# problem assembly
# --------------------------------------------------------------------------

def test_build_qcqp_objective_coefficients():
    inst = _symmetric_pair_instance()
    assert np.allclose(inst.g0, 4.0 * np.eye(3))
    assert np.allclose(inst.q0, 0.0)
    assert inst.n0 == pytest.approx(2.0e4)
    # two coverage cones, no backhaul ball
    assert len(inst.constraints) == 2
    assert inst.objective([0.0, 0.0, 50.0]) == pytest.approx(25000.0)


def test_build_qcqp_coverage_rows():
    inst = _symmetric_pair_instance()
    cone = inst.constraints[0]
    assert np.allclose(cone.g, np.diag([2.0, 2.0, 2.0 * GEO.V]))
    assert np.allclose(cone.q, [-200.0, 0.0, 0.0])
    assert cone.n == pytest.approx(1.0e4)
    # directly over the user the cone value is V z^2 < 0
    over = np.array([100.0, 0.0, 50.0])
    raw = 0.5 * over @ cone.g @ over + cone.q @ over + cone.n
    assert raw == pytest.approx(GEO.V * 2500.0)


def test_build_qcqp_backhaul_ball():
    pos = np.array([[100.0, 0.0]])
    inst = build_qcqp(pos, [1.0], GEO.V, (10.0, -20.0), 2.0, 100.0, Z_BOUNDS)
    ball = inst.constraints[-1]
    assert ball.label == "backhaul"
    assert np.allclose(ball.g, 4.0 * np.eye(3))
    assert np.allclose(ball.q, [-40.0, 80.0, 0.0])
    assert ball.n == pytest.approx(2.0 * (100.0 + 400.0) - 100.0)
    # the ball constraint evaluates to L*dist^2 - D
    at = np.array([10.0, -20.0, 5.0])
    raw = 0.5 * at @ ball.g @ at + ball.q @ at + ball.n
    assert raw == pytest.approx(2.0 * 25.0 - 100.0)


def test_build_qcqp_validation():
    pos = np.array([[0.0, 0.0]])
    with pytest.raises(ValueError):
        build_qcqp(pos, [1.0, 2.0], GEO.V, (0, 0), 0.0, 0.0, Z_BOUNDS)
    with pytest.raises(ValueError):
        build_qcqp(np.empty((0, 2)), [], GEO.V, (0, 0), 0.0, 0.0, Z_BOUNDS)
    with pytest.raises(ValueError):
        build_qcqp(pos, [1.0], 0.5, (0, 0), 0.0, 0.0, Z_BOUNDS)
    with pytest.raises(ValueError):
        build_qcqp(pos, [-1.0], GEO.V, (0, 0), 0.0, 0.0, Z_BOUNDS)


# --------------------------------------------------------------------------
# known optima
# --------------------------------------------------------------------------

def test_symmetric_pair_lands_between_users():
    inst = _symmetric_pair_instance()
    result = place_abs(inst, rng=0)
    assert result.feasible
    x, y, z = result.position
    assert abs(x) <= 1.0 and abs(y) <= 1.0
    # the altitude settles where both coverage cones become tight
    z_star = 100.0 / math.sqrt(-GEO.V)
    assert z_star == pytest.approx(76.69161164716519, rel=1e-12)
    assert z == pytest.approx(z_star, rel=0.01)
    expected = 2.0 * (100.0**2 + z_star**2)
    assert result.objective == pytest.approx(expected, rel=0.01)


def test_single_user_descends_to_floor():
    pos = np.array([[50.0, 50.0]])
    inst = build_qcqp(pos, [1.0], GEO.V, (0.0, 0.0), 0.0, 0.0, Z_BOUNDS)
    result = place_abs(inst, rng=1)
    assert result.feasible
    assert result.position[0] == pytest.approx(50.0, abs=0.5)
    assert result.position[1] == pytest.approx(50.0, abs=0.5)
    assert result.position[2] == pytest.approx(PARAMS.z_min, abs=1e-6)
    assert result.objective == pytest.approx(PARAMS.z_min**2, rel=1e-3)


def test_single_constraint_relaxation_is_tight():
    pos = np.array([[50.0, 50.0]])
    inst = build_qcqp(pos, [1.0], GEO.V, (0.0, 0.0), 0.0, 0.0, Z_BOUNDS)
    result = place_abs(inst, rng=2)
    assert result.feasible
    assert result.lower_bound <= result.objective + 1e-6 * (1.0 + abs(result.objective))
    assert result.objective - result.lower_bound <= 1e-3 * (1.0 + abs(result.objective))


def test_backhaul_ball_pulls_position_toward_hub():
    # one user far from the hub; the ball (3D, altitude included) keeps the
    # ABS within 350 m of the hub while the cone still reaches the user
    pos = np.array([[400.0, 0.0]])
    free = build_qcqp(pos, [1.0], GEO.V, (0.0, 0.0), 0.0, 0.0, Z_BOUNDS)
    tied = build_qcqp(pos, [1.0], GEO.V, (0.0, 0.0), 1.0, 350.0**2, Z_BOUNDS)
    r_free = place_abs(free, rng=3)
    r_tied = place_abs(tied, rng=3)
    assert r_free.feasible and r_tied.feasible
    assert r_free.position[0] == pytest.approx(400.0, abs=1.0)
    dist = np.linalg.norm(r_tied.position)
    assert dist <= 350.0 + 1e-3
    # staying on the ball boundary costs extra power
    assert r_tied.objective > r_free.objective


# --------------------------------------------------------------------------
# improvement behavior
# --------------------------------------------------------------------------

def test_improve_is_monotone_from_feasible_start():
    inst = _symmetric_pair_instance()
    start = np.array([5.0, -3.0, 200.0])
    assert inst.is_feasible(start)
    xi, obj, feasible, violation = improve(inst, start)
    assert feasible
    assert obj <= inst.objective(start) + 1e-9
    assert violation <= 1e-6


def test_improve_recovers_feasibility():
    pos = np.array([[0.0, 0.0]])
    inst = build_qcqp(pos, [1.0], GEO.V, (0.0, 0.0), 0.0, 0.0, Z_BOUNDS)
    start = np.array([900.0, 900.0, 10.0])
    assert not inst.is_feasible(start)
    xi, obj, feasible, violation = improve(inst, start)
    assert feasible
    assert violation <= 1e-6


def test_improve_clamps_altitude_into_box():
    inst = _symmetric_pair_instance()
    xi, _, feasible, _ = improve(inst, np.array([0.0, 0.0, 5000.0]))
    assert feasible
    assert PARAMS.z_min - 1e-9 <= xi[2] <= PARAMS.z_max + 1e-9


def test_infeasible_instance_reported():
    # coverage cone reach at the ceiling is sqrt(-V)*z_max ~ 782 m, while the
    # ball confines the ABS within 10 m of the origin, 1272 m from the user
    pos = np.array([[900.0, 900.0]])
    inst = build_qcqp(pos, [1.0], GEO.V, (0.0, 0.0), 1.0, 100.0, Z_BOUNDS)
    result = place_abs(inst, rng=4)
    assert not result.feasible
    assert math.isnan(result.lower_bound)
    assert result.sdp_status.kind == INFEASIBLE
    assert result.max_violation > 0.0


def test_place_abs_keeps_incumbent_advantage():
    inst = _symmetric_pair_instance()
    incumbent = np.array([0.0, 0.0, 76.7])
    result = place_abs(inst, rng=5, incumbent=incumbent)
    assert result.feasible
    assert result.objective <= inst.objective(incumbent) + 1e-9


def test_place_abs_deterministic():
    inst = _symmetric_pair_instance()
    a = place_abs(inst, rng=11)
    b = place_abs(inst, rng=11)
    assert np.array_equal(a.position, b.position)
    assert a.objective == b.objective


@pytest.mark.parametrize("seed", range(6))
def test_random_instances_sandwich_and_feasible(seed):
    rng = np.random.default_rng(4000 + seed)
    n = int(rng.integers(2, 7))
    pos = rng.uniform(200.0, 800.0, size=(n, 2))
    coeffs = rng.uniform(0.5, 2.0, size=n) * 1e-9
    inst = build_qcqp(pos, coeffs, GEO.V, (500.0, 500.0),
                      float(rng.uniform(0.5, 2.0)), 900.0**2, Z_BOUNDS)
    result = place_abs(inst, rng=seed)
    assert result.feasible
    assert result.max_violation <= 1e-6
    assert result.lower_bound <= result.objective + 1e-6 * (1.0 + abs(result.objective))
    z = result.position[2]
    assert PARAMS.z_min - 1e-9 <= z <= PARAMS.z_max + 1e-9


def test_sdr_suggest_returns_clamped_candidates():
    inst = _symmetric_pair_instance()
    candidates, lower_bound, status = sdr_suggest(inst, rng=9, n_samples=50)
    assert status.kind == OPTIMAL
    assert candidates.shape == (51, 3)
    assert np.all(candidates[:, 2] >= PARAMS.z_min - 1e-12)
    assert np.all(candidates[:, 2] <= PARAMS.z_max + 1e-12)
    assert math.isfinite(lower_bound)


def test_qcqp_violations_normalized():
    inst = QcqpInstance(
        g0=np.eye(3), q0=np.zeros(3), n0=0.0,
        constraints=[QcqpConstraint(g=2.0e6 * np.eye(3), q=np.zeros(3), n=-1.0e6)],
        z_bounds=(0.0, 100.0),
    )
    # at |xi|^2 = 2 the raw violation is 1e6; normalized by the row scale 2e6
    v = inst.violations([1.0, 1.0, 0.0])
    assert v[0] == pytest.approx(0.5)
    assert inst.is_feasible([0.5, 0.5, 0.0])

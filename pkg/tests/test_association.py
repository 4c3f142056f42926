"""Assignment solver tests against enumeration and formula oracles."""

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from absnet.association import (AssociationProblem, build_bilp, lp_bound,
                                solve_bilp)
from absnet.channel import (ChannelParams, backhaul_capacity, min_elevation,
                            power_coefficient)
from absnet.scenario import (GenerationConfig, Scenario, User,
                             generate_scenario, with_cache_capacity)

PARAMS = ChannelParams()
GEO = min_elevation(PARAMS)


def _random_problem(rng, n_users=None, n_abs=None):
    n_users = int(n_users if n_users is not None else rng.integers(1, 8))
    n_abs = int(n_abs if n_abs is not None else rng.integers(1, 3))
    cost = rng.uniform(0.1, 5.0, (n_users, n_abs + 1))
    eligible = rng.random((n_users, n_abs + 1)) < 0.8
    eligible[:, 0] = True
    cost[~eligible] = np.inf
    load = rng.uniform(0.0, 2.0, (n_users, n_abs))
    load *= rng.random((n_users, n_abs)) < 0.7
    cap = rng.uniform(0.5, 3.0, n_abs)
    return AssociationProblem(cost, eligible, load, cap)


def _enumerate_optimum(problem):
    options = [np.flatnonzero(problem.eligible[i])
               for i in range(problem.n_users)]
    best = math.inf
    for choice in itertools.product(*options):
        loads = np.zeros(problem.n_abs)
        total = 0.0
        for i, j in enumerate(choice):
            total += problem.cost[i, j]
            if j >= 1:
                loads[j - 1] += problem.backhaul_load[i, j - 1]
        if np.all(loads <= problem.capacity + 1e-9):
            best = min(best, total)
    return best


def _assert_valid(problem, result):
    rho = result.rho
    assert rho.shape == problem.cost.shape
    assert np.all(rho.sum(axis=1) == 1)
    assert np.all(problem.eligible[rho])
    for j in range(problem.n_abs):
        used = float((problem.backhaul_load[:, j] * rho[:, j + 1]).sum())
        assert used <= problem.capacity[j] + 1e-9
    assert result.objective == pytest.approx(float(problem.cost[rho].sum()),
                                             rel=1e-12, abs=1e-15)


def _scenario(users, abs_count, cache_rows, catalog=4):
    request = np.zeros((len(users), catalog), dtype=bool)
    for i, user in enumerate(users):
        request[i, user.requested_content - 1] = True
    cache = np.asarray(cache_rows, dtype=bool).reshape(abs_count, catalog)
    assoc = np.ones((len(users), abs_count + 1), dtype=bool)
    assoc[:, 1:] = request @ cache.T
    return Scenario(region_side=1000.0, mbs_position=(500.0, 500.0),
                    users=tuple(users), abs_count=abs_count,
                    catalog_size=catalog,
                    cache_capacity=int(cache.sum(axis=1)[0]) if abs_count else 0,
                    cache_matrix=cache, request_matrix=request,
                    cache_association=assoc)


def test_single_user_mbs_only():
    cost = np.array([[0.25, np.inf]])
    eligible = np.array([[True, False]])
    problem = AssociationProblem(cost, eligible, np.zeros((1, 1)), np.ones(1))
    result = solve_bilp(problem)
    assert result.optimal
    assert result.rho.tolist() == [[True, False]]
    assert result.objective == pytest.approx(0.25)


def test_loose_capacity_takes_row_minima():
    rng = np.random.default_rng(7)
    cost = rng.uniform(0.1, 1.0, (6, 3))
    eligible = np.ones((6, 3), dtype=bool)
    load = rng.uniform(0.0, 1.0, (6, 2))
    problem = AssociationProblem(cost, eligible, load, np.full(2, 1e9))
    result = solve_bilp(problem)
    _assert_valid(problem, result)
    assert result.objective == pytest.approx(float(cost.min(axis=1).sum()),
                                             rel=1e-12)


def test_binding_backhaul_splits_users():
    cost = np.array([[1.0, 0.1], [1.0, 0.2]])
    eligible = np.ones((2, 2), dtype=bool)
    load = np.array([[1.0], [1.0]])
    problem = AssociationProblem(cost, eligible, load, np.array([1.0]))
    result = solve_bilp(problem)
    _assert_valid(problem, result)
    # only one user fits on the ABS; the cheaper move keeps user 0 there
    assert result.objective == pytest.approx(1.1)
    assert result.rho.tolist() == [[False, True], [True, False]]


def test_matches_enumeration_on_random_instances():
    rng = np.random.default_rng(42)
    for _ in range(30):
        problem = _random_problem(rng)
        result = solve_bilp(problem)
        assert result.optimal
        _assert_valid(problem, result)
        oracle = _enumerate_optimum(problem)
        assert result.objective == pytest.approx(oracle, rel=1e-8)


def test_never_worse_than_all_mbs():
    rng = np.random.default_rng(3)
    for _ in range(20):
        problem = _random_problem(rng)
        result = solve_bilp(problem)
        assert result.objective <= float(problem.cost[:, 0].sum()) + 1e-12


def test_lp_bound_fully_fixed_equals_cost():
    rng = np.random.default_rng(11)
    problem = _random_problem(rng, n_users=4, n_abs=2)
    result = solve_bilp(problem)
    fixed = {}
    for i in range(problem.n_users):
        for j in range(problem.n_abs + 1):
            if problem.eligible[i, j]:
                fixed[(i, j)] = int(result.rho[i, j])
    assert lp_bound(problem, fixed) == pytest.approx(result.objective, rel=1e-9)


def test_lp_bound_row_minima_when_unconstrained():
    rng = np.random.default_rng(5)
    cost = rng.uniform(0.1, 1.0, (5, 3))
    eligible = np.ones((5, 3), dtype=bool)
    problem = AssociationProblem(cost, eligible, np.zeros((5, 2)), np.ones(2))
    assert lp_bound(problem) == pytest.approx(float(cost.min(axis=1).sum()),
                                              rel=1e-9)


def test_lp_bound_below_enumeration():
    rng = np.random.default_rng(13)
    for _ in range(10):
        problem = _random_problem(rng)
        oracle = _enumerate_optimum(problem)
        assert lp_bound(problem) <= oracle + 1e-8 * (1.0 + abs(oracle))


def test_lp_bound_contradiction_is_infinite():
    problem = AssociationProblem(np.array([[0.5, 0.1]]),
                                 np.array([[True, True]]),
                                 np.zeros((1, 1)), np.ones(1))
    assert lp_bound(problem, {(0, 0): 1, (0, 1): 1}) == math.inf
    ineligible = AssociationProblem(np.array([[0.5, np.inf]]),
                                    np.array([[True, False]]),
                                    np.zeros((1, 1)), np.ones(1))
    assert lp_bound(ineligible, {(0, 1): 1}) == math.inf


def test_node_budget_returns_feasible_incumbent():
    rng = np.random.default_rng(17)
    problem = _random_problem(rng, n_users=6, n_abs=2)
    result = solve_bilp(problem, node_budget=1)
    assert not result.optimal
    assert np.all(result.rho.sum(axis=1) == 1)
    assert np.all(problem.eligible[result.rho])
    load = (result.rho[:, 1:] * problem.backhaul_load).sum(axis=0)
    assert np.all(load <= problem.capacity * (1.0 + 1e-12))
    assert result.objective == pytest.approx(float(problem.cost[result.rho].sum()))
    assert result.objective <= float(problem.cost[:, 0].sum()) + 1e-12


def test_deterministic_output():
    rng1 = np.random.default_rng(23)
    rng2 = np.random.default_rng(23)
    p1 = _random_problem(rng1, n_users=7, n_abs=2)
    p2 = _random_problem(rng2, n_users=7, n_abs=2)
    r1, r2 = solve_bilp(p1), solve_bilp(p2)
    assert np.array_equal(r1.rho, r2.rho)
    assert r1.objective == r2.objective
    assert r1.nodes == r2.nodes


@settings(deadline=None, max_examples=25)
@given(st.integers(0, 10_000))
def test_random_instances_match_enumeration(seed):
    rng = np.random.default_rng(seed)
    problem = _random_problem(rng, n_users=int(rng.integers(1, 6)),
                              n_abs=int(rng.integers(1, 3)))
    result = solve_bilp(problem)
    _assert_valid(problem, result)
    assert result.objective == pytest.approx(_enumerate_optimum(problem),
                                             rel=1e-8)


def test_build_single_user_overhead_abs():
    user = User(position=(0.0, 0.0), rate_demand=5e6,
                delay_sensitive=False, requested_content=1)
    scenario = _scenario([user], 1, [[1, 0, 0, 0]])
    positions = np.array([[0.0, 0.0, 100.0]])
    problem = build_bilp(scenario, positions, PARAMS)
    assert problem.eligible.tolist() == [[True, True]]
    a_coef = power_coefficient(5e6, "abs", 1.0, GEO.g0, PARAMS, los=True)
    assert problem.cost[0, 1] == pytest.approx(a_coef * 100.0 ** 2, rel=1e-12)
    d_mbs = math.hypot(500.0, 500.0)
    mbs_cost = power_coefficient(5e6, "mbs", 1.0, 1.0, PARAMS, distance=d_mbs)
    assert problem.cost[0, 0] == pytest.approx(mbs_cost, rel=1e-12)


def test_build_masks_user_outside_cone():
    user = User(position=(0.0, 0.0), rate_demand=5e6,
                delay_sensitive=False, requested_content=1)
    scenario = _scenario([user], 1, [[1, 0, 0, 0]])
    # horizontal reach at z=100 is sqrt(-V)*z, about 130 m
    positions = np.array([[200.0, 0.0, 100.0]])
    problem = build_bilp(scenario, positions, PARAMS)
    assert problem.eligible.tolist() == [[True, False]]
    assert math.isinf(problem.cost[0, 1])


def test_build_masks_delay_sensitive_without_cache():
    sensitive = User(position=(0.0, 0.0), rate_demand=5e6,
                     delay_sensitive=True, requested_content=2)
    relaxed = User(position=(0.0, 0.0), rate_demand=5e6,
                   delay_sensitive=False, requested_content=2)
    scenario = _scenario([sensitive, relaxed], 1, [[1, 0, 0, 0]])
    positions = np.array([[0.0, 0.0, 100.0]])
    problem = build_bilp(scenario, positions, PARAMS)
    assert problem.eligible.tolist() == [[True, False], [True, True]]


def test_build_equal_share_counts_cone_membership():
    # two users under the ABS share the band; the far user is outside
    users = [User(position=(0.0, 0.0), rate_demand=5e6,
                  delay_sensitive=False, requested_content=1),
             User(position=(50.0, 0.0), rate_demand=5e6,
                  delay_sensitive=False, requested_content=1),
             User(position=(900.0, 900.0), rate_demand=5e6,
                  delay_sensitive=False, requested_content=1)]
    scenario = _scenario(users, 1, [[1, 0, 0, 0]])
    positions = np.array([[0.0, 0.0, 100.0]])
    problem = build_bilp(scenario, positions, PARAMS)
    assert problem.eligible[:, 1].tolist() == [True, True, False]
    a_coef = power_coefficient(5e6, "abs", 0.5, GEO.g0, PARAMS, los=True)
    assert problem.cost[0, 1] == pytest.approx(a_coef * 100.0 ** 2, rel=1e-12)
    d1 = math.sqrt(50.0 ** 2 + 100.0 ** 2)
    assert problem.cost[1, 1] == pytest.approx(a_coef * d1 ** 2, rel=1e-12)


def test_build_backhaul_loads_and_capacity():
    users = [User(position=(400.0, 500.0), rate_demand=4e6,
                  delay_sensitive=False, requested_content=1),
             User(position=(600.0, 500.0), rate_demand=6e6,
                  delay_sensitive=False, requested_content=3)]
    scenario = _scenario(users, 2, [[1, 0, 0, 0], [0, 0, 1, 0]])
    positions = np.array([[400.0, 500.0, 120.0], [600.0, 500.0, 150.0]])
    problem = build_bilp(scenario, positions, PARAMS)
    # cached content draws nothing from the backhaul
    assert problem.backhaul_load[0, 0] == 0.0
    assert problem.backhaul_load[0, 1] == pytest.approx(4e6)
    assert problem.backhaul_load[1, 0] == pytest.approx(6e6)
    assert problem.backhaul_load[1, 1] == 0.0
    d0 = math.sqrt(100.0 ** 2 + 120.0 ** 2)
    d1 = math.sqrt(100.0 ** 2 + 150.0 ** 2)
    assert problem.capacity[0] == pytest.approx(
        backhaul_capacity(d0, 2, PARAMS), rel=1e-12)
    assert problem.capacity[1] == pytest.approx(
        backhaul_capacity(d1, 2, PARAMS), rel=1e-12)


def test_build_user_at_mbs_position_has_finite_cost():
    user = User(position=(500.0, 500.0), rate_demand=5e6,
                delay_sensitive=False, requested_content=1)
    scenario = _scenario([user], 1, [[1, 0, 0, 0]])
    problem = build_bilp(scenario, np.array([[0.0, 0.0, 100.0]]), PARAMS)
    assert np.isfinite(problem.cost[0, 0])
    assert problem.cost[0, 0] > 0.0


def test_larger_caches_never_raise_objective():
    config = GenerationConfig(n_users=25, abs_count=2, cache_capacity=2)
    positions = np.array([[300.0, 300.0, 150.0], [700.0, 700.0, 150.0]])
    for seed in (0, 1, 2):
        scenario = generate_scenario(config, seed)
        bigger = with_cache_capacity(scenario, 5)
        obj_small = solve_bilp(build_bilp(scenario, positions, PARAMS)).objective
        obj_big = solve_bilp(build_bilp(bigger, positions, PARAMS)).objective
        assert obj_big <= obj_small + 1e-12


def test_no_abs_scenario_everything_on_mbs():
    user = User(position=(100.0, 100.0), rate_demand=5e6,
                delay_sensitive=False, requested_content=1)
    scenario = _scenario([user], 0, np.zeros((0, 4)))
    problem = build_bilp(scenario, np.zeros((0, 3)), PARAMS)
    result = solve_bilp(problem)
    assert result.optimal
    assert result.rho.tolist() == [[True]]

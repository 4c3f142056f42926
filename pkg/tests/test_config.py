"""Strict-schema config loading, defaults, and round-trip tests."""

import json

import numpy as np
import pytest

from absnet.channel import ChannelParams
from absnet.config import (AppConfig, ConfigError, config_dict, load_config,
                           parse_config, save_config)
from absnet.evaluation import ExperimentConfig, InterferenceMode
from absnet.orchestrator import SolverConfig
from absnet.scenario import (GenerationConfig, PointProcessConfig, Scenario,
                             User, save_scenario)


def test_empty_config_gives_reference_defaults():
    config = parse_config({})
    assert config == AppConfig()
    assert config.generation.n_users == 70
    assert config.generation.abs_count == 3
    assert config.generation.catalog_size == 10
    assert config.generation.cache_capacity == 2
    assert config.generation.zipf_alpha == 0.8
    assert config.channel.access_bandwidth == 4e7
    assert config.channel.backhaul_bandwidth == 4e8
    assert config.channel.mbs_backhaul_power == 10.0
    assert config.channel.los_threshold == 0.9
    assert config.scenario is None


def test_empty_file_equals_empty_object(tmp_path):
    path = tmp_path / "empty.json"
    path.write_text("")
    assert load_config(str(path)) == AppConfig()


def test_round_trip_identity(tmp_path):
    generation = GenerationConfig(
        n_users=24, abs_count=2, catalog_size=8, cache_capacity=3,
        zipf_alpha=1.1, delay_fraction=0.25, rate_choices=(2e6, 4e6),
        point_process=PointProcessConfig(kind="matern", cluster_radius=90.0),
        cov_target=2.0, cov_window=0.2, max_rejections=100)
    channel = ChannelParams(access_bandwidth=2e7, backhaul_bandwidth=2e8,
                            z_max=450.0)
    solver = SolverConfig(epsilon=1e-4, max_outer_iterations=30, seed=11,
                          infeasibility_policy="min_violation")
    experiment = ExperimentConfig(
        run_count=4, base_seed=7, user_counts=(10, 20),
        cov_targets=(None, 2.0), cache_capacities=(0, 3),
        delay_fractions=(0.1, 0.9), backhaul_bandwidths=(2e8,),
        access_bandwidths=(2e7,), generation=generation, channel=channel,
        solver=solver, include_baseline=False,
        interference=InterferenceMode("user_to_user", antenna="omni",
                                      pairing="sum", tx_power=0.05),
        workers=2)
    config = AppConfig(generation=generation, channel=channel, solver=solver,
                       experiment=experiment)
    path = tmp_path / "full.json"
    save_config(config, str(path))
    assert load_config(str(path)) == config


def test_unknown_keys_rejected_with_path():
    with pytest.raises(ConfigError, match="config.chanel"):
        parse_config({"chanel": {}})
    with pytest.raises(ConfigError, match="channel.bandwith"):
        parse_config({"channel": {"bandwith": 1.0}})
    with pytest.raises(ConfigError, match="experiment.generation"):
        parse_config({"experiment": {"generation": {}}})
    with pytest.raises(ConfigError,
                       match="generation.point_process.radius"):
        parse_config({"generation": {"point_process": {"radius": 2.0}}})


def test_invalid_values_carry_section_path():
    with pytest.raises(ConfigError, match="channel"):
        parse_config({"channel": {"access_bandwidth": -1.0}})
    with pytest.raises(ConfigError, match="solver"):
        parse_config({"solver": {"infeasibility_policy": "panic"}})
    with pytest.raises(ConfigError, match="experiment"):
        parse_config({"experiment": {"run_count": 0}})
    with pytest.raises(ConfigError, match="generation"):
        parse_config({"generation": {"delay_fraction": 1.5}})


def test_type_mismatches_rejected():
    with pytest.raises(ConfigError, match="solver.n_samples"):
        parse_config({"solver": {"n_samples": 2.5}})
    with pytest.raises(ConfigError, match="generation.rate_choices"):
        parse_config({"generation": {"rate_choices": "fast"}})
    with pytest.raises(ConfigError, match="experiment.include_baseline"):
        parse_config({"experiment": {"include_baseline": "yes"}})
    with pytest.raises(ConfigError, match="channel.fc"):
        parse_config({"channel": {"fc": None}})


def _tiny_scenario():
    users = (
        User(position=(250.0, 250.0), rate_demand=5e6,
             delay_sensitive=False, requested_content=1),
        User(position=(750.0, 250.0), rate_demand=5e6,
             delay_sensitive=False, requested_content=1),
        User(position=(250.0, 750.0), rate_demand=5e6,
             delay_sensitive=False, requested_content=1),
        User(position=(750.0, 750.0), rate_demand=5e6,
             delay_sensitive=False, requested_content=2),
    )
    request = np.zeros((4, 4), dtype=bool)
    for i, user in enumerate(users):
        request[i, user.requested_content - 1] = True
    cache = np.zeros((1, 4), dtype=bool)
    cache[0, :2] = True
    assoc = np.ones((4, 2), dtype=bool)
    assoc[:, 1:] = request @ cache.T
    return Scenario(region_side=1000.0, mbs_position=(500.0, 500.0),
                    users=users, abs_count=1, catalog_size=4,
                    cache_capacity=2, cache_matrix=cache,
                    request_matrix=request, cache_association=assoc)


def test_scenario_file_resolves_relative_to_config(tmp_path):
    save_scenario(_tiny_scenario(), str(tmp_path / "layout.rec"))
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"scenario_file": "layout.rec"}))
    config = load_config(str(path))
    assert config.scenario is not None
    assert config.scenario.n_users == 4
    assert config.scenario_file == "layout.rec"


def test_scenario_file_conflicts_with_generation(tmp_path):
    save_scenario(_tiny_scenario(), str(tmp_path / "layout.rec"))
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"scenario_file": "layout.rec",
                                "generation": {"n_users": 5}}))
    with pytest.raises(ConfigError, match="scenario_file"):
        load_config(str(path))


def test_missing_scenario_file_is_config_error(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"scenario_file": "absent.rec"}))
    with pytest.raises(ConfigError, match="scenario_file"):
        load_config(str(path))


def test_malformed_json_is_config_error(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text("{not json")
    with pytest.raises(ConfigError, match="not valid JSON"):
        load_config(str(path))


def test_missing_file_is_config_error(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(str(tmp_path / "nope.json"))


def test_config_dict_omits_generation_for_scenario_file(tmp_path):
    save_scenario(_tiny_scenario(), str(tmp_path / "layout.rec"))
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"scenario_file": "layout.rec"}))
    config = load_config(str(path))
    data = config_dict(config)
    assert "generation" not in data
    assert data["scenario_file"] == "layout.rec"

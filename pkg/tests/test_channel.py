"""Unit tests for the radio model: geometry, path loss, link budgets."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from absnet.channel import (
    ChannelParams,
    antenna_gain,
    backhaul_capacity,
    elevation_angle,
    elevation_angles,
    min_elevation,
    p_los,
    path_loss_linear,
    power_coefficient,
    slant_distances,
)

PARAMS = ChannelParams()
GEO = min_elevation(PARAMS)


# --------------------------------------------------------------------------
# frozen reference values
# --------------------------------------------------------------------------

def test_min_elevation_constants():
    assert GEO.b == pytest.approx(0.6542398117374623, rel=1e-12)
    assert math.degrees(GEO.b) == pytest.approx(37.48518, abs=1e-4)
    assert GEO.V == pytest.approx(-1.700216674768479, rel=1e-12)
    assert GEO.theta_b == pytest.approx(1.8331130301148686, rel=1e-12)
    assert GEO.g0 == pytest.approx(2.7195528370419257, rel=1e-12)


def test_p_los_reference_points():
    # at an elevation of kappa degrees the curve passes through 1/(1+kappa)
    assert p_los(math.radians(PARAMS.kappa), PARAMS) == pytest.approx(1.0 / (1.0 + PARAMS.kappa), rel=1e-12)
    assert p_los(GEO.b, PARAMS) == pytest.approx(0.9, abs=1e-12)
    assert p_los(math.pi / 2.0, PARAMS) == pytest.approx(0.999975074537903, rel=1e-12)
    assert p_los(0.65397, PARAMS) == pytest.approx(0.8997771689858926, rel=1e-12)


def test_air_to_ground_path_loss_value():
    # 2 GHz free-space loss at 100 m is 78.46 dB; the LoS excess adds 1 dB
    h = path_loss_linear("abs_los", 100.0, PARAMS)
    assert 10.0 * math.log10(h) == pytest.approx(78.46237209932829 + 1.0, abs=1e-9)
    assert h == pytest.approx(88356236.6925294, rel=1e-12)
    h_nlos = path_loss_linear("abs_nlos", 100.0, PARAMS)
    assert h_nlos / h == pytest.approx(10.0 ** (19.0 / 10.0), rel=1e-12)


def test_terrestrial_path_loss_values():
    assert path_loss_linear("mbs_user", 10.0, PARAMS) == pytest.approx(190546.07179632442, rel=1e-12)
    assert path_loss_linear("backhaul", 1.0, PARAMS) == pytest.approx(1380384.2646028837, rel=1e-12)
    assert path_loss_linear("user_user", 50.0, PARAMS) == pytest.approx(3943483403.0012064, rel=1e-12)


def test_backhaul_capacity_value():
    h = path_loss_linear("backhaul", 500.0, PARAMS)
    assert h == pytest.approx(345096066150.72095, rel=1e-12)
    cap = backhaul_capacity(500.0, 3, PARAMS)
    assert cap == pytest.approx(104816607.04093795, rel=1e-12)
    snr = PARAMS.mbs_backhaul_power / (h * PARAMS.effective_noise_density * PARAMS.backhaul_bandwidth)
    assert snr == pytest.approx(0.7244359600749907, rel=1e-12)


def test_abs_power_coefficient_value():
    a = power_coefficient(5.0e6, "abs", 0.1, 2.718, PARAMS)
    assert a == pytest.approx(1.7923693004666892e-09, rel=1e-12)
    # quadratic distance law: required power at 100 m slant range
    assert a * 100.0**2 == pytest.approx(1.792369300466689e-05, rel=1e-12)


def test_mbs_power_value():
    p = power_coefficient(5.0e6, "mbs", 0.05, 1.0, PARAMS, distance=300.0)
    assert p == pytest.approx(0.06354751304937473, rel=1e-12)
    assert path_loss_linear("mbs_user", 300.0, PARAMS) == pytest.approx(68230085852.80688, rel=1e-9)


def test_effective_noise_density_folds_noise_figure():
    assert PARAMS.effective_noise_density == pytest.approx(1.0e-19, rel=1e-12)


# --------------------------------------------------------------------------
# behavioral properties
# --------------------------------------------------------------------------

def test_antenna_gain_main_lobe_boundary():
    assert antenna_gain(GEO.b + 1e-6, GEO, PARAMS) == GEO.g0
    assert antenna_gain(math.pi / 2.0, GEO, PARAMS) == GEO.g0
    assert antenna_gain(GEO.b - 1e-6, GEO, PARAMS) == PARAMS.side_lobe_gain


def test_antenna_gain_side_lobe_parameter():
    params = ChannelParams(side_lobe_gain=0.01 * GEO.g0)
    gains = antenna_gain(np.array([0.1, GEO.b + 0.01]), GEO, params)
    assert gains[0] == pytest.approx(0.01 * GEO.g0)
    assert gains[1] == GEO.g0


@settings(max_examples=50, deadline=None)
@given(st.floats(min_value=0.01, max_value=math.pi / 2 - 0.02),
       st.floats(min_value=1e-4, max_value=0.01))
def test_p_los_monotone_in_elevation(elev, delta):
    assert p_los(elev + delta, PARAMS) > p_los(elev, PARAMS)


@settings(max_examples=50, deadline=None)
@given(st.floats(min_value=0.0, max_value=math.pi / 2))
def test_elevation_above_threshold_guarantees_los_probability(elev):
    if elev >= GEO.b:
        assert p_los(elev, PARAMS) >= PARAMS.los_threshold - 1e-12
    else:
        assert p_los(elev, PARAMS) <= PARAMS.los_threshold + 1e-12


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(["abs_los", "abs_nlos", "mbs_user", "backhaul", "user_user"]),
       st.floats(min_value=1.0, max_value=5e3),
       st.floats(min_value=1.01, max_value=3.0))
def test_path_loss_monotone_in_distance(kind, d, factor):
    assert path_loss_linear(kind, d * factor, PARAMS) > path_loss_linear(kind, d, PARAMS)


@settings(max_examples=40, deadline=None)
@given(st.floats(min_value=50.0, max_value=2e3), st.integers(min_value=1, max_value=9))
def test_backhaul_capacity_decreasing(d, n_abs):
    assert backhaul_capacity(d * 1.3, n_abs, PARAMS) < backhaul_capacity(d, n_abs, PARAMS)
    assert backhaul_capacity(d, n_abs + 1, PARAMS) < backhaul_capacity(d, n_abs, PARAMS)


@settings(max_examples=40, deadline=None)
@given(st.floats(min_value=1e5, max_value=2e7),
       st.floats(min_value=0.01, max_value=0.97))
def test_abs_power_coefficient_decreasing_in_bandwidth_share(rate, beta):
    lo = power_coefficient(rate, "abs", beta, GEO.g0, PARAMS)
    hi = power_coefficient(rate, "abs", beta * 1.02, GEO.g0, PARAMS)
    assert hi < lo


def test_power_coefficient_zero_rate_needs_no_power():
    assert power_coefficient(0.0, "abs", 0.5, GEO.g0, PARAMS) == 0.0
    assert power_coefficient(0.0, "mbs", 0.5, 1.0, PARAMS, distance=100.0) == 0.0


@settings(max_examples=40, deadline=None)
@given(st.floats(min_value=-400.0, max_value=400.0),
       st.floats(min_value=-400.0, max_value=400.0),
       st.floats(min_value=10.0, max_value=600.0))
def test_elevation_and_slant_geometry_consistent(x, y, z):
    pos = np.array([x, y, z])
    pts = np.array([[0.0, 0.0], [50.0, -20.0], [x, y]])
    elevs = elevation_angles(pos, pts)
    dists = slant_distances(pos, pts)
    for k in range(len(pts)):
        assert elevs[k] == pytest.approx(elevation_angle(pos, pts[k]), abs=1e-12)
        horiz = math.hypot(x - pts[k, 0], y - pts[k, 1])
        assert dists[k] == pytest.approx(math.hypot(horiz, z), rel=1e-12)
        assert dists[k] * math.sin(elevs[k]) == pytest.approx(z, rel=1e-9)
    # directly overhead the elevation is exactly pi/2
    assert elevs[2] == pytest.approx(math.pi / 2.0)


# --------------------------------------------------------------------------
# validation
# --------------------------------------------------------------------------

def test_path_loss_rejects_bad_inputs():
    with pytest.raises(ValueError):
        path_loss_linear("abs_los", 0.0, PARAMS)
    with pytest.raises(ValueError):
        path_loss_linear("fading", 10.0, PARAMS)


def test_power_coefficient_rejects_bad_inputs():
    with pytest.raises(ValueError):
        power_coefficient(1e6, "abs", 0.0, GEO.g0, PARAMS)
    with pytest.raises(ValueError):
        power_coefficient(1e6, "abs", 1.5, GEO.g0, PARAMS)
    with pytest.raises(ValueError):
        power_coefficient(1e6, "mbs", 0.5, 1.0, PARAMS)   # missing distance
    with pytest.raises(ValueError):
        power_coefficient(1e6, "abs", 0.5, 0.0, PARAMS)   # zero gain cannot serve
    with pytest.raises(ValueError):
        power_coefficient(-1.0, "abs", 0.5, GEO.g0, PARAMS)


def test_channel_params_validation():
    with pytest.raises(ValueError):
        ChannelParams(los_threshold=1.0)
    with pytest.raises(ValueError):
        ChannelParams(fc=-1.0)
    with pytest.raises(ValueError):
        ChannelParams(z_min=700.0, z_max=600.0)
    with pytest.raises(ValueError):
        ChannelParams(noise_density=math.nan)


def test_backhaul_capacity_rejects_bad_inputs():
    with pytest.raises(ValueError):
        backhaul_capacity(0.0, 3, PARAMS)
    with pytest.raises(ValueError):
        backhaul_capacity(100.0, 0, PARAMS)

"""Radio propagation and link-budget math for the two-tier network.

All internal computation is in linear units (W, Hz, m). dB values appear only
in the configured constants and are converted here, nowhere else. Air-to-ground
links use free-space path loss plus an excess loss that depends on LoS state;
the macro cell and the user-to-user interference channel use fitted log-distance
models; the ABS backhaul uses a mmWave-style model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

SPEED_OF_LIGHT = 3.0e8  # m/s

# intercept-plus-slope path loss models are not trusted below one metre
MIN_GROUND_DISTANCE = 1.0

# log-distance models, dB at d meters: intercept + slope*log10(d)
MBS_USER_INTERCEPT_DB = 15.2
MBS_USER_SLOPE_DB = 37.6
BACKHAUL_INTERCEPT_DB = 61.4
BACKHAUL_SLOPE_DB = 20.0
USER_USER_INTERCEPT_DB = 28.0
USER_USER_SLOPE_DB = 40.0
USER_TX_POWER_W = 0.1

_PATH_LOSS_KINDS = ("abs_los", "abs_nlos", "mbs_user", "backhaul", "user_user")


@dataclass(frozen=True)
class ChannelParams:
    """Radio constants. Defaults reproduce the reference simulation setup."""

    fc: float = 2.0e9                 # carrier frequency, Hz
    c: float = SPEED_OF_LIGHT         # propagation speed, m/s
    kappa: float = 9.61               # LoS-probability curve offset
    zeta: float = 0.16                # LoS-probability curve slope, 1/deg
    psi_los: float = 1.0              # excess loss on LoS air-to-ground links, dB
    psi_nlos: float = 20.0            # excess loss on NLoS air-to-ground links, dB
    noise_density: float = 1.0e-20    # N0, W/Hz (-170 dBm/Hz)
    noise_figure: float = 10.0        # receiver noise figure, dB; folded into N0 everywhere
    access_bandwidth: float = 4.0e7   # B, Hz, shared by the users of one BS
    backhaul_bandwidth: float = 4.0e8  # W, Hz, split equally between ABSs
    mbs_backhaul_power: float = 10.0  # P0, W (40 dBm), MBS transmit power per ABS backhaul
    los_threshold: float = 0.9        # a, minimum LoS probability for an ABS to serve a user
    z_max: float = 600.0              # ABS altitude ceiling, m
    z_min: float = 10.0               # ABS altitude floor, m
    side_lobe_gain: float = 0.0       # linear antenna gain outside the main beam

    def __post_init__(self) -> None:
        for f in fields(self):
            value = getattr(self, f.name)
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise ValueError(f"channel parameter {f.name} must be a finite number")
        positive = (
            "fc", "c", "kappa", "zeta", "noise_density", "access_bandwidth",
            "backhaul_bandwidth", "z_max", "z_min",
        )
        for name in positive:
            if getattr(self, name) <= 0:
                raise ValueError(f"channel parameter {name} must be positive")
        if self.mbs_backhaul_power < 0:
            raise ValueError("mbs_backhaul_power must be non-negative")
        if self.side_lobe_gain < 0:
            raise ValueError("side_lobe_gain must be non-negative")
        if not 0.0 < self.los_threshold < 1.0:
            raise ValueError("los_threshold must lie strictly between 0 and 1")
        if self.psi_los < 0 or self.psi_nlos < 0:
            raise ValueError("excess losses must be non-negative")
        if self.z_min > self.z_max:
            raise ValueError("z_min must not exceed z_max")

    @property
    def effective_noise_density(self) -> float:
        """N0 scaled by the receiver noise figure, W/Hz."""
        return self.noise_density * 10.0 ** (self.noise_figure / 10.0)

    @property
    def fspl_factor(self) -> float:
        """(4 pi fc / c)^2, the free-space loss per squared meter."""
        return (4.0 * math.pi * self.fc / self.c) ** 2


@dataclass(frozen=True)
class GeometryConstants:
    """Derived LoS-geometry constants.

    b is the smallest elevation angle at which the LoS probability reaches the
    association threshold; V = 1 - 1/sin^2 b turns the per-user LoS constraint
    into the quadratic form (x-x_i)^2 + (y-y_i)^2 + V z^2 <= 0.
    """

    b: float        # rad, minimum serving elevation
    V: float        # dimensionless, always negative
    theta_b: float  # rad, antenna beamwidth 2*(pi/2 - b)
    g0: float       # linear peak antenna gain


def min_elevation(params: ChannelParams) -> GeometryConstants:
    """Invert the LoS-probability curve at the association threshold."""
    a = params.los_threshold
    b = (-math.pi / (180.0 * params.zeta)) * math.log((1.0 - a) / (params.kappa * a)) \
        + math.pi * params.kappa / 180.0
    if not 0.0 < b < math.pi / 2.0:
        raise ValueError("derived minimum elevation is outside (0, pi/2); check kappa/zeta/threshold")
    V = 1.0 - 1.0 / math.sin(b) ** 2
    theta_b = 2.0 * (math.pi / 2.0 - b)
    g0 = 30000.0 / math.degrees(theta_b) ** 2
    return GeometryConstants(b=b, V=V, theta_b=theta_b, g0=g0)


def p_los(elevation, params: ChannelParams):
    """Probability of a line-of-sight air-to-ground channel at the given elevation (rad)."""
    theta_deg = np.degrees(elevation)
    return 1.0 / (1.0 + params.kappa * np.exp(-params.zeta * (theta_deg - params.kappa)))


def antenna_gain(elevation, geometry: GeometryConstants, params: ChannelParams):
    """ABS antenna gain toward a ground point at the given elevation (rad).

    The beam points straight down; a point is in the main lobe when its
    depression from boresight is at most theta_b/2, boundary inclusive.
    """
    off_boresight = np.abs(math.pi / 2.0 - np.asarray(elevation, dtype=float))
    in_beam = off_boresight <= geometry.theta_b / 2.0 + 1e-15
    gain = np.where(in_beam, geometry.g0, params.side_lobe_gain)
    return float(gain) if np.ndim(elevation) == 0 else gain


def path_loss_linear(kind: str, d, params: ChannelParams):
    """Linear power attenuation h for a link of the given kind at distance d (m).

    Received power = transmit power * gain / h.
    """
    if kind not in _PATH_LOSS_KINDS:
        raise ValueError(f"unknown path loss kind {kind!r}")
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0.0):
        raise ValueError("path loss requires a positive distance")
    if kind == "abs_los":
        h = params.fspl_factor * 10.0 ** (params.psi_los / 10.0) * d**2
    elif kind == "abs_nlos":
        h = params.fspl_factor * 10.0 ** (params.psi_nlos / 10.0) * d**2
    elif kind == "mbs_user":
        h = 10.0 ** (MBS_USER_INTERCEPT_DB / 10.0) * d ** (MBS_USER_SLOPE_DB / 10.0)
    elif kind == "backhaul":
        h = 10.0 ** (BACKHAUL_INTERCEPT_DB / 10.0) * d ** (BACKHAUL_SLOPE_DB / 10.0)
    else:
        h = 10.0 ** (USER_USER_INTERCEPT_DB / 10.0) * d ** (USER_USER_SLOPE_DB / 10.0)
    return float(h) if h.ndim == 0 else h


def backhaul_capacity(d_mbs_abs: float, n_abs: int, params: ChannelParams) -> float:
    """Backhaul rate of one ABS at distance d from the MBS, bits/s.

    The backhaul band is split equally between the n_abs ABSs; the link budget
    uses the effective (noise-figure-scaled) noise density.
    """
    if d_mbs_abs <= 0:
        raise ValueError("backhaul distance must be positive")
    if n_abs < 1:
        raise ValueError("n_abs must be at least 1")
    w = params.backhaul_bandwidth
    h = path_loss_linear("backhaul", d_mbs_abs, params)
    snr = params.mbs_backhaul_power / (h * params.effective_noise_density * w)
    return (w / n_abs) * math.log2(1.0 + snr)


def power_coefficient(rate_demand: float, bs_kind: str, beta: float, gain: float,
                      params: ChannelParams, distance: float | None = None,
                      los: bool = True) -> float:
    """Transmit-power requirement of one downlink at the target rate.

    For bs_kind "abs" returns the coefficient A in W/m^2 such that the required
    power at slant distance d is A*d^2. For bs_kind "mbs" returns the full power
    in W at the given ground distance (omnidirectional antenna, gain fixed to 1).
    """
    if beta <= 0.0 or beta > 1.0:
        raise ValueError("bandwidth fraction must lie in (0, 1]")
    if rate_demand < 0.0:
        raise ValueError("rate demand must be non-negative")
    b_eff = params.access_bandwidth * beta
    snr_req = 2.0 ** (rate_demand / b_eff) - 1.0
    noise = params.effective_noise_density * b_eff
    if bs_kind == "abs":
        if gain <= 0.0:
            raise ValueError("ABS antenna gain must be positive for a served user")
        psi = params.psi_los if los else params.psi_nlos
        return (1.0 / gain) * params.fspl_factor * 10.0 ** (psi / 10.0) * snr_req * noise
    if bs_kind == "mbs":
        if distance is None:
            raise ValueError("MBS power needs the user distance")
        h = path_loss_linear("mbs_user", distance, params)
        return h * snr_req * noise
    raise ValueError(f"unknown bs kind {bs_kind!r}")


def elevation_angle(abs_position, ground_point) -> float:
    """Elevation of an ABS as seen from a ground point, rad in [0, pi/2]."""
    p = np.asarray(abs_position, dtype=float)
    gpt = np.asarray(ground_point, dtype=float)
    horiz = math.hypot(p[0] - gpt[0], p[1] - gpt[1])
    return math.atan2(p[2], horiz)


def elevation_angles(abs_position, ground_points) -> np.ndarray:
    """Vectorized elevation_angle over an (n, 2) array of ground points."""
    p = np.asarray(abs_position, dtype=float)
    gpts = np.asarray(ground_points, dtype=float)
    horiz = np.hypot(gpts[:, 0] - p[0], gpts[:, 1] - p[1])
    return np.arctan2(p[2], horiz)


def slant_distances(abs_position, ground_points) -> np.ndarray:
    """3D distances from an ABS to an (n, 2) array of ground points."""
    p = np.asarray(abs_position, dtype=float)
    gpts = np.asarray(ground_points, dtype=float)
    horiz_sq = (gpts[:, 0] - p[0]) ** 2 + (gpts[:, 1] - p[1]) ** 2
    return np.sqrt(horiz_sq + p[2] ** 2)

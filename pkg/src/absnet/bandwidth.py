"""Per-BS bandwidth split refinement for a fixed user assignment.

Each served link needs power c*(2^(eta/(B*beta)) - 1)*beta, which is strictly
decreasing in beta, so the band budget always binds. The optimum therefore
equalizes the marginal power savings across users; it is found by bisecting
the common marginal (the KKT multiplier) and inverting a strictly increasing
scalar function per user.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import ChannelParams

LN2 = math.log(2.0)
BETA_FLOOR = 1e-6
SUM_TOL = 1e-8


@dataclass(frozen=True)
class BandwidthAllocation:
    """Band fractions for the users served by one BS."""

    beta: np.ndarray    # (n,) fractions, each in (0, 1]
    residual: float     # 1 - sum(beta), zero up to float error
    multiplier: float   # common marginal power saving, W per unit beta

    def __post_init__(self) -> None:
        beta = np.asarray(self.beta, dtype=float)
        if beta.ndim != 1 or beta.size < 1:
            raise ValueError("beta must be a non-empty vector")
        if np.any(beta <= 0.0) or np.any(beta > 1.0 + 1e-12):
            raise ValueError("fractions must lie in (0, 1]")
        if float(beta.sum()) > 1.0 + 1e-9:
            raise ValueError("fractions exceed the band budget")
        beta.setflags(write=False)
        object.__setattr__(self, "beta", beta)


def power_scale(path_loss: float, gain: float, params: ChannelParams) -> float:
    """Link cost multiplier c so that power = c*(2^(eta/(B*beta)) - 1)*beta."""
    if path_loss <= 0.0 or gain <= 0.0:
        raise ValueError("path loss and gain must be positive")
    return path_loss / gain * params.effective_noise_density * params.access_bandwidth


def link_power(scale: float, rate: float, beta: float, params: ChannelParams) -> float:
    """Transmit power of one link at band fraction beta, W."""
    if beta <= 0.0:
        raise ValueError("beta must be positive")
    u = float(rate) / (params.access_bandwidth * float(beta))
    if u > 1020.0:
        return math.inf
    return scale * (2.0 ** u - 1.0) * beta


def marginal_power(scale: float, rate: float, beta: float, params: ChannelParams) -> float:
    """Derivative of link_power in beta; negative for any positive rate."""
    if beta <= 0.0:
        raise ValueError("beta must be positive")
    u = float(rate) / (params.access_bandwidth * float(beta))
    if u > 1020.0:
        return -math.inf
    return -scale * _psi(u)


def _psi(u: float) -> float:
    # strictly increasing on u >= 0 with psi(0) = 0
    return 2.0 ** u * (u * LN2 - 1.0) + 1.0


def _psi_inverse(target: float) -> float:
    """u >= 0 with _psi(u) = target, by safeguarded Newton."""
    if target <= 0.0:
        return 0.0
    lo, hi = 0.0, 1.0
    growth = 0
    while _psi(hi) < target and growth < 1100:
        lo, hi = hi, hi * 2.0
        growth += 1
    u = 0.5 * (lo + hi)
    for _ in range(100):
        val = _psi(u) - target
        if val > 0.0:
            hi = u
        else:
            lo = u
        deriv = (LN2 ** 2) * u * 2.0 ** u
        if math.isfinite(val) and math.isfinite(deriv) and deriv > 0.0:
            candidate = u - val / deriv
            if not lo < candidate < hi:
                candidate = 0.5 * (lo + hi)
        else:
            candidate = 0.5 * (lo + hi)
        if abs(candidate - u) <= 1e-15 * (1.0 + abs(u)):
            return candidate
        u = candidate
    return u


def refine_bandwidth(power_scales, rate_demands,
                     params: ChannelParams) -> BandwidthAllocation:
    """Optimal band split for the users served by one BS.

    power_scales holds each link's cost multiplier c (see power_scale) and
    rate_demands the target rates in bits/s. The returned fractions sum to
    one and equalize every user's marginal power.
    """
    scales = np.asarray(power_scales, dtype=float).ravel()
    rates = np.asarray(rate_demands, dtype=float).ravel()
    if scales.size != rates.size or scales.size < 1:
        raise ValueError("need one positive scale per served user")
    if np.any(~np.isfinite(scales)) or np.any(scales <= 0.0):
        raise ValueError("power scales must be finite and positive")
    if np.any(rates <= 0.0):
        raise ValueError("rate demands must be positive")
    k = rates / params.access_bandwidth

    if scales.size == 1:
        mu = scales[0] * _psi(k[0])
        return BandwidthAllocation(np.array([1.0]), 0.0, float(mu))

    def fractions(mu: float) -> np.ndarray:
        beta = np.empty_like(k)
        for idx in range(k.size):
            u = _psi_inverse(mu / scales[idx])
            beta[idx] = 1.0 if u <= 0.0 else min(1.0, k[idx] / u)
        return np.maximum(beta, BETA_FLOOR)

    # grow the marginal until the requested fractions fit in the band
    mu_hi = float(max(scales[i] * _psi(k[i]) for i in range(k.size)))
    mu_hi = max(mu_hi, 1e-300)
    for _ in range(200):
        if float(fractions(mu_hi).sum()) < 1.0:
            break
        mu_hi *= 2.0
    mu_lo = 0.0
    beta = fractions(mu_hi)
    mu = mu_hi
    for _ in range(100):
        mu = 0.5 * (mu_lo + mu_hi)
        beta = fractions(mu)
        total = float(beta.sum())
        if abs(total - 1.0) <= 1e-12:
            break
        if total > 1.0:
            mu_lo = mu
        else:
            mu_hi = mu
    beta = beta / float(beta.sum())
    return BandwidthAllocation(beta, float(1.0 - beta.sum()), float(mu))

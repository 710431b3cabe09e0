"""Complementary filter fusing gyro and accelerometer tilt.

Gyro integration is accurate over short horizons but drifts with bias;
the accelerometer tilt is noisy but drift-free. The filter blends them:

    theta_est <- alpha * (theta_est + gyro * dt) + (1 - alpha) * accel_tilt

``alpha`` close to 1 trusts the gyro; ``alpha = 0`` passes the
accelerometer through unchanged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = ["FilterConfig", "FilterState", "update", "reset"]


@dataclass(frozen=True)
class FilterConfig:
    alpha: float = 0.98

    def __post_init__(self) -> None:
        if not (math.isfinite(self.alpha) and 0.0 <= self.alpha <= 1.0):
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")


@dataclass(frozen=True, slots=True)
class FilterState:
    theta_est: float = 0.0


def update(state: FilterState, gyro: float, accel_tilt: float, dt: float, cfg: FilterConfig) -> FilterState:
    """One blend step; the output lies between the gyro-propagated angle
    and the accelerometer tilt."""
    if not (math.isfinite(gyro) and math.isfinite(accel_tilt)):
        raise ValueError("filter inputs must be finite")
    if not (math.isfinite(dt) and dt > 0.0):
        raise ValueError(f"dt must be > 0, got {dt}")
    blended = cfg.alpha * (state.theta_est + gyro * dt) + (1.0 - cfg.alpha) * accel_tilt
    return FilterState(theta_est=blended)


def reset(initial_tilt: float = 0.0) -> FilterState:
    if not math.isfinite(initial_tilt):
        raise ValueError("initial_tilt must be finite")
    return FilterState(theta_est=initial_tilt)

"""MPU6050-style IMU emulation.

The accelerometer reads specific force (body acceleration minus gravity)
in the body frame, so a static upright sensor reads +g on its up axis and
the tilt can be recovered as ``atan2(accel_x, accel_z)``. Base
acceleration deliberately contaminates that tilt reading, which is the
whole reason the estimator downstream has to blend in the gyro. The gyro
reads the true body rate plus a slowly drifting bias plus white noise.
All channels saturate at their configured ranges, like the real part's
+/-4g and +/-250 deg/s settings.

``ImuState`` owns a seeded random stream and is single-owner mutable: only
the simulation loop thread may call ``sample``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .plant import StateVector

__all__ = ["ImuConfig", "ImuSample", "ImuState", "sample", "accel_tilt"]

GYRO_RANGE_250_DPS = math.radians(250.0)


@dataclass(frozen=True)
class ImuConfig:
    """Noise, drift and saturation settings.

    Noise defaults are plausible for an MPU6050-class part. ``accel_range``
    defaults to 4 g and ``gyro_range`` to 250 deg/s.
    """

    accel_noise_std: float = 0.2
    gyro_noise_std: float = 0.005
    gyro_bias_init: float = 0.01
    gyro_bias_walk_std: float = 0.001
    gravity: float = 9.81
    accel_range: float | None = None
    gyro_range: float = GYRO_RANGE_250_DPS
    sample_rate: float = 100.0

    def __post_init__(self) -> None:
        if self.accel_range is None:
            object.__setattr__(self, "accel_range", 4.0 * self.gravity)
        for name in ("accel_noise_std", "gyro_noise_std", "gyro_bias_walk_std"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0.0):
                raise ValueError(f"{name} must be finite and >= 0, got {value}")
        for name in ("gravity", "accel_range", "gyro_range", "sample_rate"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0.0):
                raise ValueError(f"{name} must be finite and > 0, got {value}")
        if not math.isfinite(self.gyro_bias_init):
            raise ValueError("gyro_bias_init must be finite")

    def noiseless(self) -> "ImuConfig":
        """Copy with all noise and bias sources zeroed."""
        return ImuConfig(
            accel_noise_std=0.0,
            gyro_noise_std=0.0,
            gyro_bias_init=0.0,
            gyro_bias_walk_std=0.0,
            gravity=self.gravity,
            accel_range=self.accel_range,
            gyro_range=self.gyro_range,
            sample_rate=self.sample_rate,
        )


@dataclass(frozen=True, slots=True)
class ImuSample:
    """One reading: body-frame specific force plus gyro rate, at time t."""

    accel_x: float
    accel_z: float
    gyro: float
    t: float


@dataclass
class ImuState:
    """Mutable sensor state: current gyro bias and the noise stream."""

    gyro_bias: float
    rng: np.random.Generator = field(repr=False)

    @classmethod
    def create(cls, cfg: ImuConfig, seed: int) -> "ImuState":
        return cls(gyro_bias=cfg.gyro_bias_init, rng=np.random.default_rng(seed))


def _clip(value: float, bound: float) -> float:
    return min(bound, max(-bound, value))


def sample(
    true_state: StateVector,
    true_cart_accel: float,
    imu: ImuState,
    cfg: ImuConfig,
    dt: float,
    t: float = 0.0,
) -> tuple[ImuSample, ImuState]:
    """Emulate one IMU reading at the sensor's sample interval ``dt``.

    The ideal specific force is the world-frame ``(a_x, 0) - (0, -g)``
    rotated through ``-theta`` into the body frame. Gaussian noise is then
    added per axis, the gyro picks up bias plus noise, the bias takes a
    random-walk increment of std ``gyro_bias_walk_std * sqrt(dt)``, and
    every channel is clipped to its configured range. Draw order is fixed
    (accel_x, accel_z, gyro, bias walk) and zero-std draws are skipped, so
    identical seeds give bit-identical sample sequences.
    """
    if not math.isfinite(true_cart_accel):
        raise ValueError(f"true_cart_accel must be finite, got {true_cart_accel}")
    if not (math.isfinite(dt) and dt > 0.0):
        raise ValueError(f"dt must be > 0, got {dt}")

    cos_t = math.cos(true_state.theta)
    sin_t = math.sin(true_state.theta)
    g = cfg.gravity
    ideal_x = true_cart_accel * cos_t + g * sin_t
    ideal_z = -true_cart_accel * sin_t + g * cos_t

    rng = imu.rng
    accel_x = ideal_x + (rng.normal(0.0, cfg.accel_noise_std) if cfg.accel_noise_std > 0.0 else 0.0)
    accel_z = ideal_z + (rng.normal(0.0, cfg.accel_noise_std) if cfg.accel_noise_std > 0.0 else 0.0)
    gyro = true_state.omega + imu.gyro_bias
    if cfg.gyro_noise_std > 0.0:
        gyro += rng.normal(0.0, cfg.gyro_noise_std)
    new_bias = imu.gyro_bias
    if cfg.gyro_bias_walk_std > 0.0:
        new_bias += rng.normal(0.0, cfg.gyro_bias_walk_std * math.sqrt(dt))

    reading = ImuSample(
        accel_x=_clip(accel_x, cfg.accel_range),
        accel_z=_clip(accel_z, cfg.accel_range),
        gyro=_clip(gyro, cfg.gyro_range),
        t=t,
    )
    return reading, ImuState(gyro_bias=new_bias, rng=rng)


def accel_tilt(reading: ImuSample) -> float:
    """Tilt angle implied by the gravity direction in the accelerometer.

    Raises:
        ValueError: if both accelerometer axes read zero (free fall), where
            the gravity direction is undefined.
    """
    if reading.accel_x == 0.0 and reading.accel_z == 0.0:
        raise ValueError("accelerometer reads zero specific force; tilt undefined")
    return math.atan2(reading.accel_x, reading.accel_z)

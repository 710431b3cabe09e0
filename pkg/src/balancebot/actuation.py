"""Stepper-motor and wheel model.

A duty command in [-1, +1] per wheel maps linearly to a signed step rate,
which fixes the commanded wheel speed. Each wheel tracks its commanded
speed as a first-order system (a rate-commanded stepper keeps up with its
pulse train), while the torque implied by the tracking demand is clipped
at the motor's holding torque: beyond that the motor loses steps and the
transmitted force saturates. The net horizontal force on the base is the
summed wheel torque over the wheel radius. Left/right speed differences
produce a kinematic yaw rate for telemetry only; the balance plane stays
two-dimensional.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "MotorParams",
    "DutyCommand",
    "MotorState",
    "duty_to_step_rate",
    "step_rate_to_wheel_speed",
    "actuate",
]


@dataclass(frozen=True)
class MotorParams:
    """Stepper and drivetrain constants.

    Defaults model a NEMA 17 class motor: 1.8 degree steps (200 per
    revolution) and a 3.2 kg-cm holding torque, on 60 mm wheels.
    """

    steps_per_rev: int = 200
    max_step_rate: float = 4000.0
    holding_torque: float = 3.2 * 0.0980665
    wheel_radius: float = 0.030
    speed_tracking_gain: float = 50.0
    track_width: float = 0.15

    def __post_init__(self) -> None:
        for name in ("steps_per_rev", "max_step_rate", "holding_torque",
                     "wheel_radius", "speed_tracking_gain", "track_width"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0.0):
                raise ValueError(f"{name} must be finite and > 0, got {value}")

    @property
    def max_wheel_speed(self) -> float:
        """Fastest achievable wheel speed [rad/s] at the full step rate."""
        return self.max_step_rate * 2.0 * math.pi / self.steps_per_rev


def _clamp_unit(value: float) -> float:
    if math.isnan(value):
        return 0.0
    return min(1.0, max(-1.0, value))


@dataclass(frozen=True, slots=True)
class DutyCommand:
    """Signed PWM-style duty per wheel; components clamp to [-1, +1]."""

    left: float = 0.0
    right: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "left", _clamp_unit(self.left))
        object.__setattr__(self, "right", _clamp_unit(self.right))


@dataclass(frozen=True, slots=True)
class MotorState:
    """Current wheel speeds [rad/s]; stands in for the encoder reading."""

    wheel_speed_left: float = 0.0
    wheel_speed_right: float = 0.0

    @property
    def average(self) -> float:
        return 0.5 * (self.wheel_speed_left + self.wheel_speed_right)


def duty_to_step_rate(duty: float, params: MotorParams) -> float:
    """Signed step rate [steps/s] for a duty value (clamped to [-1, 1])."""
    return _clamp_unit(duty) * params.max_step_rate


def step_rate_to_wheel_speed(rate: float, params: MotorParams) -> float:
    """Wheel angular speed [rad/s] for a signed step rate."""
    if not math.isfinite(rate):
        raise ValueError(f"step rate must be finite, got {rate}")
    return rate * 2.0 * math.pi / params.steps_per_rev


def _track_wheel(duty: float, speed: float, dt: float, params: MotorParams) -> tuple[float, float]:
    """Advance one wheel; returns (new speed, transmitted torque)."""
    commanded = step_rate_to_wheel_speed(duty_to_step_rate(duty, params), params)
    demand = params.speed_tracking_gain * (commanded - speed)
    torque = min(params.holding_torque, max(-params.holding_torque, demand))
    # Exact first-order relaxation; unconditionally stable for any dt.
    decay = math.exp(-params.speed_tracking_gain * dt)
    new_speed = commanded + (speed - commanded) * decay
    cap = params.max_wheel_speed
    new_speed = min(cap, max(-cap, new_speed))
    return new_speed, torque


def actuate(
    command: DutyCommand,
    motor_state: MotorState,
    plant_state: object,
    dt: float,
    params: MotorParams,
) -> tuple[MotorState, float, float]:
    """Advance both wheels one step and derive the force on the base.

    The transmitted torque per wheel is the start-of-step tracking demand
    ``k_v * (commanded - actual)``, clipped to the holding torque; the
    force on the base is the torque sum over the wheel radius. Force
    generation depends only on commanded-versus-actual wheel speed, so the
    plant state does not feed back here; it is part of the call shape
    because the actuator conceptually sits between controller and plant.

    Returns:
        ``(new_motor_state, force_on_cart [N], yaw_rate [rad/s])``.
    """
    if not (math.isfinite(dt) and dt > 0.0):
        raise ValueError(f"dt must be > 0, got {dt}")
    left_speed, left_torque = _track_wheel(command.left, motor_state.wheel_speed_left, dt, params)
    right_speed, right_torque = _track_wheel(command.right, motor_state.wheel_speed_right, dt, params)
    force = (left_torque + right_torque) / params.wheel_radius
    yaw_rate = params.wheel_radius * (right_speed - left_speed) / params.track_width
    return MotorState(left_speed, right_speed), force, yaw_rate

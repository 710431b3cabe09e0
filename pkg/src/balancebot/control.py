"""Cascaded PID control: tilt loop commanding a wheel-speed loop.

The outer loop turns tilt error into a wheel-speed set-point, the inner
loop turns speed error into a duty command, and a mixer splits the base
duty across the two wheels for steering. Tilting past ``fall_threshold``
latches the controller into a Fallen state with zero output until reset.

Sign convention: positive tilt means leaning toward +x, and the
restoring response is to drive the wheels toward +x (positive duty), so
the outer loop acts on ``theta_est - drive_offset``. A positive
drive_offset therefore makes the robot hold a small forward lean, which
is what produces sustained forward travel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .actuation import DutyCommand, MotorParams
from .commands import Command, CommandKind

__all__ = [
    "Status",
    "PidGains",
    "PidState",
    "SteeringState",
    "ControlOutput",
    "ControllerConfig",
    "pid_step",
    "apply_command",
    "Controller",
    "DEFAULT_OUTER_GAINS",
    "DEFAULT_INNER_GAINS",
]

# Keeps integral_limit finite when ki == 0; large enough to never clamp.
_ANTI_WINDUP_EPS = 1e-9


class Status(Enum):
    BALANCING = "Balancing"
    FALLEN = "Fallen"


@dataclass(frozen=True, slots=True)
class PidGains:
    kp: float
    ki: float
    kd: float

    def __post_init__(self) -> None:
        for name, value in (("kp", self.kp), ("ki", self.ki), ("kd", self.kd)):
            if not (math.isfinite(value) and value >= 0.0):
                raise ValueError(f"{name} must be finite and >= 0, got {value}")


# Tuned for the default robot. The stepper's clipped holding torque makes
# transmitted force nearly bang-bang at tick granularity, so sustained force
# tracks the *trend* of the wheel-speed command; through the cascade the
# outer ki acts as tilt stiffness and the outer kp as damping. The accel
# estimate is contaminated by cart acceleration, which bounds how stiff the
# tilt loop may be before the slow estimator mode goes unstable; these
# values sit inside that window with margin (see `tuning`).
DEFAULT_OUTER_GAINS = PidGains(kp=0.02, ki=0.40, kd=0.0)
DEFAULT_INNER_GAINS = PidGains(kp=0.02, ki=0.0, kd=0.0)


@dataclass(frozen=True, slots=True)
class PidState:
    """Accumulator state for one PID loop; a new state is returned per step."""

    integral: float = 0.0
    last_error: float = 0.0
    output_limit: float = math.inf
    integral_limit: float = math.inf

    def __post_init__(self) -> None:
        if math.isnan(self.output_limit) or self.output_limit <= 0.0:
            raise ValueError(f"output_limit must be > 0, got {self.output_limit}")
        if math.isnan(self.integral_limit) or self.integral_limit <= 0.0:
            raise ValueError(f"integral_limit must be > 0, got {self.integral_limit}")


def fresh_pid_state(gains: PidGains, output_limit: float) -> PidState:
    """Zeroed state whose integral clamp caps the I term at the output limit."""
    return PidState(
        integral=0.0,
        last_error=0.0,
        output_limit=output_limit,
        integral_limit=output_limit / max(gains.ki, _ANTI_WINDUP_EPS),
    )


def pid_step(
    gains: PidGains, state: PidState, error: float, dt: float
) -> tuple[float, PidState]:
    """One discrete PID update; returns (clamped output, next state)."""
    if not math.isfinite(error):
        raise ValueError(f"error must be finite, got {error}")
    if not (math.isfinite(dt) and dt > 0.0):
        raise ValueError(f"dt must be positive, got {dt}")

    integral = state.integral + error * dt
    if integral > state.integral_limit:
        integral = state.integral_limit
    elif integral < -state.integral_limit:
        integral = -state.integral_limit

    derivative = (error - state.last_error) / dt
    output = gains.kp * error + gains.ki * integral + gains.kd * derivative
    if output > state.output_limit:
        output = state.output_limit
    elif output < -state.output_limit:
        output = -state.output_limit

    return output, PidState(integral, error, state.output_limit, state.integral_limit)


@dataclass(frozen=True, slots=True)
class SteeringState:
    """Drive/turn intent; replaced wholesale by each steering command."""

    drive_offset: float = 0.0
    turn: float = 0.0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.drive_offset) and abs(self.drive_offset) <= 0.1):
            raise ValueError(f"drive_offset must be within ±0.1 rad, got {self.drive_offset}")
        if not (math.isfinite(self.turn) and abs(self.turn) <= 1.0):
            raise ValueError(f"turn must be within ±1, got {self.turn}")


@dataclass(frozen=True, slots=True)
class ControlOutput:
    duty: DutyCommand
    status: Status


def _default_setpoint_limit() -> float:
    return MotorParams().max_wheel_speed


@dataclass(frozen=True)
class ControllerConfig:
    outer: PidGains = DEFAULT_OUTER_GAINS
    inner: PidGains = DEFAULT_INNER_GAINS
    fall_threshold: float = 0.35
    drive_step: float = 0.03
    turn_step: float = 0.15
    mix_gain: float = 1.0
    # None resolves to the top wheel speed the default motor can reach.
    setpoint_limit: float | None = None

    def __post_init__(self) -> None:
        if self.setpoint_limit is None:
            object.__setattr__(self, "setpoint_limit", _default_setpoint_limit())
        if not (math.isfinite(self.fall_threshold) and self.fall_threshold > 0.0):
            raise ValueError(f"fall_threshold must be > 0, got {self.fall_threshold}")
        if not (0.0 <= self.drive_step <= 0.1):
            raise ValueError(f"drive_step must be in [0, 0.1] rad, got {self.drive_step}")
        if not (0.0 <= self.turn_step <= 1.0):
            raise ValueError(f"turn_step must be in [0, 1], got {self.turn_step}")
        if not (math.isfinite(self.mix_gain) and self.mix_gain >= 0.0):
            raise ValueError(f"mix_gain must be >= 0, got {self.mix_gain}")
        if not (math.isfinite(self.setpoint_limit) and self.setpoint_limit > 0.0):
            raise ValueError(f"setpoint_limit must be > 0, got {self.setpoint_limit}")


def apply_command(
    steering: SteeringState, cmd: Command, cfg: ControllerConfig
) -> SteeringState:
    """Steering update for one command; non-steering commands are a no-op.

    Commands replace the relevant component rather than accumulating.
    """
    if cmd.kind is CommandKind.FORWARD:
        return SteeringState(cfg.drive_step, steering.turn)
    if cmd.kind is CommandKind.BACKWARD:
        return SteeringState(-cfg.drive_step, steering.turn)
    if cmd.kind is CommandKind.LEFT:
        return SteeringState(steering.drive_offset, -cfg.turn_step)
    if cmd.kind is CommandKind.RIGHT:
        return SteeringState(steering.drive_offset, cfg.turn_step)
    if cmd.kind is CommandKind.STOP:
        return SteeringState(0.0, 0.0)
    return steering


class Controller:
    """Mutable cascade owned by the simulation loop.

    Gains changed at runtime (via SET_GAINS) persist across ``reset``;
    reset clears only the accumulated loop state and steering intent.
    """

    def __init__(self, cfg: ControllerConfig):
        self.cfg = cfg
        self.outer_gains = cfg.outer
        self.inner_gains = cfg.inner
        self.steering = SteeringState()
        self.status = Status.BALANCING
        self.outer_state = fresh_pid_state(cfg.outer, cfg.setpoint_limit)
        self.inner_state = fresh_pid_state(cfg.inner, 1.0)

    def reset(self) -> None:
        self.steering = SteeringState()
        self.status = Status.BALANCING
        self.outer_state = fresh_pid_state(self.outer_gains, self.cfg.setpoint_limit)
        self.inner_state = fresh_pid_state(self.inner_gains, 1.0)

    def set_outer_gains(self, gains: PidGains) -> None:
        """Swap tilt-loop gains, re-deriving the integral clamp for the new ki."""
        self.outer_gains = gains
        limit = self.cfg.setpoint_limit / max(gains.ki, _ANTI_WINDUP_EPS)
        integral = min(max(self.outer_state.integral, -limit), limit)
        self.outer_state = PidState(
            integral, self.outer_state.last_error, self.cfg.setpoint_limit, limit
        )

    def handle_command(self, cmd: Command) -> None:
        """Apply a steering or gain command; other kinds are not ours."""
        if cmd.kind is CommandKind.SET_GAINS:
            kp, ki, kd = cmd.values
            self.set_outer_gains(PidGains(kp, ki, kd))
        else:
            self.steering = apply_command(self.steering, cmd, self.cfg)

    def balance_step(self, theta_est: float, wheel_speed_avg: float, dt: float) -> ControlOutput:
        """One control tick: tilt PID -> speed set-point -> speed PID -> mixed duty."""
        if self.status is Status.FALLEN:
            return ControlOutput(DutyCommand(0.0, 0.0), Status.FALLEN)
        if abs(theta_est) > self.cfg.fall_threshold:
            self.status = Status.FALLEN
            self.outer_state = fresh_pid_state(self.outer_gains, self.cfg.setpoint_limit)
            self.inner_state = fresh_pid_state(self.inner_gains, 1.0)
            return ControlOutput(DutyCommand(0.0, 0.0), Status.FALLEN)

        tilt_error = theta_est - self.steering.drive_offset
        setpoint, self.outer_state = pid_step(self.outer_gains, self.outer_state, tilt_error, dt)
        speed_error = setpoint - wheel_speed_avg
        base, self.inner_state = pid_step(self.inner_gains, self.inner_state, speed_error, dt)

        turn = self.steering.turn * self.cfg.mix_gain
        duty = DutyCommand(base - turn, base + turn)
        return ControlOutput(duty, Status.BALANCING)

"""Deterministic multi-rate simulation loop and trace/metrics plumbing.

Physics advances at ``physics_dt`` (1 kHz default) while sensing,
estimation, and control run once per ``control_period`` (100 Hz
default). Each control tick, in order: read the IMU, update the tilt
filter, drain any due commands, run the controller, and refresh the
actuator; the resulting force is held for the physics substeps until the
next tick. Everything is seeded, so a scenario replays bit-identically.
"""

from __future__ import annotations

import math
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, IO, Iterable

from .actuation import MotorParams, MotorState, actuate
from .commands import Command, CommandKind, CommandQueue
from .control import Controller, ControllerConfig, Status
from .estimation import FilterConfig, FilterState, reset as filter_reset, update as filter_update
from .plant import RobotParams, StateVector, derivatives, step
from .sensors import ImuConfig, ImuState, accel_tilt, sample

__all__ = [
    "ScenarioConfig",
    "TelemetryFrame",
    "RunMetrics",
    "run",
    "settling_time",
    "write_trace",
    "read_trace",
    "TRACE_HEADER",
]

TRACE_HEADER = "t,theta_true,theta_est,x,v,wheel_speed_avg,duty_left,duty_right,status"


def _default_initial_state() -> StateVector:
    return StateVector(x=0.0, v=0.0, theta=0.087, omega=0.0)


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything a run needs; equal configs yield identical traces."""

    duration: float = 10.0
    physics_dt: float = 0.001
    control_period: float = 0.01
    initial_state: StateVector = field(default_factory=_default_initial_state)
    seed: int = 7
    plant: RobotParams = field(default_factory=RobotParams)
    motor: MotorParams = field(default_factory=MotorParams)
    imu: ImuConfig = field(default_factory=ImuConfig)
    filter: FilterConfig = field(default_factory=FilterConfig)
    control: ControllerConfig = field(default_factory=ControllerConfig)
    command_script: tuple[tuple[float, Command], ...] = ()
    settle_band: float = 0.01
    settle_hold: float = 0.5

    def __post_init__(self) -> None:
        if not self.duration > 0.0:
            raise ValueError(f"duration must be > 0, got {self.duration}")
        if not (0.0 < self.physics_dt <= 0.01):
            raise ValueError(f"physics_dt must be in (0, 0.01], got {self.physics_dt}")
        ratio = self.control_period / self.physics_dt
        if not (math.isfinite(ratio) and ratio >= 1.0 and abs(ratio - round(ratio)) < 1e-9):
            raise ValueError(
                f"control_period ({self.control_period}) must be an integer multiple "
                f"of physics_dt ({self.physics_dt})"
            )
        if not (self.settle_band > 0.0 and self.settle_hold >= 0.0):
            raise ValueError("settle_band must be > 0 and settle_hold >= 0")
        script = []
        for entry in self.command_script:
            t, cmd = entry
            if not (math.isfinite(t) and t >= 0.0):
                raise ValueError(f"scripted command time must be >= 0, got {t}")
            if not isinstance(cmd, Command):
                raise ValueError(f"scripted entry must hold a Command, got {cmd!r}")
            script.append((float(t), cmd))
        script.sort(key=lambda e: e[0])
        object.__setattr__(self, "command_script", tuple(script))

    @property
    def substeps_per_tick(self) -> int:
        return round(self.control_period / self.physics_dt)


@dataclass(frozen=True, slots=True)
class TelemetryFrame:
    t: float
    theta_true: float
    theta_est: float
    x: float
    v: float
    wheel_speed_avg: float
    duty_left: float
    duty_right: float
    status: Status


@dataclass(frozen=True, slots=True)
class RunMetrics:
    settled: bool
    settling_time: float | None
    max_abs_theta: float
    rms_theta: float
    fell: bool
    final_x: float
    mean_yaw_rate: float


def settling_time(trace: list[TelemetryFrame], band: float, hold: float) -> float | None:
    """First time T with |theta_true| <= band over [T, T+hold] (or to trace end).

    Returns None if no such window exists.
    """
    if not trace:
        raise ValueError("settling_time requires a non-empty trace")
    streak_start: float | None = None
    for frame in trace:
        if abs(frame.theta_true) <= band:
            if streak_start is None:
                streak_start = frame.t
            if frame.t - streak_start >= hold:
                return streak_start
        else:
            streak_start = None
    # An in-band tail that runs to the end of the trace qualifies even if
    # it is shorter than the hold window.
    return streak_start


def run(
    scenario: ScenarioConfig,
    live_command_source: CommandQueue | None = None,
    *,
    frame_sink: Callable[[TelemetryFrame], None] | None = None,
    pace: bool = False,
    stop_event: threading.Event | None = None,
    collect_trace: bool = True,
) -> tuple[list[TelemetryFrame], RunMetrics]:
    """Simulate one scenario and return its telemetry trace and metrics.

    ``live_command_source`` supplies time-tagged commands from outside
    (the teleop server); scripted and live commands due on the same tick
    are applied in timestamp order, scripted first on ties. ``pace``
    slaves the loop to the wall clock (serve mode); batch runs go flat
    out. ``collect_trace=False`` keeps only running aggregates so an
    open-ended paced run cannot grow without bound.
    """
    cp = scenario.control_period
    substeps = scenario.substeps_per_tick
    n_ticks = None if math.isinf(scenario.duration) else _tick_count(scenario.duration, cp)

    state = scenario.initial_state
    motor = MotorState(0.0, 0.0)
    imu_state = ImuState.create(scenario.imu, scenario.seed)
    filt_cfg = scenario.filter
    filt = FilterState(0.0)
    controller = Controller(scenario.control)
    held_force = 0.0
    realign = True

    script = list(scenario.command_script)
    script_idx = 0

    trace: list[TelemetryFrame] = []
    frames_seen = 0
    sum_sq_theta = 0.0
    max_abs_theta = 0.0
    sum_yaw = 0.0
    fell = False

    wall_next = time.monotonic()
    tick = 0
    while n_ticks is None or tick < n_ticks:
        if stop_event is not None and stop_event.is_set():
            break
        t = tick * cp

        # Sense with the force applied over the interval just ended.
        a_x = derivatives(state, held_force, scenario.plant).dv
        reading, imu_state = sample(state, a_x, imu_state, scenario.imu, cp, t)
        tilt = accel_tilt(reading)
        if realign:
            filt = filter_reset(tilt)
            realign = False
        filt = filter_update(filt, reading.gyro, tilt, cp, filt_cfg)

        # Apply every command due by now, in timestamp order.
        due: list[tuple[float, int, int, Command]] = []
        while script_idx < len(script) and script[script_idx][0] <= t:
            when, cmd = script[script_idx]
            due.append((when, 0, script_idx, cmd))
            script_idx += 1
        if live_command_source is not None:
            for record in live_command_source.pop_due(t):
                due.append((record.apply_at, 1, record.seq, record.command))
        due.sort(key=lambda e: (e[0], e[1], e[2]))
        for _, _, _, cmd in due:
            if cmd.kind is CommandKind.SET_ALPHA:
                filt_cfg = FilterConfig(alpha=cmd.values[0])
            elif cmd.kind is CommandKind.RESET:
                state = scenario.initial_state
                motor = MotorState(0.0, 0.0)
                held_force = 0.0
                controller.reset()
                # The pose is known exactly here, so seed the filter with it.
                # Re-measuring on the next tick would trust one accelerometer
                # sample taken during the post-reset actuation transient.
                filt = filter_reset(scenario.initial_state.theta)
            elif cmd.kind is CommandKind.TELEMETRY_RATE:
                pass  # session-level concern, handled by the server
            else:
                controller.handle_command(cmd)

        out = controller.balance_step(filt.theta_est, motor.average, cp)

        frame = TelemetryFrame(
            t=t,
            theta_true=state.theta,
            theta_est=filt.theta_est,
            x=state.x,
            v=state.v,
            wheel_speed_avg=motor.average,
            duty_left=out.duty.left,
            duty_right=out.duty.right,
            status=out.status,
        )
        if collect_trace:
            trace.append(frame)
        if frame_sink is not None:
            frame_sink(frame)
        frames_seen += 1
        sum_sq_theta += state.theta * state.theta
        if abs(state.theta) > max_abs_theta:
            max_abs_theta = abs(state.theta)
        if out.status is Status.FALLEN:
            fell = True

        motor, held_force, yaw_rate = actuate(out.duty, motor, state, cp, scenario.motor)
        sum_yaw += yaw_rate
        for _ in range(substeps):
            state = step(state, held_force, scenario.physics_dt, scenario.plant)

        tick += 1
        if pace:
            wall_next += cp
            delay = wall_next - time.monotonic()
            if delay > 0.0:
                time.sleep(delay)

    settle_t = None
    if collect_trace and trace:
        settle_t = settling_time(trace, scenario.settle_band, scenario.settle_hold)
    if fell:
        settle_t = None
    metrics = RunMetrics(
        settled=settle_t is not None,
        settling_time=settle_t,
        max_abs_theta=max_abs_theta,
        rms_theta=math.sqrt(sum_sq_theta / frames_seen) if frames_seen else 0.0,
        fell=fell,
        final_x=state.x,
        mean_yaw_rate=sum_yaw / frames_seen if frames_seen else 0.0,
    )
    return trace, metrics


def _tick_count(duration: float, control_period: float) -> int:
    ratio = duration / control_period
    if abs(ratio - round(ratio)) < 1e-9:
        return max(1, round(ratio))
    return max(1, math.floor(ratio))


def _fmt(value: float) -> str:
    return f"{value:.9g}"


def write_trace(trace: Iterable[TelemetryFrame], destination: str | IO[str]) -> None:
    """Write frames as CSV, header first, floats at 9 significant digits."""
    own = isinstance(destination, str)
    out = open(destination, "w", encoding="ascii", newline="") if own else destination
    try:
        out.write(TRACE_HEADER + "\n")
        for f in trace:
            out.write(
                f"{_fmt(f.t)},{_fmt(f.theta_true)},{_fmt(f.theta_est)},{_fmt(f.x)},"
                f"{_fmt(f.v)},{_fmt(f.wheel_speed_avg)},{_fmt(f.duty_left)},"
                f"{_fmt(f.duty_right)},{f.status.value}\n"
            )
    finally:
        if own:
            out.close()


def read_trace(source: str | IO[str]) -> list[TelemetryFrame]:
    """Parse a trace CSV produced by write_trace."""
    own = isinstance(source, str)
    inp = open(source, "r", encoding="ascii") if own else source
    try:
        lines = [line.rstrip("\n") for line in inp if line.strip()]
    finally:
        if own:
            inp.close()
    if not lines or lines[0] != TRACE_HEADER:
        raise ValueError("not a telemetry trace: bad or missing header")
    frames = []
    for line in lines[1:]:
        parts = line.split(",")
        if len(parts) != 9:
            raise ValueError(f"malformed trace row: {line!r}")
        frames.append(
            TelemetryFrame(
                t=float(parts[0]),
                theta_true=float(parts[1]),
                theta_est=float(parts[2]),
                x=float(parts[3]),
                v=float(parts[4]),
                wheel_speed_avg=float(parts[5]),
                duty_left=float(parts[6]),
                duty_right=float(parts[7]),
                status=Status(parts[8]),
            )
        )
    return frames

"""Scenario configuration files: flat key=value text with namespaced keys.

Example::

    # 5 degree tilt, noisy sensors, 10 seconds
    sim.duration = 10
    sim.theta0 = 0.087
    control.outer.kp = 18
    script.0 = 2.0 F        # scripted teleop: go forward at t=2 s

Unknown keys are errors, as are duplicates. Command-line overrides use
the same key space and replace file values.
"""

from __future__ import annotations

from pathlib import Path
from typing import Iterable

from .actuation import MotorParams
from .commands import Command
from .control import ControllerConfig, PidGains
from .estimation import FilterConfig
from .plant import RobotParams, StateVector
from .sensors import ImuConfig
from .simloop import ScenarioConfig
from .teleop import ProtocolError, parse_frame

__all__ = ["ConfigError", "parse_kv_lines", "collect_values", "build_scenario", "load_scenario"]


class ConfigError(ValueError):
    pass


_SIM_FLOAT_KEYS = {
    "sim.duration",
    "sim.physics_dt",
    "sim.control_period",
    "sim.x0",
    "sim.v0",
    "sim.theta0",
    "sim.omega0",
    "sim.settle_band",
    "sim.settle_hold",
}

_PLANT_KEYS = {
    "plant.cart_mass": "cart_mass",
    "plant.pendulum_mass": "pendulum_mass",
    "plant.com_distance": "com_distance",
    "plant.pendulum_inertia": "pendulum_inertia",
    "plant.wheel_radius": "wheel_radius",
    "plant.gravity": "gravity",
    "plant.cart_friction": "cart_friction",
    "plant.pivot_friction": "pivot_friction",
}

# motor.wheel_radius is intentionally absent: the drivetrain always uses
# the plant's wheel radius so the two cannot drift apart.
_MOTOR_KEYS = {
    "motor.max_step_rate": "max_step_rate",
    "motor.holding_torque": "holding_torque",
    "motor.speed_tracking_gain": "speed_tracking_gain",
    "motor.track_width": "track_width",
}

_IMU_KEYS = {
    "imu.accel_noise_std": "accel_noise_std",
    "imu.gyro_noise_std": "gyro_noise_std",
    "imu.gyro_bias_init": "gyro_bias_init",
    "imu.gyro_bias_walk_std": "gyro_bias_walk_std",
    "imu.accel_range": "accel_range",
    "imu.gyro_range": "gyro_range",
    "imu.sample_rate": "sample_rate",
}

_CONTROL_FLOAT_KEYS = {
    "control.outer.kp",
    "control.outer.ki",
    "control.outer.kd",
    "control.inner.kp",
    "control.inner.ki",
    "control.inner.kd",
    "control.fall_threshold",
    "control.drive_step",
    "control.turn_step",
    "control.mix_gain",
}

_INT_KEYS = {"sim.seed", "motor.steps_per_rev"}

_FLOAT_KEYS = (
    _SIM_FLOAT_KEYS
    | set(_PLANT_KEYS)
    | set(_MOTOR_KEYS)
    | set(_IMU_KEYS)
    | _CONTROL_FLOAT_KEYS
    | {"filter.alpha"}
)

KNOWN_KEYS = _FLOAT_KEYS | _INT_KEYS


def parse_kv_lines(text: str, source: str = "<config>") -> dict[str, str]:
    """Raw key=value extraction with comment stripping and duplicate checks."""
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not sep or not key:
            raise ConfigError(f"{source}:{lineno}: expected key=value, got {raw.strip()!r}")
        if key in values:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        values[key] = value
    return values


def _check_keys(values: dict[str, str]) -> None:
    for key in values:
        if key in KNOWN_KEYS:
            continue
        if key.startswith("script.") and key[len("script."):].isdigit():
            continue
        raise ConfigError(f"unknown config key {key!r}")


def _floats(values: dict[str, str], mapping: dict[str, str]) -> dict[str, float]:
    out = {}
    for key, kwarg in mapping.items():
        if key in values:
            out[kwarg] = _to_float(key, values[key])
    return out


def _to_float(key: str, text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"{key}: not a number: {text!r}") from None


def _to_int(key: str, text: str) -> int:
    try:
        return int(text, 10)
    except ValueError:
        raise ConfigError(f"{key}: not an integer: {text!r}") from None


def _parse_script(values: dict[str, str]) -> tuple[tuple[float, Command], ...]:
    entries = []
    for key, value in values.items():
        if not key.startswith("script."):
            continue
        parts = value.split(None, 1)
        if len(parts) != 2:
            raise ConfigError(f"{key}: expected '<time> <command>', got {value!r}")
        when = _to_float(key, parts[0])
        try:
            cmd = parse_frame(parts[1] + "\n")
        except ProtocolError as err:
            raise ConfigError(f"{key}: bad command {parts[1]!r} ({err.code})") from None
        entries.append((int(key[len("script."):]), when, cmd))
    entries.sort()
    return tuple((when, cmd) for _, when, cmd in entries)


def build_scenario(values: dict[str, str]) -> ScenarioConfig:
    """Turn validated key/value text into a full ScenarioConfig."""
    _check_keys(values)

    plant_kwargs = _floats(values, _PLANT_KEYS)
    try:
        plant = RobotParams(**plant_kwargs)
    except ValueError as err:
        raise ConfigError(f"plant: {err}") from None

    motor_kwargs = _floats(values, _MOTOR_KEYS)
    if "motor.steps_per_rev" in values:
        motor_kwargs["steps_per_rev"] = _to_int("motor.steps_per_rev", values["motor.steps_per_rev"])
    try:
        motor = MotorParams(wheel_radius=plant.wheel_radius, **motor_kwargs)
    except ValueError as err:
        raise ConfigError(f"motor: {err}") from None

    imu_kwargs = _floats(values, _IMU_KEYS)
    try:
        imu = ImuConfig(gravity=plant.gravity, **imu_kwargs)
    except ValueError as err:
        raise ConfigError(f"imu: {err}") from None

    try:
        filt = FilterConfig(alpha=_to_float("filter.alpha", values["filter.alpha"])) \
            if "filter.alpha" in values else FilterConfig()
    except ValueError as err:
        raise ConfigError(f"filter: {err}") from None

    defaults = ControllerConfig()

    def gain(key: str, fallback: float) -> float:
        return _to_float(key, values[key]) if key in values else fallback

    try:
        control = ControllerConfig(
            outer=PidGains(
                gain("control.outer.kp", defaults.outer.kp),
                gain("control.outer.ki", defaults.outer.ki),
                gain("control.outer.kd", defaults.outer.kd),
            ),
            inner=PidGains(
                gain("control.inner.kp", defaults.inner.kp),
                gain("control.inner.ki", defaults.inner.ki),
                gain("control.inner.kd", defaults.inner.kd),
            ),
            fall_threshold=gain("control.fall_threshold", defaults.fall_threshold),
            drive_step=gain("control.drive_step", defaults.drive_step),
            turn_step=gain("control.turn_step", defaults.turn_step),
            mix_gain=gain("control.mix_gain", defaults.mix_gain),
            setpoint_limit=motor.max_wheel_speed,
        )
    except ValueError as err:
        raise ConfigError(f"control: {err}") from None

    sim_defaults = ScenarioConfig()

    def simval(key: str, fallback: float) -> float:
        return _to_float(key, values[key]) if key in values else fallback

    try:
        initial = StateVector(
            x=simval("sim.x0", sim_defaults.initial_state.x),
            v=simval("sim.v0", sim_defaults.initial_state.v),
            theta=simval("sim.theta0", sim_defaults.initial_state.theta),
            omega=simval("sim.omega0", sim_defaults.initial_state.omega),
        )
        return ScenarioConfig(
            duration=simval("sim.duration", sim_defaults.duration),
            physics_dt=simval("sim.physics_dt", sim_defaults.physics_dt),
            control_period=simval("sim.control_period", sim_defaults.control_period),
            initial_state=initial,
            seed=_to_int("sim.seed", values["sim.seed"]) if "sim.seed" in values else sim_defaults.seed,
            plant=plant,
            motor=motor,
            imu=imu,
            filter=filt,
            control=control,
            command_script=_parse_script(values),
            settle_band=simval("sim.settle_band", sim_defaults.settle_band),
            settle_hold=simval("sim.settle_hold", sim_defaults.settle_hold),
        )
    except ValueError as err:
        raise ConfigError(str(err)) from None


def collect_values(path: str | Path | None, overrides: Iterable[str] = ()) -> dict[str, str]:
    """Merge file values with overrides (overrides win); raw strings out."""
    values: dict[str, str] = {}
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as err:
            raise ConfigError(f"cannot read config file: {err}") from None
        values = parse_kv_lines(text, source=str(path))
    for item in overrides:
        key, sep, value = item.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError(f"override must be key=value, got {item!r}")
        values[key] = value.strip()
    return values


def load_scenario(path: str | Path | None, overrides: Iterable[str] = ()) -> ScenarioConfig:
    """Load a scenario from an optional file plus key=value overrides."""
    return build_scenario(collect_values(path, overrides))

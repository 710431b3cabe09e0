"""Two-wheeled self-balancing robot simulator with network teleoperation.

An inverted-pendulum-on-cart plant driven by stepper-style wheel motors,
sensed through an emulated IMU, stabilized by a complementary filter and
a cascaded PID stack, and exposed over a latency-injecting teleop
protocol. Batch runs, gain tuning, and the live server share one
deterministic simulation loop.
"""

from .actuation import DutyCommand, MotorParams, MotorState, actuate
from .commands import Command, CommandKind, CommandQueue
from .control import (
    Controller,
    ControllerConfig,
    ControlOutput,
    PidGains,
    PidState,
    Status,
    SteeringState,
    pid_step,
)
from .estimation import FilterConfig, FilterState
from .plant import RobotParams, StateDerivative, StateVector, derivatives, linearize, step, total_energy
from .sensors import ImuConfig, ImuSample, ImuState, accel_tilt, sample
from .simloop import RunMetrics, ScenarioConfig, TelemetryFrame, run, settling_time, write_trace
from .teleop import LinkConfig, ProtocolError, TeleopServer, encode_telemetry, parse_frame

__version__ = "1.0.0"

__all__ = [
    "DutyCommand",
    "MotorParams",
    "MotorState",
    "actuate",
    "Command",
    "CommandKind",
    "CommandQueue",
    "Controller",
    "ControllerConfig",
    "ControlOutput",
    "PidGains",
    "PidState",
    "Status",
    "SteeringState",
    "pid_step",
    "FilterConfig",
    "FilterState",
    "RobotParams",
    "StateDerivative",
    "StateVector",
    "derivatives",
    "linearize",
    "step",
    "total_energy",
    "ImuConfig",
    "ImuSample",
    "ImuState",
    "accel_tilt",
    "sample",
    "RunMetrics",
    "ScenarioConfig",
    "TelemetryFrame",
    "run",
    "settling_time",
    "write_trace",
    "LinkConfig",
    "ProtocolError",
    "TeleopServer",
    "encode_telemetry",
    "parse_frame",
    "__version__",
]

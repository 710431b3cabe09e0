"""Teleoperation command values and the queue that feeds them to the sim.

Commands are small immutable values shared by the wire protocol, the
controller and the simulation loop. ``CommandQueue`` is the one
cross-thread handoff point: sessions push commands tagged with the sim
time at which they become due, the loop drains everything due each tick
without blocking.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from enum import Enum

__all__ = ["CommandKind", "Command", "CommandQueue", "QueueRecord"]


class CommandKind(Enum):
    FORWARD = "F"
    BACKWARD = "B"
    LEFT = "L"
    RIGHT = "R"
    STOP = "S"
    SET_GAINS = "G"
    SET_ALPHA = "A"
    TELEMETRY_RATE = "T"
    RESET = "X"


STEERING_KINDS = frozenset(
    {CommandKind.FORWARD, CommandKind.BACKWARD, CommandKind.LEFT, CommandKind.RIGHT, CommandKind.STOP}
)

_PARAMETERIZED_KINDS = frozenset(
    {CommandKind.SET_GAINS, CommandKind.SET_ALPHA, CommandKind.TELEMETRY_RATE}
)


@dataclass(frozen=True, slots=True)
class Command:
    """A parsed teleop instruction; parameterized kinds carry values."""

    kind: CommandKind
    values: tuple[float, ...] = ()

    @classmethod
    def simple(cls, kind: CommandKind) -> "Command":
        if kind in _PARAMETERIZED_KINDS:
            raise ValueError(f"{kind.name} requires arguments")
        return cls(kind)

    @classmethod
    def set_gains(cls, kp: float, ki: float, kd: float) -> "Command":
        for name, value in (("kp", kp), ("ki", ki), ("kd", kd)):
            if not (math.isfinite(value) and value >= 0.0):
                raise ValueError(f"{name} must be finite and >= 0, got {value}")
        return cls(CommandKind.SET_GAINS, (kp, ki, kd))

    @classmethod
    def set_alpha(cls, alpha: float) -> "Command":
        if not (math.isfinite(alpha) and 0.0 <= alpha <= 1.0):
            raise ValueError(f"alpha must be in [0, 1], got {alpha}")
        return cls(CommandKind.SET_ALPHA, (alpha,))

    @classmethod
    def telemetry_rate(cls, hz: float) -> "Command":
        if not (math.isfinite(hz) and 1.0 <= hz <= 100.0):
            raise ValueError(f"telemetry rate must be in [1, 100] Hz, got {hz}")
        return cls(CommandKind.TELEMETRY_RATE, (hz,))


@dataclass(frozen=True, slots=True)
class QueueRecord:
    """Bookkeeping for one queued command, kept for latency inspection."""

    command: Command
    receipt_time: float
    apply_at: float
    seq: int


class CommandQueue:
    """Bounded, thread-safe holding area for time-tagged commands.

    Overflow drops the oldest pending entry (and counts it) rather than
    ever blocking a producer or the simulation loop. ``history`` records
    every accepted entry's receipt and due times for tests and logs.
    """

    def __init__(self, maxlen: int = 256):
        if maxlen < 1:
            raise ValueError("maxlen must be >= 1")
        self._maxlen = maxlen
        self._lock = threading.Lock()
        self._pending: list[QueueRecord] = []
        self._seq = 0
        self.dropped = 0
        self.history: list[QueueRecord] = []

    def push(self, command: Command, apply_at: float, receipt_time: float = 0.0) -> QueueRecord:
        with self._lock:
            record = QueueRecord(command, receipt_time, apply_at, self._seq)
            self._seq += 1
            if len(self._pending) >= self._maxlen:
                oldest = min(range(len(self._pending)), key=lambda i: self._pending[i].seq)
                self._pending.pop(oldest)
                self.dropped += 1
            self._pending.append(record)
            self.history.append(record)
            return record

    def pop_due(self, now: float) -> list[QueueRecord]:
        """All commands due at sim time ``now``, ordered by (due time, arrival)."""
        with self._lock:
            due = [r for r in self._pending if r.apply_at <= now]
            if due:
                self._pending = [r for r in self._pending if r.apply_at > now]
        due.sort(key=lambda r: (r.apply_at, r.seq))
        return due

    def __len__(self) -> int:
        with self._lock:
            return len(self._pending)

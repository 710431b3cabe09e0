"""Remote-operation link: wire protocol, injected latency, and the server.

The wire grammar is newline-delimited ASCII, one command per line:
``F``/``B``/``L``/``R``/``S`` for steering, ``G <kp> <ki> <kd>`` for
outer-loop gains, ``A <alpha>`` for the filter blend, ``T <hz>`` for the
session's telemetry rate, ``X`` for reset. Malformed input is answered
with ``ERR <code>`` and never kills a session. Telemetry mirrors the
frame fields as ``TM ...`` lines at 6 significant digits.

The radio link of a real robot is emulated as an explicit delay stage:
each inbound command is held for a seeded mean-plus-jitter latency
before it reaches the simulation's command queue, with per-client
ordering preserved.
"""

from __future__ import annotations

import math
import mimetypes
import random
import re
import socketserver
import threading
import time
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

from websockets.datastructures import Headers
from websockets.http11 import Response
from websockets.sync.server import serve as ws_serve

from .commands import Command, CommandKind, CommandQueue
from .control import Status
from .simloop import RunMetrics, ScenarioConfig, TelemetryFrame, run

__all__ = [
    "ProtocolError",
    "UNKNOWN_COMMAND",
    "MALFORMED_ARGUMENT",
    "FRAME_TOO_LONG",
    "LinkConfig",
    "parse_frame",
    "encode_telemetry",
    "parse_telemetry",
    "DelayStage",
    "LineSplitter",
    "TeleopServer",
    "serve",
    "DEFAULT_TELEMETRY_HZ",
]

UNKNOWN_COMMAND = "UnknownCommand"
MALFORMED_ARGUMENT = "MalformedArgument"
FRAME_TOO_LONG = "FrameTooLong"

DEFAULT_TELEMETRY_HZ = 20.0

_NUMBER_RE = re.compile(r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?\Z")

_ZERO_ARG_OPS = {
    "F": CommandKind.FORWARD,
    "B": CommandKind.BACKWARD,
    "L": CommandKind.LEFT,
    "R": CommandKind.RIGHT,
    "S": CommandKind.STOP,
    "X": CommandKind.RESET,
}


class ProtocolError(ValueError):
    """A rejected wire frame; ``code`` is what goes back to the client."""

    def __init__(self, code: str, detail: str = ""):
        super().__init__(detail or code)
        self.code = code


@dataclass(frozen=True)
class LinkConfig:
    latency_mean: float = 0.05
    latency_jitter_std: float = 0.01
    max_frame_bytes: int = 64

    def __post_init__(self) -> None:
        if not (math.isfinite(self.latency_mean) and self.latency_mean >= 0.0):
            raise ValueError(f"latency_mean must be >= 0, got {self.latency_mean}")
        if not (math.isfinite(self.latency_jitter_std) and self.latency_jitter_std >= 0.0):
            raise ValueError(f"latency_jitter_std must be >= 0, got {self.latency_jitter_std}")
        if self.max_frame_bytes < 2:
            raise ValueError(f"max_frame_bytes must be >= 2, got {self.max_frame_bytes}")


def _parse_number(token: str) -> float:
    if _NUMBER_RE.fullmatch(token) is None:
        raise ProtocolError(MALFORMED_ARGUMENT, f"not a decimal number: {token!r}")
    value = float(token)
    if not math.isfinite(value):
        raise ProtocolError(MALFORMED_ARGUMENT, f"number out of range: {token!r}")
    return value


def parse_frame(line: bytes | str, max_frame_bytes: int = 64) -> Command:
    """Parse one wire line into a Command or raise ProtocolError.

    The length check counts raw bytes including the newline. One trailing
    newline (optionally preceded by a carriage return) is stripped; other
    surrounding whitespace is ignored.
    """
    data = line.encode("utf-8", "replace") if isinstance(line, str) else bytes(line)
    if len(data) > max_frame_bytes:
        raise ProtocolError(FRAME_TOO_LONG, f"{len(data)} byte frame exceeds {max_frame_bytes}")
    if data.endswith(b"\n"):
        data = data[:-1]
        if data.endswith(b"\r"):
            data = data[:-1]
    # latin-1 is total on bytes; junk bytes fail the opcode/number checks.
    tokens = data.decode("latin-1").split()
    if not tokens:
        raise ProtocolError(UNKNOWN_COMMAND, "empty frame")
    op, args = tokens[0], tokens[1:]

    if op in _ZERO_ARG_OPS:
        if args:
            raise ProtocolError(MALFORMED_ARGUMENT, f"{op} takes no arguments")
        return Command.simple(_ZERO_ARG_OPS[op])
    if op == "G":
        if len(args) != 3:
            raise ProtocolError(MALFORMED_ARGUMENT, "G takes exactly 3 arguments")
        kp, ki, kd = (_parse_number(a) for a in args)
        try:
            return Command.set_gains(kp, ki, kd)
        except ValueError as err:
            raise ProtocolError(MALFORMED_ARGUMENT, str(err)) from None
    if op == "A":
        if len(args) != 1:
            raise ProtocolError(MALFORMED_ARGUMENT, "A takes exactly 1 argument")
        try:
            return Command.set_alpha(_parse_number(args[0]))
        except ValueError as err:
            raise ProtocolError(MALFORMED_ARGUMENT, str(err)) from None
    if op == "T":
        if len(args) != 1:
            raise ProtocolError(MALFORMED_ARGUMENT, "T takes exactly 1 argument")
        try:
            return Command.telemetry_rate(_parse_number(args[0]))
        except ValueError as err:
            raise ProtocolError(MALFORMED_ARGUMENT, str(err)) from None
    raise ProtocolError(UNKNOWN_COMMAND, f"unknown opcode {op!r}")


def encode_telemetry(frame: TelemetryFrame) -> bytes:
    """One TM line, floats at 6 significant digits."""
    body = " ".join(
        f"{v:.6g}"
        for v in (
            frame.t,
            frame.theta_true,
            frame.theta_est,
            frame.x,
            frame.v,
            frame.duty_left,
            frame.duty_right,
        )
    )
    return f"TM {body} {frame.status.value}\n".encode("ascii")


def parse_telemetry(line: bytes | str) -> TelemetryFrame:
    """Inverse of encode_telemetry; wheel_speed_avg is not on the wire."""
    text = line.decode("ascii") if isinstance(line, bytes) else line
    tokens = text.split()
    if len(tokens) != 9 or tokens[0] != "TM":
        raise ValueError(f"not a telemetry line: {text!r}")
    values = [float(tok) for tok in tokens[1:8]]
    return TelemetryFrame(
        t=values[0],
        theta_true=values[1],
        theta_est=values[2],
        x=values[3],
        v=values[4],
        wheel_speed_avg=0.0,
        duty_left=values[5],
        duty_right=values[6],
        status=Status(tokens[8]),
    )


class DelayStage:
    """Per-client latency injection with seeded jitter.

    Each delay draw is clamped to mean ± 3 std (never below zero, never
    below mean − 3 std), and delivery times are forced monotone so a
    client's commands arrive in the order sent. With jitter 0 the delay
    is exactly the mean, which is the deterministic test mode.
    """

    def __init__(self, link: LinkConfig, seed: int = 0):
        self._link = link
        self._rng = random.Random(seed)
        self._last = -math.inf

    def schedule(self, receipt_time: float) -> float:
        mean = self._link.latency_mean
        std = self._link.latency_jitter_std
        if std == 0.0:
            delay = mean
        else:
            delay = self._rng.gauss(mean, std)
            low = max(0.0, mean - 3.0 * std)
            delay = min(max(delay, low), mean + 3.0 * std)
        apply_at = receipt_time + delay
        if apply_at < self._last:
            apply_at = self._last
        self._last = apply_at
        return apply_at


class LineSplitter:
    """Reassemble newline-delimited frames from a byte stream.

    Yields each complete line (newline included). A frame that exceeds
    the size bound is reported once as None and its remaining bytes are
    discarded through the next newline.
    """

    def __init__(self, max_frame_bytes: int):
        self._max = max_frame_bytes
        self._buf = bytearray()
        self._skipping = False

    def push(self, data: bytes) -> list[bytes | None]:
        out: list[bytes | None] = []
        self._buf += data
        while True:
            nl = self._buf.find(b"\n")
            if nl < 0:
                if self._skipping:
                    self._buf.clear()
                elif len(self._buf) >= self._max:
                    self._buf.clear()
                    self._skipping = True
                    out.append(None)
                break
            line = bytes(self._buf[: nl + 1])
            del self._buf[: nl + 1]
            if self._skipping:
                self._skipping = False
                continue
            out.append(line if len(line) <= self._max else None)
        return out


class _TelemetrySubscription:
    """Bounded frame mailbox between the sim thread and one session writer."""

    def __init__(self, control_period: float, rate_hz: float = DEFAULT_TELEMETRY_HZ, maxlen: int = 64):
        self._cp = control_period
        self._cond = threading.Condition()
        self._frames: deque[TelemetryFrame] = deque(maxlen=maxlen)
        self._count = 0
        self._stride = 1
        self.dropped = 0
        self.set_rate(rate_hz)

    def set_rate(self, hz: float) -> None:
        with self._cond:
            self._stride = max(1, round(1.0 / (hz * self._cp)))
            self._count = 0

    def offer(self, frame: TelemetryFrame) -> None:
        with self._cond:
            index = self._count
            self._count += 1
            if index % self._stride:
                return
            if len(self._frames) == self._frames.maxlen:
                self.dropped += 1
            self._frames.append(frame)
            self._cond.notify()

    def take(self, timeout: float = 0.25) -> TelemetryFrame | None:
        with self._cond:
            if not self._frames:
                self._cond.wait(timeout)
            return self._frames.popleft() if self._frames else None

    def wake(self) -> None:
        with self._cond:
            self._cond.notify_all()


class _Session:
    """One connected client: command intake plus a paced telemetry writer."""

    def __init__(self, server: "TeleopServer", send_line: Callable[[bytes], None], label: str):
        self._server = server
        self._send_line = send_line
        self.label = label
        self.command_delay = DelayStage(server.link, server.next_seed())
        self._telemetry_delay = DelayStage(server.link, server.next_seed())
        self.subscription = _TelemetrySubscription(server.scenario.control_period)
        self._writer = threading.Thread(target=self._write_loop, daemon=True, name=f"tm-{label}")
        self.alive = True

    def start(self) -> None:
        self._server.register(self)
        self._writer.start()

    def close(self) -> None:
        self.alive = False
        self.subscription.wake()
        self._server.unregister(self)

    def _send_safe(self, data: bytes) -> None:
        try:
            self._send_line(data)
        except OSError:
            self.close()

    def handle_line(self, raw: bytes | None) -> None:
        server = self._server
        if raw is None:
            server.count_error()
            self._send_safe(f"ERR {FRAME_TOO_LONG}\n".encode("ascii"))
            return
        try:
            cmd = parse_frame(raw, server.link.max_frame_bytes)
        except ProtocolError as err:
            server.count_error()
            self._send_safe(f"ERR {err.code}\n".encode("ascii"))
            return
        if cmd.kind is CommandKind.TELEMETRY_RATE:
            # Configures this session's stream; takes effect immediately
            # rather than riding through the robot-side latency stage.
            self.subscription.set_rate(cmd.values[0])
            server.count_command()
            return
        receipt = server.sim_now()
        server.queue.push(cmd, self.command_delay.schedule(receipt), receipt)
        server.count_command()

    def _write_loop(self) -> None:
        while self.alive and not self._server.stopped:
            frame = self.subscription.take()
            if frame is None:
                continue
            due = self._telemetry_delay.schedule(time.monotonic())
            pause = due - time.monotonic()
            if pause > 0.0:
                time.sleep(pause)
            try:
                self._send_line(encode_telemetry(frame))
                self._server.count_frame()
            except OSError:
                break
        self.close()


class _TcpTeleopServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True
    teleop: "TeleopServer"


class _TcpHandler(socketserver.BaseRequestHandler):
    def handle(self) -> None:
        server: TeleopServer = self.server.teleop  # type: ignore[attr-defined]
        sock = self.request
        lock = threading.Lock()

        def send_line(data: bytes) -> None:
            with lock:
                sock.sendall(data)

        session = _Session(server, send_line, f"tcp:{self.client_address[0]}:{self.client_address[1]}")
        session.start()
        splitter = LineSplitter(server.link.max_frame_bytes)
        try:
            while not server.stopped:
                data = sock.recv(4096)
                if not data:
                    break
                for item in splitter.push(data):
                    session.handle_line(item)
        except OSError:
            pass
        finally:
            session.close()


class TeleopServer:
    """A paced simulation with TCP and WebSocket command/telemetry endpoints.

    All clients steer the same robot. Sessions never touch simulation
    state directly: commands flow through the latency stage into a
    bounded queue, telemetry flows out through per-session mailboxes that
    drop oldest frames when a client cannot keep up.
    """

    def __init__(
        self,
        scenario: ScenarioConfig,
        link: LinkConfig = LinkConfig(),
        *,
        host: str = "127.0.0.1",
        tcp_port: int = 8765,
        ws_port: int = 8766,
        seed: int = 0,
        ui_root: str | Path | None = None,
        queue_maxlen: int = 256,
    ):
        self.scenario = scenario
        self.link = link
        self.queue = CommandQueue(queue_maxlen)
        self.metrics: RunMetrics | None = None
        self._host = host
        self._tcp_port = tcp_port
        self._ws_port = ws_port
        self._ui_root = Path(ui_root).resolve() if ui_root is not None else None
        self._stop = threading.Event()
        self._sessions: list[_Session] = []
        self._lock = threading.Lock()
        self._seed = seed
        self._seed_counter = 0
        self._sim_t = 0.0
        self.commands_received = 0
        self.protocol_errors = 0
        self.frames_sent = 0
        self._sim_thread: threading.Thread | None = None
        self._tcp: _TcpTeleopServer | None = None
        self._ws = None
        self._threads: list[threading.Thread] = []

    # -- wiring ----------------------------------------------------------

    @property
    def stopped(self) -> bool:
        return self._stop.is_set()

    def next_seed(self) -> int:
        with self._lock:
            self._seed_counter += 1
            return self._seed + self._seed_counter * 7919

    def register(self, session: _Session) -> None:
        with self._lock:
            self._sessions.append(session)

    def unregister(self, session: _Session) -> None:
        with self._lock:
            if session in self._sessions:
                self._sessions.remove(session)

    def count_command(self) -> None:
        with self._lock:
            self.commands_received += 1

    def count_error(self) -> None:
        with self._lock:
            self.protocol_errors += 1

    def count_frame(self) -> None:
        with self._lock:
            self.frames_sent += 1

    def sim_now(self) -> float:
        return self._sim_t

    def _broadcast(self, frame: TelemetryFrame) -> None:
        self._sim_t = frame.t
        with self._lock:
            targets = list(self._sessions)
        for session in targets:
            session.subscription.offer(frame)

    # -- endpoints ---------------------------------------------------------

    @property
    def tcp_address(self) -> tuple[str, int]:
        assert self._tcp is not None
        return self._tcp.server_address[:2]

    @property
    def ws_address(self) -> tuple[str, int]:
        assert self._ws is not None
        return self._ws.socket.getsockname()[:2]

    def _ws_handler(self, ws) -> None:
        lock = threading.Lock()

        def send_line(data: bytes) -> None:
            try:
                with lock:
                    ws.send(data.decode("ascii"))
            except Exception as err:  # websockets raises its own closed errors
                raise OSError(str(err)) from err

        session = _Session(self, send_line, f"ws:{ws.remote_address}")
        session.start()
        try:
            for message in ws:
                raw = message.encode("utf-8", "replace") if isinstance(message, str) else bytes(message)
                if not raw.endswith(b"\n"):
                    raw += b"\n"
                session.handle_line(raw)
                if self.stopped:
                    break
        except Exception:
            pass
        finally:
            session.close()

    def _process_request(self, connection, request):
        """Serve the packaged UI over plain HTTP on the WebSocket port."""
        if request.headers.get("Upgrade", "").lower() == "websocket":
            return None
        if self._ui_root is None:
            return connection.respond(404, "no UI bundled; this is a WebSocket endpoint\n")
        rel = request.path.split("?", 1)[0].lstrip("/") or "index.html"
        target = (self._ui_root / rel).resolve()
        if not target.is_relative_to(self._ui_root) or not target.is_file():
            return connection.respond(404, "not found\n")
        ctype = mimetypes.guess_type(target.name)[0] or "application/octet-stream"
        body = target.read_bytes()
        headers = Headers([("Content-Type", ctype), ("Content-Length", str(len(body)))])
        return Response(200, "OK", headers, body)

    # -- lifecycle ---------------------------------------------------------

    def start(self) -> None:
        self._tcp = _TcpTeleopServer((self._host, self._tcp_port), _TcpHandler)
        self._tcp.teleop = self
        try:
            self._ws = ws_serve(
                self._ws_handler,
                self._host,
                self._ws_port,
                process_request=self._process_request,
            )
        except OSError:
            self._tcp.server_close()
            raise
        self._sim_thread = threading.Thread(target=self._run_sim, name="simloop", daemon=True)
        tcp_thread = threading.Thread(target=self._tcp.serve_forever, name="tcp-accept", daemon=True)
        ws_thread = threading.Thread(target=self._ws.serve_forever, name="ws-accept", daemon=True)
        self._threads = [tcp_thread, ws_thread]
        self._sim_thread.start()
        tcp_thread.start()
        ws_thread.start()

    def _run_sim(self) -> None:
        try:
            _, self.metrics = run(
                self.scenario,
                self.queue,
                frame_sink=self._broadcast,
                pace=True,
                stop_event=self._stop,
                collect_trace=False,
            )
        finally:
            self._stop.set()

    def wait(self, timeout: float | None = None) -> bool:
        """Block until the simulation ends; True if it has."""
        assert self._sim_thread is not None
        self._sim_thread.join(timeout)
        return not self._sim_thread.is_alive()

    def stop(self) -> None:
        self._stop.set()
        if self._sim_thread is not None:
            self._sim_thread.join(timeout=5.0)
        with self._lock:
            sessions = list(self._sessions)
        for session in sessions:
            session.close()
        if self._tcp is not None:
            self._tcp.shutdown()
            self._tcp.server_close()
        if self._ws is not None:
            self._ws.shutdown()


def serve(
    scenario: ScenarioConfig,
    link: LinkConfig = LinkConfig(),
    **kwargs,
) -> RunMetrics | None:
    """Run a teleop server until its scenario ends; returns final metrics."""
    server = TeleopServer(scenario, link, **kwargs)
    server.start()
    try:
        server.wait()
    finally:
        server.stop()
    return server.metrics

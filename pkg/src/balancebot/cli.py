"""Command-line entry point: batch runs, gain tuning, and the teleop server.

Metrics are printed as ``key=value`` lines so shell pipelines can grep
them. Exit status is 0 whenever the requested operation completed; a
robot that falls over in a `run` is a result, not an error.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import replace

from .config import ConfigError, build_scenario, collect_values
from .simloop import RunMetrics, run, write_trace
from .teleop import LinkConfig, TeleopServer
from .tuning import (
    GainBounds,
    Objective,
    SearchMethod,
    TuneSpec,
    TuneTarget,
    tune,
)

__all__ = ["main"]

# Search windows around the shipped gains; override with --bounds.
_DEFAULT_OUTER_BOUNDS = "0:0.1,0.1:0.8,0:0.01"
_DEFAULT_INNER_BOUNDS = "0.005:0.05,0:0.1,0:0.005"


def _fmt_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if value is None:
        return "none"
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def _print_metrics(metrics: RunMetrics, extra: dict | None = None) -> None:
    pairs = [
        ("settled", metrics.settled),
        ("settling_time", metrics.settling_time),
        ("max_abs_theta", metrics.max_abs_theta),
        ("rms_theta", metrics.rms_theta),
        ("fell", metrics.fell),
        ("final_x", metrics.final_x),
        ("mean_yaw_rate", metrics.mean_yaw_rate),
    ]
    if extra:
        pairs.extend(extra.items())
    for key, value in pairs:
        print(f"{key}={_fmt_value(value)}")


def _parse_endpoint(text: str) -> tuple[str, int]:
    host, sep, port = text.rpartition(":")
    if not sep or not host:
        raise argparse.ArgumentTypeError(f"expected HOST:PORT, got {text!r}")
    try:
        return host, int(port)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad port in {text!r}") from None


def _parse_bounds(text: str, expected: int) -> tuple[GainBounds, ...]:
    parts = [p for p in text.split(",") if p.strip()]
    if len(parts) != expected:
        raise ConfigError(f"--bounds needs {expected} low:high entries, got {len(parts)}")
    bounds = []
    for part in parts:
        low, sep, high = part.partition(":")
        if not sep:
            raise ConfigError(f"bad bounds entry {part!r}, expected low:high")
        try:
            bounds.append(GainBounds(float(low), float(high)))
        except ValueError as err:
            raise ConfigError(f"bad bounds entry {part!r}: {err}") from None
    return tuple(bounds)


def _add_scenario_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", metavar="PATH", help="scenario config file (key=value lines)")
    parser.add_argument(
        "--set",
        dest="overrides",
        metavar="KEY=VALUE",
        action="append",
        default=[],
        help="override a config key (repeatable; beats file values)",
    )


def _cmd_run(args: argparse.Namespace) -> int:
    scenario = build_scenario(collect_values(args.config, args.overrides))
    trace, metrics = run(scenario)
    if args.trace:
        write_trace(trace, args.trace)
    _print_metrics(metrics)
    return 0


def _cmd_tune(args: argparse.Namespace) -> int:
    scenario = build_scenario(collect_values(args.config, args.overrides))
    target = TuneTarget(args.target)
    expected = 6 if target is TuneTarget.BOTH else 3
    if args.bounds is None:
        if target is TuneTarget.OUTER:
            args.bounds = _DEFAULT_OUTER_BOUNDS
        elif target is TuneTarget.INNER:
            args.bounds = _DEFAULT_INNER_BOUNDS
        else:
            args.bounds = _DEFAULT_OUTER_BOUNDS + "," + _DEFAULT_INNER_BOUNDS
    spec = TuneSpec(
        bounds=_parse_bounds(args.bounds, expected),
        target=target,
        search=SearchMethod(args.search),
        grid_points=args.points,
        objective=Objective(args.objective),
        fall_penalty=args.fall_penalty,
    )
    result = tune(scenario, spec, jobs=args.jobs)
    for prefix, gains in (("control.outer", result.outer), ("control.inner", result.inner)):
        print(f"{prefix}.kp={_fmt_value(gains.kp)}")
        print(f"{prefix}.ki={_fmt_value(gains.ki)}")
        print(f"{prefix}.kd={_fmt_value(gains.kd)}")
    print(f"score={_fmt_value(result.score)}")
    print(f"evaluations={result.evaluations}")
    print(f"all_candidates_fell={_fmt_value(result.all_fell)}")
    return 0


def _cmd_serve(args: argparse.Namespace) -> int:
    values = collect_values(args.config, args.overrides)
    scenario = build_scenario(values)
    if args.duration is not None:
        scenario = replace(scenario, duration=args.duration)
    elif "sim.duration" not in values:
        # Serve runs until shutdown unless a duration was asked for.
        scenario = replace(scenario, duration=math.inf)
    link = LinkConfig(
        latency_mean=args.latency_ms / 1000.0,
        latency_jitter_std=args.jitter_ms / 1000.0,
        max_frame_bytes=args.max_frame_bytes,
    )
    tcp_host, tcp_port = args.listen
    ws_host, ws_port = args.ws_listen
    server = TeleopServer(
        scenario,
        link,
        host=tcp_host,
        tcp_port=tcp_port,
        ws_port=ws_port,
        seed=args.seed,
        ui_root=args.ui,
    )
    server.start()
    print(f"teleop: tcp on {server.tcp_address[0]}:{server.tcp_address[1]}, "
          f"ws on {server.ws_address[0]}:{server.ws_address[1]}", file=sys.stderr)
    try:
        server.wait()
    except KeyboardInterrupt:
        pass
    finally:
        server.stop()
    if server.metrics is not None:
        _print_metrics(
            server.metrics,
            extra={
                "commands_received": server.commands_received,
                "protocol_errors": server.protocol_errors,
                "frames_sent": server.frames_sent,
                "dropped_commands": server.queue.dropped,
            },
        )
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="balancebot",
        description="Self-balancing robot simulator: batch runs, gain tuning, network teleop.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one scenario and print metrics")
    _add_scenario_args(p_run)
    p_run.add_argument("--trace", metavar="PATH", help="write the telemetry trace CSV here")
    p_run.set_defaults(func=_cmd_run)

    p_tune = sub.add_parser("tune", help="search PID gains on a noise-free scenario")
    _add_scenario_args(p_tune)
    p_tune.add_argument("--target", choices=[t.value for t in TuneTarget], default="outer")
    p_tune.add_argument("--search", choices=[s.value for s in SearchMethod], default="grid")
    p_tune.add_argument("--objective", choices=[o.value for o in Objective], default="settling-time")
    p_tune.add_argument("--points", type=int, default=5, help="grid points per gain axis")
    p_tune.add_argument("--bounds", help="per-axis low:high, comma separated")
    p_tune.add_argument("--fall-penalty", type=float, default=1e6)
    p_tune.add_argument("--jobs", type=int, default=1, help="parallel evaluations for grid search")
    p_tune.set_defaults(func=_cmd_tune)

    p_serve = sub.add_parser("serve", help="serve the simulation for live teleoperation")
    _add_scenario_args(p_serve)
    p_serve.add_argument("--listen", type=_parse_endpoint, default=("127.0.0.1", 8765),
                         metavar="HOST:PORT", help="TCP command/telemetry endpoint")
    p_serve.add_argument("--ws-listen", type=_parse_endpoint, default=("127.0.0.1", 8766),
                         metavar="HOST:PORT", help="WebSocket endpoint for the browser UI")
    p_serve.add_argument("--latency-ms", type=float, default=50.0, help="mean injected link latency")
    p_serve.add_argument("--jitter-ms", type=float, default=10.0, help="latency jitter std (0 = deterministic)")
    p_serve.add_argument("--seed", type=int, default=0, help="seed for latency draws")
    p_serve.add_argument("--max-frame-bytes", type=int, default=64)
    p_serve.add_argument("--duration", type=float, help="stop after this many sim seconds (default: run until interrupted)")
    p_serve.add_argument("--ui", metavar="DIR", help="serve this directory over HTTP on the WebSocket port")
    p_serve.set_defaults(func=_cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

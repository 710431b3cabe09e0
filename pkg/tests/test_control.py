"""Cascaded PID: recurrence exactness, clamping, fall latch, steering."""

import math
import random

import pytest
from hypothesis import given, strategies as st

from balancebot.commands import Command, CommandKind
from balancebot.control import (
    Controller,
    ControllerConfig,
    PidGains,
    PidState,
    Status,
    SteeringState,
    apply_command,
    fresh_pid_state,
    pid_step,
)

from .oracles import pid_reference


def run_sequence(gains, errors, dt):
    state = PidState()
    outputs = []
    for e in errors:
        out, state = pid_step(gains, state, e, dt)
        outputs.append(out)
    return outputs


def test_pure_proportional():
    out, _ = pid_step(PidGains(1.0, 0.0, 0.0), PidState(), 0.5, 0.01)
    assert out == 0.5


def test_zero_error_sequence_is_silent():
    assert run_sequence(PidGains(3.0, 2.0, 1.0), [0.0] * 20, 0.01) == [0.0] * 20


def test_two_step_hand_example():
    outputs = run_sequence(PidGains(2.0, 0.5, 1.0), [0.1, 0.15], 0.01)
    assert outputs[1] == pytest.approx(5.30125, rel=1e-12)


def test_matches_textbook_recurrence_exactly():
    # One hundred random error sequences against an independent
    # reimplementation; with unbounded limits the outputs must agree
    # bit for bit, term by term.
    rng = random.Random(2024)
    for _ in range(100):
        gains = PidGains(rng.uniform(0, 5), rng.uniform(0, 5), rng.uniform(0, 2))
        dt = rng.choice([0.001, 0.01, 0.02])
        errors = [rng.uniform(-2, 2) for _ in range(rng.randint(1, 40))]
        got = run_sequence(gains, errors, dt)
        want = pid_reference(gains.kp, gains.ki, gains.kd, errors, dt)
        assert got == want


def test_term_formulas_individually():
    rng = random.Random(7)
    errors = [rng.uniform(-1, 1) for _ in range(30)]
    dt = 0.01
    # P alone, I alone, D alone each reduce the recurrence to one term.
    assert run_sequence(PidGains(2.5, 0, 0), errors, dt) == [2.5 * e for e in errors]
    integral = 0.0
    expected_i = []
    for e in errors:
        integral += e * dt
        expected_i.append(1.5 * integral)
    assert run_sequence(PidGains(0, 1.5, 0), errors, dt) == expected_i
    last = 0.0
    expected_d = []
    for e in errors:
        expected_d.append(0.8 * ((e - last) / dt))
        last = e
    assert run_sequence(PidGains(0, 0, 0.8), errors, dt) == expected_d


@given(
    scale=st.floats(0.1, 10),
    kp=st.floats(0, 5),
    ki=st.floats(0, 5),
    kd=st.floats(0, 2),
)
def test_unclamped_pid_is_homogeneous(scale, kp, ki, kd):
    gains = PidGains(kp, ki, kd)
    errors = [0.3, -0.1, 0.25, 0.0, -0.4]
    base = run_sequence(gains, errors, 0.01)
    scaled = run_sequence(gains, [scale * e for e in errors], 0.01)
    for a, b in zip(base, scaled):
        assert b == pytest.approx(scale * a, rel=1e-9, abs=1e-12)


def test_output_clamped_to_limit():
    state = fresh_pid_state(PidGains(100.0, 0.0, 0.0), output_limit=2.0)
    out, _ = pid_step(PidGains(100.0, 0.0, 0.0), state, 1.0, 0.01)
    assert out == 2.0
    out, _ = pid_step(PidGains(100.0, 0.0, 0.0), state, -1.0, 0.01)
    assert out == -2.0


def test_integral_clamp_prevents_windup():
    gains = PidGains(0.0, 2.0, 0.0)
    state = fresh_pid_state(gains, output_limit=1.0)
    # integral_limit = limit / ki, so the I term alone can never exceed
    # the output limit no matter how long the error persists.
    for _ in range(10000):
        out, state = pid_step(gains, state, 1.0, 0.01)
    assert state.integral == pytest.approx(0.5)
    assert out == 1.0
    # Recovery is immediate once the error flips: the integral is not
    # carrying thousands of accumulated seconds.
    out, state = pid_step(gains, state, -1.0, 0.01)
    assert out < 1.0


def test_pid_validation():
    with pytest.raises(ValueError):
        PidGains(-1.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        PidGains(math.inf, 0.0, 0.0)
    with pytest.raises(ValueError):
        pid_step(PidGains(1, 0, 0), PidState(), math.nan, 0.01)
    with pytest.raises(ValueError):
        pid_step(PidGains(1, 0, 0), PidState(), 0.0, 0.0)
    with pytest.raises(ValueError):
        PidState(output_limit=0.0)


def test_balanced_controller_is_quiet():
    ctl = Controller(ControllerConfig())
    out = ctl.balance_step(0.0, 0.0, 0.01)
    assert (out.duty.left, out.duty.right) == (0.0, 0.0)
    assert out.status is Status.BALANCING


def test_lean_drives_wheels_toward_the_lean():
    ctl = Controller(ControllerConfig())
    out = ctl.balance_step(0.05, 0.0, 0.01)
    assert out.duty.left > 0.0
    assert out.duty.left == out.duty.right


def test_no_turn_means_symmetric_duty():
    ctl = Controller(ControllerConfig())
    out = ctl.balance_step(0.02, 0.3, 0.01)
    assert out.duty.left == out.duty.right


def test_turn_splits_duty():
    cfg = ControllerConfig()
    ctl = Controller(cfg)
    ctl.handle_command(Command.simple(CommandKind.RIGHT))
    out = ctl.balance_step(0.0, 0.0, 0.01)
    assert out.duty.right - out.duty.left == pytest.approx(2.0 * cfg.turn_step * cfg.mix_gain)


def test_fall_latches_and_silences_output():
    ctl = Controller(ControllerConfig())
    out = ctl.balance_step(0.4, 0.0, 0.01)
    assert out.status is Status.FALLEN
    assert (out.duty.left, out.duty.right) == (0.0, 0.0)
    # Even back under the threshold the latch holds until reset.
    out = ctl.balance_step(0.0, 0.0, 0.01)
    assert out.status is Status.FALLEN
    assert (out.duty.left, out.duty.right) == (0.0, 0.0)
    ctl.reset()
    out = ctl.balance_step(0.0, 0.0, 0.01)
    assert out.status is Status.BALANCING


def test_exact_threshold_does_not_trip():
    cfg = ControllerConfig()
    ctl = Controller(cfg)
    out = ctl.balance_step(cfg.fall_threshold, 0.0, 0.01)
    assert out.status is Status.BALANCING
    out = ctl.balance_step(math.nextafter(cfg.fall_threshold, 1.0), 0.0, 0.01)
    assert out.status is Status.FALLEN


def test_steering_commands_replace_not_accumulate():
    cfg = ControllerConfig()
    s = SteeringState()
    s = apply_command(s, Command.simple(CommandKind.FORWARD), cfg)
    assert s.drive_offset == cfg.drive_step
    s = apply_command(s, Command.simple(CommandKind.FORWARD), cfg)
    assert s.drive_offset == cfg.drive_step
    s = apply_command(s, Command.simple(CommandKind.BACKWARD), cfg)
    assert s.drive_offset == -cfg.drive_step
    s = apply_command(s, Command.simple(CommandKind.LEFT), cfg)
    assert s.turn == -cfg.turn_step
    assert s.drive_offset == -cfg.drive_step
    s = apply_command(s, Command.simple(CommandKind.RIGHT), cfg)
    assert s.turn == cfg.turn_step
    s = apply_command(s, Command.simple(CommandKind.STOP), cfg)
    assert (s.drive_offset, s.turn) == (0.0, 0.0)


def test_left_and_right_turn_opposite():
    cfg = ControllerConfig()
    left = apply_command(SteeringState(), Command.simple(CommandKind.LEFT), cfg)
    right = apply_command(SteeringState(), Command.simple(CommandKind.RIGHT), cfg)
    assert left.turn == -right.turn != 0.0


def test_non_steering_commands_leave_steering_alone():
    cfg = ControllerConfig()
    s = SteeringState(0.03, 0.15)
    assert apply_command(s, Command.set_alpha(0.5), cfg) is s


def test_gain_command_swaps_outer_gains():
    ctl = Controller(ControllerConfig())
    ctl.handle_command(Command.set_gains(1.0, 2.0, 3.0))
    assert ctl.outer_gains == PidGains(1.0, 2.0, 3.0)
    # The integral clamp is re-derived for the new ki.
    assert ctl.outer_state.integral_limit == pytest.approx(ctl.cfg.setpoint_limit / 2.0)


def test_runtime_gains_survive_reset():
    ctl = Controller(ControllerConfig())
    ctl.handle_command(Command.set_gains(1.0, 2.0, 3.0))
    ctl.reset()
    assert ctl.outer_gains == PidGains(1.0, 2.0, 3.0)


def test_reset_clears_integral():
    ctl = Controller(ControllerConfig())
    for _ in range(100):
        ctl.balance_step(0.1, 0.0, 0.01)
    ctl.reset()
    out = ctl.balance_step(0.0, 0.0, 0.01)
    assert (out.duty.left, out.duty.right) == (0.0, 0.0)


def test_reset_is_idempotent():
    ctl = Controller(ControllerConfig())
    ctl.balance_step(0.1, 0.0, 0.01)
    ctl.reset()
    first = (ctl.steering, ctl.status, ctl.outer_state, ctl.inner_state)
    ctl.reset()
    assert (ctl.steering, ctl.status, ctl.outer_state, ctl.inner_state) == first


def test_steering_state_validation():
    with pytest.raises(ValueError):
        SteeringState(drive_offset=0.2)
    with pytest.raises(ValueError):
        SteeringState(turn=1.5)


def test_controller_config_validation():
    with pytest.raises(ValueError):
        ControllerConfig(fall_threshold=0.0)
    with pytest.raises(ValueError):
        ControllerConfig(drive_step=0.5)
    with pytest.raises(ValueError):
        ControllerConfig(mix_gain=-1.0)
    cfg = ControllerConfig()
    assert cfg.setpoint_limit == pytest.approx(40.0 * math.pi)

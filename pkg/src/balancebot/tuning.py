"""Automated gain search: grid scan and coordinate descent.

Candidates are scored on a cleaned-up copy of the scenario: sensor noise
and bias off, a fixed 0.087 rad (5 degree) tilt start, and no scripted
commands, so scores depend only on the gains. A fall scores the (large)
fall penalty; a run that neither falls nor settles scores twice the
scenario duration, which any real settling time beats.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace
from enum import Enum

from .control import PidGains
from .plant import StateVector
from .simloop import ScenarioConfig, run

__all__ = [
    "TuneTarget",
    "SearchMethod",
    "Objective",
    "GainBounds",
    "TuneSpec",
    "TuneResult",
    "evaluate_vector",
    "grid_search",
    "coordinate_descent",
    "tune",
]

_MIN_IMPROVEMENT = 1e-6


class TuneTarget(Enum):
    OUTER = "outer"
    INNER = "inner"
    BOTH = "both"


class SearchMethod(Enum):
    GRID = "grid"
    COORDINATE_DESCENT = "descent"


class Objective(Enum):
    SETTLING_TIME = "settling-time"
    ITAE = "itae"


@dataclass(frozen=True)
class GainBounds:
    low: float
    high: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.low) and math.isfinite(self.high) and 0.0 <= self.low < self.high):
            raise ValueError(f"bounds must satisfy 0 <= low < high, got ({self.low}, {self.high})")

    def grid(self, points: int) -> list[float]:
        if points == 1:
            return [self.low]
        span = self.high - self.low
        return [self.low + span * i / (points - 1) for i in range(points)]


@dataclass(frozen=True)
class TuneSpec:
    """What to search, where, and how to score it.

    ``bounds`` has one entry per tuned gain: (kp, ki, kd) for a single
    loop, outer-then-inner six for BOTH.
    """

    bounds: tuple[GainBounds, ...]
    target: TuneTarget = TuneTarget.OUTER
    search: SearchMethod = SearchMethod.GRID
    grid_points: int = 5
    objective: Objective = Objective.SETTLING_TIME
    fall_penalty: float = 1e6

    def __post_init__(self) -> None:
        expected = 6 if self.target is TuneTarget.BOTH else 3
        if len(self.bounds) != expected:
            raise ValueError(f"{self.target.value} tuning needs {expected} bounds, got {len(self.bounds)}")
        if self.grid_points < 1:
            raise ValueError(f"grid_points must be >= 1, got {self.grid_points}")
        if not self.fall_penalty > 0.0:
            raise ValueError("fall_penalty must be > 0")


@dataclass(frozen=True)
class TuneResult:
    outer: PidGains
    inner: PidGains
    score: float
    evaluations: int
    all_fell: bool


def _evaluation_scenario(scenario: ScenarioConfig) -> ScenarioConfig:
    return replace(
        scenario,
        imu=scenario.imu.noiseless(),
        initial_state=StateVector(0.0, 0.0, 0.087, 0.0),
        command_script=(),
    )


def _vector_to_gains(
    spec: TuneSpec, vector: tuple[float, ...], scenario: ScenarioConfig
) -> tuple[PidGains, PidGains]:
    if spec.target is TuneTarget.OUTER:
        return PidGains(*vector), scenario.control.inner
    if spec.target is TuneTarget.INNER:
        return scenario.control.outer, PidGains(*vector)
    return PidGains(*vector[:3]), PidGains(*vector[3:])


def _current_vector(spec: TuneSpec, scenario: ScenarioConfig) -> tuple[float, ...]:
    outer, inner = scenario.control.outer, scenario.control.inner
    if spec.target is TuneTarget.OUTER:
        return (outer.kp, outer.ki, outer.kd)
    if spec.target is TuneTarget.INNER:
        return (inner.kp, inner.ki, inner.kd)
    return (outer.kp, outer.ki, outer.kd, inner.kp, inner.ki, inner.kd)


def evaluate_vector(scenario: ScenarioConfig, spec: TuneSpec, vector: tuple[float, ...]) -> float:
    """Score one gain vector on the cleaned evaluation scenario."""
    outer, inner = _vector_to_gains(spec, vector, scenario)
    eval_scenario = replace(
        _evaluation_scenario(scenario),
        control=replace(scenario.control, outer=outer, inner=inner),
    )
    trace, metrics = run(eval_scenario)
    if metrics.fell:
        return spec.fall_penalty
    if spec.objective is Objective.SETTLING_TIME:
        if metrics.settling_time is not None:
            return metrics.settling_time
        return 2.0 * eval_scenario.duration
    itae = sum(f.t * abs(f.theta_true) for f in trace) * eval_scenario.control_period
    return itae


def _score_args(args: tuple[ScenarioConfig, TuneSpec, tuple[float, ...]]) -> float:
    return evaluate_vector(*args)


def grid_search(scenario: ScenarioConfig, spec: TuneSpec, jobs: int = 1) -> TuneResult:
    """Exhaustive scan of the gain grid; first-in-lexicographic-order wins ties."""
    axes = [b.grid(spec.grid_points) for b in spec.bounds]
    candidates = [tuple(v) for v in itertools.product(*axes)]
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            scores = list(pool.map(_score_args, [(scenario, spec, c) for c in candidates], chunksize=4))
    else:
        scores = [evaluate_vector(scenario, spec, c) for c in candidates]

    best_vector, best_score = None, math.inf
    for vector, score in zip(candidates, scores):
        if score < best_score:
            best_vector, best_score = vector, score
    assert best_vector is not None
    outer, inner = _vector_to_gains(spec, best_vector, scenario)
    return TuneResult(outer, inner, best_score, len(candidates), best_score >= spec.fall_penalty)


def coordinate_descent(scenario: ScenarioConfig, spec: TuneSpec) -> TuneResult:
    """Axis-at-a-time refinement from the scenario's current gains.

    Each pass sweeps every axis over its grid, keeping strict
    improvements; passes repeat until one yields no improvement over
    1e-6. The score sequence is non-increasing by construction.
    """
    vector = list(_current_vector(spec, scenario))
    score = evaluate_vector(scenario, spec, tuple(vector))
    evaluations = 1
    while True:
        pass_start = score
        for axis, bound in enumerate(spec.bounds):
            for value in bound.grid(spec.grid_points):
                if value == vector[axis]:
                    continue
                trial = list(vector)
                trial[axis] = value
                trial_score = evaluate_vector(scenario, spec, tuple(trial))
                evaluations += 1
                if trial_score < score:
                    vector, score = trial, trial_score
        if pass_start - score <= _MIN_IMPROVEMENT:
            break
    outer, inner = _vector_to_gains(spec, tuple(vector), scenario)
    return TuneResult(outer, inner, score, evaluations, score >= spec.fall_penalty)


def tune(scenario: ScenarioConfig, spec: TuneSpec, jobs: int = 1) -> TuneResult:
    if spec.search is SearchMethod.GRID:
        return grid_search(scenario, spec, jobs=jobs)
    return coordinate_descent(scenario, spec)

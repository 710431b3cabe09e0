"""Planar dynamics of a two-wheeled balancing robot.

The robot is modeled as an inverted pendulum on a wheeled base: a rigid
body of mass ``m`` hinged at the wheel axle, with its center of mass a
distance ``l`` above the hinge, riding on a base of mass ``M`` that moves
horizontally under a drive force ``F``.

Derivation note
---------------
With the wheels always in ground contact (no vertical base motion) and a
fixed center of mass, the Lagrangian of the base/body pair yields two
coupled equations in the base acceleration ``dv`` and the body angular
acceleration ``domega``::

    (M + m) dv + m l cos(theta) domega = F - b_x v + m l omega^2 sin(theta)
    m l cos(theta) dv + (J + m l^2) domega = m g l sin(theta) - b_t omega

where ``theta`` is the lean from upright (positive toward +x), ``J`` the
body inertia about its own center of mass, and ``b_x``/``b_t`` viscous
friction on the base travel and the hinge. The 2x2 mass matrix has
determinant ``(M + m)(J + m l^2) - (m l cos theta)^2``, which is strictly
positive for any valid parameter set (``M > 0`` bounds it away from zero),
so the system can always be solved explicitly by Cramer's rule.

Everything here is a pure function over small value types, safe to call
from any thread.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "RobotParams",
    "StateVector",
    "StateDerivative",
    "derivatives",
    "step",
    "total_energy",
    "linearize",
]

MAX_STEP_DT = 0.01


@dataclass(frozen=True)
class RobotParams:
    """Physical parameters of the base/body pair.

    ``pendulum_inertia`` defaults to ``m l^2 / 3`` (uniform rod pivoting at
    its end) when not given. The 0.030 m wheel radius matches the 60 mm
    wheels of the reference build; the other defaults are plausible values
    for a small hardboard robot and are all config-overridable.
    """

    cart_mass: float = 0.6
    pendulum_mass: float = 0.4
    com_distance: float = 0.10
    pendulum_inertia: float | None = None
    wheel_radius: float = 0.030
    gravity: float = 9.81
    cart_friction: float = 0.1
    pivot_friction: float = 0.001

    def __post_init__(self) -> None:
        if self.pendulum_inertia is None:
            j = self.pendulum_mass * self.com_distance**2 / 3.0
            object.__setattr__(self, "pendulum_inertia", j)
        for name in ("cart_mass", "pendulum_mass", "com_distance", "wheel_radius", "gravity"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0.0):
                raise ValueError(f"{name} must be finite and > 0, got {value}")
        for name in ("pendulum_inertia", "cart_friction", "pivot_friction"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0.0):
                raise ValueError(f"{name} must be finite and >= 0, got {value}")


@dataclass(frozen=True, slots=True)
class StateVector:
    """True plant state: base position/velocity, lean angle/rate.

    ``theta`` is measured from upright, positive when the body leans
    toward +x, and is never wrapped; the simulation declares a fall long
    before it approaches pi.
    """

    x: float = 0.0
    v: float = 0.0
    theta: float = 0.0
    omega: float = 0.0

    def __post_init__(self) -> None:
        for name in ("x", "v", "theta", "omega"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"state field {name} must be finite")


@dataclass(frozen=True, slots=True)
class StateDerivative:
    dx: float
    dv: float
    dtheta: float
    domega: float


def _accels(v: float, theta: float, omega: float, force: float, p: RobotParams) -> tuple[float, float]:
    """Solve the coupled 2x2 system for (dv, domega) by Cramer's rule."""
    cos_t = math.cos(theta)
    sin_t = math.sin(theta)
    ml = p.pendulum_mass * p.com_distance
    a11 = p.cart_mass + p.pendulum_mass
    a12 = ml * cos_t
    a22 = p.pendulum_inertia + ml * p.com_distance
    r1 = force - p.cart_friction * v + ml * omega * omega * sin_t
    r2 = p.pendulum_mass * p.gravity * p.com_distance * sin_t - p.pivot_friction * omega
    det = a11 * a22 - a12 * a12
    return (r1 * a22 - a12 * r2) / det, (a11 * r2 - a12 * r1) / det


def derivatives(state: StateVector, force: float, params: RobotParams) -> StateDerivative:
    """Time derivative of the state under a horizontal drive force.

    Args:
        state: current plant state.
        force: horizontal force on the base [N].
        params: physical parameters.

    Raises:
        ValueError: if ``force`` is not finite.
    """
    if not math.isfinite(force):
        raise ValueError(f"force must be finite, got {force}")
    dv, domega = _accels(state.v, state.theta, state.omega, force, params)
    return StateDerivative(dx=state.v, dv=dv, dtheta=state.omega, domega=domega)


def step(state: StateVector, force: float, dt: float, params: RobotParams) -> StateVector:
    """Advance the state by one classical RK4 step with the force held constant.

    ``dt`` must lie in (0, 0.01] s; the cap keeps the fixed-step integrator
    well inside its accuracy envelope for this system's time scales.
    """
    if not (0.0 < dt <= MAX_STEP_DT):
        raise ValueError(f"dt must be in (0, {MAX_STEP_DT}], got {dt}")
    if not math.isfinite(force):
        raise ValueError(f"force must be finite, got {force}")

    x0, v0, t0, w0 = state.x, state.v, state.theta, state.omega

    a1, aw1 = _accels(v0, t0, w0, force, params)
    k1 = (v0, a1, w0, aw1)

    h = 0.5 * dt
    v1, t1, w1 = v0 + h * k1[1], t0 + h * k1[2], w0 + h * k1[3]
    a2, aw2 = _accels(v1, t1, w1, force, params)
    k2 = (v1, a2, w1, aw2)

    v2, t2, w2 = v0 + h * k2[1], t0 + h * k2[2], w0 + h * k2[3]
    a3, aw3 = _accels(v2, t2, w2, force, params)
    k3 = (v2, a3, w2, aw3)

    v3, t3, w3 = v0 + dt * k3[1], t0 + dt * k3[2], w0 + dt * k3[3]
    a4, aw4 = _accels(v3, t3, w3, force, params)
    k4 = (v3, a4, w3, aw4)

    sixth = dt / 6.0
    return StateVector(
        x=x0 + sixth * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        v=v0 + sixth * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        theta=t0 + sixth * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2]),
        omega=w0 + sixth * (k1[3] + 2.0 * k2[3] + 2.0 * k3[3] + k4[3]),
    )


def total_energy(state: StateVector, params: RobotParams) -> float:
    """Total mechanical energy, zero for the upright-at-rest state.

    Kinetic energy covers the base, the body's translating center of mass
    (including the ``m l v omega cos theta`` coupling term) and the body's
    spin about its own center; potential energy is referenced to upright,
    ``U = m g l (cos theta - 1)``.
    """
    m, l = params.pendulum_mass, params.com_distance
    kinetic = (
        0.5 * (params.cart_mass + m) * state.v**2
        + m * l * state.v * state.omega * math.cos(state.theta)
        + 0.5 * (params.pendulum_inertia + m * l * l) * state.omega**2
    )
    potential = m * params.gravity * l * (math.cos(state.theta) - 1.0)
    return kinetic + potential


def linearize(params: RobotParams) -> tuple[np.ndarray, np.ndarray]:
    """Jacobians of ``derivatives`` at the upright origin.

    Returns:
        ``(A, B)`` with ``A`` the 4x4 state matrix and ``B`` the 4x1 input
        vector, in state order (x, v, theta, omega).
    """
    m, l = params.pendulum_mass, params.com_distance
    ml = m * l
    j_pivot = params.pendulum_inertia + ml * l
    total_mass = params.cart_mass + m
    b_x, b_t = params.cart_friction, params.pivot_friction
    mgl = m * params.gravity * l
    det0 = total_mass * j_pivot - ml * ml

    a = np.array(
        [
            [0.0, 1.0, 0.0, 0.0],
            [0.0, -b_x * j_pivot / det0, -ml * mgl / det0, b_t * ml / det0],
            [0.0, 0.0, 0.0, 1.0],
            [0.0, b_x * ml / det0, total_mass * mgl / det0, -total_mass * b_t / det0],
        ]
    )
    b = np.array([[0.0], [j_pivot / det0], [0.0], [-ml / det0]])
    return a, b

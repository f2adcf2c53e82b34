"""Planar unicycle kinematics and pairwise relative dynamics.

Both agents move at a fixed forward speed and steer with a bounded turn
rate.  The pairwise game is analysed in the body frame of one vehicle
(the "reference"), where the other vehicle's pose evolves under the
classic relative unicycle equations.  Everything downstream (level-set
solves, features, coordination) queries poses through
:func:`relative_state`, so the frame convention lives here and nowhere
else.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

TWO_PI = 2.0 * math.pi


def wrap_angle(a: float) -> float:
    """Wrap an angle to [-pi, pi)."""
    return (a + math.pi) % TWO_PI - math.pi


@dataclass(frozen=True)
class DubinsParams:
    """Kinematic limits shared by every vehicle.

    Attributes
    ----------
    speed : float
        Constant forward speed, m/s.
    omega_min, omega_max : float
        Turn-rate bounds, rad/s.  ``omega_min < 0 < omega_max`` so the
        straight control is always admissible.
    """

    speed: float = 2.0
    omega_min: float = -0.5
    omega_max: float = 0.5

    def __post_init__(self) -> None:
        if self.speed <= 0.0:
            raise ValueError(f"speed must be positive, got {self.speed}")
        if not (self.omega_min < 0.0 < self.omega_max):
            raise ValueError(
                "turn-rate bounds must straddle zero, got "
                f"[{self.omega_min}, {self.omega_max}]"
            )


def discrete_controls(params: DubinsParams) -> tuple[float, float, float]:
    """The three-element control set (right, straight, left), ascending."""
    return (params.omega_min, 0.0, params.omega_max)


@dataclass(frozen=True)
class VehicleState:
    """Absolute planar pose (x, y, heading), heading wrapped to [-pi, pi)."""

    x: float
    y: float
    psi: float

    def __post_init__(self) -> None:
        for name in ("x", "y", "psi"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v}")
        object.__setattr__(self, "psi", wrap_angle(self.psi))

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.psi)


@dataclass(frozen=True)
class RelativeState:
    """Pose of one vehicle expressed in another vehicle's body frame.

    ``xr`` points along the reference vehicle's heading, ``yr`` to its
    left, and ``theta`` is the heading difference, wrapped to [-pi, pi).
    """

    xr: float
    yr: float
    theta: float

    def __post_init__(self) -> None:
        for name in ("xr", "yr", "theta"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v}")
        object.__setattr__(self, "theta", wrap_angle(self.theta))

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.xr, self.yr, self.theta)


def step_vehicle(
    state: VehicleState, omega: float, dt: float, params: DubinsParams
) -> VehicleState:
    """Advance one vehicle by ``dt`` under a constant turn rate.

    Uses the exact circular-arc solution, not an Euler step, so large
    steps stay on the vehicle's true path.  ``omega`` must respect the
    bounds in ``params``; ``dt`` must be positive.

    Examples
    --------
    >>> p = DubinsParams()
    >>> s = step_vehicle(VehicleState(0.0, 0.0, 0.0), 0.5, 1.0, p)
    >>> round(s.x, 6), round(s.y, 6), round(s.psi, 6)
    (1.917702, 0.48967, 0.5)
    """
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    eps = 1e-12
    if not (params.omega_min - eps <= omega <= params.omega_max + eps):
        raise ValueError(
            f"turn rate {omega} outside [{params.omega_min}, {params.omega_max}]"
        )
    v = params.speed
    if omega == 0.0:
        return VehicleState(
            state.x + v * dt * math.cos(state.psi),
            state.y + v * dt * math.sin(state.psi),
            state.psi,
        )
    # Chord form of the arc step: the naive r*(sin(psi') - sin(psi))
    # cancels catastrophically when omega*dt is tiny (the radius v/omega
    # blows up against a vanishing sine difference), while the chord
    # length 2r*sin(omega*dt/2) -> v*dt stays fully conditioned.
    half = 0.5 * omega * dt
    chord = v * dt * (math.sin(half) / half if half != 0.0 else 1.0)
    mid = state.psi + half
    return VehicleState(
        state.x + chord * math.cos(mid),
        state.y + chord * math.sin(mid),
        state.psi + omega * dt,
    )


def relative_state(vehicle: VehicleState, reference: VehicleState) -> RelativeState:
    """Pose of ``vehicle`` in the body frame of ``reference``.

    The reference sits at the origin facing +x.  With the reference at
    the origin facing +y and the other vehicle one unit ahead of it,
    the relative pose is one unit along the reference's nose:

    >>> r = relative_state(VehicleState(0.0, 1.0, 0.0),
    ...                    VehicleState(0.0, 0.0, math.pi / 2))
    >>> round(r.xr, 12), round(r.yr, 12), round(r.theta, 6)
    (1.0, 0.0, -1.570796)
    """
    dx = vehicle.x - reference.x
    dy = vehicle.y - reference.y
    c = math.cos(reference.psi)
    s = math.sin(reference.psi)
    return RelativeState(
        c * dx + s * dy,
        -s * dx + c * dy,
        vehicle.psi - reference.psi,
    )


def invert_relative(rel: RelativeState) -> RelativeState:
    """Swap roles: the reference vehicle's pose in the other body frame."""
    c = math.cos(rel.theta)
    s = math.sin(rel.theta)
    # Rotate the negated offset into the other vehicle's frame.
    return RelativeState(
        -(c * rel.xr + s * rel.yr),
        -(-s * rel.xr + c * rel.yr),
        -rel.theta,
    )


def relative_rhs(
    rel: RelativeState,
    omega_ref: float,
    omega_other: float,
    params: DubinsParams,
) -> tuple[float, float, float]:
    """Continuous-time derivative of the relative pose.

    ``omega_ref`` steers the reference (frame) vehicle, ``omega_other``
    the tracked one.  Equal speeds cancel in the usual way:

        xr'    = -v + v cos(theta) + omega_ref * yr
        yr'    =      v sin(theta) - omega_ref * xr
        theta' = omega_other - omega_ref
    """
    v = params.speed
    return (
        -v + v * math.cos(rel.theta) + omega_ref * rel.yr,
        v * math.sin(rel.theta) - omega_ref * rel.xr,
        omega_other - omega_ref,
    )


def robot_policy(
    robot: VehicleState,
    goal: tuple[float, float],
    params: DubinsParams,
    gain: float = 1.0,
) -> float:
    """Proportional heading controller toward a fixed goal point.

    Returns the saturated turn rate ``clip(gain * heading_error)``.
    Heading error is wrapped, so the policy never commands the long way
    around.  Exactly aligned headings command zero.
    """
    err = wrap_angle(math.atan2(goal[1] - robot.y, goal[0] - robot.x) - robot.psi)
    return min(params.omega_max, max(params.omega_min, gain * err))

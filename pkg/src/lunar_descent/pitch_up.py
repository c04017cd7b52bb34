"""Constant-rate pitch-up slew with a linear thrust ramp-down."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .dynamics import EngineModel
from .moon import MOON, MoonConstants, SphericalState
from .propagator import EventSpec, Trajectory, propagate

_ALIGNED_TOL = math.radians(0.01)


class ConstraintViolation(RuntimeError):
    pass


def rotate(v: ArrayLike, axis: ArrayLike, angle: float) -> NDArray[np.float64]:
    """Rodrigues rotation of ``v`` about the unit ``axis``."""
    v = np.asarray(v, dtype=float)
    k = np.asarray(axis, dtype=float)
    c, s = math.cos(angle), math.sin(angle)
    return v * c + np.cross(k, v) * s + k * float(np.dot(k, v)) * (1.0 - c)


def elevation_target(u0: ArrayLike, elevation: float) -> NDArray[np.float64]:
    """Direction at ``elevation`` [rad] above the horizon, same azimuth as ``u0``.

    Vectors are on the local ``(e_r, e_phi, e_theta)`` triad.
    """
    u0 = np.asarray(u0, dtype=float)
    h = np.array([0.0, u0[1], u0[2]])
    hn = float(np.linalg.norm(h))
    if hn == 0.0:
        raise ValueError("thrust direction is vertical; azimuth undefined")
    return math.sin(elevation) * np.array([1.0, 0.0, 0.0]) + math.cos(elevation) * h / hn


@dataclass(frozen=True)
class PitchUpPlan:
    u0: NDArray[np.float64]
    uf: NDArray[np.float64]
    p: NDArray[np.float64]
    dt: float
    t0: float
    thrust0: float
    ramp_rate: float
    thrust_floor: float
    rate: float

    def angle(self, t: float) -> float:
        return self.rate * min(max(t - self.t0, 0.0), self.dt)

    def direction(self, t: float) -> NDArray[np.float64]:
        if self.dt == 0.0:
            return self.u0.copy()
        if t >= self.t0 + self.dt:
            return self.uf.copy()
        u = rotate(self.u0, self.p, self.angle(t))
        return u / np.linalg.norm(u)

    def thrust(self, t: float) -> float:
        return max(self.thrust0 - self.ramp_rate * max(t - self.t0, 0.0), self.thrust_floor)

    @property
    def tf(self) -> float:
        return self.t0 + self.dt


def plan_pitch_up(
    state: SphericalState,
    u0: ArrayLike,
    thrust0: float,
    engine: EngineModel | None = None,
    *,
    target_elevation: float = math.radians(80.0),
    pitch_rate_max: float = math.radians(5.0),
    ramp_rate: float | None = None,
    thrust_floor: float | None = None,
) -> PitchUpPlan:
    """Slew from ``u0`` to the target elevation at the maximum pitch rate.

    Rotation is about ``p = u0 x uf / |u0 x uf|`` in the sense that carries
    ``u0`` onto ``uf``; the duration is ``acos(u0 . uf) / pitch_rate_max``.
    Thrust ramps down at ``ramp_rate`` (default: all phase-1 engines at
    their maximum rate), floored at the two-engine minimum.
    """
    engine = engine or EngineModel()
    u0 = np.asarray(u0, dtype=float)
    u0 = u0 / np.linalg.norm(u0)
    uf = elevation_target(u0, target_elevation)
    ramp = engine.total_rate_max if ramp_rate is None else ramp_rate
    floor = engine.t1_bounds[0] if thrust_floor is None else thrust_floor
    ang = math.atan2(float(np.linalg.norm(np.cross(u0, uf))), float(np.dot(u0, uf)))
    if ang < _ALIGNED_TOL:
        return PitchUpPlan(u0, uf, np.zeros(3), 0.0, state.t, thrust0, ramp, floor, pitch_rate_max)
    axis = np.cross(u0, uf)
    n = float(np.linalg.norm(axis))
    if n < 1e-12:
        raise ValueError("u0 is antiparallel to the target direction; rotation axis undefined")
    return PitchUpPlan(u0, uf, axis / n, ang / pitch_rate_max, state.t, thrust0, ramp, floor, pitch_rate_max)


def fly_pitch_up(
    plan: PitchUpPlan,
    state: SphericalState,
    engine: EngineModel | None = None,
    constants: MoonConstants = MOON,
    *,
    step: float = 0.1,
    center_on: bool = True,
    lga_altitude: float | None = None,
) -> tuple[Trajectory, float | None]:
    """Propagate the slew; returns the trajectory and the LGA time if the
    ``lga_altitude`` crossing (centre-engine cut-off) happens during it."""
    engine = engine or EngineModel()
    if plan.dt == 0.0:
        cmd = engine.split(plan.thrust0, center_on)
        traj = Trajectory(
            np.array([state.t]), state.as_array()[None, :], np.array([cmd[0]]), np.array([cmd[1]]),
            plan.u0[None, :].copy(), "spherical", constants,
        )
        return traj, None

    def steering_for(on):
        def steer(t, y):
            t1, t2 = engine.split(plan.thrust(t), on)
            return t1, t2, plan.direction(t)

        return steer

    events = [EventSpec("time_reached", plan.tf)]
    lga_time = None
    if center_on and lga_altitude is not None:
        first = propagate(
            state.as_array(), steering_for(True), (state.t, plan.tf),
            events + [EventSpec("altitude_crossing", lga_altitude, -1)],
            step, constants=constants, engine=engine,
        )
        traj = first.trajectory
        if first.event is not None and first.event.kind == "altitude_crossing":
            lga_time = first.event_time
            rest = propagate(
                traj.y[-1], steering_for(False), (lga_time, plan.tf), events, step,
                constants=constants, engine=engine,
            )
            traj = traj.concat(rest.trajectory)
        return traj, lga_time
    res = propagate(state.as_array(), steering_for(center_on), (state.t, plan.tf), events, step,
                    constants=constants, engine=engine)
    return res.trajectory, None

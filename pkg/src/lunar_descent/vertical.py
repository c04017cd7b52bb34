"""Constant-speed vertical descent from the vertical gate to touchdown."""

from __future__ import annotations

import math

import numpy as np

from .dynamics import EngineModel
from .moon import MOON, MoonConstants, SphericalState
from .propagator import EventSpec, Trajectory, propagate


class GateError(ValueError):
    """State at the vertical gate does not allow a vertical descent."""


def fly_vertical(
    state: SphericalState,
    descent_speed: float = 2.0,
    engine: EngineModel | None = None,
    constants: MoonConstants = MOON,
    *,
    step: float = 0.1,
    pitch: float | None = None,
    touchdown_altitude: float = 0.0,
) -> Trajectory:
    """Descend along ``e_r`` with the outer engines matching the local weight.

    ``pitch`` is the thrust elevation at the gate [rad]; when given it must be
    within 1 deg of vertical.
    """
    engine = engine or EngineModel()
    v_h = math.hypot(state.v_phi, state.v_theta)
    problems = []
    if v_h >= 0.1:
        problems.append(f"horizontal velocity {v_h:.3f} m/s")
    if abs(state.v_r + descent_speed) > 0.1:
        problems.append(f"vertical velocity {state.v_r:.3f} m/s")
    if pitch is not None and abs(math.degrees(pitch) - 90.0) > 1.0:
        problems.append(f"pitch {math.degrees(pitch):.2f} deg")
    if problems:
        raise GateError("vertical gate not met: " + ", ".join(problems))
    up = np.array([1.0, 0.0, 0.0])
    mu = constants.mu

    def steer(t, y):
        return y[6] * mu / (y[0] * y[0]), 0.0, up

    alt = state.r - constants.r_moon
    horizon = state.t + 2.0 * (alt - touchdown_altitude) / max(descent_speed, 1e-9) + 10.0
    res = propagate(
        state.as_array(), steer, (state.t, horizon), [EventSpec("altitude_crossing", touchdown_altitude, -1)],
        step, constants=constants, engine=engine,
    )
    if res.event is None:
        raise GateError("touchdown not reached")
    return res.trajectory

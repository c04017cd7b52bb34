"""Thrusted equations of motion and the engine model."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from . import _kernels
from .moon import MOON, CartesianState, MoonConstants, SingularFrameError, SphericalState


class InfeasibleBurnError(ValueError):
    """Raised when a burn would consume the whole vehicle (or go below dry mass)."""


@dataclass(frozen=True)
class EngineModel:
    """Engine set of the lander.

    ``t1`` is the summed thrust of the outer pair and ``t2`` the centre
    engine. Limits below are derived from the per-engine figures.
    """

    isp: float = 330.0
    t_engine_max: float = 6000.0
    t_engine_min: float = 3000.0
    throttle_rate_max: float = 200.0
    n_engines_phase1: int = 3
    n_engines_phase3: int = 2

    def __post_init__(self):
        if not 0.0 < self.t_engine_min <= self.t_engine_max:
            raise ValueError("need 0 < t_engine_min <= t_engine_max")
        if self.isp <= 0.0 or self.throttle_rate_max <= 0.0:
            raise ValueError("isp and throttle_rate_max must be positive")
        if not 0 < self.n_engines_phase3 <= self.n_engines_phase1:
            raise ValueError("engine counts inconsistent")

    def exhaust_speed(self, constants: MoonConstants = MOON) -> float:
        return self.isp * constants.g0

    @property
    def t1_bounds(self) -> tuple[float, float]:
        n = self.n_engines_phase3
        return n * self.t_engine_min, n * self.t_engine_max

    @property
    def t2_bounds(self) -> tuple[float, float]:
        n = self.n_engines_phase1 - self.n_engines_phase3
        return n * self.t_engine_min, n * self.t_engine_max

    @property
    def t1_rate_max(self) -> float:
        return self.n_engines_phase3 * self.throttle_rate_max

    @property
    def t2_rate_max(self) -> float:
        return (self.n_engines_phase1 - self.n_engines_phase3) * self.throttle_rate_max

    @property
    def total_rate_max(self) -> float:
        return self.n_engines_phase1 * self.throttle_rate_max

    @property
    def total_max(self) -> float:
        return self.n_engines_phase1 * self.t_engine_max

    @property
    def total_min(self) -> float:
        return self.n_engines_phase1 * self.t_engine_min

    def split(self, total: float, center_on: bool) -> tuple[float, float]:
        """Share a total thrust equally among the lit engines -> ``(t1, t2)``."""
        if not center_on:
            return total, 0.0
        n1 = self.n_engines_phase1
        n3 = self.n_engines_phase3
        return total * n3 / n1, total * (n1 - n3) / n1


@dataclass(frozen=True)
class ThrustCommand:
    """Thrust level and direction.

    ``alpha`` is the azimuth out of the trajectory plane and ``beta`` is
    measured from ``e_r`` towards ``e_theta``, so that
    ``u = (cos a cos b, sin a, cos a sin b)`` on ``(e_r, e_phi, e_theta)``.
    """

    t1: float
    t2: float = 0.0
    alpha: float = 0.0
    beta: float = 0.0

    def __post_init__(self):
        if self.t1 < 0.0 or self.t2 < 0.0:
            raise ValueError("thrust levels must be non-negative")

    @property
    def total(self) -> float:
        return self.t1 + self.t2

    @property
    def u(self) -> NDArray[np.float64]:
        ca = math.cos(self.alpha)
        return np.array([ca * math.cos(self.beta), math.sin(self.alpha), ca * math.sin(self.beta)])

    @classmethod
    def from_vector(cls, t1: float, t2: float, u: ArrayLike) -> "ThrustCommand":
        u = np.asarray(u, dtype=float)
        n = float(np.linalg.norm(u))
        if n == 0.0:
            raise ValueError("thrust direction must be non-zero")
        u = u / n
        return cls(t1, t2, math.asin(max(-1.0, min(1.0, u[1]))), math.atan2(u[2], u[0]))


def eom_spherical(
    s: SphericalState, cmd: ThrustCommand, constants: MoonConstants = MOON, engine: EngineModel | None = None
) -> NDArray[np.float64]:
    """Time derivative of ``(r, phi, theta, v_r, v_phi, v_theta, m)``."""
    engine = engine or EngineModel()
    if s.r <= 0.0:
        raise ValueError("radius must be positive")
    if abs(math.cos(s.phi)) < 1e-12:
        raise SingularFrameError("equations of motion are singular at the pole")
    out = np.empty(7)
    u = cmd.u
    _kernels.rhs_spherical(
        s.as_array(), cmd.total, u[0], u[1], u[2], constants.mu, engine.exhaust_speed(constants), 0, 0.0, out
    )
    return out


def eom_cartesian(
    s: CartesianState,
    accel_cmd: ArrayLike,
    constants: MoonConstants = MOON,
    *,
    total: bool = True,
    thrust: float = 0.0,
    engine: EngineModel | None = None,
) -> NDArray[np.float64]:
    """Derivative of ``(position, velocity, m)``.

    With ``total=True`` the command is the total acceleration (gravity
    included, the polynomial guidance convention). With ``total=False`` it
    is the thrust-specific acceleration and central gravity is added.
    ``thrust`` only drives the mass flow.
    """
    engine = engine or EngineModel()
    a = np.asarray(accel_cmd, dtype=float)
    out = np.empty(7)
    _kernels.rhs_cartesian(
        s.as_array(), a[0], a[1], a[2], total, thrust, constants.mu, engine.exhaust_speed(constants), out
    )
    return out


def mass_flow(thrust_total: float, isp: float, constants: MoonConstants = MOON) -> float:
    return thrust_total / (isp * constants.g0)


def mass_linear(
    m0: float, thrust_total: float, isp: float, dt: float, constants: MoonConstants = MOON, *, dry_mass: float = 0.0
) -> float:
    if dt < 0.0:
        raise ValueError("dt must be non-negative")
    m = m0 - mass_flow(thrust_total, isp, constants) * dt
    if m <= dry_mass:
        raise InfeasibleBurnError(f"burn leaves {m:.1f} kg, at or below the {dry_mass:.1f} kg floor")
    return m

"""Lunar constants, landing-site frames and central gravity.

The landing-site frame is inertial and centred on the Moon. A position is
written ``r * (cos(phi) cos(theta), sin(phi), cos(phi) sin(theta))`` so the
landing site sits at ``phi = 0``, ``theta = 90 deg`` on the third axis.
Velocities in spherical form are projections on the local
``(e_r, e_phi, e_theta)`` triad.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from numpy.typing import ArrayLike, NDArray


class SingularFrameError(ValueError):
    """Raised when the local spherical triad is undefined (pole or origin)."""


@dataclass(frozen=True)
class MoonConstants:
    mu: float = 4.9028e12  # m^3/s^2
    r_moon: float = 1_737_400.0  # m
    g0: float = 9.80665  # m/s^2, only used to turn Isp into exhaust speed

    def __post_init__(self):
        if min(self.mu, self.r_moon, self.g0) <= 0.0:
            raise ValueError("MoonConstants fields must be strictly positive")
        g_surf = self.mu / self.r_moon**2
        if not 1.5 <= g_surf <= 1.8:
            raise ValueError(f"surface gravity {g_surf:.4f} m/s^2 outside [1.5, 1.8]")

    @property
    def surface_gravity(self) -> float:
        return self.mu / self.r_moon**2


MOON = MoonConstants()


@dataclass(frozen=True)
class SphericalState:
    """Lander state in the landing-site spherical frame.

    Attributes:
        t: time [s]
        r: distance from the Moon centre [m]
        phi: out-of-plane angle [rad]
        theta: along-track angle [rad]; the landing site is at pi/2
        v_r, v_phi, v_theta: inertial velocity on the local triad [m/s]
        m: mass [kg]
    """

    t: float
    r: float
    phi: float
    theta: float
    v_r: float
    v_phi: float
    v_theta: float
    m: float

    def as_array(self) -> NDArray[np.float64]:
        """State vector ``(r, phi, theta, v_r, v_phi, v_theta, m)``."""
        return np.array(
            [self.r, self.phi, self.theta, self.v_r, self.v_phi, self.v_theta, self.m]
        )

    @classmethod
    def from_array(cls, t: float, y: ArrayLike) -> "SphericalState":
        y = np.asarray(y, dtype=float)
        return cls(float(t), *(float(v) for v in y[:7]))

    def validate(self, constants: MoonConstants = MOON) -> "SphericalState":
        if not self.r > constants.r_moon - 100.0:
            raise ValueError(f"radius {self.r:.1f} m is below the surface guard")
        if not self.m > 0.0:
            raise ValueError("mass must be positive")
        if not abs(self.phi) < math.pi / 2:
            raise ValueError("|phi| must be below pi/2")
        return self

    def altitude(self, constants: MoonConstants = MOON) -> float:
        return self.r - constants.r_moon

    def downrange(self, constants: MoonConstants = MOON) -> float:
        return downrange_from_theta(self.theta, constants)

    def replace(self, **changes) -> "SphericalState":
        return replace(self, **changes)


@dataclass(frozen=True)
class CartesianState:
    t: float
    position: NDArray[np.float64] = field(repr=False)
    velocity: NDArray[np.float64] = field(repr=False)
    m: float

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float).reshape(3))
        object.__setattr__(self, "velocity", np.asarray(self.velocity, dtype=float).reshape(3))
        if not (np.all(np.isfinite(self.position)) and np.all(np.isfinite(self.velocity))):
            raise ValueError("CartesianState components must be finite")

    def as_array(self) -> NDArray[np.float64]:
        return np.concatenate([self.position, self.velocity, [self.m]])

    @classmethod
    def from_array(cls, t: float, y: ArrayLike) -> "CartesianState":
        y = np.asarray(y, dtype=float)
        return cls(float(t), y[0:3], y[3:6], float(y[6]))


def gravity_accel(position: ArrayLike, constants: MoonConstants = MOON) -> NDArray[np.float64]:
    """Central-field acceleration ``-mu r / |r|^3`` at a Moon-centred position."""
    r = np.asarray(position, dtype=float)
    rn = float(np.linalg.norm(r))
    if rn == 0.0:
        raise ValueError("gravity is undefined at the Moon centre")
    return -constants.mu * r / rn**3


def local_triad(phi: float, theta: float) -> NDArray[np.float64]:
    """Rows are ``e_r``, ``e_phi``, ``e_theta`` in the inertial frame."""
    cp, sp = math.cos(phi), math.sin(phi)
    ct, st = math.cos(theta), math.sin(theta)
    return np.array(
        [
            [cp * ct, sp, cp * st],
            [-sp * ct, cp, -sp * st],
            [-st, 0.0, ct],
        ]
    )


def spherical_to_cartesian(s: SphericalState) -> CartesianState:
    triad = local_triad(s.phi, s.theta)
    pos = s.r * triad[0]
    vel = triad.T @ np.array([s.v_r, s.v_phi, s.v_theta])
    return CartesianState(s.t, pos, vel, s.m)


def position_angles(position: ArrayLike) -> tuple[float, float, float]:
    """Return ``(r, phi, theta)`` of a Moon-centred position."""
    x, y, z = (float(v) for v in np.asarray(position, dtype=float))
    rho = math.hypot(x, z)
    r = math.sqrt(rho * rho + y * y)
    if r == 0.0 or rho == 0.0:
        raise SingularFrameError("spherical frame is singular at the pole or the origin")
    return r, math.atan2(y, rho), math.atan2(z, x)


def cartesian_to_spherical(c: CartesianState) -> SphericalState:
    r, phi, theta = position_angles(c.position)
    v_r, v_phi, v_theta = local_triad(phi, theta) @ c.velocity
    return SphericalState(c.t, r, phi, theta, float(v_r), float(v_phi), float(v_theta), c.m)


def periselene_state(
    peri_alt: float, apo_alt: float, constants: MoonConstants = MOON, *, theta: float = 0.0, m: float = 7000.0
) -> SphericalState:
    """Periapsis state of an in-plane ellipse, velocity from vis-viva."""
    if not apo_alt >= peri_alt >= 0.0:
        raise ValueError("need apo_alt >= peri_alt >= 0")
    rp = constants.r_moon + peri_alt
    a = constants.r_moon + 0.5 * (peri_alt + apo_alt)
    v = math.sqrt(constants.mu * (2.0 / rp - 1.0 / a))
    return SphericalState(0.0, rp, 0.0, theta, 0.0, 0.0, v, m)


def orbital_period(peri_alt: float, apo_alt: float, constants: MoonConstants = MOON) -> float:
    a = constants.r_moon + 0.5 * (peri_alt + apo_alt)
    return 2.0 * math.pi * math.sqrt(a**3 / constants.mu)


def downrange_from_theta(theta: float, constants: MoonConstants = MOON) -> float:
    """Along-track distance to the landing site, positive before the site."""
    return constants.r_moon * (math.pi / 2 - theta)


def theta_from_downrange(downrange: float, constants: MoonConstants = MOON) -> float:
    return math.pi / 2 - downrange / constants.r_moon

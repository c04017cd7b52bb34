"""Cubic total-acceleration guidance for powered descent and diverts.

The total acceleration ``a = T/m u + g`` follows
``a(t) = a0 + C1 t + C2 t^2 + C3 t^3`` with ``t`` measured from the start
of the segment. Coefficients come in closed form from the position,
velocity and acceleration conditions at both ends.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .dynamics import EngineModel
from .moon import MOON, MoonConstants, gravity_accel, local_triad, theta_from_downrange
from .propagator import EventSpec, Trajectory, propagate

HDA_LIMITS = {1: 100.0, 2: 20.0}


class DivertRejected(ValueError):
    pass


def _vec(x) -> NDArray[np.float64]:
    return np.asarray(x, dtype=float).reshape(3)


@dataclass(frozen=True)
class DescentBoundary:
    r0: NDArray[np.float64]
    v0: NDArray[np.float64]
    a0: NDArray[np.float64]
    rf: NDArray[np.float64]
    vf: NDArray[np.float64]
    af: NDArray[np.float64]
    tf: float

    def __post_init__(self):
        for name in ("r0", "v0", "a0", "rf", "vf", "af"):
            object.__setattr__(self, name, _vec(getattr(self, name)))


@dataclass(frozen=True)
class CubicLaw:
    """Total-acceleration cubic with its initial position and velocity.

    ``t0`` is the absolute start time; evaluation methods take absolute time.
    """

    a0: NDArray[np.float64]
    c1: NDArray[np.float64]
    c2: NDArray[np.float64]
    c3: NDArray[np.float64]
    tf: float
    r0: NDArray[np.float64] = field(default_factory=lambda: np.zeros(3))
    v0: NDArray[np.float64] = field(default_factory=lambda: np.zeros(3))
    t0: float = 0.0

    def __post_init__(self):
        for name in ("a0", "c1", "c2", "c3", "r0", "v0"):
            object.__setattr__(self, name, _vec(getattr(self, name)))
        if not self.tf > 0.0:
            raise ValueError("tf must be positive")

    def accel(self, t: float) -> NDArray[np.float64]:
        s = t - self.t0
        return self.a0 + s * (self.c1 + s * (self.c2 + s * self.c3))

    def velocity(self, t: float) -> NDArray[np.float64]:
        s = t - self.t0
        return self.v0 + s * (self.a0 + s * (self.c1 / 2 + s * (self.c2 / 3 + s * self.c3 / 4)))

    def position(self, t: float) -> NDArray[np.float64]:
        s = t - self.t0
        return self.r0 + s * (
            self.v0 + s * (self.a0 / 2 + s * (self.c1 / 6 + s * (self.c2 / 12 + s * self.c3 / 20)))
        )

    @property
    def t_end(self) -> float:
        return self.t0 + self.tf


def cubic_coefficients(b: DescentBoundary, t0: float = 0.0) -> CubicLaw:
    if not b.tf > 0.0:
        raise ValueError("tf must be positive")
    tf = b.tf
    da = b.af - b.a0
    dv = b.vf - b.v0 - b.a0 * tf
    dr = b.rf - b.r0 - b.v0 * tf - 0.5 * b.a0 * tf**2
    c1 = 3.0 / tf * da - 24.0 / tf**2 * dv + 60.0 / tf**3 * dr
    c2 = -12.0 / tf**2 * da + 84.0 / tf**3 * dv - 180.0 / tf**4 * dr
    c3 = 10.0 / tf**3 * da - 60.0 / tf**4 * dv + 120.0 / tf**5 * dr
    return CubicLaw(b.a0, c1, c2, c3, tf, b.r0, b.v0, t0)


def vga_target(
    shift: float = 0.0, constants: MoonConstants = MOON, *, altitude: float = 30.0, descent_speed: float = 2.0
) -> tuple[NDArray[np.float64], NDArray[np.float64], NDArray[np.float64]]:
    """Vertical-gate position, velocity and acceleration.

    ``shift`` moves the gate along-track in downrange metres (negative is
    beyond the nominal site). The gate has zero total acceleration so the
    outer engines carry exactly the vehicle weight.
    """
    theta = theta_from_downrange(shift, constants)
    e_r = local_triad(0.0, theta)[0]
    return (constants.r_moon + altitude) * e_r, -descent_speed * e_r, np.zeros(3)


def thrust_from_total_accel(
    accel: ArrayLike, position: ArrayLike, mass: float, constants: MoonConstants = MOON
) -> tuple[float, NDArray[np.float64]]:
    """Thrust magnitude and inertial direction realising a total acceleration."""
    spec = _vec(accel) - gravity_accel(position, constants)
    n = float(np.linalg.norm(spec))
    if n == 0.0:
        return 0.0, _vec(position) / float(np.linalg.norm(position))
    return mass * n, spec / n


@dataclass
class ThrustTrace:
    t: NDArray[np.float64]
    t1: NDArray[np.float64]
    u: NDArray[np.float64]
    violations: list[str]


def thrust_trace(
    law: CubicLaw,
    trajectory: Trajectory,
    engine: EngineModel | None = None,
    constants: MoonConstants = MOON,
) -> ThrustTrace:
    """Per-sample thrust and direction along a Cartesian trace of the law,
    with a report of samples outside the two-engine bounds."""
    engine = engine or EngineModel()
    if trajectory.form != "cartesian":
        raise ValueError("thrust_trace needs a Cartesian trajectory")
    lo, hi = engine.t1_bounds
    t1 = np.empty(len(trajectory))
    u = np.empty((len(trajectory), 3))
    for i, (t, y) in enumerate(zip(trajectory.t, trajectory.y)):
        t1[i], u[i] = thrust_from_total_accel(law.accel(t), y[:3], y[6], constants)
    bad = []
    if np.any(t1 > hi + 1e-6):
        bad.append(f"T1 max {t1.max():.1f} N above {hi:.0f} N")
    if np.any(t1 < lo - 1e-6):
        bad.append(f"T1 min {t1.min():.1f} N below {lo:.0f} N")
    return ThrustTrace(trajectory.t.copy(), t1, u, bad)


def cubic_steering(law: CubicLaw, engine: EngineModel, constants: MoonConstants, center_on: bool):
    """Cartesian total-mode steering: thrust follows the integrated mass."""

    def steer(t, y):
        a = law.accel(t)
        T, _ = thrust_from_total_accel(a, y[:3], y[6], constants)
        t1, t2 = engine.split(T, center_on)
        return t1, t2, a

    return steer


def fly_cubic(
    law: CubicLaw,
    y0: ArrayLike,
    engine: EngineModel | None = None,
    constants: MoonConstants = MOON,
    *,
    t_start: float | None = None,
    events=(),
    step: float = 0.1,
    center_on: bool = False,
):
    """Integrate the Cartesian state under the law until ``law.t_end`` or an event."""
    engine = engine or EngineModel()
    t_start = law.t0 if t_start is None else t_start
    return propagate(
        np.asarray(y0, dtype=float),
        cubic_steering(law, engine, constants, center_on),
        (t_start, law.t_end),
        [EventSpec("time_reached", law.t_end), *events],
        step,
        form="cartesian",
        total_accel=True,
        constants=constants,
        engine=engine,
    )


def plan_divert(
    y: ArrayLike,
    t: float,
    accel: ArrayLike,
    shift: float,
    tf_div: float,
    constants: MoonConstants = MOON,
    *,
    hda: int = 1,
    increment: float | None = None,
    vga_altitude: float = 30.0,
    descent_speed: float = 2.0,
) -> CubicLaw:
    """New cubic from the current Cartesian state to a displaced vertical gate.

    ``shift`` is the cumulative downrange displacement of the gate;
    ``increment`` (default ``shift``) is the part commanded at this HDA and is
    checked against its limit. The initial total acceleration is the one
    currently flown, which keeps state and command continuous.
    """
    limit = HDA_LIMITS.get(hda)
    if limit is None:
        raise ValueError("hda must be 1 or 2")
    inc = shift if increment is None else increment
    if abs(inc) > limit + 1e-9:
        raise DivertRejected(f"HDA{hda} divert of {inc:.1f} m exceeds the {limit:.0f} m limit")
    y = np.asarray(y, dtype=float)
    rf, vf, af = vga_target(shift, constants, altitude=vga_altitude, descent_speed=descent_speed)
    return cubic_coefficients(DescentBoundary(y[:3], y[3:6], accel, rf, vf, af, tf_div), t0=t)


@dataclass
class TofMetrics:
    tf: float
    propellant: float
    max_pitch_rate_dps: float
    max_throttle_rate: float
    t1_min: float
    t1_max: float
    feasible: bool
    error: str | None = None


def segment_metrics(traj: Trajectory, skip_after: float | None = None) -> tuple[float, float, float, float, float]:
    """``(propellant, max pitch rate [deg/s], max |dT1/dt|, T1 min, T1 max)``.

    Throttle-rate samples starting at ``skip_after`` (an engine cut-off) are
    ignored.
    """
    prop = float(traj.mass[0] - traj.mass[-1])
    rate = traj.pitch_rate_dps()
    dt = np.diff(traj.t)
    ok = dt > 1e-9
    dT = np.abs(np.diff(traj.t1))
    if skip_after is not None:
        ok &= ~((traj.t[:-1] <= skip_after + 1e-9) & (traj.t[1:] > skip_after - 1e-9))
    thr = dT[ok] / dt[ok]
    return (
        prop,
        float(rate[1:].max()) if len(rate) > 1 else 0.0,
        float(thr.max()) if len(thr) else 0.0,
        float(traj.t1.min()),
        float(traj.t1.max()),
    )


def sweep_tof(
    fly,
    tf_grid: ArrayLike,
    engine: EngineModel | None = None,
    *,
    pitch_rate_max: float = 5.0,
) -> list[TofMetrics]:
    """Metrics of a descent family over a time-of-flight grid.

    ``fly(tf)`` returns the Cartesian or spherical trajectory of the
    segment flown with that time of flight (center engine off). Failures
    are recorded per point.
    """
    engine = engine or EngineModel()
    lo, hi = engine.t1_bounds
    rows = []
    for tf in np.asarray(tf_grid, dtype=float):
        if not tf > 0.0:
            rows.append(TofMetrics(float(tf), math.nan, math.nan, math.nan, math.nan, math.nan, False, "tf <= 0"))
            continue
        try:
            traj = fly(float(tf))
        except Exception as exc:  # noqa: BLE001 - recorded, not fatal
            rows.append(TofMetrics(float(tf), math.nan, math.nan, math.nan, math.nan, math.nan, False, str(exc)))
            continue
        prop, pr, thr, tmin, tmax = segment_metrics(traj)
        feasible = (
            pr <= pitch_rate_max + 1e-6 and thr <= engine.t1_rate_max + 1e-6 and tmin >= lo - 1e-6
            and tmax <= hi + 1e-6
        )
        rows.append(TofMetrics(float(tf), prop, pr, thr, tmin, tmax, feasible))
    return rows

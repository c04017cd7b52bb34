"""Fixed-step RK4 propagation with event-based termination."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from numpy.typing import NDArray

from . import _kernels
from .dynamics import EngineModel
from .moon import MOON, MoonConstants, SphericalState, downrange_from_theta, local_triad

# steering(t, y) -> (t1, t2, vector). The vector is the thrust direction
# (local triad for the spherical form, inertial for Cartesian) or, in the
# Cartesian "total" mode, the commanded total acceleration.
Steering = Callable[[float, NDArray[np.float64]], tuple[float, float, NDArray[np.float64]]]

EVENT_KINDS = ("time_reached", "altitude_crossing", "pitch_angle_reached", "theta_crossing")


class ImpactError(RuntimeError):
    """Raised when a propagation goes below the surface guard before any event."""

    def __init__(self, message: str, trajectory: "Trajectory | None" = None):
        super().__init__(message)
        self.trajectory = trajectory


@dataclass(frozen=True)
class EventSpec:
    """Termination condition.

    ``direction`` is +1 for an increasing crossing, -1 for decreasing and
    0 for either. Pitch targets are in radians.
    """

    kind: str
    target: float
    direction: int = 0
    tol: float = 1e-6

    def __post_init__(self):
        if self.kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {self.kind!r}")
        if not math.isfinite(self.target):
            raise ValueError("event target must be finite")
        if self.tol <= 0.0:
            raise ValueError("event tolerance must be positive")
        if self.direction not in (-1, 0, 1):
            raise ValueError("direction must be -1, 0 or +1")


@dataclass
class Trajectory:
    """Time-ordered samples of state and command.

    ``u`` is the unit thrust direction: on the local triad when
    ``form == "spherical"``, inertial when ``form == "cartesian"``.
    """

    t: NDArray[np.float64]
    y: NDArray[np.float64]
    t1: NDArray[np.float64]
    t2: NDArray[np.float64]
    u: NDArray[np.float64]
    form: str = "spherical"
    constants: MoonConstants = field(default=MOON, repr=False)

    def __len__(self) -> int:
        return len(self.t)

    @property
    def thrust(self) -> NDArray[np.float64]:
        return self.t1 + self.t2

    def radius(self) -> NDArray[np.float64]:
        if self.form == "spherical":
            return self.y[:, 0]
        return np.linalg.norm(self.y[:, :3], axis=1)

    def altitude(self) -> NDArray[np.float64]:
        return self.radius() - self.constants.r_moon

    @property
    def mass(self) -> NDArray[np.float64]:
        return self.y[:, 6]

    def to_spherical(self) -> "Trajectory":
        if self.form == "spherical":
            return self
        ys = np.empty_like(self.y)
        us = np.empty_like(self.u)
        for i, row in enumerate(self.y):
            x, yy, z = row[:3]
            rho = math.hypot(x, z)
            r = math.sqrt(rho * rho + yy * yy)
            phi, theta = math.atan2(yy, rho), math.atan2(z, x)
            triad = local_triad(phi, theta)
            ys[i, :3] = r, phi, theta
            ys[i, 3:6] = triad @ row[3:6]
            ys[i, 6] = row[6]
            us[i] = triad @ self.u[i]
        return Trajectory(self.t.copy(), ys, self.t1.copy(), self.t2.copy(), us, "spherical", self.constants)

    def downrange(self) -> NDArray[np.float64]:
        sph = self.to_spherical()
        return self.constants.r_moon * (math.pi / 2 - sph.y[:, 2])

    def pitch(self) -> NDArray[np.float64]:
        """Elevation of the thrust direction above the local horizontal [rad]."""
        sph = self.to_spherical()
        return np.arcsin(np.clip(sph.u[:, 0], -1.0, 1.0))

    def pitch_deg(self) -> NDArray[np.float64]:
        return np.degrees(self.pitch())

    def pitch_rate(self) -> NDArray[np.float64]:
        """Angular rate of the thrust direction seen in the local triad [rad/s].

        Backward differences on the sample grid; the first sample repeats
        the second.
        """
        sph = self.to_spherical()
        n = len(self.t)
        rate = np.zeros(n)
        if n < 2:
            return rate
        dots = np.clip(np.sum(sph.u[1:] * sph.u[:-1], axis=1), -1.0, 1.0)
        cross = np.linalg.norm(np.cross(sph.u[:-1], sph.u[1:]), axis=1)
        ang = np.arctan2(cross, dots)
        dt = np.diff(self.t)
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(dt > 0, ang / np.where(dt > 0, dt, 1.0), 0.0)
        rate[1:] = r
        rate[0] = r[0]
        return rate

    def pitch_rate_dps(self) -> NDArray[np.float64]:
        return np.degrees(self.pitch_rate())

    def state(self, i: int) -> SphericalState:
        sph = self.to_spherical()
        return SphericalState.from_array(self.t[i], sph.y[i])

    def final_state(self) -> SphericalState:
        return self.state(-1)

    def concat(self, other: "Trajectory") -> "Trajectory":
        """Append ``other``; a duplicated junction sample is dropped from it."""
        a = self.to_spherical()
        b = other.to_spherical()
        start = 1 if len(b) and len(a) and b.t[0] <= a.t[-1] else 0
        return Trajectory(
            np.concatenate([a.t, b.t[start:]]),
            np.vstack([a.y, b.y[start:]]),
            np.concatenate([a.t1, b.t1[start:]]),
            np.concatenate([a.t2, b.t2[start:]]),
            np.vstack([a.u, b.u[start:]]),
            "spherical",
            self.constants,
        )

    def reversed(self) -> "Trajectory":
        return Trajectory(
            self.t[::-1].copy(), self.y[::-1].copy(), self.t1[::-1].copy(), self.t2[::-1].copy(),
            self.u[::-1].copy(), self.form, self.constants,
        )

    def table(self) -> NDArray[np.float64]:
        """Rows in the CSV column order used by the CLI."""
        sph = self.to_spherical()
        return np.column_stack(
            [
                sph.t, sph.y[:, :7], sph.altitude(), sph.downrange(), sph.pitch_deg(), sph.pitch_rate_dps(),
                sph.t1, sph.t2,
            ]
        )


@dataclass
class PropagationResult:
    trajectory: Trajectory
    event: EventSpec | None
    event_time: float | None

    @property
    def terminated(self) -> bool:
        return self.event is not None


class _Model:
    def __init__(self, steering, form, total_mode, constants, engine):
        self.steering = steering
        self.form = form
        self.total_mode = total_mode
        self.mu = constants.mu
        self.ve = engine.exhaust_speed(constants)
        self.r_moon = constants.r_moon

    def command(self, t, y):
        t1, t2, vec = self.steering(t, y)
        return float(t1), float(t2), np.asarray(vec, dtype=float)

    def f(self, t, y):
        t1, t2, vec = self.command(t, y)
        out = np.empty(7)
        if self.form == "spherical":
            _kernels.rhs_spherical(y, t1 + t2, vec[0], vec[1], vec[2], self.mu, self.ve, 0, 0.0, out)
        elif self.total_mode:
            _kernels.rhs_cartesian(y, vec[0], vec[1], vec[2], True, t1 + t2, self.mu, self.ve, out)
        else:
            # vec is the inertial thrust direction here
            a = (t1 + t2) / y[6] * vec
            _kernels.rhs_cartesian(y, a[0], a[1], a[2], False, t1 + t2, self.mu, self.ve, out)
        return out

    def rk4(self, t, y, h):
        k1 = self.f(t, y)
        k2 = self.f(t + 0.5 * h, y + 0.5 * h * k1)
        k3 = self.f(t + 0.5 * h, y + 0.5 * h * k2)
        k4 = self.f(t + h, y + h * k3)
        return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    def radius(self, y):
        if self.form == "spherical":
            return y[0]
        return math.sqrt(y[0] * y[0] + y[1] * y[1] + y[2] * y[2])

    def direction(self, y, vec):
        """Unit thrust direction in the native frame of the form."""
        if self.form == "cartesian" and self.total_mode:
            rn = self.radius(y)
            vec = vec + self.mu * y[:3] / rn**3
        n = float(np.linalg.norm(vec))
        if n == 0.0:
            return np.array([1.0, 0.0, 0.0]) if self.form == "spherical" else y[:3] / self.radius(y)
        return vec / n

    def pitch(self, y, u):
        if self.form == "spherical":
            return math.asin(max(-1.0, min(1.0, u[0])))
        return math.asin(max(-1.0, min(1.0, float(np.dot(u, y[:3])) / self.radius(y))))

    def theta(self, y):
        if self.form == "spherical":
            return y[2]
        return math.atan2(y[2], y[0])

    def event_value(self, ev, t, y):
        if ev.kind == "time_reached":
            return t - ev.target
        if ev.kind == "altitude_crossing":
            return self.radius(y) - self.r_moon - ev.target
        if ev.kind == "theta_crossing":
            return self.theta(y) - ev.target
        t1, t2, vec = self.command(t, y)
        return self.pitch(y, self.direction(y, vec)) - ev.target


def _crossed(ev: EventSpec, g0: float, g1: float) -> bool:
    if ev.direction >= 0 and g0 < 0.0 <= g1:
        return True
    if ev.direction <= 0 and g0 > 0.0 >= g1:
        return True
    return False


def propagate(
    initial: NDArray[np.float64] | SphericalState,
    steering: Steering,
    span: tuple[float, float],
    events: Sequence[EventSpec] = (),
    step: float = 0.1,
    direction: str | None = None,
    *,
    form: str = "spherical",
    total_accel: bool = False,
    constants: MoonConstants = MOON,
    engine: EngineModel | None = None,
    surface_guard: float = 100.0,
) -> PropagationResult:
    """Integrate from ``span[0]`` towards ``span[1]`` with classical RK4.

    A backward run (``span[1] < span[0]``) takes negative steps, which is the
    same as integrating the negated time derivative in reversed time. The
    first event whose crossing is seen inside a step is located by
    bisection on the sub-step length to ``event.tol`` seconds; time events
    are hit exactly.

    Raises:
        ImpactError: the radius drops below ``r_moon - surface_guard``.
    """
    if step <= 0.0:
        raise ValueError("step must be positive")
    if form not in ("spherical", "cartesian"):
        raise ValueError("form must be 'spherical' or 'cartesian'")
    engine = engine or EngineModel()
    t0, t_end = float(span[0]), float(span[1])
    sign = 1.0 if t_end >= t0 else -1.0
    if direction is not None and direction != ("forward" if sign > 0 else "backward"):
        raise ValueError(f"direction {direction!r} inconsistent with span {span}")
    if isinstance(initial, SphericalState):
        initial = initial.as_array()
    y = np.array(initial, dtype=float)
    model = _Model(steering, form, total_accel, constants, engine)
    floor = constants.r_moon - surface_guard

    ts, ys, t1s, t2s, us = [], [], [], [], []

    def record(t, y):
        t1, t2, vec = model.command(t, y)
        ts.append(t)
        ys.append(y.copy())
        t1s.append(t1)
        t2s.append(t2)
        us.append(model.direction(y, vec))

    def result(event, t_ev):
        traj = Trajectory(np.array(ts), np.array(ys), np.array(t1s), np.array(t2s), np.array(us), form, constants)
        return PropagationResult(traj, event, t_ev)

    # time events collapse to an earlier end of span
    stop_time, time_event = t_end, None
    for ev in events:
        if ev.kind == "time_reached" and (ev.target - t0) * sign >= 0 and (ev.target - stop_time) * sign <= 0:
            stop_time, time_event = ev.target, ev
    other = [ev for ev in events if ev.kind != "time_reached"]

    t = t0
    record(t, y)
    g_prev = [model.event_value(ev, t, y) for ev in other]
    n_full = int(math.floor(abs(stop_time - t0) / step + 1e-9))
    k = 0
    while True:
        if k < n_full:
            h = sign * step
            t_next = t0 + sign * step * (k + 1)
        else:
            h = stop_time - t
            t_next = stop_time
            if abs(h) <= 1e-12:
                break
        y_next = model.rk4(t, y, h)
        g_next = [model.event_value(ev, t_next, y_next) for ev in other]
        hit = None
        for i, ev in enumerate(other):
            if _crossed(ev, g_prev[i], g_next[i]):
                hit = i
                break
        if hit is not None:
            ev = other[hit]
            lo, hi = 0.0, abs(h)
            y_hit = y_next
            while hi - lo > ev.tol:
                mid = 0.5 * (lo + hi)
                y_mid = model.rk4(t, y, sign * mid)
                if _crossed(ev, g_prev[hit], model.event_value(ev, t + sign * mid, y_mid)):
                    hi, y_hit = mid, y_mid
                else:
                    lo = mid
            if hi == abs(h):
                y_hit = y_next
            t_hit = t + sign * hi
            record(t_hit, y_hit)
            return result(ev, t_hit)
        t, y = t_next, y_next
        record(t, y)
        if model.radius(y) < floor:
            raise ImpactError(f"surface breached at t={t:.3f} s", result(None, None).trajectory)
        g_prev = g_next
        k += 1
        if k > n_full:
            break
    if time_event is not None:
        return result(time_event, stop_time)
    return result(None, None)

"""End-to-end descent assembly, waypoint timeline and constraint audit."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import reference
from .braking import (
    BilinearLaw,
    BrakingSolution,
    BrakingTarget,
    ConvergenceError,
    UnreachableError,
    propagate_law,
    solve_braking_5,
    solve_braking_6,
)
from .config import MissionConfig, MissionDesign
from .moon import SphericalState, cartesian_to_spherical, local_triad, periselene_state, spherical_to_cartesian
from .pitch_up import fly_pitch_up, plan_pitch_up
from .polynomial import CubicLaw, DescentBoundary, cubic_coefficients, fly_cubic, plan_divert, vga_target
from .propagator import EventSpec, ImpactError, Trajectory
from .vertical import GateError, fly_vertical

logger = logging.getLogger(__name__)

WAYPOINTS = ("MBB", "PGA", "LGA", "VGA", "MECO")


class AssemblyError(RuntimeError):
    def __init__(self, phase: str, message: str):
        super().__init__(f"{phase}: {message}")
        self.phase = phase


@dataclass(frozen=True)
class DivertScenario:
    code: str
    hda1_shift: float = 0.0
    hda2_shift: float = 0.0
    tf_hda1: float | None = None
    tf_hda2: float | None = None

    def validate(self, config: MissionConfig) -> "DivertScenario":
        g = config.gates
        if abs(self.hda1_shift) > g.hda1_max_divert or abs(self.hda2_shift) > g.hda2_max_divert:
            raise ValueError(f"scenario {self.code}: divert beyond the HDA limits")
        return self

    @property
    def total_shift(self) -> float:
        return self.hda1_shift + self.hda2_shift


def scenario(code: str, config: MissionConfig | None = None, design: MissionDesign | None = None) -> DivertScenario:
    config = config or MissionConfig()
    if code not in config.scenarios:
        raise KeyError(f"unknown scenario {code!r}")
    h1, h2 = config.scenarios[code]
    tf1, tf2 = design.divert_times(code) if design is not None else (None, None)
    return DivertScenario(code, float(h1), float(h2), tf1, tf2).validate(config)


@dataclass
class Waypoint:
    name: str
    t: float
    altitude: float
    downrange: float
    v_vertical: float
    v_horizontal: float
    pitch_deg: float
    mass: float

    def row(self) -> list[float]:
        return [self.t, self.altitude, self.downrange, self.v_vertical, self.v_horizontal, self.pitch_deg, self.mass]


@dataclass
class WaypointTimeline:
    waypoints: dict[str, Waypoint]
    pitch_up_end: float

    def __getitem__(self, name: str) -> Waypoint:
        return self.waypoints[name]

    def validate(self) -> "WaypointTimeline":
        wps = [self.waypoints[n] for n in WAYPOINTS]
        if any(b.t < a.t for a, b in zip(wps, wps[1:])):
            raise ValueError("waypoint times are not monotone")
        if any(b.mass > a.mass for a, b in zip(wps, wps[1:])):
            raise ValueError("waypoint masses are not decreasing")
        return self


@dataclass
class Constraint:
    name: str
    value: float
    limit: float
    kind: str  # "max", "min" or "band"
    tol: float = 0.0

    @property
    def margin(self) -> float:
        if self.kind == "max":
            return self.limit + self.tol - self.value
        if self.kind == "min":
            return self.value - (self.limit - self.tol)
        return self.tol - abs(self.value - self.limit)

    @property
    def passed(self) -> bool:
        return self.margin >= 0.0

    @property
    def normalized_violation(self) -> float:
        scale = abs(self.limit) if self.kind != "band" else max(abs(self.limit), self.tol, 1.0)
        return max(0.0, -self.margin) / (scale or 1.0)


@dataclass
class ConstraintAudit:
    constraints: list[Constraint]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.constraints)

    def failures(self) -> list[Constraint]:
        return [c for c in self.constraints if not c.passed]

    def __getitem__(self, name: str) -> Constraint:
        for c in self.constraints:
            if c.name == name:
                return c
        raise KeyError(name)

    def penalty(self, weight: float) -> float:
        # the weight scales each normalised violation before squaring so
        # that a 0.1% gate miss still outweighs kilogram-level savings
        return sum((weight * c.normalized_violation) ** 2 for c in self.constraints)


@dataclass
class PropellantBreakdown:
    """Phase propellant [kg] split at the end of the slew and, alternatively, at LGA."""

    braking: float
    pitch_up: float
    powered: float
    vertical: float
    braking_pitch_up_to_lga: float
    powered_from_lga: float

    @property
    def braking_pitch_up(self) -> float:
        return self.braking + self.pitch_up

    @property
    def total(self) -> float:
        return self.braking + self.pitch_up + self.powered + self.vertical


@dataclass
class Head:
    """Braking burn and pitch-up, shared by every divert scenario of a design."""

    solution: BrakingSolution
    braking: Trajectory
    pitch: Trajectory
    lga_time: float | None
    pga: SphericalState
    end: SphericalState
    u_end: np.ndarray
    thrust_end: float


@dataclass
class MissionResult:
    design: MissionDesign
    scenario: DivertScenario
    trajectory: Trajectory
    timeline: WaypointTimeline
    audit: ConstraintAudit
    propellant: PropellantBreakdown
    delta_v: float
    head: Head
    powered_laws: list[CubicLaw] = field(default_factory=list)
    lga_time: float = math.nan
    hda2_time: float = math.nan

    @property
    def total_propellant(self) -> float:
        return float(self.trajectory.mass[0] - self.trajectory.mass[-1])

    @property
    def time_of_flight(self) -> float:
        return float(self.trajectory.t[-1] - self.trajectory.t[0])


def braking_target(design: MissionDesign, config: MissionConfig) -> BrakingTarget:
    g = config.gates
    p = periselene_state(g.peri_alt, g.apo_alt, config.moon, m=g.m0)
    xf = SphericalState(0.0, design.pga_r, 0.0, design.pga_theta, design.pga_v_r, 0.0, design.pga_v_theta, 0.0)
    return BrakingTarget(xf, (p.r, p.phi, p.v_r, p.v_phi, p.v_theta), g.m0)


def _braking_trajectory(sol: BrakingSolution, config: MissionConfig, target: BrakingTarget) -> Trajectory:
    xf = target.x_f
    law = sol.law
    m_f = float(sol.x0[6] - law.thrust / config.engine.exhaust_speed(config.moon) * law.dt)
    yf = np.array([xf.r, xf.phi, xf.theta, xf.v_r, xf.v_phi, xf.v_theta, m_f])
    _, s = propagate_law(yf, law, law.tf, law.t0, config.engine, config.moon, config.step, record=True)
    s = s[::-1]
    return _bilinear_samples(s, law, config)


def _bilinear_samples(s: np.ndarray, law: BilinearLaw, config: MissionConfig) -> Trajectory:
    t1, t2 = config.engine.split(law.thrust, True)
    n = len(s)
    return Trajectory(
        s[:, 0].copy(), s[:, 1:].copy(), np.full(n, t1), np.full(n, t2), law.direction(s[:, 0]),
        "spherical", config.moon,
    )


def fly_head(
    design: MissionDesign, config: MissionConfig, guess: BilinearLaw | None = None
) -> Head:
    """Solve and fly the braking burn, then the pitch-up slew."""
    target = braking_target(design, config)
    try:
        sol = solve_braking_5(target, config.engine, config.moon, guess, step=config.step)
    except (ConvergenceError, ValueError) as exc:
        raise AssemblyError("braking burn", str(exc)) from exc
    braking = _braking_trajectory(sol, config, target)
    return _pitch_head(sol, braking, config)


def _pitch_head(sol: BrakingSolution, braking: Trajectory, config: MissionConfig) -> Head:
    g = config.gates
    pga = braking.final_state()
    u_pga = sol.law.direction(pga.t)
    try:
        plan = plan_pitch_up(
            pga, u_pga, sol.law.thrust, config.engine,
            target_elevation=math.radians(g.pitch_up_target_deg),
            pitch_rate_max=math.radians(g.pitch_rate_max_deg),
        )
        pitch, lga_time = fly_pitch_up(plan, pga, config.engine, config.moon, step=config.step,
                                       lga_altitude=g.lga_altitude)
    except (ValueError, ImpactError) as exc:
        raise AssemblyError("pitch-up", str(exc)) from exc
    end = pitch.final_state()
    return Head(sol, braking, pitch, lga_time, pga, end, plan.direction(end.t), plan.thrust(end.t))


def _inertial(u_local: np.ndarray, s: SphericalState) -> np.ndarray:
    return local_triad(s.phi, s.theta).T @ u_local


def fly_tail(head: Head, design: MissionDesign, sc: DivertScenario, config: MissionConfig):
    """Powered descent with diverts, then vertical descent.

    Returns ``(powered, vertical, laws, lga_time, hda2_time)``.
    """
    g = config.gates
    eng, moon, step = config.engine, config.moon, config.step
    start = head.end
    cart = spherical_to_cartesian(start)
    y = cart.as_array()
    u_in = _inertial(head.u_end, start)
    a0 = head.thrust_end / start.m * u_in - moon.mu * y[:3] / np.linalg.norm(y[:3]) ** 3
    rf, vf, af = vga_target(0.0, moon, altitude=g.vga_altitude, descent_speed=g.vertical_speed)
    try:
        law = cubic_coefficients(DescentBoundary(y[:3], y[3:6], a0, rf, vf, af, design.dt_powered), t0=start.t)
    except ValueError as exc:
        raise AssemblyError("powered descent", str(exc)) from exc
    laws = [law]
    pieces = []
    t = start.t
    lga_time = head.lga_time
    hda2_time = math.nan

    def divert(y, t, law, shift, tf, hda, increment):
        if increment == 0.0 and tf is None:
            return law
        tf = law.t_end - t if tf is None else tf
        return plan_divert(y, t, law.accel(t), shift, tf, moon, hda=hda, increment=increment,
                           vga_altitude=g.vga_altitude, descent_speed=g.vertical_speed)

    try:
        if lga_time is None:
            res = fly_cubic(law, y, eng, moon, t_start=t, step=step, center_on=True,
                            events=[EventSpec("altitude_crossing", g.lga_altitude, -1)])
            pieces.append(res.trajectory)
            if res.event is None or res.event.kind != "altitude_crossing":
                raise AssemblyError("powered descent", "vertical gate reached before the low gate")
            t, y = res.event_time, res.trajectory.y[-1]
            lga_time = t
        law = divert(y, t, law, sc.hda1_shift, sc.tf_hda1, 1, sc.hda1_shift)
        laws.append(law)
        res = fly_cubic(law, y, eng, moon, t_start=t, step=step,
                        events=[EventSpec("altitude_crossing", g.hda2_altitude, -1)])
        pieces.append(res.trajectory)
        if res.event is not None and res.event.kind == "altitude_crossing":
            t, y = res.event_time, res.trajectory.y[-1]
            hda2_time = t
            law = divert(y, t, law, sc.total_shift, sc.tf_hda2, 2, sc.hda2_shift)
            laws.append(law)
            res = fly_cubic(law, y, eng, moon, t_start=t, step=step)
            pieces.append(res.trajectory)
    except ImpactError as exc:
        raise AssemblyError("powered descent", str(exc)) from exc
    except ValueError as exc:
        raise AssemblyError("divert", str(exc)) from exc

    powered = pieces[0].to_spherical()
    for p in pieces[1:]:
        powered = powered.concat(p)
    vga = powered.final_state()
    try:
        vertical = fly_vertical(vga, g.vertical_speed, eng, moon, step=step,
                                pitch=float(math.asin(min(1.0, powered.u[-1, 0]))))
    except (GateError, ImpactError) as exc:
        raise AssemblyError("vertical descent", str(exc)) from exc
    return powered, vertical, laws, lga_time, hda2_time


def _waypoint(name: str, traj: Trajectory, i: int) -> Waypoint:
    s = traj.state(i)
    return Waypoint(
        name, s.t, s.altitude(traj.constants), s.downrange(traj.constants), s.v_r,
        math.hypot(s.v_phi, s.v_theta), float(math.degrees(math.asin(max(-1.0, min(1.0, traj.u[i, 0]))))), s.m,
    )


def _index_at(traj: Trajectory, t: float) -> int:
    return int(np.argmin(np.abs(traj.t - t)))


def audit_trajectory(
    traj: Trajectory, config: MissionConfig, lga_time: float, vga_time: float, sc: DivertScenario | None = None
) -> ConstraintAudit:
    g = config.gates
    eng = config.engine
    cons = []
    rate = traj.pitch_rate_dps()
    cons.append(Constraint("pitch_rate_dps", float(rate[1:].max()), g.pitch_rate_max_deg, "max", 1e-6))

    dt = np.diff(traj.t)
    ok = dt > 1e-9
    ok &= ~((traj.t[:-1] <= lga_time + 1e-9) & (traj.t[1:] > lga_time - 1e-9))
    safe_dt = np.where(ok, dt, 1.0)
    r1 = np.where(ok, np.abs(np.diff(traj.t1)) / safe_dt, 0.0)
    r2 = np.where(ok, np.abs(np.diff(traj.t2)) / safe_dt, 0.0)
    rt = np.where(ok, np.abs(np.diff(traj.thrust)) / safe_dt, 0.0)
    cons.append(Constraint("t1_rate_Nps", float(r1.max()), eng.t1_rate_max, "max", 1e-6))
    cons.append(Constraint("t2_rate_Nps", float(r2.max()), eng.t2_rate_max, "max", 1e-6))
    cons.append(Constraint("total_rate_Nps", float(rt.max()), eng.total_rate_max, "max", 1e-6))

    lo1, hi1 = eng.t1_bounds
    lo2, hi2 = eng.t2_bounds
    on = traj.t2 > 0.0
    cons.append(Constraint("t1_max_N", float(traj.t1.max()), hi1, "max", 1e-6))
    cons.append(Constraint("t1_min_N", float(traj.t1.min()), lo1, "min", 1e-6))
    if np.any(on):
        cons.append(Constraint("t2_max_N", float(traj.t2[on].max()), hi2, "max", 1e-6))
        cons.append(Constraint("t2_min_N", float(traj.t2[on].min()), lo2, "min", 1e-6))

    i_lga = _index_at(traj, lga_time)
    lga = traj.state(i_lga)
    speed = math.sqrt(lga.v_r**2 + lga.v_phi**2 + lga.v_theta**2)
    lga_pitch = math.degrees(math.asin(max(-1.0, min(1.0, traj.u[i_lga, 0]))))
    cons.append(Constraint("lga_altitude_m", lga.altitude(config.moon), g.lga_altitude, "band", 0.5))
    cons.append(Constraint("lga_speed_mps", speed, g.lga_max_speed, "max", 1e-9))
    cons.append(Constraint("lga_pitch_deg", lga_pitch, g.lga_min_pitch_deg, "min", 1e-9))

    i_vga = _index_at(traj, vga_time)
    vga = traj.state(i_vga)
    cons.append(Constraint("vga_altitude_m", vga.altitude(config.moon), g.vga_altitude, "band", 0.1))
    cons.append(Constraint("vga_vertical_speed_mps", -vga.v_r, g.vertical_speed, "band", 0.1))
    cons.append(Constraint("vga_pitch_deg", math.degrees(math.asin(min(1.0, traj.u[i_vga, 0]))),
                           g.vertical_pitch_deg, "band", 1.0))
    cons.append(Constraint("meco_altitude_m", traj.state(-1).altitude(config.moon), 0.0, "band", 0.1))
    if sc is not None:
        cons.append(Constraint("hda1_divert_m", abs(sc.hda1_shift), g.hda1_max_divert, "max", 1e-9))
        cons.append(Constraint("hda2_divert_m", abs(sc.hda2_shift), g.hda2_max_divert, "max", 1e-9))
    return ConstraintAudit(cons)


def delta_v(m0: float, mf: float, config: MissionConfig) -> float:
    return config.engine.exhaust_speed(config.moon) * math.log(m0 / mf)


def _finish(head: Head, design, sc, config, powered, vertical, laws, lga_time, hda2_time) -> MissionResult:
    traj = head.braking.concat(head.pitch).concat(powered).concat(vertical)
    vga_time = powered.t[-1]
    wps = {
        "MBB": _waypoint("MBB", traj, 0),
        "PGA": _waypoint("PGA", traj, _index_at(traj, head.pga.t)),
        "LGA": _waypoint("LGA", traj, _index_at(traj, lga_time)),
        "VGA": _waypoint("VGA", traj, _index_at(traj, vga_time)),
        "MECO": _waypoint("MECO", traj, len(traj) - 1),
    }
    timeline = WaypointTimeline(wps, head.end.t)
    m = traj.mass
    m_lga = wps["LGA"].mass
    prop = PropellantBreakdown(
        braking=float(head.braking.mass[0] - head.braking.mass[-1]),
        pitch_up=float(head.pitch.mass[0] - head.pitch.mass[-1]),
        powered=float(powered.mass[0] - powered.mass[-1]),
        vertical=float(vertical.mass[0] - vertical.mass[-1]),
        braking_pitch_up_to_lga=float(m[0] - m_lga),
        powered_from_lga=float(m_lga - powered.mass[-1]),
    )
    audit = audit_trajectory(traj, config, lga_time, vga_time, sc)
    return MissionResult(
        design, sc, traj, timeline, audit, prop, delta_v(m[0], m[-1], config), head, laws, lga_time, hda2_time
    )


def assemble(
    design: MissionDesign,
    sc: DivertScenario | str = "N",
    config: MissionConfig | None = None,
    *,
    head: Head | None = None,
    guess: BilinearLaw | None = None,
) -> MissionResult:
    """Fly MBB to MECO: braking burn, pitch-up, powered descent with the
    scenario's diverts, vertical descent. Audit failures are reported on
    the result, solver failures raise :class:`AssemblyError`."""
    config = config or MissionConfig()
    if isinstance(sc, str):
        sc = scenario(sc, config, design)
    if head is None:
        head = fly_head(design, config, guess)
    powered, vertical, laws, lga_time, hda2_time = fly_tail(head, design, sc, config)
    return _finish(head, design, sc, config, powered, vertical, laws, lga_time, hda2_time)


@dataclass
class DivertRow:
    code: str
    hda1: float
    hda2: float
    time_of_flight: float
    braking_pitch_up: float
    powered: float
    vertical: float
    total: float
    delta_v: float
    optimal_total: float
    penalty: float
    audit_passed: bool
    error: str | None = None

    @property
    def penalty_fraction(self) -> float:
        return self.penalty / self.optimal_total


def divert_matrix(design: MissionDesign, config: MissionConfig | None = None, codes=None) -> list[DivertRow]:
    """Propellant table over the divert scenarios with the penalty against
    the stored fuel-optimal totals."""
    config = config or MissionConfig()
    codes = list(codes or config.scenarios)
    head = fly_head(design, config)
    rows = []
    for code in codes:
        sc = scenario(code, config, design)
        opt = reference.OPTIMAL_PROPELLANT.get(code, (math.nan,) * 8)[6]
        try:
            res = assemble(design, sc, config, head=head)
        except AssemblyError as exc:
            nan = math.nan
            rows.append(DivertRow(code, sc.hda1_shift, sc.hda2_shift, nan, nan, nan, nan, nan, nan, opt, nan,
                                  False, str(exc)))
            continue
        p = res.propellant
        rows.append(DivertRow(
            code, sc.hda1_shift, sc.hda2_shift, res.time_of_flight, p.braking_pitch_up, p.powered, p.vertical,
            res.total_propellant, res.delta_v, opt, res.total_propellant - opt, res.audit.passed,
        ))
    return rows


@dataclass
class GuidanceUpdate:
    t: float
    time_to_go: float
    thrust: float
    iterations: int


@dataclass
class ClosedLoopResult:
    result: MissionResult
    updates: list[GuidanceUpdate]
    pga_position_error: float
    pga_velocity_error: float
    theta0: float


def replay_closed_loop(
    design: MissionDesign,
    config: MissionConfig | None = None,
    *,
    theta0_offset: float = 0.0,
    gnc_period: float | None = None,
    freeze_time: float | None = None,
    sc: DivertScenario | str = "N",
) -> ClosedLoopResult:
    """Fly the braking burn re-solving the thrust-adjusting guidance every
    GNC cycle from the current state, then the rest of the descent.

    ``theta0_offset`` [rad] displaces the initial along-track angle from its
    nominal design value. Guidance is frozen once the time-to-go drops
    below ``freeze_time``.

    Raises:
        UnreachableError: the displaced start needs a thrust outside the
            engine envelope.
    """
    config = config or MissionConfig()
    period = config.closed_loop.gnc_period if gnc_period is None else gnc_period
    freeze = config.closed_loop.freeze_time if freeze_time is None else freeze_time
    if period <= 0.0:
        raise ValueError("gnc_period must be positive")
    if isinstance(sc, str):
        sc = scenario(sc, config, design)
    target = braking_target(design, config)
    nominal = solve_braking_5(target, config.engine, config.moon, step=config.step)
    theta0 = nominal.theta0 + theta0_offset
    state = target.initial_state(theta0)
    xf = target.x_f
    law = nominal.law
    updates = []
    rows, t1s, t2s, us = [], [], [], []
    t = state.t
    y = state.as_array()
    while True:
        ttg = law.tf - t
        if ttg >= freeze:
            sol = solve_braking_6(SphericalState.from_array(t, y), xf, config.engine, config.moon, law,
                                  step=config.step)
            law = sol.law
            updates.append(GuidanceUpdate(t, law.tf - t, law.thrust, sol.iterations))
        t_next = min(t + period, law.tf)
        y, s = propagate_law(y, law, t, t_next, config.engine, config.moon, config.step, record=True)
        if rows:
            s = s[1:]
        a, b = config.engine.split(law.thrust, True)
        rows.append(s)
        t1s.append(np.full(len(s), a))
        t2s.append(np.full(len(s), b))
        us.append(law.direction(s[:, 0]))
        t = t_next
        if t >= law.tf - 1e-12:
            break
    s = np.vstack(rows)
    braking = Trajectory(s[:, 0].copy(), s[:, 1:].copy(), np.concatenate(t1s), np.concatenate(t2s),
                         np.vstack(us), "spherical", config.moon)
    sol_final = BrakingSolution(law, theta0, 0, 0.0, [], None, state.as_array())
    head = _pitch_head(sol_final, braking, config)
    powered, vertical, laws, lga_time, hda2_time = fly_tail(head, design, sc, config)
    res = _finish(head, design, sc, config, powered, vertical, laws, lga_time, hda2_time)
    pga = braking.y[-1]
    p_err = np.linalg.norm(spherical_to_cartesian(SphericalState.from_array(0, pga)).position
                           - spherical_to_cartesian(xf.replace(m=pga[6])).position)
    v_err = math.sqrt((pga[3] - xf.v_r) ** 2 + (pga[4] - xf.v_phi) ** 2 + (pga[5] - xf.v_theta) ** 2)
    return ClosedLoopResult(res, updates, float(p_err), float(v_err), theta0)


def lga_tof_family(design: MissionDesign, config: MissionConfig | None = None):
    """Return ``(fly, nominal_tf)`` for the low-gate to vertical-gate segment.

    ``fly(tf)`` re-plans the cubic from the nominal low-gate state with the
    given time of flight and flies it on the outer engines only.
    """
    config = config or MissionConfig()
    g = config.gates
    res = assemble(design, "N", config)
    law0 = res.powered_laws[0]
    t_lga = res.lga_time
    s = res.trajectory.state(_index_at(res.trajectory, t_lga))
    y = spherical_to_cartesian(s).as_array()
    a = law0.accel(t_lga)
    rf, vf, af = vga_target(0.0, config.moon, altitude=g.vga_altitude, descent_speed=g.vertical_speed)

    def fly(tf: float) -> Trajectory:
        law = cubic_coefficients(DescentBoundary(y[:3], y[3:6], a, rf, vf, af, tf), t0=t_lga)
        out = fly_cubic(law, y, config.engine, config.moon, t_start=t_lga, step=config.step, center_on=False)
        return out.trajectory.to_spherical()

    return fly, float(law0.t_end - t_lga)

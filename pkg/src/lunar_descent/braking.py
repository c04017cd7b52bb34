"""Braking-burn guidance with bilinear tangent steering.

The thrust direction follows ``u(t) = (c t + b) / |c t + b|`` on the local
``(e_r, e_phi, e_theta)`` triad at constant thrust. With the initial
along-track angle free, ``c_theta = 0`` and the scale is fixed by
``b_theta = -1``; the remaining constants and the burn time are found by
Newton shooting on a back-propagated trajectory. When the initial angle is
imposed, the thrust level joins the unknowns and the arc is propagated
forward instead.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray

from . import _kernels
from .dynamics import EngineModel, mass_flow
from .moon import MOON, MoonConstants, SphericalState

logger = logging.getLogger(__name__)

# residual scales: position, angle, velocity
_SCALE_POS = 1e4
_SCALE_ANG = 1e-2
_SCALE_VEL = 1e2


class ConvergenceError(RuntimeError):
    """Newton iteration failed; ``history`` holds the scaled residual norms."""

    def __init__(self, message: str, history=()):
        super().__init__(message)
        self.history = list(history)


class SingularJacobianError(ConvergenceError):
    pass


class UnreachableError(ValueError):
    """The imposed initial angle needs a thrust outside the engine envelope."""


@dataclass(frozen=True)
class BilinearLaw:
    """Steering constants and burn window.

    Attributes:
        b, c: constant vectors on ``(e_r, e_phi, e_theta)``
        t0: law time origin [s]; ``u`` uses ``t - t0``
        dt: burn duration [s]
        thrust: constant total thrust [N]
    """

    b: NDArray[np.float64]
    c: NDArray[np.float64]
    t0: float
    dt: float
    thrust: float

    def __post_init__(self):
        object.__setattr__(self, "b", np.asarray(self.b, dtype=float).reshape(3))
        object.__setattr__(self, "c", np.asarray(self.c, dtype=float).reshape(3))
        if not self.dt > 0.0:
            raise ValueError("burn duration must be positive")

    @property
    def tf(self) -> float:
        return self.t0 + self.dt

    def direction(self, t: ArrayLike) -> NDArray[np.float64]:
        """Unit thrust direction at time(s) ``t``; shape ``(3,)`` or ``(n, 3)``."""
        tau = np.asarray(t, dtype=float) - self.t0
        v = np.multiply.outer(tau, self.c) + self.b
        n = np.linalg.norm(v, axis=-1, keepdims=True)
        if np.any(n == 0.0):
            raise ValueError("c t + b vanishes; steering undefined")
        return v / n

    def pitch(self, t: ArrayLike) -> NDArray[np.float64]:
        return np.arcsin(np.clip(self.direction(t)[..., 0], -1.0, 1.0))

    def shifted(self, new_t0: float) -> "BilinearLaw":
        """Same steering written with a different time origin."""
        d = new_t0 - self.t0
        return BilinearLaw(self.b + self.c * d, self.c.copy(), new_t0, self.dt - d, self.thrust)


@dataclass(frozen=True)
class BrakingTarget:
    """Boundary conditions of the braking burn.

    ``x_f`` is the state at the pitch-up gate (its mass and time are
    ignored; mass follows from ``m0`` and the burn time). ``z0`` is
    ``(r0, phi0, v_r0, v_phi0, v_theta0)``. ``theta0`` is only used when
    the initial angle is imposed.
    """

    x_f: SphericalState
    z0: tuple[float, float, float, float, float]
    m0: float = 7000.0
    t0: float = 0.0
    theta0: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "z0", tuple(float(v) for v in self.z0))
        if len(self.z0) != 5:
            raise ValueError("z0 must hold (r0, phi0, v_r0, v_phi0, v_theta0)")
        if not self.x_f.r < self.z0[0]:
            raise ValueError("target radius must be below the initial radius")

    @property
    def v0(self) -> NDArray[np.float64]:
        return np.array(self.z0[2:5])

    @property
    def vf(self) -> NDArray[np.float64]:
        return np.array([self.x_f.v_r, self.x_f.v_phi, self.x_f.v_theta])

    def initial_state(self, theta0: float | None = None) -> SphericalState:
        th = self.theta0 if theta0 is None else theta0
        if th is None:
            raise ValueError("initial along-track angle not set")
        r0, phi0, vr0, vphi0, vth0 = self.z0
        return SphericalState(self.t0, r0, phi0, th, vr0, vphi0, vth0, self.m0)


@dataclass
class BrakingSolution:
    law: BilinearLaw
    theta0: float
    iterations: int
    residual: float
    history: list[float] = field(default_factory=list)
    jacobian: NDArray[np.float64] | None = field(default=None, repr=False)
    x0: NDArray[np.float64] | None = field(default=None, repr=False)

    @property
    def dt(self) -> float:
        return self.law.dt

    @property
    def thrust(self) -> float:
        return self.law.thrust

    def propellant(self, engine: EngineModel, constants: MoonConstants = MOON) -> float:
        return mass_flow(self.law.thrust, engine.isp, constants) * self.law.dt


@dataclass(frozen=True)
class FieldModel:
    """Gravity model for the shooting propagations.

    ``uniform=True`` replaces the Keplerian field by a flat planet with
    gravity ``g_flat`` along ``-e_r``; ``r``, ``phi`` and ``theta`` are then
    lengths and are scaled as positions.
    """

    uniform: bool = False
    g_flat: float = 0.0

    @property
    def code(self) -> int:
        return _kernels.UNIFORM if self.uniform else _kernels.KEPLER

    def scales6(self) -> NDArray[np.float64]:
        ang = _SCALE_POS if self.uniform else _SCALE_ANG
        return np.array([_SCALE_POS, ang, ang, _SCALE_VEL, _SCALE_VEL, _SCALE_VEL])


KEPLER_FIELD = FieldModel()


def tsiolkovsky_dt_guess(
    m0: float, thrust: float, isp: float, v0: ArrayLike, v_f: ArrayLike, constants: MoonConstants = MOON
) -> float:
    """Burn time delivering ``|v_f - v0|`` at constant thrust."""
    if thrust <= 0.0:
        raise ValueError("thrust must be positive")
    ve = isp * constants.g0
    dv = float(np.linalg.norm(np.asarray(v_f, dtype=float) - np.asarray(v0, dtype=float)))
    return (m0 * ve / thrust) * (1.0 - math.exp(-dv / ve))


def propagate_law(
    x0: ArrayLike,
    law: BilinearLaw,
    t_from: float,
    t_to: float,
    engine: EngineModel,
    constants: MoonConstants = MOON,
    step: float = 0.1,
    field_model: FieldModel = KEPLER_FIELD,
    record: bool = False,
):
    """Propagate a state under a bilinear law between two absolute times."""
    y, samples = _kernels.propagate_bilinear(
        np.asarray(x0, dtype=float),
        t_from - law.t0,
        t_to - law.t0,
        step,
        law.b,
        law.c,
        law.thrust,
        constants.mu,
        engine.exhaust_speed(constants),
        field_model.code,
        field_model.g_flat,
        record,
    )
    if record:
        samples = samples.copy()
        samples[:, 0] += law.t0
    return y, samples


def _law_from_params5(p, thrust, t0):
    dt, c_phi, c_r, b_phi, b_r = p
    return BilinearLaw(np.array([b_r, b_phi, -1.0]), np.array([c_r, c_phi, 0.0]), t0, dt, thrust)


def _newton(func, p0, fd_scale, *, tol, max_iter, max_halvings=5, label="braking"):
    """Damped Newton with a central-difference Jacobian.

    ``func(p)`` returns a scaled residual vector. Returns
    ``(p, residual_norm, iterations, history, jacobian)``.
    """
    p = np.array(p0, dtype=float)
    res = func(p)
    norm = float(np.linalg.norm(res))
    history = [norm]
    jac = None
    it = 0
    while norm >= tol:
        if it >= max_iter:
            raise ConvergenceError(f"{label}: no convergence in {max_iter} iterations (|F|={norm:.3e})", history)
        jac = fd_jacobian(func, p, fd_scale)
        try:
            if np.linalg.cond(jac) > 1e14:
                raise np.linalg.LinAlgError("ill-conditioned")
            delta = np.linalg.solve(jac, res)
        except np.linalg.LinAlgError as exc:
            raise SingularJacobianError(f"{label}: singular Jacobian ({exc})", history) from exc
        lam = 1.0
        for _ in range(max_halvings + 1):
            trial = p - lam * delta
            try:
                res_t = func(trial)
                norm_t = float(np.linalg.norm(res_t))
            except (ValueError, FloatingPointError, ZeroDivisionError):
                norm_t = math.inf
            if math.isfinite(norm_t) and norm_t < norm:
                break
            lam *= 0.5
        if not math.isfinite(norm_t):
            raise ConvergenceError(f"{label}: step produced a non-finite residual", history)
        # accept the last trial even without decrease; the history records it
        p, res, norm = trial, res_t, norm_t
        it += 1
        history.append(norm)
        logger.debug("%s iteration %d |F|=%.3e step=%.3g", label, it, norm, lam)
    return p, norm, it, history, jac


def fd_jacobian(func, p, fd_scale, rel_step: float = 1e-6) -> NDArray[np.float64]:
    """Central finite differences, step ``rel_step * max(|p_i|, fd_scale_i)``."""
    p = np.asarray(p, dtype=float)
    cols = []
    for i in range(len(p)):
        h = rel_step * max(abs(p[i]), fd_scale[i])
        pp = p.copy()
        pm = p.copy()
        pp[i] += h
        pm[i] -= h
        cols.append((func(pp) - func(pm)) / (2.0 * h))
    return np.column_stack(cols)


_FD_SCALE5 = np.array([100.0, 1e-3, 1e-3, 1e-1, 1e-1])


def _residual5(target, thrust, engine, constants, step, field_model):
    ve = engine.exhaust_speed(constants)
    z0 = np.array(target.z0)
    xf = target.x_f
    sc = field_model.scales6()
    scales = np.array([sc[0], sc[1], sc[3], sc[4], sc[5]])

    def back(p):
        law = _law_from_params5(p, thrust, target.t0)
        if law.dt <= 0.0:
            raise ValueError("non-positive burn time")
        m_f = target.m0 - thrust / ve * law.dt
        if m_f <= 0.0:
            raise ValueError("burn consumes the whole vehicle")
        yf = np.array([xf.r, xf.phi, xf.theta, xf.v_r, xf.v_phi, xf.v_theta, m_f])
        y0, _ = propagate_law(yf, law, law.tf, law.t0, engine, constants, step, field_model)
        return law, y0

    def func(p):
        _, y0 = back(p)
        z = np.array([y0[0], y0[1], y0[3], y0[4], y0[5]])
        return (z - z0) / scales

    return func, back


def solve_braking_5(
    target: BrakingTarget,
    engine: EngineModel | None = None,
    constants: MoonConstants = MOON,
    guess: BilinearLaw | None = None,
    *,
    thrust: float | None = None,
    step: float = 0.1,
    tol: float = 1e-8,
    max_iter: int = 20,
    field_model: FieldModel = KEPLER_FIELD,
) -> BrakingSolution:
    """Find ``(dt, c_phi, c_r, b_phi, b_r)`` so that back-propagation from the
    gate state reaches the prescribed initial radius, angle and velocity.

    Thrust defaults to the total maximum. The default guess is tangent
    steering (``b = (0, 0, -1)``, ``c = 0``) with the Tsiolkovsky burn time.
    """
    engine = engine or EngineModel()
    thrust = engine.total_max if thrust is None else float(thrust)
    if guess is None:
        dt0 = tsiolkovsky_dt_guess(target.m0, thrust, engine.isp, target.v0, target.vf, constants)
        p0 = np.array([dt0, 0.0, 0.0, 0.0, 0.0])
    else:
        scale = -1.0 / guess.b[2]
        if not scale > 0.0 or guess.c[2] != 0.0:
            raise ValueError("guess must have c_theta = 0 and b_theta < 0")
        b = guess.b * scale
        c = guess.c * scale
        # re-express with the time origin of the target
        b = b + c * (target.t0 - guess.t0)
        p0 = np.array([guess.dt, c[1], c[0], b[1], b[0]])
    func, back = _residual5(target, thrust, engine, constants, step, field_model)
    p, norm, it, history, jac = _newton(func, p0, _FD_SCALE5, tol=tol, max_iter=max_iter, label="braking-5")
    law, y0 = back(p)
    return BrakingSolution(law, float(y0[2]), it, norm, history, jac, y0)


_FD_SCALE6 = np.array([100.0, 1e-3, 1e-3, 1e-1, 1e-1, 1e3])


def _residual6(x0, x_f, t0, engine, constants, step, field_model):
    scales = field_model.scales6()
    target = np.array([x_f.r, x_f.phi, x_f.theta, x_f.v_r, x_f.v_phi, x_f.v_theta])

    def fwd(p):
        law = _law_from_params5(p[:5], p[5], t0)
        if law.dt <= 0.0 or law.thrust <= 0.0:
            raise ValueError("non-positive burn time or thrust")
        if x0[6] - law.thrust / engine.exhaust_speed(constants) * law.dt <= 0.0:
            raise ValueError("burn consumes the whole vehicle")
        yf, _ = propagate_law(x0, law, law.t0, law.tf, engine, constants, step, field_model)
        return law, yf

    def func(p):
        _, yf = fwd(p)
        return (yf[:6] - target) / scales

    return func, fwd


def solve_braking_6(
    initial: SphericalState,
    x_f: SphericalState,
    engine: EngineModel | None = None,
    constants: MoonConstants = MOON,
    guess: BilinearLaw | None = None,
    *,
    step: float = 0.1,
    tol: float = 1e-8,
    max_iter: int = 20,
    field_model: FieldModel = KEPLER_FIELD,
    check_bounds: bool = True,
) -> BrakingSolution:
    """Match all six gate states from a fully specified initial state.

    Unknowns are ``(dt, c_phi, c_r, b_phi, b_r, T)`` with the law time
    origin at ``initial.t``; the arc is propagated forward.

    Raises:
        UnreachableError: the converged thrust falls outside the total
            thrust envelope (the initial angle is outside the reachable set).
    """
    engine = engine or EngineModel()
    x0 = initial.as_array()
    if guess is None:
        thrust = engine.total_max
        dt0 = tsiolkovsky_dt_guess(initial.m, thrust, engine.isp,
                                   x0[3:6], [x_f.v_r, x_f.v_phi, x_f.v_theta], constants)
        p0 = np.array([dt0, 0.0, 0.0, 0.0, 0.0, thrust])
    else:
        g = guess.shifted(initial.t)
        scale = -1.0 / g.b[2]
        b, c = g.b * scale, g.c * scale
        p0 = np.array([g.dt, c[1], c[0], b[1], b[0], g.thrust])
    func, fwd = _residual6(x0, x_f, initial.t, engine, constants, step, field_model)
    p, norm, it, history, jac = _newton(func, p0, _FD_SCALE6, tol=tol, max_iter=max_iter, label="braking-6")
    law, _ = fwd(p)
    if check_bounds and not engine.total_min <= law.thrust <= engine.total_max:
        raise UnreachableError(
            f"initial angle needs {law.thrust:.1f} N, outside [{engine.total_min:.0f}, {engine.total_max:.0f}] N;"
            " it lies outside the reachable thrust/angle envelope"
        )
    return BrakingSolution(law, initial.theta, it, norm, history, jac, x0)


@dataclass
class SweepPoint:
    thrust: float
    theta0: float | None
    dt: float | None
    iterations: int | None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


def sweep_thrust_theta0(
    target: BrakingTarget,
    engine: EngineModel | None = None,
    thrusts: ArrayLike | None = None,
    constants: MoonConstants = MOON,
    *,
    step: float = 0.1,
) -> list[SweepPoint]:
    """Reachable initial angle as a function of constant thrust.

    The grid is walked from the highest thrust down, each point warm-started
    from its neighbour. Failed points are kept with their error message.
    """
    engine = engine or EngineModel()
    if thrusts is None:
        thrusts = np.linspace(0.8 * engine.total_max, engine.total_max, 21)
    thrusts = np.asarray(thrusts, dtype=float)
    if np.any(thrusts < engine.total_min - 1e-9) or np.any(thrusts > engine.total_max + 1e-9):
        raise ValueError("thrust grid leaves the total-thrust envelope")
    order = np.argsort(thrusts)[::-1]
    points: dict[int, SweepPoint] = {}
    guess = None
    for i in order:
        T = float(thrusts[i])
        try:
            sol = solve_braking_5(target, engine, constants, guess, thrust=T, step=step)
        except (ConvergenceError, ValueError) as exc:
            points[i] = SweepPoint(T, None, None, None, str(exc))
            continue
        guess = sol.law
        points[i] = SweepPoint(T, sol.theta0, sol.dt, sol.iterations)
    return [points[i] for i in range(len(thrusts))]


def sample_law(
    law: BilinearLaw, x0: ArrayLike, engine: EngineModel, constants: MoonConstants = MOON, step: float = 0.1
):
    """Forward samples of a solved law as ``(t, states, u)`` arrays."""
    _, s = propagate_law(x0, law, law.t0, law.tf, engine, constants, step, record=True)
    return s[:, 0], s[:, 1:], law.direction(s[:, 0])

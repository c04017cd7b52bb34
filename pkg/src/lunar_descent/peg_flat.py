"""Flat-planet powered explicit guidance.

Over a flat planet with uniform gravity the optimal thrust direction is the
bilinear tangent law ``u = (c t + b) / |c t + b|``, with ``psi_r = -c`` and
``psi_v = c t + b``. The downrange position at burnout is free, so
``c_x = 0``; the six unknowns ``(t_f, b, c_y, c_z)`` are found by Newton
iteration on the terminal ``y``, ``z``, velocity and the Hamiltonian
normalisation ``H(t_f) = 1``. State integrals are evaluated by adaptive
quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.integrate import quad, quad_vec, solve_ivp

from .braking import (
    BrakingTarget,
    ConvergenceError,
    FieldModel,
    UnreachableError,
    _newton,
    solve_braking_5,
)
from .dynamics import EngineModel
from .moon import MOON, MoonConstants, SphericalState

_SCALE_POS = 1e4
_SCALE_VEL = 1e2
_QUAD = {"epsabs": 1e-11, "epsrel": 1e-12}


def _vec3(v) -> NDArray[np.float64]:
    a = np.asarray(v, dtype=float).reshape(-1)
    if a.shape != (3,):
        raise ValueError("expected a 3-vector")
    return a


@dataclass(frozen=True)
class FlatPegProblem:
    """Constant-thrust burn over a flat planet.

    Axes are ``x`` downrange, ``y`` cross-range and ``z`` up. Only ``y_f``,
    ``z_f`` and the final velocity are imposed.
    """

    g: NDArray[np.float64]
    thrust: float
    m0: float
    mdot: float
    r0: NDArray[np.float64]
    v0: NDArray[np.float64]
    y_f: float
    z_f: float
    v_f: NDArray[np.float64]
    m_dry: float = 0.0

    def __post_init__(self):
        for name in ("g", "r0", "v0", "v_f"):
            object.__setattr__(self, name, _vec3(getattr(self, name)))
        if not self.thrust > 0.0 or not self.m0 > 0.0:
            raise ValueError("thrust and initial mass must be positive")
        if self.mdot < 0.0:
            raise ValueError("mass flow rate must be non-negative")
        if not 0.0 <= self.m_dry < self.m0:
            raise ValueError("dry mass must lie in [0, m0)")

    @classmethod
    def from_engine(
        cls, thrust: float, m0: float, r0, v0, y_f: float, z_f: float, v_f, *,
        g: float = MOON.surface_gravity, engine: EngineModel | None = None, constants: MoonConstants = MOON,
        m_dry: float = 0.0,
    ) -> "FlatPegProblem":
        engine = engine or EngineModel()
        mdot = thrust / engine.exhaust_speed(constants)
        return cls(np.array([0.0, 0.0, -g]), thrust, m0, mdot, r0, v0, y_f, z_f, v_f, m_dry)

    @property
    def burnout_time(self) -> float:
        return math.inf if self.mdot == 0.0 else (self.m0 - self.m_dry) / self.mdot

    def mass(self, t):
        return self.m0 - self.mdot * np.asarray(t, dtype=float)

    def gamma(self, t):
        """Specific thrust ``T / m(t)``."""
        return self.thrust / self.mass(t)

    @property
    def planar(self) -> bool:
        """No cross-range input anywhere, so ``b_y = c_y = 0`` by symmetry."""
        return all(v == 0.0 for v in (self.g[1], self.r0[1], self.v0[1], self.y_f, self.v_f[1]))

    @property
    def vertical(self) -> bool:
        """Purely vertical motion, so ``b_x = 0`` as well."""
        return self.planar and all(v == 0.0 for v in (self.g[0], self.v0[0], self.v_f[0]))


@dataclass
class FlatPegSolution:
    t_f: float
    b: NDArray[np.float64]
    c: NDArray[np.float64]
    residual: float
    iterations: int = 0
    history: list[float] = field(default_factory=list)
    pinned: tuple[str, ...] = ()

    def psi_v(self, t: ArrayLike) -> NDArray[np.float64]:
        t = np.asarray(t, dtype=float)
        return np.multiply.outer(t, self.c) + self.b

    def direction(self, t: ArrayLike) -> NDArray[np.float64]:
        p = self.psi_v(t)
        return p / np.linalg.norm(p, axis=-1, keepdims=True)

    def switch_times(self) -> list[float]:
        """Times inside the burn where ``|psi_v|`` is smallest; the steering
        turns fastest there and the quadrature is split at them."""
        cc = float(self.c @ self.c)
        if cc == 0.0:
            return []
        ts = -float(self.c @ self.b) / cc
        return [ts] if 0.0 < ts < self.t_f else []


def _points(sol: FlatPegSolution, t: float):
    return [p for p in sol.switch_times() if 0.0 < p < t] or None


def state_at(problem: FlatPegProblem, sol: FlatPegSolution, t: float) -> tuple[np.ndarray, np.ndarray]:
    """Position and velocity at ``t`` from the thrust integrals."""
    if t == 0.0:
        return problem.r0.copy(), problem.v0.copy()

    def integrand(tau):
        a = problem.gamma(tau) * sol.direction(tau)
        return np.concatenate([a, (t - tau) * a])

    val, _ = quad_vec(integrand, 0.0, t, points=_points(sol, t), **_QUAD)
    v = problem.v0 + problem.g * t + val[:3]
    r = problem.r0 + problem.v0 * t + 0.5 * problem.g * t * t + val[3:]
    return r, v


def _mass_costate_term(problem: FlatPegProblem, sol: FlatPegSolution, t: float) -> float:
    if problem.mdot == 0.0 or t >= sol.t_f:
        return 0.0

    def f(tau):
        return problem.thrust * float(np.linalg.norm(sol.psi_v(tau))) / problem.mass(tau) ** 2

    pts = [p for p in sol.switch_times() if t < p < sol.t_f] or None
    val, _ = quad(f, t, sol.t_f, points=pts, epsabs=1e-12, epsrel=1e-12, limit=200)
    return problem.mdot * val


def hamiltonian(problem: FlatPegProblem, sol: FlatPegSolution, t: float, *, augmented: bool = True) -> float:
    """``H = psi_r . v + psi_v . (gamma u + g)`` with ``u`` along ``psi_v``.

    With a varying mass the reduced form drifts as ``gamma`` grows; the
    augmented form adds the mass-costate contribution (zero at burnout,
    since the final mass is free) and is constant along the solution.
    """
    _, v = state_at(problem, sol, t)
    pv = sol.psi_v(t)
    h = float(-sol.c @ v + problem.gamma(t) * np.linalg.norm(pv) + pv @ problem.g)
    if augmented:
        h += _mass_costate_term(problem, sol, t)
    return h


def _layout(problem: FlatPegProblem):
    """Free unknowns and kept residual rows after symmetry pinning."""
    # unknowns: t_f, b_x, b_y, b_z, c_y, c_z
    free = [0, 1, 2, 3, 4, 5]
    # residuals: y, z, vx, vy, vz, H
    rows = [0, 1, 2, 3, 4, 5]
    pinned = []
    if problem.planar:
        free = [i for i in free if i not in (2, 4)]
        rows = [i for i in rows if i not in (0, 3)]
        pinned += ["b_y", "c_y"]
    if problem.vertical:
        free = [i for i in free if i != 1]
        rows = [i for i in rows if i != 2]
        pinned.append("b_x")
    return free, rows, tuple(pinned)


def _unpack(p_full) -> tuple[float, np.ndarray, np.ndarray]:
    tf, bx, by, bz, cy, cz = p_full
    return float(tf), np.array([bx, by, bz]), np.array([0.0, cy, cz])


def _residual_full(problem: FlatPegProblem, p_full) -> np.ndarray:
    tf, b, c = _unpack(p_full)
    if not 0.0 < tf < problem.burnout_time:
        raise ValueError("burn time outside (0, burnout)")
    sol = FlatPegSolution(tf, b, c, math.nan)
    r, v = state_at(problem, sol, tf)
    h = hamiltonian(problem, sol, tf, augmented=False)
    return np.array([
        (r[1] - problem.y_f) / _SCALE_POS,
        (r[2] - problem.z_f) / _SCALE_POS,
        (v[0] - problem.v_f[0]) / _SCALE_VEL,
        (v[1] - problem.v_f[1]) / _SCALE_VEL,
        (v[2] - problem.v_f[2]) / _SCALE_VEL,
        h - 1.0,
    ])


def initial_guess(problem: FlatPegProblem) -> np.ndarray:
    """Thrust along the required velocity change, Tsiolkovsky burn time,
    ``c = 0``. A vertical problem instead gets a constant-mass bang-bang
    estimate with one reversal, since a constant direction leaves the
    switch time unobservable."""
    if problem.vertical:
        return _vertical_guess(problem)
    ve = problem.thrust / problem.mdot if problem.mdot > 0.0 else math.inf
    tf = 1.0
    for _ in range(50):
        dv = float(np.linalg.norm(problem.v_f - problem.v0 - problem.g * tf))
        if math.isinf(ve):
            tf_new = problem.m0 * dv / problem.thrust
        else:
            tf_new = problem.m0 * ve / problem.thrust * (1.0 - math.exp(-dv / ve))
        if not tf_new < problem.burnout_time:
            raise UnreachableError(f"required delta-v {dv:.1f} m/s exceeds the available propellant")
        tf_new = max(tf_new, 1e-3)
        if abs(tf_new - tf) < 1e-9:
            break
        tf = tf_new
    d = problem.v_f - problem.v0 - problem.g * tf
    d = d / np.linalg.norm(d)
    return _normalised(problem, tf, d, np.zeros(3))


def _vertical_guess(problem: FlatPegProblem) -> np.ndarray:
    g = -float(problem.g[2])
    gam = float(problem.gamma(0.0))
    dz = problem.z_f - problem.r0[2]
    v0, vf = problem.v0[2], problem.v_f[2]
    s = 1.0 if dz >= 0.0 else -1.0
    a1 = s * gam - g  # first arc, thrust toward the target
    a2 = -s * gam - g  # second arc, thrust reversed
    if s * a1 <= 0.0:
        raise UnreachableError("thrust cannot overcome gravity toward the target")
    # peak speed from the two constant-acceleration arcs covering dz
    k = 0.5 / a1 - 0.5 / a2
    v1_sq = (dz + 0.5 * v0 * v0 / a1 - 0.5 * vf * vf / a2) / k
    if v1_sq < 0.0:
        raise UnreachableError("no single-reversal vertical profile reaches the target")
    v1 = s * math.sqrt(v1_sq)
    t1 = (v1 - v0) / a1
    t2 = (vf - v1) / a2
    if t1 <= 0.0 or t2 < 0.0:
        raise UnreachableError("no single-reversal vertical profile reaches the target")
    tf = t1 + t2
    if not tf < problem.burnout_time:
        raise UnreachableError("vertical profile exceeds the available propellant")
    b = np.array([0.0, 0.0, s])
    c = np.array([0.0, 0.0, -s / t1])
    return _normalised(problem, tf, b, c)


def _normalised(problem: FlatPegProblem, tf: float, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    sol = FlatPegSolution(tf, b, c, math.nan)
    h = hamiltonian(problem, sol, tf, augmented=False)
    if h > 0.0:
        b, c = b / h, c / h
    return np.array([tf, b[0], b[1], b[2], c[1], c[2]])


def solve_flat_peg(
    problem: FlatPegProblem,
    guess: ArrayLike | None = None,
    *,
    tol: float = 1e-10,
    max_iter: int = 30,
) -> FlatPegSolution:
    """Newton solve for ``(t_f, b, c_y, c_z)``.

    ``guess`` is the full 6-vector ``(t_f, b_x, b_y, b_z, c_y, c_z)``.
    Components fixed by symmetry are pinned to zero and their residual rows
    dropped, which keeps the Jacobian square and regular.

    Raises:
        UnreachableError: the Tsiolkovsky estimate exceeds the propellant.
        ConvergenceError: Newton fails to converge.
    """
    free, rows, pinned = _layout(problem)
    p_full = initial_guess(problem) if guess is None else np.array(guess, dtype=float)
    for name, idx in (("b_y", 2), ("c_y", 4), ("b_x", 1)):
        if name in pinned:
            p_full[idx] = 0.0

    def func(p):
        q = p_full.copy()
        q[free] = p
        return _residual_full(problem, q)[rows]

    fd_scale = np.array([1.0, 1e-3, 1e-3, 1e-3, 1e-5, 1e-5])[free]
    p, norm, it, history, _ = _newton(func, p_full[free], fd_scale, tol=tol, max_iter=max_iter, label="flat PEG")
    p_full[free] = p
    # the pinned rows must vanish too; report the full residual
    full = _residual_full(problem, p_full)
    tf, b, c = _unpack(p_full)
    sol = FlatPegSolution(tf, b, c, float(np.linalg.norm(full)), it, history, pinned)
    if np.any(np.linalg.norm(sol.psi_v(np.linspace(0.0, tf, 201)), axis=-1) == 0.0):
        raise ConvergenceError("flat PEG: primer vector vanishes on the burn", history)
    return sol


def integrate_forward(problem: FlatPegProblem, sol: FlatPegSolution, *, rtol: float = 1e-12) -> np.ndarray:
    """Independent ODE integration of the returned law; the span is split
    at the switch time. Returns ``(r, v)`` at burnout as a 6-vector."""
    def rhs(t, y, mid):
        pv = sol.psi_v(t)
        # psi_v can only vanish when b is parallel to c; the direction is
        # then constant on each side of the zero
        u = sol.direction(mid) if not np.any(pv) else pv / np.linalg.norm(pv)
        return np.concatenate([y[3:], problem.gamma(t) * u + problem.g])

    y = np.concatenate([problem.r0, problem.v0])
    knots = [0.0, *sol.switch_times(), sol.t_f]
    for a, b in zip(knots[:-1], knots[1:]):
        out = solve_ivp(rhs, (a, b), y, method="DOP853", rtol=rtol, atol=1e-10, args=(0.5 * (a + b),))
        y = out.y[:, -1]
    return y


@dataclass
class PmpReport:
    times: NDArray[np.float64]
    margins: NDArray[np.float64]

    @property
    def min_margin(self) -> float:
        return float(self.margins.min()) if self.margins.size else 0.0

    @property
    def passed(self) -> bool:
        return self.min_margin >= -1e-12

    @property
    def n_checked(self) -> int:
        return int(self.margins.size)


def hamiltonian_difference(problem: FlatPegProblem, sol: FlatPegSolution, t: float, u) -> float:
    """``H(u) - H(u*)`` at time ``t``; only the thrust term depends on ``u``."""
    u = _vec3(u)
    u = u / np.linalg.norm(u)
    pv = sol.psi_v(t)
    g = float(problem.gamma(t))
    return g * float(pv @ u) - g * float(np.linalg.norm(pv))


def verify_pmp_optimality(
    sol: FlatPegSolution,
    problem: FlatPegProblem,
    n_perturbations: int = 100,
    *,
    n_times: int = 10,
    scale: float = 1.0,
    seed: int = 0,
) -> PmpReport:
    """Perturb the optimal direction by ``scale`` times random unit vectors
    at ``n_times`` sample times; each margin ``H(u*) - H(u')`` must be
    non-negative."""
    rng = np.random.default_rng(seed)
    times = np.linspace(0.0, sol.t_f, n_times)
    margins = []
    for k in range(n_perturbations):
        t = times[k % n_times]
        w = rng.normal(size=3)
        w /= np.linalg.norm(w)
        u = sol.direction(t) + scale * w
        if np.linalg.norm(u) == 0.0:
            continue
        margins.append(-hamiltonian_difference(problem, sol, t, u))
    return PmpReport(times, np.array(margins))


@dataclass
class CrossCheck:
    max_angle_deg: float
    times: NDArray[np.float64]
    angles_deg: NDArray[np.float64]
    braking_dt: float


def crosscheck_braking(
    problem: FlatPegProblem,
    sol: FlatPegSolution,
    engine: EngineModel | None = None,
    constants: MoonConstants = MOON,
    *,
    step: float = 0.05,
    n_samples: int = 101,
) -> CrossCheck:
    """Re-solve a planar problem with the braking-burn shooting solver run
    in a uniform field, and compare steering directions.

    The braking solver back-propagates from the fixed final state with the
    initial downrange free; with a uniform field this is the same boundary
    value problem up to a downrange translation.
    """
    if not problem.planar or problem.g[0] != 0.0:
        raise ValueError("cross-check needs a planar problem with vertical gravity")
    engine = engine or EngineModel()
    ve = engine.exhaust_speed(constants)
    if not math.isclose(problem.thrust / problem.mdot, ve, rel_tol=1e-9):
        raise ValueError("problem flow rate differs from the engine model")
    r_f, _ = state_at(problem, sol, sol.t_f)
    # spherical layout (r, phi, theta) <- (z, y, x)
    x_f = SphericalState(0.0, problem.z_f, 0.0, r_f[0], problem.v_f[2], 0.0, problem.v_f[0], problem.m0)
    z0 = (problem.r0[2], 0.0, problem.v0[2], 0.0, problem.v0[0])
    target = BrakingTarget(x_f, z0, m0=problem.m0)
    fm = FieldModel(uniform=True, g_flat=-float(problem.g[2]))
    bsol = solve_braking_5(target, engine, constants, thrust=problem.thrust, step=step, field_model=fm)
    t = np.linspace(0.0, min(sol.t_f, bsol.dt), n_samples)
    ub = bsol.law.direction(t)  # (u_r, u_phi, u_theta)
    ub = np.column_stack([ub[:, 2], ub[:, 1], ub[:, 0]])
    up = sol.direction(t)
    cosang = np.clip(np.sum(ub * up, axis=1), -1.0, 1.0)
    ang = np.degrees(np.arccos(cosang))
    return CrossCheck(float(ang.max()), t, ang, bsol.dt)


def demo_problem(engine: EngineModel | None = None, constants: MoonConstants = MOON) -> FlatPegProblem:
    """A braking-like burn: 15 km up at 1 km/s horizontal, to 1 km with a
    40 m/s descent and 40 m/s forward speed."""
    return FlatPegProblem.from_engine(
        18_000.0, 7000.0, r0=[0.0, 0.0, 15_000.0], v0=[1000.0, 0.0, 0.0], y_f=0.0, z_f=1000.0,
        v_f=[40.0, 0.0, -40.0], engine=engine, constants=constants,
    )

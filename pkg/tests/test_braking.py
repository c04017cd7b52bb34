import math

import numpy as np
import pytest

from lunar_descent.braking import (
    KEPLER_FIELD,
    _FD_SCALE5,
    BilinearLaw,
    BrakingTarget,
    UnreachableError,
    _residual5,
    fd_jacobian,
    propagate_law,
    solve_braking_5,
    solve_braking_6,
    sweep_thrust_theta0,
    tsiolkovsky_dt_guess,
)
from lunar_descent.dynamics import EngineModel
from lunar_descent.mission import braking_target
from lunar_descent.moon import MOON

ENGINE = EngineModel()


@pytest.fixture(scope="module")
def target(table4_design, config):
    return braking_target(table4_design, config)


@pytest.fixture(scope="module")
def solution(target):
    return solve_braking_5(target, ENGINE)


def test_tsiolkovsky_guess():
    dt = tsiolkovsky_dt_guess(7000.0, 18000.0, 330.0, [0.0, 0.0, 1681.6], [-40.3, 0.0, 39.1])
    assert dt == pytest.approx(501.0, abs=2.0)
    assert tsiolkovsky_dt_guess(7000.0, 18000.0, 330.0, [1, 2, 3], [1, 2, 3]) == 0.0
    bound = 7000.0 * 330.0 * MOON.g0 / 18000.0
    assert tsiolkovsky_dt_guess(7000.0, 18000.0, 330.0, [0, 0, 0], [0, 0, 1e7]) == pytest.approx(bound)
    with pytest.raises(ValueError):
        tsiolkovsky_dt_guess(7000.0, 0.0, 330.0, [0, 0, 0], [0, 0, 1])


def test_table4_braking_burn(solution):
    assert solution.dt == pytest.approx(526.3, abs=2.0)
    assert solution.propellant(ENGINE) == pytest.approx(2927.2, rel=0.01)
    assert solution.iterations <= 10
    assert solution.residual < 1e-8
    assert solution.thrust == ENGINE.total_max
    assert solution.law.b[2] == -1.0 and solution.law.c[2] == 0.0


def test_planar_target_gives_planar_law(solution):
    assert abs(solution.law.b[1]) < 1e-8 and abs(solution.law.c[1]) < 1e-8


def test_forward_verification(solution, target):
    x0 = target.initial_state(solution.theta0).as_array()
    yf, _ = propagate_law(x0, solution.law, solution.law.t0, solution.law.tf, ENGINE)
    xf = target.x_f
    expect = np.array([xf.r, xf.phi, xf.theta, xf.v_r, xf.v_phi, xf.v_theta])
    err = np.abs(yf[:6] - expect)
    scale = np.array([xf.r, 1.0, xf.theta, abs(xf.v_r), 1.0, abs(xf.v_theta)])
    assert np.all(err / scale < 1e-6)


def test_jacobian_against_central_differences(solution, target):
    func, _ = _residual5(target, ENGINE.total_max, ENGINE, MOON, 0.1, KEPLER_FIELD)
    law = solution.law
    p = np.array([law.dt, law.c[1], law.c[0], law.b[1], law.b[0]])
    j1 = fd_jacobian(func, p, _FD_SCALE5, 1e-6)
    j2 = fd_jacobian(func, p, _FD_SCALE5, 1e-5)
    for k in range(5):
        assert np.linalg.norm(j1[:, k] - j2[:, k]) <= 1e-4 * np.linalg.norm(j2[:, k])


def test_solve_6_recovers_max_thrust(solution, target):
    sol6 = solve_braking_6(target.initial_state(solution.theta0), target.x_f, ENGINE, guess=solution.law)
    assert sol6.thrust == pytest.approx(ENGINE.total_max, rel=1e-3)
    assert sol6.residual < 1e-8


def test_solve_6_perturbed_uprange(solution, target):
    start = target.initial_state(solution.theta0 - math.radians(0.05))
    sol6 = solve_braking_6(start, target.x_f, ENGINE, guess=solution.law)
    assert sol6.thrust < ENGINE.total_max
    assert sol6.residual < 1e-8
    yf, _ = propagate_law(start.as_array(), sol6.law, sol6.law.t0, sol6.law.tf, ENGINE)
    assert yf[0] == pytest.approx(target.x_f.r, abs=1e-3)
    assert yf[2] == pytest.approx(target.x_f.theta, abs=1e-9)


def test_solve_6_unreachable(solution, target):
    # downrange of the nominal start needs more than the full thrust
    with pytest.raises(UnreachableError):
        solve_braking_6(target.initial_state(solution.theta0 + math.radians(0.05)), target.x_f, ENGINE,
                        guess=solution.law)
    relaxed = solve_braking_6(target.initial_state(solution.theta0 + math.radians(0.05)), target.x_f, ENGINE,
                              guess=solution.law, check_bounds=False)
    assert relaxed.thrust > ENGINE.total_max


def test_sweep_monotone_and_anchored(solution, target):
    thrusts = np.linspace(0.8 * ENGINE.total_max, ENGINE.total_max, 21)
    pts = sweep_thrust_theta0(target, ENGINE, thrusts)
    assert all(p.ok for p in pts)
    th = np.array([p.theta0 for p in pts])
    assert np.all(np.diff(th) > 0)
    assert th[-1] == pytest.approx(solution.theta0, abs=1e-9)
    slope = np.diff(th) / np.diff(thrusts)
    assert np.all(np.isfinite(slope)) and np.all(slope > 0)
    with pytest.raises(ValueError):
        sweep_thrust_theta0(target, ENGINE, [20000.0])


def test_law_direction_invariants():
    rng = np.random.default_rng(7)
    for _ in range(100):
        b, c = rng.normal(size=3), rng.normal(size=3) * 0.01
        law = BilinearLaw(b, c, 0.0, 100.0, 18000.0)
        t = np.linspace(0.0, 100.0, 11)
        u = law.direction(t)
        np.testing.assert_allclose(np.linalg.norm(u, axis=1), 1.0, atol=1e-12)
        k = rng.uniform(0.1, 10.0)
        np.testing.assert_allclose(BilinearLaw(k * b, k * c, 0.0, 100.0, 1.0).direction(t), u, atol=1e-12)
        np.testing.assert_allclose(law.shifted(30.0).direction(t), u, atol=1e-12)
    with pytest.raises(ValueError):
        BilinearLaw([0, 0, 0], [0, 0, 0], 0.0, 1.0, 1.0).direction(0.0)
    with pytest.raises(ValueError):
        BilinearLaw([0, 0, -1], [0, 0, 0], 0.0, 0.0, 1.0)


def test_target_validation(target):
    with pytest.raises(ValueError):
        BrakingTarget(target.x_f, target.z0[:4])
    with pytest.raises(ValueError):
        BrakingTarget(target.x_f.replace(r=target.z0[0] + 1.0), target.z0)
    with pytest.raises(ValueError):
        target.initial_state()

import math

import numpy as np
import pytest
from scipy.integrate import quad

from lunar_descent.dynamics import EngineModel
from lunar_descent.mission import DivertScenario, assemble, divert_matrix, lga_tof_family
from lunar_descent.moon import MOON, gravity_accel
from lunar_descent.polynomial import (
    DescentBoundary,
    DivertRejected,
    cubic_coefficients,
    fly_cubic,
    plan_divert,
    sweep_tof,
    thrust_from_total_accel,
    thrust_trace,
    vga_target,
)

ENGINE = EngineModel()


def random_boundary(rng):
    return DescentBoundary(
        rng.normal(0, 1e3, 3), rng.normal(0, 30, 3), rng.normal(0, 2, 3),
        rng.normal(0, 1e3, 3), rng.normal(0, 30, 3), rng.normal(0, 2, 3), rng.uniform(5.0, 80.0),
    )


def boundary_residuals(b, law):
    t1 = law.t0 + b.tf
    pairs = [(law.accel(law.t0), b.a0), (law.accel(t1), b.af), (law.velocity(t1), b.vf), (law.position(t1), b.rf)]
    return [np.max(np.abs(got - want)) / max(np.max(np.abs(want)), 1.0) for got, want in pairs]


def test_free_coast_boundary_has_no_correction():
    a0 = np.array([0.1, -1.6, 0.3])
    v0 = np.array([10.0, -5.0, 2.0])
    r0 = np.array([100.0, 200.0, 300.0])
    tf = 20.0
    b = DescentBoundary(r0, v0, a0, r0 + v0 * tf + 0.5 * a0 * tf**2, v0 + a0 * tf, a0, tf)
    law = cubic_coefficients(b)
    for c in (law.c1, law.c2, law.c3):
        np.testing.assert_allclose(c, 0.0, atol=1e-12)


def test_one_dimensional_hand_case():
    b = DescentBoundary([0, 0, 0], [0, 0, 0], [0, 0, 0], [1, 0, 0], [0, 0, 0], [0, 0, 0], 1.0)
    law = cubic_coefficients(b)
    assert law.c1[0] == pytest.approx(60.0, abs=1e-12)
    assert law.c2[0] == pytest.approx(-180.0, abs=1e-12)
    assert law.c3[0] == pytest.approx(120.0, abs=1e-12)
    assert law.position(1.0)[0] == pytest.approx(1.0, abs=1e-12)
    assert law.velocity(1.0)[0] == pytest.approx(0.0, abs=1e-12)
    assert law.accel(1.0)[0] == pytest.approx(0.0, abs=1e-12)


def test_random_boundaries_satisfied():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        b = random_boundary(rng)
        law = cubic_coefficients(b, t0=rng.uniform(0.0, 500.0))
        assert max(boundary_residuals(b, law)) < 1e-9


def test_quadrature_oracle():
    rng = np.random.default_rng(1)
    for _ in range(25):
        b = random_boundary(rng)
        law = cubic_coefficients(b)
        for k in range(3):
            dv, _ = quad(lambda s: law.accel(s)[k], 0.0, b.tf, epsabs=0, epsrel=1e-11)
            dr, _ = quad(lambda s: (b.tf - s) * law.accel(s)[k], 0.0, b.tf, epsabs=0, epsrel=1e-11)
            assert b.v0[k] + dv == pytest.approx(b.vf[k], rel=1e-7, abs=1e-7 * np.abs(b.vf).max())
            assert b.r0[k] + b.v0[k] * b.tf + dr == pytest.approx(b.rf[k], rel=1e-7, abs=1e-7 * np.abs(b.rf).max())


def test_non_positive_tf():
    b = DescentBoundary([0, 0, 0], [0, 0, 0], [0, 0, 0], [1, 0, 0], [0, 0, 0], [0, 0, 0], 0.0)
    with pytest.raises(ValueError):
        cubic_coefficients(b)


def test_hover_thrust_is_weight():
    r = np.array([0.0, 0.0, MOON.r_moon + 30.0])
    g = gravity_accel(r)
    b = DescentBoundary(r, [0, 0, 0], [0, 0, 0], r, [0, 0, 0], [0, 0, 0], 10.0)
    law = cubic_coefficients(b)
    res = fly_cubic(law, np.concatenate([r, [0, 0, 0], [3900.0]]), ENGINE, step=0.1)
    tr = thrust_trace(law, res.trajectory, ENGINE)
    weight = res.trajectory.mass * MOON.mu / np.linalg.norm(res.trajectory.y[:, :3], axis=1) ** 2
    np.testing.assert_allclose(tr.t1, weight, rtol=1e-12)
    T, u = thrust_from_total_accel([0, 0, 0], r, 3900.0)
    assert T == pytest.approx(3900.0 * np.linalg.norm(g), rel=1e-14)
    np.testing.assert_allclose(u, [0, 0, 1], atol=1e-15)


def test_vga_target_geometry():
    r, v, a = vga_target(0.0)
    np.testing.assert_allclose(r, [0.0, 0.0, MOON.r_moon + 30.0], atol=1e-9)
    np.testing.assert_allclose(v, [0.0, 0.0, -2.0], atol=1e-15)
    assert not a.any()
    r2, _, _ = vga_target(-100.0)
    assert np.linalg.norm(r2 - r) == pytest.approx(100.0 * (MOON.r_moon + 30.0) / MOON.r_moon, rel=1e-6)


def test_table4_powered_segment(table4_nominal):
    assert table4_nominal.propellant.powered_from_lga == pytest.approx(110.1, rel=0.02)
    assert table4_nominal.timeline["VGA"].pitch_deg == pytest.approx(90.0, abs=0.5)


def test_divert_limits_and_continuity(nominal):
    law = nominal.powered_laws[0]
    t = nominal.lga_time
    y = np.concatenate([law.position(t), law.velocity(t), [4000.0]])
    with pytest.raises(DivertRejected):
        plan_divert(y, t, law.accel(t), 101.0, 30.0, hda=1)
    with pytest.raises(DivertRejected):
        plan_divert(y, t, law.accel(t), 100.0, 30.0, hda=2, increment=21.0)
    with pytest.raises(ValueError):
        plan_divert(y, t, law.accel(t), 0.0, 30.0, hda=3)
    same = plan_divert(y, t, law.accel(t), 0.0, law.t_end - t)
    scale = np.linalg.norm(law.accel(t))
    for tk in np.linspace(t, law.t_end, 9):
        assert np.linalg.norm(same.accel(tk) - law.accel(tk)) <= 1e-9 * scale


def test_divert_mirror_symmetry(nominal):
    law = nominal.powered_laws[0]
    t = nominal.lga_time
    y = np.concatenate([law.position(t), law.velocity(t), [4000.0]])
    rem = law.t_end - t
    base = plan_divert(y, t, law.accel(t), 0.0, rem)
    fwd = plan_divert(y, t, law.accel(t), -100.0, rem)
    back = plan_divert(y, t, law.accel(t), 100.0, rem)
    # along-track is the first inertial axis near the site
    for tk in np.linspace(t + 1.0, law.t_end, 10):
        d_f = fwd.accel(tk)[0] - base.accel(tk)[0]
        d_b = back.accel(tk)[0] - base.accel(tk)[0]
        assert np.sign(d_f) == -np.sign(d_b) != 0


def test_zero_divert_is_bit_identical(nominal, default_design, config):
    res = assemble(default_design, DivertScenario("Z", 0.0, 0.0), config, head=nominal.head)
    np.testing.assert_array_equal(res.trajectory.y, nominal.trajectory.y)
    np.testing.assert_array_equal(res.trajectory.t1, nominal.trajectory.t1)


def test_ff_powered_propellant(default_design, config):
    row = divert_matrix(default_design, config, ["FF"])[0]
    assert row.audit_passed
    assert row.powered == pytest.approx(129.2, rel=0.03)


def test_tof_sweep(default_design, config):
    fly, nominal_tf = lga_tof_family(default_design, config)
    grid = np.arange(30.0, 60.01, 0.5)
    rows = sweep_tof(fly, grid, config.engine)
    assert len(rows) == len(grid) and all(r.error is None for r in rows)
    for name in ("propellant", "max_pitch_rate_dps", "t1_min", "t1_max"):
        vals = np.array([getattr(r, name) for r in rows])
        steps = np.abs(np.diff(vals))
        floor = 1e-6 * np.abs(vals).max()
        for i, d in enumerate(steps):
            local = np.median(steps[max(0, i - 2):i + 3])
            assert d <= 10.0 * max(local, floor), (name, i)
    feasible = [r for r in rows if r.feasible]
    best = min(feasible, key=lambda r: r.propellant)
    assert best.feasible
    near = min(rows, key=lambda r: abs(r.tf - nominal_tf))
    assert near.feasible
    assert 39.0 <= nominal_tf <= 42.0
    bad = sweep_tof(fly, [0.0], config.engine)[0]
    assert not bad.feasible and bad.error

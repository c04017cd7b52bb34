import math

import numpy as np
import pytest
from scipy.integrate import trapezoid

from lunar_descent import reference
from lunar_descent.braking import UnreachableError
from lunar_descent.mission import (
    WAYPOINTS,
    AssemblyError,
    Constraint,
    ConstraintAudit,
    DivertScenario,
    assemble,
    divert_matrix,
    replay_closed_loop,
    scenario,
)


def thrust_integrals(traj, ve):
    """Integrals of mdot and T/m, with the centre-engine cut-off taken at the
    left end of the interval where the thrust jumps."""
    T, m, t = traj.thrust, traj.mass, traj.t
    left = T[:-1].copy()
    jump = np.abs(np.diff(T)) > 1000.0
    left[jump] = T[1:][jump]
    dt = np.diff(t)
    flow = np.sum(0.5 * (left + T[1:]) * dt) / ve
    accel = np.sum(0.5 * (left / m[:-1] + T[1:] / m[1:]) * dt)
    return flow, accel


@pytest.fixture(scope="module")
def matrix(default_design, config):
    return {r.code: r for r in divert_matrix(default_design, config)}


def test_table4_nominal_replay(table4_nominal):
    r = table4_nominal
    assert r.total_propellant == pytest.approx(3120.9, rel=0.01)
    assert r.delta_v == pytest.approx(1911.0, rel=0.01)
    assert r.timeline["MECO"].t == pytest.approx(594.0, abs=2.0)
    assert r.timeline["PGA"].mass == pytest.approx(4072.8, abs=5.0)
    assert r.total_propellant - reference.OPTIMAL_PROPELLANT["N"][6] == pytest.approx(15.1, rel=0.35)


def test_table4_audit_misses_are_marginal(table4_nominal):
    # the published design sits on three gates; each miss is below 1.1 %
    fails = {c.name: c for c in table4_nominal.audit.failures()}
    assert set(fails) == {"t1_rate_Nps", "lga_speed_mps", "lga_pitch_deg"}
    assert max(c.normalized_violation for c in fails.values()) < 0.011


@pytest.mark.xfail(strict=True, reason="published design misses the T1 rate and LGA gates by small margins")
def test_table4_audit_passes(table4_nominal):
    assert table4_nominal.audit.passed


def test_default_design_passes_audit(nominal):
    assert nominal.audit.passed, [c.name for c in nominal.audit.failures()]
    assert nominal.total_propellant == pytest.approx(3120.9, rel=0.01)


def test_timeline_invariants(nominal):
    tl = nominal.timeline.validate()
    assert list(tl.waypoints) == list(WAYPOINTS)
    assert tl["LGA"].altitude == pytest.approx(500.0, abs=0.5)
    assert tl["VGA"].altitude == pytest.approx(30.0, abs=0.1)
    assert tl["MECO"].altitude == pytest.approx(0.0, abs=0.1)
    assert tl["MBB"].mass == pytest.approx(7000.0, rel=1e-12)
    assert tl.pitch_up_end > tl["PGA"].t


def test_phase_accounting(nominal):
    p = nominal.propellant
    assert p.total == pytest.approx(nominal.total_propellant, rel=1e-12)
    assert p.braking_pitch_up_to_lga + p.powered_from_lga + p.vertical == pytest.approx(p.total, rel=1e-12)


def test_mass_bookkeeping(nominal, config):
    ve = config.engine.exhaust_speed(config.moon)
    flow, accel = thrust_integrals(nominal.trajectory, ve)
    assert flow == pytest.approx(nominal.total_propellant, rel=1e-6)
    assert accel == pytest.approx(nominal.delta_v, rel=1e-3)


def test_zero_shift_scenario_matches_nominal(nominal, default_design, config):
    res = assemble(default_design, DivertScenario("N0"), config, head=nominal.head)
    np.testing.assert_array_equal(res.trajectory.y, nominal.trajectory.y)


def test_scenario_validation(config, default_design):
    with pytest.raises(KeyError):
        scenario("XX", config)
    with pytest.raises(ValueError):
        DivertScenario("bad", 150.0).validate(config)
    assert scenario("FF", config, default_design).tf_hda1 == default_design.dt_div["FF"][0]


def test_assembly_error_names_phase(default_design, config):
    from lunar_descent.config import MissionDesign

    v = default_design.vector()
    # a gate below the surface guard
    bad = MissionDesign.from_vector([v[0] - 1000.0, *v[1:]])
    with pytest.raises(AssemblyError) as info:
        assemble(bad, "N", config)
    assert info.value.phase == "pitch-up"


def test_divert_matrix(matrix):
    assert list(matrix) == list(reference.SCENARIO_CODES)
    for code, row in matrix.items():
        assert row.error is None
        assert row.audit_passed, code
        assert row.total == pytest.approx(reference.SUBOPTIMAL_PROPELLANT[code][6], rel=0.01), code
        assert row.penalty_fraction < 0.01, code
    assert matrix["FF"].total == pytest.approx(3130.7, rel=0.01)
    assert matrix["F"].total == pytest.approx(3125.1, rel=0.01)
    assert matrix["B"].total == pytest.approx(3125.5, rel=0.01)
    assert matrix["N"].penalty == pytest.approx(15.1, rel=0.35)


def test_constraint_margins():
    c = Constraint("x", 31.0, 30.0, "max")
    assert not c.passed and c.margin == -1.0
    assert c.normalized_violation == pytest.approx(1.0 / 30.0)
    assert Constraint("y", 80.5, 80.0, "min").passed
    assert Constraint("z", 30.05, 30.0, "band", 0.1).passed
    audit = ConstraintAudit([c, Constraint("y", 80.5, 80.0, "min")])
    assert audit.penalty(1e3) == pytest.approx((1e3 / 30.0) ** 2)
    assert audit["y"].passed
    assert ConstraintAudit([Constraint("y", 80.5, 80.0, "min")]).penalty(1e3) == 0.0


def test_closed_loop_without_perturbation(nominal, default_design, config):
    cl = replay_closed_loop(default_design, config)
    assert cl.result.total_propellant == pytest.approx(nominal.total_propellant, rel=1e-6)
    assert cl.pga_position_error < 1e-6 * nominal.head.pga.r
    assert cl.updates and all(u.time_to_go >= config.closed_loop.freeze_time for u in cl.updates)


def test_closed_loop_uprange_offset(default_design, config):
    cl = replay_closed_loop(default_design, config, theta0_offset=-math.radians(0.02), gnc_period=2.0)
    assert cl.pga_position_error < 10.0
    assert all(u.thrust <= config.engine.total_max for u in cl.updates)
    assert all(u.time_to_go >= config.closed_loop.freeze_time for u in cl.updates)
    assert cl.updates[-1].time_to_go < config.closed_loop.freeze_time + 2.0


def test_closed_loop_unreachable(default_design, config):
    with pytest.raises(UnreachableError):
        replay_closed_loop(default_design, config, theta0_offset=math.radians(0.02))
    with pytest.raises(ValueError):
        replay_closed_loop(default_design, config, gnc_period=0.0)

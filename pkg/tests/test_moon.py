import math

import numpy as np
import pytest

from lunar_descent.moon import (
    MOON,
    CartesianState,
    MoonConstants,
    SingularFrameError,
    SphericalState,
    cartesian_to_spherical,
    downrange_from_theta,
    gravity_accel,
    orbital_period,
    periselene_state,
    spherical_to_cartesian,
    theta_from_downrange,
)


def test_surface_gravity_magnitude():
    g = gravity_accel([MOON.r_moon, 0.0, 0.0])
    assert np.linalg.norm(g) == pytest.approx(1.6243, abs=1e-3)


def test_gravity_inverse_square_and_direction():
    r = np.array([1.0e6, 1.2e6, -0.4e6])
    g1 = gravity_accel(r)
    g2 = gravity_accel(2 * r)
    assert np.linalg.norm(g2) == pytest.approx(np.linalg.norm(g1) / 4, rel=1e-14)
    assert np.dot(g1, r) / (np.linalg.norm(g1) * np.linalg.norm(r)) == pytest.approx(-1.0, abs=1e-15)


def test_gravity_at_centre_is_an_error():
    with pytest.raises(ValueError):
        gravity_accel([0.0, 0.0, 0.0])


def test_constants_sanity_band():
    with pytest.raises(ValueError):
        MoonConstants(mu=1e12)
    with pytest.raises(ValueError):
        MoonConstants(r_moon=-1.0)


def test_vga_state_is_on_site_vertical():
    s = SphericalState(0.0, MOON.r_moon + 30.0, 0.0, math.pi / 2, -2.0, 0.0, 0.0, 3900.0)
    c = spherical_to_cartesian(s)
    np.testing.assert_allclose(c.position, [0.0, 0.0, MOON.r_moon + 30.0], atol=1e-9)
    np.testing.assert_allclose(c.velocity, [0.0, 0.0, -2.0], atol=1e-15)


def test_theta_zero_is_first_axis():
    c = spherical_to_cartesian(SphericalState(0.0, 2e6, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0))
    np.testing.assert_allclose(c.position, [2e6, 0.0, 0.0], atol=1e-9)


def test_round_trip_random_states():
    rng = np.random.default_rng(1)
    for _ in range(1000):
        s = SphericalState(
            0.0, rng.uniform(1.7e6, 2.0e6), rng.uniform(-1.4, 1.4), rng.uniform(-3.1, 3.1),
            *rng.uniform(-2000, 2000, 3), rng.uniform(100, 8000),
        )
        back = cartesian_to_spherical(spherical_to_cartesian(s))
        a, b = s.as_array(), back.as_array()
        np.testing.assert_allclose(b, a, rtol=1e-12, atol=1e-12 * np.abs(a).max())
        c = spherical_to_cartesian(s)
        assert np.linalg.norm(c.velocity) == pytest.approx(math.sqrt(s.v_r**2 + s.v_phi**2 + s.v_theta**2), rel=1e-13)


def test_pole_is_singular():
    with pytest.raises(SingularFrameError):
        cartesian_to_spherical(CartesianState(0.0, [0.0, 1.8e6, 0.0], [1.0, 0.0, 0.0], 1.0))


def test_periselene_velocity():
    s = periselene_state(30_000.0, 100_000.0)
    assert s.v_theta == pytest.approx(1681.6, abs=0.2)
    assert s.v_r == 0.0 and s.v_phi == 0.0
    assert s.r == MOON.r_moon + 30_000.0


def test_circular_orbit_velocity():
    s = periselene_state(30_000.0, 30_000.0)
    assert s.v_theta == pytest.approx(math.sqrt(MOON.mu / (MOON.r_moon + 30_000.0)), rel=1e-14)
    assert s.v_theta == pytest.approx(1665.5, abs=0.5)


def test_periselene_preconditions():
    with pytest.raises(ValueError):
        periselene_state(100_000.0, 30_000.0)


def test_kepler_period():
    # a = 1 802 400 m gives 6866.5 s with these constants
    assert orbital_period(30_000.0, 100_000.0) == pytest.approx(2 * math.pi * math.sqrt(1_802_400.0**3 / MOON.mu))
    assert orbital_period(30_000.0, 100_000.0) == pytest.approx(6866.5, abs=1.0)


def test_downrange_mapping():
    assert downrange_from_theta(theta_from_downrange(622.9)) == pytest.approx(622.9, abs=1e-9)
    assert downrange_from_theta(math.pi / 2) == 0.0
    # about 15.6 deg of arc for the braking burn start
    assert math.degrees(math.pi / 2 - theta_from_downrange(472_230.0)) == pytest.approx(15.57, abs=0.01)


def test_state_validation():
    with pytest.raises(ValueError):
        SphericalState(0.0, MOON.r_moon - 200.0, 0.0, 0.0, 0, 0, 0, 1.0).validate()
    with pytest.raises(ValueError):
        SphericalState(0.0, MOON.r_moon, 0.0, 0.0, 0, 0, 0, 0.0).validate()

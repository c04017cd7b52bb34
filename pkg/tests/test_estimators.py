import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from lunar_descent.config import MissionConfig, DeConfig
from lunar_descent.estimators import (
    BilinearTangentGuidance,
    PolynomialGuidance,
    TrajectoryDesigner,
    check_times,
    check_vector3,
)
from lunar_descent.mission import braking_target
from lunar_descent.polynomial import DescentBoundary


def test_bilinear_estimator(table4_design, config):
    est = BilinearTangentGuidance(config.engine)
    with pytest.raises(NotFittedError):
        est.predict([0.0])
    est.fit(braking_target(table4_design, config))
    assert est.n_iter_ <= 10
    u = est.predict(np.linspace(0.0, est.law_.tf, 7))
    assert u.shape == (7, 3)
    np.testing.assert_allclose(np.linalg.norm(u, axis=1), 1.0, atol=1e-12)
    assert clone(est).get_params()["engine"] == config.engine
    with pytest.raises(TypeError):
        est.fit("not a target")


def test_polynomial_estimator():
    b = DescentBoundary([0, 0, 0], [0, 0, 0], [0, 0, 0], [1, 0, 0], [0, 0, 0], [0, 0, 0], 1.0)
    est = PolynomialGuidance(t0=10.0).fit(b)
    a = est.predict([10.0, 10.5, 11.0])
    np.testing.assert_allclose(a[:, 0], [0.0, 60 * 0.5 - 180 * 0.25 + 120 * 0.125, 0.0], atol=1e-12)
    with pytest.raises(TypeError):
        est.fit(None)


def test_input_checks():
    assert check_times(3.0).shape == (1,)
    with pytest.raises(ValueError):
        check_times([[1.0, 2.0]])
    with pytest.raises(ValueError):
        check_times([np.nan])
    with pytest.raises(ValueError):
        check_vector3([1.0, 2.0])


def test_designer(default_design, config):
    cfg = MissionConfig(de=DeConfig(population=4, generations=1, box_r=10.0, box_theta_deg=0.001, box_v_r=0.5,
                                    box_v_theta=0.5, box_dt=0.5))
    est = TrajectoryDesigner(cfg, default_design)
    with pytest.raises(NotFittedError):
        est.predict()
    est.fit()
    assert len(est.history_) == 2
    totals = est.predict(("N",))
    assert totals[0] == pytest.approx(est.fitness_, rel=1e-12)

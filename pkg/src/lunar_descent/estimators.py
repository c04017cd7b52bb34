"""scikit-learn style wrappers around the guidance solvers.

The solvers are boundary-value problems rather than statistical models, so
``fit`` takes the boundary conditions and ``predict`` evaluates the fitted
law at query times (or, for the designer, over divert scenarios).
"""

from __future__ import annotations

import numpy as np
from numpy.typing import ArrayLike, NDArray
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .braking import BrakingTarget, solve_braking_5
from .config import MissionConfig, MissionDesign
from .dynamics import EngineModel
from .moon import MOON, MoonConstants
from .polynomial import DescentBoundary, cubic_coefficients


def check_times(t: ArrayLike) -> NDArray[np.float64]:
    """Validate query times as a finite 1-D float array."""
    arr = check_array(np.atleast_1d(np.asarray(t, dtype=float)), ensure_2d=False, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError("times must be a scalar or a 1-D array")
    return arr


def check_vector3(v: ArrayLike, name: str = "vector") -> NDArray[np.float64]:
    arr = check_array(np.asarray(v, dtype=float).reshape(1, -1), dtype=np.float64)[0]
    if arr.shape != (3,):
        raise ValueError(f"{name} must have three components")
    return arr


class BilinearTangentGuidance(BaseEstimator):
    """Braking-burn guidance: ``fit`` solves the shooting problem for a
    :class:`BrakingTarget`, ``predict`` returns unit thrust directions on
    the local ``(e_r, e_phi, e_theta)`` triad."""

    def __init__(self, engine: EngineModel | None = None, constants: MoonConstants = MOON,
                 thrust: float | None = None, step: float = 0.1, tol: float = 1e-8, max_iter: int = 20):
        self.engine = engine
        self.constants = constants
        self.thrust = thrust
        self.step = step
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, target: BrakingTarget, y=None):
        if not isinstance(target, BrakingTarget):
            raise TypeError("fit expects a BrakingTarget")
        sol = solve_braking_5(target, self.engine, self.constants, thrust=self.thrust, step=self.step,
                              tol=self.tol, max_iter=self.max_iter)
        self.solution_ = sol
        self.law_ = sol.law
        self.theta0_ = sol.theta0
        self.n_iter_ = sol.iterations
        return self

    def predict(self, t: ArrayLike) -> NDArray[np.float64]:
        check_is_fitted(self, "law_")
        return self.law_.direction(check_times(t))


class PolynomialGuidance(BaseEstimator):
    """Cubic total-acceleration guidance: ``fit`` computes the coefficients
    for a :class:`DescentBoundary`, ``predict`` returns the commanded total
    acceleration at absolute times."""

    def __init__(self, t0: float = 0.0):
        self.t0 = t0

    def fit(self, boundary: DescentBoundary, y=None):
        if not isinstance(boundary, DescentBoundary):
            raise TypeError("fit expects a DescentBoundary")
        self.law_ = cubic_coefficients(boundary, t0=self.t0)
        return self

    def predict(self, t: ArrayLike) -> NDArray[np.float64]:
        check_is_fitted(self, "law_")
        return np.array([self.law_.accel(float(tk)) for tk in check_times(t)])


class TrajectoryDesigner(BaseEstimator):
    """Offline trajectory design: ``fit`` runs the seeded differential
    evolution, ``predict`` assembles divert scenarios and returns their
    total propellant [kg]."""

    def __init__(self, config: MissionConfig | None = None, seed_design: MissionDesign | None = None,
                 tune_diverts: bool = False):
        self.config = config
        self.seed_design = seed_design
        self.tune_diverts = tune_diverts

    def fit(self, X=None, y=None):
        from .design import optimize, tune_divert_tf

        cfg = self.config or MissionConfig()
        seed = self.seed_design or MissionDesign()
        out = optimize(cfg, [seed])
        design = out.design
        if self.tune_diverts:
            dt_div = dict(design.dt_div)
            for code, (s1, s2) in cfg.scenarios.items():
                if s1 == 0.0 and s2 == 0.0:
                    continue
                tuning = tune_divert_tf(design, code, cfg)
                dt_div[code] = [tuning.tf_hda1, tuning.tf_hda2]
            design = MissionDesign.from_vector(design.vector(), dt_div)
        self.design_ = design
        self.history_ = out.history
        self.fitness_ = out.fitness
        return self

    def predict(self, scenarios=("N",)) -> NDArray[np.float64]:
        from .mission import assemble

        check_is_fitted(self, "design_")
        cfg = self.config or MissionConfig()
        return np.array([assemble(self.design_, code, cfg).total_propellant for code in scenarios])

"""Offline trajectory design: differential evolution over the gate states and
powered-descent time, plus divert time-of-flight tuning."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .braking import BilinearLaw, solve_braking_5
from .config import DeConfig, MissionConfig, MissionDesign
from .mission import AssemblyError, MissionResult, assemble, braking_target, fly_head, scenario

logger = logging.getLogger(__name__)


class InfeasibleDesignError(RuntimeError):
    def __init__(self, message: str, breakdown=None):
        super().__init__(message)
        self.breakdown = breakdown or {}


@dataclass
class Evaluation:
    fitness: float
    propellant: float
    penalty: float
    feasible: bool
    result: MissionResult | None = None
    error: str | None = None


class FitnessFunction:
    """Total propellant plus squared normalised constraint violations.

    The braking-burn solve is warm-started from a fixed reference law so
    evaluation stays deterministic for a given design and config.
    """

    def __init__(self, config: MissionConfig | None = None, guess: BilinearLaw | None = None):
        self.config = config or MissionConfig()
        self.guess = guess
        self.n_evals = 0

    def evaluate(self, design: MissionDesign, code: str = "N") -> Evaluation:
        self.n_evals += 1
        de = self.config.de
        try:
            res = assemble(design, scenario(code, self.config, design), self.config, guess=self.guess)
        except (AssemblyError, ValueError) as exc:
            return Evaluation(de.failure_penalty, math.nan, de.failure_penalty, False, None, str(exc))
        prop = res.total_propellant
        pen = res.audit.penalty(de.penalty_weight)
        return Evaluation(prop + pen, prop, pen, res.audit.passed, res)

    def __call__(self, design: MissionDesign) -> float:
        return self.evaluate(design).fitness


def fitness(design: MissionDesign, config: MissionConfig | None = None) -> float:
    return FitnessFunction(config)(design)


def search_box(center: MissionDesign, de: DeConfig) -> np.ndarray:
    c = np.array(center.vector())
    hw = np.array(de.half_widths)
    return np.column_stack([c - hw, c + hw])


def _reflect(x: np.ndarray, box: np.ndarray) -> np.ndarray:
    lo, hi = box[:, 0], box[:, 1]
    x = np.where(x < lo, 2 * lo - x, x)
    x = np.where(x > hi, 2 * hi - x, x)
    return np.clip(x, lo, hi)


@dataclass
class OptimizeResult:
    design: MissionDesign
    fitness: float
    evaluation: Evaluation
    history: list[tuple[int, float, float, float]] = field(default_factory=list)
    n_evals: int = 0

    @property
    def feasible(self) -> bool:
        return self.evaluation.feasible


def optimize(
    config: MissionConfig | None = None,
    seeds: list[MissionDesign] | None = None,
    *,
    box: np.ndarray | None = None,
    callback=None,
) -> OptimizeResult:
    """rand/1/bin differential evolution over
    ``(pga_r, pga_theta, pga_v_r, pga_v_theta, dt_powered)``.

    Seed designs replace the first members of the random initial
    population; the box defaults to the configured half-widths around the
    first seed. Selection is greedy (trial replaces target when not worse),
    so the best fitness never increases. History rows are
    ``(generation, best_fitness, best_propellant, best_penalty)``.
    """
    config = config or MissionConfig()
    de = config.de
    seeds = list(seeds or [MissionDesign()])
    if box is None:
        box = search_box(seeds[0], de)
    box = np.asarray(box, dtype=float)
    rng = np.random.default_rng(de.seed)
    n, dim = de.population, box.shape[0]
    lo, hi = box[:, 0], box[:, 1]
    pop = lo + rng.random((n, dim)) * (hi - lo)
    for i, s in enumerate(seeds[:n]):
        pop[i] = np.clip(s.vector(), lo, hi)

    try:
        ref = solve_braking_5(braking_target(seeds[0], config), config.engine, config.moon, step=config.step).law
    except Exception:  # noqa: BLE001 - fall back to the default guess
        ref = None
    fit = FitnessFunction(config, ref)
    dt_div = dict(seeds[0].dt_div)

    def make(x):
        return MissionDesign.from_vector(x, dt_div)

    evals = [fit.evaluate(make(x)) for x in pop]
    f = np.array([e.fitness for e in evals])
    best = int(np.argmin(f))
    history = [(0, float(f[best]), evals[best].propellant, evals[best].penalty)]
    logger.info("generation 0 best %.3f", f[best])
    for gen in range(1, de.generations + 1):
        for i in range(n):
            r1, r2, r3 = rng.choice([j for j in range(n) if j != i], 3, replace=False)
            mutant = pop[r1] + de.weight * (pop[r2] - pop[r3])
            cross = rng.random(dim) < de.crossover
            cross[rng.integers(dim)] = True
            trial = _reflect(np.where(cross, mutant, pop[i]), box)
            ev = fit.evaluate(make(trial))
            if ev.fitness <= f[i]:
                pop[i], f[i], evals[i] = trial, ev.fitness, ev
        best = int(np.argmin(f))
        history.append((gen, float(f[best]), evals[best].propellant, evals[best].penalty))
        logger.info("generation %d best %.3f", gen, f[best])
        if callback is not None:
            callback(gen, history[-1])
    best_ev = evals[best]
    out = OptimizeResult(make(pop[best]), float(f[best]), best_ev, history, fit.n_evals)
    if not best_ev.feasible:
        breakdown = {}
        if best_ev.result is not None:
            breakdown = {c.name: c.normalized_violation for c in best_ev.result.audit.failures()}
        raise InfeasibleDesignError(
            f"no feasible design after {de.generations} generations (best penalty {best_ev.penalty:.4g})", breakdown
        )
    return out


@dataclass
class DivertTuning:
    code: str
    tf_hda1: float | None
    tf_hda2: float | None
    propellant: float
    feasible: bool
    grid: list[tuple[int, float, float, bool]] = field(default_factory=list)


def tune_divert_tf(
    design: MissionDesign,
    code: str,
    config: MissionConfig | None = None,
    *,
    grid_step: float = 0.5,
    n_grid: int = 21,
) -> DivertTuning:
    """Pick the divert times of flight of one scenario on a grid.

    Each HDA grid starts at the remaining nominal time and extends in
    ``grid_step`` increments. For every HDA1 point the HDA2 time is walked
    up from its remaining time to the first feasible point, so both times
    are chosen jointly; the feasible pair of least propellant is kept. An
    HDA without a displacement keeps the remaining time.

    Raises:
        InfeasibleDesignError: no grid point passes the audit; the
            breakdown names the tightest violated constraint.
    """
    config = config or MissionConfig()
    head = fly_head(design, config)
    base = scenario(code, config)
    grid_log = []

    def run(tf1, tf2):
        d = MissionDesign.from_vector(design.vector(), {**design.dt_div, code: [tf1, tf2]})
        try:
            return assemble(d, scenario(code, config, d), config, head=head)
        except AssemblyError:
            return None

    def log(hda, tf, res):
        grid_log.append((hda, tf, math.nan if res is None else res.total_propellant,
                         res is not None and res.audit.passed))

    nominal = run(None, None)
    if nominal is None:
        raise InfeasibleDesignError(f"scenario {code} cannot be assembled")
    rem1 = nominal.powered_laws[0].t_end - nominal.lga_time
    tf1_grid = [None] if base.hda1_shift == 0.0 else [rem1 + k * grid_step for k in range(n_grid)]

    best = None  # (propellant, tf1, tf2, result)
    closest = None  # least-penalised result, for the error report
    for tf1 in tf1_grid:
        first = run(tf1, None)
        if tf1 is not None:
            log(1, tf1, first)
        if first is None:
            continue
        cands = [(None, first)]
        if base.hda2_shift != 0.0 and not first.audit.passed and not math.isnan(first.hda2_time):
            rem2 = first.powered_laws[-1].t_end - first.hda2_time
            for k in range(1, n_grid):
                tf2 = rem2 + k * grid_step
                res = run(tf1, tf2)
                log(2, tf2, res)
                if res is None:
                    continue
                cands.append((tf2, res))
                if res.audit.passed:
                    break
        for tf2, res in cands:
            if closest is None or res.audit.penalty(1.0) < closest.audit.penalty(1.0):
                closest = res
            if res.audit.passed and (best is None or res.total_propellant < best[0]):
                best = (res.total_propellant, tf1, tf2, res)
    if best is None:
        if closest is None:
            raise InfeasibleDesignError(f"scenario {code}: no grid point could be flown")
        worst = max(closest.audit.failures(), key=lambda c: c.normalized_violation)
        raise InfeasibleDesignError(
            f"scenario {code}: no feasible divert time; tightest violated constraint {worst.name}",
            {c.name: c.normalized_violation for c in closest.audit.failures()},
        )
    prop, tf1, tf2, res = best
    if tf2 is None and base.hda2_shift != 0.0:
        tf2 = res.powered_laws[-1].t_end - res.hda2_time
    return DivertTuning(code, tf1, tf2, prop, True, grid_log)

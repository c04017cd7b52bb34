"""Command-line entry points.

Exit codes: 0 success, 2 constraint failure, 1 solver or input error.
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .braking import ConvergenceError, UnreachableError, sweep_thrust_theta0
from .config import ConfigError, DeConfig, MissionConfig, MissionDesign, dump_yaml, load_config, load_design
from .design import InfeasibleDesignError, optimize
from .mission import (
    WAYPOINTS,
    AssemblyError,
    MissionResult,
    assemble,
    braking_target,
    divert_matrix,
    lga_tof_family,
    replay_closed_loop,
)
from .peg_flat import crosscheck_braking, demo_problem, hamiltonian, solve_flat_peg, verify_pmp_optimality
from .polynomial import sweep_tof

logger = logging.getLogger(__name__)

TRAJECTORY_HEADER = (
    "t_s,r_m,phi_rad,theta_rad,vr_mps,vphi_mps,vtheta_mps,m_kg,alt_m,downrange_m,pitch_deg,pitch_rate_dps,t1_N,t2_N"
)
THRUST_SWEEP_HEADER = ("thrust_N", "theta0_deg", "dt_s", "iterations")
TOF_SWEEP_HEADER = ("tf_s", "prop_kg", "max_pitch_rate_dps", "max_throttle_rate_Nps", "t1_min_N", "t1_max_N")
HISTORY_HEADER = ("generation", "best_fitness", "best_propellant", "penalty")

EXIT_OK, EXIT_ERROR, EXIT_CONSTRAINT = 0, 1, 2


def packaged_design(name: str = "default_design.yaml") -> Path:
    return Path(str(resources.files("lunar_descent") / "data" / name))


def _fmt(x) -> str:
    if x is None:
        return "nan"
    x = float(x)
    if math.isnan(x):
        return "nan"
    s = f"{x:.4f}"
    return "0.0000" if s == "-0.0000" else s


def _round(x, nd: int = 4):
    """Round floats for reports; keeps output diffable between runs."""
    if isinstance(x, dict):
        return {k: _round(v, nd) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_round(v, nd) for v in x]
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return None
        v = round(x, nd)
        return 0.0 if v == 0.0 else v
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def _log10(x: float) -> float:
    return math.log10(x) if x > 0.0 else -math.inf


def write_report(path: Path, title: str, lines: list[str], data: dict) -> None:
    """Human-readable comment block followed by a YAML document."""
    head = [f"# {title}", *(f"# {ln}" for ln in lines)]
    body = yaml.safe_dump(_round(data), sort_keys=False, default_flow_style=False)
    path.write_text("\n".join(head) + "\n" + body)


def write_trajectory_csv(path: Path, table: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(TRAJECTORY_HEADER + "\n")
        for row in table:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, (int, str)) else _fmt(v) for v in row])


def _config(args) -> MissionConfig:
    return load_config(args.config) if args.config else MissionConfig()


def _design(args) -> MissionDesign:
    return load_design(args.design or packaged_design())


def _timeline_data(res: MissionResult) -> dict:
    wps = {
        name: {
            "t_s": w.t, "altitude_m": w.altitude, "downrange_m": w.downrange, "v_vertical_mps": w.v_vertical,
            "v_horizontal_mps": w.v_horizontal, "pitch_deg": w.pitch_deg, "mass_kg": w.mass,
        }
        for name, w in ((n, res.timeline[n]) for n in WAYPOINTS)
    }
    p = res.propellant
    return {
        "scenario": res.scenario.code,
        "hda1_shift_m": res.scenario.hda1_shift,
        "hda2_shift_m": res.scenario.hda2_shift,
        "waypoints": wps,
        "pitch_up_end_s": res.timeline.pitch_up_end,
        "lga_time_s": res.lga_time,
        "hda2_time_s": res.hda2_time,
        "time_of_flight_s": res.time_of_flight,
        "propellant_kg": {
            "braking": p.braking, "pitch_up": p.pitch_up, "powered": p.powered, "vertical": p.vertical,
            "braking_pitch_up": p.braking_pitch_up, "braking_pitch_up_to_lga": p.braking_pitch_up_to_lga,
            "powered_from_lga": p.powered_from_lga, "total": p.total,
        },
        "delta_v_mps": res.delta_v,
        "audit": _audit_data(res),
    }


def _audit_data(res: MissionResult) -> dict:
    return {
        "passed": res.audit.passed,
        "constraints": {
            c.name: {"value": c.value, "limit": c.limit, "kind": c.kind, "margin": c.margin, "passed": c.passed}
            for c in res.audit.constraints
        },
    }


def _timeline_lines(res: MissionResult) -> list[str]:
    lines = [f"{'wp':<5}{'t s':>9}{'alt m':>11}{'dr m':>13}{'vv m/s':>9}{'vh m/s':>9}{'pitch':>8}{'m kg':>10}"]
    for n in WAYPOINTS:
        w = res.timeline[n]
        lines.append(
            f"{n:<5}{w.t:9.1f}{w.altitude:11.1f}{w.downrange:13.1f}{w.v_vertical:9.1f}{w.v_horizontal:9.1f}"
            f"{w.pitch_deg:8.1f}{w.mass:10.1f}"
        )
    lines.append(f"total propellant {res.total_propellant:.1f} kg, delta-v {res.delta_v:.1f} m/s")
    lines.append("audit " + ("passed" if res.audit.passed else
                             "FAILED: " + ", ".join(c.name for c in res.audit.failures())))
    return lines


def cmd_fly(args) -> int:
    cfg, design = _config(args), _design(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.closed_loop:
        cl = replay_closed_loop(design, cfg, theta0_offset=math.radians(args.theta0_offset_deg), sc=args.scenario)
        res = cl.result
    else:
        res = assemble(design, args.scenario, cfg)
    write_trajectory_csv(out / "trajectory.csv", res.trajectory.table())
    data = _timeline_data(res)
    if args.closed_loop:
        data["closed_loop"] = {
            "theta0_offset_deg": args.theta0_offset_deg, "updates": len(cl.updates),
            "pga_position_error_m": cl.pga_position_error, "pga_velocity_error_mps": cl.pga_velocity_error,
        }
    write_report(out / "timeline.yaml", f"descent timeline, scenario {res.scenario.code}", _timeline_lines(res), data)
    for ln in _timeline_lines(res):
        print(ln)
    return EXIT_OK if res.audit.passed else EXIT_CONSTRAINT


def cmd_check(args) -> int:
    res = assemble(_design(args), args.scenario, _config(args))
    for c in res.audit.constraints:
        print(f"{'ok  ' if c.passed else 'FAIL'} {c.name:<24} value {c.value:12.4f} limit {c.limit:12.4f}")
    return EXIT_OK if res.audit.passed else EXIT_CONSTRAINT


def cmd_divert_matrix(args) -> int:
    cfg, design = _config(args), _design(args)
    rows = divert_matrix(design, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    lines = [f"{'case':<5}{'hda1':>7}{'hda2':>6}{'tof s':>8}{'brk+pu':>9}{'powered':>9}{'vert':>7}{'total':>9}"
             f"{'dv':>8}{'opt':>9}{'penalty':>9}{'%':>7}"]
    data = {}
    ok = True
    for r in rows:
        lines.append(
            f"{r.code:<5}{r.hda1:7.0f}{r.hda2:6.0f}{r.time_of_flight:8.1f}{r.braking_pitch_up:9.1f}{r.powered:9.1f}"
            f"{r.vertical:7.1f}{r.total:9.1f}{r.delta_v:8.1f}{r.optimal_total:9.1f}{r.penalty:9.1f}"
            f"{100 * r.penalty_fraction:7.2f}"
        )
        data[r.code] = {
            "hda1_m": r.hda1, "hda2_m": r.hda2, "time_of_flight_s": r.time_of_flight,
            "braking_pitch_up_kg": r.braking_pitch_up, "powered_kg": r.powered, "vertical_kg": r.vertical,
            "total_kg": r.total, "delta_v_mps": r.delta_v, "optimal_total_kg": r.optimal_total,
            "penalty_kg": r.penalty, "penalty_fraction": r.penalty_fraction, "audit_passed": r.audit_passed,
            "error": r.error,
        }
        ok &= r.error is None and r.audit_passed and r.penalty_fraction < 0.01
    write_report(out / "divert_matrix.yaml", "divert test matrix", lines, {"scenarios": data})
    for ln in lines:
        print(ln)
    if any(r.error for r in rows):
        return EXIT_ERROR
    return EXIT_OK if ok else EXIT_CONSTRAINT


def cmd_design(args) -> int:
    cfg = _config(args)
    de = cfg.de
    overrides = {k: getattr(args, k) for k in ("population", "generations", "seed") if getattr(args, k) is not None}
    if overrides:
        de = DeConfig(**{**de.__dict__, **overrides})
        cfg = MissionConfig(cfg.moon, cfg.engine, cfg.gates, de, cfg.closed_loop, cfg.step, cfg.scenarios)
    seed = load_design(args.design) if args.design else load_design(packaged_design("table4_design.yaml"))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        res = optimize(cfg, [seed])
    except InfeasibleDesignError as exc:
        print(str(exc), file=sys.stderr)
        for k, v in exc.breakdown.items():
            print(f"  {k}: {v:.4g}", file=sys.stderr)
        return EXIT_CONSTRAINT
    (out / "best_design.yaml").write_text(dump_yaml(res.design))
    write_csv(out / "history.csv", HISTORY_HEADER, [(int(g), f, p, pen) for g, f, p, pen in res.history])
    print(f"best propellant {res.evaluation.propellant:.4f} kg after {res.n_evals} evaluations")
    return EXIT_OK


def cmd_sweep_thrust(args) -> int:
    cfg, design = _config(args), _design(args)
    eng = cfg.engine
    thrusts = np.linspace(args.fraction_min * eng.total_max, eng.total_max, args.n)
    pts = sweep_thrust_theta0(braking_target(design, cfg), eng, thrusts, cfg.moon, step=cfg.step)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = [(p.thrust, math.degrees(p.theta0) if p.ok else None, p.dt, p.iterations if p.ok else "nan")
            for p in pts]
    write_csv(out / "sweep_thrust.csv", THRUST_SWEEP_HEADER, rows)
    return EXIT_OK if all(p.ok for p in pts) else EXIT_ERROR


def cmd_sweep_tof(args) -> int:
    cfg, design = _config(args), _design(args)
    fly, tf_nom = lga_tof_family(design, cfg)
    grid = np.arange(args.tf_min, args.tf_max + 0.5 * args.tf_step, args.tf_step)
    rows = sweep_tof(fly, grid, cfg.engine, pitch_rate_max=cfg.gates.pitch_rate_max_deg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "sweep_tof.csv", TOF_SWEEP_HEADER,
              [(r.tf, r.propellant, r.max_pitch_rate_dps, r.max_throttle_rate, r.t1_min, r.t1_max) for r in rows])
    feas = [r for r in rows if r.feasible]
    if feas:
        best = min(feas, key=lambda r: r.propellant)
        print(f"nominal tf {tf_nom:.2f} s; feasible argmin tf {best.tf:.2f} s, {best.propellant:.2f} kg")
        return EXIT_OK
    print("no feasible time of flight on the grid")
    return EXIT_CONSTRAINT


def cmd_peg_flat(args) -> int:
    prob = demo_problem()
    sol = solve_flat_peg(prob)
    ts = np.linspace(0.0, sol.t_f, 11)
    hs = [hamiltonian(prob, sol, t) for t in ts]
    pmp = verify_pmp_optimality(sol, prob, 100)
    cc = crosscheck_braking(prob, sol)
    spread = (max(hs) - min(hs)) / abs(np.mean(hs))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    lines = [
        f"t_f {sol.t_f:.4f} s, residual {sol.residual:.3e}, iterations {sol.iterations}",
        f"Hamiltonian relative spread {spread:.3e}",
        f"PMP minimum margin {pmp.min_margin:.4e} over {pmp.n_checked} perturbations",
        f"uniform-gravity braking cross-check max angle {cc.max_angle_deg:.3e} deg",
    ]
    data = {
        "problem": {"g": prob.g.tolist(), "thrust_N": prob.thrust, "m0_kg": prob.m0, "mdot_kgps": prob.mdot,
                    "r0_m": prob.r0.tolist(), "v0_mps": prob.v0.tolist(), "y_f_m": prob.y_f, "z_f_m": prob.z_f,
                    "v_f_mps": prob.v_f.tolist()},
        # c is reported per kilosecond and the small diagnostics as log10 so
        # that the fixed 1e-4 output precision keeps them visible
        "solution": {"t_f_s": sol.t_f, "b": sol.b.tolist(), "c_per_ks": (1e3 * sol.c).tolist(),
                     "pinned": list(sol.pinned), "iterations": sol.iterations},
        "residual_log10": _log10(sol.residual),
        "hamiltonian_relative_spread_log10": _log10(spread),
        "pmp_min_margin_log10": _log10(pmp.min_margin),
        "pmp_passed": pmp.passed,
        "crosscheck_max_angle_deg_log10": _log10(cc.max_angle_deg),
        "passed": sol.residual < 1e-8 and spread < 1e-6 and pmp.passed and cc.max_angle_deg < 0.1,
    }
    write_report(out / "peg_flat.yaml", "flat-planet PEG demo", lines, data)
    for ln in lines:
        print(ln)
    return EXIT_OK if data["passed"] else EXIT_CONSTRAINT


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lunar-descent", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, design=True):
        sp.add_argument("--config", help="mission config YAML (defaults built in)")
        sp.add_argument("--out", default=".", help="output directory (default: current)")
        if design:
            sp.add_argument("--design", help="design YAML (default: packaged default design)")

    sp = sub.add_parser("fly", help="assemble a descent; write trajectory.csv and timeline.yaml")
    common(sp)
    sp.add_argument("--scenario", default="N", help="divert scenario code (default N)")
    sp.add_argument("--closed-loop", action="store_true", help="re-solve the braking guidance every GNC cycle")
    sp.add_argument("--theta0-offset-deg", type=float, default=0.0,
                    help="initial along-track offset for --closed-loop [deg]")
    sp.set_defaults(func=cmd_fly)

    sp = sub.add_parser("check", help="audit a design against the mission constraints")
    common(sp)
    sp.add_argument("--scenario", default="N")
    sp.set_defaults(func=cmd_check)

    sp = sub.add_parser("divert-matrix", help="propellant over the seven divert scenarios")
    common(sp)
    sp.set_defaults(func=cmd_divert_matrix)

    sp = sub.add_parser("design", help="differential-evolution design; writes best_design.yaml and history.csv")
    common(sp)
    sp.add_argument("--population", type=int)
    sp.add_argument("--generations", type=int)
    sp.add_argument("--seed", type=int)
    sp.set_defaults(func=cmd_design)

    sp = sub.add_parser("sweep-thrust", help="initial angle versus braking thrust; writes sweep_thrust.csv")
    common(sp)
    sp.add_argument("--n", type=int, default=21, help="grid points (default 21)")
    sp.add_argument("--fraction-min", type=float, default=0.8, help="lowest thrust as a fraction of the maximum")
    sp.set_defaults(func=cmd_sweep_thrust)

    sp = sub.add_parser("sweep-tof", help="low-gate descent metrics versus time of flight; writes sweep_tof.csv")
    common(sp)
    sp.add_argument("--tf-min", type=float, default=30.0)
    sp.add_argument("--tf-max", type=float, default=60.0)
    sp.add_argument("--tf-step", type=float, default=0.5)
    sp.set_defaults(func=cmd_sweep_tof)

    sp = sub.add_parser("peg-flat", help="flat-planet PEG demo; writes peg_flat.yaml")
    common(sp, design=False)
    sp.set_defaults(func=cmd_peg_flat)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (AssemblyError, ConvergenceError, UnreachableError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())

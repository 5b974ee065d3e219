"""
Scenario runner: `python cascade_cli.py <run|sweep|audit|compare|toy> ...`

Exit codes: 0 ok, 2 parse error, 3 validation error, 4 numerical
tolerance breach, 5 failed resource audit.
"""

import argparse
import csv
import itertools
import json
import sys
from concurrent.futures import ThreadPoolExecutor, as_completed
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from cascade_collision import run_trajectory
from cascade_config import ScenarioConfig, Settings, load_scenario, load_settings, parse_scenario
from cascade_errors import AuditFailure, CascadeError, ConfigValidationError, exit_code_for
from cascade_lindblad import RATIO_FLOOR, compare_engines, integrate
from cascade_model import initial_state, system_hamiltonian
from cascade_thermo import (
    ObservableSet,
    audit_resource_chain,
    free_energy,
    global_heat_direction_violations,
    heat_direction_violations,
    observables,
    resource_trajectory,
    subsystem_energy,
    trajectory_observables,
)
from cascade_toys import TOYS, run_toy

SWEEP_AXES = ("lambda", "alpha", "tau", "order")
F_MONOTONE_TOL = 1e-10


# =========================
# OUTPUT HELPERS
# =========================
def fmt(x: Optional[float]) -> str:
    """Fixed notation, 12 significant digits; None is an empty cell."""
    if x is None:
        return ""
    x = float(x)
    if x == 0:
        x = 0.0
    return np.format_float_positional(x, precision=12, unique=False, fractional=False, trim="-")


def write_csv(path: Path, header: Sequence[str], rows: List[Sequence[str]]) -> None:
    with path.open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def write_json(path: Path, data: Dict) -> None:
    path.write_text(json.dumps(data, sort_keys=True, indent=2) + "\n", encoding="utf-8")


class Reporter:
    def __init__(self, quiet: bool = False):
        self.quiet = quiet

    def progress(self, msg: str) -> None:
        if not self.quiet:
            print(msg, flush=True)

    def result(self, msg: str) -> None:
        print(msg, flush=True)


def observable_header(n: int, outputs: Sequence[str]) -> List[str]:
    header = ["step", "collision", "time"]
    if "energies" in outputs:
        header += [f"E_{k + 1}" for k in range(n)]
    if "bath_heat" in outputs:
        header.append("Q_bath")
    if "free_energy" in outputs:
        header.append("F")
    if "mutual_information" in outputs:
        header.append("I_SR")
    if "coherence" in outputs:
        header.append("C")
    if "one_way" in outputs:
        header += [f"Ck_{k + 1}" for k in range(n)]
    if "apparent" in outputs:
        for k in range(n):
            header += [f"AT_{k + 1}", f"AT_{k + 1}_status"]
    if "global_apparent" in outputs:
        header += ["AT_global", "AT_global_status"]
    return header


def observable_cells(obs: ObservableSet, outputs: Sequence[str]) -> List[str]:
    cells: List[str] = []
    if "energies" in outputs:
        cells += [fmt(e) for e in obs.energies]
    if "bath_heat" in outputs:
        cells.append(fmt(obs.bath_heat))
    if "free_energy" in outputs:
        cells.append(fmt(obs.free_energy))
    if "mutual_information" in outputs:
        cells.append(fmt(obs.mutual_information))
    if "coherence" in outputs:
        cells.append(fmt(obs.coherence))
    if "one_way" in outputs:
        cells += [fmt(c) for c in obs.one_way]
    if "apparent" in outputs:
        for at in obs.apparent:
            cells += [fmt(at.value), at.status.value]
    if "global_apparent" in outputs:
        cells += [fmt(obs.global_apparent.value), obs.global_apparent.status.value]
    return cells


def _out_dir(args, settings: Settings) -> Path:
    out = Path(args.out) if getattr(args, "out", None) else settings.out_dir
    out.mkdir(parents=True, exist_ok=True)
    return out


# =========================
# RUN
# =========================
def _collision_summary(scenario: ScenarioConfig, out: Path, report: Reporter) -> Dict:
    spec, coh, cfg = scenario.to_spec(), scenario.to_coherence(), scenario.to_collision()
    traj = run_trajectory(spec, coh, cfg)
    obs = trajectory_observables(traj)

    header = observable_header(spec.n, scenario.outputs)
    rows = [
        [str(s.step), str(s.collision), fmt(s.time)] + observable_cells(o, scenario.outputs)
        for s, o in zip(traj.snapshots, obs)
    ]
    path = out / f"{scenario.name}_collision.csv"
    write_csv(path, header, rows)
    report.progress(f"RUN: wrote {len(rows)} collision rows -> {path}")

    h_s = system_hamiltonian(spec).matrix
    f_series = [free_energy(rho, h_s, spec.bath_temperature) for rho in traj.system_states]
    f_increases = sum(1 for a, b in zip(f_series, f_series[1:]) if b > a + F_MONOTONE_TOL)

    law = heat_direction_violations(traj) if cfg.variant == "cascade" else global_heat_direction_violations(traj)
    if law.violations:
        report.progress(f"RUN: ❌ heat-direction law violated at {len(law.violations)} of {law.checked} checked steps")
    else:
        report.progress(f"RUN: ✅ heat-direction law holds at {law.checked} checked steps ({law.skipped} skipped)")

    first, last = obs[0], obs[-1]
    return {
        "rows": len(rows),
        "final_energies": list(last.energies),
        "energy_changes": [b - a for a, b in zip(first.energies, last.energies)],
        "bath_heat": last.bath_heat,
        "free_energy_increases": f_increases,
        "heat_law": {"checked": law.checked, "skipped": law.skipped, "violations": len(law.violations)},
    }


def _lindblad_summary(scenario: ScenarioConfig, out: Path, report: Reporter) -> Dict:
    spec, coh, cfg = scenario.to_spec(), scenario.to_coherence(), scenario.to_collision()
    steps = scenario.lindblad.steps_per_collision
    rho0 = initial_state(spec, coh)
    flow = integrate(rho0, spec, cfg, t_end=cfg.n_collisions * cfg.tau, dt=cfg.tau / steps, record_every=steps)

    e0 = sum(subsystem_energy(rho0, spec, k) for k in range(spec.n))
    header = observable_header(spec.n, scenario.outputs)
    rows, all_obs = [], []
    for m, (t, rho) in enumerate(zip(flow.times, flow.states)):
        heat = e0 - sum(subsystem_energy(rho, spec, k) for k in range(spec.n))
        o = observables(rho, spec, cfg.order, heat)
        all_obs.append(o)
        rows.append([str(m * steps), str(m), fmt(t)] + observable_cells(o, scenario.outputs))
    path = out / f"{scenario.name}_lindblad.csv"
    write_csv(path, header, rows)
    report.progress(f"RUN: wrote {len(rows)} master-equation rows -> {path}")

    first, last = all_obs[0], all_obs[-1]
    return {
        "rows": len(rows),
        "final_energies": list(last.energies),
        "energy_changes": [b - a for a, b in zip(first.energies, last.energies)],
        "bath_heat": last.bath_heat,
    }


def cmd_run(args, settings: Settings, report: Reporter) -> int:
    scenario = load_scenario(args.config)
    engine = args.engine or scenario.engine
    if engine != "collision" and scenario.collision.variant != "cascade":
        raise ConfigValidationError("The master-equation engine needs collision.variant = 'cascade'")
    out = _out_dir(args, settings)
    report.progress(f"RUN: {scenario.name} engine={engine} n={scenario.spin_chain.n} N={scenario.collision.n_collisions}")

    summary: Dict = {"name": scenario.name, "engine": engine, "seed": args.seed}
    if engine in ("collision", "both"):
        summary["collision"] = _collision_summary(scenario, out, report)
    if engine in ("lindblad", "both"):
        summary["lindblad"] = _lindblad_summary(scenario, out, report)

    write_json(out / f"{scenario.name}_summary.json", summary)
    report.result(f"RUN: ✅ {scenario.name} done")
    return 0


# =========================
# SWEEP
# =========================
def _sweep_values(axis: str, raw: str, n: int) -> List:
    if axis == "order":
        if raw.strip() == "all":
            return [list(p) for p in itertools.permutations(range(n))]
        try:
            return [[int(x) for x in item.split("-")] for item in raw.split(",")]
        except ValueError as e:
            raise ConfigValidationError(f"Order values must look like 0-1-2, got '{raw}'") from e
    try:
        return [float(x) for x in raw.split(",")]
    except ValueError as e:
        raise ConfigValidationError(f"Sweep values must be comma-separated numbers, got '{raw}'") from e


def _variant(scenario: ScenarioConfig, axis: str, value) -> ScenarioConfig:
    data = scenario.model_dump()
    if axis in ("lambda", "alpha"):
        if not data["coherence"]:
            raise ConfigValidationError(f"Sweeping {axis} needs at least one coherence term")
        key = "lam" if axis == "lambda" else "alpha"
        for term in data["coherence"]:
            term[key] = value
    elif axis == "tau":
        data["collision"]["tau"] = value
    else:
        data["collision"]["order"] = list(value)
    return parse_scenario(data)


def _sweep_row(scenario: ScenarioConfig) -> Dict:
    spec, coh, cfg = scenario.to_spec(), scenario.to_coherence(), scenario.to_collision()
    traj = run_trajectory(spec, coh, cfg)
    first = observables(traj.system_states[0], spec, cfg.order)
    last_snap = traj.snapshots[-1]
    last = observables(traj.system_state(last_snap), spec, cfg.order, last_snap.bath_heat)
    return {
        "energies": last.energies,
        "changes": [b - a for a, b in zip(first.energies, last.energies)],
        "bath_heat": last.bath_heat,
        "free_energy": last.free_energy,
        "coherence": last.coherence,
    }


def cmd_sweep(args, settings: Settings, report: Reporter) -> int:
    scenario = load_scenario(args.config)
    n = scenario.spin_chain.n
    values = _sweep_values(args.axis, args.values, n)
    variants = [_variant(scenario, args.axis, v) for v in values]
    out = _out_dir(args, settings)
    report.progress(f"SWEEP: {scenario.name} axis={args.axis} points={len(values)} workers={settings.sweep_workers}")

    results: List[Optional[Dict]] = [None] * len(variants)
    with ThreadPoolExecutor(max_workers=settings.sweep_workers) as ex:
        futures = {ex.submit(_sweep_row, v): i for i, v in enumerate(variants)}
        for fut in as_completed(futures):
            results[futures[fut]] = fut.result()

    header = [args.axis] + [f"E_{k + 1}" for k in range(n)] + [f"dE_{k + 1}" for k in range(n)] + ["Q_bath", "F", "C"]
    rows = []
    for value, res in zip(values, results):
        label = "-".join(str(k) for k in value) if args.axis == "order" else fmt(value)
        rows.append(
            [label]
            + [fmt(e) for e in res["energies"]]
            + [fmt(d) for d in res["changes"]]
            + [fmt(res["bath_heat"]), fmt(res["free_energy"]), fmt(res["coherence"])]
        )
    path = out / f"{scenario.name}_sweep_{args.axis}.csv"
    write_csv(path, header, rows)
    report.result(f"SWEEP: ✅ {len(rows)} rows -> {path}")
    return 0


# =========================
# AUDIT
# =========================
def cmd_audit(args, settings: Settings, report: Reporter) -> int:
    scenario = load_scenario(args.config)
    spec, coh, cfg = scenario.to_spec(), scenario.to_coherence(), scenario.to_collision()
    out = _out_dir(args, settings)
    report.progress(f"AUDIT: {scenario.name} variant={cfg.variant} N={cfg.n_collisions}")

    traj = run_trajectory(spec, coh, cfg)
    rows, failures, worst = [], [], None
    for m in range(1, cfg.n_collisions + 1):
        for audit in audit_resource_chain(traj, spec, m):
            rows.append([str(m), audit.label, fmt(audit.lhs), fmt(audit.rhs), fmt(audit.slack), str(audit.satisfied).lower()])
            worst = audit.slack if worst is None else min(worst, audit.slack)
            if not audit.satisfied:
                failures.append((m, audit))
    path = out / f"{scenario.name}_audit.csv"
    write_csv(path, ["collision", "label", "lhs", "rhs", "slack", "satisfied"], rows)

    report.progress("AUDIT: collision 1 resource trajectory (stage, spin, dE_R, I(S:R), C)")
    for row in resource_trajectory(traj, 1):
        spin = "-" if row.spin is None else str(row.spin + 1)
        report.progress(
            f"AUDIT:   {row.stage} S{spin} dE_R={fmt(row.bath_gain)} I={fmt(row.mutual_information)} C={fmt(row.coherence)}"
        )

    law = heat_direction_violations(traj) if cfg.variant == "cascade" else global_heat_direction_violations(traj)
    report.progress(f"AUDIT: heat-direction law checked={law.checked} skipped={law.skipped} violations={len(law.violations)}")

    for m, audit in failures:
        report.result(f"AUDIT: ❌ collision {m} {audit.label} slack={fmt(audit.slack)}")
    if failures:
        raise AuditFailure(f"{len(failures)} of {len(rows)} inequalities failed; see {path}")
    report.result(f"AUDIT: ✅ {len(rows)} inequalities hold (min slack {fmt(worst)}) -> {path}")
    return 0


# =========================
# COMPARE
# =========================
def cmd_compare(args, settings: Settings, report: Reporter) -> int:
    scenario = load_scenario(args.config)
    spec, coh, cfg = scenario.to_spec(), scenario.to_coherence(), scenario.to_collision()
    out = _out_dir(args, settings)
    report.progress(f"COMPARE: {scenario.name} tau={cfg.tau} vs tau/2 at fixed g^2 tau")

    rep = compare_engines(spec, coh, cfg, steps_per_collision=scenario.lindblad.steps_per_collision)
    rows = []
    for key in rep.coarse:
        fine = rep.fine[key]
        ratio = rep.coarse[key] / fine if fine > RATIO_FLOOR else None
        rows.append([key, fmt(rep.coarse[key]), fmt(fine), fmt(ratio)])
    rows.append(["max", fmt(rep.max_coarse), fmt(rep.max_fine), fmt(rep.ratio)])
    path = out / f"{scenario.name}_compare.csv"
    write_csv(path, ["observable", "discrepancy_tau", "discrepancy_tau_half", "ratio"], rows)

    ratio = "n/a" if rep.ratio is None else fmt(rep.ratio)
    report.result(f"COMPARE: ✅ max discrepancy {fmt(rep.max_coarse)} -> {fmt(rep.max_fine)} (ratio {ratio}) -> {path}")
    return 0


# =========================
# TOY
# =========================
def _toy_params(items: Optional[List[str]]) -> Dict[str, float]:
    params: Dict[str, float] = {}
    for item in items or []:
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise ConfigValidationError(f"Toy parameters look like key=value, got '{item}'")
        try:
            params[key] = float(value)
        except ValueError as e:
            raise ConfigValidationError(f"Toy parameter {key} must be a number, got '{value}'") from e
    return params


def cmd_toy(args, settings: Settings, report: Reporter) -> int:
    result = run_toy(args.name, _toy_params(args.param))
    report.result(f"TOY: {result.label}")
    report.result(f"TOY:   analytic  = {fmt(result.analytic)}")
    report.result(f"TOY:   simulated = {fmt(result.simulated)}")
    report.result(f"TOY:   abs_error = {fmt(result.abs_error)}")
    for key in sorted(result.extras):
        report.result(f"TOY:   {key} = {fmt(result.extras[key])}")

    if args.out:
        out = _out_dir(args, settings)
        extras = sorted(result.extras)
        write_csv(
            out / f"toy_{args.name}.csv",
            ["label", "analytic", "simulated", "abs_error"] + extras,
            [[result.label, fmt(result.analytic), fmt(result.simulated), fmt(result.abs_error)] + [fmt(result.extras[k]) for k in extras]],
        )
    return 0


# =========================
# ENTRY POINT
# =========================
def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="Scenario file (JSON)")
    common.add_argument("--out", default=None, help="Output directory (default: CASCADE_OUT_DIR or ./out)")
    common.add_argument("--engine", choices=["collision", "lindblad", "both"], default=None)
    common.add_argument("--seed", type=int, default=0, help="Reserved; the dynamics are deterministic")
    common.add_argument("--quiet", action="store_true")

    parser = argparse.ArgumentParser(prog="cascade_cli", description="Cascade collision-model heat transport")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="Run one trajectory and write CSV + summary")
    sweep = sub.add_parser("sweep", parents=[common], help="Sweep one parameter")
    sweep.add_argument("--axis", choices=SWEEP_AXES, required=True)
    sweep.add_argument("--values", required=True, help="Comma-separated values; orders as 0-1-2 or 'all'")
    sub.add_parser("audit", parents=[common], help="Check every resource inequality")
    sub.add_parser("compare", parents=[common], help="Collision engine vs master equation")

    toy = sub.add_parser("toy", help="Run a closed-form toy model")
    toy.add_argument("name", choices=sorted(TOYS))
    toy.add_argument("--param", action="append", help="key=value, repeatable")
    toy.add_argument("--out", default=None)
    toy.add_argument("--quiet", action="store_true")
    return parser


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "audit": cmd_audit, "compare": cmd_compare, "toy": cmd_toy}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    report = Reporter(quiet=args.quiet)
    try:
        settings = load_settings()
        return COMMANDS[args.command](args, settings, report)
    except (CascadeError, ValueError) as e:
        print(f"CASCADE: ❌ {type(e).__name__}: {e}", file=sys.stderr, flush=True)
        return exit_code_for(e)


if __name__ == "__main__":
    sys.exit(main())

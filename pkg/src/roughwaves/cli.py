"""Command-line front end: classify | profile | family | simulate | sweep.

Every command reads one scenario file (`key = value` lines) and writes
its artifacts into the scenario's output directory: CSV data, a gnuplot
script, a rendered PNG, and a JSON manifest accounting for every file.
Exit codes: 0 success, 2 configuration problem, 3 numerical failure; on
failure a single machine-readable `error: <Type>: <message>` line goes
to stderr.
"""
from __future__ import annotations

import argparse
import dataclasses
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .errors import ConfigError, DomainError, RoughwavesError
from .io_csv import validate_manifest, write_manifest, write_profile_csv, write_snapshot_csv
from .model import (
    CaseTag,
    FluxLevelSet,
    RoadCondition,
    case_states,
    classify,
    flux,
    make_kernel,
    make_velocity,
    solve_flux_level,
)
from .plots import emit_plot_script, render_profile_png, render_snapshots_png
from .profile_m1 import (
    MarchReport,
    Profile,
    admissible_trace_range,
    build_profile_family,
    build_unique_profile,
)
from .profile_m2 import build_profile_family_m2, build_unique_profile_m2, kink_certificate
from .scenario import Scenario, parse_scenario
from .simulator import riemann_initial, run

_WORKERS_ENV = "ROUGHWAVES_WORKERS"
_SWEEP_LABELS = tuple(f"{letter}{digit}" for letter in "ABCD" for digit in "1234")


def _worker_count() -> int:
    raw = os.environ.get(_WORKERS_ENV)
    if raw is None:
        return min(4, os.cpu_count() or 1)
    try:
        n = int(raw)
    except ValueError:
        n = 0
    if n < 1:
        raise ConfigError(
            f"{_WORKERS_ENV} must be a positive integer, got {raw!r}", key=_WORKERS_ENV
        )
    return n


def _toolchain(s: Scenario):
    cond = RoadCondition(s.kappa_minus, s.kappa_plus)
    return cond, make_velocity(s.velocity), make_kernel(s.kernel, s.h)


def _resolve(s: Scenario, cond: RoadCondition, v):
    """Asymptotic states, level set, and case tag for a scenario."""
    if s.rho_minus is not None:
        rm, rp = s.rho_minus, s.rho_plus
        tag = classify(cond, rm, rp, v, model=s.model)
        lset = solve_flux_level(flux(cond.kappa_minus, rm, v), cond, v)
    else:
        lset = solve_flux_level(s.fbar, cond, v)
        rm, rp = case_states(s.case, lset)
        tag = classify(cond, rm, rp, v, model=s.model)
    return rm, rp, lset, tag


def _default_traces(tag: CaseTag, lset: FluxLevelSet, cond: RoadCondition, count: int) -> list[float]:
    """Evenly spaced interior points of the admissible trace range."""
    lo, hi, _, _ = admissible_trace_range(tag, lset, cond)
    span = hi - lo
    return [lo + span * (k + 1) / (count + 1) for k in range(count)]


def _build_members(tag, lset, cond, v, kern, dx, x_min, x_max, traces, report) -> list[Profile]:
    if tag.multiplicity == "none":
        raise DomainError(
            f"case {tag.label} admits no stationary profile; use the simulate command"
        )
    if tag.multiplicity == "unique":
        if tag.model == "M1":
            return [build_unique_profile(tag, lset, cond, v, kern, dx, x_min, x_max, report=report)]
        return [build_unique_profile_m2(tag, lset, cond, v, kern, dx, x_min, x_max, report=report)]
    if tag.model == "M1":
        return build_profile_family(tag, lset, cond, v, kern, dx, x_min, x_max, traces, report=report)
    return build_profile_family_m2(tag, lset, cond, v, kern, dx, x_min, x_max, traces, report=report)


def _non_crossing(members: list[Profile]) -> bool:
    for a, b in zip(members, members[1:]):
        if not np.all(a.grid.values < b.grid.values):
            return False
        ta, tb = a.grid.left_trace_at_zero, b.grid.left_trace_at_zero
        if ta is not None and tb is not None and not ta < tb:
            return False
    return True


def _write_profile_set(members, tag, cond, v, kern, out_dir, report):
    """CSV per member + residual report + plot script + PNG; returns paths."""
    paths = []
    for k, p in enumerate(members):
        kink = kink_certificate(p, cond, v, kern) if p.model == "M2" else None
        name = "profile.csv" if len(members) == 1 else f"member_{k}.csv"
        paths.append(write_profile_csv(p, os.path.join(out_dir, name), kink=kink))
    ok = _non_crossing(members)
    lines = [
        f"member {k}: trace_minus={p.trace_minus!r} trace_plus={p.trace_plus!r} "
        f"residual_sup={p.residual_sup!r}"
        for k, p in enumerate(members)
    ]
    lines.append(
        f"march: fallback_nodes={len(report.fallback_nodes)} "
        f"repaired_nodes={report.repaired_nodes} max_repair={report.max_repair!r}"
    )
    lines.append(f"non-crossing: {'true' if ok else 'false'}")
    rep_path = os.path.join(out_dir, "residuals.txt")
    with open(rep_path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    script = emit_plot_script(paths, "profile", os.path.join(out_dir, "plot.gp"), title=tag.label)
    png = render_profile_png(paths, os.path.join(out_dir, "figure.png"), title=tag.label)
    return paths, rep_path, script, png, ok


def _write_snapshot_set(snaps, tag, out_dir):
    paths = [
        write_snapshot_csv(state, os.path.join(out_dir, f"snapshot_{k:02d}.csv"))
        for k, state in enumerate(snaps)
    ]
    script = emit_plot_script(paths, "snapshots", os.path.join(out_dir, "plot.gp"), title=tag.label)
    png = render_snapshots_png(paths, os.path.join(out_dir, "figure.png"), title=tag.label)
    return paths, script, png


def _snapshot_schedule(s: Scenario) -> tuple[float, ...]:
    times = s.snapshot_times or tuple(s.t_final * f for f in (0.25, 0.5, 0.75, 1.0))
    return tuple(sorted(set((0.0,) + tuple(times))))


def _simulate_case(s: Scenario, rm: float, rp: float, model, cond, v, kern):
    initial = riemann_initial(rm, rp, s.dx, x_min=s.x_min, x_max=s.x_max, scheme=s.scheme, cfl=s.cfl)
    return run(initial, model, cond, v, kern, s.t_final, snapshot_times=_snapshot_schedule(s))


def _sim_diagnostics(snaps) -> dict:
    final = snaps[-1]
    return {
        "t_final": final.t,
        "snapshots": len(snaps),
        "mass_initial": snaps[0].mass(),
        "mass_final": final.mass(),
        "min": float(final.cells.min()),
        "max": float(final.cells.max()),
    }


def _rel_all(out_dir: str, paths) -> list[str]:
    return [os.path.relpath(p, start=out_dir) for p in paths]


# ---------------------------------------------------------------------------
# commands


def _cmd_classify(s: Scenario, quiet: bool) -> int:
    cond, v, _ = _toolchain(s)
    _, _, lset, tag = _resolve(s, cond, v)
    print(f"{tag.label} | {tag.multiplicity} | {'stable' if tag.stable else 'unstable'}")
    print(
        f"level set: fbar={lset.fbar!r} rho1={lset.rho1!r} rho2={lset.rho2!r} "
        f"rho3={lset.rho3!r} rho4={lset.rho4!r}"
    )
    return 0


def _cmd_profile(s: Scenario, quiet: bool) -> int:
    cond, v, kern = _toolchain(s)
    _, _, lset, tag = _resolve(s, cond, v)
    report = MarchReport()
    if tag.multiplicity == "infinite":
        traces = [s.traces[0]] if s.traces else _default_traces(tag, lset, cond, 1)
    else:
        traces = []
    members = _build_members(tag, lset, cond, v, kern, s.dx, s.x_min, s.x_max, traces, report)
    os.makedirs(s.out_dir, exist_ok=True)
    paths, rep, script, png, _ = _write_profile_set(members, tag, cond, v, kern, s.out_dir, report)
    prof = members[0]
    diagnostics = {
        "case": tag.label,
        "trace_minus": prof.trace_minus,
        "trace_plus": prof.trace_plus,
        "residual_sup": prof.residual_sup,
    }
    write_manifest(
        os.path.join(s.out_dir, "manifest.json"),
        "profile",
        s,
        _rel_all(s.out_dir, paths + [rep, script, png]),
        diagnostics,
    )
    if not quiet:
        print(
            f"profile {tag.label}: trace {prof.trace_plus!r}, "
            f"residual {prof.residual_sup:.3e} -> {s.out_dir}"
        )
    return 0


def _cmd_family(s: Scenario, quiet: bool) -> int:
    cond, v, kern = _toolchain(s)
    _, _, lset, tag = _resolve(s, cond, v)
    report = MarchReport()
    if tag.multiplicity == "infinite":
        traces = list(s.traces) if s.traces else _default_traces(tag, lset, cond, 5)
    else:
        traces = []
    members = _build_members(tag, lset, cond, v, kern, s.dx, s.x_min, s.x_max, traces, report)
    os.makedirs(s.out_dir, exist_ok=True)
    paths, rep, script, png, ok = _write_profile_set(members, tag, cond, v, kern, s.out_dir, report)
    diagnostics = {
        "case": tag.label,
        "members": len(members),
        "max_residual": max(p.residual_sup for p in members),
        "non_crossing": ok,
    }
    write_manifest(
        os.path.join(s.out_dir, "manifest.json"),
        "family",
        s,
        _rel_all(s.out_dir, paths + [rep, script, png]),
        diagnostics,
    )
    if not quiet:
        print(f"family {tag.label}: {len(members)} members -> {s.out_dir}")
    print(f"non-crossing: {'true' if ok else 'false'}")
    return 0


def _cmd_simulate(s: Scenario, quiet: bool) -> int:
    cond, v, kern = _toolchain(s)
    rm, rp, _, tag = _resolve(s, cond, v)
    snaps = _simulate_case(s, rm, rp, s.model, cond, v, kern)
    os.makedirs(s.out_dir, exist_ok=True)
    paths, script, png = _write_snapshot_set(snaps, tag, s.out_dir)
    diagnostics = {"case": tag.label, **_sim_diagnostics(snaps)}
    write_manifest(
        os.path.join(s.out_dir, "manifest.json"),
        "simulate",
        s,
        _rel_all(s.out_dir, paths + [script, png]),
        diagnostics,
    )
    if not quiet:
        print(f"simulate {tag.label}: {len(snaps)} snapshots to t={snaps[-1].t:.4g} -> {s.out_dir}")
    return 0


def _sweep_case(label: str, s: Scenario, hi: float, lo: float, fbar: float, out_root: str):
    """One case directory of the sweep; returns (relative paths, diagnostics)."""
    model = "M1" if label[0] in ("A", "B") else "M2"
    cond = RoadCondition(hi, lo) if label[0] in ("A", "C") else RoadCondition(lo, hi)
    v = make_velocity(s.velocity)
    kern = make_kernel(s.kernel, s.h)
    lset = solve_flux_level(fbar, cond, v)
    rm, rp = case_states(label, lset)
    tag = classify(cond, rm, rp, v, model=model)

    case_dir = os.path.join(out_root, label)
    os.makedirs(case_dir, exist_ok=True)
    paths = []
    for name, content in (
        ("multiplicity", tag.multiplicity),
        ("stability", "stable" if tag.stable else "unstable"),
    ):
        marker = os.path.join(case_dir, name)
        with open(marker, "w") as fh:
            fh.write(content + "\n")
        paths.append(marker)
    diagnostics = {"multiplicity": tag.multiplicity, "stable": tag.stable}

    if tag.multiplicity == "none":
        marker = os.path.join(case_dir, "no_stationary_profile")
        with open(marker, "w") as fh:
            fh.write("no stationary profile exists for this case\n")
        paths.append(marker)
        snaps = _simulate_case(s, rm, rp, model, cond, v, kern)
        csvs, script, png = _write_snapshot_set(snaps, tag, case_dir)
        paths += csvs + [script, png]
        diagnostics.update(_sim_diagnostics(snaps))
    else:
        report = MarchReport()
        traces = _default_traces(tag, lset, cond, 3) if tag.multiplicity == "infinite" else []
        members = _build_members(tag, lset, cond, v, kern, s.dx, s.x_min, s.x_max, traces, report)
        csvs, rep, script, png, ok = _write_profile_set(members, tag, cond, v, kern, case_dir, report)
        paths += csvs + [rep, script, png]
        diagnostics.update(
            members=len(members),
            max_residual=max(p.residual_sup for p in members),
            non_crossing=ok,
        )
    return _rel_all(out_root, paths), diagnostics


def _cmd_sweep(s: Scenario, quiet: bool) -> int:
    hi = max(s.kappa_minus, s.kappa_plus)
    lo = min(s.kappa_minus, s.kappa_plus)
    if hi == lo:
        raise ConfigError("sweep needs two distinct speed factors", key="kappa_minus")
    v = make_velocity(s.velocity)
    fbar = s.fbar if s.fbar is not None else flux(s.kappa_minus, s.rho_minus, v)
    os.makedirs(s.out_dir, exist_ok=True)

    with ThreadPoolExecutor(max_workers=_worker_count()) as pool:
        futures = {label: pool.submit(_sweep_case, label, s, hi, lo, fbar, s.out_dir) for label in _SWEEP_LABELS}
        artifacts: list[str] = []
        cases: dict[str, dict] = {}
        for label in _SWEEP_LABELS:
            rels, diagnostics = futures[label].result()
            artifacts += rels
            cases[label] = diagnostics
            if not quiet:
                stability = "stable" if diagnostics["stable"] else "unstable"
                print(f"{label}: {diagnostics['multiplicity']} | {stability} | {len(rels)} artifacts")

    manifest = write_manifest(
        os.path.join(s.out_dir, "manifest.json"), "sweep", s, artifacts, {"cases": cases}
    )
    validate_manifest(manifest)
    if not quiet:
        print(f"sweep: 16 cases, {len(artifacts)} artifacts -> {s.out_dir}")
    return 0


_COMMANDS = {
    "classify": (_cmd_classify, "print the case tag and flux level set for a scenario"),
    "profile": (_cmd_profile, "build one stationary profile and write CSV + figure"),
    "family": (_cmd_family, "build a profile family and check the non-crossing order"),
    "simulate": (_cmd_simulate, "run the finite-volume scheme and write snapshots"),
    "sweep": (_cmd_sweep, "run all 16 canonical cases into a case atlas directory"),
}


def _one_line(err: Exception) -> str:
    return " ".join(str(err).split())


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="roughwaves",
        description="Stationary profiles and Riemann simulations for nonlocal "
        "traffic models with a speed-limit jump at x = 0.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    for name, (_, help_text) in _COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="scenario file (key = value lines)")
        p.add_argument("--out", default=None, help="output directory (overrides the scenario)")
        p.add_argument("--dx", type=float, default=None, help="grid spacing override")
        p.add_argument("--quiet", action="store_true", help="suppress progress output")
    args = parser.parse_args(argv)

    try:
        try:
            text = open(args.config).read()
        except OSError as err:
            raise ConfigError(f"cannot read config {args.config}: {err.strerror}") from None
        s = parse_scenario(text)
        if args.out is not None:
            s = dataclasses.replace(s, out_dir=args.out)
        if args.dx is not None:
            s = dataclasses.replace(s, dx=args.dx)
        return _COMMANDS[args.command][0](s, args.quiet)
    except ConfigError as err:
        print(f"error: {type(err).__name__}: {_one_line(err)}", file=sys.stderr)
        return 2
    except RoughwavesError as err:
        print(f"error: {type(err).__name__}: {_one_line(err)}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())

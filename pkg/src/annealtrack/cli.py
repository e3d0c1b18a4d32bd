"""Command-line surface.

Subcommands: ``scenario`` (synthetic radar data), ``mwis`` (solve a graph
file with any backend), ``track`` (run the tracker, emit report + plot
CSVs), ``timing`` (hardware run-time estimates and histograms), ``sweep``
(success probability vs anneal time) and ``rerun`` (replay a run manifest).

Every command writes a run manifest next to its outputs with the full
argument vector; outputs carry no timestamps, so replaying a manifest into
a fresh directory reproduces them byte for byte.  Exit codes: 0 success,
2 usage, 3 input data, 4 capacity, 5 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import tempfile
import time

import numpy as np

from . import __version__
from .dynamics import AnnealConfig, anneal
from .errors import (AnnealTrackError, CapacityError, ConfigurationError,
                     InputError, NumericalFailure)
from .graph import drop_nonpositive, load_graph, mwis_exact
from .ising import Schedule
from .mht import (Scenario, ScenarioConfig, TrackerConfig, generate_scenario,
                  make_backend, run_tracker, track_error)
from .sqa import QmcConfig, sqa_anneal
from .timing import (TimingModel, histogram_to_csv, runtime_histogram,
                     total_runtime)

EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_CAPACITY = 4
EXIT_NUMERICAL = 5


def _atomic_write(path: str, data: str) -> None:
    directory = os.path.dirname(os.path.abspath(path)) or "."
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_manifest(args: argparse.Namespace, argv: list[str],
                    artifacts: list[str], started: float) -> None:
    out = getattr(args, "out", None) or artifacts[0]
    manifest_path = os.path.splitext(out)[0] + ".manifest.json"
    payload = {
        "command": args.command,
        "argv": argv,
        "config": {k: v for k, v in vars(args).items()
                   if k not in ("command", "func") and not callable(v)},
        "artifacts": [os.path.abspath(a) for a in artifacts],
        "version": __version__,
        "wall_clock_s": time.time() - started,
    }
    _atomic_write(manifest_path, json.dumps(payload, sort_keys=True, indent=1))


def _emit(args, text_summary: str, payload: dict) -> None:
    if getattr(args, "json", False):
        print(json.dumps(payload, sort_keys=True))
    else:
        print(text_summary)


def _csv_text(header: list[str], rows: list[list]) -> str:
    import io
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


# ---------------------------------------------------------------------------
# scenario
# ---------------------------------------------------------------------------

def cmd_scenario(args, argv) -> int:
    region = tuple(float(v) for v in args.region.split(","))
    if len(region) != 4:
        raise InputError("--region takes x0,y0,x1,y1")
    cfg = ScenarioConfig(n_targets=args.targets, n_scans=args.scans,
                         dt=args.dt, sigma_m=args.sigma, p_detect=args.pd,
                         lambda_c=args.lambda_c, region=region, seed=args.seed)
    scenario = generate_scenario(cfg)
    _atomic_write(args.out, scenario.to_json())
    n_meas = sum(len(m) for m in scenario.measurements)
    _emit(args, f"wrote scenario with {args.targets} target(s), "
                f"{args.scans} scans, {n_meas} measurements -> {args.out}",
          {"out": args.out, "n_measurements": n_meas})
    return 0


# ---------------------------------------------------------------------------
# mwis
# ---------------------------------------------------------------------------

def cmd_mwis(args, argv) -> int:
    g = load_graph(args.graph)
    if args.backend == "exact":
        sub, idx_map = drop_nonpositive(g)
        sel, weight = mwis_exact(sub)
        chosen = sorted(idx_map[v] for v in sel)
        stats = {"backend": "exact", "n": sub.n}
    elif args.backend == "anneal":
        sub, idx_map = drop_nonpositive(g)
        cfg = AnnealConfig(schedule=Schedule.smooth(args.tf), shots=args.shots,
                           seed=args.seed, noise_enabled=args.noise == "on")
        res = anneal(sub, cfg)
        chosen = sorted(idx_map[v] for v in res.best_set)
        weight = res.best_weight
        stats = {"backend": "anneal", "n": sub.n, "t_f": args.tf,
                 "shots": args.shots, "p_ground": res.p_ground,
                 "success_fraction": res.success_fraction}
    elif args.backend == "sqa":
        sub, idx_map = drop_nonpositive(g)
        res = sqa_anneal(sub, QmcConfig(seed=args.seed, restarts=args.shots))
        chosen = sorted(idx_map[v] for v in res.best_set)
        weight = res.best_weight
        stats = {"backend": "sqa", "n": sub.n,
                 "n_repaired": res.info["n_repaired"]}
    else:
        raise InputError(f"unknown backend '{args.backend}'")
    payload = {"set": chosen, "weight": weight, "stats": stats}
    _atomic_write(args.out, json.dumps(payload, sort_keys=True, indent=1))
    _emit(args, f"MWIS weight {weight:.6g}, set {chosen} -> {args.out}", payload)
    _write_manifest(args, argv, [args.out], args._started)
    return 0


# ---------------------------------------------------------------------------
# track
# ---------------------------------------------------------------------------

def cmd_track(args, argv) -> int:
    with open(args.scenario, "r", encoding="utf-8") as fh:
        scenario = Scenario.from_json(fh.read())
    overrides = {"weight_policy": args.policy}
    if args.lambda_c is not None:
        overrides["lambda_c"] = args.lambda_c
    cfg = TrackerConfig.from_scenario(scenario, **overrides)
    backend = make_backend(args.backend, seed=args.seed) \
        if args.backend != "none" else None
    mode = args.mode if args.backend != "none" else "no-prune"
    report = run_tracker(scenario, cfg, backend or "exact", mode=mode)

    base = args.out
    report_path = base + ".report.json"
    counts_path = base + ".counts.csv"
    tracks_path = base + ".tracks.csv"
    _atomic_write(report_path, report.to_json())
    count_rows = []
    for k in range(len(report.counts)):
        surv = report.survivor_counts[k] if k < len(report.survivor_counts) else ""
        bt = report.backend_times[k] if k < len(report.backend_times) else 0.0
        count_rows.append([k, report.counts[k], surv, repr(float(bt))])
    _atomic_write(counts_path, _csv_text(
        ["scan", "n_hypotheses", "n_survivors", "backend_time_model_s"], count_rows))
    track_rows = []
    for tid, tr in enumerate(report.tracks):
        for j, (x, y) in enumerate(tr.positions):
            track_rows.append([tr.start_scan + j, tid, repr(float(x)), repr(float(y))])
    _atomic_write(tracks_path, _csv_text(["scan", "track", "x", "y"], track_rows))

    err = track_error(report, scenario)
    payload = {"report": report_path, "counts": counts_path, "tracks": tracks_path,
               "n_tracks": len(report.tracks),
               "quantum_scans": list(report.quantum_scans),
               "errors": [{k: (v if v != float("inf") else None)
                           for k, v in e.items()} for e in err]}
    _emit(args, f"tracked {len(report.tracks)} track(s); "
                f"per-target errors {payload['errors']} -> {report_path}", payload)
    _write_manifest(args, argv, [report_path, counts_path, tracks_path],
                    args._started)
    return 0


# ---------------------------------------------------------------------------
# timing
# ---------------------------------------------------------------------------

def cmd_timing(args, argv) -> int:
    artifacts = []
    if args.from_report:
        from .mht import TrackReport
        with open(args.from_report, "r", encoding="utf-8") as fh:
            report = TrackReport.from_json(fh.read())
        totals = [t for t in report.backend_times]
        if not totals:
            raise InputError("report contains no backend invocations")
        edges, counts = runtime_histogram(totals)
        out = args.out or "timing_histogram.csv"
        rows = [[repr(float(edges[i])), repr(float(edges[i + 1])), int(counts[i])]
                for i in range(len(counts))]
        _atomic_write(out, _csv_text(["bin_low_s", "bin_high_s", "count"], rows))
        artifacts.append(out)
        payload = {"histogram": out, "invocations": len(totals),
                   "total_s": float(sum(totals))}
        _emit(args, f"histogram over {len(totals)} invocations -> {out}", payload)
    else:
        model = TimingModel(reset_mode=args.reset,
                            parallel_readout=args.parallel_readout,
                            n_qubits=args.qubits, t_anneal=args.anneal_us * 1e-6,
                            shots=args.shots)
        est = total_runtime(model)
        payload = est.as_dict()
        if args.out:
            _atomic_write(args.out, json.dumps(payload, sort_keys=True, indent=1))
            artifacts.append(args.out)
        _emit(args, f"total {est.total:.6g} s over {est.shots} shots; "
                    f"dominant phase: {est.dominant_phase} "
                    f"({est.shares[est.dominant_phase]:.1%})", payload)
    if artifacts:
        _write_manifest(args, argv, artifacts, args._started)
    return 0


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------

def cmd_sweep(args, argv) -> int:
    g = load_graph(args.graph)
    sub, idx_map = drop_nonpositive(g)
    try:
        grid = [float(v) for v in args.tf_grid.split(",") if v.strip()]
    except ValueError as exc:
        raise InputError(f"bad --tf-grid: {exc}") from exc
    if not grid:
        raise InputError("empty --tf-grid")
    rows = []
    for tf in grid:
        cfg = AnnealConfig(schedule=Schedule.smooth(tf), shots=args.shots,
                           seed=args.seed, noise_enabled=args.noise == "on")
        res = anneal(sub, cfg)
        rows.append([repr(float(tf)),
                     repr(float(res.success_fraction))
                     if res.success_fraction is not None else "",
                     repr(float(res.p_ground)) if res.p_ground is not None else "",
                     repr(float(res.best_weight))])
    _atomic_write(args.out, _csv_text(
        ["t_f", "success_probability", "p_ground", "best_weight"], rows))
    payload = {"out": args.out, "points": len(rows)}
    _emit(args, f"swept {len(rows)} anneal times -> {args.out}", payload)
    _write_manifest(args, argv, [args.out], args._started)
    return 0


# ---------------------------------------------------------------------------
# rerun
# ---------------------------------------------------------------------------

def cmd_rerun(args, argv) -> int:
    with open(args.manifest, "r", encoding="utf-8") as fh:
        try:
            manifest = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InputError(f"line {exc.lineno}: invalid manifest: {exc.msg}") from exc
    saved_argv = manifest.get("argv")
    if not saved_argv:
        raise InputError("manifest has no argv to replay")
    if args.out_override:
        saved_argv = list(saved_argv)
        if "--out" in saved_argv:
            saved_argv[saved_argv.index("--out") + 1] = args.out_override
        else:
            saved_argv += ["--out", args.out_override]
    return main(saved_argv)


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="annealtrack",
        description="Quantum-annealing emulation with an MHT tracking front end")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("scenario", help="generate a synthetic radar scenario")
    p.add_argument("--targets", type=int, default=2)
    p.add_argument("--scans", type=int, default=20)
    p.add_argument("--lambda-c", type=float, default=1e-5, dest="lambda_c")
    p.add_argument("--pd", type=float, default=0.9)
    p.add_argument("--sigma", type=float, default=5.0)
    p.add_argument("--dt", type=float, default=1.0)
    p.add_argument("--region", type=str, default="0,0,1000,1000")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=str, required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_scenario)

    p = sub.add_parser("mwis", help="solve an MWIS graph file")
    p.add_argument("--graph", type=str, required=True)
    p.add_argument("--backend", choices=["exact", "anneal", "sqa"], default="exact")
    p.add_argument("--tf", type=float, default=50e-6)
    p.add_argument("--shots", type=int, default=100)
    p.add_argument("--noise", choices=["on", "off"], default="off")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=str, default="mwis_solution.json")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_mwis)

    p = sub.add_parser("track", help="run the tracker over a scenario file")
    p.add_argument("--scenario", type=str, required=True)
    p.add_argument("--backend", choices=["exact", "anneal", "sqa", "none"],
                   default="exact")
    p.add_argument("--mode", choices=["sequential", "single-step"],
                   default="sequential")
    p.add_argument("--lambda-c", type=float, default=None, dest="lambda_c",
                   help="override the scoring clutter density")
    p.add_argument("--policy", choices=["drop", "shift"], default="drop")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=str, required=True,
                   help="output prefix (writes .report.json, .counts.csv, .tracks.csv)")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("timing", help="hardware run-time estimate or histogram")
    p.add_argument("--reset", choices=["active", "passive"], default="active")
    p.add_argument("--parallel-readout", dest="parallel_readout",
                   action="store_true", default=True)
    p.add_argument("--serial-readout", dest="parallel_readout",
                   action="store_false")
    p.add_argument("--shots", type=int, default=1000)
    p.add_argument("--anneal-us", type=float, default=100.0, dest="anneal_us")
    p.add_argument("--qubits", type=int, default=10)
    p.add_argument("--from-report", type=str, default=None, dest="from_report")
    p.add_argument("--out", type=str, default=None)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_timing)

    p = sub.add_parser("sweep", help="success probability vs anneal time")
    p.add_argument("--graph", type=str, required=True)
    p.add_argument("--tf-grid", type=str, required=True, dest="tf_grid",
                   help="comma-separated anneal times in seconds")
    p.add_argument("--noise", choices=["on", "off"], default="on")
    p.add_argument("--shots", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=str, default="sweep.csv")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("rerun", help="replay a run manifest")
    p.add_argument("manifest", type=str)
    p.add_argument("--out", type=str, default=None, dest="out_override")
    p.set_defaults(func=cmd_rerun)
    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = _build_parser()
    args = parser.parse_args(argv)
    args._started = time.time()
    try:
        rc = args.func(args, argv)
        if args.command == "scenario":
            _write_manifest(args, argv, [args.out], args._started)
        return rc
    except (InputError, ConfigurationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except CapacityError as exc:
        print(f"capacity error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except (NumericalFailure,) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())

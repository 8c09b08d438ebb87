"""Command-line entry point.

Four commands share one configuration pipeline (defaults <- preset <-
scenario file <- --set overrides <- --seed):

  sbfc simulate   run one scenario; write trace.csv, metrics.txt, manifest.json
  sbfc tune       run the gain tuner; write best_gains.yaml, cost_history.csv
  sbfc sweep      run every sweep cell; write per-cell outputs + summary.csv
  sbfc metrics    recompute metrics from an existing trace (+ manifest)

Exit codes: 0 success, 2 configuration error, 3 numerical failure
(divergence or singular inertia), 4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

from .config import (apply_override, build_scenario, build_tuner, emit_config,
                     load_config, merge_config, preset_config, preset_names)
from .engine import compute_metrics, run_report
from .errors import (NumericalDivergence, ParseError, SbfcError,
                     SingularInertia, ValidationError)
from .jaya import tune_episodic, tune_online, tune_surrogate
from .traceio import (build_manifest, metrics_to_text, read_trace_csv,
                      sha256_of, write_manifest, write_rows_csv,
                      write_trace_csv)

__all__ = ["main", "build_parser"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_IO = 4


def build_parser():
    parser = argparse.ArgumentParser(
        prog="sbfc",
        description="Fault-tolerant manipulator control simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(sp):
        sp.add_argument("--scenario", metavar="PATH", default=None,
                        help="scenario YAML file (empty file = defaults)")
        sp.add_argument("--preset", metavar="NAME", default=None,
                        help=f"named preset: {', '.join(preset_names())}")
        sp.add_argument("--out", metavar="DIR", default="sbfc_out",
                        help="output directory (default: sbfc_out)")
        sp.add_argument("--seed", metavar="N", type=int, default=None,
                        help="override both sim.seed and tuner.seed")
        sp.add_argument("--set", dest="overrides", metavar="KEY=VALUE",
                        action="append", default=[],
                        help="dotted config override, repeatable "
                             "(e.g. --set sim.dt=5.0e-5)")

    for name, blurb in (("simulate", "run one closed-loop scenario"),
                        ("tune", "auto-tune controller gains"),
                        ("sweep", "run a grid of scenario cells")):
        add_common(sub.add_parser(name, help=blurb))

    mp = sub.add_parser("metrics", help="recompute metrics from a trace CSV")
    mp.add_argument("--trace", metavar="PATH", required=True)
    mp.add_argument("--manifest", metavar="PATH", default=None,
                    help="manifest.json for band/onsets "
                         "(default: next to the trace)")
    mp.add_argument("--out", metavar="DIR", default=None,
                    help="also write metrics.txt here")
    return parser


def _resolve_config(args):
    cfg = {}
    if args.preset is not None:
        cfg = merge_config(cfg, preset_config(args.preset))
    if args.scenario is not None:
        cfg = merge_config(cfg, load_config(args.scenario))
    for assignment in args.overrides:
        apply_override(cfg, assignment)
    if args.seed is not None:
        cfg = merge_config(cfg, {"sim": {"seed": int(args.seed)},
                                 "tuner": {"seed": int(args.seed)}})
    return cfg


def _ensure_outdir(path):
    os.makedirs(path, exist_ok=True)
    if not os.access(path, os.W_OK):
        raise OSError(f"output directory {path} is not writable")


def _write_outputs(out_dir, writers):
    """Write files via (name, writer) pairs, then hash them."""
    hashes = {}
    for name, writer in writers:
        path = os.path.join(out_dir, name)
        writer(path)
        hashes[name] = sha256_of(path)
    return hashes


def cmd_simulate(args):
    cfg = _resolve_config(args)
    scenario = build_scenario(cfg)
    tuner = build_tuner(cfg)
    report = run_report(scenario)
    trace = report.trace
    onsets = [ev.onset for ev in scenario.schedule.events]
    metrics = compute_metrics(trace, band=scenario.band, onsets=onsets)
    config_text = emit_config(scenario, tuner)
    _ensure_outdir(args.out)
    hashes = _write_outputs(args.out, [
        ("trace.csv", lambda p: write_trace_csv(trace, p)),
        ("metrics.txt", lambda p: _write_text(p, metrics_to_text(metrics))),
    ])
    manifest = build_manifest("simulate", config_text, scenario, hashes,
                              columns=trace.columns)
    write_manifest(manifest, os.path.join(args.out, "manifest.json"))
    print(f"wrote {args.out}/trace.csv ({len(trace)} records), "
          f"metrics.txt, manifest.json")
    sys.stdout.write(metrics_to_text(metrics))
    return EXIT_OK


def _write_text(path, text):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def _gains_yaml(values):
    from .controller import ControllerGains
    import yaml
    gains = {k: float(v)
             for k, v in zip(ControllerGains.FIELD_ORDER, values)}
    return yaml.safe_dump({"gains": gains}, sort_keys=False)


def cmd_tune(args):
    cfg = _resolve_config(args)
    scenario = build_scenario(cfg)
    tuner = build_tuner(cfg)
    config_text = emit_config(scenario, tuner)
    _ensure_outdir(args.out)
    writers = []
    if tuner.mode == "surrogate":
        result = tune_surrogate(tuner)
        best_cost = result.best.cost
        writers.append(("cost_history.csv", lambda p: write_rows_csv(
            p, result.history_columns(), result.history)))
        writers.append(("best_gains.yaml", lambda p: _write_text(
            p, _gains_yaml(result.best.values))))
    elif tuner.mode == "online":
        result = tune_online(scenario, tuner)
        best_cost = min(row[2] for row in result.history)
        writers.append(("trace.csv", lambda p: write_trace_csv(
            result.trace, p)))
        writers.append(("cost_history.csv", lambda p: write_rows_csv(
            p, ("segment", "t_start", "cost",
                *(f"gain_{i + 1}" for i in range(8))), result.history)))
        writers.append(("best_gains.yaml", lambda p: _write_text(
            p, _gains_yaml(result.gain_changes[-1][1].values))))
    else:
        result = tune_episodic(scenario, tuner)
        best_cost = result.best.cost
        writers.append(("cost_history.csv", lambda p: write_rows_csv(
            p, result.history_columns(), result.history)))
        writers.append(("best_gains.yaml", lambda p: _write_text(
            p, _gains_yaml(result.best.values))))
    if not math.isfinite(best_cost):
        print("tuning failed: every candidate was infeasible "
              "(diverged or broke the inertia solve)", file=sys.stderr)
        return EXIT_NUMERIC
    hashes = _write_outputs(args.out, writers)
    manifest = build_manifest(f"tune:{tuner.mode}", config_text, scenario,
                              hashes)
    write_manifest(manifest, os.path.join(args.out, "manifest.json"))
    print(f"tuned ({tuner.mode}); best cost {best_cost:.6g}; "
          f"wrote {args.out}/best_gains.yaml, cost_history.csv")
    return EXIT_OK


def cmd_sweep(args):
    cfg = _resolve_config(args)
    base = {k: v for k, v in cfg.items() if k != "sweep"}
    cells = cfg.get("sweep", {}).get("cells", [])
    _ensure_outdir(args.out)
    summary_cols = ("name", "status", "steady_tracking_error",
                    "convergence_time", "max_torque")
    rows = []
    for cell in cells:
        name = str(cell["name"])
        cell_dir = os.path.join(args.out, "cells", name)
        try:
            cell_cfg = merge_config(base, cell.get("config", {}))
            scenario = build_scenario(cell_cfg)
            report = run_report(scenario)
            onsets = [ev.onset for ev in scenario.schedule.events]
            metrics = compute_metrics(report.trace, band=scenario.band,
                                      onsets=onsets)
            _ensure_outdir(cell_dir)
            write_trace_csv(report.trace, os.path.join(cell_dir, "trace.csv"))
            _write_text(os.path.join(cell_dir, "metrics.txt"),
                        metrics_to_text(metrics))
            rows.append((name, "ok", metrics.steady_tracking_error,
                         metrics.convergence_time, metrics.max_torque))
        except (NumericalDivergence, SingularInertia) as exc:
            rows.append((name, f"numerical-failure: {exc}",
                         math.nan, math.nan, math.nan))
        except SbfcError as exc:
            rows.append((name, f"config-error: {exc}",
                         math.nan, math.nan, math.nan))
    write_rows_csv(os.path.join(args.out, "summary.csv"), summary_cols, rows)
    scenario = build_scenario(base)
    manifest = build_manifest("sweep", emit_config(scenario,
                                                   build_tuner(base)),
                              scenario,
                              {"summary.csv":
                               sha256_of(os.path.join(args.out,
                                                      "summary.csv"))})
    write_manifest(manifest, os.path.join(args.out, "manifest.json"))
    print(f"swept {len(rows)} cells; wrote {args.out}/summary.csv")
    return EXIT_OK


def cmd_metrics(args):
    trace = read_trace_csv(args.trace)
    band = 0.005
    onsets = ()
    manifest_path = args.manifest
    if manifest_path is None:
        candidate = os.path.join(os.path.dirname(args.trace) or ".",
                                 "manifest.json")
        manifest_path = candidate if os.path.exists(candidate) else None
    if manifest_path is not None:
        with open(manifest_path, "r", encoding="utf-8") as fh:
            manifest = json.load(fh)
        band = float(manifest.get("band", band))
        onsets = tuple(manifest.get("fault_onsets", ()))
    metrics = compute_metrics(trace, band=band, onsets=onsets)
    text = metrics_to_text(metrics)
    sys.stdout.write(text)
    if args.out is not None:
        _ensure_outdir(args.out)
        _write_text(os.path.join(args.out, "metrics.txt"), text)
    return EXIT_OK


_COMMANDS = {
    "simulate": cmd_simulate,
    "tune": cmd_tune,
    "sweep": cmd_sweep,
    "metrics": cmd_metrics,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (NumericalDivergence, SingularInertia) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ParseError, ValidationError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SbfcError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())

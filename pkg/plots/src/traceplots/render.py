"""Figure builders and the ``render`` entry point.

Four figure kinds cover the simulator's outputs: ``fault_timeline``
(per-joint authority-loss fractions with shaded fault regimes), ``cost``
(rolling tracking cost, or tuner cost history, on a log scale),
``tracking_error`` (per-joint position errors with the settling band),
and ``torque`` (applied joint torques with the configured limit lines).

Rendering is read-only over its inputs and deterministic for fixed
inputs: fixed figure geometry, fixed style, and pinned PNG metadata.
Styling aims at informational equivalence, not pixel fidelity.
"""

from __future__ import annotations

import argparse
import os
import sys

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402

from .spec import (KINDS, EmptyTrace, MissingColumn, PlotError, PlotSpec,  # noqa: E402,F401
                   SpecError, TraceFrame, load_frame, load_manifest,
                   load_spec)

__version__ = "0.1.0"

_DPI = 120
_FIGSIZE = (8.0, 4.5)
_LOG_FLOOR = 1e-12


def _frame_label(frame):
    parent = os.path.basename(os.path.dirname(os.path.abspath(frame.path)))
    return parent or os.path.basename(frame.path)


def _line_label(frame, many, suffix):
    return f"{_frame_label(frame)}: {suffix}" if many else suffix


def _build_tracking_error(frames, manifest, onsets, ax):
    many = len(frames) > 1
    for frame in frames:
        t = frame.column("t")
        names, e1 = frame.family("e1")
        for j in range(len(names)):
            ax.plot(t, e1[:, j], linewidth=1.0,
                    label=_line_label(frame, many, f"joint {j + 1}"))
    if manifest is not None and manifest.get("band") is not None:
        band = float(manifest["band"])
        ax.axhspan(-band, band, color="tab:green", alpha=0.15,
                   gid="tracking-band")
    ax.set_ylabel("position tracking error (rad)")
    ax.set_title("Tracking error")


def _build_torque(frames, manifest, onsets, ax):
    many = len(frames) > 1
    for frame in frames:
        t = frame.column("t")
        names, st = frame.family("S_T")
        for j in range(len(names)):
            ax.plot(t, st[:, j], linewidth=0.8,
                    label=_line_label(frame, many, f"joint {j + 1}"))
    limits = (manifest or {}).get("limits") or {}
    guides = sorted({float(v) for side in ("lower", "upper")
                     for v in limits.get(side, ())})
    for value in guides:
        ax.axhline(value, color="tab:red", linestyle="--", linewidth=1.2,
                   gid="torque-limit")
    ax.set_ylabel("applied joint torque (N m)")
    ax.set_title("Actuator effort")


def _build_cost(frames, manifest, onsets, ax):
    # accepts any of the documented cost sources: a trace (t, cost_window),
    # a tuner history (iteration, best_cost), an online history
    # (t_start, cost)
    many = len(frames) > 1
    x_axis = "time (s)"
    for frame in frames:
        if frame.has("cost_window"):
            x, y = frame.column("t"), frame.column("cost_window")
        elif frame.has("best_cost"):
            x, y = frame.column("iteration"), frame.column("best_cost")
            x_axis = "iteration"
        elif frame.has("cost"):
            x, y = frame.column("t_start"), frame.column("cost")
        else:
            raise MissingColumn("cost_window", frame.path)
        ax.semilogy(x, np.maximum(y, _LOG_FLOOR), linewidth=1.0,
                    label=_line_label(frame, many, "cost"))
    ax.set_ylabel("tracking cost")
    ax.set_title("Cost")
    ax.set_xlabel(x_axis)


def _build_fault_timeline(frames, manifest, onsets, ax):
    many = len(frames) > 1
    t_lo, t_hi = np.inf, -np.inf
    for frame in frames:
        t = frame.column("t")
        names, eps = frame.family("epsilon")
        for j in range(len(names)):
            ax.step(t, eps[:, j], where="post", linewidth=1.2,
                    label=_line_label(frame, many, f"joint {j + 1}"))
        t_lo = min(t_lo, float(t[0]))
        t_hi = max(t_hi, float(t[-1]))
    bounds = [t_lo] + [v for v in onsets if t_lo < v < t_hi] + [t_hi]
    for i, (a, b) in enumerate(zip(bounds, bounds[1:])):
        ax.axvspan(a, b, color="tab:blue" if i % 2 == 0 else "tab:orange",
                   alpha=0.08, gid="regime")
    ax.set_ylabel("actuation authority loss fraction")
    ax.set_ylim(-0.02, 1.02)
    ax.set_title("Fault timeline")


_BUILDERS = {
    "tracking_error": _build_tracking_error,
    "torque": _build_torque,
    "cost": _build_cost,
    "fault_timeline": _build_fault_timeline,
}


def build_figure(spec):
    """Load the spec's inputs and build (but do not save) its figure."""
    frames = [load_frame(path) for path in spec.input_csv]
    manifest = load_manifest(spec.manifest) if spec.manifest else None
    onsets = list(spec.onsets)
    if not onsets and manifest is not None:
        onsets = [float(v) for v in manifest.get("fault_onsets", ())]
    fig, ax = plt.subplots(figsize=_FIGSIZE, dpi=_DPI)
    try:
        _BUILDERS[spec.kind](frames, manifest, onsets, ax)
        for value in onsets:
            ax.axvline(value, color="0.25", linestyle=":", linewidth=1.0,
                       gid="fault-onset")
        if not ax.get_xlabel():
            ax.set_xlabel("time (s)")
        ax.grid(True, alpha=0.3)
        if ax.get_legend_handles_labels()[0]:
            ax.legend(loc="best", fontsize=8)
        fig.tight_layout()
    except BaseException:
        plt.close(fig)
        raise
    return fig


def render(spec):
    """Render one spec to its output image; returns the output path.

    All inputs are loaded and validated before anything is written, so a
    rejected spec never leaves a partial image behind.
    """
    fig = build_figure(spec)
    try:
        fig.savefig(spec.output, dpi=_DPI,
                    metadata={"Software": f"traceplots {__version__}"})
    finally:
        plt.close(fig)
    return spec.output


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="render",
        description="Render one figure from simulator trace/cost CSVs as "
                    "described by a plot-spec JSON file.")
    parser.add_argument("--spec", metavar="PATH", required=True,
                        help="plot spec JSON (kind, input_csv, output, "
                             "optional manifest and onsets)")
    args = parser.parse_args(argv)
    try:
        out = render(load_spec(args.spec))
    except PlotError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 4
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())

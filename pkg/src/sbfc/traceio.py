"""Delimited trace output, metrics text, and the run manifest.

Trace CSVs carry one header row (the normative column order) and one row
per record, every value printed with nine significant digits.  The
manifest records the fully resolved scenario (as embeddable YAML), hashes
of every emitted file, and library versions — enough to re-run the exact
simulation and compare outputs byte for byte.  Nothing in these files
depends on wall-clock time.
"""

from __future__ import annotations

import csv
import hashlib
import json
import platform
import re

import numpy as np

from .engine import Trace
from .errors import ParseError

__all__ = [
    "format_float", "write_trace_csv", "read_trace_csv",
    "metrics_to_text", "write_rows_csv", "build_manifest",
    "write_manifest", "sha256_of",
]


def format_float(v):
    """Nine significant digits; plain notation where possible."""
    return f"{float(v):.9g}"


def write_trace_csv(trace, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(trace.columns) + "\n")
        for row in trace.data:
            fh.write(",".join(format_float(v) for v in row) + "\n")


def read_trace_csv(path):
    """Read a trace CSV back into a Trace; joint count from the header."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header:
            raise ParseError(f"trace file {path} has no header row")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                rows.append([float(x) for x in row])
            except ValueError as exc:
                raise ParseError(
                    f"trace file {path}:{lineno}: {exc}") from exc
    n = sum(1 for c in header if re.fullmatch(r"q_\d+", c))
    if n == 0:
        raise ParseError(
            f"trace file {path} has no q_<i> columns; got {header[:5]}...")
    data = np.array(rows, dtype=float).reshape(len(rows), len(header))
    return Trace(columns=tuple(header), data=data, n=n)


def metrics_to_text(metrics):
    lines = [
        f"steady_tracking_error = {metrics.steady_tracking_error!r}",
        f"convergence_time = {metrics.convergence_time!r}",
        f"max_torque = {metrics.max_torque!r}",
        f"envelope_alpha = {metrics.envelope_alpha!r}",
        f"envelope_beta = {metrics.envelope_beta!r}",
        f"envelope_mu = {metrics.envelope_mu!r}",
        f"band = {metrics.band!r}",
        "regime_convergence_times = "
        + ", ".join(repr(v) for v in metrics.regime_convergence_times),
    ]
    return "\n".join(lines) + "\n"


def write_rows_csv(path, columns, rows):
    """Generic numeric CSV with the same nine-significant-digit format."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([v if isinstance(v, str) else format_float(v)
                             for v in row])


def sha256_of(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _versions():
    from . import __version__
    versions = {
        "artifact": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
    }
    try:
        import numba
        versions["numba"] = numba.__version__
    except ImportError:
        versions["numba"] = None
    try:
        import yaml
        versions["pyyaml"] = yaml.__version__
    except ImportError:  # pragma: no cover - yaml is a hard dependency
        versions["pyyaml"] = None
    return versions


def build_manifest(kind, config_text, scenario, file_hashes, columns=None):
    """Assemble the manifest mapping for one command invocation."""
    return {
        "kind": kind,
        "config": config_text,
        "config_sha256": hashlib.sha256(
            config_text.encode("utf-8")).hexdigest(),
        "seed": scenario.seed,
        "band": scenario.band,
        "fault_onsets": sorted({float(ev.onset)
                                for ev in scenario.schedule.events}),
        "limits": {"upper": list(scenario.limits.upper),
                   "lower": list(scenario.limits.lower)},
        "columns": list(columns) if columns is not None else None,
        "files": dict(sorted(file_hashes.items())),
        "versions": _versions(),
    }


def write_manifest(manifest, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")

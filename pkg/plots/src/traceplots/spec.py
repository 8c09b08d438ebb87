"""Plot specifications and input loading for the figure renderer.

The renderer consumes only the simulator's documented file formats: the
trace CSV column layout (``t``, per-joint vector columns like ``e1_1``,
``S_T_2``, ``epsilon_1``, and the scalar tail), tuner cost-history CSVs,
and the run manifest JSON (torque limits, tracking band, fault onsets).
Everything it can reject raises a :class:`PlotError` subclass carrying a
human-readable message.
"""

from __future__ import annotations

import csv
import json
import re
from dataclasses import dataclass

import numpy as np

KINDS = ("fault_timeline", "cost", "tracking_error", "torque")

_SPEC_KEYS = {"kind", "input_csv", "output", "manifest", "onsets"}


class PlotError(Exception):
    """Base class for everything the renderer can reject."""


class SpecError(PlotError):
    """Malformed plot specification or unreadable/undecodable input."""


class MissingColumn(PlotError):
    """An input CSV lacks a column the plot kind requires."""

    def __init__(self, column, path):
        self.column = column
        self.path = path
        super().__init__(f"{path} is missing required column '{column}'")


class EmptyTrace(PlotError):
    """An input CSV holds no data records."""


@dataclass(frozen=True)
class PlotSpec:
    """One figure request: what to draw, from which files, to where.

    ``input_csv`` may be a single path or a list of paths; multiple inputs
    are overlaid on the same axes (labelled by their parent directory).
    ``onsets`` are the fault onset times to mark; when empty they default
    to the manifest's ``fault_onsets``.
    """

    kind: str
    input_csv: tuple
    output: str
    manifest: str | None = None
    onsets: tuple = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SpecError(f"unknown plot kind {self.kind!r}; "
                            f"expected one of: {', '.join(KINDS)}")
        paths = ((self.input_csv,) if isinstance(self.input_csv, str)
                 else tuple(self.input_csv))
        if not paths or not all(isinstance(p, str) and p for p in paths):
            raise SpecError(
                "input_csv must be a path or a non-empty list of paths")
        object.__setattr__(self, "input_csv", paths)
        if not isinstance(self.output, str) or not self.output:
            raise SpecError("output must be an image file path")
        if self.manifest is not None and not isinstance(self.manifest, str):
            raise SpecError("manifest must be a path")
        try:
            onsets = tuple(sorted(float(v) for v in self.onsets))
        except (TypeError, ValueError):
            raise SpecError(f"onsets must be a list of times in seconds, "
                            f"got {self.onsets!r}")
        if any(not np.isfinite(v) or v < 0.0 for v in onsets):
            raise SpecError(f"onsets must be finite and >= 0, "
                            f"got {list(onsets)}")
        object.__setattr__(self, "onsets", onsets)


def load_spec(path):
    """Parse a spec JSON file into a :class:`PlotSpec`."""
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise SpecError(f"cannot read spec file {path}: {exc}")
    except json.JSONDecodeError as exc:
        raise SpecError(f"{path} is not valid JSON: {exc}")
    if not isinstance(raw, dict):
        raise SpecError(f"{path} must hold a JSON object")
    unknown = sorted(set(raw) - _SPEC_KEYS)
    if unknown:
        raise SpecError(f"unknown spec keys: {', '.join(unknown)}")
    missing = [k for k in ("kind", "input_csv", "output") if k not in raw]
    if missing:
        raise SpecError(f"spec is missing required keys: "
                        f"{', '.join(missing)}")
    return PlotSpec(kind=raw["kind"], input_csv=raw["input_csv"],
                    output=raw["output"], manifest=raw.get("manifest"),
                    onsets=tuple(raw.get("onsets", ())))


@dataclass(frozen=True)
class TraceFrame:
    """One parsed CSV: header names plus a float64 record matrix."""

    path: str
    columns: tuple
    data: np.ndarray

    def has(self, name):
        return name in self.columns

    def column(self, name):
        if name not in self.columns:
            raise MissingColumn(name, self.path)
        return self.data[:, self.columns.index(name)]

    def family(self, prefix):
        """Columns ``<prefix>_1 .. <prefix>_n`` in joint order.

        The numbering must be contiguous from 1; the first missing index
        is reported, so a trace with ``e1_2`` but no ``e1_1`` fails with a
        named-column error rather than silently plotting fewer joints.
        """
        pattern = re.compile(rf"^{re.escape(prefix)}_(\d+)$")
        indices = {}
        for name in self.columns:
            match = pattern.match(name)
            if match:
                indices[int(match.group(1))] = name
        if not indices:
            raise MissingColumn(f"{prefix}_1", self.path)
        count = max(indices)
        for j in range(1, count + 1):
            if j not in indices:
                raise MissingColumn(f"{prefix}_{j}", self.path)
        names = [indices[j] for j in range(1, count + 1)]
        block = np.column_stack([self.column(n) for n in names])
        return names, block


def load_frame(path):
    """Read one CSV into a :class:`TraceFrame`."""
    try:
        with open(path, newline="") as fh:
            rows = [row for row in csv.reader(fh) if row]
    except OSError as exc:
        raise SpecError(f"cannot read input file {path}: {exc}")
    if not rows:
        raise EmptyTrace(f"{path} is empty")
    header, body = rows[0], rows[1:]
    if not body:
        raise EmptyTrace(f"{path} has a header but no records")
    try:
        data = np.array(body, dtype=float)
    except ValueError as exc:
        raise SpecError(f"{path} has ragged or non-numeric records: {exc}")
    if data.ndim != 2 or data.shape[1] != len(header):
        raise SpecError(f"{path} rows do not match its {len(header)}-column "
                        f"header")
    return TraceFrame(path=path, columns=tuple(header), data=data)


def load_manifest(path):
    """Read a run manifest JSON into a plain mapping."""
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise SpecError(f"cannot read manifest {path}: {exc}")
    except json.JSONDecodeError as exc:
        raise SpecError(f"{path} is not valid JSON: {exc}")
    if not isinstance(raw, dict):
        raise SpecError(f"{path} must hold a JSON object")
    return raw

"""Offline figure rendering for manipulator-simulator trace and cost CSVs.

This package is deliberately decoupled from the simulator: it consumes
only the documented CSV column layout and manifest JSON, so it can render
archived runs with the simulator absent (and vice versa).
"""

from .render import __version__, build_figure, main, render
from .spec import (KINDS, EmptyTrace, MissingColumn, PlotError, PlotSpec,
                   SpecError, TraceFrame, load_frame, load_manifest,
                   load_spec)

__all__ = [
    "__version__",
    "KINDS",
    "PlotError", "SpecError", "MissingColumn", "EmptyTrace",
    "PlotSpec", "TraceFrame",
    "load_spec", "load_frame", "load_manifest",
    "build_figure", "render", "main",
]

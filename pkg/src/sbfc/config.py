"""Scenario configuration: YAML schema, presets, overrides, round-trip.

A configuration file is a mapping with up to nine sections — plant,
limits, faults, gains, trajectory, disturbance, sim, tuner, sweep — every
one optional.  An empty file therefore denotes the full default scenario:
the two-joint reference arm, +/-80 N*m torque limits, no faults, the
default gains and trajectory, 30 simulated seconds.  Unknown keys are
hard errors, never silently ignored.

`emit_config` writes a fully resolved scenario back out; parsing that
text reproduces the scenario object exactly, which is what makes run
manifests replayable.
"""

from __future__ import annotations

import re

import yaml

from .controller import ControllerGains
from .dynamics import JointState, ManipulatorParams
from .engine import Scenario, default_limits
from .errors import ParseError, SbfcError, ValidationError
from .faults import (FaultEvent, FaultSchedule, TorqueLimits,
                     default_fault_schedule)
from .jaya import TunerConfig
from .signals import DisturbanceSpec, TrajectorySpec

__all__ = [
    "load_config", "parse_config", "validate_config", "merge_config",
    "apply_override", "build_scenario", "build_tuner", "scenario_to_config",
    "emit_config", "preset_names", "preset_config",
]

_FAULT_KEYS = ("joint", "kind", "onset", "gamma", "stuck_torque", "loss_cap")

_SCHEMA = {
    "plant": ("n", "link_lengths", "link_masses", "link_inertias",
              "com_offsets", "gravity", "viscous_friction"),
    "limits": ("upper", "lower"),
    "faults": None,  # list of fault-event mappings
    "gains": ControllerGains.FIELD_ORDER,
    "trajectory": ("kind", "omega", "amplitude", "phase", "offset",
                   "positions", "start", "goal", "duration"),
    "disturbance": ("kind",),
    "sim": ("duration", "dt", "decimation", "cost_window", "band",
            "phi1_init", "phi2_init", "initial_q", "initial_qd",
            "t_start", "seed"),
    "tuner": ("mode", "population", "iterations", "horizon_s",
              "switch_period_s", "seed", "gain_bounds"),
    "sweep": ("cells",),
}


# --------------------------------------------------------------------------
# parsing and validation
# --------------------------------------------------------------------------

def parse_config(text, source="<config>"):
    """Parse YAML text into a validated config mapping."""
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"{source}:{mark.line + 1}" if mark is not None else source
        raise ParseError(f"invalid YAML at {where}: {exc}") from exc
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ParseError(
            f"top level of {source} must be a mapping, got "
            f"{type(raw).__name__}")
    validate_config(raw)
    return raw


def load_config(path):
    """Read and parse one configuration file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ParseError(f"cannot read config file {path}: {exc}") from exc
    return parse_config(text, source=str(path))


def validate_config(cfg):
    """Reject unknown keys and malformed section shapes."""
    for key in cfg:
        if key not in _SCHEMA:
            raise ParseError(
                f"unknown config key '{key}'; expected one of "
                f"{sorted(_SCHEMA)}")
    for section, allowed in _SCHEMA.items():
        if section not in cfg or allowed is None:
            continue
        block = cfg[section]
        if not isinstance(block, dict):
            raise ParseError(f"section '{section}' must be a mapping")
        for key in block:
            if key not in allowed:
                raise ParseError(
                    f"unknown config key '{section}.{key}'; expected one "
                    f"of {sorted(allowed)}")
    faults = cfg.get("faults", [])
    if not isinstance(faults, list):
        raise ParseError("section 'faults' must be a list of events")
    for i, ev in enumerate(faults):
        if not isinstance(ev, dict):
            raise ParseError(f"faults[{i}] must be a mapping")
        for key in ev:
            if key not in _FAULT_KEYS:
                raise ParseError(
                    f"unknown config key 'faults[{i}].{key}'; expected one "
                    f"of {sorted(_FAULT_KEYS)}")
    sweep = cfg.get("sweep", {})
    cells = sweep.get("cells", []) if isinstance(sweep, dict) else None
    if cells is None or not isinstance(cells, list):
        raise ParseError("section 'sweep.cells' must be a list")
    for i, cell in enumerate(cells):
        if not isinstance(cell, dict):
            raise ParseError(f"sweep.cells[{i}] must be a mapping")
        for key in cell:
            if key not in ("name", "config"):
                raise ParseError(
                    f"unknown config key 'sweep.cells[{i}].{key}'; expected "
                    f"'name' and 'config'")
        if "name" not in cell:
            raise ParseError(f"sweep.cells[{i}] needs a 'name'")
        sub = cell.get("config", {})
        if not isinstance(sub, dict):
            raise ParseError(f"sweep.cells[{i}].config must be a mapping")
        validate_config(sub)
    return cfg


def merge_config(base, extra):
    """Deep-merge `extra` onto `base`; mappings merge, everything else
    replaces."""
    merged = dict(base)
    for key, val in extra.items():
        if (key in merged and isinstance(merged[key], dict)
                and isinstance(val, dict)):
            merged[key] = merge_config(merged[key], val)
        else:
            merged[key] = val
    return merged


_SEGMENT = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*)(?:\[(\d+)\])?$")


def apply_override(cfg, assignment):
    """Apply one dotted `key=value` override in place, returning cfg.

    The key walks mappings with dots and lists with [index]; the value is
    parsed as YAML, so lists and mappings work: faults[0].gamma=0.5,
    sim.dt=5.0e-5, faults=[].
    """
    if "=" not in assignment:
        raise ParseError(
            f"override {assignment!r} must look like key=value")
    key, _, raw_val = assignment.partition("=")
    key = key.strip()
    if not key:
        raise ParseError(f"override {assignment!r} has an empty key")
    try:
        value = yaml.safe_load(raw_val)
    except yaml.YAMLError as exc:
        raise ParseError(
            f"override {assignment!r} has unparseable value: {exc}") from exc
    parts = key.split(".")
    node = cfg
    trail = []
    for depth, part in enumerate(parts):
        m = _SEGMENT.match(part)
        if m is None:
            raise ParseError(
                f"override key {key!r}: bad segment {part!r}")
        name, idx = m.group(1), m.group(2)
        last = depth == len(parts) - 1
        trail.append(name)
        if not isinstance(node, dict):
            raise ParseError(
                f"override key {key!r}: '{'.'.join(trail[:-1])}' is not "
                f"a mapping")
        if idx is None:
            if last:
                node[name] = value
            else:
                node = node.setdefault(name, {})
        else:
            seq = node.get(name)
            if not isinstance(seq, list):
                raise ParseError(
                    f"override key {key!r}: '{name}' is not a list here")
            i = int(idx)
            if i >= len(seq):
                raise ParseError(
                    f"override key {key!r}: index {i} out of range "
                    f"({name} has {len(seq)} entries)")
            if last:
                seq[i] = value
            else:
                node = seq[i]
                trail[-1] = f"{name}[{i}]"
    validate_config(cfg)
    return cfg


# --------------------------------------------------------------------------
# object construction
# --------------------------------------------------------------------------

def _build_section(section, builder):
    try:
        return builder()
    except SbfcError:
        raise
    except (TypeError, ValueError, KeyError) as exc:
        raise ValidationError(f"section '{section}': {exc}") from exc


def build_scenario(cfg):
    """Construct the Scenario described by a validated config mapping."""
    plant_cfg = cfg.get("plant", {})
    params = _build_section("plant", lambda: ManipulatorParams(
        n=int(plant_cfg.get("n", 2)),
        link_lengths=plant_cfg.get("link_lengths", (1.0, 0.8)),
        link_masses=plant_cfg.get("link_masses", (1.0, 0.8)),
        link_inertias=plant_cfg.get(
            "link_inertias",
            tuple(m * l * l / 12.0 for m, l in
                  zip(plant_cfg.get("link_masses", (1.0, 0.8)),
                      plant_cfg.get("link_lengths", (1.0, 0.8))))),
        com_offsets=plant_cfg.get(
            "com_offsets",
            tuple(l / 2.0 for l in plant_cfg.get("link_lengths", (1.0, 0.8)))),
        gravity=plant_cfg.get("gravity", 9.81),
        viscous_friction=plant_cfg.get("viscous_friction", ()),
    ))
    lim_cfg = cfg.get("limits", {})
    if lim_cfg:
        limits = _build_section("limits", lambda: TorqueLimits(
            upper=lim_cfg.get("upper", (80.0,) * params.n),
            lower=lim_cfg.get("lower", (-80.0,) * params.n)))
    elif params.n == 2:
        limits = default_limits()
    else:
        limits = TorqueLimits(upper=(80.0,) * params.n,
                              lower=(-80.0,) * params.n)
    events = []
    for i, ev in enumerate(cfg.get("faults", [])):
        events.append(_build_section(f"faults[{i}]", lambda ev=ev: FaultEvent(
            joint=int(ev.get("joint", 0)),
            kind=str(ev.get("kind", "loss_abrupt")),
            onset=ev.get("onset", 0.0),
            gamma=ev.get("gamma", 50.0),
            stuck_torque=ev.get("stuck_torque", 0.0),
            loss_cap=ev.get("loss_cap", 0.999),
        )))
    schedule = _build_section(
        "faults", lambda: FaultSchedule(events=tuple(events)))
    gains = _build_section("gains", lambda: ControllerGains(
        **{k: cfg.get("gains", {}).get(k, getattr(ControllerGains(), k))
           for k in ControllerGains.FIELD_ORDER}))
    traj_cfg = dict(cfg.get("trajectory", {}))
    if traj_cfg:
        defaults = {"kind": "sine"}
        trajectory = _build_section(
            "trajectory", lambda: TrajectorySpec(**{**defaults, **traj_cfg}))
    else:
        trajectory = TrajectorySpec()
    dist_cfg = cfg.get("disturbance", {})
    disturbance = _build_section("disturbance", lambda: DisturbanceSpec(
        kind=str(dist_cfg.get("kind", "lumped"))))
    sim = cfg.get("sim", {})
    has_q = "initial_q" in sim
    has_qd = "initial_qd" in sim
    if has_q != has_qd:
        raise ValidationError(
            "sim.initial_q and sim.initial_qd must be given together")
    initial_state = None
    if has_q:
        initial_state = _build_section("sim", lambda: JointState(
            q=tuple(sim["initial_q"]), qd=tuple(sim["initial_qd"])))
    return _build_section("sim", lambda: Scenario(
        params=params, limits=limits, schedule=schedule, gains=gains,
        trajectory=trajectory, disturbance=disturbance,
        duration=sim.get("duration", 30.0),
        dt=sim.get("dt", 1e-4),
        decimation=sim.get("decimation", 10),
        cost_window=sim.get("cost_window", 100),
        band=sim.get("band", 0.005),
        phi1_init=sim.get("phi1_init", 0.01),
        phi2_init=sim.get("phi2_init", 0.01),
        initial_state=initial_state,
        t_start=sim.get("t_start", 0.0),
        seed=sim.get("seed", 0),
    ))


def build_tuner(cfg):
    """Construct the TunerConfig described by a validated config mapping."""
    tc = cfg.get("tuner", {})
    bounds = tc.get("gain_bounds", (0.05, 300.0))
    return _build_section("tuner", lambda: TunerConfig(
        mode=str(tc.get("mode", "episodic")),
        population=tc.get("population", 6),
        iterations=tc.get("iterations", 20),
        horizon_s=tc.get("horizon_s", 5.0),
        switch_period_s=tc.get("switch_period_s", 5.0),
        seed=tc.get("seed", 0),
        gain_bounds=tuple(bounds),
    ))


# --------------------------------------------------------------------------
# emission (fully resolved, round-trippable)
# --------------------------------------------------------------------------

def scenario_to_config(scenario, tuner=None):
    """Expand a Scenario (and optional TunerConfig) into a config mapping."""
    p = scenario.params
    cfg = {
        "plant": {
            "n": p.n,
            "link_lengths": list(p.link_lengths),
            "link_masses": list(p.link_masses),
            "link_inertias": list(p.link_inertias),
            "com_offsets": list(p.com_offsets),
            "gravity": p.gravity,
            "viscous_friction": list(p.viscous_friction),
        },
        "limits": {
            "upper": list(scenario.limits.upper),
            "lower": list(scenario.limits.lower),
        },
        "faults": [
            {"joint": ev.joint, "kind": ev.kind, "onset": ev.onset,
             "gamma": ev.gamma, "stuck_torque": ev.stuck_torque,
             "loss_cap": ev.loss_cap}
            for ev in scenario.schedule.events
        ],
        "gains": {k: getattr(scenario.gains, k)
                  for k in ControllerGains.FIELD_ORDER},
        "trajectory": {
            "kind": scenario.trajectory.kind,
            "omega": scenario.trajectory.omega,
            "amplitude": list(scenario.trajectory.amplitude),
            "phase": list(scenario.trajectory.phase),
            "offset": list(scenario.trajectory.offset),
            "positions": list(scenario.trajectory.positions),
            "start": list(scenario.trajectory.start),
            "goal": list(scenario.trajectory.goal),
            "duration": scenario.trajectory.duration,
        },
        "disturbance": {"kind": scenario.disturbance.kind},
        "sim": {
            "duration": scenario.duration,
            "dt": scenario.dt,
            "decimation": scenario.decimation,
            "cost_window": scenario.cost_window,
            "band": scenario.band,
            "phi1_init": scenario.phi1_init,
            "phi2_init": scenario.phi2_init,
            "t_start": scenario.t_start,
            "seed": scenario.seed,
        },
    }
    if scenario.initial_state is not None:
        cfg["sim"]["initial_q"] = list(scenario.initial_state.q)
        cfg["sim"]["initial_qd"] = list(scenario.initial_state.qd)
    if tuner is not None:
        cfg["tuner"] = {
            "mode": tuner.mode,
            "population": tuner.population,
            "iterations": tuner.iterations,
            "horizon_s": tuner.horizon_s,
            "switch_period_s": tuner.switch_period_s,
            "seed": tuner.seed,
            "gain_bounds": list(tuner.gain_bounds),
        }
    return cfg


def emit_config(scenario, tuner=None):
    """Serialize a Scenario to YAML text that parses back to equality."""
    return yaml.safe_dump(scenario_to_config(scenario, tuner),
                          sort_keys=False, default_flow_style=None)


# --------------------------------------------------------------------------
# presets
# --------------------------------------------------------------------------

def _two_fault_config():
    return {
        "faults": [
            {"joint": ev.joint, "kind": ev.kind, "onset": ev.onset,
             "gamma": ev.gamma, "stuck_torque": ev.stuck_torque,
             "loss_cap": ev.loss_cap}
            for ev in default_fault_schedule().events
        ],
    }


def _severe_config():
    return {
        "faults": [
            {"joint": 0, "kind": "stuck", "onset": 5.0, "gamma": 50.0,
             "stuck_torque": 200.0, "loss_cap": 0.999},
            {"joint": 1, "kind": "loss_abrupt", "onset": 5.0, "gamma": 50.0,
             "stuck_torque": -30.0, "loss_cap": 0.6},
        ],
        "sim": {"duration": 20.0},
    }


def _table1_config():
    one = [{"joint": 0, "kind": "loss_abrupt", "onset": 10.0, "gamma": 50.0,
            "stuck_torque": 0.0, "loss_cap": 0.3}]
    two = [{"joint": 0, "kind": "loss_abrupt", "onset": 10.0, "gamma": 50.0,
            "stuck_torque": 0.0, "loss_cap": 0.5},
           {"joint": 1, "kind": "loss_abrupt", "onset": 15.0, "gamma": 50.0,
            "stuck_torque": 20.0, "loss_cap": 0.5}]
    return {
        "sweep": {"cells": [
            {"name": "normal", "config": {}},
            {"name": "one-fault", "config": {"faults": one}},
            {"name": "two-fault", "config": {"faults": two}},
        ]},
    }


_PRESETS = {
    "healthy": lambda: {},
    "two-fault": _two_fault_config,
    "severe": _severe_config,
    "table1-sbfc": _table1_config,
}


def preset_names():
    return tuple(sorted(_PRESETS))


def preset_config(name):
    """The config mapping for a named preset."""
    if name not in _PRESETS:
        raise ParseError(
            f"unknown preset {name!r}; available: {', '.join(preset_names())}")
    cfg = _PRESETS[name]()
    validate_config(cfg)
    return cfg

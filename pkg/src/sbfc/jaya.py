"""Population-based gain auto-tuning.

The update rule is parameter-free: every candidate moves toward the
current best and away from the current worst, with fresh uniform random
weights per coordinate,

    c' = c + r1 * (best - c) - r2 * (worst - c),    r1, r2 ~ U[0, 1).

Gains must stay strictly positive, so coordinates whose proposal lands at
or below zero are redrawn (up to 16 times) and finally clamped to 1e-9.
Replacement is greedy per parent: a proposal is kept only if its measured
cost improves on the parent's, which makes the population best
non-increasing over iterations.

Three drivers share the rule: `tune_episodic` measures each candidate on
a fresh simulation episode, `tune_online` rotates candidates onto a
single continuing run every switch period, and `tune_surrogate` minimizes
a cheap quadratic for fast self-checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .controller import ControllerGains
from .engine import run_report
from .errors import (EmptyWindow, NumericalDivergence, SingularInertia,
                     ValidationError)

__all__ = [
    "GainCandidate", "Population", "TunerConfig", "TuneResult",
    "OnlineTuneResult", "evaluate_cost", "jaya_update", "sample_population",
    "tune_episodic", "tune_online", "tune_surrogate",
    "POSITIVITY_CLAMP", "MAX_REDRAWS",
]

POSITIVITY_CLAMP = 1e-9
MAX_REDRAWS = 16


# --------------------------------------------------------------------------
# types
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class GainCandidate:
    """One point in gain space with its last measured cost."""

    values: tuple
    cost: float = math.inf

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        object.__setattr__(self, "values", vals)
        if len(vals) == 0:
            raise ValidationError("candidate needs at least one coordinate")
        if any((not math.isfinite(v)) or v <= 0.0 for v in vals):
            raise ValidationError(
                f"candidate values must be strictly positive and finite, "
                f"got {vals}")
        if math.isnan(self.cost):
            raise ValidationError("candidate cost must not be NaN")

    def gains(self):
        return ControllerGains.from_array(np.asarray(self.values))


@dataclass(frozen=True)
class Population:
    """Candidate pool with its current best/worst indices."""

    candidates: tuple
    best_index: int
    worst_index: int
    rng_seed: int

    @classmethod
    def from_candidates(cls, candidates, rng_seed=0):
        cands = tuple(candidates)
        if len(cands) < 2:
            raise ValidationError(
                f"population needs >= 2 candidates, got {len(cands)}")
        costs = [c.cost for c in cands]
        return cls(candidates=cands,
                   best_index=int(np.argmin(costs)),
                   worst_index=int(np.argmax(costs)),
                   rng_seed=int(rng_seed))

    @property
    def best(self):
        return self.candidates[self.best_index]

    @property
    def worst(self):
        return self.candidates[self.worst_index]


@dataclass(frozen=True)
class TunerConfig:
    """Knobs shared by the tuning drivers."""

    mode: str = "episodic"
    population: int = 6
    iterations: int = 20
    horizon_s: float = 5.0
    switch_period_s: float = 5.0
    seed: int = 0
    gain_bounds: tuple = (0.05, 300.0)

    def __post_init__(self):
        if self.mode not in ("episodic", "online", "surrogate"):
            raise ValidationError(
                f"unknown tuner mode {self.mode!r}; expected episodic, "
                f"online, or surrogate")
        if int(self.population) < 2:
            raise ValidationError(
                f"population must be >= 2, got {self.population}")
        object.__setattr__(self, "population", int(self.population))
        if int(self.iterations) < 0:
            raise ValidationError(
                f"iterations must be >= 0, got {self.iterations}")
        object.__setattr__(self, "iterations", int(self.iterations))
        if not (self.horizon_s > 0 and math.isfinite(self.horizon_s)):
            raise ValidationError(
                f"horizon_s must be finite and > 0, got {self.horizon_s}")
        if not self.switch_period_s > 0:
            raise ValidationError(
                f"switch_period_s must be > 0, got {self.switch_period_s}")
        lo, hi = (float(self.gain_bounds[0]), float(self.gain_bounds[1]))
        if not (0.0 < lo < hi and math.isfinite(hi)):
            raise ValidationError(
                f"gain_bounds must satisfy 0 < lo < hi, got ({lo}, {hi})")
        object.__setattr__(self, "gain_bounds", (lo, hi))
        object.__setattr__(self, "seed", int(self.seed))


@dataclass(frozen=True)
class TuneResult:
    """Outcome of an episodic or surrogate tuning run."""

    best: GainCandidate
    population: Population
    history: tuple  # rows (iteration, best_cost, worst_cost, *best_values)
    evaluations: int

    def history_columns(self):
        dim = len(self.best.values)
        return ("iteration", "best_cost", "worst_cost",
                *(f"gain_{i + 1}" for i in range(dim)))


@dataclass(frozen=True)
class OnlineTuneResult:
    """Outcome of an online tuning run on one continuing trajectory."""

    trace: object
    gain_changes: tuple  # rows (t_switch, GainCandidate applied from there)
    final_gains: ControllerGains
    history: tuple  # rows (segment, t_start, cost, *applied_values)
    evaluations: int


# --------------------------------------------------------------------------
# cost and update rule
# --------------------------------------------------------------------------

def evaluate_cost(trace, window):
    """Mean + population standard deviation of the combined error norm.

    `window` is a (t_lo, t_hi) time interval; records with
    t_lo <= t <= t_hi contribute.  Raises EmptyWindow when none do.
    """
    t_lo, t_hi = (float(window[0]), float(window[1]))
    t = trace.t
    sel = (t >= t_lo) & (t <= t_hi)
    if not sel.any():
        raise EmptyWindow(
            f"no trace records inside [{t_lo:g}, {t_hi:g}] "
            f"(trace spans [{t[0]:g}, {t[-1]:g}])" if len(trace) else
            f"no trace records inside [{t_lo:g}, {t_hi:g}] (empty trace)")
    ebar = trace.e_bar()[sel]
    return float(ebar.mean() + ebar.std())


def jaya_update(values, best, worst, rng=None, r1=None, r2=None):
    """Propose a new candidate; returns (proposal, r1, r2).

    The random weights actually used are returned so the update identity
    `proposal == values + r1*(best - values) - r2*(worst - values)` can be
    checked externally (it holds exactly for every coordinate that did not
    hit the positivity clamp).  Pass explicit r1/r2 for deterministic
    updates; otherwise supply `rng`.
    """
    c = np.asarray(values, dtype=float)
    cb = np.asarray(best, dtype=float)
    cw = np.asarray(worst, dtype=float)
    if c.shape != cb.shape or c.shape != cw.shape:
        raise ValidationError("values, best, and worst must share a shape")
    drawn = r1 is None or r2 is None
    if drawn:
        if rng is None:
            raise ValidationError(
                "jaya_update needs an rng when r1/r2 are not given")
        r1 = rng.random(c.shape[0])
        r2 = rng.random(c.shape[0])
    else:
        r1 = np.asarray(r1, dtype=float).reshape(c.shape)
        r2 = np.asarray(r2, dtype=float).reshape(c.shape)
    new = c + r1 * (cb - c) - r2 * (cw - c)
    if drawn:
        for _ in range(MAX_REDRAWS):
            bad = ~(new > 0.0)
            if not bad.any():
                break
            r1[bad] = rng.random(int(bad.sum()))
            r2[bad] = rng.random(int(bad.sum()))
            new[bad] = c[bad] + r1[bad] * (cb[bad] - c[bad]) \
                - r2[bad] * (cw[bad] - c[bad])
    new = np.where(new > 0.0, new, POSITIVITY_CLAMP)
    return new, r1, r2


def sample_population(current, size, bounds, rng):
    """Initial candidate values: the current point plus log-uniform draws."""
    lo, hi = bounds
    vals = [np.asarray(current, dtype=float)]
    dim = len(current)
    for _ in range(size - 1):
        draw = np.exp(rng.uniform(math.log(lo), math.log(hi), dim))
        vals.append(draw)
    return vals


# --------------------------------------------------------------------------
# drivers
# --------------------------------------------------------------------------

def _evolve(values, eval_fn, iterations, rng):
    """Greedy JAYA loop over a list of coordinate arrays.

    Returns (values, costs, history, evaluations); history row i gives the
    population state after iteration i (row 0 = initial evaluation).
    """
    values = [np.asarray(v, dtype=float).copy() for v in values]
    costs = [float(eval_fn(v)) for v in values]
    evals = len(values)

    def row(it):
        bi = int(np.argmin(costs))
        return (float(it), float(costs[bi]), float(max(costs)),
                *values[bi].tolist())

    history = [row(0)]
    for it in range(1, iterations + 1):
        bi = int(np.argmin(costs))
        wi = int(np.argmax(costs))
        vb = values[bi].copy()
        vw = values[wi].copy()
        for i in range(len(values)):
            proposal, _, _ = jaya_update(values[i], vb, vw, rng)
            cost = float(eval_fn(proposal))
            evals += 1
            if cost < costs[i]:
                values[i] = proposal
                costs[i] = cost
        history.append(row(it))
    return values, costs, history, evals


def _finish(values, costs, history, evals, seed):
    cands = tuple(GainCandidate(values=tuple(v), cost=c)
                  for v, c in zip(values, costs))
    pop = Population.from_candidates(cands, rng_seed=seed)
    return TuneResult(best=pop.best, population=pop,
                      history=tuple(history), evaluations=evals)


def tune_episodic(scenario, config):
    """Tune gains on repeated fresh episodes of the scenario.

    Candidate 0 starts from the scenario's own gains; the rest are drawn
    log-uniformly inside config.gain_bounds.  Each evaluation simulates an
    episode of config.horizon_s seconds and scores the final half of its
    records; episodes that diverge or break the inertia solve cost +inf.
    """
    rng = np.random.default_rng(config.seed)
    window = (0.5 * config.horizon_s, config.horizon_s)

    def eval_fn(vals):
        try:
            gains = ControllerGains.from_array(vals)
            episode = replace(scenario, gains=gains,
                              duration=config.horizon_s)
            trace = run_report(episode).trace
            return evaluate_cost(trace, window)
        except (NumericalDivergence, SingularInertia):
            return math.inf

    init = sample_population(scenario.gains.as_array(), config.population,
                             config.gain_bounds, rng)
    values, costs, history, evals = _evolve(init, eval_fn,
                                            config.iterations, rng)
    return _finish(values, costs, history, evals, config.seed)


def tune_surrogate(config, dim=8, target=5.0, init_bounds=(1e-3, 10.0)):
    """Minimize the quadratic sum((c - target)^2) as a cheap self-check."""
    rng = np.random.default_rng(config.seed)

    def eval_fn(vals):
        d = np.asarray(vals, dtype=float) - target
        return float(d @ d)

    lo, hi = init_bounds
    init = [rng.uniform(lo, hi, dim) for _ in range(config.population)]
    values, costs, history, evals = _evolve(init, eval_fn,
                                            config.iterations, rng)
    return _finish(values, costs, history, evals, config.seed)


def tune_online(scenario, config):
    """Tune gains on one continuing run, switching every switch period.

    The run is split into segments of config.switch_period_s seconds; the
    plant and adaptive state carry over between segments, while the active
    candidate rotates through the population.  After each segment the
    measured cost is written back to the candidate that ran, and the
    candidate is moved by one update toward the population's best and away
    from its worst.  An infinite switch period reduces to a fixed-gain
    run.
    """
    rng = np.random.default_rng(config.seed)
    if math.isinf(config.switch_period_s):
        edges = [0.0, scenario.duration]
    else:
        edges = [0.0]
        while edges[-1] + config.switch_period_s < scenario.duration - 1e-12:
            edges.append(edges[-1] + config.switch_period_s)
        edges.append(scenario.duration)

    init = sample_population(scenario.gains.as_array(), config.population,
                             config.gain_bounds, rng)
    values = [np.asarray(v, dtype=float) for v in init]
    costs = [math.inf] * len(values)

    state = None
    phi1 = scenario.phi1_init
    phi2 = scenario.phi2_init
    chunks = []
    gain_changes = []
    history = []
    evals = 0
    trace = None
    for seg, (lo, hi) in enumerate(zip(edges[:-1], edges[1:])):
        who = seg % len(values)
        applied = values[who].copy()
        segment = replace(
            scenario, gains=ControllerGains.from_array(applied),
            duration=hi - lo, t_start=lo, initial_state=state,
            phi1_init=phi1, phi2_init=phi2)
        report = run_report(segment)
        state = report.final_state
        phi1 = report.adaptive.phi1_hat
        phi2 = report.adaptive.phi2_hat
        chunks.append(report.trace)
        gain_changes.append((lo, GainCandidate(values=tuple(applied))))
        cost = evaluate_cost(report.trace, (lo, hi))
        evals += 1
        costs[who] = cost
        history.append((float(seg), float(lo), float(cost),
                        *applied.tolist()))
        finite = [c for c in costs if math.isfinite(c)]
        if len(finite) >= 2 and len(edges) > 2:
            bi = int(np.argmin(costs))
            wi = int(np.argmax(costs))
            if bi != wi:
                proposal, _, _ = jaya_update(values[who], values[bi],
                                             values[wi], rng)
                values[who] = proposal
    data = np.vstack([c.data for c in chunks])
    trace = replace(chunks[0], data=data)
    last = gain_changes[-1][1]
    return OnlineTuneResult(
        trace=trace, gain_changes=tuple(gain_changes),
        final_gains=last.gains() if len(last.values) == 8 else None,
        history=tuple(history), evaluations=evals)

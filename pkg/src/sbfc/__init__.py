"""Fault-tolerant control simulator for planar rigid manipulators.

The package simulates an n-joint arm under actuator faults (gradual or
abrupt authority loss, stuck torques) and hard torque saturation, closes
the loop with a cascaded adaptive controller that needs only coarse
inertia bounds, and auto-tunes the controller gains with a
population-based, parameter-free search.  Runs are deterministic and
stream to delimited traces with a replayable manifest.
"""

from .controller import (AdaptiveState, ControllerGains, ErrorState,
                         Reference, actual_control, adaptive_step,
                         compute_errors, control_step, paper_gains,
                         virtual_control)
from .dynamics import (InertiaBounds, JointState, ManipulatorParams,
                       coriolis_matrix, estimate_inertia_bounds,
                       forward_dynamics, gravity_vector, inertia_matrix,
                       mechanical_energy, reference_params)
from .engine import (RunMetrics, RunReport, Scenario, Trace, TraceRecord,
                     compute_metrics, default_fault_scenario, default_limits,
                     default_scenario, fit_envelope, integrate_plant,
                     resolve_initial_state, run, run_report, step,
                     trace_columns)
from .errors import (DimensionMismatch, EmptyWindow, NumericalDivergence,
                     ParseError, SbfcError, ScheduleConflict, SingularInertia,
                     ValidationError)
from .faults import (FaultEvent, FaultRealization, FaultSchedule,
                     TorqueLimits, default_fault_schedule, effective_torque,
                     epsilon_at, faulty_torque, realize, saturation_coeffs)
from .jaya import (GainCandidate, OnlineTuneResult, Population, TuneResult,
                   TunerConfig, evaluate_cost, jaya_update, tune_episodic,
                   tune_online, tune_surrogate)
from .signals import (DisturbanceSpec, TrajectorySpec, default_disturbance,
                      default_trajectory, disturbance_at, disturbance_bound,
                      reference_at)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # errors
    "SbfcError", "ParseError", "ValidationError", "DimensionMismatch",
    "SingularInertia", "NumericalDivergence", "ScheduleConflict",
    "EmptyWindow",
    # dynamics
    "ManipulatorParams", "JointState", "InertiaBounds", "reference_params",
    "inertia_matrix", "coriolis_matrix", "gravity_vector", "forward_dynamics",
    "mechanical_energy", "estimate_inertia_bounds",
    # faults
    "FaultEvent", "FaultSchedule", "TorqueLimits", "FaultRealization",
    "default_fault_schedule", "epsilon_at", "faulty_torque",
    "saturation_coeffs", "realize", "effective_torque",
    # controller
    "ControllerGains", "AdaptiveState", "Reference", "ErrorState",
    "paper_gains", "compute_errors", "virtual_control", "adaptive_step",
    "actual_control", "control_step",
    # signals
    "TrajectorySpec", "DisturbanceSpec", "default_trajectory",
    "default_disturbance", "reference_at", "disturbance_at",
    "disturbance_bound",
    # engine
    "Scenario", "Trace", "TraceRecord", "RunMetrics", "RunReport",
    "default_limits", "default_scenario", "default_fault_scenario",
    "trace_columns", "resolve_initial_state", "run", "run_report", "step",
    "integrate_plant", "compute_metrics", "fit_envelope",
    # tuner
    "GainCandidate", "Population", "TunerConfig", "TuneResult",
    "OnlineTuneResult", "evaluate_cost", "jaya_update", "tune_episodic",
    "tune_online", "tune_surrogate",
]

//! Experiment runner for NAFD cell-free massive MIMO planning: parameter
//! sweeps, algorithm comparisons, multi-slot scheduling and closed-form
//! validation, all written as CSV.

pub mod experiment;
pub mod schedule;
pub mod spec;
pub mod validate;

pub use experiment::{build_problem, run_algorithm, run_experiment, run_sweep, ExperimentOutput, RunOutcome, TaskOutcome};
pub use schedule::{multi_slot_schedule, ScheduleTrace};
pub use spec::{Algorithm, Axis, ExperimentSpec, Scenario, SlotPolicy, ValidationParams};
pub use validate::{validate_closed_forms, ValidationReport};

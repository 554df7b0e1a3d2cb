//! Receding-horizon energy management for shipboard power systems: a sparse
//! LP/MILP solver, the dispatch model, the horizon controllers, scenario
//! files and weight tuning.

pub mod horizon;
pub mod io;
pub mod lp;
pub mod milp;
pub mod model;
pub mod tuner;

pub use horizon::{
    operability, run_fho, run_rho, HorizonError, MissionResult, RhoConfig, StepOutcome,
};
pub use io::{load_scenario, save_scenario, synth_scenario, IoError, SynthSizes};
pub use lp::{solve_lp, LinearProgram, LpConfig, LpError, LpSolution, LpStatus};
pub use milp::{solve_milp, MilpError, MilpProblem, MilpSolution, MilpStatus, SolverConfig};
pub use model::{
    ModelError, ObjectiveTerms, ObjectiveWeights, ScenarioSpec, StepDispatch, StorageClass,
    SystemState,
};
pub use tuner::{tune_weights, TuneResult, TunerConfig, TunerError};

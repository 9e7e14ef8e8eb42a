//! 1D gray radiative transfer solver suite.
//!
//! The main solver is a semi-implicit prediction-correction-projection
//! scheme for the coupled radiative-intensity/material-temperature system
//! in even-odd parity form ([`transport`]). It runs with a hyperbolic CFL
//! condition uniformly in the scaled mean free path, captures degenerate
//! diffusion fronts, and handles both T-independent and sigma/T^3
//! opacities. [`diffusion`] holds the matching limit-equation solvers
//! (including the fully implicit references), [`reference`] the
//! independent transport references, and [`harness`]/[`config`]/[`output`]
//! the experiment drivers behind the `radtrans` binary.

pub mod config;
pub mod diffusion;
pub mod error;
pub mod grid;
pub mod harness;
pub mod linalg;
pub mod opacity;
pub mod output;
pub mod params;
pub mod reference;
pub mod state;
pub mod transport;

pub use config::{parse_config, SimulationConfig, SolverKind};
pub use error::{Error, Result};
pub use grid::{build_quadrature, AngularQuadrature, Grid1D};
pub use harness::{
    compare_fields, compare_runs, convergence_study, run_simulation, stability_sweep,
    CompareField, CompareNorm, ConvergenceReport, RunResult, StabilityReport,
};
pub use opacity::{opacity_at_centers, opacity_at_nodes, OpacityModel};
pub use output::{read_fields_csv, write_outputs};
pub use params::{SolverParams, StepDiagnostics};
pub use state::{
    init_diffusion_state, init_transport_state, BoundaryCondition, DiffusionBc, DiffusionState,
    InitialCondition, PhysicalConstants, TransportState,
};

//! Data synthesis, noise, reconstruction drivers and rate studies.

pub mod config;
pub mod data;
pub mod forward;
pub mod problem;
mod run;

pub use config::{parse_region, Mode, ProblemConfig};
pub use data::{inject_noise, Noise, ObservationData, Site};
pub use forward::ForwardSolution;
pub use problem::{example, example1, example2, example3, Problem, Truth};
pub use run::{
    build_mesh, build_spaces, convergence_rates, convergence_study, delta_study, fit_log_slope, reconstruct,
    run_reconstruction, source_error, synthesize_data_analytic, synthesize_data_forward, write_csv, DeltaStudy,
    ExperimentReport, Reconstruction, Reconstructor, Refine, CSV_HEADER,
};

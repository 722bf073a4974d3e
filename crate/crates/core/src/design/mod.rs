//! Detector design: average joint error, worst-case a-posteriori error by
//! bisection over SDP feasibility, the inconclusive-outcome variant and
//! noisy measurements.

mod data;
mod povm;
mod solvers;

pub use data::{avg_joint_matrices, data_matrices, data_matrix, noisy_data_matrices};
pub use povm::{
    NoiseModel, Povm, PovmDefect, RankOneApproximation, NOISE_TOL, POVM_PSD_TOL, POVM_SUM_TOL,
};
pub use solvers::{
    feasibility_at, solve_avg_joint, solve_wc_posterior, solve_wc_posterior_inconclusive,
    solve_wc_posterior_noisy, BisectionStep, Criterion, DesignOptions, DesignReport,
    FeasibilityPoint, SolverDiagnostics,
};

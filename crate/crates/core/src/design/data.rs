use alloc::vec::Vec;

use super::NoiseModel;
use crate::ensemble::StateEnsemble;
use crate::linalg::CMatrix;

/// `A_i(δ) = (w_i − δ) ρ − w_i p_i ρ_i`.
pub fn data_matrix(e: &StateEnsemble, i: usize, delta: f64) -> CMatrix {
    let w = e.weights()[i];
    let mut a = e.mixture().scale(w - delta);
    a.axpy(-w * e.priors()[i], e.state(i));
    a
}

pub fn data_matrices(e: &StateEnsemble, delta: f64) -> Vec<CMatrix> {
    (0..e.len()).map(|i| data_matrix(e, i, delta)).collect()
}

/// Coefficients of the design elements in the stationarity conditions:
/// `Ã_j = Σ_i λ_i ν_{r(i) j} A_i(δ)`, where `r(i)` is the noisy outcome
/// matched to state `i` (shifted by one when element 0 is inconclusive).
pub fn noisy_data_matrices(
    e: &StateEnsemble,
    delta: f64,
    lambda: &[f64],
    nu: &NoiseModel,
    inconclusive: bool,
) -> Vec<CMatrix> {
    let n = e.dim();
    let offset = usize::from(inconclusive);
    let a = data_matrices(e, delta);
    (0..nu.cols())
        .map(|j| {
            let mut out = CMatrix::zeros(n, n);
            for (i, ai) in a.iter().enumerate() {
                let c = lambda[i] * nu.get(i + offset, j);
                if c != 0.0 {
                    out.axpy(c, ai);
                }
            }
            out
        })
        .collect()
}

/// `w_i (ρ − p_i ρ_i)`: objective coefficients of the average joint error.
pub fn avg_joint_matrices(e: &StateEnsemble) -> Vec<CMatrix> {
    (0..e.len())
        .map(|i| {
            let w = e.weights()[i];
            let mut a = e.mixture().scale(w);
            a.axpy(-w * e.priors()[i], e.state(i));
            a
        })
        .collect()
}

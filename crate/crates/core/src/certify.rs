//! Optimality certificates: check the KKT system of a design criterion
//! against any candidate POVM.
//!
//! Worst-case conditions are checked in a form that covers the noiseless,
//! noisy and inconclusive variants at once. With `r(i)` the outcome matched
//! to state `i` and `ν` the noise matrix (identity when absent), define
//! `Ã_j = Σ_i λ_i ν_{r(i) j} A_i(δ)` and `Y = Σ_j Ã_j O_j`. A feasible POVM
//! is optimal when multipliers `λ ≥ 0`, `Σ λ = 1`, supported on the active
//! set, give `Ã_j − Y ⪰ 0` and `(Ã_j − Y) O_j = 0` for every element. An
//! inconclusive element has no matched state, so only noise contributes to
//! its `Ã_0`; without noise its conditions read `−Y ⪰ 0`, `Y O_0 = 0`.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::design::{avg_joint_matrices, data_matrices, noisy_data_matrices, NoiseModel, Povm};
use crate::ensemble::StateEnsemble;
use crate::error::{Error, Result};
use crate::linalg::eig::herm_eig_sym;
use crate::linalg::{nnls, CMatrix};

pub const PSD_VIOLATION: &str = "povm_psd";
pub const RESOLUTION: &str = "povm_resolution";
pub const CONSTRAINT: &str = "constraint_violation";
pub const STATIONARITY: &str = "stationarity_psd";
pub const SLACKNESS: &str = "complementary_slackness";
pub const DUAL_HERMITICITY: &str = "dual_hermiticity";
pub const SIMPLEX: &str = "multiplier_simplex";
pub const SUPPORT: &str = "multiplier_support";
pub const TRACE_BALANCE: &str = "trace_balance";
pub const ACTIVE_SET: &str = "active_set";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CertifiedCriterion {
    AvgJoint,
    WcPosterior,
    WcPosteriorNoisy,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Optimal,
    /// Feasible but the optimality conditions fail.
    NotOptimal,
    /// The candidate is not a POVM, or violates the `δ` constraints.
    Infeasible,
}

#[derive(Debug, Clone)]
pub struct Certificate {
    pub criterion: CertifiedCriterion,
    pub verdict: Verdict,
    pub passed: bool,
    pub tol: f64,
    pub delta: Option<f64>,
    pub residuals: BTreeMap<String, f64>,
    /// Names of the residuals above tolerance.
    pub failures: Vec<String>,
    pub multipliers: Vec<f64>,
    pub y: CMatrix,
    pub active_set: Vec<usize>,
    /// `Tr O^noisy_{r(i)} A_i(δ)` per state.
    pub constraint_values: Vec<f64>,
}

impl Certificate {
    pub fn residual(&self, name: &str) -> Option<f64> {
        self.residuals.get(name).copied()
    }

    pub fn worst_residual(&self) -> f64 {
        self.residuals
            .values()
            .fold(0.0, |m, &v| m.max(v / self.tol))
    }

    fn finish(mut self) -> Self {
        self.failures = self
            .residuals
            .iter()
            .filter(|(_, &v)| !(v <= self.tol))
            .map(|(k, _)| k.clone())
            .collect();
        let infeasible = [PSD_VIOLATION, RESOLUTION, CONSTRAINT]
            .iter()
            .any(|k| self.failures.iter().any(|f| f == k));
        self.verdict = if infeasible {
            Verdict::Infeasible
        } else if self.failures.is_empty() {
            Verdict::Optimal
        } else {
            Verdict::NotOptimal
        };
        self.passed = self.verdict == Verdict::Optimal;
        self
    }
}

fn max_neg_eig(m: &CMatrix) -> Result<f64> {
    Ok((-herm_eig_sym(m)?.min()).max(0.0))
}

fn feasibility_residuals(povm: &Povm, res: &mut BTreeMap<String, f64>) -> Result<()> {
    let d = povm.defect()?;
    res.insert(PSD_VIOLATION.to_string(), d.psd_violation);
    res.insert(RESOLUTION.to_string(), d.resolution_defect);
    Ok(())
}

/// Stationarity residuals for coefficient matrices `c_j`:
/// `Y = Σ c_j O_j`, `Z_j = c_j − Y`.
fn stationarity(povm: &Povm, c: &[CMatrix], res: &mut BTreeMap<String, f64>) -> Result<CMatrix> {
    let n = povm.dim();
    let mut raw = CMatrix::zeros(n, n);
    for (cj, oj) in c.iter().zip(povm.elements()) {
        raw += &cj.matmul(oj);
    }
    let y = raw.hermitian_part();
    res.insert(DUAL_HERMITICITY.to_string(), (&raw - &y).frobenius_norm());
    let mut psd: f64 = 0.0;
    let mut slack: f64 = 0.0;
    for (cj, oj) in c.iter().zip(povm.elements()) {
        let z = cj - &y;
        psd = psd.max(max_neg_eig(&z)?);
        slack = slack.max(z.matmul(oj).frobenius_norm());
    }
    res.insert(STATIONARITY.to_string(), psd);
    res.insert(SLACKNESS.to_string(), slack);
    Ok(y)
}

/// Checks optimality for the average joint error.
pub fn certify_avg_joint(povm: &Povm, e: &StateEnsemble, tol: f64) -> Result<Certificate> {
    if povm.dim() != e.dim() {
        return Err(Error::DimensionMismatch {
            expected: e.dim(),
            got: povm.dim(),
        });
    }
    if povm.has_inconclusive() || povm.len() != e.len() {
        return Err(Error::InvalidPovm(
            "average joint design needs one element per state".into(),
        ));
    }
    let mut res = BTreeMap::new();
    feasibility_residuals(povm, &mut res)?;
    let a = avg_joint_matrices(e);
    let y = stationarity(povm, &a, &mut res)?;
    Ok(Certificate {
        criterion: CertifiedCriterion::AvgJoint,
        verdict: Verdict::NotOptimal,
        passed: false,
        tol,
        delta: None,
        residuals: res,
        failures: Vec::new(),
        multipliers: Vec::new(),
        y,
        active_set: Vec::new(),
        constraint_values: Vec::new(),
    }
    .finish())
}

/// Checks the worst-case a-posteriori optimality conditions at `δ`.
/// Multipliers are recovered by non-negative least squares on the active
/// set when not supplied. Handles POVMs with an inconclusive element.
pub fn certify_wc_posterior(
    povm: &Povm,
    e: &StateEnsemble,
    delta: f64,
    lambda: Option<&[f64]>,
    noise: Option<&NoiseModel>,
    tol: f64,
) -> Result<Certificate> {
    let m = e.len();
    let k = povm.len();
    let offset = usize::from(povm.has_inconclusive());
    if povm.dim() != e.dim() {
        return Err(Error::DimensionMismatch {
            expected: e.dim(),
            got: povm.dim(),
        });
    }
    if k != m + offset {
        return Err(Error::InvalidPovm(alloc::format!(
            "expected {} elements, got {k}",
            m + offset
        )));
    }
    let identity = NoiseModel::identity(k);
    let nu = noise.unwrap_or(&identity);
    if nu.cols() != k || nu.rows() < m + offset {
        return Err(Error::InvalidNoise(alloc::format!(
            "noise matrix is {}x{}, POVM has {k} elements",
            nu.rows(),
            nu.cols()
        )));
    }
    if let Some(l) = lambda {
        if l.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: l.len(),
            });
        }
    }

    let mut res = BTreeMap::new();
    feasibility_residuals(povm, &mut res)?;
    let noisy = povm.noisy(nu)?;
    let a = data_matrices(e, delta);
    let g: Vec<f64> = (0..m)
        .map(|i| CMatrix::trace_product_re(noisy.element(i + offset), &a[i]))
        .collect();
    let violation = g.iter().fold(0.0f64, |mx, &v| mx.max(v));
    res.insert(CONSTRAINT.to_string(), violation);
    let active: Vec<usize> = (0..m).filter(|&i| g[i].abs() <= tol).collect();
    res.insert(
        ACTIVE_SET.to_string(),
        if active.is_empty() {
            f64::INFINITY
        } else {
            0.0
        },
    );

    let lam = match lambda {
        Some(l) => l.to_vec(),
        None => recover_multipliers(povm, e, delta, nu, &active)?,
    };
    let sum: f64 = lam.iter().sum();
    let neg = lam.iter().fold(0.0f64, |mx, &v| mx.max(-v));
    res.insert(SIMPLEX.to_string(), (sum - 1.0).abs().max(neg));
    let off_support = (0..m)
        .filter(|i| !active.contains(i))
        .fold(0.0f64, |mx, i| mx.max(lam[i].abs()));
    res.insert(SUPPORT.to_string(), off_support);

    let c = noisy_data_matrices(e, delta, &lam, nu, povm.has_inconclusive());
    let y = stationarity(povm, &c, &mut res)?;
    res.insert(TRACE_BALANCE.to_string(), y.trace().re.abs());

    let criterion = if povm.has_inconclusive() {
        CertifiedCriterion::Inconclusive
    } else if noise.is_some_and(|n| !n.is_identity()) {
        CertifiedCriterion::WcPosteriorNoisy
    } else {
        CertifiedCriterion::WcPosterior
    };
    Ok(Certificate {
        criterion,
        verdict: Verdict::NotOptimal,
        passed: false,
        tol,
        delta: Some(delta),
        residuals: res,
        failures: Vec::new(),
        multipliers: lam,
        y,
        active_set: active,
        constraint_values: g,
    }
    .finish())
}

/// [`certify_wc_posterior`] for POVMs that carry an inconclusive element.
pub fn certify_inconclusive(
    povm: &Povm,
    e: &StateEnsemble,
    delta: f64,
    lambda: Option<&[f64]>,
    noise: Option<&NoiseModel>,
    tol: f64,
) -> Result<Certificate> {
    if !povm.has_inconclusive() {
        return Err(Error::InvalidPovm(
            "POVM has no inconclusive element".into(),
        ));
    }
    certify_wc_posterior(povm, e, delta, lambda, noise, tol)
}

/// Fits `λ ≥ 0` with `Σ λ = 1`, supported on `active`, minimizing the
/// Frobenius norm of the complementary-slackness residuals
/// `(Ã_j − Y) O_j`, which are linear in `λ`.
fn recover_multipliers(
    povm: &Povm,
    e: &StateEnsemble,
    delta: f64,
    nu: &NoiseModel,
    active: &[usize],
) -> Result<Vec<f64>> {
    let m = e.len();
    let mut out = vec![0.0; m];
    if active.is_empty() {
        return Ok(out);
    }
    if active.len() == 1 {
        out[active[0]] = 1.0;
        return Ok(out);
    }
    let n = e.dim();
    let k = povm.len();
    let offset = usize::from(povm.has_inconclusive());
    let a = data_matrices(e, delta);
    // Column for multiplier i: vectorized (c_j(i) − Y(i)) O_j over all j.
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(active.len());
    for &i in active {
        let c: Vec<CMatrix> = (0..k).map(|j| a[i].scale(nu.get(i + offset, j))).collect();
        let mut y = CMatrix::zeros(n, n);
        for (cj, oj) in c.iter().zip(povm.elements()) {
            y += &cj.matmul(oj);
        }
        let y = y.hermitian_part();
        let mut col = Vec::with_capacity(2 * k * n * n);
        for (cj, oj) in c.iter().zip(povm.elements()) {
            let r = (cj - &y).matmul(oj);
            for z in r.as_slice() {
                col.push(z.re);
                col.push(z.im);
            }
        }
        columns.push(col);
    }
    let rows = columns[0].len() + 1;
    let cols = active.len();
    let scale = columns
        .iter()
        .flatten()
        .fold(0.0f64, |mx, v| mx.max(v.abs()))
        .max(1.0);
    let big = 1e3 * scale;
    let mut mat = vec![0.0; rows * cols];
    for (c, col) in columns.iter().enumerate() {
        for (r, v) in col.iter().enumerate() {
            mat[r * cols + c] = *v;
        }
        mat[(rows - 1) * cols + c] = big;
    }
    let mut rhs = vec![0.0; rows];
    rhs[rows - 1] = big;
    let x = nnls(&mat, rows, cols, &rhs);
    let s: f64 = x.iter().sum();
    for (c, &i) in active.iter().enumerate() {
        out[i] = if s > 0.0 { x[c] / s } else { 1.0 / cols as f64 };
    }
    Ok(out)
}

//! Input ensembles: density matrices with priors and weights.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{herm_eig, inner, vec_norm, CMatrix, C64, HERMITIAN_TOL};

pub const STATE_TOL: f64 = 1e-9;
pub const PRIOR_TOL: f64 = 1e-9;
/// Smallest admissible eigenvalue of the mixture.
pub const MIXTURE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Default)]
pub struct EnsembleOptions {
    /// Re-express a singular problem on the range space of the mixture
    /// instead of rejecting it.
    pub reduce_to_range: bool,
    /// Skip the positive-definite mixture check entirely.
    pub allow_singular: bool,
}

#[derive(Debug, Clone)]
pub struct StateEnsemble {
    states: Vec<CMatrix>,
    priors: Vec<f64>,
    weights: Vec<f64>,
    mixture: CMatrix,
    /// Orthonormal columns spanning the retained range when the ensemble was
    /// reduced; `None` for ensembles in their original space.
    range_basis: Option<CMatrix>,
}

impl StateEnsemble {
    /// Validated ensemble with equal weights.
    pub fn new(states: Vec<CMatrix>, priors: Vec<f64>) -> Result<Self> {
        let m = states.len();
        Self::with_weights(states, priors, vec![1.0; m])
    }

    pub fn with_weights(states: Vec<CMatrix>, priors: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        Self::with_options(states, priors, weights, &EnsembleOptions::default())
    }

    pub fn with_options(
        states: Vec<CMatrix>,
        priors: Vec<f64>,
        weights: Vec<f64>,
        opts: &EnsembleOptions,
    ) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::InvalidArgument("ensemble has no states".into()));
        }
        let n = states[0].rows();
        let mut clean = Vec::with_capacity(states.len());
        for (i, s) in states.iter().enumerate() {
            clean.push(validate_state(i, s, n)?);
        }
        let priors = validate_priors(&priors, clean.len())?;
        let weights = normalize_weights(&weights, clean.len())?;

        let mut mixture = CMatrix::zeros(n, n);
        for (s, p) in clean.iter().zip(&priors) {
            mixture.axpy(*p, s);
        }
        let mixture = mixture.hermitian_part();
        let e = herm_eig(&mixture)?;
        if e.min() > MIXTURE_TOL || opts.allow_singular {
            return Ok(Self {
                states: clean,
                priors,
                weights,
                mixture,
                range_basis: None,
            });
        }
        if !opts.reduce_to_range {
            return Err(Error::SingularMixture { min_eig: e.min() });
        }
        let keep: Vec<usize> = (0..n).filter(|&k| e.values[k] > MIXTURE_TOL).collect();
        let v = e.vectors.select_columns(&keep);
        let vh = v.adjoint();
        let reduced: Vec<CMatrix> = clean
            .iter()
            .map(|s| vh.matmul(s).matmul(&v).hermitian_part())
            .collect();
        let mixture = vh.matmul(&mixture).matmul(&v).hermitian_part();
        Ok(Self {
            states: reduced,
            priors,
            weights,
            mixture,
            range_basis: Some(v),
        })
    }

    pub fn dim(&self) -> usize {
        self.mixture.rows()
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[CMatrix] {
        &self.states
    }

    pub fn state(&self, i: usize) -> &CMatrix {
        &self.states[i]
    }

    pub fn priors(&self) -> &[f64] {
        &self.priors
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `ρ = Σ p_j ρ_j`.
    pub fn mixture(&self) -> &CMatrix {
        &self.mixture
    }

    pub fn range_basis(&self) -> Option<&CMatrix> {
        self.range_basis.as_ref()
    }

    /// Same states and priors with new weights (normalized by their maximum).
    pub fn reweighted(&self, weights: &[f64]) -> Result<Self> {
        let weights = normalize_weights(weights, self.len())?;
        Ok(Self {
            weights,
            ..self.clone()
        })
    }

    /// Replaces the states outside `keep` by their normalized mixture,
    /// appended last with the summed prior.
    pub fn lump_partial(&self, keep: &[usize]) -> Result<Self> {
        let m = self.len();
        let mut seen = vec![false; m];
        for &k in keep {
            if k >= m {
                return Err(Error::InvalidArgument(format!(
                    "state index {k} out of range"
                )));
            }
            if seen[k] {
                return Err(Error::InvalidArgument(format!(
                    "state index {k} listed twice"
                )));
            }
            seen[k] = true;
        }
        if keep.len() >= m {
            return Err(Error::InvalidArgument(
                "no states left to lump into the residual".into(),
            ));
        }
        let n = self.dim();
        let mut residual = CMatrix::zeros(n, n);
        let mut mass = 0.0;
        for i in (0..m).filter(|&i| !seen[i]) {
            residual.axpy(self.priors[i], &self.states[i]);
            mass += self.priors[i];
        }
        if mass <= 0.0 {
            return Err(Error::InvalidArgument(
                "residual states carry zero prior".into(),
            ));
        }
        let residual = residual.scale(1.0 / mass);
        let mut states: Vec<CMatrix> = keep.iter().map(|&k| self.states[k].clone()).collect();
        let mut priors: Vec<f64> = keep.iter().map(|&k| self.priors[k]).collect();
        let mut weights: Vec<f64> = keep.iter().map(|&k| self.weights[k]).collect();
        let residual_weight = (0..m)
            .filter(|&i| !seen[i])
            .map(|i| self.weights[i])
            .fold(0.0, f64::max);
        states.push(residual);
        priors.push(mass);
        weights.push(residual_weight);
        let weights =
            normalize_weights(&weights, states.len()).unwrap_or_else(|_| vec![1.0; states.len()]);
        Ok(Self {
            states,
            priors,
            weights,
            mixture: self.mixture.clone(),
            range_basis: self.range_basis.clone(),
        })
    }

    /// Two-state ensemble `{(ψψ*, 1−β), (r, β)}`.
    pub fn pure_state_scenario(psi: &[C64], r: &CMatrix, beta: f64) -> Result<Self> {
        Self::pure_state_scenario_with(psi, r, beta, &EnsembleOptions::default())
    }

    pub fn pure_state_scenario_with(
        psi: &[C64],
        r: &CMatrix,
        beta: f64,
        opts: &EnsembleOptions,
    ) -> Result<Self> {
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "beta must lie in (0, 1), got {beta}"
            )));
        }
        let psi = unit_vector(psi)?;
        if psi.len() != r.rows() {
            return Err(Error::DimensionMismatch {
                expected: r.rows(),
                got: psi.len(),
            });
        }
        Self::with_options(
            vec![CMatrix::outer(&psi), r.clone()],
            vec![1.0 - beta, beta],
            vec![1.0, 1.0],
            opts,
        )
    }

    /// Lifts operators on the reduced range back to the original space.
    pub fn lift(&self, op: &CMatrix) -> CMatrix {
        match &self.range_basis {
            Some(v) => v.matmul(op).matmul(&v.adjoint()),
            None => op.clone(),
        }
    }
}

/// Checks that `psi` is a unit vector within 1e-10.
pub fn unit_vector(psi: &[C64]) -> Result<Vec<C64>> {
    if psi.is_empty() {
        return Err(Error::InvalidArgument("empty state vector".into()));
    }
    let nrm = vec_norm(psi);
    if (nrm - 1.0).abs() > 1e-10 || !nrm.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "state vector has norm {nrm}, expected 1"
        )));
    }
    Ok(psi.to_vec())
}

/// `ψ* M ψ` (real part).
pub fn quadratic_form(m: &CMatrix, psi: &[C64]) -> f64 {
    inner(psi, &m.mul_vec(psi)).re
}

fn validate_state(i: usize, s: &CMatrix, n: usize) -> Result<CMatrix> {
    let bad = |reason: String| Error::InvalidState { index: i, reason };
    if s.rows() != n || s.cols() != n {
        return Err(bad(format!(
            "expected {n}x{n}, got {}x{}",
            s.rows(),
            s.cols()
        )));
    }
    let h = s
        .checked_hermitian(HERMITIAN_TOL)
        .map_err(|e| bad(format!("{e}")))?;
    let tr = h.trace().re;
    if (tr - 1.0).abs() > STATE_TOL {
        return Err(bad(format!("trace is {tr}, expected 1")));
    }
    let lmin = herm_eig(&h)?.min();
    if lmin < -STATE_TOL {
        return Err(bad(format!(
            "not positive semidefinite (smallest eigenvalue {lmin:.3e})"
        )));
    }
    Ok(h)
}

fn validate_priors(p: &[f64], m: usize) -> Result<Vec<f64>> {
    if p.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: p.len(),
        });
    }
    let sum: f64 = p.iter().sum();
    if p.iter().any(|&x| !x.is_finite() || x < 0.0) || (sum - 1.0).abs() > PRIOR_TOL {
        return Err(Error::InvalidPriors { sum });
    }
    Ok(p.to_vec())
}

fn normalize_weights(w: &[f64], m: usize) -> Result<Vec<f64>> {
    if w.len() != m {
        return Err(Error::InvalidWeights(format!(
            "expected {m} weights, got {}",
            w.len()
        )));
    }
    if w.iter().any(|&x| !x.is_finite() || x < 0.0) {
        return Err(Error::InvalidWeights(
            "weights must be finite and non-negative".into(),
        ));
    }
    let max = w.iter().cloned().fold(0.0, f64::max);
    if max <= 0.0 {
        return Err(Error::InvalidWeights(
            "at least one weight must be positive".into(),
        ));
    }
    Ok(w.iter().map(|x| x / max).collect())
}

//! Analytic designs for two-state problems and the equal-weight
//! single-active-constraint value.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::certify::{self, Certificate};
use crate::design::{NoiseModel, Povm};
use crate::ensemble::{quadratic_form, unit_vector, EnsembleOptions, StateEnsemble};
use crate::error::{Error, Result};
use crate::linalg::eig::herm_eig_sym;
use crate::linalg::{inv_sqrt, max_eigenvalue, CMatrix, Cholesky, C64};

/// Relative size below which an eigenvalue of the data matrix counts as
/// zero.
pub const KERNEL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Construction {
    /// `O₁ = U₋U₋*`, `O₂ = U₊U₊*` from the eigenvectors of
    /// `A = βr − (1−β)ψψ*`.
    TwoStateEigen,
    /// `A ⪰ 0`: the detector never declares the pure state.
    TwoStateTrivial,
    /// `O₁` projects onto the kernel of `A₁(γ)`.
    SinglePureKernel,
    /// `O₂ = φφ*` for a pure residual state.
    PureResidual,
    SinglePureNoisy,
    /// `ν₀ > 1/2`: the element roles are exchanged.
    SinglePureNoisySwapped,
    /// `ν₀ = 1/2`: every POVM gives `γ = 1 − β`.
    NoisyDegenerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Validity {
    /// `β < β₀`, so that `A` has eigenvalues of both signs.
    pub below_beta_threshold: Option<bool>,
    /// Only one worst-case constraint is expected to be active.
    pub single_active: bool,
    pub noise_below_half: Option<bool>,
    pub degenerate: bool,
}

#[derive(Debug, Clone)]
pub struct ClosedFormResult {
    /// `γ` for worst-case designs, the average joint error otherwise.
    pub objective: f64,
    pub povm: Povm,
    pub construction: Construction,
    pub validity: Validity,
    /// The scenario the formula refers to, with its weights.
    pub ensemble: StateEnsemble,
    pub noise: Option<NoiseModel>,
}

impl ClosedFormResult {
    pub fn is_worst_case(&self) -> bool {
        !matches!(
            self.construction,
            Construction::TwoStateEigen | Construction::TwoStateTrivial
        )
    }

    /// Checks the matching optimality conditions; worst-case designs use
    /// `λ = (1, 0)` at `δ = 1 − γ`.
    pub fn certificate(&self, tol: f64) -> Result<Certificate> {
        if self.is_worst_case() {
            certify::certify_wc_posterior(
                &self.povm,
                &self.ensemble,
                1.0 - self.objective,
                Some(&[1.0, 0.0]),
                self.noise.as_ref(),
                tol,
            )
        } else {
            certify::certify_avg_joint(&self.povm, &self.ensemble, tol)
        }
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "beta must lie in (0, 1), got {beta}"
        )))
    }
}

fn split_by_sign(a: &CMatrix, tol: f64) -> Result<(CMatrix, CMatrix, f64)> {
    let eig = herm_eig_sym(a)?;
    let neg = eig.projector(|l| l < -tol);
    let pos = eig.projector(|l| l >= -tol);
    let tr_pos = eig.values.iter().filter(|&&l| l > tol).sum();
    Ok((neg, pos, tr_pos))
}

/// `ψ* r⁻¹ ψ` for positive definite `r`.
fn inverse_form(psi: &[C64], r: &CMatrix) -> Result<f64> {
    if psi.len() != r.rows() {
        return Err(Error::DimensionMismatch {
            expected: r.rows(),
            got: psi.len(),
        });
    }
    let c = Cholesky::factor(&r.checked_hermitian(crate::linalg::HERMITIAN_TOL)?)?;
    Ok(quadratic_form(&c.inverse(), psi))
}

/// Average joint design for `{(ψψ*, 1−β), (r, β)}` with unit weights.
pub fn two_state_avg_joint(psi: &[C64], r: &CMatrix, beta: f64) -> Result<ClosedFormResult> {
    check_beta(beta)?;
    let ensemble = StateEnsemble::pure_state_scenario(psi, r, beta)?;
    let psi = unit_vector(psi)?;
    let mut a = r.scale(beta);
    a.axpy(-(1.0 - beta), &CMatrix::outer(&psi));
    let tol = KERNEL_TOL * a.frobenius_norm().max(f64::MIN_POSITIVE);
    let (o1, o2, tr_pos) = split_by_sign(&a, tol)?;
    let trivial = o1.trace().re < 0.5;
    let beta0 = beta_threshold(&psi, r)?;
    Ok(ClosedFormResult {
        objective: beta - tr_pos,
        povm: Povm::new(vec![o1, o2], false)?,
        construction: if trivial {
            Construction::TwoStateTrivial
        } else {
            Construction::TwoStateEigen
        },
        validity: Validity {
            below_beta_threshold: Some(beta < beta0),
            ..Validity::default()
        },
        ensemble,
        noise: None,
    })
}

/// `β₀ = x/(1+x)` with `x = ψ* r⁻¹ ψ`; above it `βr − (1−β)ψψ* ⪰ 0`.
pub fn beta_threshold(psi: &[C64], r: &CMatrix) -> Result<f64> {
    let psi = unit_vector(psi)?;
    let x = inverse_form(&psi, r)?;
    Ok(x / (1.0 + x))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GammaBound {
    pub gamma: f64,
    pub argmin: usize,
    /// `p_i λ_max(ρ^{-1/2} ρ_i ρ^{-1/2})` per state.
    pub values: Vec<f64>,
    /// The minimizer is unique, which the formula requires.
    pub single_active_plausible: bool,
}

/// `γ = min_i p_i λ_max(ρ^{-1/2} ρ_i ρ^{-1/2})`, the optimal value when a
/// single worst-case constraint is active.
pub fn gamma_equal_weights(e: &StateEnsemble) -> Result<GammaBound> {
    let w0 = e.weights()[0];
    if e.weights().iter().any(|&w| (w - w0).abs() > 1e-12) {
        return Err(Error::InvalidWeights(
            "the formula needs equal weights".into(),
        ));
    }
    let s = inv_sqrt(e.mixture(), 1e-12).map_err(|_| Error::SingularMixture {
        min_eig: crate::linalg::min_eigenvalue(e.mixture()).unwrap_or(0.0),
    })?;
    let values = (0..e.len())
        .map(|i| Ok(e.priors()[i] * max_eigenvalue(&s.congruence(e.state(i)))?))
        .collect::<Result<Vec<f64>>>()?;
    let (argmin, gamma) =
        values
            .iter()
            .copied()
            .enumerate()
            .fold(
                (0, f64::INFINITY),
                |b, (i, v)| if v < b.1 { (i, v) } else { b },
            );
    let gap_tol = 1e-9 * gamma.abs().max(1.0);
    let single_active_plausible = values
        .iter()
        .enumerate()
        .all(|(i, &v)| i == argmin || v > gamma + gap_tol);
    Ok(GammaBound {
        gamma,
        argmin,
        values,
        single_active_plausible,
    })
}

/// Worst-case design detecting `ψ` against a positive definite residual:
/// weights `(1, 0)`, `γ = (1−β)/(1−β(1−1/ψ*r⁻¹ψ))`.
pub fn single_pure_wc(psi: &[C64], r: &CMatrix, beta: f64) -> Result<ClosedFormResult> {
    check_beta(beta)?;
    let psi = unit_vector(psi)?;
    let x = inverse_form(&psi, r)?;
    let gamma = (1.0 - beta) / (1.0 - beta * (1.0 - 1.0 / x));
    let ensemble = StateEnsemble::pure_state_scenario(&psi, r, beta)?.reweighted(&[1.0, 0.0])?;
    let mut a1 = ensemble.mixture().scale(gamma);
    a1.axpy(-(1.0 - beta), &CMatrix::outer(&psi));
    let eig = herm_eig_sym(&a1)?;
    let tol = KERNEL_TOL * a1.frobenius_norm().max(f64::MIN_POSITIVE);
    let mut kernel = eig.projector(|l| l.abs() <= tol);
    if kernel.trace().re < 0.5 {
        // Round-off pushed the zero eigenvalue past the threshold.
        kernel = eig.projector(|l| l <= eig.values[0]);
    }
    let o2 = &CMatrix::identity(psi.len()) - &kernel;
    Ok(ClosedFormResult {
        objective: gamma,
        povm: Povm::new(vec![kernel, o2], false)?,
        construction: Construction::SinglePureKernel,
        validity: Validity {
            single_active: true,
            ..Validity::default()
        },
        ensemble,
        noise: None,
    })
}

/// Perfect detection of `ρ₀` against a pure residual `φφ*`: `γ = 1`,
/// `O₂ = φφ*`, `O₁ = I − φφ*`. The mixture may be singular.
pub fn pure_residual_wc(rho0: &CMatrix, phi: &[C64], beta: f64) -> Result<ClosedFormResult> {
    check_beta(beta)?;
    let phi = unit_vector(phi)?;
    let n = phi.len();
    let p = CMatrix::outer(&phi);
    let opts = EnsembleOptions {
        allow_singular: true,
        ..EnsembleOptions::default()
    };
    let ensemble = StateEnsemble::with_options(
        vec![rho0.clone(), p.clone()],
        vec![1.0 - beta, beta],
        vec![1.0, 0.0],
        &opts,
    )?;
    let o1 = &CMatrix::identity(n) - &p;
    if CMatrix::trace_product_re(&o1, ensemble.state(0)) <= 1e-12 {
        return Err(Error::InvalidArgument(
            "the state to detect lies in the span of the residual".into(),
        ));
    }
    Ok(ClosedFormResult {
        objective: 1.0,
        povm: Povm::new(vec![o1, p], false)?,
        construction: Construction::PureResidual,
        validity: Validity {
            single_active: true,
            ..Validity::default()
        },
        ensemble,
        noise: None,
    })
}

/// Worst-case design detecting `ψ` against `r = I/n` under binary
/// symmetric noise with flip probability `ν₀`.
pub fn single_pure_wc_noisy(psi: &[C64], beta: f64, nu0: f64) -> Result<ClosedFormResult> {
    check_beta(beta)?;
    if !(0.0..=1.0).contains(&nu0) {
        return Err(Error::InvalidNoise(format!(
            "nu0 must lie in [0, 1], got {nu0}"
        )));
    }
    let psi = unit_vector(psi)?;
    let n = psi.len();
    let nf = n as f64;
    let r = CMatrix::identity(n).scale(1.0 / nf);
    let ensemble = StateEnsemble::pure_state_scenario(&psi, &r, beta)?.reweighted(&[1.0, 0.0])?;
    let noise = NoiseModel::symmetric(2, nu0)?;
    let pp = CMatrix::outer(&psi);

    if (nu0 - 0.5).abs() <= 1e-12 {
        let rest = &CMatrix::identity(n) - &pp;
        return Ok(ClosedFormResult {
            objective: 1.0 - beta,
            povm: Povm::new(vec![pp, rest], false)?,
            construction: Construction::NoisyDegenerate,
            validity: Validity {
                single_active: true,
                noise_below_half: Some(false),
                degenerate: true,
                ..Validity::default()
            },
            ensemble,
            noise: Some(noise),
        });
    }

    // The formula depends on ν₀ only through min(ν₀, 1 − ν₀); above one
    // half the two elements trade places.
    let nu = nu0.min(1.0 - nu0);
    let q = nu / (1.0 - nu);
    let gamma = (1.0 - beta) / (1.0 - beta * (1.0 - 1.0 / nf - q * (nf - 1.0) / nf));
    let mut a1 = ensemble.mixture().scale(gamma);
    a1.axpy(-(1.0 - beta), &pp);
    let tol = KERNEL_TOL * a1.frobenius_norm().max(f64::MIN_POSITIVE);
    let (neg, pos, _) = split_by_sign(&a1, tol)?;
    let below = nu0 < 0.5;
    let elements = if below {
        vec![neg, pos]
    } else {
        vec![pos, neg]
    };
    Ok(ClosedFormResult {
        objective: gamma,
        povm: Povm::new(elements, false)?,
        construction: if below {
            Construction::SinglePureNoisy
        } else {
            Construction::SinglePureNoisySwapped
        },
        validity: Validity {
            single_active: true,
            noise_below_half: Some(below),
            ..Validity::default()
        },
        ensemble,
        noise: Some(noise),
    })
}

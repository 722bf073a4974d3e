use alloc::vec::Vec;

use super::data::{avg_joint_matrices, data_matrices, data_matrix, noisy_data_matrices};
use super::{NoiseModel, Povm, RankOneApproximation};
use crate::certify::{self, Certificate};
use crate::ensemble::StateEnsemble;
use crate::error::{Error, Result};
use crate::linalg::{herm_eig, CMatrix};
use crate::metrics::{self, ProbReport, P_OUT_FLOOR};
use crate::sdp::{
    solve_feasibility, BlockId, InequalityId, LinearForm, MatrixEqualityId, ScalarId, SdpProblem,
    SdpSettings, SdpStatus,
};

/// Residual level at which a secondary solve is still usable.
const LOOSE_FEAS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Criterion {
    AvgJoint,
    WcPosterior,
    WcPosteriorInconclusive,
}

#[derive(Debug, Clone)]
pub struct DesignOptions {
    /// Bisection tolerance on `δ`.
    pub eps: f64,
    pub sdp: SdpSettings,
    /// Certificate tolerance; defaults to `max(1e-6, 10·eps)`.
    pub certify_tol: Option<f64>,
    /// When set, also report a rank-one approximation using this
    /// eigenvalue-ratio threshold.
    pub rank_one_ratio: Option<f64>,
    /// Upper bound on the inconclusive probability of inconclusive designs.
    pub p_incl_max: Option<f64>,
}

impl Default for DesignOptions {
    fn default() -> Self {
        Self {
            eps: 1e-6,
            sdp: SdpSettings::default(),
            certify_tol: None,
            rank_one_ratio: None,
            p_incl_max: None,
        }
    }
}

impl DesignOptions {
    pub fn with_eps(eps: f64) -> Self {
        Self {
            eps,
            ..Self::default()
        }
    }

    pub fn certificate_tolerance(&self) -> f64 {
        self.certify_tol
            .unwrap_or_else(|| (10.0 * self.eps).max(1e-6))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BisectionStep {
    pub delta_min: f64,
    pub delta_max: f64,
    pub delta: f64,
    pub slack: f64,
    pub feasible: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolverDiagnostics {
    pub sdp_solves: usize,
    pub total_iterations: usize,
    /// Statistics of the solve that produced the returned POVM.
    pub final_iterations: usize,
    pub final_gap: f64,
    pub final_primal_residual: f64,
    pub final_dual_residual: f64,
}

#[derive(Debug, Clone)]
pub struct DesignReport {
    pub criterion: Criterion,
    /// `δ_opt` for worst-case designs, the optimal `‖e_joint‖_av` otherwise.
    pub objective: f64,
    /// `1 − δ_opt` when all weights are one.
    pub gamma: Option<f64>,
    pub povm: Povm,
    pub noise: Option<NoiseModel>,
    pub report: ProbReport,
    /// Multipliers per state (worst-case designs).
    pub multipliers: Vec<f64>,
    /// Dual of the completeness constraint.
    pub dual_y: CMatrix,
    pub certificate: Certificate,
    pub bisection: Vec<BisectionStep>,
    pub diagnostics: SolverDiagnostics,
    /// Matched outcomes that are never declared (`Tr O_i ρ ≈ 0`).
    pub unused_outcomes: Vec<usize>,
    pub rank_one: Option<RankOneApproximation>,
}

/// Result of one feasibility SDP `min s s.t. Tr O^noisy_{r(i)} A_i(δ) ≤ s`.
#[derive(Debug, Clone)]
pub struct FeasibilityPoint {
    pub delta: f64,
    pub slack: f64,
    pub povm: Povm,
    /// Inequality duals per state (zero for states without a constraint).
    pub multipliers: Vec<f64>,
    pub dual_y: CMatrix,
    pub status: SdpStatus,
    pub iterations: usize,
    pub gap: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
}

impl FeasibilityPoint {
    pub fn is_feasible(&self) -> bool {
        self.slack <= 0.0
    }
}

fn check_noise(e: &StateEnsemble, noise: Option<&NoiseModel>, inconclusive: bool) -> Result<()> {
    if let Some(nu) = noise {
        let k = e.len() + usize::from(inconclusive);
        if nu.cols() != k {
            return Err(Error::InvalidNoise(alloc::format!(
                "noise matrix has {} columns, the design has {k} elements",
                nu.cols()
            )));
        }
        if inconclusive && nu.rows() != k {
            return Err(Error::InvalidNoise(alloc::format!(
                "noise on an inconclusive design must be {k}x{k}, got {}x{}",
                nu.rows(),
                nu.cols()
            )));
        }
    }
    Ok(())
}

struct Constrained {
    problem: SdpProblem,
    blocks: Vec<BlockId>,
    rows: Vec<Option<InequalityId>>,
    completeness: MatrixEqualityId,
}

/// POVM blocks with `ΣO = I`, the matched-outcome constraints
/// `Tr O^noisy_{r(i)} A_i(δ) ≤ s` (`≤ 0` without `s`) and the optional
/// inconclusive bound.
fn constrained_problem(
    e: &StateEnsemble,
    delta: f64,
    nu: &NoiseModel,
    inconclusive: bool,
    p_incl_max: Option<f64>,
    slack: Option<ScalarId>,
    mut p: SdpProblem,
) -> Constrained {
    let n = e.dim();
    let k = e.len() + usize::from(inconclusive);
    let offset = usize::from(inconclusive);
    let blocks: Vec<_> = (0..k).map(|_| p.add_block(n)).collect();
    let terms: Vec<_> = blocks.iter().map(|&b| (b, 1.0)).collect();
    let completeness = p.add_matrix_equality(&CMatrix::identity(n), &terms);
    let mut rows = Vec::with_capacity(e.len());
    for i in 0..e.len() {
        if e.weights()[i] <= 0.0 {
            rows.push(None);
            continue;
        }
        let a = data_matrix(e, i, delta);
        let mut form = LinearForm::new();
        if let Some(s) = slack {
            form.add_scalar(s, -1.0);
        }
        for (j, &b) in blocks.iter().enumerate() {
            let c = nu.get(i + offset, j);
            if c != 0.0 {
                form.add_block(b, a.scale(c));
            }
        }
        rows.push(Some(p.add_inequality(form, 0.0)));
    }
    if let (true, Some(bound)) = (inconclusive, p_incl_max) {
        p.add_inequality(inconclusive_form(e, nu, &blocks), bound);
    }
    Constrained {
        problem: p,
        blocks,
        rows,
        completeness,
    }
}

/// `Tr O^noisy_0 ρ` as a linear form in the design elements.
fn inconclusive_form(e: &StateEnsemble, nu: &NoiseModel, blocks: &[BlockId]) -> LinearForm {
    let mut form = LinearForm::new();
    for (j, &b) in blocks.iter().enumerate() {
        let c = nu.get(0, j);
        if c != 0.0 {
            form.add_block(b, e.mixture().scale(c));
        }
    }
    form
}

/// Builds and solves the feasibility SDP at a given `δ`.
pub fn feasibility_at(
    e: &StateEnsemble,
    delta: f64,
    noise: Option<&NoiseModel>,
    inconclusive: bool,
    p_incl_max: Option<f64>,
    settings: &SdpSettings,
) -> Result<FeasibilityPoint> {
    check_noise(e, noise, inconclusive)?;
    let k = e.len() + usize::from(inconclusive);
    let identity = NoiseModel::identity(k);
    let nu = noise.unwrap_or(&identity);

    let mut p = SdpProblem::with_settings(settings.clone());
    let s = p.add_scalar();
    p.set_objective(LinearForm::new().with_scalar(s, 1.0));
    let c = constrained_problem(e, delta, nu, inconclusive, p_incl_max, Some(s), p);
    let f = solve_feasibility(&c.problem, s)?;
    let sol = f.solution;
    if sol.status != SdpStatus::Optimal {
        return Err(Error::Solver {
            status: sol.status,
            iterations: sol.iterations,
        });
    }
    let multipliers = c
        .rows
        .iter()
        .map(|r| r.map_or(0.0, |id| sol.inequality_dual(id)))
        .collect();
    let povm = Povm::new_unchecked(
        c.blocks.iter().map(|&b| sol.block(b).clone()).collect(),
        inconclusive,
    )?;
    Ok(FeasibilityPoint {
        delta,
        slack: f.slack,
        povm,
        multipliers,
        dual_y: sol.matrix_dual(c.completeness).clone(),
        status: sol.status,
        iterations: sol.iterations,
        gap: sol.gap,
        primal_residual: sol.primal_residual,
        dual_residual: sol.dual_residual,
    })
}

/// Among POVMs meeting the constraints at `δ`, one that maximizes the
/// smallest conclusive output probability `min_i Tr O^noisy_i ρ`.
fn most_conclusive(
    e: &StateEnsemble,
    delta: f64,
    nu: &NoiseModel,
    p_incl_max: Option<f64>,
    settings: &SdpSettings,
) -> Result<(Povm, CMatrix, usize)> {
    let mut p = SdpProblem::with_settings(settings.clone());
    let t = p.add_scalar();
    p.set_objective(LinearForm::new().with_scalar(t, -1.0));
    let c = constrained_problem(e, delta, nu, true, p_incl_max, None, p);
    let mut p = c.problem;
    for i in 1..=e.len() {
        // t − Tr O^noisy_i ρ ≤ 0
        let mut form = LinearForm::new().with_scalar(t, 1.0);
        for (j, &b) in c.blocks.iter().enumerate() {
            let v = nu.get(i, j);
            if v != 0.0 {
                form.add_block(b, e.mixture().scale(-v));
            }
        }
        p.add_inequality(form, 0.0);
    }
    // The constraint set is thin near the optimal δ; a loosely converged
    // point is repaired into an exact POVM and checked by the caller.
    let sol = p.solve()?;
    let loose = sol.primal_residual <= LOOSE_FEAS && sol.dual_residual <= LOOSE_FEAS;
    if !(sol.is_optimal() || loose) {
        return Err(Error::Solver {
            status: sol.status,
            iterations: sol.iterations,
        });
    }
    let povm = Povm::new_unchecked(
        c.blocks.iter().map(|&b| sol.block(b).clone()).collect(),
        true,
    )?
    .repaired()?;
    Ok((
        povm,
        sol.matrix_dual(c.completeness).clone(),
        sol.iterations,
    ))
}

/// Eigenvalues below this fraction of the largest count as kernel.
const KERNEL_REL: f64 = 1e-9;
/// Same for dual slacks taken from a solve at the end of the bracket.
const FACE_REL: f64 = 1e-4;
const FINAL_GAP: f64 = 1e-12;

/// Orthonormal basis (as columns) of the eigenvectors of `h` with
/// eigenvalue at most `rel·max(λ_max, 1)`.
fn kernel_basis(h: &CMatrix, rel: f64) -> Result<CMatrix> {
    let n = h.rows();
    let eig = herm_eig(h)?;
    let cut = rel * eig.max().abs().max(1.0);
    let keep: Vec<usize> = (0..n).filter(|&k| eig.values[k] <= cut).collect();
    Ok(CMatrix::from_fn(n, keep.len(), |i, c| {
        eig.vectors[(i, keep[c])]
    }))
}

/// Max–min inconclusive design restricted to `O_j = V_j M_j V_j*`, with
/// the posterior rows `Tr O^noisy_{i+1} A_i ≤ 0` given in `rows`.
/// `None` when the restricted problem is infeasible.
fn reduced_max_min(
    e: &StateEnsemble,
    nu: &NoiseModel,
    bases: &[CMatrix],
    rows: &[(usize, CMatrix)],
    p_incl_max: Option<f64>,
    settings: &SdpSettings,
) -> Result<Option<(Povm, CMatrix, usize)>> {
    let n = e.dim();
    if bases[1..].iter().all(|v| v.cols() == 0) {
        return Ok(None);
    }
    let mut p = SdpProblem::with_settings(settings.clone());
    let t = p.add_scalar();
    p.set_objective(LinearForm::new().with_scalar(t, -1.0));
    let blocks: Vec<Option<BlockId>> = bases
        .iter()
        .map(|v| (v.cols() > 0).then(|| p.add_block(v.cols())))
        .collect();
    let compress = |v: &CMatrix, c: &CMatrix| v.adjoint().matmul(c).matmul(v);
    let completeness = p.add_matrix_equality_map(&CMatrix::identity(n), |x| {
        let mut f = LinearForm::new();
        for (b, v) in blocks.iter().zip(bases) {
            if let Some(b) = b {
                f.add_block(*b, compress(v, x));
            }
        }
        f
    });
    let output = |row: usize, m: &CMatrix, scale: f64| {
        let mut f = LinearForm::new();
        for (j, (b, v)) in blocks.iter().zip(bases).enumerate() {
            let c = nu.get(row, j);
            if let (Some(b), true) = (b, c != 0.0) {
                f.add_block(*b, compress(v, m).scale(scale * c));
            }
        }
        f
    };
    for i in 1..=e.len() {
        p.add_inequality(output(i, e.mixture(), -1.0).with_scalar(t, 1.0), 0.0);
    }
    for (i, a) in rows {
        p.add_inequality(output(i + 1, a, 1.0), 0.0);
    }
    if let Some(bound) = p_incl_max {
        p.add_inequality(output(0, e.mixture(), 1.0), bound);
    }
    let sol = p.solve()?;
    match sol.status {
        SdpStatus::Infeasible => return Ok(None),
        _ if sol.is_optimal()
            || (sol.primal_residual <= LOOSE_FEAS && sol.dual_residual <= LOOSE_FEAS) => {}
        status => {
            return Err(Error::Solver {
                status,
                iterations: sol.iterations,
            })
        }
    }
    let elements = blocks
        .iter()
        .zip(bases)
        .map(|(b, v)| match b {
            Some(b) => v.matmul(sol.block(*b)).matmul(&v.adjoint()),
            None => CMatrix::zeros(n, n),
        })
        .collect();
    let povm = Povm::new_unchecked(elements, true)?.repaired()?;
    Ok(Some((
        povm,
        sol.matrix_dual(completeness).clone(),
        sol.iterations,
    )))
}

/// Max–min design on the face `δ = 0`. There every `A_i(0)` is PSD, so
/// each element feeding row `i` lives in `ker A_i(0)`.
fn unambiguous_design(
    e: &StateEnsemble,
    nu: &NoiseModel,
    p_incl_max: Option<f64>,
    settings: &SdpSettings,
) -> Result<Option<(Povm, CMatrix, usize)>> {
    let n = e.dim();
    let a = data_matrices(e, 0.0);
    let bases = (0..e.len() + 1)
        .map(|j| {
            let mut sum = CMatrix::zeros(n, n);
            for i in (0..e.len()).filter(|&i| e.weights()[i] > 0.0 && nu.get(i + 1, j) != 0.0) {
                sum += &a[i];
            }
            kernel_basis(&sum, KERNEL_REL)
        })
        .collect::<Result<Vec<_>>>()?;
    reduced_max_min(e, nu, &bases, &[], p_incl_max, settings)
}

/// Max–min design on the optimal face identified by the dual slacks
/// `Z_j = Ã_j(λ) − Y` of a feasibility point.
fn face_design(
    e: &StateEnsemble,
    pt: &FeasibilityPoint,
    nu: &NoiseModel,
    p_incl_max: Option<f64>,
    settings: &SdpSettings,
) -> Result<Option<(Povm, CMatrix, usize)>> {
    let Some(lam) = normalized(&pt.multipliers) else {
        return Ok(None);
    };
    let c = noisy_data_matrices(e, pt.delta, &lam, nu, true);
    let mut y = CMatrix::zeros(e.dim(), e.dim());
    for (cj, oj) in c.iter().zip(pt.povm.elements()) {
        y += &cj.matmul(oj);
    }
    let y = y.hermitian_part();
    let scale = c
        .iter()
        .map(CMatrix::frobenius_norm)
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let bases = c
        .iter()
        .map(|cj| kernel_basis(&(cj - &y).scale(1.0 / scale), FACE_REL))
        .collect::<Result<Vec<_>>>()?;
    // Rows with a positive multiplier hold on the face; the others stay.
    let rows: Vec<(usize, CMatrix)> = (0..e.len())
        .filter(|&i| e.weights()[i] > 0.0 && lam[i] < FACE_REL)
        .map(|i| (i, data_matrix(e, i, pt.delta)))
        .collect();
    reduced_max_min(e, nu, &bases, &rows, p_incl_max, settings)
}

/// Minimizes `Σ_i w_i Tr O_i (ρ − p_i ρ_i)` over POVMs.
pub fn solve_avg_joint(e: &StateEnsemble, opts: &DesignOptions) -> Result<DesignReport> {
    let n = e.dim();
    let a = avg_joint_matrices(e);
    let mut p = SdpProblem::with_settings(opts.sdp.clone());
    let blocks: Vec<_> = (0..e.len()).map(|_| p.add_block(n)).collect();
    let mut obj = LinearForm::new();
    for (b, ai) in blocks.iter().zip(&a) {
        obj.add_block(*b, ai.clone());
    }
    p.set_objective(obj);
    let terms: Vec<_> = blocks.iter().map(|&b| (b, 1.0)).collect();
    let completeness = p.add_matrix_equality(&CMatrix::identity(n), &terms);
    let sol = p.solve()?.require_optimal()?;

    let povm = Povm::new_unchecked(
        blocks.iter().map(|&b| sol.block(b).clone()).collect(),
        false,
    )?;
    let report = metrics::evaluate(&povm, e, None)?;
    let tol = opts.certificate_tolerance();
    let certificate = certify::certify_avg_joint(&povm, e, tol)?;
    let rank_one = opts
        .rank_one_ratio
        .map(|r| povm.rank_one_approximation(r))
        .transpose()?;
    Ok(DesignReport {
        criterion: Criterion::AvgJoint,
        objective: sol.primal_objective,
        gamma: None,
        unused_outcomes: unused_outcomes(&report),
        povm,
        noise: None,
        report,
        multipliers: Vec::new(),
        dual_y: sol.matrix_dual(completeness).clone(),
        certificate,
        bisection: Vec::new(),
        diagnostics: SolverDiagnostics {
            sdp_solves: 1,
            total_iterations: sol.iterations,
            final_iterations: sol.iterations,
            final_gap: sol.gap,
            final_primal_residual: sol.primal_residual,
            final_dual_residual: sol.dual_residual,
        },
        rank_one,
    })
}

/// Minimizes `‖e_post‖_wc` by bisection over `δ ∈ [0, 1]`.
pub fn solve_wc_posterior(e: &StateEnsemble, opts: &DesignOptions) -> Result<DesignReport> {
    bisect(e, None, false, opts)
}

/// Same as [`solve_wc_posterior`] with the observed outcomes passed
/// through the noise model `ν`.
pub fn solve_wc_posterior_noisy(
    e: &StateEnsemble,
    nu: &NoiseModel,
    opts: &DesignOptions,
) -> Result<DesignReport> {
    bisect(e, Some(nu), false, opts)
}

/// Worst-case a-posteriori design with an extra inconclusive element
/// (index 0), optionally under noise of size `(m+1)×(m+1)`.
pub fn solve_wc_posterior_inconclusive(
    e: &StateEnsemble,
    nu: Option<&NoiseModel>,
    opts: &DesignOptions,
) -> Result<DesignReport> {
    bisect(e, nu, true, opts)
}

fn bisect(
    e: &StateEnsemble,
    noise: Option<&NoiseModel>,
    inconclusive: bool,
    opts: &DesignOptions,
) -> Result<DesignReport> {
    if !(opts.eps > 0.0) {
        return Err(Error::InvalidArgument(
            "bisection tolerance must be positive".into(),
        ));
    }
    check_noise(e, noise, inconclusive)?;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut steps = Vec::new();
    let mut diag = SolverDiagnostics::default();
    while hi - lo > opts.eps {
        let mid = 0.5 * (lo + hi);
        let pt = feasibility_at(e, mid, noise, inconclusive, opts.p_incl_max, &opts.sdp)?;
        diag.sdp_solves += 1;
        diag.total_iterations += pt.iterations;
        let feasible = pt.is_feasible();
        steps.push(BisectionStep {
            delta_min: lo,
            delta_max: hi,
            delta: mid,
            slack: pt.slack,
            feasible,
        });
        if feasible {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    // Certificate residuals scale like the square root of the gap.
    let tight = SdpSettings {
        tol_gap: opts.sdp.tol_gap.min(FINAL_GAP),
        ..opts.sdp.clone()
    };
    let mut fin = feasibility_at(e, hi, noise, inconclusive, opts.p_incl_max, &tight)?;
    diag.sdp_solves += 1;
    diag.total_iterations += fin.iterations;
    diag.final_iterations = fin.iterations;
    diag.final_gap = fin.gap;
    diag.final_primal_residual = fin.primal_residual;
    diag.final_dual_residual = fin.dual_residual;
    let mut lam = normalized(&fin.multipliers);
    if inconclusive {
        // O_0 = I meets every constraint, so the optimal set is rarely a
        // single POVM. Prefer the member whose least likely conclusive
        // outcome is as likely as possible; keep the feasibility point if
        // that solve does not converge.
        let k = e.len() + 1;
        let identity = NoiseModel::identity(k);
        let nu = noise.unwrap_or(&identity);
        let worst_of = |povm: &Povm| -> Result<f64> {
            let r = metrics::evaluate(povm, e, noise)?;
            Ok((0..e.len())
                .filter_map(|i| r.e_post[i].map(|v| e.weights()[i] * v))
                .fold(0.0f64, f64::max))
        };
        let mut done = false;
        if lo == 0.0 {
            diag.sdp_solves += 1;
            if let Ok(Some((povm, y, iters))) =
                unambiguous_design(e, nu, opts.p_incl_max, &opts.sdp)
            {
                let worst = worst_of(&povm)?;
                if worst <= hi {
                    diag.total_iterations += iters;
                    hi = worst;
                    fin.povm = povm;
                    fin.dual_y = y;
                    lam = None;
                    done = true;
                }
            }
        }
        if !done {
            diag.sdp_solves += 1;
            if let Ok(Some((povm, y, iters))) = face_design(e, &fin, nu, opts.p_incl_max, &opts.sdp)
            {
                if worst_of(&povm)? <= hi + opts.eps {
                    diag.total_iterations += iters;
                    fin.povm = povm;
                    fin.dual_y = y;
                    lam = None;
                    done = true;
                }
            }
        }
        if !done {
            diag.sdp_solves += 1;
            if let Ok((povm, y, iters)) = most_conclusive(e, hi, nu, opts.p_incl_max, &opts.sdp) {
                if worst_of(&povm)? <= hi + opts.eps {
                    diag.total_iterations += iters;
                    fin.povm = povm;
                    fin.dual_y = y;
                    lam = None;
                }
            }
        }
    }

    let report = metrics::evaluate(&fin.povm, e, noise)?;
    let tol = opts.certificate_tolerance();

    // Inequality duals first, then a least-squares fit; δ_opt lies anywhere
    // in the final bracket, so both ends are tried.
    let mut certificate =
        certify::certify_wc_posterior(&fin.povm, e, hi, lam.as_deref(), noise, tol)?;
    for (delta, l) in [(hi, None), (lo, lam.as_deref()), (lo, None)] {
        if certificate.passed {
            break;
        }
        if l.is_none() && delta == hi && lam.is_none() {
            continue;
        }
        let c = certify::certify_wc_posterior(&fin.povm, e, delta, l, noise, tol)?;
        if c.passed || c.worst_residual() < certificate.worst_residual() {
            certificate = c;
        }
    }
    let multipliers = certificate.multipliers.clone();
    let rank_one = opts
        .rank_one_ratio
        .map(|r| fin.povm.rank_one_approximation(r))
        .transpose()?;
    let all_ones = e.weights().iter().all(|&w| w == 1.0);
    Ok(DesignReport {
        criterion: if inconclusive {
            Criterion::WcPosteriorInconclusive
        } else {
            Criterion::WcPosterior
        },
        objective: hi,
        gamma: all_ones.then_some(1.0 - hi),
        unused_outcomes: unused_outcomes(&report),
        povm: fin.povm,
        noise: noise.cloned(),
        report,
        multipliers,
        dual_y: fin.dual_y,
        certificate,
        bisection: steps,
        diagnostics: diag,
        rank_one,
    })
}

fn normalized(l: &[f64]) -> Option<Vec<f64>> {
    let clipped: Vec<f64> = l.iter().map(|v| v.max(0.0)).collect();
    let s: f64 = clipped.iter().sum();
    (s > 0.0 && s.is_finite()).then(|| clipped.iter().map(|v| v / s).collect())
}

fn unused_outcomes(r: &ProbReport) -> Vec<usize> {
    r.state_outcome
        .iter()
        .copied()
        .filter(|&k| r.output_dist[k] <= P_OUT_FLOOR)
        .collect()
}

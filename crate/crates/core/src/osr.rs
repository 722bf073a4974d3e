//! Detector dynamics: uncertain unitary evolution ahead of the measurement,
//! and design of the channel `Q` in front of a fixed POVM through its
//! X-matrix in a basis `{B_μ}` of `n×n` matrices.
//!
//! Conventions: `K_k = Σ_μ a_kμ B_μ`, `X_μν = Σ_k a_kμ conj(a_kν)`, so that
//!
//! ```text
//! Q(ρ, X)   = Σ_μν X_μν B_μ ρ B_ν*
//! Σ K_k*K_k = Σ_μν X_μν B_ν* B_μ
//! Tr O Q(ρ, X) = Tr X R(ρ, O),   R_μν = Tr B_ν ρ B_μ* O
//! ```

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::design::{data_matrix, BisectionStep, Povm};
use crate::ensemble::{EnsembleOptions, StateEnsemble};
use crate::error::{Error, Result};
use crate::linalg::{c64, herm_eig, lu_solve_complex, max_eigenvalue, CMatrix, C64, HERMITIAN_TOL};
use crate::sdp::{solve_feasibility, BlockId, LinearForm, SdpProblem, SdpSettings, SdpStatus};

/// Tolerance on `U*U = I` and on the dynamics probabilities.
pub const UNITARY_TOL: f64 = 1e-9;
/// Outcome probabilities below this count as never observed.
const SILENT_TOL: f64 = 1e-10;

/// `ρ̂_j = Σ_k p_k U_k ρ_j U_k*`; priors and weights are kept.
pub fn apply_uncertain_dynamics(
    e: &StateEnsemble,
    unitaries: &[(CMatrix, f64)],
) -> Result<StateEnsemble> {
    if unitaries.is_empty() {
        return Err(Error::InvalidArgument("no unitaries given".into()));
    }
    let n = e.dim();
    let mut total = 0.0;
    for (k, (u, p)) in unitaries.iter().enumerate() {
        if u.rows() != n || u.cols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: u.rows(),
            });
        }
        let defect = (&u.adjoint().matmul(u) - &CMatrix::identity(n)).max_abs();
        if !(defect <= UNITARY_TOL) {
            return Err(Error::InvalidArgument(format!(
                "dynamics {k} is not unitary (defect {defect:.3e})"
            )));
        }
        if !(*p >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "dynamics probability {k} is negative"
            )));
        }
        total += p;
    }
    if (total - 1.0).abs() > UNITARY_TOL {
        return Err(Error::InvalidArgument(format!(
            "dynamics probabilities sum to {total}"
        )));
    }
    let states = e
        .states()
        .iter()
        .map(|rho| {
            let mut out = CMatrix::zeros(n, n);
            for (u, p) in unitaries {
                out.axpy(*p, &u.matmul(rho).matmul(&u.adjoint()));
            }
            out.hermitian_part()
        })
        .collect();
    let opts = EnsembleOptions {
        allow_singular: true,
        ..EnsembleOptions::default()
    };
    StateEnsemble::with_options(states, e.priors().to_vec(), e.weights().to_vec(), &opts)
}

#[derive(Debug, Clone)]
pub struct MatrixBasis {
    dim: usize,
    elements: Vec<CMatrix>,
    /// `G_μν = Tr B_μ* B_ν`.
    gram: CMatrix,
    condition: f64,
}

impl MatrixBasis {
    pub fn new(elements: Vec<CMatrix>) -> Result<Self> {
        let Some(first) = elements.first() else {
            return Err(Error::InvalidArgument("empty basis".into()));
        };
        let n = first.rows();
        if elements.len() != n * n {
            return Err(Error::InvalidArgument(format!(
                "a basis of {n}x{n} matrices needs {} elements",
                n * n
            )));
        }
        if let Some(b) = elements.iter().find(|b| b.rows() != n || b.cols() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: b.rows(),
            });
        }
        let k = n * n;
        let gram = CMatrix::from_fn(k, k, |m, v| {
            CMatrix::trace_product(&elements[m].adjoint(), &elements[v])
        });
        let eig = herm_eig(&gram.hermitian_part())?;
        if !(eig.min() > 1e-12 * eig.max()) {
            return Err(Error::InvalidArgument(
                "basis elements are linearly dependent".into(),
            ));
        }
        let condition = eig.max() / eig.min();
        Ok(Self {
            dim: n,
            elements,
            gram,
            condition,
        })
    }

    /// Matrix units `E_ab`, ordered row-major by `(a, b)`.
    pub fn standard(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        let elements = (0..n * n)
            .map(|m| {
                let mut b = CMatrix::zeros(n, n);
                b[(m / n, m % n)] = c64(1.0, 0.0);
                b
            })
            .collect();
        Self::new(elements)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[CMatrix] {
        &self.elements
    }

    pub fn element(&self, m: usize) -> &CMatrix {
        &self.elements[m]
    }

    pub fn gram(&self) -> &CMatrix {
        &self.gram
    }

    pub fn condition(&self) -> f64 {
        self.condition
    }

    /// Coefficients `a_μ` with `K = Σ a_μ B_μ`.
    pub fn coefficients(&self, k: &CMatrix) -> Result<Vec<C64>> {
        if k.rows() != self.dim || k.cols() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: k.rows(),
            });
        }
        let b: Vec<C64> = self
            .elements
            .iter()
            .map(|bm| CMatrix::trace_product(&bm.adjoint(), k))
            .collect();
        lu_solve_complex(self.gram.as_slice(), self.len(), &b)
    }

    pub fn combine(&self, a: &[C64]) -> CMatrix {
        let mut k = CMatrix::zeros(self.dim, self.dim);
        for (c, b) in a.iter().zip(&self.elements) {
            if *c != C64::new(0.0, 0.0) {
                k += &b.scale_c(*c);
            }
        }
        k
    }
}

pub fn standard_basis(n: usize) -> Result<MatrixBasis> {
    MatrixBasis::standard(n)
}

/// `R_μν = Tr B_ν ρ B_μ* O`, so that `Tr X R = Tr O Q(ρ, X)`.
pub fn build_r(rho: &CMatrix, o: &CMatrix, basis: &MatrixBasis) -> CMatrix {
    let k = basis.len();
    let left: Vec<CMatrix> = basis
        .elements()
        .iter()
        .map(|b| b.adjoint().matmul(o))
        .collect();
    let right: Vec<CMatrix> = basis.elements().iter().map(|b| b.matmul(rho)).collect();
    CMatrix::from_fn(k, k, |m, v| CMatrix::trace_product(&right[v], &left[m])).hermitian_part()
}

/// `Q(ρ, X) = Σ X_μν B_μ ρ B_ν*`.
pub fn channel_action(x: &CMatrix, rho: &CMatrix, basis: &MatrixBasis) -> CMatrix {
    let n = basis.dim();
    let mut out = CMatrix::zeros(n, n);
    let right: Vec<CMatrix> = basis
        .elements()
        .iter()
        .map(|b| rho.matmul(&b.adjoint()))
        .collect();
    for (m, bm) in basis.elements().iter().enumerate() {
        let mut acc = CMatrix::zeros(n, n);
        for (v, r) in right.iter().enumerate() {
            let c = x[(m, v)];
            if c != C64::new(0.0, 0.0) {
                acc += &r.scale_c(c);
            }
        }
        out += &bm.matmul(&acc);
    }
    out.hermitian_part()
}

/// `Σ X_μν B_ν* B_μ = Σ K_k*K_k`.
pub fn completeness(x: &CMatrix, basis: &MatrixBasis) -> CMatrix {
    let n = basis.dim();
    let mut out = CMatrix::zeros(n, n);
    for (m, bm) in basis.elements().iter().enumerate() {
        for (v, bv) in basis.elements().iter().enumerate() {
            let c = x[(m, v)];
            if c != C64::new(0.0, 0.0) {
                out += &bv.adjoint().matmul(bm).scale_c(c);
            }
        }
    }
    out.hermitian_part()
}

/// Linear form `X ↦ Re Tr E Σ X_μν B_ν* B_μ` as a block coefficient.
fn completeness_adjoint(e: &CMatrix, basis: &MatrixBasis) -> CMatrix {
    let k = basis.len();
    let eb: Vec<CMatrix> = basis
        .elements()
        .iter()
        .map(|b| e.matmul(&b.adjoint()))
        .collect();
    CMatrix::from_fn(k, k, |m, v| {
        CMatrix::trace_product(&eb[m], basis.element(v))
    })
    .hermitian_part()
}

#[derive(Debug, Clone)]
pub struct XMatrix {
    x: CMatrix,
    basis: MatrixBasis,
}

impl XMatrix {
    pub fn new(x: CMatrix, basis: MatrixBasis) -> Result<Self> {
        if x.rows() != basis.len() {
            return Err(Error::DimensionMismatch {
                expected: basis.len(),
                got: x.rows(),
            });
        }
        let x = x.checked_hermitian(HERMITIAN_TOL)?;
        let min = herm_eig(&x)?.min();
        if min < -1e-9 {
            return Err(Error::InvalidArgument(format!(
                "X is not PSD (eigenvalue {min:.3e})"
            )));
        }
        let top = max_eigenvalue(&completeness(&x, &basis))?;
        if top > 1.0 + 1e-8 {
            return Err(Error::InvalidArgument(format!(
                "Σ K*K exceeds the identity (eigenvalue {top:.6})"
            )));
        }
        Ok(Self { x, basis })
    }

    /// The identity channel, `K = I`.
    pub fn identity(basis: MatrixBasis) -> Result<Self> {
        Self::from_kraus(&[CMatrix::identity(basis.dim())], basis)
    }

    pub fn from_kraus(ops: &[CMatrix], basis: MatrixBasis) -> Result<Self> {
        let k = basis.len();
        let mut x = CMatrix::zeros(k, k);
        for op in ops {
            let a = basis.coefficients(op)?;
            for m in 0..k {
                for v in 0..k {
                    x[(m, v)] += a[m] * a[v].conj();
                }
            }
        }
        Self::new(x, basis)
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.x
    }

    pub fn basis(&self) -> &MatrixBasis {
        &self.basis
    }

    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        channel_action(&self.x, rho, &self.basis)
    }

    pub fn completeness(&self) -> CMatrix {
        completeness(&self.x, &self.basis)
    }

    pub fn trace(&self) -> f64 {
        self.x.trace().re
    }

    /// Largest eigenvalue over the trace; 1 for a single Kraus operator.
    pub fn rank_one_ratio(&self) -> Result<f64> {
        let t = self.trace();
        Ok(if t > 0.0 {
            max_eigenvalue(&self.x)? / t
        } else {
            0.0
        })
    }
}

#[derive(Debug, Clone)]
pub struct KrausSet {
    pub operators: Vec<CMatrix>,
    /// `K₀ = Σ K_k*K_k`.
    pub k0: CMatrix,
    /// Eigenvalues of X, descending, including the dropped ones.
    pub singular_values: Vec<f64>,
}

impl KrausSet {
    pub fn len(&self) -> usize {
        self.operators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.operators.is_empty()
    }

    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        let n = rho.rows();
        let mut out = CMatrix::zeros(n, n);
        for k in &self.operators {
            out += &k.matmul(rho).matmul(&k.adjoint());
        }
        out.hermitian_part()
    }

    /// `‖K₀ − I‖_F`; zero for a trace-preserving channel.
    pub fn trace_defect(&self) -> f64 {
        (&self.k0 - &CMatrix::identity(self.k0.rows())).frobenius_norm()
    }
}

/// Kraus operators from the eigendecomposition `X = V S V*`:
/// `a_kμ = √s_k V_μk`, keeping `s_k > tol·s₁`.
pub fn kraus_from_x(x: &XMatrix, tol: f64) -> Result<KrausSet> {
    let eig = herm_eig(x.matrix())?;
    let k = eig.values.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| eig.values[b].total_cmp(&eig.values[a]));
    let singular_values: Vec<f64> = order.iter().map(|&i| eig.values[i].max(0.0)).collect();
    let s1 = singular_values.first().copied().unwrap_or(0.0);
    let n = x.basis().dim();
    let mut operators = Vec::new();
    let mut k0 = CMatrix::zeros(n, n);
    for (&i, &s) in order.iter().zip(&singular_values) {
        if !(s > tol * s1) || s <= 0.0 {
            continue;
        }
        let a: Vec<C64> = eig.vector(i).iter().map(|v| v * s.sqrt()).collect();
        let op = x.basis().combine(&a);
        k0 += &op.adjoint().matmul(&op);
        operators.push(op);
    }
    Ok(KrausSet {
        operators,
        k0: k0.hermitian_part(),
        singular_values,
    })
}

#[derive(Debug, Clone)]
pub struct Refinement {
    pub restarts: usize,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for Refinement {
    fn default() -> Self {
        Self {
            restarts: 3,
            iterations: 8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OsrOptions {
    pub eps: f64,
    pub sdp: SdpSettings,
    /// `Tr X ≤ η`.
    pub eta: Option<f64>,
    /// `Tr X ≥ c₀`, which excludes `X = 0`.
    pub trace_floor: f64,
    /// Search the optimal set for an X dominated by one Kraus operator.
    pub refine: Option<Refinement>,
    /// Relative threshold for dropping Kraus operators.
    pub kraus_tol: f64,
}

impl Default for OsrOptions {
    fn default() -> Self {
        Self {
            eps: 1e-6,
            sdp: SdpSettings::default(),
            eta: None,
            trace_floor: 1e-3,
            refine: Some(Refinement::default()),
            kraus_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OsrDesign {
    /// Upper end of the final bisection bracket.
    pub objective: f64,
    /// Worst weighted posterior error evaluated at the returned X.
    pub achieved: f64,
    pub x: XMatrix,
    pub kraus: KrausSet,
    /// `p_in|out(i|i)` through the designed channel; `None` for silent
    /// outcomes.
    pub posterior: Vec<Option<f64>>,
    /// Outcomes the channel never produces.
    pub silent_outcomes: Vec<usize>,
    pub bisection: Vec<BisectionStep>,
    pub sdp_solves: usize,
}

/// Weighted errors `w_i (1 − p_i Tr O_i Q(ρ_i) / Tr O_i Q(ρ))` and the
/// posteriors behind them.
pub fn posterior_through(e: &StateEnsemble, povm: &Povm, x: &XMatrix) -> Result<Vec<Option<f64>>> {
    let offset = check_povm(e, povm)?;
    let q_rho = x.apply(e.mixture());
    Ok((0..e.len())
        .map(|i| {
            let o = povm.element(i + offset);
            let den = CMatrix::trace_product_re(o, &q_rho);
            (den > SILENT_TOL)
                .then(|| e.priors()[i] * CMatrix::trace_product_re(o, &x.apply(e.state(i))) / den)
        })
        .collect())
}

fn worst_error(e: &StateEnsemble, post: &[Option<f64>]) -> f64 {
    post.iter()
        .zip(e.weights())
        .filter_map(|(p, &w)| p.map(|p| w * (1.0 - p)))
        .fold(0.0, f64::max)
}

fn check_povm(e: &StateEnsemble, povm: &Povm) -> Result<usize> {
    let offset = usize::from(povm.has_inconclusive());
    if povm.dim() != e.dim() {
        return Err(Error::DimensionMismatch {
            expected: e.dim(),
            got: povm.dim(),
        });
    }
    if povm.len() != e.len() + offset {
        return Err(Error::InvalidPovm(format!(
            "{} elements for {} states",
            povm.len(),
            e.len()
        )));
    }
    Ok(offset)
}

struct OsrProblem {
    problem: SdpProblem,
    x: BlockId,
}

/// Constraints shared by the feasibility and refinement solves. Rows read
/// `Tr X R(A_i(δ), O_i) ≤ s` (or `≤ 0` without a slack).
fn osr_problem(
    e: &StateEnsemble,
    povm: &Povm,
    basis: &MatrixBasis,
    delta: f64,
    opts: &OsrOptions,
    slack: bool,
    objective: impl FnOnce(BlockId) -> LinearForm,
) -> (OsrProblem, Option<crate::sdp::ScalarId>) {
    let offset = usize::from(povm.has_inconclusive());
    let mut p = SdpProblem::with_settings(opts.sdp.clone());
    let x = p.add_named_block(basis.len(), "X");
    let s_block = p.add_named_block(basis.dim(), "slack");
    let s = slack.then(|| p.add_scalar());
    p.add_matrix_equality_map(&CMatrix::identity(basis.dim()), |em| {
        LinearForm::new()
            .with_block(x, completeness_adjoint(em, basis))
            .with_block(s_block, em.clone())
    });
    for i in 0..e.len() {
        if e.weights()[i] <= 0.0 {
            continue;
        }
        let r = build_r(&data_matrix(e, i, delta), povm.element(i + offset), basis);
        let mut form = LinearForm::new().with_block(x, r);
        if let Some(s) = s {
            form.add_scalar(s, -1.0);
        }
        p.add_inequality(form, 0.0);
    }
    let eye = CMatrix::identity(basis.len());
    p.add_inequality(
        LinearForm::new().with_block(x, eye.scale(-1.0)),
        -opts.trace_floor,
    );
    if let Some(eta) = opts.eta {
        p.add_inequality(LinearForm::new().with_block(x, eye), eta);
    }
    let obj = match s {
        Some(s) => LinearForm::new().with_scalar(s, 1.0),
        None => objective(x),
    };
    p.set_objective(obj);
    (OsrProblem { problem: p, x }, s)
}

/// Projects a solver iterate onto valid X-matrices: Hermitian, PSD and
/// `Σ K*K ⪯ I`. Scaling leaves every posterior unchanged.
fn clean_x(x: &CMatrix, basis: &MatrixBasis) -> Result<XMatrix> {
    let x = herm_eig(&x.hermitian_part())?
        .map(|l| l.max(0.0))
        .hermitian_part();
    let top = max_eigenvalue(&completeness(&x, basis))?;
    let x = if top > 1.0 { x.scale(1.0 / top) } else { x };
    XMatrix::new(x, basis.clone())
}

const STALL_FEAS: f64 = 1e-8;

struct Point {
    slack: f64,
    x: CMatrix,
}

fn feasibility(
    e: &StateEnsemble,
    povm: &Povm,
    basis: &MatrixBasis,
    delta: f64,
    opts: &OsrOptions,
) -> Result<Point> {
    let (op, s) = osr_problem(e, povm, basis, delta, opts, true, |_| LinearForm::new());
    let f = solve_feasibility(&op.problem, s.expect("slack scalar"))?;
    let sol = &f.solution;
    match sol.status {
        SdpStatus::Optimal => {}
        // Stalled solves count as feasible only with a primal-feasible witness.
        SdpStatus::MaxIter if sol.primal_residual <= STALL_FEAS && f.slack <= 0.0 => {}
        SdpStatus::MaxIter => {
            return Ok(Point {
                slack: f64::INFINITY,
                x: sol.block(op.x).clone(),
            })
        }
        status => {
            return Err(Error::Solver {
                status,
                iterations: sol.iterations,
            })
        }
    }
    Ok(Point {
        slack: f.slack,
        x: sol.block(op.x).clone(),
    })
}

fn random_direction(rng: &mut ChaCha8Rng, k: usize) -> Vec<C64> {
    let mut u = || (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64) * 2.0 - 1.0;
    (0..k).map(|_| c64(u(), u())).collect()
}

fn top_vector(x: &CMatrix) -> Result<Vec<C64>> {
    let eig = herm_eig(x)?;
    let k = (0..eig.values.len())
        .max_by(|&a, &b| eig.values[a].total_cmp(&eig.values[b]))
        .unwrap_or(0);
    Ok(eig.vector(k))
}

/// Repeatedly maximizes `Tr X vv*` over the optimal set, with `v` the top
/// eigenvector of the previous X. Each step can only raise `λ_max(X)`.
#[allow(clippy::too_many_arguments)]
fn refine(
    e: &StateEnsemble,
    povm: &Povm,
    basis: &MatrixBasis,
    delta: f64,
    start: XMatrix,
    opts: &OsrOptions,
    r: &Refinement,
    solves: &mut usize,
) -> Result<XMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(r.seed);
    let budget = delta + opts.eps;
    let mut best_ratio = start.rank_one_ratio()?;
    let mut best = start;
    let first = top_vector(best.matrix())?;
    for restart in 0..=r.restarts {
        let mut v = if restart == 0 {
            first.clone()
        } else {
            random_direction(&mut rng, basis.len())
        };
        let mut last = f64::NEG_INFINITY;
        for _ in 0..r.iterations {
            let target = CMatrix::outer(&v).scale(-1.0);
            let (op, _) = osr_problem(e, povm, basis, delta, opts, false, |x| {
                LinearForm::new().with_block(x, target)
            });
            *solves += 1;
            // Near δ = 0 the rows leave almost no interior and the solver
            // may stop at its iteration limit; the iterate is checked below.
            let Ok(sol) = op.problem.solve() else { break };
            if !matches!(sol.status, SdpStatus::Optimal | SdpStatus::MaxIter) {
                break;
            }
            let Ok(x) = clean_x(sol.block(op.x), basis) else {
                break;
            };
            if x.trace() < opts.trace_floor * (1.0 - 1e-6) {
                break;
            }
            if worst_error(e, &posterior_through(e, povm, &x)?) > budget {
                break;
            }
            let ratio = x.rank_one_ratio()?;
            if ratio > best_ratio {
                best_ratio = ratio;
                best = x.clone();
            }
            let top = max_eigenvalue(x.matrix())?;
            if top <= last + 1e-9 {
                break;
            }
            last = top;
            v = top_vector(x.matrix())?;
        }
        if best_ratio > 1.0 - 1e-9 {
            break;
        }
    }
    Ok(best)
}

/// Bisection on the worst-case posterior error over channels `Q` in front
/// of a fixed POVM.
pub fn solve_fixed_povm_design(
    e: &StateEnsemble,
    povm: &Povm,
    basis: &MatrixBasis,
    opts: &OsrOptions,
) -> Result<OsrDesign> {
    check_povm(e, povm)?;
    if basis.dim() != e.dim() {
        return Err(Error::DimensionMismatch {
            expected: e.dim(),
            got: basis.dim(),
        });
    }
    if !(opts.eps > 0.0) || !(opts.trace_floor > 0.0) {
        return Err(Error::InvalidArgument(
            "eps and the trace floor must be positive".into(),
        ));
    }
    if let Some(eta) = opts.eta {
        if !(eta >= opts.trace_floor) {
            return Err(Error::InvalidArgument(format!(
                "eta {eta} is below the trace floor {}",
                opts.trace_floor
            )));
        }
    }
    let mut lo = 0.0f64;
    let mut hi = e.weights().iter().copied().fold(0.0, f64::max);
    let mut steps = Vec::new();
    let mut solves = 0;
    let mut best: Option<CMatrix> = None;
    while hi - lo > opts.eps {
        let mid = 0.5 * (lo + hi);
        let pt = feasibility(e, povm, basis, mid, opts)?;
        solves += 1;
        let feasible = pt.slack <= 0.0;
        steps.push(BisectionStep {
            delta_min: lo,
            delta_max: hi,
            delta: mid,
            slack: pt.slack,
            feasible,
        });
        if feasible {
            hi = mid;
            best = Some(pt.x);
        } else {
            lo = mid;
        }
    }
    let x = match best {
        Some(x) => x,
        None => {
            solves += 1;
            let pt = feasibility(e, povm, basis, hi, opts)?;
            if pt.slack > opts.eps {
                return Err(Error::InvalidArgument(format!(
                    "no channel meets the constraints at delta = {hi} (slack {:.3e})",
                    pt.slack
                )));
            }
            pt.x
        }
    };
    let mut x = clean_x(&x, basis)?;
    if let Some(r) = &opts.refine {
        x = refine(e, povm, basis, hi, x, opts, r, &mut solves)?;
    }
    let posterior = posterior_through(e, povm, &x)?;
    let achieved = worst_error(e, &posterior);
    let silent_outcomes = posterior
        .iter()
        .enumerate()
        .filter(|(_, p)| p.is_none())
        .map(|(i, _)| i)
        .collect();
    let kraus = kraus_from_x(&x, opts.kraus_tol)?;
    Ok(OsrDesign {
        objective: hi,
        achieved,
        x,
        kraus,
        posterior,
        silent_outcomes,
        bisection: steps,
        sdp_solves: solves,
    })
}

/// Default trace bounds for the rank/performance tradeoff: `n², n, 2, 1.1`.
pub fn default_eta_grid(n: usize) -> Vec<f64> {
    let nf = n as f64;
    let mut g = vec![nf * nf, nf, 2.0, 1.1];
    g.dedup();
    g
}

/// One design per trace bound, in the given order.
pub fn eta_sweep(
    e: &StateEnsemble,
    povm: &Povm,
    basis: &MatrixBasis,
    etas: &[f64],
    opts: &OsrOptions,
) -> Vec<(f64, Result<OsrDesign>)> {
    etas.iter()
        .map(|&eta| {
            let o = OsrOptions {
                eta: Some(eta),
                ..opts.clone()
            };
            (eta, solve_fixed_povm_design(e, povm, basis, &o))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rng_matrix(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
        let d = random_direction(rng, n * n);
        CMatrix::from_vec(n, n, d).unwrap()
    }

    fn random_state(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
        let g = rng_matrix(rng, n);
        let s = g.matmul(&g.adjoint());
        let t = s.trace().re;
        s.scale(1.0 / t)
    }

    fn random_x(rng: &mut ChaCha8Rng, basis: &MatrixBasis) -> XMatrix {
        let g = rng_matrix(rng, basis.len());
        let x = g.matmul(&g.adjoint());
        let top = max_eigenvalue(&completeness(&x, basis)).unwrap();
        XMatrix::new(x.scale(0.9 / top), basis.clone()).unwrap()
    }

    fn flip() -> CMatrix {
        CMatrix::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]).unwrap()
    }

    fn basis_state(n: usize, k: usize) -> CMatrix {
        let mut m = CMatrix::zeros(n, n);
        m[(k, k)] = c64(1.0, 0.0);
        m
    }

    fn natural_povm(n: usize) -> Povm {
        Povm::new((0..n).map(|k| basis_state(n, k)).collect(), false).unwrap()
    }

    #[test]
    fn dynamics() {
        let e =
            StateEnsemble::new(vec![basis_state(2, 0), basis_state(2, 1)], vec![0.5, 0.5]).unwrap();
        let same = apply_uncertain_dynamics(&e, &[(CMatrix::identity(2), 1.0)]).unwrap();
        assert!((same.state(0) - e.state(0)).max_abs() < 1e-15);
        let mixed =
            apply_uncertain_dynamics(&e, &[(CMatrix::identity(2), 0.5), (flip(), 0.5)]).unwrap();
        assert!((mixed.state(0) - &CMatrix::identity(2).scale(0.5)).max_abs() < 1e-15);
        assert_eq!(mixed.priors(), e.priors());
        assert!(apply_uncertain_dynamics(&e, &[(CMatrix::identity(2).scale(1.1), 1.0)]).is_err());
        assert!(apply_uncertain_dynamics(&e, &[(CMatrix::identity(2), 0.7)]).is_err());
    }

    #[test]
    fn standard_bases() {
        let b1 = standard_basis(1).unwrap();
        assert_eq!(b1.len(), 1);
        let b2 = standard_basis(2).unwrap();
        assert!((b2.gram() - &CMatrix::identity(4)).max_abs() < 1e-15);
        for n in 1..=8 {
            assert!((standard_basis(n).unwrap().condition() - 1.0).abs() < 1e-12);
        }
        let mut dup = b2.elements().to_vec();
        dup[3] = dup[0].clone();
        assert!(MatrixBasis::new(dup).is_err());
    }

    #[test]
    fn identity_channel_r() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let basis = standard_basis(3).unwrap();
        let id = XMatrix::identity(basis.clone()).unwrap();
        for _ in 0..5 {
            let rho = random_state(&mut rng, 3);
            let o = random_state(&mut rng, 3);
            let r = build_r(&rho, &o, &basis);
            let lhs = CMatrix::trace_product_re(id.matrix(), &r);
            assert!((lhs - CMatrix::trace_product_re(&o, &rho)).abs() < 1e-12);
            assert!(r.hermiticity_defect() < 1e-12);
        }
        let k = kraus_from_x(&id, 1e-9).unwrap();
        assert_eq!(k.len(), 1);
        let phase = k.operators[0][(0, 0)];
        assert!((&k.operators[0].scale_c(phase.conj()) - &CMatrix::identity(3)).max_abs() < 1e-12);
        assert!(k.trace_defect() < 1e-12);
    }

    #[test]
    fn r_matches_direct_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let basis = standard_basis(2).unwrap();
        for _ in 0..10 {
            let x = random_x(&mut rng, &basis);
            let rho = random_state(&mut rng, 2);
            let o = random_state(&mut rng, 2);
            let mut direct = C64::new(0.0, 0.0);
            for m in 0..4 {
                for v in 0..4 {
                    let t = o
                        .matmul(basis.element(m))
                        .matmul(&rho)
                        .matmul(&basis.element(v).adjoint());
                    direct += x.matrix()[(m, v)] * t.trace();
                }
            }
            let via_r = CMatrix::trace_product_re(x.matrix(), &build_r(&rho, &o, &basis));
            assert!((via_r - direct.re).abs() < 1e-10 && direct.im.abs() < 1e-10);
        }
    }

    #[test]
    fn kraus_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let basis = standard_basis(2).unwrap();
        for _ in 0..10 {
            let x = random_x(&mut rng, &basis);
            let k = kraus_from_x(&x, 0.0).unwrap();
            let back = XMatrix::from_kraus(&k.operators, basis.clone()).unwrap();
            assert!((back.matrix() - x.matrix()).max_abs() < 1e-8);
            assert!((&k.k0 - &x.completeness()).max_abs() < 1e-10);
            for _ in 0..3 {
                let rho = random_state(&mut rng, 2);
                assert!((&k.apply(&rho) - &x.apply(&rho)).max_abs() < 1e-8);
            }
        }
    }

    #[test]
    fn truncation_changes_little() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let basis = standard_basis(2).unwrap();
        let u = CMatrix::from_real(2, 2, &[0.6, -0.8, 0.8, 0.6]).unwrap();
        let mut ops = vec![u.scale(0.9999995f64.sqrt())];
        ops.push(CMatrix::identity(2).scale(1e-4 * rng_unit(&mut rng)));
        let x = XMatrix::from_kraus(&ops, basis).unwrap();
        let full = kraus_from_x(&x, 0.0).unwrap();
        let cut = kraus_from_x(&x, 1e-6).unwrap();
        assert!(cut.len() < full.len());
        for _ in 0..5 {
            let rho = random_state(&mut rng, 2);
            assert!((&cut.apply(&rho) - &full.apply(&rho)).max_abs() <= 1e-4);
        }
    }

    fn rng_unit(rng: &mut ChaCha8Rng) -> f64 {
        0.5 + 0.5 * random_direction(rng, 1)[0].re.abs()
    }

    #[test]
    fn perfect_states_need_no_channel() {
        let e =
            StateEnsemble::new(vec![basis_state(2, 0), basis_state(2, 1)], vec![0.5, 0.5]).unwrap();
        let basis = standard_basis(2).unwrap();
        let d =
            solve_fixed_povm_design(&e, &natural_povm(2), &basis, &OsrOptions::default()).unwrap();
        assert!(d.objective <= 1e-6);
        assert!(d.achieved <= 1e-6);
        assert!(d.silent_outcomes.is_empty());
    }

    #[test]
    fn rejects_bad_eta() {
        let e =
            StateEnsemble::new(vec![basis_state(2, 0), basis_state(2, 1)], vec![0.5, 0.5]).unwrap();
        let opts = OsrOptions {
            eta: Some(1e-4),
            ..OsrOptions::default()
        };
        assert!(
            solve_fixed_povm_design(&e, &natural_povm(2), &standard_basis(2).unwrap(), &opts)
                .is_err()
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn channel_action_is_trace_bounded(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let basis = standard_basis(2).unwrap();
            let x = random_x(&mut rng, &basis);
            let rho = random_state(&mut rng, 2);
            let q = x.apply(&rho);
            prop_assert!(q.trace().re <= 1.0 + 1e-9);
            prop_assert!(herm_eig(&q).unwrap().min() >= -1e-12);
            let k = kraus_from_x(&x, 0.0).unwrap();
            prop_assert!((&k.apply(&rho) - &q).max_abs() < 1e-8);
        }
    }
}

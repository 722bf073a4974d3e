//! Primal-dual interior-point solver for small dense SDPs over complex
//! Hermitian PSD blocks, free scalars, linear equalities and scalar
//! inequalities.
//!
//! Standard form:
//!
//! ```text
//! minimize    Σ_b Re Tr(C_b X_b) + Σ_f c_f s_f
//! subject to  linear equalities (scalar rows or Hermitian-valued maps)
//!             linear scalar inequalities  form ≤ rhs
//!             X_b ⪰ 0
//! ```
//!
//! Dual variables follow the Lagrangian `L = obj − Σ y_k (a_k(x) − b_k)`:
//! for a matrix equality the dual is the Hermitian `Y` with
//! `Z_b = C_b − Σ A*_b(Y) ⪰ 0`, and inequality multipliers are `λ ≥ 0`.

mod ipm;

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{hermitian_basis, hermitian_from_coords, CMatrix};

pub use ipm::IterationLog;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BlockId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ScalarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EqualityId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatrixEqualityId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InequalityId(pub usize);

/// Real-linear functional `Σ Re Tr(M_b X_b) + Σ c_f s_f`.
#[derive(Debug, Clone, Default)]
pub struct LinearForm {
    pub blocks: Vec<(BlockId, CMatrix)>,
    pub scalars: Vec<(ScalarId, f64)>,
}

impl LinearForm {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_block(mut self, b: BlockId, m: CMatrix) -> Self {
        self.blocks.push((b, m));
        self
    }

    pub fn with_scalar(mut self, s: ScalarId, c: f64) -> Self {
        self.scalars.push((s, c));
        self
    }

    pub fn add_block(&mut self, b: BlockId, m: CMatrix) {
        self.blocks.push((b, m));
    }

    pub fn add_scalar(&mut self, s: ScalarId, c: f64) {
        self.scalars.push((s, c));
    }

    pub fn evaluate(&self, blocks: &[CMatrix], scalars: &[f64]) -> f64 {
        let mut v = 0.0;
        for (b, m) in &self.blocks {
            v += CMatrix::trace_product_re(m, &blocks[b.0]);
        }
        for (s, c) in &self.scalars {
            v += c * scalars[s.0];
        }
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    MaxIter,
}

#[derive(Debug, Clone)]
pub struct SdpSettings {
    pub max_iter: usize,
    /// Target relative gap and infeasibility for normal termination.
    pub tol_gap: f64,
    pub tol_feas: f64,
    /// Looser tolerances accepted when progress stalls before the target.
    pub accept_gap: f64,
    pub accept_feas: f64,
    /// Limit on the total number of real variables.
    pub max_dim: usize,
    pub step_fraction: f64,
}

impl Default for SdpSettings {
    fn default() -> Self {
        Self {
            max_iter: 200,
            tol_gap: 1e-10,
            tol_feas: 1e-10,
            accept_gap: 1e-7,
            accept_feas: 1e-8,
            max_dim: 4096,
            step_fraction: 0.98,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Row {
    pub form: LinearForm,
    pub rhs: f64,
    /// Index of the LP slack carried by inequality rows.
    pub slack: Option<usize>,
}

#[derive(Debug, Clone)]
struct MatrixEquality {
    dim: usize,
    first_row: usize,
}

#[derive(Debug, Clone, Default)]
pub struct SdpProblem {
    block_dims: Vec<usize>,
    block_names: Vec<String>,
    n_scalars: usize,
    objective: LinearForm,
    rows: Vec<Row>,
    equalities: Vec<usize>,
    inequalities: Vec<usize>,
    matrix_equalities: Vec<MatrixEquality>,
    pub settings: SdpSettings,
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub status: SdpStatus,
    pub blocks: Vec<CMatrix>,
    pub scalars: Vec<f64>,
    /// Multipliers of scalar equalities, in insertion order.
    pub dual_eq: Vec<f64>,
    /// Hermitian multipliers `Y` of matrix equalities, in insertion order.
    pub dual_matrix_eq: Vec<CMatrix>,
    /// Dual slack blocks `Z_b ⪰ 0`.
    pub dual_psd: Vec<CMatrix>,
    /// Inequality multipliers `λ ≥ 0`, in insertion order.
    pub dual_ineq: Vec<f64>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub gap: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub iterations: usize,
    pub trace: Vec<IterationLog>,
}

impl SdpSolution {
    pub fn objective(&self) -> f64 {
        self.primal_objective
    }

    pub fn is_optimal(&self) -> bool {
        self.status == SdpStatus::Optimal
    }

    pub fn block(&self, b: BlockId) -> &CMatrix {
        &self.blocks[b.0]
    }

    pub fn scalar(&self, s: ScalarId) -> f64 {
        self.scalars[s.0]
    }

    pub fn inequality_dual(&self, i: InequalityId) -> f64 {
        self.dual_ineq[i.0]
    }

    pub fn matrix_dual(&self, i: MatrixEqualityId) -> &CMatrix {
        &self.dual_matrix_eq[i.0]
    }

    /// Largest `‖Z_b X_b‖_F` over blocks.
    pub fn complementarity(&self) -> f64 {
        self.blocks
            .iter()
            .zip(&self.dual_psd)
            .map(|(x, z)| z.matmul(x).frobenius_norm())
            .fold(0.0, f64::max)
    }

    /// Errors out unless the status is optimal.
    pub fn require_optimal(self) -> Result<Self> {
        if self.is_optimal() {
            Ok(self)
        } else {
            Err(Error::Solver {
                status: self.status,
                iterations: self.iterations,
            })
        }
    }
}

impl SdpProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_settings(settings: SdpSettings) -> Self {
        Self {
            settings,
            ..Self::default()
        }
    }

    /// Adds an `n×n` Hermitian PSD variable.
    pub fn add_block(&mut self, n: usize) -> BlockId {
        self.add_named_block(n, "")
    }

    pub fn add_named_block(&mut self, n: usize, name: &str) -> BlockId {
        self.block_dims.push(n);
        self.block_names.push(String::from(name));
        BlockId(self.block_dims.len() - 1)
    }

    /// Adds a free real variable.
    pub fn add_scalar(&mut self) -> ScalarId {
        self.n_scalars += 1;
        ScalarId(self.n_scalars - 1)
    }

    pub fn block_dim(&self, b: BlockId) -> usize {
        self.block_dims[b.0]
    }

    pub fn num_blocks(&self) -> usize {
        self.block_dims.len()
    }

    pub fn num_scalars(&self) -> usize {
        self.n_scalars
    }

    pub fn set_objective(&mut self, form: LinearForm) {
        self.objective = form;
    }

    pub fn add_equality(&mut self, form: LinearForm, rhs: f64) -> EqualityId {
        self.rows.push(Row {
            form,
            rhs,
            slack: None,
        });
        self.equalities.push(self.rows.len() - 1);
        EqualityId(self.equalities.len() - 1)
    }

    /// Adds `form ≤ rhs`.
    pub fn add_inequality(&mut self, form: LinearForm, rhs: f64) -> InequalityId {
        let slack = self.inequalities.len();
        self.rows.push(Row {
            form,
            rhs,
            slack: Some(slack),
        });
        self.inequalities.push(self.rows.len() - 1);
        InequalityId(slack)
    }

    /// Adds `Σ_t c_t X_{b_t} = rhs` for a Hermitian right-hand side.
    pub fn add_matrix_equality(
        &mut self,
        rhs: &CMatrix,
        terms: &[(BlockId, f64)],
    ) -> MatrixEqualityId {
        self.add_matrix_equality_map(rhs, |e| {
            let mut f = LinearForm::new();
            for &(b, c) in terms {
                f.add_block(b, e.scale(c));
            }
            f
        })
    }

    /// Adds a Hermitian-valued equality `F(x) = rhs` described through its
    /// adjoint: `adjoint(E)` must return the linear form `x ↦ Re Tr(E F(x))`
    /// for each Hermitian test matrix `E`.
    pub fn add_matrix_equality_map(
        &mut self,
        rhs: &CMatrix,
        mut adjoint: impl FnMut(&CMatrix) -> LinearForm,
    ) -> MatrixEqualityId {
        let k = rhs.rows();
        let first_row = self.rows.len();
        for e in hermitian_basis(k) {
            let rhs_k = CMatrix::trace_product_re(&e, rhs);
            let form = adjoint(&e);
            self.rows.push(Row {
                form,
                rhs: rhs_k,
                slack: None,
            });
        }
        self.matrix_equalities
            .push(MatrixEquality { dim: k, first_row });
        MatrixEqualityId(self.matrix_equalities.len() - 1)
    }

    fn validate(&self) -> Result<()> {
        let check_form = |f: &LinearForm, what: &str| -> Result<()> {
            for (b, m) in &f.blocks {
                let n = *self.block_dims.get(b.0).ok_or_else(|| {
                    Error::InvalidProblem(alloc::format!("{what}: unknown block {}", b.0))
                })?;
                if m.rows() != n || m.cols() != n {
                    return Err(Error::InvalidProblem(alloc::format!(
                        "{what}: coefficient for block {} is {}x{}, expected {n}x{n}",
                        b.0,
                        m.rows(),
                        m.cols()
                    )));
                }
                if !m.is_finite() {
                    return Err(Error::NonFinite);
                }
                if m.hermiticity_defect() > 1e-8 * (1.0 + m.frobenius_norm()) {
                    return Err(Error::InvalidProblem(alloc::format!(
                        "{what}: coefficient for block {} is not Hermitian",
                        b.0
                    )));
                }
            }
            for (s, c) in &f.scalars {
                if s.0 >= self.n_scalars {
                    return Err(Error::InvalidProblem(alloc::format!(
                        "{what}: unknown scalar {}",
                        s.0
                    )));
                }
                if !c.is_finite() {
                    return Err(Error::NonFinite);
                }
            }
            Ok(())
        };
        if self.block_dims.contains(&0) {
            return Err(Error::InvalidProblem("zero-sized block".into()));
        }
        let dim: usize = self.block_dims.iter().map(|n| n * n).sum::<usize>()
            + self.n_scalars
            + self.inequalities.len();
        if dim > self.settings.max_dim {
            return Err(Error::InvalidProblem(alloc::format!(
                "{dim} real variables exceed the limit of {}",
                self.settings.max_dim
            )));
        }
        check_form(&self.objective, "objective")?;
        for (k, r) in self.rows.iter().enumerate() {
            check_form(&r.form, &alloc::format!("constraint row {k}"))?;
            if !r.rhs.is_finite() {
                return Err(Error::NonFinite);
            }
        }
        Ok(())
    }

    pub fn solve(&self) -> Result<SdpSolution> {
        self.validate()?;
        let raw = ipm::solve(self)?;
        let dual_eq = self.equalities.iter().map(|&r| raw.y[r]).collect();
        let dual_ineq = self.inequalities.iter().map(|&r| -raw.y[r]).collect();
        let dual_matrix_eq = self
            .matrix_equalities
            .iter()
            .map(|me| {
                let coords: Vec<f64> = raw.y[me.first_row..me.first_row + me.dim * me.dim].to_vec();
                hermitian_from_coords(me.dim, &coords)
            })
            .collect();
        Ok(SdpSolution {
            status: raw.status,
            blocks: raw.x,
            scalars: raw.free,
            dual_eq,
            dual_matrix_eq,
            dual_psd: raw.z,
            dual_ineq,
            primal_objective: raw.pobj,
            dual_objective: raw.dobj,
            gap: raw.gap,
            primal_residual: raw.pinf,
            dual_residual: raw.dinf,
            iterations: raw.iterations,
            trace: raw.trace,
        })
    }
}

/// Outcome of a slack-minimizing feasibility SDP `min s s.t. g_k(x) ≤ s`.
#[derive(Debug, Clone)]
pub struct Feasibility {
    pub solution: SdpSolution,
    pub slack: f64,
}

impl Feasibility {
    /// Feasible when the optimal slack is non-positive within `tol`.
    pub fn is_feasible(&self, tol: f64) -> bool {
        self.slack <= tol
    }
}

/// Solves a problem whose objective is the free slack `s`; the sign of the
/// optimal slack decides feasibility of the original constraint system.
pub fn solve_feasibility(p: &SdpProblem, s: ScalarId) -> Result<Feasibility> {
    let solution = p.solve()?;
    let slack = solution.scalar(s);
    Ok(Feasibility { solution, slack })
}

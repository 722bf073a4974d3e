use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::eig::herm_eig_sym;
use crate::linalg::{inv_sqrt, CMatrix};

/// Tolerance on negative eigenvalues of POVM elements.
pub const POVM_PSD_TOL: f64 = 1e-9;
/// Tolerance on `‖Σ O_i − I‖_F`.
pub const POVM_SUM_TOL: f64 = 1e-8;

/// Ordered POVM. When `has_inconclusive` is set, element 0 is the
/// inconclusive outcome and elements `1..=m` are matched to states `0..m`.
#[derive(Debug, Clone, PartialEq)]
pub struct Povm {
    elements: Vec<CMatrix>,
    has_inconclusive: bool,
}

/// How far a candidate is from being a POVM.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PovmDefect {
    /// Largest `max(0, −λ_min(O_i))`.
    pub psd_violation: f64,
    /// `‖Σ O_i − I‖_F`.
    pub resolution_defect: f64,
}

impl PovmDefect {
    pub fn is_feasible(&self) -> bool {
        self.psd_violation <= POVM_PSD_TOL && self.resolution_defect <= POVM_SUM_TOL
    }

    pub fn is_feasible_within(&self, tol: f64) -> bool {
        self.psd_violation <= tol && self.resolution_defect <= tol
    }
}

/// Result of the rank-one approximation of a POVM.
#[derive(Debug, Clone)]
pub struct RankOneApproximation {
    pub povm: Povm,
    /// Which elements were replaced by their dominant rank-one part.
    pub replaced: Vec<bool>,
}

impl Povm {
    /// Validated POVM.
    pub fn new(elements: Vec<CMatrix>, has_inconclusive: bool) -> Result<Self> {
        let p = Self::new_unchecked(elements, has_inconclusive)?;
        let d = p.defect()?;
        if d.psd_violation > POVM_PSD_TOL {
            return Err(Error::InvalidPovm(format!(
                "element not positive semidefinite (violation {:.3e})",
                d.psd_violation
            )));
        }
        if d.resolution_defect > POVM_SUM_TOL {
            return Err(Error::InvalidPovm(format!(
                "elements do not sum to the identity (defect {:.3e})",
                d.resolution_defect
            )));
        }
        Ok(p)
    }

    /// Shape-checked and symmetrized, but not checked for positivity or
    /// completeness. Used for candidates whose feasibility is itself under
    /// test.
    pub fn new_unchecked(elements: Vec<CMatrix>, has_inconclusive: bool) -> Result<Self> {
        if elements.is_empty() {
            return Err(Error::InvalidPovm("no elements".into()));
        }
        if has_inconclusive && elements.len() < 2 {
            return Err(Error::InvalidPovm(
                "an inconclusive POVM needs at least two elements".into(),
            ));
        }
        let n = elements[0].rows();
        let mut out = Vec::with_capacity(elements.len());
        for (i, e) in elements.iter().enumerate() {
            if e.rows() != n || e.cols() != n {
                return Err(Error::InvalidPovm(format!(
                    "element {i} is {}x{}, expected {n}x{n}",
                    e.rows(),
                    e.cols()
                )));
            }
            let h = e
                .checked_hermitian(crate::linalg::HERMITIAN_TOL)
                .map_err(|err| Error::InvalidPovm(format!("element {i}: {err}")))?;
            out.push(h);
        }
        Ok(Self {
            elements: out,
            has_inconclusive,
        })
    }

    pub fn dim(&self) -> usize {
        self.elements[0].rows()
    }

    /// Total number of elements, including the inconclusive one.
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[CMatrix] {
        &self.elements
    }

    pub fn element(&self, i: usize) -> &CMatrix {
        &self.elements[i]
    }

    pub fn has_inconclusive(&self) -> bool {
        self.has_inconclusive
    }

    pub fn inconclusive(&self) -> Option<&CMatrix> {
        self.has_inconclusive.then(|| &self.elements[0])
    }

    /// Elements that declare a state.
    pub fn conclusive(&self) -> &[CMatrix] {
        if self.has_inconclusive {
            &self.elements[1..]
        } else {
            &self.elements
        }
    }

    pub fn defect(&self) -> Result<PovmDefect> {
        let n = self.dim();
        let mut sum = CMatrix::zeros(n, n);
        let mut psd_violation: f64 = 0.0;
        for e in &self.elements {
            sum += e;
            psd_violation = psd_violation.max(-herm_eig_sym(e)?.min());
        }
        sum -= &CMatrix::identity(n);
        Ok(PovmDefect {
            psd_violation: psd_violation.max(0.0),
            resolution_defect: sum.frobenius_norm(),
        })
    }

    /// Applies a noise model: `O^noisy_i = Σ_j ν_ij O_j`.
    pub fn noisy(&self, nu: &NoiseModel) -> Result<Povm> {
        if nu.cols() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: nu.cols(),
            });
        }
        let n = self.dim();
        let elements = (0..nu.rows())
            .map(|i| {
                let mut o = CMatrix::zeros(n, n);
                for j in 0..nu.cols() {
                    let v = nu.get(i, j);
                    if v != 0.0 {
                        o.axpy(v, &self.elements[j]);
                    }
                }
                o
            })
            .collect();
        Ok(Povm {
            elements,
            has_inconclusive: self.has_inconclusive && nu.rows() == nu.cols(),
        })
    }

    /// Replaces each element whose two largest eigenvalues differ by a
    /// factor of at least `ratio` with its dominant rank-one part, then
    /// restores completeness by the congruence `S^{-1/2} O_i S^{-1/2}` with
    /// `S = Σ O_i`.
    pub fn rank_one_approximation(&self, ratio: f64) -> Result<RankOneApproximation> {
        let n = self.dim();
        let mut replaced = vec![false; self.len()];
        let mut elems = Vec::with_capacity(self.len());
        for (k, e) in self.elements.iter().enumerate() {
            let eig = herm_eig_sym(e)?;
            let s1 = eig.values[n - 1];
            let s2 = if n > 1 {
                eig.values[n - 2].max(0.0)
            } else {
                0.0
            };
            if s1 > 0.0 && (s2 == 0.0 || s1 / s2 >= ratio) {
                let u = eig.vector(n - 1);
                elems.push(CMatrix::outer(&u).scale(s1));
                replaced[k] = true;
            } else {
                elems.push(e.clone());
            }
        }
        let mut sum = CMatrix::zeros(n, n);
        for e in &elems {
            sum += e;
        }
        let r = inv_sqrt(&sum.hermitian_part(), 1e-12)?;
        let elements = elems
            .iter()
            .map(|e| r.matmul(e).matmul(&r).hermitian_part())
            .collect();
        Ok(RankOneApproximation {
            povm: Povm {
                elements,
                has_inconclusive: self.has_inconclusive,
            },
            replaced,
        })
    }

    /// Dominant eigenvector of each element with its eigenvalue.
    pub fn dominant_directions(&self) -> Result<Vec<(f64, Vec<crate::linalg::C64>)>> {
        self.elements
            .iter()
            .map(|e| {
                let eig = herm_eig_sym(e)?;
                let n = eig.dim();
                Ok((
                    eig.values[n - 1],
                    crate::linalg::fix_global_phase(&eig.vector(n - 1)),
                ))
            })
            .collect()
    }

    /// Nearest-looking exact POVM: negative eigenvalues are clipped and the
    /// elements are congruence-scaled by `S^{-1/2}` with `S = Σ O_i`.
    pub fn repaired(&self) -> Result<Povm> {
        let clipped: Vec<CMatrix> = self
            .elements
            .iter()
            .map(|o| herm_eig_sym(o).map(|e| e.map(|l| l.max(0.0))))
            .collect::<Result<_>>()?;
        let n = self.dim();
        let mut sum = CMatrix::zeros(n, n);
        for o in &clipped {
            sum += o;
        }
        let w = inv_sqrt(&sum, 1e-12)?;
        let elements = clipped
            .iter()
            .map(|o| w.congruence(o).hermitian_part())
            .collect();
        Ok(Povm {
            elements,
            has_inconclusive: self.has_inconclusive,
        })
    }

    /// Appends a zero inconclusive element in front of a deterministic POVM.
    pub fn with_empty_inconclusive(&self) -> Povm {
        let n = self.dim();
        let mut elements = vec![CMatrix::zeros(n, n)];
        elements.extend(self.conclusive().iter().cloned());
        Povm {
            elements,
            has_inconclusive: true,
        }
    }
}

/// Column-stochastic measurement-noise matrix `ν` (`m̂ × m`): observed
/// outcome `i` is reported when the noise-free outcome is `j` with
/// probability `ν_ij`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

pub const NOISE_TOL: f64 = 1e-10;

impl NoiseModel {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(Error::InvalidNoise(format!(
                "expected {rows}x{cols} = {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if rows < cols {
            return Err(Error::InvalidNoise(format!(
                "noise matrix must have at least as many rows as columns ({rows} < {cols})"
            )));
        }
        if data.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidNoise(
                "entries must be finite and non-negative".into(),
            ));
        }
        for j in 0..cols {
            let s: f64 = (0..rows).map(|i| data[i * cols + j]).sum();
            if (s - 1.0).abs() > NOISE_TOL {
                return Err(Error::InvalidNoise(format!(
                    "column {j} sums to {s}, expected 1"
                )));
            }
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        if rows.iter().any(|x| x.len() != c) {
            return Err(Error::InvalidNoise("ragged noise matrix".into()));
        }
        Self::new(r, c, rows.iter().flatten().copied().collect())
    }

    pub fn identity(m: usize) -> Self {
        let mut data = vec![0.0; m * m];
        for i in 0..m {
            data[i * m + i] = 1.0;
        }
        Self {
            rows: m,
            cols: m,
            data,
        }
    }

    /// `m×m` symmetric family: `1−ν₀` on the diagonal, `ν₀/(m−1)` elsewhere.
    pub fn symmetric(m: usize, nu0: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&nu0) {
            return Err(Error::InvalidNoise(format!(
                "noise level {nu0} outside [0, 1]"
            )));
        }
        if m == 1 {
            return Ok(Self::identity(1));
        }
        let off = nu0 / (m as f64 - 1.0);
        let data = (0..m * m)
            .map(|k| if k / m == k % m { 1.0 - nu0 } else { off })
            .collect();
        Self::new(m, m, data)
    }

    /// Noise on a design with `m` states plus an inconclusive outcome:
    /// the symmetric family of size `m+1`.
    pub fn inconclusive(m: usize, nu0: f64) -> Result<Self> {
        Self::symmetric(m + 1, nu0)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn is_identity(&self) -> bool {
        self.rows == self.cols
            && (0..self.rows)
                .all(|i| (0..self.cols).all(|j| self.get(i, j) == if i == j { 1.0 } else { 0.0 }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c64;

    fn basis_povm() -> Povm {
        Povm::new(
            vec![
                CMatrix::from_diag(&[1.0, 0.0]),
                CMatrix::from_diag(&[0.0, 1.0]),
            ],
            false,
        )
        .unwrap()
    }

    #[test]
    fn validation() {
        assert!(Povm::new(vec![CMatrix::identity(2).scale(0.5)], false).is_err());
        assert!(Povm::new(
            vec![
                CMatrix::from_diag(&[1.5, 0.0]),
                CMatrix::from_diag(&[-0.5, 1.0])
            ],
            false
        )
        .is_err());
        let cand = Povm::new_unchecked(
            vec![
                CMatrix::from_diag(&[1.5, 0.0]),
                CMatrix::from_diag(&[-0.5, 1.0]),
            ],
            false,
        )
        .unwrap();
        let d = cand.defect().unwrap();
        assert!((d.psd_violation - 0.5).abs() < 1e-12);
        assert!(d.resolution_defect < 1e-12);
        assert!(!d.is_feasible());
    }

    #[test]
    fn identity_noise_is_a_no_op() {
        let p = basis_povm();
        assert_eq!(p.noisy(&NoiseModel::identity(2)).unwrap(), p);
    }

    #[test]
    fn half_noise_mixes_completely() {
        let s = core::f64::consts::FRAC_1_SQRT_2;
        let v = [c64(s, 0.0), c64(0.0, s)];
        let o1 = CMatrix::outer(&v);
        let o2 = &CMatrix::identity(2) - &o1;
        let p = Povm::new(vec![o1, o2], false).unwrap();
        let q = p.noisy(&NoiseModel::symmetric(2, 0.5).unwrap()).unwrap();
        for e in q.elements() {
            assert!((e - &CMatrix::identity(2).scale(0.5)).frobenius_norm() < 1e-15);
        }
    }

    #[test]
    fn binary_noise_on_basis_projectors() {
        let q = basis_povm()
            .noisy(&NoiseModel::symmetric(2, 0.1).unwrap())
            .unwrap();
        assert!((q.element(0) - &CMatrix::from_diag(&[0.9, 0.1])).frobenius_norm() < 1e-15);
        assert!((q.element(1) - &CMatrix::from_diag(&[0.1, 0.9])).frobenius_norm() < 1e-15);
        assert!(q.defect().unwrap().is_feasible());
    }

    #[test]
    fn noise_validation() {
        assert!(NoiseModel::new(2, 2, vec![0.9, 0.1, 0.2, 0.9]).is_err());
        assert!(NoiseModel::new(2, 2, vec![1.1, 0.0, -0.1, 1.0]).is_err());
        assert!(NoiseModel::new(1, 2, vec![1.0, 1.0]).is_err());
        let tall = NoiseModel::new(3, 2, vec![0.8, 0.1, 0.1, 0.8, 0.1, 0.1]).unwrap();
        let q = basis_povm().noisy(&tall).unwrap();
        assert_eq!(q.len(), 3);
        assert!(q.defect().unwrap().is_feasible());
        let incl = NoiseModel::inconclusive(2, 0.02).unwrap();
        assert!((incl.get(0, 1) - 0.01).abs() < 1e-15 && (incl.get(2, 2) - 0.98).abs() < 1e-15);
    }

    #[test]
    fn rank_one_approximation_restores_completeness() {
        let u = [c64(0.6, 0.0), c64(0.8, 0.0)];
        let w = [c64(-0.8, 0.0), c64(0.6, 0.0)];
        let o1 = &CMatrix::outer(&u).scale(0.999) + &CMatrix::outer(&w).scale(0.001);
        let o2 = &CMatrix::identity(2) - &o1;
        let p = Povm::new(vec![o1, o2], false).unwrap();
        let r = p.rank_one_approximation(100.0).unwrap();
        assert_eq!(r.replaced, vec![true, true]);
        assert!(r.povm.defect().unwrap().is_feasible());
        let d = r.povm.dominant_directions().unwrap();
        assert!((d[0].1[0].re - 0.6).abs() < 1e-9 && (d[0].1[1].re - 0.8).abs() < 1e-9);

        let mixed = Povm::new(
            vec![
                CMatrix::identity(2).scale(0.5),
                CMatrix::identity(2).scale(0.5),
            ],
            false,
        )
        .unwrap();
        let r = mixed.rank_one_approximation(100.0).unwrap();
        assert_eq!(r.replaced, vec![false, false]);
    }
}

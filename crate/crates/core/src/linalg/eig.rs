use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use super::{c64, CMatrix, C64, HERMITIAN_TOL};
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 100;

/// Spectral decomposition `H = U diag(λ) U*` with ascending eigenvalues.
#[derive(Debug, Clone)]
pub struct HermitianEig {
    pub values: Vec<f64>,
    /// Eigenvectors as columns.
    pub vectors: CMatrix,
}

impl HermitianEig {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        *self.values.last().expect("non-empty spectrum")
    }

    pub fn vector(&self, k: usize) -> Vec<C64> {
        self.vectors.column(k)
    }

    /// `U f(Λ) U*`.
    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> CMatrix {
        let n = self.dim();
        let fv: Vec<f64> = self.values.iter().map(|&l| f(l)).collect();
        let u = &self.vectors;
        CMatrix::from_fn(n, n, |i, j| {
            let mut acc = c64(0.0, 0.0);
            for k in 0..n {
                if fv[k] != 0.0 {
                    acc += u[(i, k)] * u[(j, k)].conj() * fv[k];
                }
            }
            acc
        })
    }

    pub fn reconstruct(&self) -> CMatrix {
        self.map(|l| l)
    }

    /// Orthogonal projector onto the eigenvectors whose eigenvalue satisfies `keep`.
    pub fn projector(&self, mut keep: impl FnMut(f64) -> bool) -> CMatrix {
        self.map(|l| if keep(l) { 1.0 } else { 0.0 })
    }
}

/// Eigendecomposition of a Hermitian matrix by cyclic complex Jacobi
/// rotations. The input is symmetrized first; inputs that are not Hermitian
/// within [`HERMITIAN_TOL`] are rejected.
pub fn herm_eig(h: &CMatrix) -> Result<HermitianEig> {
    let h = h.checked_hermitian(HERMITIAN_TOL)?;
    jacobi(h)
}

/// Same as [`herm_eig`] but only symmetrizes; for internal callers whose
/// matrices are Hermitian by construction.
pub(crate) fn herm_eig_sym(h: &CMatrix) -> Result<HermitianEig> {
    if !h.is_finite() {
        return Err(Error::NonFinite);
    }
    jacobi(h.hermitian_part())
}

fn jacobi(mut a: CMatrix) -> Result<HermitianEig> {
    let n = a.rows();
    if n == 0 {
        return Err(Error::NotSquare { rows: 0, cols: 0 });
    }
    let mut v = CMatrix::identity(n);
    let scale = a.frobenius_norm();
    let target = (f64::EPSILON * scale).powi(2) * 0.25;

    let mut converged = n == 1 || scale == 0.0;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)].norm_sqr())
            .sum();
        if off <= target {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let b = a[(p, q)];
                let bn = b.norm();
                if bn == 0.0 {
                    continue;
                }
                let ap = a[(p, p)].re;
                let aq = a[(q, q)].re;
                let phase = b / bn;
                let theta = (aq - ap) / (2.0 * bn);
                let t = if theta.is_finite() {
                    let sgn = if theta >= 0.0 { 1.0 } else { -1.0 };
                    sgn / (theta.abs() + (theta * theta + 1.0).sqrt())
                } else {
                    0.0
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let em = phase.conj();
                let w00 = c64(c, 0.0);
                let w01 = c64(s, 0.0);
                let w10 = em * (-s);
                let w11 = em * c;

                for k in 0..n {
                    let hp = a[(k, p)];
                    let hq = a[(k, q)];
                    a[(k, p)] = hp * w00 + hq * w10;
                    a[(k, q)] = hp * w01 + hq * w11;
                }
                for k in 0..n {
                    let hp = a[(p, k)];
                    let hq = a[(q, k)];
                    a[(p, k)] = w00.conj() * hp + w10.conj() * hq;
                    a[(q, k)] = w01.conj() * hp + w11.conj() * hq;
                }
                a[(p, q)] = c64(0.0, 0.0);
                a[(q, p)] = c64(0.0, 0.0);
                a[(p, p)] = c64(a[(p, p)].re, 0.0);
                a[(q, q)] = c64(a[(q, q)].re, 0.0);
                for k in 0..n {
                    let vp = v[(k, p)];
                    let vq = v[(k, q)];
                    v[(k, p)] = vp * w00 + vq * w10;
                    v[(k, q)] = vp * w01 + vq * w11;
                }
            }
        }
    }
    if !converged {
        return Err(Error::EigenNoConvergence);
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| a[(i, i)].re).collect();
    order.sort_by(|&i, &j| {
        diag[i]
            .partial_cmp(&diag[j])
            .unwrap_or(core::cmp::Ordering::Equal)
    });
    let values = order.iter().map(|&i| diag[i]).collect();
    let vectors = CMatrix::from_fn(n, n, |i, k| v[(i, order[k])]);
    Ok(HermitianEig { values, vectors })
}

/// `H^{-1/2}` for `H ⪰ tol·I`.
pub fn inv_sqrt(h: &CMatrix, tol: f64) -> Result<CMatrix> {
    let e = herm_eig(h)?;
    if e.min() < tol {
        return Err(Error::NotPositiveDefinite {
            min_eig: e.min(),
            tol,
        });
    }
    Ok(e.map(|l| 1.0 / l.sqrt()))
}

/// `max(0, −λ_min(H))`.
pub fn psd_distance(h: &CMatrix) -> Result<f64> {
    Ok((-herm_eig(h)?.min()).max(0.0))
}

pub fn min_eigenvalue(h: &CMatrix) -> Result<f64> {
    Ok(herm_eig(h)?.min())
}

pub fn max_eigenvalue(h: &CMatrix) -> Result<f64> {
    Ok(herm_eig(h)?.max())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
        let g = CMatrix::from_fn(n, n, |_, _| {
            c64(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        g.hermitian_part()
    }

    fn check_decomposition(h: &CMatrix, e: &HermitianEig) {
        let n = h.rows();
        let rec = e.reconstruct();
        assert!((&rec - h).frobenius_norm() <= 1e-10 * (1.0 + h.frobenius_norm()));
        let gram = e.vectors.adjoint().matmul(&e.vectors);
        assert!((&gram - &CMatrix::identity(n)).frobenius_norm() <= 1e-10);
        for w in e.values.windows(2) {
            assert!(w[0] <= w[1]);
        }
    }

    #[test]
    fn identity_and_diagonal() {
        let e = herm_eig(&CMatrix::identity(2)).unwrap();
        assert_eq!(e.values, vec![1.0, 1.0]);
        let d = CMatrix::from_diag(&[2.0, -1.0]);
        let e = herm_eig(&d).unwrap();
        assert_eq!(e.values, vec![-1.0, 2.0]);
        assert!((e.vectors[(1, 0)].norm() - 1.0).abs() < 1e-15);
        assert!((e.vectors[(0, 1)].norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn pure_state_against_isotropic_residual() {
        // A = beta r - (1-beta) psi psi* with r = I/2, psi = e1, beta = 0.5:
        // entries beta/n and -1 + beta(1 + 1/n).
        let beta = 0.5;
        let n = 2.0;
        let a = CMatrix::from_diag(&[-1.0 + beta * (1.0 + 1.0 / n), beta / n]);
        let e = herm_eig(&a).unwrap();
        assert!((e.values[0] + 0.25).abs() < 1e-15);
        assert!((e.values[1] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn complex_two_by_two() {
        let h = CMatrix::from_vec(
            2,
            2,
            vec![c64(1.0, 0.0), c64(0.0, -1.0), c64(0.0, 1.0), c64(1.0, 0.0)],
        )
        .unwrap();
        let e = herm_eig(&h).unwrap();
        assert!(e.values[0].abs() < 1e-14 && (e.values[1] - 2.0).abs() < 1e-14);
        check_decomposition(&h, &e);
    }

    #[test]
    fn inv_sqrt_cases() {
        let r = inv_sqrt(&CMatrix::identity(3), 1e-12).unwrap();
        assert!((&r - &CMatrix::identity(3)).frobenius_norm() < 1e-14);
        let r = inv_sqrt(&CMatrix::from_diag(&[4.0, 1.0]), 1e-12).unwrap();
        assert!((&r - &CMatrix::from_diag(&[0.5, 1.0])).frobenius_norm() < 1e-14);
        assert!(matches!(
            inv_sqrt(&CMatrix::from_diag(&[1.0, 0.0]), 1e-10),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn inv_sqrt_random_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in 1..6 {
            let g = CMatrix::from_fn(n, n, |_, _| {
                c64(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            });
            let h = &g.matmul(&g.adjoint()) + &CMatrix::identity(n).scale(0.1);
            let r = inv_sqrt(&h, 1e-12).unwrap();
            let rhr = r.matmul(&h).matmul(&r);
            assert!((&rhr - &CMatrix::identity(n)).frobenius_norm() <= 1e-8);
            let comm = &r.matmul(&h) - &h.matmul(&r);
            assert!(comm.frobenius_norm() <= 1e-8);
        }
    }

    #[test]
    fn psd_distance_cases() {
        assert_eq!(psd_distance(&CMatrix::identity(2)).unwrap(), 0.0);
        assert!((psd_distance(&CMatrix::from_diag(&[1.0, -0.3])).unwrap() - 0.3).abs() < 1e-15);
        let v = [c64(0.53, 0.0), c64(0.85, 0.0)];
        assert!(psd_distance(&CMatrix::outer(&v)).unwrap() < 1e-15);
    }

    #[test]
    fn repeated_eigenvalues_are_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = random_hermitian(&mut rng, 4);
        let e = herm_eig(&h).unwrap();
        let p = e.map(|l| if l > 0.0 { 1.0 } else { 0.0 });
        let again = herm_eig(&p).unwrap();
        let twice = herm_eig(&p).unwrap();
        assert_eq!(again.vectors, twice.vectors);
        check_decomposition(&p, &again);
    }

    proptest! {
        #[test]
        fn reconstruction_holds(seed in any::<u64>(), n in 1usize..8) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let h = random_hermitian(&mut rng, n);
            let e = herm_eig(&h).unwrap();
            check_decomposition(&h, &e);
        }

        #[test]
        fn trace_product_of_hermitians_is_real(seed in any::<u64>(), n in 1usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_hermitian(&mut rng, n);
            let b = random_hermitian(&mut rng, n);
            let t = CMatrix::trace_product(&a, &b);
            prop_assert!(t.im.abs() <= 1e-12 * (a.frobenius_norm() * b.frobenius_norm()).max(1.0));
        }
    }
}

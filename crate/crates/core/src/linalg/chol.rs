use super::{c64, CMatrix};
use crate::error::{Error, Result};
#[allow(unused_imports)]
use num_traits::Float;

/// Lower Cholesky factor `H = L L*` of a Hermitian positive definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: CMatrix,
}

impl Cholesky {
    pub fn factor(h: &CMatrix) -> Result<Self> {
        if !h.is_square() {
            return Err(Error::NotSquare {
                rows: h.rows(),
                cols: h.cols(),
            });
        }
        let n = h.rows();
        let mut l = CMatrix::zeros(n, n);
        for j in 0..n {
            let mut d = h[(j, j)].re;
            for k in 0..j {
                d -= l[(j, k)].norm_sqr();
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::NotPositiveDefinite {
                    min_eig: d,
                    tol: 0.0,
                });
            }
            let d = d.sqrt();
            l[(j, j)] = c64(d, 0.0);
            for i in (j + 1)..n {
                let mut s = h[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)].conj();
                }
                l[(i, j)] = s / d;
            }
        }
        Ok(Self { l })
    }

    pub fn l(&self) -> &CMatrix {
        &self.l
    }

    /// `L^{-1}`.
    pub fn l_inverse(&self) -> CMatrix {
        let n = self.l.rows();
        let mut inv = CMatrix::zeros(n, n);
        for col in 0..n {
            for i in col..n {
                let mut s = if i == col {
                    c64(1.0, 0.0)
                } else {
                    c64(0.0, 0.0)
                };
                for k in col..i {
                    s -= self.l[(i, k)] * inv[(k, col)];
                }
                inv[(i, col)] = s / self.l[(i, i)].re;
            }
        }
        inv
    }

    /// `H^{-1} = L^{-*} L^{-1}`.
    pub fn inverse(&self) -> CMatrix {
        let li = self.l_inverse();
        li.adjoint().matmul(&li).hermitian_part()
    }

    pub fn log_det(&self) -> f64 {
        (0..self.l.rows())
            .map(|i| 2.0 * self.l[(i, i)].re.ln())
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_round_trip() {
        let g = CMatrix::from_fn(3, 3, |i, j| {
            c64((i + 2 * j) as f64 * 0.3 - 0.5, (i as f64 - j as f64) * 0.2)
        });
        let h = &g.matmul(&g.adjoint()) + &CMatrix::identity(3);
        let ch = Cholesky::factor(&h).unwrap();
        let llt = ch.l().matmul(&ch.l().adjoint());
        assert!((&llt - &h).frobenius_norm() < 1e-12);
        let prod = ch.inverse().matmul(&h);
        assert!((&prod - &CMatrix::identity(3)).frobenius_norm() < 1e-12);
    }

    #[test]
    fn rejects_indefinite() {
        let h = CMatrix::from_diag(&[1.0, -1.0]);
        assert!(Cholesky::factor(&h).is_err());
    }
}

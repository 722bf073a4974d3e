use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use super::{c64, C64};
use crate::error::{Error, Result};

/// Solves the real `n×n` system `A x = b` (row-major `a`) by LU with partial
/// pivoting.
pub fn lu_solve_real(a: &[f64], n: usize, b: &[f64]) -> Result<Vec<f64>> {
    if a.len() != n * n || b.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n * n,
            got: a.len(),
        });
    }
    let mut m = a.to_vec();
    let mut x = b.to_vec();
    let scale = m
        .iter()
        .fold(0.0f64, |s, v| s.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    for k in 0..n {
        let mut piv = k;
        let mut best = m[k * n + k].abs();
        for i in (k + 1)..n {
            let v = m[i * n + k].abs();
            if v > best {
                best = v;
                piv = i;
            }
        }
        if best <= scale * 1e-300 || !best.is_finite() {
            return Err(Error::Singular);
        }
        if piv != k {
            for j in 0..n {
                m.swap(k * n + j, piv * n + j);
            }
            x.swap(k, piv);
        }
        let d = m[k * n + k];
        for i in (k + 1)..n {
            let f = m[i * n + k] / d;
            if f == 0.0 {
                continue;
            }
            m[i * n + k] = 0.0;
            for j in (k + 1)..n {
                m[i * n + j] -= f * m[k * n + j];
            }
            x[i] -= f * x[k];
        }
    }
    for k in (0..n).rev() {
        let mut s = x[k];
        for j in (k + 1)..n {
            s -= m[k * n + j] * x[j];
        }
        x[k] = s / m[k * n + k];
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular);
    }
    Ok(x)
}

/// Complex counterpart of [`lu_solve_real`].
pub fn lu_solve_complex(a: &[C64], n: usize, b: &[C64]) -> Result<Vec<C64>> {
    if a.len() != n * n || b.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n * n,
            got: a.len(),
        });
    }
    let mut m = a.to_vec();
    let mut x = b.to_vec();
    for k in 0..n {
        let mut piv = k;
        let mut best = m[k * n + k].norm();
        for i in (k + 1)..n {
            let v = m[i * n + k].norm();
            if v > best {
                best = v;
                piv = i;
            }
        }
        if best == 0.0 || !best.is_finite() {
            return Err(Error::Singular);
        }
        if piv != k {
            for j in 0..n {
                m.swap(k * n + j, piv * n + j);
            }
            x.swap(k, piv);
        }
        let d = m[k * n + k];
        for i in (k + 1)..n {
            let f = m[i * n + k] / d;
            m[i * n + k] = c64(0.0, 0.0);
            for j in (k + 1)..n {
                let t = m[k * n + j];
                m[i * n + j] -= f * t;
            }
            let t = x[k];
            x[i] -= f * t;
        }
    }
    for k in (0..n).rev() {
        let mut s = x[k];
        for j in (k + 1)..n {
            s -= m[k * n + j] * x[j];
        }
        x[k] = s / m[k * n + k];
    }
    Ok(x)
}

/// Least squares `min ‖A x − b‖` over the listed columns of a row-major
/// `rows×cols` matrix, by Householder QR. Returns coefficients for the
/// listed columns only.
fn least_squares_cols(a: &[f64], rows: usize, cols: usize, b: &[f64], sel: &[usize]) -> Vec<f64> {
    let k = sel.len();
    let mut q: Vec<f64> = (0..rows)
        .flat_map(|i| sel.iter().map(move |&j| a[i * cols + j]))
        .collect();
    let mut rhs = b.to_vec();
    let mut rank_ok = vec![true; k];
    for c in 0..k.min(rows) {
        let norm = (c..rows).map(|i| q[i * k + c].powi(2)).sum::<f64>().sqrt();
        if norm < 1e-14 {
            rank_ok[c] = false;
            continue;
        }
        let alpha = if q[c * k + c] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (c..rows).map(|i| q[i * k + c]).collect();
        v[0] -= alpha;
        let vn = v.iter().map(|x| x * x).sum::<f64>();
        if vn == 0.0 {
            continue;
        }
        for j in c..k {
            let dot: f64 = (c..rows).map(|i| v[i - c] * q[i * k + j]).sum();
            let f = 2.0 * dot / vn;
            for i in c..rows {
                q[i * k + j] -= f * v[i - c];
            }
        }
        let dot: f64 = (c..rows).map(|i| v[i - c] * rhs[i]).sum();
        let f = 2.0 * dot / vn;
        for i in c..rows {
            rhs[i] -= f * v[i - c];
        }
    }
    let mut x = vec![0.0; k];
    for c in (0..k.min(rows)).rev() {
        if !rank_ok[c] || q[c * k + c].abs() < 1e-14 {
            x[c] = 0.0;
            continue;
        }
        let mut s = rhs[c];
        for j in (c + 1)..k {
            s -= q[c * k + j] * x[j];
        }
        x[c] = s / q[c * k + c];
    }
    x
}

/// Non-negative least squares `min ‖A x − b‖, x ≥ 0` (Lawson–Hanson active
/// set) for a row-major `rows×cols` matrix.
pub fn nnls(a: &[f64], rows: usize, cols: usize, b: &[f64]) -> Vec<f64> {
    assert_eq!(a.len(), rows * cols);
    assert_eq!(b.len(), rows);
    let scale = a.iter().fold(0.0f64, |s, v| s.max(v.abs())).max(1e-300);
    let tol = 10.0 * f64::EPSILON * scale * (rows.max(cols) as f64);
    let mut x = vec![0.0; cols];
    let mut passive = vec![false; cols];

    let gradient = |x: &[f64]| -> Vec<f64> {
        let r: Vec<f64> = (0..rows)
            .map(|i| b[i] - (0..cols).map(|j| a[i * cols + j] * x[j]).sum::<f64>())
            .collect();
        (0..cols)
            .map(|j| (0..rows).map(|i| a[i * cols + j] * r[i]).sum())
            .collect()
    };

    for _outer in 0..(3 * cols + 10) {
        let w = gradient(&x);
        let cand = (0..cols)
            .filter(|&j| !passive[j])
            .max_by(|&i, &j| w[i].partial_cmp(&w[j]).unwrap());
        let j = match cand {
            Some(j) if w[j] > tol => j,
            _ => break,
        };
        passive[j] = true;
        for _inner in 0..(3 * cols + 10) {
            let sel: Vec<usize> = (0..cols).filter(|&i| passive[i]).collect();
            let zs = least_squares_cols(a, rows, cols, b, &sel);
            let mut z = vec![0.0; cols];
            for (k, &i) in sel.iter().enumerate() {
                z[i] = zs[k];
            }
            if sel.iter().all(|&i| z[i] > 0.0) {
                x = z;
                break;
            }
            let mut alpha = f64::INFINITY;
            for &i in &sel {
                if z[i] <= 0.0 {
                    let den = x[i] - z[i];
                    if den > 0.0 {
                        alpha = alpha.min(x[i] / den);
                    }
                }
            }
            if !alpha.is_finite() {
                alpha = 0.0;
            }
            for i in 0..cols {
                x[i] += alpha * (z[i] - x[i]);
            }
            for &i in &sel {
                if x[i] <= tol {
                    x[i] = 0.0;
                    passive[i] = false;
                }
            }
            if !passive.iter().any(|&p| p) {
                break;
            }
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn real_lu() {
        let a = [0.0, 2.0, 1.0, 1.0, 1.0, 0.0, 3.0, 0.0, 1.0];
        let x = lu_solve_real(&a, 3, &[3.0, 2.0, 4.0]).unwrap();
        for (v, w) in x.iter().zip([1.0, 1.0, 1.0]) {
            assert!((v - w).abs() < 1e-14);
        }
        assert!(lu_solve_real(&[1.0, 2.0, 2.0, 4.0], 2, &[1.0, 1.0]).is_err());
    }

    #[test]
    fn complex_lu() {
        let a = [c64(0.0, 1.0), c64(1.0, 0.0), c64(2.0, 0.0), c64(0.0, -1.0)];
        let want = [c64(1.0, 1.0), c64(-2.0, 0.5)];
        let b = [
            a[0] * want[0] + a[1] * want[1],
            a[2] * want[0] + a[3] * want[1],
        ];
        let x = lu_solve_complex(&a, 2, &b).unwrap();
        assert!((x[0] - want[0]).norm() < 1e-14 && (x[1] - want[1]).norm() < 1e-14);
    }

    #[test]
    fn nnls_clips_negative_direction() {
        // Unconstrained solution is (1, -1); constrained optimum is x2 = 0.
        let a = [1.0, 0.0, 0.0, 1.0, 1.0, 1.0];
        let b = [1.0, -1.0, 0.0];
        let x = nnls(&a, 3, 2, &b);
        assert!(x[1] == 0.0);
        assert!((x[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn nnls_exact_nonnegative() {
        let a = [2.0, 1.0, 1.0, 3.0, 0.0, 1.0];
        let b = [2.0 * 0.3 + 0.7, 0.3 + 3.0 * 0.7, 0.7];
        let x = nnls(&a, 3, 2, &b);
        assert!((x[0] - 0.3).abs() < 1e-12 && (x[1] - 0.7).abs() < 1e-12);
    }
}

//! Noise-level sweeps comparing the deterministic and the randomized
//! (inconclusive) worst-case designs.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::design::{
    solve_wc_posterior_inconclusive, solve_wc_posterior_noisy, DesignOptions, NoiseModel, Povm,
};
use crate::ensemble::StateEnsemble;
use crate::error::{Error, Result};
use crate::metrics::{evaluate, ProbReport};

/// Noise applied to the randomized design at level `ν₀`. The
/// deterministic design always sees the symmetric `m×m` family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseFamily {
    /// Symmetric `(m+1)×(m+1)` family over all outcomes.
    #[default]
    Inconclusive,
    /// Symmetric `m×m` family on the conclusive outcomes; the inconclusive
    /// outcome is reported faithfully.
    Binary,
}

impl NoiseFamily {
    pub fn deterministic(m: usize, nu0: f64) -> Result<NoiseModel> {
        NoiseModel::symmetric(m, nu0)
    }

    pub fn randomized(self, m: usize, nu0: f64) -> Result<NoiseModel> {
        match self {
            NoiseFamily::Inconclusive => NoiseModel::inconclusive(m, nu0),
            NoiseFamily::Binary => {
                let inner = NoiseModel::symmetric(m, nu0)?;
                let k = m + 1;
                let mut data = alloc::vec![0.0; k * k];
                data[0] = 1.0;
                for i in 0..m {
                    for j in 0..m {
                        data[(i + 1) * k + j + 1] = inner.get(i, j);
                    }
                }
                NoiseModel::new(k, k, data)
            }
        }
    }
}

/// POVMs held fixed across the sweep; `None` entries are re-optimized at
/// every level.
#[derive(Debug, Clone, Default)]
pub struct FixedPovms {
    pub deterministic: Option<Povm>,
    pub randomized: Option<Povm>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub nu0: f64,
    /// Posterior diagonal of the deterministic design.
    pub det: Option<Vec<Option<f64>>>,
    pub rand: Option<Vec<Option<f64>>>,
    /// Observed inconclusive rate of the randomized design under noise.
    pub p_incl: Option<f64>,
    /// `Tr O_0 ρ` of the designed inconclusive element.
    pub p_incl_designed: Option<f64>,
    /// `"ok"`, or the failures at this level.
    pub status: String,
}

impl SweepRow {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }

    pub fn det_min(&self) -> Option<f64> {
        min_diag(self.det.as_deref())
    }

    pub fn rand_min(&self) -> Option<f64> {
        min_diag(self.rand.as_deref())
    }
}

fn min_diag(d: Option<&[Option<f64>]>) -> Option<f64> {
    d?.iter()
        .try_fold(f64::INFINITY, |m, v| v.map(|v| m.min(v)))
}

/// `start, start+step, …` up to `stop` inclusive, computed by index so the
/// values are reproducible.
pub fn nu0_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(stop >= start) {
        return Err(Error::InvalidArgument(
            "grid needs step > 0 and stop ≥ start".into(),
        ));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    let grid: Vec<f64> = (0..=n).map(|k| start + k as f64 * step).collect();
    check_grid(&grid)?;
    Ok(grid)
}

/// `0, 0.02, …, 0.20`.
pub fn default_grid() -> Vec<f64> {
    (0..=10).map(|k| k as f64 * 0.02).collect()
}

pub fn check_grid(grid: &[f64]) -> Result<()> {
    match grid.iter().find(|v| !(0.0..0.5).contains(*v)) {
        Some(v) => Err(Error::InvalidArgument(format!(
            "noise level {v} outside [0, 0.5)"
        ))),
        None => Ok(()),
    }
}

fn diag(r: &ProbReport) -> Vec<Option<f64>> {
    r.posterior_diagonal()
}

/// Deterministic and randomized designs (or fixed POVMs) at one noise level.
/// Failures are recorded in `status` instead of aborting.
pub fn sweep_point(
    e: &StateEnsemble,
    nu0: f64,
    family: NoiseFamily,
    fixed: &FixedPovms,
    opts: &DesignOptions,
) -> SweepRow {
    let m = e.len();
    let mut status = Vec::new();
    let det = (|| -> Result<Vec<Option<f64>>> {
        let nu = NoiseFamily::deterministic(m, nu0)?;
        let r = match &fixed.deterministic {
            Some(p) => evaluate(p, e, Some(&nu))?,
            None => solve_wc_posterior_noisy(e, &nu, opts)?.report,
        };
        Ok(diag(&r))
    })();
    let rand = (|| -> Result<ProbReport> {
        let nu = family.randomized(m, nu0)?;
        match &fixed.randomized {
            Some(p) => evaluate(p, e, Some(&nu)),
            None => Ok(solve_wc_posterior_inconclusive(e, Some(&nu), opts)?.report),
        }
    })();
    let det = det
        .map_err(|err| status.push(format!("deterministic: {err}")))
        .ok();
    let rand = rand
        .map_err(|err| status.push(format!("randomized: {err}")))
        .ok();
    SweepRow {
        nu0,
        det,
        p_incl: rand.as_ref().and_then(|r| r.output_dist.first().copied()),
        p_incl_designed: rand.as_ref().and_then(|r| r.p_incl),
        rand: rand.as_ref().map(diag),
        status: if status.is_empty() {
            "ok".to_string()
        } else {
            status.join("; ")
        },
    }
}

/// Sequential sweep in grid order.
pub fn sweep(
    e: &StateEnsemble,
    grid: &[f64],
    family: NoiseFamily,
    fixed: &FixedPovms,
    opts: &DesignOptions,
) -> Result<Vec<SweepRow>> {
    check_grid(grid)?;
    Ok(grid
        .iter()
        .map(|&nu0| sweep_point(e, nu0, family, fixed, opts))
        .collect())
}

/// Noise-free designs to hold fixed for a robustness sweep.
pub fn noise_free_povms(e: &StateEnsemble, opts: &DesignOptions) -> Result<FixedPovms> {
    let det = solve_wc_posterior_noisy(e, &NoiseModel::identity(e.len()), opts)?.povm;
    let rand = solve_wc_posterior_inconclusive(e, None, opts)?.povm;
    Ok(FixedPovms {
        deterministic: Some(det),
        randomized: Some(rand),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        let g = default_grid();
        assert_eq!(g.len(), 11);
        assert_eq!(g[10], 0.2);
        assert_eq!(nu0_grid(0.0, 0.2, 0.02).unwrap(), g);
        assert!(nu0_grid(0.0, 0.6, 0.1).is_err());
        assert!(nu0_grid(0.1, 0.0, 0.1).is_err());
    }

    #[test]
    fn families() {
        let incl = NoiseFamily::Inconclusive.randomized(2, 0.02).unwrap();
        assert!((incl.get(0, 0) - 0.98).abs() < 1e-15 && (incl.get(1, 0) - 0.01).abs() < 1e-15);
        let bin = NoiseFamily::Binary.randomized(2, 0.1).unwrap();
        assert_eq!(bin.get(0, 0), 1.0);
        assert_eq!(bin.get(0, 1), 0.0);
        assert!((bin.get(2, 1) - 0.1).abs() < 1e-15 && (bin.get(1, 1) - 0.9).abs() < 1e-15);
    }
}

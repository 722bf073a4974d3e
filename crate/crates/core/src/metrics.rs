//! Probability matrices, error vectors and their norms for a detector.

use alloc::vec;
use alloc::vec::Vec;

use crate::design::{NoiseModel, Povm};
use crate::ensemble::StateEnsemble;
use crate::error::{Error, Result};
use crate::linalg::CMatrix;

/// Output probabilities at or below this value make the posterior undefined.
pub const P_OUT_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NormPair {
    pub avg: f64,
    pub wc: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Norms {
    pub joint: NormPair,
    pub cond: NormPair,
    /// `None` when a positively weighted posterior is undefined.
    pub post: Option<NormPair>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbReport {
    /// `p_out|in(i|j)`, outcomes as rows.
    pub conditional: Vec<Vec<f64>>,
    pub output_dist: Vec<f64>,
    /// `p_joint(i, j)`, outcomes as rows.
    pub joint: Vec<Vec<f64>>,
    /// `p_in|out(j|i)` stored with states as rows and outcomes as columns;
    /// `None` where `p_out(i)` is negligible.
    pub posterior: Vec<Vec<Option<f64>>>,
    /// State matched to each outcome row (`None` for the inconclusive row
    /// and for surplus noisy outcomes).
    pub outcome_state: Vec<Option<usize>>,
    /// Outcome row matched to each state.
    pub state_outcome: Vec<usize>,
    pub e_joint: Vec<f64>,
    pub e_cond: Vec<f64>,
    pub e_post: Vec<Option<f64>>,
    /// `Tr O_0 ρ` for the designed (noise-free) inconclusive element; the
    /// observed rate under noise is `output_dist[0]`.
    pub p_incl: Option<f64>,
    /// Matched outcomes whose output probability is negligible.
    pub degenerate_outcomes: Vec<usize>,
    pub norms: Norms,
}

impl ProbReport {
    pub fn num_outcomes(&self) -> usize {
        self.output_dist.len()
    }

    pub fn num_states(&self) -> usize {
        self.state_outcome.len()
    }

    /// `p_in|out(i | matched outcome of i)`.
    pub fn posterior_diagonal(&self) -> Vec<Option<f64>> {
        (0..self.num_states())
            .map(|i| self.posterior[i][self.state_outcome[i]])
            .collect()
    }

    pub fn min_posterior_diagonal(&self) -> Option<f64> {
        self.posterior_diagonal()
            .into_iter()
            .try_fold(f64::INFINITY, |m, v| v.map(|v| m.min(v)))
    }
}

/// Evaluates a POVM on an ensemble, optionally through a noise model.
pub fn evaluate(povm: &Povm, e: &StateEnsemble, noise: Option<&NoiseModel>) -> Result<ProbReport> {
    if povm.dim() != e.dim() {
        return Err(Error::DimensionMismatch {
            expected: e.dim(),
            got: povm.dim(),
        });
    }
    let eff = match noise {
        Some(nu) => povm.noisy(nu)?,
        None => povm.clone(),
    };
    let m = e.len();
    let m_out = eff.len();
    let offset = usize::from(eff.has_inconclusive());
    if eff.conclusive().len() < m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: eff.conclusive().len(),
        });
    }

    let conditional: Vec<Vec<f64>> = eff
        .elements()
        .iter()
        .map(|o| {
            e.states()
                .iter()
                .map(|s| CMatrix::trace_product_re(o, s))
                .collect()
        })
        .collect();
    let joint: Vec<Vec<f64>> = conditional
        .iter()
        .map(|row| row.iter().zip(e.priors()).map(|(c, p)| c * p).collect())
        .collect();
    let output_dist: Vec<f64> = joint.iter().map(|row| row.iter().sum()).collect();

    let mut posterior = vec![vec![None; m_out]; m];
    for i in 0..m_out {
        if output_dist[i] > P_OUT_FLOOR {
            for j in 0..m {
                posterior[j][i] = Some(joint[i][j] / output_dist[i]);
            }
        }
    }

    let mut outcome_state = vec![None; m_out];
    let state_outcome: Vec<usize> = (0..m).map(|i| i + offset).collect();
    for (i, &r) in state_outcome.iter().enumerate() {
        outcome_state[r] = Some(i);
    }

    let e_joint: Vec<f64> = (0..m)
        .map(|i| output_dist[state_outcome[i]] - joint[state_outcome[i]][i])
        .collect();
    let e_cond: Vec<f64> = (0..m)
        .map(|i| 1.0 - conditional[state_outcome[i]][i])
        .collect();
    let e_post: Vec<Option<f64>> = (0..m)
        .map(|i| posterior[i][state_outcome[i]].map(|p| 1.0 - p))
        .collect();
    let degenerate_outcomes = (0..m)
        .filter(|&i| e_post[i].is_none())
        .map(|i| state_outcome[i])
        .collect();
    let p_incl = povm
        .has_inconclusive()
        .then(|| CMatrix::trace_product_re(povm.element(0), e.mixture()));

    let mut report = ProbReport {
        conditional,
        output_dist,
        joint,
        posterior,
        outcome_state,
        state_outcome,
        e_joint,
        e_cond,
        e_post,
        p_incl,
        degenerate_outcomes,
        norms: Norms::default(),
    };
    report.norms = weighted_norms(&report, e.weights())?;
    Ok(report)
}

/// `‖e‖_av = Σ w_i e(i)` and `‖e‖_wc = max_i w_i e(i)` for each error family.
pub fn weighted_norms(report: &ProbReport, w: &[f64]) -> Result<Norms> {
    let m = report.num_states();
    if w.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: w.len(),
        });
    }
    let pair = |e: &[f64]| NormPair {
        avg: e.iter().zip(w).map(|(e, w)| e * w).sum(),
        wc: e.iter().zip(w).map(|(e, w)| e * w).fold(0.0, f64::max),
    };
    let post = if report
        .e_post
        .iter()
        .zip(w)
        .all(|(e, &w)| e.is_some() || w == 0.0)
    {
        let v: Vec<f64> = report.e_post.iter().map(|e| e.unwrap_or(0.0)).collect();
        Some(pair(&v))
    } else {
        None
    };
    Ok(Norms {
        joint: pair(&report.e_joint),
        cond: pair(&report.e_cond),
        post,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c64, C64};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ket(v: &[f64]) -> Vec<C64> {
        v.iter().map(|&x| c64(x, 0.0)).collect()
    }

    fn example() -> StateEnsemble {
        let s = core::f64::consts::FRAC_1_SQRT_2;
        StateEnsemble::new(
            vec![
                CMatrix::outer(&ket(&[s, s])),
                CMatrix::outer(&ket(&[1.0, 0.0])),
            ],
            vec![2.0 / 3.0, 1.0 / 3.0],
        )
        .unwrap()
    }

    fn projective(v: &[f64]) -> Povm {
        let nrm = (v[0] * v[0] + v[1] * v[1]).sqrt();
        let u = ket(&[v[0] / nrm, v[1] / nrm]);
        let o1 = CMatrix::outer(&u);
        let o2 = &CMatrix::identity(2) - &o1;
        Povm::new(vec![o1, o2], false).unwrap()
    }

    #[test]
    fn perfect_detection_of_orthogonal_states() {
        let e = StateEnsemble::new(
            vec![
                CMatrix::from_diag(&[1.0, 0.0, 0.0]),
                CMatrix::from_diag(&[0.0, 1.0, 0.0]),
                CMatrix::from_diag(&[0.0, 0.0, 1.0]),
            ],
            vec![1.0 / 3.0; 3],
        )
        .unwrap();
        let p = Povm::new(e.states().to_vec(), false).unwrap();
        let r = evaluate(&p, &e, None).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((r.conditional[i][j] - want).abs() < 1e-15);
                assert!((r.posterior[j][i].unwrap() - want).abs() < 1e-15);
            }
        }
        assert!(r.e_joint.iter().chain(&r.e_cond).all(|v| v.abs() < 1e-15));
        assert_eq!(r.norms.post.unwrap(), NormPair { avg: 0.0, wc: 0.0 });
    }

    #[test]
    fn deterministic_example_design() {
        let r = evaluate(&projective(&[0.53, 0.85]), &example(), None).unwrap();
        let d = r.posterior_diagonal();
        assert!((d[0].unwrap() - 0.87).abs() < 0.01, "{d:?}");
        assert!((d[1].unwrap() - 0.87).abs() < 0.01, "{d:?}");
        assert!((r.norms.post.unwrap().wc - 0.13).abs() < 0.01);
    }

    #[test]
    fn unambiguous_example_design() {
        // Directions (0, a), (−b, b), and the complement.
        let a2 = (3.0 - 5f64.sqrt()) / 2.0;
        let b2 = 3.0 - 5f64.sqrt();
        let o1 = CMatrix::outer(&ket(&[0.0, 1.0])).scale(a2);
        let o2 = CMatrix::outer(&ket(&[
            -core::f64::consts::FRAC_1_SQRT_2,
            core::f64::consts::FRAC_1_SQRT_2,
        ]))
        .scale(b2);
        let o0 = &(&CMatrix::identity(2) - &o1) - &o2;
        let p = Povm::new(vec![o0, o1, o2], true).unwrap();
        let r = evaluate(&p, &example(), None).unwrap();
        let d = r.posterior_diagonal();
        assert!((d[0].unwrap() - 1.0).abs() < 1e-12 && (d[1].unwrap() - 1.0).abs() < 1e-12);
        assert!((r.p_incl.unwrap() - 0.75).abs() < 0.01, "{:?}", r.p_incl);
    }

    #[test]
    fn masked_weights() {
        let mut r = evaluate(&projective(&[1.0, 0.0]), &example(), None).unwrap();
        r.e_post = vec![Some(0.2), Some(0.9)];
        let n = weighted_norms(&r, &[1.0, 0.0]).unwrap();
        assert!((n.post.unwrap().wc - 0.2).abs() < 1e-15);
        r.e_joint = vec![0.0, 0.0];
        r.e_cond = vec![0.0, 0.0];
        r.e_post = vec![Some(0.0), Some(0.0)];
        let n = weighted_norms(&r, &[1.0, 1.0]).unwrap();
        assert_eq!(n.joint, NormPair::default());
        assert_eq!(n.post.unwrap(), NormPair::default());
    }

    #[test]
    fn degenerate_outcome_is_flagged() {
        let p = Povm::new(vec![CMatrix::zeros(2, 2), CMatrix::identity(2)], false).unwrap();
        let r = evaluate(&p, &example(), None).unwrap();
        assert_eq!(r.e_post[0], None);
        assert_eq!(r.degenerate_outcomes, vec![0]);
        assert!(r.norms.post.is_none());
        let n = weighted_norms(&r, &[0.0, 1.0]).unwrap();
        assert!(n.post.is_some());
    }

    fn random_case(seed: u64) -> (Povm, StateEnsemble, NoiseModel) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(2..4);
        let m = rng.random_range(2..4);
        let rand_psd = |rng: &mut ChaCha8Rng| {
            let g = CMatrix::from_fn(n, n, |_, _| {
                c64(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            });
            g.matmul(&g.adjoint()).hermitian_part()
        };
        let states: Vec<CMatrix> = (0..m)
            .map(|_| {
                let s = rand_psd(&mut rng);
                let t = s.trace().re;
                s.scale(1.0 / t)
            })
            .collect();
        let raw: Vec<f64> = (0..m).map(|_| rng.random_range(0.1..1.0)).collect();
        let tot: f64 = raw.iter().sum();
        let e = StateEnsemble::new(states, raw.iter().map(|p| p / tot).collect()).unwrap();
        let g: Vec<CMatrix> = (0..m).map(|_| rand_psd(&mut rng)).collect();
        let mut sum = CMatrix::zeros(n, n);
        for x in &g {
            sum += x;
        }
        let r = crate::linalg::inv_sqrt(&sum, 1e-12).unwrap();
        let povm = Povm::new(
            g.iter()
                .map(|x| r.matmul(x).matmul(&r).hermitian_part())
                .collect(),
            false,
        )
        .unwrap();
        let rows = m + 1;
        let mut data = vec![0.0; rows * m];
        for j in 0..m {
            let col: Vec<f64> = (0..rows).map(|_| rng.random_range(0.01..1.0)).collect();
            let s: f64 = col.iter().sum();
            for i in 0..rows {
                data[i * m + j] = col[i] / s;
            }
        }
        (povm, e, NoiseModel::new(rows, m, data).unwrap())
    }

    proptest! {
        #[test]
        fn probability_identities(seed in any::<u64>()) {
            let (povm, e, nu) = random_case(seed);
            for noise in [None, Some(&nu)] {
                let r = evaluate(&povm, &e, noise).unwrap();
                let total: f64 = r.output_dist.iter().sum();
                prop_assert!((total - 1.0).abs() < 1e-8);
                for j in 0..e.len() {
                    let col: f64 = r.conditional.iter().map(|row| row[j]).sum();
                    prop_assert!((col - 1.0).abs() < 1e-8);
                }
                for i in 0..r.num_outcomes() {
                    for j in 0..e.len() {
                        let c = r.conditional[i][j];
                        prop_assert!((-1e-9..=1.0 + 1e-9).contains(&c));
                        prop_assert!((r.joint[i][j] - c * e.priors()[j]).abs() < 1e-8);
                        if let Some(p) = r.posterior[j][i] {
                            prop_assert!((p * r.output_dist[i] - r.joint[i][j]).abs() < 1e-8);
                        }
                    }
                }
                for i in 0..e.len() {
                    prop_assert!(r.e_joint[i] >= -1e-9 && r.e_joint[i] <= 1.0 + 1e-9);
                    prop_assert!(r.e_cond[i] >= -1e-9 && r.e_cond[i] <= 1.0 + 1e-9);
                }
            }
        }

        #[test]
        fn noise_model_equals_noisy_povm(seed in any::<u64>()) {
            let (povm, e, nu) = random_case(seed);
            let a = evaluate(&povm, &e, Some(&nu)).unwrap();
            let b = evaluate(&povm.noisy(&nu).unwrap(), &e, None).unwrap();
            for (ra, rb) in a.conditional.iter().zip(&b.conditional) {
                for (x, y) in ra.iter().zip(rb) {
                    prop_assert!((x - y).abs() < 1e-10);
                }
            }
        }
    }
}

use qdetect::certify::certify_inconclusive;
use qdetect::design::{
    solve_avg_joint, solve_wc_posterior, solve_wc_posterior_inconclusive, solve_wc_posterior_noisy,
    DesignOptions, NoiseModel,
};
use qdetect::ensemble::StateEnsemble;
use qdetect::{c64, CMatrix, C64};

fn ket(v: &[f64]) -> Vec<C64> {
    v.iter().map(|&x| c64(x, 0.0)).collect()
}

fn example() -> StateEnsemble {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    StateEnsemble::new(
        vec![
            CMatrix::outer(&ket(&[s, s])),
            CMatrix::outer(&ket(&[1.0, 0.0])),
        ],
        vec![2.0 / 3.0, 1.0 / 3.0],
    )
    .unwrap()
}

#[test]
fn deterministic_worst_case_design() {
    let r = solve_wc_posterior(&example(), &DesignOptions::default()).unwrap();
    let post: Vec<f64> = r
        .report
        .posterior_diagonal()
        .into_iter()
        .map(Option::unwrap)
        .collect();
    assert!((post[0] - 0.87).abs() < 5e-3 && (post[1] - 0.87).abs() < 5e-3);
    assert!(r.certificate.passed, "{:?}", r.certificate.residuals);
}

#[test]
fn unambiguous_design() {
    let r = solve_wc_posterior_inconclusive(&example(), None, &DesignOptions::default()).unwrap();
    assert!(r.objective < 1e-12);
    assert!((r.report.p_incl.unwrap() - 5f64.sqrt() / 3.0).abs() < 1e-6);
    for p in r.report.posterior_diagonal() {
        assert!(p.unwrap() > 1.0 - 1e-9);
    }
    let out = &r.report.output_dist;
    assert!((out[1] - out[2]).abs() < 1e-6, "{out:?}");
    assert!(
        r.certificate.passed && r.certificate.tol <= 1e-5,
        "{:?}",
        r.certificate.residuals
    );
    let c = certify_inconclusive(&r.povm, &example(), 0.0, None, None, 1e-6).unwrap();
    assert!(c.passed, "{:?}", c.residuals);
}

#[test]
fn noisy_designs() {
    let e = example();
    let r = solve_wc_posterior_noisy(
        &e,
        &NoiseModel::symmetric(2, 0.02).unwrap(),
        &DesignOptions::default(),
    )
    .unwrap();
    assert!(r.certificate.passed);
    let r = solve_wc_posterior_inconclusive(
        &e,
        Some(&NoiseModel::inconclusive(2, 0.02).unwrap()),
        &DesignOptions::default(),
    )
    .unwrap();
    assert!(r.certificate.passed);
}

#[test]
fn avg_joint_design() {
    let r = solve_avg_joint(&example(), &DesignOptions::default()).unwrap();
    assert!(r.certificate.passed);
}

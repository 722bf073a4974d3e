//! Acceptance checks. Runs without the libtest harness and prints one
//! PASS/FAIL line per criterion; exits non-zero if any criterion fails.

use std::time::{Duration, Instant};

use qdetect::closed_form::{single_pure_wc, single_pure_wc_noisy};
use qdetect::design::{
    feasibility_at, solve_avg_joint, solve_wc_posterior, solve_wc_posterior_inconclusive,
    solve_wc_posterior_noisy, DesignOptions, DesignReport, NoiseModel, Povm,
};
use qdetect::ensemble::StateEnsemble;
use qdetect::osr::{kraus_from_x, solve_fixed_povm_design, standard_basis, OsrOptions, XMatrix};
use qdetect::sdp::SdpStatus;
use qdetect::sweep::{default_grid, sweep, FixedPovms, NoiseFamily};
use qdetect::{c64, CMatrix, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    ok: bool,
    detail: String,
}

fn check(ok: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        ok,
        detail: detail.into(),
    }
}

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

fn diag(r: &DesignReport) -> Vec<f64> {
    r.report
        .posterior_diagonal()
        .into_iter()
        .map(|p| p.unwrap_or(f64::NAN))
        .collect()
}

fn within(v: &[f64], want: &[f64], tol: f64) -> bool {
    v.len() == want.len() && v.iter().zip(want).all(|(a, b)| (a - b).abs() <= tol)
}

fn random_unit(rng: &mut ChaCha8Rng, n: usize) -> Vec<C64> {
    let v: Vec<C64> = (0..n)
        .map(|_| c64(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.iter().map(|z| z / norm).collect()
}

fn random_pd_state(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
    let g = CMatrix::from_fn(n, n, |_, _| {
        c64(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    let mut r = g.matmul(&g.adjoint());
    r += &CMatrix::identity(n).scale(0.05);
    let t = r.trace().re;
    r.scale(1.0 / t)
}

fn qubit(bloch: [f64; 3]) -> CMatrix {
    let [x, y, z] = bloch;
    CMatrix::from_vec(
        2,
        2,
        vec![
            c64(0.5 * (1.0 + z), 0.0),
            c64(0.5 * x, -0.5 * y),
            c64(0.5 * x, 0.5 * y),
            c64(0.5 * (1.0 - z), 0.0),
        ],
    )
    .unwrap()
}

fn criterion_1() -> Outcome {
    let t = Instant::now();
    let r = solve_wc_posterior(&example(), &DesignOptions::default()).unwrap();
    let elapsed = t.elapsed();
    let d = diag(&r);
    let targets = [[0.53, 0.85], [-0.85, 0.53]];
    let dirs: Vec<[f64; 2]> = r
        .povm
        .dominant_directions()
        .unwrap()
        .into_iter()
        .map(|(_, u)| {
            // Real representative with the larger entry positive.
            let k = if u[0].norm() >= u[1].norm() { 0 } else { 1 };
            let phase = u[k].conj() / u[k].norm();
            [(u[0] * phase).re, (u[1] * phase).re]
        })
        .collect();
    let matches = |u: [f64; 2], w: [f64; 2]| {
        [1.0, -1.0]
            .iter()
            .any(|s| (s * u[0] - w[0]).abs() <= 0.02 && (s * u[1] - w[1]).abs() <= 0.02)
    };
    let directions = (matches(dirs[0], targets[0]) && matches(dirs[1], targets[1]))
        || (matches(dirs[0], targets[1]) && matches(dirs[1], targets[0]));
    check(
        within(&d, &[0.87, 0.87], 0.01) && directions && elapsed < Duration::from_secs(5),
        format!("diagonal {d:.4?}, directions {dirs:.3?}, {elapsed:.2?}"),
    )
}

fn criterion_2() -> Outcome {
    let t = Instant::now();
    let r = solve_wc_posterior_inconclusive(&example(), None, &DesignOptions::default()).unwrap();
    let elapsed = t.elapsed();
    let d = diag(&r);
    let p = r.report.p_incl.unwrap();
    check(
        within(&d, &[1.0, 1.0], 0.01)
            && (p - 0.75).abs() <= 0.01
            && elapsed < Duration::from_secs(5),
        format!("diagonal {d:.4?}, p_incl {p:.4}, {elapsed:.2?}"),
    )
}

fn criterion_3() -> Outcome {
    let e = example();
    let opts = DesignOptions::default();
    let det =
        solve_wc_posterior_noisy(&e, &NoiseModel::symmetric(2, 0.02).unwrap(), &opts).unwrap();
    let rand = solve_wc_posterior_inconclusive(
        &e,
        Some(&NoiseModel::inconclusive(2, 0.02).unwrap()),
        &opts,
    )
    .unwrap();
    let (dd, rd) = (diag(&det), diag(&rand));
    let p = rand.report.p_incl.unwrap();
    check(
        within(&dd, &[0.86, 0.86], 0.01)
            && within(&rd, &[0.96, 0.96], 0.01)
            && (p - 0.76).abs() <= 0.01,
        format!("deterministic {dd:.4?}, inconclusive {rd:.4?}, p_incl {p:.4}"),
    )
}

fn criterion_4() -> Outcome {
    let t = Instant::now();
    let rows = sweep(
        &example(),
        &default_grid(),
        NoiseFamily::Inconclusive,
        &FixedPovms::default(),
        &DesignOptions::default(),
    )
    .unwrap();
    let elapsed = t.elapsed();
    let mut worst_margin = f64::INFINITY;
    let mut all_ok = true;
    for r in &rows {
        match (r.rand_min(), r.det_min()) {
            (Some(a), Some(b)) => worst_margin = worst_margin.min(a - b),
            _ => all_ok = false,
        }
        all_ok &= r.is_ok();
    }
    let dip = rows
        .iter()
        .filter(|r| (0.10 - 1e-12..=0.16 + 1e-12).contains(&r.nu0))
        .filter_map(|r| r.p_incl.map(|p| (r.nu0, p)))
        .min_by(|a, b| a.1.total_cmp(&b.1));
    let dip_ok = dip.is_some_and(|(_, p)| p < 0.15);
    check(
        all_ok && worst_margin >= -2e-3 && dip_ok && elapsed < Duration::from_secs(120),
        format!("min(rand − det) {worst_margin:.4}, lowest p_incl in [0.10, 0.16] {dip:.3?}, {elapsed:.2?}"),
    )
}

fn criterion_5() -> Outcome {
    let mut worst_gap: f64 = 0.0;
    let mut failures = Vec::new();
    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = [2, 3, 4][(seed % 3) as usize];
        let psi = random_unit(&mut rng, n);
        let r = random_pd_state(&mut rng, n);
        let beta = rng.random_range(0.1..0.9);
        let cf = single_pure_wc(&psi, &r, beta).unwrap();
        let solved = solve_wc_posterior(&cf.ensemble, &DesignOptions::default()).unwrap();
        worst_gap = worst_gap.max((cf.objective - (1.0 - solved.objective)).abs());
        let c = cf.certificate(1e-6).unwrap();
        if !c.passed {
            failures.push(seed);
        }
    }
    check(
        worst_gap <= 1e-4 && failures.is_empty(),
        format!("max |γ_closed − γ_bisection| {worst_gap:.2e}, certificate failures {failures:?}"),
    )
}

fn criterion_6() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for n in [2usize, 4, 8] {
        for beta in [0.2, 0.5] {
            let mut psi = vec![c64(0.0, 0.0); n];
            psi[0] = c64(1.0, 0.0);
            let r = CMatrix::identity(n).scale(1.0 / n as f64);
            let e = StateEnsemble::pure_state_scenario(&psi, &r, beta).unwrap();
            let got = solve_avg_joint(&e, &DesignOptions::default())
                .unwrap()
                .objective;
            let nf = n as f64;
            let want = if beta < nf / (1.0 + nf) {
                beta / nf
            } else {
                1.0 - beta
            };
            worst = worst.max((got - want).abs());
            cases += 1;
        }
    }
    check(
        worst <= 1e-6,
        format!("{cases} cases, max |objective − closed form| {worst:.2e}"),
    )
}

fn criterion_7() -> Outcome {
    let psi = ket(&[1.0, 0.0]);
    let mut worst: f64 = 0.0;
    for nu0 in [0.05, 0.1, 0.2] {
        let cf = single_pure_wc_noisy(&psi, 0.5, nu0).unwrap();
        let nu = NoiseModel::symmetric(2, nu0).unwrap();
        let solved =
            solve_wc_posterior_noisy(&cf.ensemble, &nu, &DesignOptions::default()).unwrap();
        worst = worst.max((cf.objective - (1.0 - solved.objective)).abs());
    }
    let (beta, nu0) = (0.5, 0.1);
    let mut psi64 = vec![c64(0.0, 0.0); 64];
    psi64[0] = c64(1.0, 0.0);
    let g64 = single_pure_wc_noisy(&psi64, beta, nu0).unwrap().objective;
    let limit = (1.0 - beta) / (1.0 - beta * (1.0 - 2.0 * nu0) / (1.0 - nu0));
    let rel = (g64 - limit).abs() / limit;
    check(
        worst <= 1e-4 && rel <= 0.02,
        format!("max |γ_closed − γ_solver| {worst:.2e}; n = 64: γ {g64:.5} vs limit {limit:.5} ({:.2}%)", 100.0 * rel),
    )
}

/// Worst weighted posterior error of the two-outcome qubit POVM
/// `O₁ = a I + t·min(a, 1−a)·u·σ`, computed in Bloch coordinates.
fn bloch_objective(
    a: f64,
    t: f64,
    u: [f64; 3],
    s: &[[f64; 3]; 2],
    p: &[f64; 2],
    w: &[f64; 2],
) -> f64 {
    let r = t * a.min(1.0 - a);
    let dot = |v: &[f64; 3]| u[0] * v[0] + u[1] * v[1] + u[2] * v[2];
    let q1 = [a + r * dot(&s[0]), a + r * dot(&s[1])];
    let out1 = p[0] * q1[0] + p[1] * q1[1];
    let out2 = 1.0 - out1;
    let mut worst: f64 = 0.0;
    if out1 > 1e-12 {
        worst = worst.max(w[0] * (1.0 - p[0] * q1[0] / out1));
    } else {
        worst = worst.max(w[0]);
    }
    if out2 > 1e-12 {
        worst = worst.max(w[1] * (1.0 - p[1] * (1.0 - q1[1]) / out2));
    } else {
        worst = worst.max(w[1]);
    }
    worst
}

fn direction(theta: f64, phi: f64) -> [f64; 3] {
    [
        theta.sin() * phi.cos(),
        theta.sin() * phi.sin(),
        theta.cos(),
    ]
}

/// Grid search over `(θ, φ, a, t)` followed by a shrinking pattern search.
fn bloch_oracle(s: &[[f64; 3]; 2], p: &[f64; 2], w: &[f64; 2]) -> f64 {
    use std::f64::consts::PI;
    let f = |x: [f64; 4]| {
        let a = x[2].clamp(0.0, 1.0);
        let t = x[3].clamp(0.0, 1.0);
        bloch_objective(a, t, direction(x[0], x[1]), s, p, w)
    };
    let mut best = ([0.0; 4], f64::INFINITY);
    let g = 24;
    for i in 0..=g {
        for j in 0..2 * g {
            for k in 0..=g {
                for l in 0..=g {
                    let x = [
                        PI * i as f64 / g as f64,
                        PI * j as f64 / g as f64,
                        k as f64 / g as f64,
                        l as f64 / g as f64,
                    ];
                    let v = f(x);
                    if v < best.1 {
                        best = (x, v);
                    }
                }
            }
        }
    }
    let mut step = [PI / g as f64, PI / g as f64, 1.0 / g as f64, 1.0 / g as f64];
    while step[2] > 1e-9 {
        let mut improved = false;
        for d in 0..4 {
            for sgn in [-1.0, 1.0] {
                let mut x = best.0;
                x[d] += sgn * step[d];
                let v = f(x);
                if v < best.1 {
                    best = (x, v);
                    improved = true;
                }
            }
        }
        if !improved {
            for s in &mut step {
                *s *= 0.5;
            }
        }
    }
    best.1
}

fn criterion_8() -> Outcome {
    let tight = DesignOptions {
        eps: 1e-7,
        certify_tol: Some(1e-6),
        ..DesignOptions::default()
    };
    let mut cert_failures = Vec::new();
    let mut worst_gap_ratio: f64 = 0.0;
    let mut non_optimal_solves = 0;
    let mut worst_oracle: f64 = 0.0;
    let mut oracle_below = 0.0f64;
    let mut scenarios = vec![(String::from("example"), example())];
    let mut bloch = Vec::new();
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let mut s = [[0.0; 3]; 2];
        for v in &mut s {
            let u = direction(
                rng.random_range(0.0..std::f64::consts::PI),
                rng.random_range(0.0..2.0 * std::f64::consts::PI),
            );
            let radius = rng.random_range(0.3..0.95);
            *v = [radius * u[0], radius * u[1], radius * u[2]];
        }
        let p0 = rng.random_range(0.2..0.8);
        let w = if seed % 2 == 0 {
            [1.0, 1.0]
        } else {
            [1.0, rng.random_range(0.3..1.0)]
        };
        let e = StateEnsemble::with_weights(
            vec![qubit(s[0]), qubit(s[1])],
            vec![p0, 1.0 - p0],
            w.to_vec(),
        )
        .unwrap();
        bloch.push((e.clone(), s, [p0, 1.0 - p0], w));
        scenarios.push((format!("qubit seed {seed}"), e));
    }

    for (name, e) in &scenarios {
        let runs: Vec<(&str, DesignReport)> = vec![
            ("wc", solve_wc_posterior(e, &tight).unwrap()),
            (
                "wc-noisy",
                solve_wc_posterior_noisy(e, &NoiseModel::symmetric(e.len(), 0.05).unwrap(), &tight)
                    .unwrap(),
            ),
            (
                "inconclusive",
                solve_wc_posterior_inconclusive(e, None, &tight).unwrap(),
            ),
            ("avg-joint", solve_avg_joint(e, &tight).unwrap()),
        ];
        for (kind, r) in &runs {
            worst_gap_ratio = worst_gap_ratio.max(r.diagnostics.final_gap / 1e-7);
            if !r.certificate.passed {
                cert_failures.push(format!(
                    "{name}/{kind} ({:.1e})",
                    r.certificate.worst_residual() * 1e-6
                ));
            }
        }
        for delta in [0.1, 0.3, 0.5, 0.7, 0.9] {
            let pt = feasibility_at(e, delta, None, false, None, &tight.sdp).unwrap();
            if pt.status == SdpStatus::Optimal {
                worst_gap_ratio = worst_gap_ratio.max(pt.gap / (1e-7 * (1.0 + pt.slack.abs())));
            } else {
                non_optimal_solves += 1;
            }
        }
    }

    for (e, s, p, w) in &bloch {
        let solved = solve_wc_posterior(e, &DesignOptions::default())
            .unwrap()
            .objective;
        let oracle = bloch_oracle(s, p, w);
        worst_oracle = worst_oracle.max((solved - oracle).abs());
        oracle_below = oracle_below.max(solved - oracle);
    }

    check(
        cert_failures.is_empty() && worst_gap_ratio <= 1.0 && non_optimal_solves == 0 && worst_oracle <= 5e-3,
        format!(
            "{} designs, certificate failures {cert_failures:?}; max gap / bound {worst_gap_ratio:.2}, non-optimal solves \
             {non_optimal_solves}; max |solver − Bloch oracle| {worst_oracle:.2e} (oracle below solver by at most {oracle_below:.1e})",
            4 * scenarios.len()
        ),
    )
}

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let n = 2;
    let basis = standard_basis(n).unwrap();
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let ops: Vec<CMatrix> = (0..3)
            .map(|_| {
                CMatrix::from_fn(n, n, |_, _| {
                    c64(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
                })
            })
            .collect();
        let mut k0 = CMatrix::zeros(n, n);
        for k in &ops {
            k0 += &k.adjoint().matmul(k);
        }
        let scale = 1.0 / qdetect::linalg::max_eigenvalue(&k0).unwrap().sqrt();
        let ops: Vec<CMatrix> = ops.iter().map(|k| k.scale(scale)).collect();
        let x = XMatrix::from_kraus(&ops, basis.clone()).unwrap();
        let kraus = kraus_from_x(&x, 1e-12).unwrap();
        let probes: Vec<CMatrix> = (0..4)
            .map(|_| CMatrix::outer(&random_unit(&mut rng, n)))
            .chain((0..n).map(|a| {
                let mut m = CMatrix::zeros(n, n);
                m[(a, a)] = c64(1.0, 0.0);
                m
            }))
            .collect();
        for rho in &probes {
            let mut direct = CMatrix::zeros(n, n);
            for k in &ops {
                direct += &k.matmul(rho).matmul(&k.adjoint());
            }
            worst = worst.max((&kraus.apply(rho) - &x.apply(rho)).max_abs());
            worst = worst.max((&kraus.apply(rho) - &direct).max_abs());
        }
    }

    let t = 0.4f64;
    let v = CMatrix::from_vec(
        2,
        2,
        vec![
            c64(t.cos(), 0.0),
            c64(0.0, -t.sin()),
            c64(0.0, -t.sin()),
            c64(t.cos(), 0.0),
        ],
    )
    .unwrap();
    let unit = |k: usize| {
        let mut m = CMatrix::zeros(2, 2);
        m[(k, k)] = c64(1.0, 0.0);
        m
    };
    let states = (0..2)
        .map(|k| v.matmul(&unit(k)).matmul(&v.adjoint()))
        .collect();
    let e = StateEnsemble::new(states, vec![0.5, 0.5]).unwrap();
    let povm = Povm::new(vec![unit(0), unit(1)], false).unwrap();
    let d = solve_fixed_povm_design(&e, &povm, &basis, &OsrOptions::default()).unwrap();
    let ratio = d.x.rank_one_ratio().unwrap();
    check(
        worst <= 1e-8 && ratio >= 0.99 && d.objective <= 1e-6,
        format!("max channel-action error {worst:.1e}; unitary scenario δ {:.1e}, top eigenvalue / trace {ratio:.4}", d.objective),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    // Under `cargo test -- --list` or filters, run nothing.
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let criteria: [Criterion; 9] = [
        ("1 deterministic worst-case design", criterion_1),
        ("2 unambiguous design", criterion_2),
        ("3 noisy designs", criterion_3),
        ("4 sweep dominance and p_incl dip", criterion_4),
        ("5 closed form vs bisection", criterion_5),
        ("6 average-joint closed form", criterion_6),
        ("7 noisy closed form", criterion_7),
        ("8 certificates, gaps, Bloch oracle", criterion_8),
        ("9 OSR round trip", criterion_9),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let t = Instant::now();
        let out = f();
        println!(
            "{} criterion {name}: {} [{:.2?}]",
            if out.ok { "PASS" } else { "FAIL" },
            out.detail,
            t.elapsed()
        );
        failed += usize::from(!out.ok);
    }
    println!("acceptance: {} passed, {failed} failed", 9 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

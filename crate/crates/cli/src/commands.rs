use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::ValueEnum;
use qdetect::certify::{self, Certificate, Verdict};
use qdetect::closed_form::{self, ClosedFormResult};
use qdetect::design::{
    solve_avg_joint, solve_wc_posterior, solve_wc_posterior_inconclusive, solve_wc_posterior_noisy,
    DesignOptions, DesignReport, NoiseModel, Povm,
};
use qdetect::ensemble::StateEnsemble;
use qdetect::metrics::{evaluate, ProbReport};
use qdetect::osr::{self, OsrDesign, OsrOptions, Refinement};
use qdetect::sweep::{self, FixedPovms, NoiseFamily, SweepRow};
use qdetect::{c64, CMatrix, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::formats::{
    matrix_from_json, matrix_to_json, noise_to_json, read_json, read_noise, read_scenario,
    round_sig, PovmFile, PovmSource, Scenario,
};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    AvgJoint,
    WcPosterior,
    WcPosteriorInconclusive,
}

impl Mode {
    fn name(self) -> &'static str {
        match self {
            Mode::AvgJoint => "avg-joint",
            Mode::WcPosterior => "wc-posterior",
            Mode::WcPosteriorInconclusive => "wc-posterior-inconclusive",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Family {
    Binary,
    Inconclusive,
}

/// What a command produced: the document to write, warnings for stderr and
/// the exit code.
#[derive(Debug)]
pub struct Output {
    pub body: String,
    pub warnings: Vec<String>,
    pub exit_code: i32,
}

impl Output {
    fn ok(body: String) -> Self {
        Self {
            body,
            warnings: Vec::new(),
            exit_code: 0,
        }
    }
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("JSON values always serialize") + "\n"
}

fn options(s: &Scenario, eps: Option<f64>) -> Result<DesignOptions, CliError> {
    let cfg = s.solver();
    let eps = eps.or(cfg.eps).unwrap_or(1e-6);
    if !(eps > 0.0 && eps < 1.0) {
        return Err(CliError::Input(format!(
            "eps must lie in (0, 1), got {eps}"
        )));
    }
    Ok(DesignOptions {
        eps,
        sdp: cfg.sdp_settings(),
        certify_tol: cfg.certify_tol,
        ..DesignOptions::default()
    })
}

fn rounded(v: &[f64], digits: u32) -> Vec<f64> {
    v.iter().map(|&x| round_sig(x, digits)).collect()
}

fn rounded_opt(v: &[Option<f64>], digits: u32) -> Vec<Option<f64>> {
    v.iter().map(|x| x.map(|x| round_sig(x, digits))).collect()
}

fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::Optimal => "optimal",
        Verdict::NotOptimal => "not-optimal",
        Verdict::Infeasible => "infeasible",
    }
}

pub fn certificate_json(c: &Certificate) -> Value {
    json!({
        "criterion": format!("{:?}", c.criterion),
        "verdict": verdict_name(c.verdict),
        "passed": c.passed,
        "tol": c.tol,
        "delta": c.delta,
        "worst_residual_over_tol": c.worst_residual(),
        "residuals": c.residuals,
        "failures": c.failures,
        "multipliers": c.multipliers,
        "active_set": c.active_set,
        "constraint_values": c.constraint_values,
        "dual_y": matrix_to_json(&c.y),
    })
}

fn probabilities_json(r: &ProbReport, digits: u32) -> (Value, Value) {
    let post_diag = r.posterior_diagonal();
    let full = json!({
        "conditional": r.conditional,
        "posterior": r.posterior,
        "joint": r.joint,
        "output_dist": r.output_dist,
        "posterior_diagonal": post_diag,
        "e_joint": r.e_joint,
        "e_cond": r.e_cond,
        "e_post": r.e_post,
        "p_incl": r.p_incl,
        "degenerate_outcomes": r.degenerate_outcomes,
        "norms": {
            "joint": {"avg": r.norms.joint.avg, "wc": r.norms.joint.wc},
            "cond": {"avg": r.norms.cond.avg, "wc": r.norms.cond.wc},
            "post": r.norms.post.map(|p| json!({"avg": p.avg, "wc": p.wc})),
        },
    });
    let summary = json!({
        "posterior_diagonal": rounded_opt(&post_diag, digits),
        "p_incl": r.p_incl.map(|p| round_sig(p, digits)),
        "p_incl_observed": r.p_incl.and(r.output_dist.first().map(|&p| round_sig(p, digits))),
        "posterior": r.posterior.iter().map(|row| rounded_opt(row, digits)).collect::<Vec<_>>(),
        "conditional": r.conditional.iter().map(|row| rounded(row, digits)).collect::<Vec<_>>(),
    });
    (full, summary)
}

fn design_json(mode: Mode, d: &DesignReport, digits: u32) -> Value {
    let (probs, mut summary) = probabilities_json(&d.report, digits);
    summary["objective"] = json!(round_sig(d.objective, digits));
    let directions: Vec<Value> = d
        .povm
        .dominant_directions()
        .map(|v| v.into_iter().map(|(w, u)| json!({"weight": w, "vector": u.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>()})).collect())
        .unwrap_or_default();
    json!({
        "mode": mode.name(),
        "objective": d.objective,
        "gamma": d.gamma,
        "povm": PovmFile::from_povm(&d.povm),
        "dominant_directions": directions,
        "noise": d.noise.as_ref().map(noise_to_json),
        "summary": summary,
        "probabilities": probs,
        "multipliers": d.multipliers,
        "certificate": certificate_json(&d.certificate),
        "unused_outcomes": d.unused_outcomes,
        "bisection": d.bisection.iter().map(|s| json!({
            "delta_min": s.delta_min, "delta_max": s.delta_max, "delta": s.delta, "slack": s.slack, "feasible": s.feasible,
        })).collect::<Vec<_>>(),
        "diagnostics": {
            "sdp_solves": d.diagnostics.sdp_solves,
            "total_iterations": d.diagnostics.total_iterations,
            "final_iterations": d.diagnostics.final_iterations,
            "final_gap": d.diagnostics.final_gap,
            "final_primal_residual": d.diagnostics.final_primal_residual,
            "final_dual_residual": d.diagnostics.final_dual_residual,
        },
    })
}

fn noise_for(s: &Scenario, noise: Option<&Path>) -> Result<Option<NoiseModel>, CliError> {
    match noise {
        Some(p) => read_noise(p).map(Some),
        None => s.noise_model(),
    }
}

fn default_mode(s: &Scenario) -> Mode {
    if s.inconclusive {
        Mode::WcPosteriorInconclusive
    } else {
        Mode::WcPosterior
    }
}

pub fn design(
    e: &StateEnsemble,
    mode: Mode,
    noise: Option<&NoiseModel>,
    opts: &DesignOptions,
) -> Result<DesignReport, CliError> {
    let r = match mode {
        Mode::AvgJoint => {
            if noise.is_some() {
                return Err(CliError::Input(
                    "avg-joint designs do not take a noise model".into(),
                ));
            }
            solve_avg_joint(e, opts)
        }
        Mode::WcPosterior => match noise {
            Some(nu) => solve_wc_posterior_noisy(e, nu, opts),
            None => solve_wc_posterior(e, opts),
        },
        Mode::WcPosteriorInconclusive => solve_wc_posterior_inconclusive(e, noise, opts),
    };
    r.map_err(CliError::from)
}

pub struct DesignArgs<'a> {
    pub scenario: &'a Path,
    pub mode: Option<Mode>,
    pub eps: Option<f64>,
    pub digits: u32,
    pub noise: Option<&'a Path>,
}

pub fn run_design(a: &DesignArgs) -> Result<Output, CliError> {
    let s = read_scenario(a.scenario)?;
    let e = s.ensemble()?;
    let opts = options(&s, a.eps)?;
    let noise = noise_for(&s, a.noise)?;
    let mode = a.mode.unwrap_or_else(|| default_mode(&s));
    let d = design(&e, mode, noise.as_ref(), &opts)?;
    let mut out = Output::ok(pretty(&design_json(mode, &d, a.digits)));
    if !d.certificate.passed {
        out.warnings.push(format!(
            "certificate did not pass at tol {:.1e}: {}",
            d.certificate.tol,
            d.certificate.failures.join(", ")
        ));
    }
    Ok(out)
}

fn read_povm(path: &Path) -> Result<Povm, CliError> {
    match read_json::<PovmSource>(path)? {
        PovmSource::Plain(p) | PovmSource::Report { povm: p } => p.povm(),
        PovmSource::Pair { .. } => Err(CliError::Input(format!(
            "{}: expected a single POVM",
            path.display()
        ))),
    }
}

pub struct CertifyArgs<'a> {
    pub scenario: &'a Path,
    pub povm: &'a Path,
    pub mode: Option<Mode>,
    pub noise: Option<&'a Path>,
    pub tol: Option<f64>,
    pub delta: Option<f64>,
}

/// Checks a POVM against the optimality conditions of its criterion.
/// Without an explicit `δ` the POVM's own worst-case error is used.
pub fn certify_povm(
    povm: &Povm,
    e: &StateEnsemble,
    mode: Mode,
    noise: Option<&NoiseModel>,
    delta: Option<f64>,
    tol: f64,
) -> Result<Certificate, CliError> {
    let c = match mode {
        Mode::AvgJoint => certify::certify_avg_joint(povm, e, tol)?,
        Mode::WcPosterior | Mode::WcPosteriorInconclusive => {
            if (mode == Mode::WcPosteriorInconclusive) != povm.has_inconclusive() {
                return Err(CliError::Input(format!(
                    "mode {} does not match the POVM",
                    mode.name()
                )));
            }
            let delta = match delta {
                Some(d) => d,
                None => {
                    let r = evaluate(povm, e, noise)?;
                    (0..e.len())
                        .filter_map(|i| r.e_post[i].map(|v| e.weights()[i] * v))
                        .fold(0.0, f64::max)
                }
            };
            certify::certify_wc_posterior(povm, e, delta, None, noise, tol)?
        }
    };
    Ok(c)
}

pub fn run_certify(a: &CertifyArgs) -> Result<Output, CliError> {
    let s = read_scenario(a.scenario)?;
    let e = s.ensemble()?;
    let povm = read_povm(a.povm)?;
    let noise = noise_for(&s, a.noise)?;
    let opts = options(&s, None)?;
    let mode = a.mode.unwrap_or(if povm.has_inconclusive() {
        Mode::WcPosteriorInconclusive
    } else {
        Mode::WcPosterior
    });
    let tol = a.tol.unwrap_or_else(|| opts.certificate_tolerance());
    let c = certify_povm(&povm, &e, mode, noise.as_ref(), a.delta, tol)?;
    let mut out = Output::ok(pretty(
        &json!({"mode": mode.name(), "certificate": certificate_json(&c)}),
    ));
    if !c.passed {
        out.exit_code = 2;
        out.warnings.push(format!(
            "{}: {}",
            verdict_name(c.verdict),
            c.failures.join(", ")
        ));
    }
    Ok(out)
}

/// Runs `f` over `items` on up to `jobs` threads; results keep item order.
pub fn parallel_map<T: Sync, R: Send>(
    items: &[T],
    jobs: usize,
    f: impl Fn(&T) -> R + Sync,
) -> Vec<R> {
    let jobs = jobs.clamp(1, items.len().max(1));
    if jobs == 1 {
        return items.iter().map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<R>>> = items.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                *slots[i]
                    .lock()
                    .expect("no thread panics while holding a slot") = Some(r);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| {
            m.into_inner()
                .expect("slot lock")
                .expect("every slot is filled")
        })
        .collect()
}

pub fn default_jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn fmt_cell(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:.6}"))
}

/// CSV with `det_pii`/`rand_pii` columns per state, in grid order.
pub fn sweep_csv(rows: &[SweepRow], m: usize) -> String {
    let mut s = String::from("nu0");
    for prefix in ["det", "rand"] {
        for i in 1..=m {
            let _ = write!(s, ",{prefix}_p{i}{i}");
        }
    }
    s.push_str(",p_incl,status\n");
    for r in rows {
        let _ = write!(s, "{:.4}", r.nu0);
        for d in [&r.det, &r.rand] {
            for i in 0..m {
                let v = d.as_ref().and_then(|d| d.get(i).copied().flatten());
                let _ = write!(s, ",{}", fmt_cell(v));
            }
        }
        let status = if r.status.contains([',', '"', '\n']) {
            format!("\"{}\"", r.status.replace('"', "'").replace('\n', " "))
        } else {
            r.status.clone()
        };
        let _ = writeln!(s, ",{},{}", fmt_cell(r.p_incl), status);
    }
    s
}

pub struct SweepArgs<'a> {
    pub scenario: &'a Path,
    pub grid: Vec<f64>,
    pub family: Family,
    pub fixed_povm: Option<&'a Path>,
    /// Hold the noise-free designs fixed instead of reading them.
    pub robust: bool,
    pub eps: Option<f64>,
    pub jobs: usize,
}

fn fixed_povms(path: &Path) -> Result<FixedPovms, CliError> {
    let place = |p: Povm, f: &mut FixedPovms| {
        if p.has_inconclusive() {
            f.randomized = Some(p);
        } else {
            f.deterministic = Some(p);
        }
    };
    let mut f = FixedPovms::default();
    match read_json::<PovmSource>(path)? {
        PovmSource::Plain(p) | PovmSource::Report { povm: p } => place(p.povm()?, &mut f),
        PovmSource::Pair {
            deterministic,
            randomized,
        } => {
            f.deterministic = deterministic.map(|p| p.povm()).transpose()?;
            f.randomized = randomized.map(|p| p.povm()).transpose()?;
        }
    }
    Ok(f)
}

pub fn run_sweep(a: &SweepArgs) -> Result<Output, CliError> {
    let s = read_scenario(a.scenario)?;
    let e = s.ensemble()?;
    let opts = options(&s, a.eps)?;
    sweep::check_grid(&a.grid)?;
    let family = match a.family {
        Family::Binary => NoiseFamily::Binary,
        Family::Inconclusive => NoiseFamily::Inconclusive,
    };
    let fixed = match (a.fixed_povm, a.robust) {
        (Some(_), true) => {
            return Err(CliError::Input(
                "--fixed-povm and --robust are exclusive".into(),
            ))
        }
        (Some(p), false) => fixed_povms(p)?,
        (None, true) => sweep::noise_free_povms(&e, &opts)?,
        (None, false) => FixedPovms::default(),
    };
    let rows = parallel_map(&a.grid, a.jobs, |&nu0| {
        sweep::sweep_point(&e, nu0, family, &fixed, &opts)
    });
    let mut out = Output::ok(sweep_csv(&rows, e.len()));
    out.warnings = rows
        .iter()
        .filter(|r| !r.is_ok())
        .map(|r| format!("nu0 = {}: {}", r.nu0, r.status))
        .collect();
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ClosedFormKind {
    TwoStateAvg,
    BetaThreshold,
    SinglePure,
    SinglePureNoisy,
    PureResidual,
    Gamma,
}

pub struct ClosedFormArgs<'a> {
    pub kind: ClosedFormKind,
    pub psi: Option<Vec<C64>>,
    /// Residual state (`r` or `ρ₀`): a matrix file, or `I/n` when absent.
    pub residual: Option<&'a Path>,
    pub beta: Option<f64>,
    pub nu0: Option<f64>,
    pub scenario: Option<&'a Path>,
    pub tol: f64,
    pub digits: u32,
}

/// Parses `re[+im i]` entries separated by commas, e.g. `0.6,0.8i,0.1-0.2i`.
pub fn parse_vector(text: &str) -> Result<Vec<C64>, CliError> {
    text.split(',')
        .map(|t| {
            let t = t.trim();
            let bad = || CliError::Input(format!("cannot parse vector entry {t:?}"));
            if let Some(body) = t.strip_suffix('i') {
                let b = body.as_bytes();
                let split = (1..b.len())
                    .rev()
                    .find(|&k| matches!(b[k], b'+' | b'-') && !matches!(b[k - 1], b'e' | b'E'));
                match split {
                    Some(k) => {
                        let re: f64 = body[..k].parse().map_err(|_| bad())?;
                        let im: f64 = match &body[k..] {
                            "+" => 1.0,
                            "-" => -1.0,
                            t => t.parse().map_err(|_| bad())?,
                        };
                        Ok(c64(re, im))
                    }
                    _ => {
                        let im: f64 = match body {
                            "" | "+" => 1.0,
                            "-" => -1.0,
                            b => b.parse().map_err(|_| bad())?,
                        };
                        Ok(c64(0.0, im))
                    }
                }
            } else {
                Ok(c64(t.parse().map_err(|_| bad())?, 0.0))
            }
        })
        .collect()
}

fn closed_form_json(r: &ClosedFormResult, tol: f64, digits: u32) -> Result<Value, CliError> {
    let c = r.certificate(tol)?;
    let report = evaluate(&r.povm, &r.ensemble, r.noise.as_ref())?;
    let (probs, summary) = probabilities_json(&report, digits);
    Ok(json!({
        "objective": r.objective,
        "objective_rounded": round_sig(r.objective, digits),
        "construction": format!("{:?}", r.construction),
        "validity": {
            "below_beta_threshold": r.validity.below_beta_threshold,
            "single_active": r.validity.single_active,
            "noise_below_half": r.validity.noise_below_half,
            "degenerate": r.validity.degenerate,
        },
        "povm": PovmFile::from_povm(&r.povm),
        "scenario": Scenario { noise: r.noise.as_ref().map(noise_to_json), ..Scenario::from_ensemble(&r.ensemble) },
        "summary": summary,
        "probabilities": probs,
        "certificate": certificate_json(&c),
    }))
}

pub fn run_closed_form(a: &ClosedFormArgs) -> Result<Output, CliError> {
    let need = |v: Option<f64>, name: &str| {
        v.ok_or_else(|| CliError::Input(format!("--{name} is required")))
    };
    let psi = || {
        a.psi
            .clone()
            .ok_or_else(|| CliError::Input("--psi is required".into()))
    };
    let residual = |n: usize| -> Result<CMatrix, CliError> {
        match a.residual {
            Some(p) => matrix_from_json(&read_json(p)?, "residual"),
            None => Ok(CMatrix::identity(n).scale(1.0 / n as f64)),
        }
    };
    let body = match a.kind {
        ClosedFormKind::TwoStateAvg => {
            let psi = psi()?;
            let r = closed_form::two_state_avg_joint(
                &psi,
                &residual(psi.len())?,
                need(a.beta, "beta")?,
            )?;
            closed_form_json(&r, a.tol, a.digits)?
        }
        ClosedFormKind::BetaThreshold => {
            let psi = psi()?;
            json!({"beta0": closed_form::beta_threshold(&psi, &residual(psi.len())?)?})
        }
        ClosedFormKind::SinglePure => {
            let psi = psi()?;
            let r =
                closed_form::single_pure_wc(&psi, &residual(psi.len())?, need(a.beta, "beta")?)?;
            closed_form_json(&r, a.tol, a.digits)?
        }
        ClosedFormKind::SinglePureNoisy => {
            let r = closed_form::single_pure_wc_noisy(
                &psi()?,
                need(a.beta, "beta")?,
                need(a.nu0, "nu0")?,
            )?;
            closed_form_json(&r, a.tol, a.digits)?
        }
        ClosedFormKind::PureResidual => {
            let phi = psi()?;
            let r =
                closed_form::pure_residual_wc(&residual(phi.len())?, &phi, need(a.beta, "beta")?)?;
            closed_form_json(&r, a.tol, a.digits)?
        }
        ClosedFormKind::Gamma => {
            let path = a
                .scenario
                .ok_or_else(|| CliError::Input("--scenario is required".into()))?;
            let g = closed_form::gamma_equal_weights(&read_scenario(path)?.ensemble()?)?;
            json!({
                "gamma": g.gamma,
                "argmin": g.argmin,
                "values": g.values,
                "single_active_plausible": g.single_active_plausible,
            })
        }
    };
    Ok(Output::ok(pretty(&body)))
}

pub struct OsrArgs<'a> {
    pub scenario: &'a Path,
    /// Defaults to projectors onto the natural basis.
    pub fixed_povm: Option<&'a Path>,
    pub eta: Option<f64>,
    pub eta_sweep: bool,
    pub eps: Option<f64>,
    pub seed: u64,
    pub digits: u32,
}

fn natural_povm(n: usize, m: usize) -> Result<Povm, CliError> {
    if m > n {
        return Err(CliError::Input(format!(
            "{m} states need a POVM file in dimension {n}"
        )));
    }
    // The last element absorbs the unused basis directions.
    let elements = (0..m)
        .map(|k| {
            let mut o = CMatrix::zeros(n, n);
            let range = if k + 1 == m { k..n } else { k..k + 1 };
            for j in range {
                o[(j, j)] = c64(1.0, 0.0);
            }
            o
        })
        .collect();
    Ok(Povm::new(elements, false)?)
}

fn osr_json(d: &OsrDesign, digits: u32) -> Result<Value, CliError> {
    Ok(json!({
        "objective": d.objective,
        "achieved": d.achieved,
        "posterior_diagonal": d.posterior,
        "summary": {
            "objective": round_sig(d.objective, digits),
            "posterior_diagonal": rounded_opt(&d.posterior, digits),
            "kraus_operators": d.kraus.len(),
            "rank_one_ratio": round_sig(d.x.rank_one_ratio()?, digits),
        },
        "silent_outcomes": d.silent_outcomes,
        "x": matrix_to_json(d.x.matrix()),
        "trace_x": d.x.trace(),
        "kraus": d.kraus.operators.iter().map(matrix_to_json).collect::<Vec<_>>(),
        "singular_values": d.kraus.singular_values,
        "k0": matrix_to_json(&d.kraus.k0),
        "trace_defect": d.kraus.trace_defect(),
        "sdp_solves": d.sdp_solves,
    }))
}

pub fn run_osr_design(a: &OsrArgs) -> Result<Output, CliError> {
    let s = read_scenario(a.scenario)?;
    let e = s.ensemble()?;
    let povm = match a.fixed_povm {
        Some(p) => read_povm(p)?,
        None => natural_povm(e.dim(), e.len())?,
    };
    let basis = osr::standard_basis(e.dim())?;
    let design_opts = options(&s, a.eps)?;
    let opts = OsrOptions {
        eps: design_opts.eps,
        sdp: design_opts.sdp,
        eta: a.eta,
        refine: Some(Refinement {
            seed: a.seed,
            ..Refinement::default()
        }),
        ..OsrOptions::default()
    };
    let body = if a.eta_sweep {
        let etas = match a.eta {
            Some(eta) => vec![eta],
            None => osr::default_eta_grid(e.dim()),
        };
        let rows = osr::eta_sweep(&e, &povm, &basis, &etas, &OsrOptions { eta: None, ..opts })
            .into_iter()
            .map(|(eta, d)| match d {
                Ok(d) => Ok(json!({"eta": eta, "design": osr_json(&d, a.digits)?})),
                Err(err) => Ok(json!({"eta": eta, "error": err.to_string()})),
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        json!({"eta_sweep": rows})
    } else {
        osr_json(
            &osr::solve_fixed_povm_design(&e, &povm, &basis, &opts)?,
            a.digits,
        )?
    };
    Ok(Output::ok(pretty(&body)))
}

pub struct GenArgs {
    pub dim: usize,
    pub states: usize,
    pub seed: u64,
    pub pure: bool,
}

/// Random scenario for property tests: states built from uniform
/// complex entries, priors drawn uniformly and normalized.
pub fn generate_scenario(a: &GenArgs) -> Result<Scenario, CliError> {
    if a.dim == 0 || a.states == 0 {
        return Err(CliError::Input(
            "--dim and --states must be positive".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let entry =
        |rng: &mut ChaCha8Rng| c64(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    let mut states = Vec::with_capacity(a.states);
    for _ in 0..a.states {
        let cols = if a.pure { 1 } else { a.dim };
        let g = CMatrix::from_fn(a.dim, cols, |_, _| entry(&mut rng));
        let rho = g.matmul(&g.adjoint());
        let t = rho.trace().re;
        states.push(matrix_to_json(&rho.scale(1.0 / t)));
    }
    let raw: Vec<f64> = (0..a.states).map(|_| rng.random_range(0.1..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let scenario = Scenario {
        dim: a.dim,
        states,
        priors: raw.iter().map(|p| p / total).collect(),
        weights: None,
        noise: None,
        inconclusive: false,
        reduce_to_range: a.pure && a.states < a.dim,
        solver: None,
    };
    scenario.ensemble()?;
    Ok(scenario)
}

pub fn run_gen_scenario(a: &GenArgs) -> Result<Output, CliError> {
    let s = generate_scenario(a)?;
    Ok(Output::ok(
        serde_json::to_string_pretty(&s).expect("scenario serializes") + "\n",
    ))
}

pub fn write_output(out: &Output, path: Option<&PathBuf>) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, &out.body)
            .map_err(|e| CliError::Input(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{}", out.body);
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vectors() {
        let v = parse_vector("0.6, 0.8i, 0.1-0.2i, -i, 1e-3+2e-1i").unwrap();
        assert_eq!(
            v,
            vec![
                c64(0.6, 0.0),
                c64(0.0, 0.8),
                c64(0.1, -0.2),
                c64(0.0, -1.0),
                c64(1e-3, 0.2)
            ]
        );
        assert!(parse_vector("x").is_err());
    }

    #[test]
    fn pool_keeps_order() {
        let items: Vec<usize> = (0..50).collect();
        assert_eq!(
            parallel_map(&items, 7, |&i| i * i),
            items.iter().map(|i| i * i).collect::<Vec<_>>()
        );
        assert_eq!(parallel_map(&items, 1, |&i| i + 1)[49], 50);
    }

    #[test]
    fn natural_povm_absorbs_extra_directions() {
        let p = natural_povm(3, 2).unwrap();
        assert_eq!(p.element(1).trace().re, 2.0);
        assert!(natural_povm(2, 3).is_err());
    }

    #[test]
    fn generated_scenarios_are_valid() {
        for seed in 0..5 {
            let s = generate_scenario(&GenArgs {
                dim: 3,
                states: 2,
                seed,
                pure: seed % 2 == 0,
            })
            .unwrap();
            assert_eq!(
                s,
                generate_scenario(&GenArgs {
                    dim: 3,
                    states: 2,
                    seed,
                    pure: seed % 2 == 0
                })
                .unwrap()
            );
            assert!((s.priors.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}

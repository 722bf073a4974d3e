//! HKM primal-dual path following with Mehrotra predictor-corrector.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use super::{SdpProblem, SdpStatus};
use crate::error::{Error, Result};
use crate::linalg::eig::herm_eig_sym;
use crate::linalg::{lu_solve_real, CMatrix, Cholesky};

/// Per-iteration diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationLog {
    pub iteration: usize,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
    pub mu: f64,
    pub step_primal: f64,
    pub step_dual: f64,
}

pub(super) struct Raw {
    pub status: SdpStatus,
    pub x: Vec<CMatrix>,
    pub free: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<CMatrix>,
    pub pobj: f64,
    pub dobj: f64,
    pub gap: f64,
    pub pinf: f64,
    pub dinf: f64,
    pub iterations: usize,
    pub trace: Vec<IterationLog>,
}

/// Flattened problem data.
struct Data {
    dims: Vec<usize>,
    c: Vec<CMatrix>,
    c_free: Vec<f64>,
    b: Vec<f64>,
    /// Per block: rows touching it with their coefficient matrices.
    by_block: Vec<Vec<(usize, CMatrix)>>,
    /// Per row: free-variable coefficients.
    free_coef: Vec<Vec<(usize, f64)>>,
    /// Per LP slack: its row.
    slack_row: Vec<usize>,
    n_free: usize,
    n_rows: usize,
}

impl Data {
    fn new(p: &SdpProblem) -> Self {
        let dims = p.block_dims.clone();
        let mut c: Vec<CMatrix> = dims.iter().map(|&n| CMatrix::zeros(n, n)).collect();
        for (b, m) in &p.objective.blocks {
            c[b.0] += &m.hermitian_part();
        }
        let mut c_free = vec![0.0; p.n_scalars];
        for (s, v) in &p.objective.scalars {
            c_free[s.0] += v;
        }
        let n_rows = p.rows.len();
        let mut by_block: Vec<Vec<(usize, CMatrix)>> = vec![Vec::new(); dims.len()];
        let mut free_coef = vec![Vec::new(); n_rows];
        let mut slack_row = vec![0; p.inequalities.len()];
        let mut b = vec![0.0; n_rows];
        for (k, row) in p.rows.iter().enumerate() {
            b[k] = row.rhs;
            // Merge duplicate block entries within a row.
            let mut merged: Vec<(usize, CMatrix)> = Vec::new();
            for (blk, m) in &row.form.blocks {
                let m = m.hermitian_part();
                if let Some(e) = merged.iter_mut().find(|e| e.0 == blk.0) {
                    e.1 += &m;
                } else {
                    merged.push((blk.0, m));
                }
            }
            for (blk, m) in merged {
                if m.max_abs() > 0.0 {
                    by_block[blk].push((k, m));
                }
            }
            let mut fc: Vec<(usize, f64)> = Vec::new();
            for (s, v) in &row.form.scalars {
                if let Some(e) = fc.iter_mut().find(|e| e.0 == s.0) {
                    e.1 += v;
                } else {
                    fc.push((s.0, *v));
                }
            }
            free_coef[k] = fc;
            if let Some(l) = row.slack {
                slack_row[l] = k;
            }
        }
        Self {
            dims,
            c,
            c_free,
            b,
            by_block,
            free_coef,
            slack_row,
            n_free: p.n_scalars,
            n_rows,
        }
    }

    /// `A(X)` including LP and free parts.
    fn apply(&self, x: &[CMatrix], xl: &[f64], xf: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_rows];
        for (blk, rows) in self.by_block.iter().enumerate() {
            for (k, m) in rows {
                out[*k] += CMatrix::trace_product_re(m, &x[blk]);
            }
        }
        for (l, &k) in self.slack_row.iter().enumerate() {
            out[k] += xl[l];
        }
        for (k, fc) in self.free_coef.iter().enumerate() {
            for &(f, v) in fc {
                out[k] += v * xf[f];
            }
        }
        out
    }

    /// `Σ_k y_k A_kb` for one block.
    fn adjoint_block(&self, blk: usize, y: &[f64]) -> CMatrix {
        let n = self.dims[blk];
        let mut out = CMatrix::zeros(n, n);
        for (k, m) in &self.by_block[blk] {
            if y[*k] != 0.0 {
                out.axpy(y[*k], m);
            }
        }
        out
    }

    fn adjoint_free(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_free];
        for (k, fc) in self.free_coef.iter().enumerate() {
            for &(f, v) in fc {
                out[f] += v * y[k];
            }
        }
        out
    }
}

#[derive(Clone)]
struct State {
    x: Vec<CMatrix>,
    xl: Vec<f64>,
    xf: Vec<f64>,
    y: Vec<f64>,
    z: Vec<CMatrix>,
    zl: Vec<f64>,
}

struct Residuals {
    rp: Vec<f64>,
    rd: Vec<CMatrix>,
    rdl: Vec<f64>,
    rdf: Vec<f64>,
    pobj: f64,
    dobj: f64,
    pinf: f64,
    dinf: f64,
    mu: f64,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn residuals(d: &Data, s: &State) -> Residuals {
    let ax = d.apply(&s.x, &s.xl, &s.xf);
    let rp: Vec<f64> = d.b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let rd: Vec<CMatrix> = (0..d.dims.len())
        .map(|blk| {
            let mut r = d.c[blk].clone();
            r -= &d.adjoint_block(blk, &s.y);
            r -= &s.z[blk];
            r
        })
        .collect();
    let rdl: Vec<f64> = d
        .slack_row
        .iter()
        .enumerate()
        .map(|(l, &k)| -s.y[k] - s.zl[l])
        .collect();
    let aty = d.adjoint_free(&s.y);
    let rdf: Vec<f64> = d.c_free.iter().zip(&aty).map(|(c, a)| c - a).collect();

    let pobj =
        d.c.iter()
            .zip(&s.x)
            .map(|(c, x)| CMatrix::trace_product_re(c, x))
            .sum::<f64>()
            + d.c_free.iter().zip(&s.xf).map(|(c, x)| c * x).sum::<f64>();
    let dobj = d.b.iter().zip(&s.y).map(|(b, y)| b * y).sum::<f64>();

    let bnorm = norm(&d.b);
    let cnorm = (d.c.iter().map(|c| c.frobenius_norm().powi(2)).sum::<f64>()
        + d.c_free.iter().map(|c| c * c).sum::<f64>())
    .sqrt();
    let pinf = norm(&rp) / (1.0 + bnorm);
    let dinf = (rd.iter().map(|r| r.frobenius_norm().powi(2)).sum::<f64>()
        + rdl.iter().map(|x| x * x).sum::<f64>()
        + rdf.iter().map(|x| x * x).sum::<f64>())
    .sqrt()
        / (1.0 + cnorm);

    let nn: usize = d.dims.iter().sum::<usize>() + s.xl.len();
    let comp =
        s.x.iter()
            .zip(&s.z)
            .map(|(x, z)| CMatrix::trace_product_re(x, z))
            .sum::<f64>()
            + s.xl.iter().zip(&s.zl).map(|(x, z)| x * z).sum::<f64>();
    let mu = if nn > 0 { comp / nn as f64 } else { 0.0 };
    Residuals {
        rp,
        rd,
        rdl,
        rdf,
        pobj,
        dobj,
        pinf,
        dinf,
        mu,
    }
}

/// Largest `α` with `X + α ΔX ⪰ 0`, given the Cholesky factor of `X`.
fn max_step_psd(lx_inv: &CMatrix, dx: &CMatrix) -> Result<f64> {
    let m = lx_inv.matmul(dx).matmul(&lx_inv.adjoint());
    let lmin = herm_eig_sym(&m)?.min();
    Ok(if lmin >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / lmin
    })
}

fn max_step_lp(x: &[f64], dx: &[f64]) -> f64 {
    let mut a = f64::INFINITY;
    for (xi, di) in x.iter().zip(dx) {
        if *di < 0.0 {
            a = a.min(-xi / di);
        }
    }
    a
}

struct Direction {
    dx: Vec<CMatrix>,
    dxl: Vec<f64>,
    dxf: Vec<f64>,
    dy: Vec<f64>,
    dz: Vec<CMatrix>,
    dzl: Vec<f64>,
}

struct Factors {
    z_inv: Vec<CMatrix>,
    lx_inv: Vec<CMatrix>,
    lz_inv: Vec<CMatrix>,
    /// Saddle matrix `[[M, F], [Fᵀ, 0]]`, row-major.
    kkt: Vec<f64>,
    size: usize,
}

fn factorize(d: &Data, s: &State) -> Result<Factors> {
    let m = d.n_rows;
    let size = m + d.n_free;
    let mut kkt = vec![0.0; size * size];
    let mut z_inv = Vec::with_capacity(d.dims.len());
    let mut lx_inv = Vec::with_capacity(d.dims.len());
    let mut lz_inv = Vec::with_capacity(d.dims.len());
    for blk in 0..d.dims.len() {
        let cz = Cholesky::factor(&s.z[blk])?;
        let cx = Cholesky::factor(&s.x[blk])?;
        let zi = cz.inverse();
        let rows = &d.by_block[blk];
        let xb = &s.x[blk];
        for (j, (kj, aj)) in rows.iter().enumerate() {
            let w = xb.matmul(aj).matmul(&zi);
            for (ki, ai) in rows.iter().take(j + 1) {
                let v = CMatrix::trace_product_re(ai, &w);
                kkt[ki * size + kj] += v;
                if ki != kj {
                    kkt[kj * size + ki] += v;
                }
            }
        }
        z_inv.push(zi);
        lx_inv.push(cx.l_inverse());
        lz_inv.push(cz.l_inverse());
    }
    for (l, &k) in d.slack_row.iter().enumerate() {
        kkt[k * size + k] += s.xl[l] / s.zl[l];
    }
    for (k, fc) in d.free_coef.iter().enumerate() {
        for &(f, v) in fc {
            kkt[k * size + m + f] += v;
            kkt[(m + f) * size + k] += v;
        }
    }
    // Symmetrize the Schur block against round-off in the accumulation.
    for i in 0..m {
        for j in (i + 1)..m {
            let v = 0.5 * (kkt[i * size + j] + kkt[j * size + i]);
            kkt[i * size + j] = v;
            kkt[j * size + i] = v;
        }
    }
    let diag_max = (0..m).map(|i| kkt[i * size + i].abs()).fold(0.0, f64::max);
    let reg = 1e-14 * diag_max.max(1e-300);
    for i in 0..m {
        kkt[i * size + i] += reg;
    }
    Ok(Factors {
        z_inv,
        lx_inv,
        lz_inv,
        kkt,
        size,
    })
}

/// Solves for a search direction given the target `σμ` and second-order
/// corrections (`corr` blocks and LP terms).
fn direction(
    d: &Data,
    s: &State,
    r: &Residuals,
    f: &Factors,
    sigma_mu: f64,
    corr: Option<(&[CMatrix], &[f64])>,
) -> Result<Direction> {
    let m = d.n_rows;
    let nb = d.dims.len();
    // H_b = σμ Z⁻¹ − corr Z⁻¹ − X − X R_d Z⁻¹
    let mut h: Vec<CMatrix> = Vec::with_capacity(nb);
    for blk in 0..nb {
        let n = d.dims[blk];
        let zi = &f.z_inv[blk];
        let mut hb = zi.scale(sigma_mu);
        hb -= &s.x[blk];
        hb -= &s.x[blk].matmul(&r.rd[blk]).matmul(zi);
        if let Some((cb, _)) = corr {
            hb -= &cb[blk].matmul(zi);
        }
        debug_assert_eq!(hb.rows(), n);
        h.push(hb);
    }
    let nl = s.xl.len();
    let mut hl = vec![0.0; nl];
    for l in 0..nl {
        let (x, z) = (s.xl[l], s.zl[l]);
        let mut v = sigma_mu / z - x - (x / z) * r.rdl[l];
        if let Some((_, cl)) = corr {
            v -= cl[l] / z;
        }
        hl[l] = v;
    }
    let mut rhs = vec![0.0; f.size];
    rhs[..m].copy_from_slice(&r.rp);
    for (blk, rows) in d.by_block.iter().enumerate() {
        for (k, a) in rows {
            rhs[*k] -= CMatrix::trace_product_re(a, &h[blk]);
        }
    }
    for (l, &k) in d.slack_row.iter().enumerate() {
        rhs[k] -= hl[l];
    }
    rhs[m..].copy_from_slice(&r.rdf);

    let sol = lu_solve_real(&f.kkt, f.size, &rhs)?;
    let mut dy = sol[..m].to_vec();
    let mut dxf = sol[m..].to_vec();
    let mut dx = h.clone();
    let mut dxl = hl;
    add_primal_step(d, s, f, &dy, &mut dx, &mut dxl);

    // Refine against the operator itself so the step keeps A(ΔX) = r_p.
    for _ in 0..REFINE_STEPS {
        let adx = d.apply(&dx, &dxl, &dxf);
        let mut res = vec![0.0; f.size];
        for k in 0..m {
            res[k] = r.rp[k] - adx[k];
        }
        let aty = d.adjoint_free(&dy);
        for (j, v) in r.rdf.iter().enumerate() {
            res[m + j] = v - aty[j];
        }
        if norm(&res) <= 1e-15 * (1.0 + norm(&r.rp) + norm(&r.rdf)) {
            break;
        }
        let corr = lu_solve_real(&f.kkt, f.size, &res)?;
        for k in 0..m {
            dy[k] += corr[k];
        }
        for (j, v) in dxf.iter_mut().enumerate() {
            *v += corr[m + j];
        }
        add_primal_step(d, s, f, &corr[..m], &mut dx, &mut dxl);
    }

    let mut dz = Vec::with_capacity(nb);
    for blk in 0..nb {
        let aty = d.adjoint_block(blk, &dy);
        let mut dzb = r.rd[blk].clone();
        dzb -= &aty;
        dz.push(dzb.hermitian_part());
    }
    let mut dzl = vec![0.0; nl];
    for (l, &k) in d.slack_row.iter().enumerate() {
        dzl[l] = r.rdl[l] - dy[k];
    }
    Ok(Direction {
        dx,
        dxl,
        dxf,
        dy,
        dz,
        dzl,
    })
}

const REFINE_STEPS: usize = 3;
const STALL_ITERS: usize = 5;

/// `ΔX += herm(X A*(dy) Z⁻¹)` and the LP analogue.
fn add_primal_step(
    d: &Data,
    s: &State,
    f: &Factors,
    dy: &[f64],
    dx: &mut [CMatrix],
    dxl: &mut [f64],
) {
    for (blk, dxb) in dx.iter_mut().enumerate() {
        let aty = d.adjoint_block(blk, dy);
        let t = s.x[blk].matmul(&aty).matmul(&f.z_inv[blk]);
        *dxb += &t.hermitian_part();
        *dxb = dxb.hermitian_part();
    }
    for (l, &k) in d.slack_row.iter().enumerate() {
        dxl[l] += (s.xl[l] / s.zl[l]) * dy[k];
    }
}

fn step_lengths(s: &State, f: &Factors, dir: &Direction) -> Result<(f64, f64)> {
    let mut ap = max_step_lp(&s.xl, &dir.dxl);
    let mut ad = max_step_lp(&s.zl, &dir.dzl);
    for blk in 0..s.x.len() {
        ap = ap.min(max_step_psd(&f.lx_inv[blk], &dir.dx[blk])?);
        ad = ad.min(max_step_psd(&f.lz_inv[blk], &dir.dz[blk])?);
    }
    Ok((ap, ad))
}

fn initial_state(d: &Data) -> State {
    let nb = d.dims.len();
    let mut x = Vec::with_capacity(nb);
    let mut z = Vec::with_capacity(nb);
    for blk in 0..nb {
        let n = d.dims[blk] as f64;
        let mut xi: f64 = 10.0f64.max(n.sqrt());
        let mut zi: f64 = 10.0f64.max(n.sqrt()).max(d.c[blk].frobenius_norm());
        for (k, a) in &d.by_block[blk] {
            let an = a.frobenius_norm();
            xi = xi.max(n * (1.0 + d.b[*k].abs()) / (1.0 + an));
            zi = zi.max(an);
        }
        zi = zi.max(d.c[blk].frobenius_norm());
        x.push(CMatrix::identity(d.dims[blk]).scale(xi));
        z.push(CMatrix::identity(d.dims[blk]).scale(zi));
    }
    let nl = d.slack_row.len();
    let bmax = d.b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let xl = vec![10.0f64.max(1.0 + bmax); nl];
    let zl = vec![10.0; nl];
    State {
        x,
        xl,
        xf: vec![0.0; d.n_free],
        y: vec![0.0; d.n_rows],
        z,
        zl,
    }
}

pub(super) fn solve(p: &SdpProblem) -> Result<Raw> {
    let set = &p.settings;
    let d = Data::new(p);
    let mut s = initial_state(&d);
    let nn = (d.dims.iter().sum::<usize>() + s.xl.len()).max(1) as f64;
    let mut trace = Vec::new();
    let mut status = SdpStatus::MaxIter;
    let mut iterations = 0;
    let cnorm = (d.c.iter().map(|c| c.frobenius_norm().powi(2)).sum::<f64>()
        + d.c_free.iter().map(|c| c * c).sum::<f64>())
    .sqrt();
    let bnorm = norm(&d.b);

    let merit = |r: &Residuals| {
        let gap = (r.pobj - r.dobj).abs().max(nn * r.mu.max(0.0));
        (r.pinf / set.tol_feas)
            .max(r.dinf / set.tol_feas)
            .max(gap / (set.tol_gap * (1.0 + r.pobj.abs())))
    };
    let mut r = residuals(&d, &s);
    let mut best: Option<(f64, State, usize)> = None;
    let mut since_best = 0;
    for it in 0..set.max_iter {
        iterations = it;
        let m = merit(&r);
        if m <= 1.0 {
            status = SdpStatus::Optimal;
            break;
        }
        if best.as_ref().is_none_or(|b| m < b.0) {
            best = Some((m, s.clone(), it));
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= STALL_ITERS {
                break;
            }
        }
        // Certificates of infeasibility from diverging iterates.
        if r.dobj > 1e8 {
            let ray: f64 = (0..d.dims.len())
                .map(|blk| (&d.c[blk] - &r.rd[blk]).frobenius_norm().powi(2))
                .sum::<f64>()
                .sqrt();
            if ray / r.dobj < 1e-7 * (1.0 + cnorm) {
                status = SdpStatus::Infeasible;
                break;
            }
        }
        if -r.pobj > 1e8 {
            let ax: Vec<f64> = d.b.iter().zip(&r.rp).map(|(b, rp)| b - rp).collect();
            if norm(&ax) / (-r.pobj) < 1e-7 * (1.0 + bnorm) {
                status = SdpStatus::Unbounded;
                break;
            }
        }

        let f = match factorize(&d, &s) {
            Ok(f) => f,
            Err(_) => break,
        };
        let pred = match direction(&d, &s, &r, &f, 0.0, None) {
            Ok(v) => v,
            Err(_) => break,
        };
        let (ap, ad) = step_lengths(&s, &f, &pred)?;
        let ap = ap.min(1.0);
        let ad = ad.min(1.0);
        let mut comp_aff = 0.0;
        for blk in 0..d.dims.len() {
            let xa = &s.x[blk] + &pred.dx[blk].scale(ap);
            let za = &s.z[blk] + &pred.dz[blk].scale(ad);
            comp_aff += CMatrix::trace_product_re(&xa, &za);
        }
        for l in 0..s.xl.len() {
            comp_aff += (s.xl[l] + ap * pred.dxl[l]) * (s.zl[l] + ad * pred.dzl[l]);
        }
        let mu_aff = comp_aff / nn;
        let sigma = if r.mu > 0.0 {
            (mu_aff / r.mu).clamp(0.0, 1.0).powi(3)
        } else {
            0.0
        };

        let corr_b: Vec<CMatrix> = (0..d.dims.len())
            .map(|blk| pred.dx[blk].matmul(&pred.dz[blk]))
            .collect();
        let corr_l: Vec<f64> = (0..s.xl.len()).map(|l| pred.dxl[l] * pred.dzl[l]).collect();
        let dir = match direction(&d, &s, &r, &f, sigma * r.mu, Some((&corr_b, &corr_l))) {
            Ok(v) => v,
            Err(_) => break,
        };
        let (ap, ad) = step_lengths(&s, &f, &dir)?;
        let gamma = set.step_fraction;
        let ap = (gamma * ap).min(1.0);
        let ad = (gamma * ad).min(1.0);

        for blk in 0..d.dims.len() {
            s.x[blk].axpy(ap, &dir.dx[blk]);
            s.x[blk] = s.x[blk].hermitian_part();
            s.z[blk].axpy(ad, &dir.dz[blk]);
            s.z[blk] = s.z[blk].hermitian_part();
        }
        for l in 0..s.xl.len() {
            s.xl[l] += ap * dir.dxl[l];
            s.zl[l] += ad * dir.dzl[l];
        }
        for (xf, dxf) in s.xf.iter_mut().zip(&dir.dxf) {
            *xf += ap * dxf;
        }
        for (y, dy) in s.y.iter_mut().zip(&dir.dy) {
            *y += ad * dy;
        }
        r = residuals(&d, &s);
        trace.push(IterationLog {
            iteration: it + 1,
            primal_objective: r.pobj,
            dual_objective: r.dobj,
            primal_infeasibility: r.pinf,
            dual_infeasibility: r.dinf,
            mu: r.mu,
            step_primal: ap,
            step_dual: ad,
        });
        iterations = it + 1;
        if !(r.pobj.is_finite() && r.dobj.is_finite()) {
            return Err(Error::NonFinite);
        }
    }

    // Round-off near the boundary can degrade the last iterates.
    if status == SdpStatus::MaxIter {
        if let Some((m, best_state, it)) = best {
            if m < merit(&r) {
                s = best_state;
                r = residuals(&d, &s);
                iterations = it;
            }
        }
    }
    let gap = (r.pobj - r.dobj).abs().max(nn * r.mu.max(0.0));
    let rel = 1.0 + r.pobj.abs();
    if status == SdpStatus::MaxIter
        && r.pinf <= set.accept_feas
        && r.dinf <= set.accept_feas
        && gap <= set.accept_gap * rel
    {
        status = SdpStatus::Optimal;
    }
    Ok(Raw {
        status,
        x: s.x,
        free: s.xf,
        y: s.y,
        z: s.z,
        pobj: r.pobj,
        dobj: r.dobj,
        gap,
        pinf: r.pinf,
        dinf: r.dinf,
        iterations,
        trace,
    })
}

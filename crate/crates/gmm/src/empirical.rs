//! Synthetic data, constrained GMM solvers and empirical performance.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{arg_err, Error, Result};
use crate::potentials::{l1_ball_threshold, soft_threshold, unsupported, Potential, Prior};
use crate::summary::LinkFunction;
use crate::numerics::RngStream;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return arg_err(format!(
                "matrix data has {} entries, expected {rows}x{cols}",
                data.len()
            ));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn matvec_into(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = dot(self.row(i), x);
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows];
        self.matvec_into(x, &mut out);
        out
    }

    pub fn t_matvec_into(&self, y: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (i, &yi) in y.iter().enumerate() {
            if yi != 0.0 {
                for (o, a) in out.iter_mut().zip(self.row(i)) {
                    *o += yi * a;
                }
            }
        }
    }

    pub fn t_matvec(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        self.t_matvec_into(y, &mut out);
        out
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Largest singular value by power iteration on MᵀM.
pub fn spectral_norm(m: &DenseMatrix) -> f64 {
    if m.data.iter().all(|&v| v == 0.0) || m.rows == 0 || m.cols == 0 {
        return 0.0;
    }
    let mut v: Vec<f64> = (0..m.cols).map(|j| 1.0 + 0.01 * ((j * 7919) % 101) as f64).collect();
    let nv = norm(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    let mut mv = vec![0.0; m.rows];
    let mut w = vec![0.0; m.cols];
    let mut est = 0.0;
    for _ in 0..20_000 {
        m.matvec_into(&v, &mut mv);
        m.t_matvec_into(&mv, &mut w);
        let nw = norm(&w);
        if nw == 0.0 {
            return 0.0;
        }
        let next = nw.sqrt();
        v.iter_mut().zip(&w).for_each(|(a, b)| *a = b / nw);
        if (next - est).abs() <= 1e-13 * next {
            est = next;
            break;
        }
        est = next;
    }
    est
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub p: usize,
    pub n: usize,
    /// n × p, row i is xᵢ.
    pub features: DenseMatrix,
    pub labels: Vec<f64>,
    pub ground_truth: Vec<f64>,
    pub kappa: f64,
    pub delta: f64,
    pub link: LinkFunction,
    pub stream: Option<RngStream>,
}

impl Dataset {
    pub fn from_parts(features: DenseMatrix, labels: Vec<f64>, ground_truth: Vec<f64>) -> Result<Self> {
        let (n, p) = (features.rows, features.cols);
        if labels.len() != n || ground_truth.len() != p {
            return arg_err("dataset: label / ground-truth lengths do not match the features");
        }
        if labels.iter().any(|&y| y != 1.0 && y != -1.0) {
            return arg_err("dataset: labels must be +1 or -1");
        }
        let kappa = norm(&ground_truth) / (p as f64).sqrt();
        Ok(Self {
            p,
            n,
            features,
            labels,
            ground_truth,
            kappa,
            delta: p as f64 / n as f64,
            link: LinkFunction::HardSign,
            stream: None,
        })
    }

    /// Rows yᵢxᵢᵀ; the constraints read A w ≥ 1.
    pub fn signed_design(&self) -> DenseMatrix {
        let mut a = self.features.clone();
        for i in 0..self.n {
            let y = self.labels[i];
            a.data[i * self.p..(i + 1) * self.p].iter_mut().for_each(|v| *v *= y);
        }
        a
    }
}

/// n = round(p/δ), at least 1.
pub fn sample_count(p: usize, delta: f64) -> usize {
    ((p as f64 / delta).round() as usize).max(1)
}

/// xᵢ ~ N(0, I/p); w⋆ iid from the prior, rescaled to ‖w⋆‖ = κ√p;
/// yᵢ = +1 with probability ρ(xᵢᵀw⋆).
pub fn generate_dataset(
    p: usize,
    n: usize,
    prior: &Prior,
    link: &LinkFunction,
    stream: RngStream,
) -> Result<Dataset> {
    if p < 1 || n < 1 {
        return arg_err(format!("generate_dataset: need p, n >= 1, got {p}, {n}"));
    }
    prior.validate()?;
    let mut rng = stream.rng();
    let kappa = prior.kappa();
    let mut w: Vec<f64> = (0..p).map(|_| prior.sample(&mut rng)).collect();
    if kappa > 0.0 {
        let mut tries = 0;
        while norm(&w) == 0.0 {
            tries += 1;
            if tries > 1000 {
                return Err(Error::Domain("generate_dataset: prior keeps producing w* = 0".into()));
            }
            w = (0..p).map(|_| prior.sample(&mut rng)).collect();
        }
        let scale = kappa * (p as f64).sqrt() / norm(&w);
        w.iter_mut().for_each(|v| *v *= scale);
    } else {
        w.iter_mut().for_each(|v| *v = 0.0);
    }
    let inv = 1.0 / (p as f64).sqrt();
    let data: Vec<f64> = (0..n * p)
        .map(|_| inv * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let features = DenseMatrix::new(n, p, data)?;
    let labels = (0..n)
        .map(|i| {
            let u: f64 = rng.random();
            if u < link.eval(dot(features.row(i), &w)) {
                1.0
            } else {
                -1.0
            }
        })
        .collect();
    Ok(Dataset {
        p,
        n,
        features,
        labels,
        ground_truth: w,
        kappa,
        delta: p as f64 / n as f64,
        link: link.clone(),
        stream: Some(stream),
    })
}

#[inline]
fn softplus_neg(m: f64) -> f64 {
    // log(1 + e^{-m})
    if m > 0.0 {
        (-m).exp().ln_1p()
    } else {
        -m + m.exp().ln_1p()
    }
}

#[inline]
fn sigmoid_neg(m: f64) -> f64 {
    // 1 / (1 + e^{m})
    if m > 0.0 {
        let e = (-m).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + m.exp())
    }
}

fn logistic_loss(margins: &[f64]) -> f64 {
    margins.iter().map(|&m| softplus_neg(m)).sum()
}

fn logistic_grad(a: &DenseMatrix, margins: &[f64], out: &mut [f64]) {
    let s: Vec<f64> = margins.iter().map(|&m| -sigmoid_neg(m)).collect();
    a.t_matvec_into(&s, out);
}

fn min_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Accelerated gradient descent on the logistic loss with backtracking and
/// gradient-based momentum restarts; stops at the first iterate with
/// min yᵢxᵢᵀw > 0. A `false` answer means no separator was found within
/// `budget` iterations.
pub fn separability_test(data: &Dataset, budget: usize) -> Result<(bool, Option<Vec<f64>>)> {
    if budget < 1 {
        return arg_err("separability_test: budget must be >= 1");
    }
    let a = data.signed_design();
    let p = data.p;
    let sn = spectral_norm(&a);
    if sn == 0.0 {
        return Ok((false, None));
    }
    let mut eta = 4.0 / (sn * sn);
    let mut w = vec![0.0; p];
    let mut z = vec![0.0; p];
    let mut t_k = 1.0f64;
    let mut mz = vec![0.0; data.n];
    let mut g = vec![0.0; p];
    let mut wn = vec![0.0; p];
    let mut mn = vec![0.0; data.n];
    let witness = |v: &[f64]| {
        let nv = norm(v);
        v.iter().map(|x| x / nv).collect::<Vec<f64>>()
    };
    for _ in 0..budget {
        a.matvec_into(&z, &mut mz);
        if min_of(&mz) > 0.0 {
            return Ok((true, Some(witness(&z))));
        }
        let fz = logistic_loss(&mz);
        logistic_grad(&a, &mz, &mut g);
        let gg = dot(&g, &g);
        if gg == 0.0 {
            break;
        }
        eta *= 1.5;
        loop {
            for j in 0..p {
                wn[j] = z[j] - eta * g[j];
            }
            a.matvec_into(&wn, &mut mn);
            if logistic_loss(&mn) <= fz - 0.5 * eta * gg || eta < 1e-14 {
                break;
            }
            eta *= 0.5;
        }
        if min_of(&mn) > 0.0 {
            return Ok((true, Some(witness(&wn))));
        }
        let uphill: f64 = (0..p).map(|j| (wn[j] - w[j]) * (z[j] - wn[j])).sum();
        if uphill > 0.0 {
            t_k = 1.0;
            z.copy_from_slice(&wn);
            w.copy_from_slice(&wn);
            continue;
        }
        let t_next = (1.0 + (1.0 + 4.0 * t_k * t_k).sqrt()) / 2.0;
        let mom = (t_k - 1.0) / t_next;
        for j in 0..p {
            z[j] = wn[j] + mom * (wn[j] - w[j]);
        }
        w.copy_from_slice(&wn);
        t_k = t_next;
    }
    Ok((false, None))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveResult {
    pub estimate: Vec<f64>,
    pub iterations: usize,
    /// max_i (1 − yᵢxᵢᵀŵ)₊ for the primal-dual solver; max_i (−yᵢxᵢᵀŵ)₊ for
    /// mirror descent.
    pub primal_residual: f64,
    /// |P − D| / max(1, |P|) against the scale-free dual objective.
    pub duality_gap: Option<f64>,
    pub converged: bool,
    /// Nonnegative multipliers of the margin constraints.
    pub dual: Option<Vec<f64>>,
}

/// The norm minimized by the finite-size program (scaling of ψ is irrelevant
/// to the constrained argmin).
fn program_objective(potential: Potential, w: &[f64]) -> f64 {
    match potential {
        Potential::L2Squared => 0.5 * dot(w, w),
        Potential::L1 => w.iter().map(|x| x.abs()).sum(),
        Potential::LinfScaled => w.iter().fold(0.0f64, |m, x| m.max(x.abs())),
    }
}

/// Best dual bound over rescalings of λ ≥ 0.
fn dual_objective(potential: Potential, a: &DenseMatrix, lambda: &[f64]) -> f64 {
    let s: f64 = lambda.iter().sum();
    if s <= 0.0 {
        return 0.0;
    }
    let g = a.t_matvec(lambda);
    match potential {
        Potential::L2Squared => {
            let gg = dot(&g, &g);
            if gg > 0.0 {
                s * s / (2.0 * gg)
            } else {
                f64::INFINITY
            }
        }
        Potential::L1 => s / g.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1e-300),
        Potential::LinfScaled => s / g.iter().map(|x| x.abs()).sum::<f64>().max(1e-300),
    }
}

fn program_prox(potential: Potential, v: &[f64], t: f64, out: &mut [f64]) {
    match potential {
        Potential::L2Squared => {
            for (o, x) in out.iter_mut().zip(v) {
                *o = x / (1.0 + t);
            }
        }
        Potential::L1 => {
            for (o, &x) in out.iter_mut().zip(v) {
                *o = soft_threshold(x, t);
            }
        }
        Potential::LinfScaled => {
            let th = l1_ball_threshold(v, t);
            for (o, &x) in out.iter_mut().zip(v) {
                *o = x - if th > 0.0 { soft_threshold(x, th) } else { x };
            }
        }
    }
}

struct Score {
    value: f64,
    primal: f64,
    gap: f64,
}

fn score(potential: Potential, weight: f64, a: &DenseMatrix, w: &[f64], u: &[f64]) -> Score {
    let m = a.matvec(w);
    let primal = m.iter().fold(0.0f64, |acc, &v| acc.max(1.0 - v));
    let pv = weight * program_objective(potential, w);
    let lambda: Vec<f64> = u.iter().map(|&x| -x).collect();
    let dv = weight * dual_objective(potential, a, &lambda);
    let gap = if dv.is_finite() {
        (pv - dv).abs() / pv.abs().max(1.0)
    } else {
        f64::INFINITY
    };
    Score {
        value: primal.max(gap),
        primal,
        gap,
    }
}

/// Restarted primal-dual hybrid gradient on min ψ(w) + g(Aw), g the
/// indicator of {z ≥ 1}. Every 64 iterations the current and averaged
/// iterates are scored by max(primal residual, relative duality gap); the
/// method restarts from the better one on sufficient decay and rebalances
/// the primal weight. Converged when the score drops below `tol`.
pub fn solve_primal_dual(data: &Dataset, potential: Potential, max_iters: usize, tol: f64) -> Result<SolveResult> {
    solve_primal_dual_weighted(data, potential, 1.0, max_iters, tol)
}

/// Same program with objective `weight`·ψ.
pub fn solve_primal_dual_weighted(
    data: &Dataset,
    potential: Potential,
    weight: f64,
    max_iters: usize,
    tol: f64,
) -> Result<SolveResult> {
    if !(tol > 0.0) {
        return arg_err(format!("solve_primal_dual: tol must be > 0, got {tol}"));
    }
    if !(weight > 0.0) || !weight.is_finite() {
        return arg_err(format!("solve_primal_dual: weight must be finite and > 0, got {weight}"));
    }
    let a = data.signed_design();
    let (n, p) = (data.n, data.p);
    let l = spectral_norm(&a);
    if l == 0.0 {
        return arg_err("solve_primal_dual: zero design matrix");
    }
    const CHECK: usize = 64;
    let mut omega = 1.0f64;
    let mut w = vec![0.0; p];
    let mut u = vec![0.0; n];
    let mut w_bar = vec![0.0; p];
    let (mut w_sum, mut u_sum) = (vec![0.0; p], vec![0.0; n]);
    let (mut w_anchor, mut u_anchor) = (w.clone(), u.clone());
    let mut count = 0usize;
    let mut inner = 0usize;
    let mut last: Option<f64> = None;
    let mut aw = vec![0.0; n];
    let mut atu = vec![0.0; p];
    let mut v = vec![0.0; p];
    let mut wn = vec![0.0; p];
    let mut k = 0usize;
    while k < max_iters {
        let tau = 0.95 / (l * omega);
        let sig = 0.95 * omega / l;
        a.matvec_into(&w_bar, &mut aw);
        for i in 0..n {
            u[i] = (u[i] + sig * aw[i] - sig).min(0.0);
        }
        a.t_matvec_into(&u, &mut atu);
        for j in 0..p {
            v[j] = w[j] - tau * atu[j];
        }
        program_prox(potential, &v, tau * weight, &mut wn);
        for j in 0..p {
            w_bar[j] = 2.0 * wn[j] - w[j];
            w[j] = wn[j];
            w_sum[j] += w[j];
        }
        for i in 0..n {
            u_sum[i] += u[i];
        }
        count += 1;
        inner += 1;
        k += 1;
        if k % CHECK == 0 {
            let cur = score(potential, weight, &a, &w, &u);
            if cur.value < tol {
                return Ok(finish_pd(w, u, k, cur, true));
            }
            let inv = 1.0 / count as f64;
            let wa: Vec<f64> = w_sum.iter().map(|x| x * inv).collect();
            let ua: Vec<f64> = u_sum.iter().map(|x| x * inv).collect();
            let avg = score(potential, weight, &a, &wa, &ua);
            if avg.value < tol {
                return Ok(finish_pd(wa, ua, k, avg, true));
            }
            let reference = *last.get_or_insert(cur.value.max(avg.value));
            let cand = cur.value.min(avg.value);
            if cand <= 0.2 * reference || inner >= 8192 {
                if avg.value < cur.value {
                    w = wa;
                    u = ua;
                }
                let dw = w.iter().zip(&w_anchor).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
                let du = u.iter().zip(&u_anchor).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
                if dw > 1e-10 && du > 1e-10 {
                    omega = (0.5 * (du / dw).ln() + 0.5 * omega.ln()).exp();
                }
                w_anchor.copy_from_slice(&w);
                u_anchor.copy_from_slice(&u);
                w_bar.copy_from_slice(&w);
                last = Some(cand);
                w_sum.iter_mut().for_each(|x| *x = 0.0);
                u_sum.iter_mut().for_each(|x| *x = 0.0);
                count = 0;
                inner = 0;
            }
        }
    }
    let cur = score(potential, weight, &a, &w, &u);
    Ok(finish_pd(w, u, k, cur, false))
}

fn finish_pd(w: Vec<f64>, u: Vec<f64>, k: usize, s: Score, converged: bool) -> SolveResult {
    SolveResult {
        estimate: w,
        iterations: k,
        primal_residual: s.primal,
        duality_gap: Some(s.gap),
        converged,
        dual: Some(u.iter().map(|x| -x).collect()),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MirrorDescentResult {
    pub result: SolveResult,
    /// (iteration, angle to the reference direction) at evenly spaced checkpoints.
    pub angle_history: Vec<(usize, f64)>,
}

pub fn angle_between(a: &[f64], b: &[f64]) -> f64 {
    let c = dot(a, b) / (norm(a) * norm(b));
    c.clamp(-1.0, 1.0).acos()
}

/// ∇ψ(w_{t+1}) = ∇ψ(w_t) − η∇L(w_t) on the logistic loss
/// L(w) = Σ log(1 + exp(−yᵢxᵢᵀw)). Only ψ = ½‖·‖² (strong convexity 1) is
/// supported, where the mirror map is the identity.
pub fn solve_mirror_descent(
    data: &Dataset,
    potential: Potential,
    eta: f64,
    max_iters: usize,
    reference: Option<&[f64]>,
) -> Result<MirrorDescentResult> {
    if potential != Potential::L2Squared {
        return Err(unsupported(
            "mirror descent needs a strongly convex potential with invertible gradient; use the primal-dual solver",
        ));
    }
    let strong_convexity = 1.0;
    let smax = spectral_norm(&data.features);
    let bound = 2.0 * strong_convexity / (smax * smax);
    if !(eta > 0.0 && eta < bound) {
        return arg_err(format!("mirror descent: eta = {eta} violates 0 < eta < 2/sigma_max^2 = {bound}"));
    }
    if let Some(r) = reference {
        if r.len() != data.p {
            return arg_err("mirror descent: reference direction has the wrong length");
        }
    }
    let a = data.signed_design();
    let mut w = vec![0.0; data.p];
    let mut m = vec![0.0; data.n];
    let mut g = vec![0.0; data.p];
    let stride = (max_iters / 256).max(1);
    let mut history = Vec::new();
    for it in 1..=max_iters {
        a.matvec_into(&w, &mut m);
        logistic_grad(&a, &m, &mut g);
        for (wj, gj) in w.iter_mut().zip(&g) {
            *wj -= eta * gj;
        }
        if let Some(r) = reference {
            if it % stride == 0 || it == max_iters {
                history.push((it, angle_between(&w, r)));
            }
        }
    }
    a.matvec_into(&w, &mut m);
    let min_margin = min_of(&m);
    Ok(MirrorDescentResult {
        result: SolveResult {
            estimate: w,
            iterations: max_iters,
            primal_residual: (-min_margin).max(0.0),
            duality_gap: None,
            converged: min_margin > 0.0,
            dual: None,
        },
        angle_history: history,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupportRates {
    /// Fraction of the true support estimated as zero.
    pub p1: f64,
    /// Fraction of off-support entries estimated as nonzero; `None` without
    /// off-support entries.
    pub p2: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalReport {
    pub gen_error: f64,
    pub correlation: f64,
    pub norm: f64,
    pub support: Option<SupportRates>,
}

pub fn evaluate(data: &Dataset, estimate: &[f64], support_threshold: Option<f64>) -> Result<EmpiricalReport> {
    if estimate.len() != data.p {
        return arg_err("evaluate: estimate has the wrong length");
    }
    let ne = norm(estimate);
    let nw = norm(&data.ground_truth);
    if ne == 0.0 || !ne.is_finite() {
        return Err(Error::Domain("evaluate: zero estimate".into()));
    }
    if nw == 0.0 {
        return Err(Error::Domain("evaluate: zero ground truth".into()));
    }
    let ip = dot(estimate, &data.ground_truth);
    let p = data.p as f64;
    let support = match support_threshold {
        Some(eps) => {
            let (mut on, mut miss, mut off, mut alarm) = (0usize, 0usize, 0usize, 0usize);
            for (&wh, &ws) in estimate.iter().zip(&data.ground_truth) {
                let est = wh.abs() > eps;
                if ws != 0.0 {
                    on += 1;
                    miss += usize::from(!est);
                } else {
                    off += 1;
                    alarm += usize::from(est);
                }
            }
            Some(SupportRates {
                p1: miss as f64 / on.max(1) as f64,
                p2: (off > 0).then(|| alarm as f64 / off as f64),
            })
        }
        None => None,
    };
    Ok(EmpiricalReport {
        gen_error: (ip / (ne * nw)).clamp(-1.0, 1.0).acos() / std::f64::consts::PI,
        correlation: ip / p,
        norm: ne / p.sqrt(),
        support,
    })
}

//! Randomized property suites for the prox operators, Moreau envelopes and
//! the summary functional.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::Result;
use crate::numerics::{QuadratureGrid, RngStream};
use crate::potentials::{moreau, project_l1_ball, prox, prox_linf_radius, Potential};
use crate::summary::{eval_c, mc_oracle_c, LinkFunction};

#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub cases: usize,
    /// Worst observed value of the checked quantity.
    pub worst: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckReport {
    fn new(name: &str, cases: usize, worst: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            cases,
            worst,
            tolerance,
            passed: worst <= tolerance,
        }
    }
}

const POTENTIALS: [Potential; 3] = [Potential::L2Squared, Potential::L1, Potential::LinfScaled];

fn gauss_vec(rng: &mut impl Rng, d: usize, scale: f64) -> Vec<f64> {
    (0..d).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()
}

fn sup_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Prox of c‖·‖∞ as clip(v, −μ, μ) with Σ(|vᵢ| − μ)₊ = c found by bisection.
fn linf_prox_by_bisection(v: &[f64], c: f64) -> Vec<f64> {
    let l1: f64 = v.iter().map(|x| x.abs()).sum();
    if l1 <= c {
        return vec![0.0; v.len()];
    }
    let excess = |mu: f64| v.iter().map(|x| (x.abs() - mu).max(0.0)).sum::<f64>() - c;
    let (mut lo, mut hi) = (0.0, v.iter().fold(0.0f64, |m, x| m.max(x.abs())));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if excess(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mu = 0.5 * (lo + hi);
    v.iter().map(|x| x.clamp(-mu, mu)).collect()
}

/// Optimality of the prox via the variational inequality
/// ⟨v − x, y − x⟩ ≤ t(ψ(y) − ψ(x)) at random y, and firm nonexpansiveness.
pub fn check_prox(seed: u64) -> Result<Vec<CheckReport>> {
    let mut rng = RngStream::new(seed, 1).rng();
    let mut out = Vec::new();
    for pot in POTENTIALS {
        let (mut vi, mut fne) = (0.0f64, 0.0f64);
        let cases = 100;
        for _ in 0..cases {
            let d = rng.random_range(1..12);
            let t = 0.05 + 2.0 * rng.random::<f64>();
            let v = gauss_vec(&mut rng, d, 2.0);
            let u = gauss_vec(&mut rng, d, 2.0);
            let x = prox(pot, &v, t)?;
            for _ in 0..10 {
                let y = gauss_vec(&mut rng, d, 2.0);
                let lhs: f64 = (0..d).map(|j| (v[j] - x[j]) * (y[j] - x[j])).sum();
                let rhs = t * (pot.value(&y) - pot.value(&x));
                vi = vi.max(lhs - rhs);
            }
            let xu = prox(pot, &u, t)?;
            let dp: f64 = (0..d).map(|j| (x[j] - xu[j]).powi(2)).sum();
            let inner: f64 = (0..d).map(|j| (x[j] - xu[j]) * (v[j] - u[j])).sum();
            fne = fne.max(dp - inner);
        }
        out.push(CheckReport::new(&format!("prox {} variational inequality", pot.as_str()), cases, vi, 1e-10));
        out.push(CheckReport::new(&format!("prox {} firm nonexpansiveness", pot.as_str()), cases, fne, 1e-10));
    }
    let mut worst = 0.0f64;
    let cases = 100;
    for _ in 0..cases {
        let d = rng.random_range(1..20);
        let c = 0.1 + 3.0 * rng.random::<f64>();
        let v = gauss_vec(&mut rng, d, 2.0);
        let proj = project_l1_ball(&v, c)?;
        let norm: f64 = proj.iter().map(|x| x.abs()).sum();
        worst = worst.max((norm - c).max(0.0));
    }
    out.push(CheckReport::new("l1-ball projection feasibility", cases, worst, 1e-12));
    Ok(out)
}

/// Envelope gradients against central differences, and the ℓ∞ Moreau
/// decomposition v = prox_{c‖·‖∞}(v) + Π_{cB₁}(v) with the prox computed by
/// an independent threshold search.
pub fn check_moreau(seed: u64) -> Result<Vec<CheckReport>> {
    let mut rng = RngStream::new(seed, 2).rng();
    let mut out = Vec::new();
    let cases = 100;
    for pot in POTENTIALS {
        let (mut gw, mut gt) = (0.0f64, 0.0f64);
        for _ in 0..cases {
            let d = rng.random_range(1..8);
            let t = 0.1 + 2.0 * rng.random::<f64>();
            let v = gauss_vec(&mut rng, d, 2.0);
            let m = moreau(pot, &v, t)?;
            for j in 0..d {
                let h = 1e-6 * v[j].abs().max(1.0);
                let mut vp = v.clone();
                let mut vm = v.clone();
                vp[j] += h;
                vm[j] -= h;
                let fd = (moreau(pot, &vp, t)?.value - moreau(pot, &vm, t)?.value) / (2.0 * h);
                gw = gw.max((fd - m.gradient[j]).abs() / m.gradient[j].abs().max(1.0));
            }
            let h = 1e-6 * t;
            let fd = (moreau(pot, &v, t + h)?.value - moreau(pot, &v, t - h)?.value) / (2.0 * h);
            gt = gt.max((fd - m.deriv_t).abs() / m.deriv_t.abs().max(1.0));
        }
        out.push(CheckReport::new(&format!("moreau {} gradient vs finite differences", pot.as_str()), cases, gw, 1e-5));
        out.push(CheckReport::new(&format!("moreau {} t-derivative vs finite differences", pot.as_str()), cases, gt, 1e-5));
    }
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let d = rng.random_range(1..20);
        let c = 0.1 + 3.0 * rng.random::<f64>();
        let v = gauss_vec(&mut rng, d, 2.0);
        let prx = linf_prox_by_bisection(&v, c);
        let proj = project_l1_ball(&v, c)?;
        let sum: Vec<f64> = prx.iter().zip(&proj).map(|(a, b)| a + b).collect();
        worst = worst.max(sup_dist(&sum, &v));
        worst = worst.max(sup_dist(&prox_linf_radius(&v, c)?, &prx));
    }
    out.push(CheckReport::new("linf moreau decomposition", cases, worst, 1e-12));
    Ok(out)
}

/// eval_c against plain Monte Carlo on a 5×5×2 (κ, s, r) grid, and midpoint
/// convexity of √c in (s, r).
pub fn check_c_functional(seed: u64) -> Result<Vec<CheckReport>> {
    let grid = QuadratureGrid::standard();
    let link = LinkFunction::StandardLogistic;
    let mut out = Vec::new();
    let mut worst = 0.0f64;
    let mut cases = 0;
    for (i, &kappa) in [0.0, 0.5, 1.0, 2.0, 4.0].iter().enumerate() {
        for (j, &s) in [-1.0, -0.3, 0.0, 0.4, 1.2].iter().enumerate() {
            for (k, &r) in [0.3, 1.5].iter().enumerate() {
                let exact = eval_c(kappa, s, r, &link, grid)?.value;
                let id = (i * 10 + j) * 2 + k;
                let (est, se) = mc_oracle_c(kappa, s, r, &link, 200_000, RngStream::new(seed, 100 + id as u64))?;
                worst = worst.max((exact - est).abs() / se);
                cases += 1;
            }
        }
    }
    out.push(CheckReport::new("c vs monte carlo (stderr units)", cases, worst, 3.0));
    let mut rng = RngStream::new(seed, 3).rng();
    let mut worst = f64::NEG_INFINITY;
    let cases = 200;
    for _ in 0..cases {
        let kappa = 3.0 * rng.random::<f64>();
        let a = (2.0 * rng.random::<f64>() - 1.0, 2.0 * rng.random::<f64>());
        let b = (2.0 * rng.random::<f64>() - 1.0, 2.0 * rng.random::<f64>());
        let m = (0.5 * (a.0 + b.0), 0.5 * (a.1 + b.1));
        let f = |p: (f64, f64)| eval_c(kappa, p.0, p.1, &link, grid).map(|e| e.value.sqrt());
        worst = worst.max(f(m)? - 0.5 * (f(a)? + f(b)?));
    }
    out.push(CheckReport::new("sqrt(c) midpoint convexity", cases, worst.max(0.0), 1e-12));
    Ok(out)
}

pub fn run_suite(name: &str, seed: u64) -> Result<Vec<CheckReport>> {
    match name {
        "prox" => check_prox(seed),
        "moreau" => check_moreau(seed),
        "c-functional" => check_c_functional(seed),
        other => crate::error::arg_err(format!("unknown check suite '{other}'")),
    }
}

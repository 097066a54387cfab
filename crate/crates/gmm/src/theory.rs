//! Phase transition, the five-variable fixed-point system and the
//! asymptotic performance formulas.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{arg_err, Error, Result};
use crate::newton::damped_newton;
use crate::numerics::{chi_prime, chi_unchecked, q, QuadratureGrid};
use crate::potentials::{
    prox_statistics, prox_statistics_mixture, proxies, Potential, Prior, ProxStatistics,
};
use crate::summary::{eval_c, outer_rule, LinkFunction};

#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub kappa: f64,
    pub delta: f64,
    pub link: LinkFunction,
}

impl ModelSpec {
    pub fn new(kappa: f64, delta: f64, link: LinkFunction) -> Result<Self> {
        if !(kappa >= 0.0) || !kappa.is_finite() {
            return arg_err(format!("kappa must be finite and >= 0, got {kappa}"));
        }
        if !(delta > 0.0) || !delta.is_finite() {
            return arg_err(format!("delta must be finite and > 0, got {delta}"));
        }
        Ok(Self { kappa, delta, link })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPointVars {
    pub alpha: f64,
    pub sigma: f64,
    pub beta: f64,
    pub gamma: f64,
    pub tau: f64,
}

impl FixedPointVars {
    pub fn as_array(&self) -> [f64; 5] {
        [self.alpha, self.sigma, self.beta, self.gamma, self.tau]
    }
}

/// A converged solution of the fixed-point system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub vars: FixedPointVars,
    /// Max scaled residual of the five equations, re-evaluated independently.
    pub max_residual: f64,
    pub delta_star: f64,
    /// δ < 1.05 δ*: conditioning degrades near the phase boundary.
    pub near_boundary: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryReport {
    pub vars: FixedPointVars,
    pub gen_error: f64,
    pub correlation: f64,
    pub norm: f64,
    pub support: Option<(f64, f64)>,
}

impl TheoryReport {
    pub fn new(vars: FixedPointVars, spec: &ModelSpec, sparsity: Option<f64>) -> Result<Self> {
        let kappa = spec.kappa;
        let gen_error = generalization_error(vars.alpha, vars.sigma, kappa)?;
        let support = match sparsity {
            Some(s) => Some(support_recovery(&vars, spec, s)?),
            None => None,
        };
        Ok(Self {
            vars,
            gen_error,
            correlation: kappa * kappa * vars.alpha,
            norm: (kappa * kappa * vars.alpha * vars.alpha + vars.sigma * vars.sigma).sqrt(),
            support,
        })
    }
}

/// g(b) = E[χ(κ b Z Y)] and its derivative.
fn slope_objective(kappa: f64, b: f64, link: &LinkFunction, grid: &QuadratureGrid) -> (f64, f64) {
    let (mut g, mut dg) = (0.0, 0.0);
    for (z, w) in outer_rule(kappa, None, link, grid) {
        let p = link.eval(kappa * z);
        let u = kappa * b * z;
        g += w * (p * chi_unchecked(u) + (1.0 - p) * chi_unchecked(-u));
        dg += w * kappa * z * (p * chi_prime(u) - (1.0 - p) * chi_prime(-u));
    }
    (g, dg)
}

/// δ*(κ) = inf_{s, r} c_κ(s, r)/r².
///
/// With a = 1/r and b = s/r, c/r² = E[χ(κ b Z₁Y − a)], which increases in a
/// because χ is decreasing; the infimum is therefore the r → ∞ limit
/// min_b E[χ(κ b Z₁Y)], a one-dimensional convex problem.
pub fn delta_star(kappa: f64, link: &LinkFunction) -> Result<f64> {
    Ok(delta_star_slope(kappa, link, QuadratureGrid::standard())?.0)
}

/// (δ*, minimizing slope b = s/r).
pub fn delta_star_slope(kappa: f64, link: &LinkFunction, grid: &QuadratureGrid) -> Result<(f64, f64)> {
    if !(kappa >= 0.0) || !kappa.is_finite() {
        return arg_err(format!("delta_star: kappa must be finite and >= 0, got {kappa}"));
    }
    if kappa == 0.0 {
        return Ok((0.5, 0.0));
    }
    let (g0, d0) = slope_objective(kappa, 0.0, link, grid);
    if d0 >= 0.0 {
        return Ok((g0, 0.0));
    }
    let mut hi = 1.0;
    loop {
        let (g, d) = slope_objective(kappa, hi, link, grid);
        if d >= 0.0 {
            break;
        }
        if hi > 1e8 {
            // labels determined by the sign of xᵀw⋆: the infimum is not attained
            return Ok((g, hi));
        }
        hi *= 2.0;
    }
    let mut lo = 0.0;
    let mut iters = 0;
    while hi - lo > 1e-13 * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if slope_objective(kappa, mid, link, grid).1 < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        iters += 1;
        if iters > 200 {
            return Err(Error::NonConvergence {
                context: "delta_star slope search".into(),
                residuals: vec![hi - lo],
            });
        }
    }
    let b = 0.5 * (lo + hi);
    Ok((slope_objective(kappa, b, link, grid).0, b))
}

/// (c, ∂c/∂α, ∂c/∂σ) at (α, σ).
fn c_partials(kappa: f64, alpha: f64, sigma: f64, link: &LinkFunction) -> Option<(f64, f64, f64)> {
    let e = eval_c(kappa, alpha, sigma, link, QuadratureGrid::standard()).ok()?;
    Some((e.value, e.d_s?, e.d_r?))
}

fn scaled(lhs: f64, rhs: f64) -> f64 {
    (lhs - rhs) / rhs.abs().max(1.0)
}

/// Scaled residuals of the five equations, with the expectations taken from
/// the Gaussian-mixture engine.
pub fn eq9_residuals(
    prior: &Prior,
    potential: Potential,
    spec: &ModelSpec,
    v: &FixedPointVars,
) -> Result<[f64; 5]> {
    let st = prox_statistics_mixture(prior, potential, v, spec.delta)?;
    residuals_from(st, spec, v)
}

fn residuals_from(st: ProxStatistics, spec: &ModelSpec, v: &FixedPointVars) -> Result<[f64; 5]> {
    let k2 = spec.kappa * spec.kappa;
    let (c, ca, cs) = c_partials(spec.kappa, v.alpha, v.sigma, &spec.link)
        .ok_or_else(|| Error::Domain("summary functional unavailable at sigma = 0".into()))?;
    let rc = c.sqrt();
    Ok([
        scaled(st.corr, v.alpha * k2),
        scaled(st.gauss_corr, (c / spec.delta).sqrt()),
        scaled(st.sq_norm, v.alpha * v.alpha * k2 + v.sigma * v.sigma),
        scaled(ca, 2.0 * k2 * v.gamma / v.beta * rc),
        scaled(cs, 2.0 * rc / (v.beta * v.tau)),
    ])
}

pub fn max_abs_residual(r: &[f64]) -> f64 {
    r.iter().fold(0.0, |m, x| m.max(x.abs()))
}

const RESIDUAL_TOL: f64 = 1e-8;
const NEWTON_TOL: f64 = 1e-13;

fn check_regime(spec: &ModelSpec) -> Result<f64> {
    if !(spec.kappa > 0.0) {
        return arg_err("theory solvers need kappa > 0");
    }
    let ds = delta_star(spec.kappa, &spec.link)?;
    if spec.delta <= ds {
        return Err(Error::Infeasible {
            delta: spec.delta,
            delta_star: ds,
        });
    }
    Ok(ds)
}

fn finalize(
    prior: &Prior,
    potential: Potential,
    spec: &ModelSpec,
    vars: FixedPointVars,
    ds: f64,
    context: &str,
) -> Result<Solution> {
    let r = eq9_residuals(prior, potential, spec, &vars)?;
    let max_residual = max_abs_residual(&r);
    if !(max_residual <= RESIDUAL_TOL) {
        return Err(Error::NonConvergence {
            context: context.into(),
            residuals: r.to_vec(),
        });
    }
    Ok(Solution {
        vars,
        max_residual,
        delta_star: ds,
        near_boundary: spec.delta < 1.05 * ds,
    })
}

/// ℓ2 system: three equations in (α, σ, τ) after eliminating β and γ.
pub fn solve_l2(spec: &ModelSpec) -> Result<Solution> {
    let ds = check_regime(spec)?;
    let (k, d) = (spec.kappa, spec.delta);
    let tau_of = |sigma: f64, cs: f64| (2.0 * sigma * d / cs - 1.0) / sigma;
    let f = |x: &[f64]| -> Option<Vec<f64>> {
        let (a, sg) = (x[0], x[1].exp());
        let (c, ca, cs) = c_partials(k, a, sg, &spec.link)?;
        if !(cs > 0.0) {
            return None;
        }
        let tau = tau_of(sg, cs);
        Some(vec![c / (sg * sg) - d, ca + k * k * a * cs * tau])
    };
    let mut best: Option<(f64, Vec<f64>)> = None;
    for start in [[1.0, 0.0], [0.5, -1.0], [2.0, 1.0], [0.1, 0.0], [5.0, 2.0]] {
        if let Some(out) = damped_newton(f, &start, NEWTON_TOL, 200) {
            let (a, sg) = (out.x[0], out.x[1].exp());
            let ok = c_partials(k, a, sg, &spec.link)
                .map(|(_, _, cs)| tau_of(sg, cs) > 0.0)
                .unwrap_or(false);
            if ok && best.as_ref().is_none_or(|b| out.max_abs < b.0) {
                best = Some((out.max_abs, out.x.clone()));
            }
            if ok && out.max_abs <= NEWTON_TOL * 10.0 {
                break;
            }
        }
    }
    let (_, x) = best.ok_or_else(|| Error::NonConvergence {
        context: "solve_l2".into(),
        residuals: vec![],
    })?;
    let (alpha, sigma) = (x[0], x[1].exp());
    let (_, _, cs) = c_partials(k, alpha, sigma, &spec.link).expect("evaluated above");
    let tau = tau_of(sigma, cs);
    let vars = FixedPointVars {
        alpha,
        sigma,
        beta: (1.0 + sigma * tau) / (tau * d.sqrt()),
        gamma: -alpha,
        tau,
    };
    finalize(&Prior::Gaussian { kappa: k }, Potential::L2Squared, spec, vars, ds, "solve_l2")
}

/// Recover (β, γ, τ) from equations four and five given (α, σ, β).
fn complete(spec: &ModelSpec, alpha: f64, sigma: f64, beta: f64) -> Option<(FixedPointVars, f64)> {
    let (c, ca, cs) = c_partials(spec.kappa, alpha, sigma, &spec.link)?;
    if !(c > 0.0 && cs > 0.0) {
        return None;
    }
    let rc = c.sqrt();
    let vars = FixedPointVars {
        alpha,
        sigma,
        beta,
        gamma: beta * ca / (2.0 * spec.kappa * spec.kappa * rc),
        tau: 2.0 * rc / (beta * cs),
    };
    Some((vars, c))
}

/// Solve the reduced system in x = (α, ln σ, ln β) from a list of starts.
fn solve_reduced<R>(spec: &ModelSpec, residual: R, starts: &[[f64; 3]], context: &str) -> Result<FixedPointVars>
where
    R: Fn(&FixedPointVars, f64) -> Option<[f64; 3]>,
{
    let f = |x: &[f64]| -> Option<Vec<f64>> {
        let (vars, c) = complete(spec, x[0], x[1].exp(), x[2].exp())?;
        residual(&vars, c).map(|r| r.to_vec())
    };
    let mut best: Option<(f64, Vec<f64>, Vec<f64>)> = None;
    for start in starts {
        if let Some(out) = damped_newton(f, start, NEWTON_TOL, 100) {
            if best.as_ref().is_none_or(|b| out.max_abs < b.0) {
                best = Some((out.max_abs, out.x.clone(), out.residual.clone()));
            }
            if out.max_abs <= 1e-12 {
                break;
            }
        }
    }
    match best {
        Some((_, x, _)) => Ok(complete(spec, x[0], x[1].exp(), x[2].exp())
            .expect("evaluated during the solve")
            .0),
        None => Err(Error::NonConvergence {
            context: context.into(),
            residuals: vec![],
        }),
    }
}

fn ladder_from(base: &FixedPointVars) -> Vec<[f64; 3]> {
    let mut starts = vec![[base.alpha, base.sigma.ln(), base.beta.ln()]];
    for i in 0..17 {
        let lb = -4.0 + 0.5 * i as f64;
        starts.push([base.alpha, base.sigma.ln(), lb]);
    }
    starts
}

/// ℓ1 system written with Q, χ and the proxies t₁, t₂.
pub fn solve_l1(spec: &ModelSpec, sparsity: f64) -> Result<Solution> {
    if !(sparsity > 0.0 && sparsity <= 1.0) {
        return arg_err(format!("solve_l1: sparsity must lie in (0, 1], got {sparsity}"));
    }
    let ds = check_regime(spec)?;
    let (k, d, s) = (spec.kappa, spec.delta, sparsity);
    let prior = Prior::SparseGaussian { sparsity: s, kappa: k };
    let start = solve_l2(spec)?.vars;
    let residual = |v: &FixedPointVars, c: f64| -> Option<[f64; 3]> {
        let st = v.sigma * v.tau;
        let a = v.alpha - st * v.gamma;
        if a == 0.0 {
            return None;
        }
        let (t1, t2) = proxies(&prior, v, d);
        let q2 = if s < 1.0 { (1.0 - s) * q(t2) } else { 0.0 };
        let x2 = if s < 1.0 { (1.0 - s) * chi_unchecked(t2) / (t2 * t2) } else { 0.0 };
        let r1 = q(t1) - v.alpha / (2.0 * a);
        let r2 = s * q(t1) + q2 - c.sqrt() / (2.0 * v.beta * st * d);
        let rhs3 = k * k * v.alpha * v.alpha / (2.0 * st * st) + 1.0 / (2.0 * v.tau * v.tau);
        let r3 = (s * chi_unchecked(t1) / (t1 * t1) + x2 - rhs3) / rhs3.max(1.0);
        Some([r1, r2, r3])
    };
    let vars = solve_reduced(spec, residual, &ladder_from(&start), "solve_l1")?;
    finalize(&prior, Potential::L1, spec, vars, ds, "solve_l1")
}

fn stats_residual(
    st: ProxStatistics,
    spec: &ModelSpec,
    v: &FixedPointVars,
    c: f64,
) -> [f64; 3] {
    let k2 = spec.kappa * spec.kappa;
    [
        scaled(st.corr, v.alpha * k2),
        scaled(st.gauss_corr, (c / spec.delta).sqrt()),
        scaled(st.sq_norm, v.alpha * v.alpha * k2 + v.sigma * v.sigma),
    ]
}

/// ℓ∞ system with the λ root nested in every residual evaluation.
pub fn solve_linf(spec: &ModelSpec, prior: &Prior) -> Result<Solution> {
    let ds = check_regime(spec)?;
    let prior = prior.with_kappa(spec.kappa);
    prior.validate()?;
    let start = solve_l2(spec)?.vars;
    let residual = |v: &FixedPointVars, c: f64| -> Option<[f64; 3]> {
        let st = prox_statistics(&prior, Potential::LinfScaled, v, spec.delta).ok()?;
        Some(stats_residual(st, spec, v, c))
    };
    let vars = solve_reduced(spec, residual, &ladder_from(&start), "solve_linf")?;
    finalize(&prior, Potential::LinfScaled, spec, vars, ds, "solve_linf")
}

/// Any (prior, potential) pair, with statistics from the mixture engine and
/// starts independent of the specialized solvers: (α, σ, β) = (1, 1, 1), a
/// ladder in β, then 8 seeded random restarts.
pub fn solve_general(prior: &Prior, potential: Potential, spec: &ModelSpec) -> Result<Solution> {
    let ds = check_regime(spec)?;
    let prior = prior.with_kappa(spec.kappa);
    prior.validate()?;
    let residual = |v: &FixedPointVars, c: f64| -> Option<[f64; 3]> {
        let st = prox_statistics_mixture(&prior, potential, v, spec.delta).ok()?;
        Some(stats_residual(st, spec, v, c))
    };
    let mut starts = ladder_from(&FixedPointVars {
        alpha: 1.0,
        sigma: 1.0,
        beta: 1.0,
        gamma: -1.0,
        tau: 1.0,
    });
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for _ in 0..8 {
        starts.push([
            rng.random_range(0.05..3.0),
            rng.random_range(-2.0..2.0),
            rng.random_range(-4.0..4.0),
        ]);
    }
    let vars = solve_reduced(spec, residual, &starts, "solve_general")?;
    finalize(&prior, potential, spec, vars, ds, "solve_general")
}

/// Specialized solver matching (prior, potential), falling back to the
/// general solver for pairs without one.
pub fn solve_specialized(prior: &Prior, potential: Potential, spec: &ModelSpec) -> Result<Solution> {
    match (potential, prior) {
        (Potential::L2Squared, _) => solve_l2(spec),
        (Potential::L1, Prior::Gaussian { .. }) => solve_l1(spec, 1.0),
        (Potential::L1, Prior::SparseGaussian { sparsity, .. }) => solve_l1(spec, *sparsity),
        (Potential::L1, Prior::Binary { .. }) => solve_general(prior, potential, spec),
        (Potential::LinfScaled, _) => solve_linf(spec, prior),
    }
}

pub fn generalization_error(alpha: f64, sigma: f64, kappa: f64) -> Result<f64> {
    if !(kappa > 0.0) || !(sigma >= 0.0) || !alpha.is_finite() || !sigma.is_finite() {
        return arg_err(format!(
            "generalization_error: need kappa > 0, sigma >= 0 (got kappa {kappa}, sigma {sigma})"
        ));
    }
    let norm = (kappa * kappa * alpha * alpha + sigma * sigma).sqrt();
    if norm == 0.0 {
        return Err(Error::Domain("generalization_error: zero estimator".into()));
    }
    Ok((kappa * alpha / norm).clamp(-1.0, 1.0).acos() / std::f64::consts::PI)
}

/// (P1, P2) = (1 − 2Q(t₁), 2Q(t₂)).
pub fn support_probabilities(t1: f64, t2: f64) -> (f64, f64) {
    (1.0 - 2.0 * q(t1), 2.0 * q(t2))
}

pub fn support_recovery(vars: &FixedPointVars, spec: &ModelSpec, sparsity: f64) -> Result<(f64, f64)> {
    if !(sparsity > 0.0 && sparsity <= 1.0) {
        return arg_err(format!("support_recovery: sparsity must lie in (0, 1], got {sparsity}"));
    }
    if !(vars.sigma > 0.0 && vars.tau > 0.0 && vars.beta > 0.0) {
        return arg_err("support_recovery: sigma, tau, beta must be > 0");
    }
    let prior = Prior::SparseGaussian {
        sparsity,
        kappa: spec.kappa,
    };
    let (t1, t2) = proxies(&prior, vars, spec.delta);
    Ok(support_probabilities(t1, t2))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ge_examples() {
        assert_eq!(generalization_error(1.0, 0.0, 1.0).unwrap(), 0.0);
        assert!((generalization_error(0.0, 1.0, 1.0).unwrap() - 0.5).abs() < 1e-15);
        assert!((generalization_error(1.0, 1.0, 1.0).unwrap() - 0.25).abs() < 1e-15);
        assert!(generalization_error(0.0, 0.0, 1.0).is_err());
    }
}

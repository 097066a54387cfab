//! Proximal operators, Moreau envelopes and expected-prox statistics for
//! ψ ∈ {½‖·‖₂², ‖·‖₁, p‖·‖∞}.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{arg_err, Error, Result};
use crate::numerics::{chi_unchecked, phi, q, RngStream};
use crate::theory::FixedPointVars;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Potential {
    #[serde(rename = "l2")]
    L2Squared,
    #[serde(rename = "l1")]
    L1,
    /// ψ(w) = d·‖w‖∞ for w ∈ ℝᵈ.
    #[serde(rename = "linf")]
    LinfScaled,
}

impl Potential {
    pub fn as_str(&self) -> &'static str {
        match self {
            Potential::L2Squared => "l2",
            Potential::L1 => "l1",
            Potential::LinfScaled => "linf",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "l2" => Some(Potential::L2Squared),
            "l1" => Some(Potential::L1),
            "linf" => Some(Potential::LinfScaled),
            _ => None,
        }
    }

    pub fn value(&self, w: &[f64]) -> f64 {
        match self {
            Potential::L2Squared => 0.5 * w.iter().map(|x| x * x).sum::<f64>(),
            Potential::L1 => w.iter().map(|x| x.abs()).sum(),
            Potential::LinfScaled => w.len() as f64 * linf_norm(w),
        }
    }
}

pub fn linf_norm(w: &[f64]) -> f64 {
    w.iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[inline]
pub fn soft_threshold(x: f64, t: f64) -> f64 {
    x.signum() * (x.abs() - t).max(0.0)
}

/// argmin_x ψ(x) + ‖x − v‖²/(2t).
pub fn prox(potential: Potential, v: &[f64], t: f64) -> Result<Vec<f64>> {
    if !(t > 0.0) {
        return arg_err(format!("prox: t must be > 0, got {t}"));
    }
    Ok(match potential {
        Potential::L2Squared => v.iter().map(|x| x / (1.0 + t)).collect(),
        Potential::L1 => v.iter().map(|&x| soft_threshold(x, t)).collect(),
        Potential::LinfScaled => return prox_linf_radius(v, t * v.len() as f64),
    })
}

/// Prox of c·‖·‖∞: v − Π_{c·B₁}(v).
pub fn prox_linf_radius(v: &[f64], c: f64) -> Result<Vec<f64>> {
    let p = project_l1_ball(v, c)?;
    Ok(v.iter().zip(&p).map(|(a, b)| a - b).collect())
}

/// Euclidean projection onto {x : ‖x‖₁ ≤ radius}.
pub fn project_l1_ball(v: &[f64], radius: f64) -> Result<Vec<f64>> {
    if !(radius > 0.0) {
        return arg_err(format!("project_l1_ball: radius must be > 0, got {radius}"));
    }
    let theta = l1_ball_threshold(v, radius);
    if theta == 0.0 {
        return Ok(v.to_vec());
    }
    Ok(v.iter().map(|&x| soft_threshold(x, theta)).collect())
}

/// θ ≥ 0 with Σ(|vᵢ| − θ)₊ = radius, or 0 when v is inside the ball.
pub(crate) fn l1_ball_threshold(v: &[f64], radius: f64) -> f64 {
    let l1: f64 = v.iter().map(|x| x.abs()).sum();
    if l1 <= radius {
        return 0.0;
    }
    let mut mags: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    mags.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (k, &m) in mags.iter().enumerate() {
        cum += m;
        let cand = (cum - radius) / (k + 1) as f64;
        if m > cand {
            theta = cand;
        } else {
            break;
        }
    }
    theta.max(0.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Moreau {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub deriv_t: f64,
}

pub fn moreau(potential: Potential, v: &[f64], t: f64) -> Result<Moreau> {
    let p = prox(potential, v, t)?;
    let diff: Vec<f64> = v.iter().zip(&p).map(|(a, b)| a - b).collect();
    let d2: f64 = diff.iter().map(|x| x * x).sum();
    Ok(Moreau {
        value: potential.value(&p) + d2 / (2.0 * t),
        gradient: diff.iter().map(|x| x / t).collect(),
        deriv_t: -d2 / (2.0 * t * t),
    })
}

/// Distribution of the entries of w⋆. Every variant has E[W²] = κ².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "tag", rename_all = "lowercase")]
pub enum Prior {
    Gaussian { kappa: f64 },
    #[serde(rename = "sparse")]
    SparseGaussian { sparsity: f64, kappa: f64 },
    Binary { kappa: f64 },
}

impl Prior {
    pub fn kappa(&self) -> f64 {
        match *self {
            Prior::Gaussian { kappa } | Prior::SparseGaussian { kappa, .. } | Prior::Binary { kappa } => kappa,
        }
    }

    pub fn with_kappa(&self, kappa: f64) -> Prior {
        match *self {
            Prior::Gaussian { .. } => Prior::Gaussian { kappa },
            Prior::SparseGaussian { sparsity, .. } => Prior::SparseGaussian { sparsity, kappa },
            Prior::Binary { .. } => Prior::Binary { kappa },
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Prior::Gaussian { .. } => "gaussian",
            Prior::SparseGaussian { .. } => "sparse",
            Prior::Binary { .. } => "binary",
        }
    }

    /// Fraction of nonzero entries.
    pub fn sparsity(&self) -> f64 {
        match *self {
            Prior::SparseGaussian { sparsity, .. } => sparsity,
            _ => 1.0,
        }
    }

    pub fn second_moment(&self) -> f64 {
        self.kappa() * self.kappa()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.kappa();
        if !(k >= 0.0) || !k.is_finite() {
            return arg_err(format!("prior: kappa must be finite and >= 0, got {k}"));
        }
        if let Prior::SparseGaussian { sparsity, .. } = *self {
            if !(sparsity > 0.0 && sparsity <= 1.0) {
                return arg_err(format!("prior: sparsity must lie in (0, 1], got {sparsity}"));
            }
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Prior::Gaussian { kappa } => kappa * rng.sample::<f64, _>(StandardNormal),
            Prior::SparseGaussian { sparsity, kappa } => {
                if rng.random::<f64>() < sparsity {
                    kappa / sparsity.sqrt() * rng.sample::<f64, _>(StandardNormal)
                } else {
                    0.0
                }
            }
            Prior::Binary { kappa } => {
                if rng.random::<f64>() < 0.5 {
                    kappa
                } else {
                    -kappa
                }
            }
        }
    }

    /// Components (weight, ±mean, variance) of W as a symmetric Gaussian mixture.
    fn components(&self) -> Vec<(f64, f64, f64)> {
        match *self {
            Prior::Gaussian { kappa } => vec![(1.0, 0.0, kappa * kappa)],
            Prior::SparseGaussian { sparsity, kappa } => {
                let mut c = vec![(sparsity, 0.0, kappa * kappa / sparsity)];
                if sparsity < 1.0 {
                    c.push((1.0 - sparsity, 0.0, 0.0));
                }
                c
            }
            Prior::Binary { kappa } => vec![(1.0, kappa, 0.0)],
        }
    }

    pub fn law(&self) -> SymmetricMixture {
        SymmetricMixture {
            comps: self
                .components()
                .into_iter()
                .map(|(w, m, v)| (w, m, v.sqrt()))
                .collect(),
        }
    }
}

/// Σ wⱼ · ½[N(mⱼ, sⱼ²) + N(−mⱼ, sⱼ²)]; sⱼ = 0 gives point masses at ±mⱼ.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMixture {
    pub comps: Vec<(f64, f64, f64)>,
}

/// E(X − θ)₊ for X ~ N(m, sd²).
#[inline]
pub(crate) fn pos1(m: f64, sd: f64, th: f64) -> f64 {
    if sd == 0.0 {
        return (m - th).max(0.0);
    }
    let d = (th - m) / sd;
    sd * (phi(d) - d * q(d))
}

/// E(X − θ)₊² for X ~ N(m, sd²).
#[inline]
pub(crate) fn pos2(m: f64, sd: f64, th: f64) -> f64 {
    if sd == 0.0 {
        let v = (m - th).max(0.0);
        return v * v;
    }
    sd * sd * chi_unchecked((th - m) / sd)
}

/// P(X > θ) for X ~ N(m, sd²).
#[inline]
fn above(m: f64, sd: f64, th: f64) -> f64 {
    if sd == 0.0 {
        return if m > th { 1.0 } else { 0.0 };
    }
    q((th - m) / sd)
}

impl SymmetricMixture {
    /// E(|X| − λ)₊.
    pub fn excess(&self, lambda: f64) -> f64 {
        self.comps
            .iter()
            .map(|&(w, m, s)| w * (pos1(m, s, lambda) + pos1(-m, s, lambda)))
            .sum()
    }

    /// P(|X| > λ), the negated derivative of `excess`.
    pub fn exceed_prob(&self, lambda: f64) -> f64 {
        self.comps
            .iter()
            .map(|&(w, m, s)| w * (above(m, s, lambda) + above(-m, s, lambda)))
            .sum()
    }

    pub fn abs_mean(&self) -> f64 {
        self.excess(0.0)
    }

    fn scale_bound(&self) -> f64 {
        self.comps
            .iter()
            .map(|&(_, m, s)| m.abs() + 40.0 * s)
            .fold(0.0, f64::max)
    }
}

/// Root of a strictly decreasing f on [lo, hi] with f(lo) > 0 ≥ f(hi):
/// bisection to width 1e-12 then one guarded Newton step.
pub(crate) fn bisect_decreasing(
    f: impl Fn(f64) -> f64,
    df: impl Fn(f64) -> f64,
    mut lo: f64,
    mut hi: f64,
) -> f64 {
    let width = 1e-12 * hi.abs().max(1.0);
    while hi - lo > width {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let x = 0.5 * (lo + hi);
    let fx = f(x);
    let d = df(x);
    if d != 0.0 && d.is_finite() {
        let xn = x - fx / d;
        if xn >= lo - width && xn <= hi + width && f(xn).abs() < fx.abs() {
            return xn;
        }
    }
    x
}

/// λ ≥ 0 solving E(|X| − λ)₊ = t, or 0 when t ≥ E|X|.
pub fn lambda_star_mixture(law: &SymmetricMixture, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return arg_err(format!("lambda_star: t must be > 0, got {t}"));
    }
    if law.abs_mean() <= t {
        return Ok(0.0);
    }
    let hi = law.scale_bound().max(1.0);
    Ok(bisect_decreasing(
        |l| law.excess(l) - t,
        |l| -law.exceed_prob(l),
        0.0,
        hi,
    ))
}

pub fn lambda_star_general(prior: &Prior, t: f64) -> Result<f64> {
    prior.validate()?;
    lambda_star_mixture(&prior.law(), t)
}

fn sparse_lambda_lhs(l: f64, t1: f64, t2: f64, s: f64) -> f64 {
    let part = |t: f64| phi(l * t) / t - l * q(l * t);
    let mut v = 2.0 * s * part(t1);
    if s < 1.0 {
        v += 2.0 * (1.0 - s) * part(t2);
    }
    v
}

/// λ for the sparse/Gaussian ℓ∞ system, in units of στ.
pub fn lambda_star_sparse(t1: f64, t2: f64, s: f64) -> Result<f64> {
    if !(t1 > 0.0 && t2 > 0.0) {
        return arg_err(format!("lambda_star_sparse: t1, t2 must be > 0, got {t1}, {t2}"));
    }
    if !(s > 0.0 && s <= 1.0) {
        return arg_err(format!("lambda_star_sparse: s must be in (0, 1], got {s}"));
    }
    let active = if s < 1.0 { s / t1 + (1.0 - s) / t2 } else { 1.0 / t1 };
    if active <= (std::f64::consts::PI / 2.0).sqrt() {
        return Ok(0.0);
    }
    let mut hi = 1.0;
    while sparse_lambda_lhs(hi, t1, t2, s) > 1.0 {
        hi *= 2.0;
    }
    let dq = |l: f64| {
        let mut d = -2.0 * s * q(l * t1);
        if s < 1.0 {
            d -= 2.0 * (1.0 - s) * q(l * t2);
        }
        d
    };
    Ok(bisect_decreasing(
        |l| sparse_lambda_lhs(l, t1, t2, s) - 1.0,
        dq,
        0.0,
        hi,
    ))
}

pub fn sparse_lambda_residual(lambda: f64, t1: f64, t2: f64, s: f64) -> f64 {
    sparse_lambda_lhs(lambda, t1, t2, s) - 1.0
}

/// One-sided binary λ equation, b φ((λ − t₃)/b) + (t₃ − λ) Q((λ − t₃)/b) = ½
/// with b = β√δ.
pub fn lambda_star_binary(t3: f64, beta: f64, delta: f64) -> Result<f64> {
    if !(beta > 0.0 && delta > 0.0) || !t3.is_finite() {
        return arg_err(format!(
            "lambda_star_binary: need beta, delta > 0 and finite t3, got {beta}, {delta}, {t3}"
        ));
    }
    let b = beta * delta.sqrt();
    let f = |l: f64| binary_lambda_residual(l, t3, b);
    if f(0.0) <= 0.0 {
        return Ok(0.0);
    }
    let hi = t3.max(0.0) + 10.0 * b;
    Ok(bisect_decreasing(f, |l| -q((l - t3) / b), 0.0, hi))
}

pub fn binary_lambda_residual(lambda: f64, t3: f64, b: f64) -> f64 {
    let d = (lambda - t3) / b;
    b * phi(d) + (t3 - lambda) * q(d) - 0.5
}

/// Normalized first three moments of P = Prox_{στψ}(A w⋆ + B h).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProxStatistics {
    pub corr: f64,
    pub gauss_corr: f64,
    pub sq_norm: f64,
}

/// Effective input scales of the prox: A = α − στγ, B = βστ√δ, T = στ.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ProxInput {
    pub a: f64,
    pub b: f64,
    pub t: f64,
}

impl ProxInput {
    pub fn new(v: &FixedPointVars, delta: f64) -> Self {
        let t = v.sigma * v.tau;
        ProxInput {
            a: v.alpha - t * v.gamma,
            b: v.beta * t * delta.sqrt(),
            t,
        }
    }
}

fn check_vars(v: &FixedPointVars, delta: f64) -> Result<()> {
    if !(v.sigma > 0.0 && v.tau > 0.0 && v.beta > 0.0 && delta > 0.0) {
        return arg_err(format!(
            "prox_statistics: sigma, tau, beta, delta must be > 0 (got {v:?}, delta {delta})"
        ));
    }
    Ok(())
}

/// Proxies t₁ = στ/√(κ²A²/s + B²) and t₂ = στ/B = 1/(β√δ).
pub fn proxies(prior: &Prior, v: &FixedPointVars, delta: f64) -> (f64, f64) {
    let ProxInput { a, b, t } = ProxInput::new(v, delta);
    let k = prior.kappa();
    let s = prior.sparsity();
    (t / (k * k / s * a * a + b * b).sqrt(), t / b)
}

/// Moments of soft(X, λ) and clip(X, λ) = X − soft(X, λ) for X mixing
/// N(0, 1/t₁²) w.p. s and N(0, 1/t₂²) w.p. 1 − s; returned as
/// (P(|X| > λ) per population, E soft² per population).
fn sparse_terms(t: f64, lambda: f64) -> (f64, f64) {
    (2.0 * q(lambda * t), 2.0 * chi_unchecked(lambda * t) / (t * t))
}

/// Closed-form statistics for the built-in (prior, potential) pairs.
pub fn prox_statistics(
    prior: &Prior,
    potential: Potential,
    v: &FixedPointVars,
    delta: f64,
) -> Result<ProxStatistics> {
    check_vars(v, delta)?;
    prior.validate()?;
    let inp = ProxInput::new(v, delta);
    let (a, b, t) = (inp.a, inp.b, inp.t);
    let k2 = prior.second_moment();
    match (potential, prior) {
        (Potential::L2Squared, _) => {
            let d = 1.0 + t;
            Ok(ProxStatistics {
                corr: k2 * a / d,
                gauss_corr: b / d,
                sq_norm: (k2 * a * a + b * b) / (d * d),
            })
        }
        (Potential::L1, Prior::Gaussian { .. } | Prior::SparseGaussian { .. }) => {
            let s = prior.sparsity();
            let (t1, t2) = proxies(prior, v, delta);
            let (p1, e1) = sparse_terms(t1, 1.0);
            let (p2, e2) = if s < 1.0 { sparse_terms(t2, 1.0) } else { (0.0, 0.0) };
            Ok(ProxStatistics {
                corr: k2 * p1 * a,
                gauss_corr: (s * p1 + (1.0 - s) * p2) * b,
                sq_norm: t * t * (s * e1 + (1.0 - s) * e2),
            })
        }
        (Potential::LinfScaled, Prior::Gaussian { .. } | Prior::SparseGaussian { .. }) => {
            let s = prior.sparsity();
            let (t1, t2) = proxies(prior, v, delta);
            let lam = lambda_star_sparse(t1, t2, s)?;
            // P = V − soft(V, λστ)
            let term = |tt: f64| {
                let (pa, es) = sparse_terms(tt, lam);
                // E[X soft] = (1/t²)·P(|X|>λ) by Stein; E clip² = E X² − 2E[X soft] + E soft²
                (pa, (1.0 - 2.0 * pa) / (tt * tt) + es)
            };
            let (pa1, c1) = term(t1);
            let (pa2, c2) = if s < 1.0 { term(t2) } else { (0.0, 0.0) };
            Ok(ProxStatistics {
                corr: k2 * a * (1.0 - pa1),
                gauss_corr: b * (1.0 - s * pa1 - (1.0 - s) * pa2),
                sq_norm: t * t * (s * c1 + (1.0 - s) * c2),
            })
        }
        (Potential::LinfScaled, Prior::Binary { kappa }) => {
            // V/(στ) = ±t₃ + β√δ H
            let t3 = a * kappa / t;
            let bb = b / t;
            let law = SymmetricMixture {
                comps: vec![(1.0, t3, bb)],
            };
            let lam = lambda_star_mixture(&law, 1.0)?;
            let m = clip_moments(t3, bb, lam);
            Ok(ProxStatistics {
                corr: kappa * t * m.mean,
                gauss_corr: b * m.slope,
                sq_norm: t * t * m.second,
            })
        }
        (Potential::L1, Prior::Binary { .. }) => prox_statistics_mixture(prior, potential, v, delta),
    }
}

/// E g, E g², E g' for a scalar map g applied to X ~ N(m, sd²).
#[derive(Debug, Clone, Copy)]
struct ScalarMoments {
    mean: f64,
    second: f64,
    slope: f64,
}

fn soft_moments(m: f64, sd: f64, th: f64) -> (ScalarMoments, f64) {
    let (pp, pm) = (pos1(m, sd, th), pos1(-m, sd, th));
    let second = pos2(m, sd, th) + pos2(-m, sd, th);
    let slope = above(m, sd, th) + above(-m, sd, th);
    // E[X soft(X)] = E soft² + θ·E|soft|
    let x_soft = second + th * (pp + pm);
    (
        ScalarMoments {
            mean: pp - pm,
            second,
            slope,
        },
        x_soft,
    )
}

fn clip_moments(m: f64, sd: f64, c: f64) -> ScalarMoments {
    let (s, x_soft) = soft_moments(m, sd, c);
    ScalarMoments {
        mean: m - s.mean,
        second: m * m + sd * sd - 2.0 * x_soft + s.second,
        slope: 1.0 - s.slope,
    }
}

#[derive(Debug, Clone, Copy)]
enum ScalarMap {
    Linear(f64),
    Soft(f64),
    Clip(f64),
}

impl ScalarMap {
    fn moments(&self, m: f64, sd: f64) -> ScalarMoments {
        match *self {
            ScalarMap::Linear(c) => ScalarMoments {
                mean: c * m,
                second: c * c * (m * m + sd * sd),
                slope: c,
            },
            ScalarMap::Soft(th) => soft_moments(m, sd, th).0,
            ScalarMap::Clip(c) => clip_moments(m, sd, c),
        }
    }
}

/// Statistics from the law of V = A W + B H as a Gaussian mixture; valid for
/// every prior in this crate and independent of the per-pair closed forms.
pub fn prox_statistics_mixture(
    prior: &Prior,
    potential: Potential,
    v: &FixedPointVars,
    delta: f64,
) -> Result<ProxStatistics> {
    check_vars(v, delta)?;
    prior.validate()?;
    let ProxInput { a, b, t } = ProxInput::new(v, delta);
    let comps = prior.components();
    let vlaw = SymmetricMixture {
        comps: comps
            .iter()
            .map(|&(w, m, var)| (w, a * m, (a * a * var + b * b).sqrt()))
            .collect(),
    };
    let map = match potential {
        Potential::L2Squared => ScalarMap::Linear(1.0 / (1.0 + t)),
        Potential::L1 => ScalarMap::Soft(t),
        Potential::LinfScaled => ScalarMap::Clip(lambda_star_mixture(&vlaw, t)?),
    };
    let mut out = ProxStatistics {
        corr: 0.0,
        gauss_corr: 0.0,
        sq_norm: 0.0,
    };
    for (&(w, mw, var), &(_, mv, sd)) in comps.iter().zip(&vlaw.comps) {
        let mo = map.moments(mv, sd);
        // E[W g(V)] = m·E g + var·A·E g' (Stein on the Gaussian part of W)
        out.corr += w * (mw * mo.mean + var * a * mo.slope);
        out.gauss_corr += w * b * mo.slope;
        out.sq_norm += w * mo.second;
    }
    Ok(out)
}

/// Monte Carlo estimate over (W, H) with `samples` scalar draws; returns the
/// estimates and their standard errors.
pub fn prox_statistics_mc(
    prior: &Prior,
    potential: Potential,
    v: &FixedPointVars,
    delta: f64,
    samples: usize,
    stream: RngStream,
) -> Result<(ProxStatistics, ProxStatistics)> {
    check_vars(v, delta)?;
    prior.validate()?;
    if samples < 2 {
        return arg_err("prox_statistics_mc: need at least 2 samples");
    }
    let ProxInput { a, b, t } = ProxInput::new(v, delta);
    let mut rng = stream.rng();
    let draws: Vec<(f64, f64)> = (0..samples)
        .map(|_| (prior.sample(&mut rng), rng.sample::<f64, _>(StandardNormal)))
        .collect();
    let vs: Vec<f64> = draws.iter().map(|&(w, h)| a * w + b * h).collect();
    let g: Box<dyn Fn(f64) -> f64> = match potential {
        Potential::L2Squared => Box::new(move |x| x / (1.0 + t)),
        Potential::L1 => Box::new(move |x| soft_threshold(x, t)),
        Potential::LinfScaled => {
            // λ from the population law of V
            let vlaw = SymmetricMixture {
                comps: prior
                    .components()
                    .iter()
                    .map(|&(w, m, var)| (w, a * m, (a * a * var + b * b).sqrt()))
                    .collect(),
            };
            let lam = lambda_star_mixture(&vlaw, t)?;
            Box::new(move |x: f64| x.clamp(-lam, lam))
        }
    };
    let mut acc = [[0.0f64; 2]; 3];
    for (&(w, h), &x) in draws.iter().zip(&vs) {
        let p = g(x);
        for (k, val) in [w * p, h * p, p * p].into_iter().enumerate() {
            acc[k][0] += val;
            acc[k][1] += val * val;
        }
    }
    let n = samples as f64;
    let est = |k: usize| {
        let m = acc[k][0] / n;
        let var = ((acc[k][1] - acc[k][0] * acc[k][0] / n) / (n - 1.0)).max(0.0);
        (m, (var / n).sqrt())
    };
    let (c, cs) = est(0);
    let (g2, gs) = est(1);
    let (s2, ss) = est(2);
    Ok((
        ProxStatistics {
            corr: c,
            gauss_corr: g2,
            sq_norm: s2,
        },
        ProxStatistics {
            corr: cs,
            gauss_corr: gs,
            sq_norm: ss,
        },
    ))
}

/// Returned for pairs that need machinery this crate does not ship.
pub fn unsupported(what: &str) -> Error {
    Error::Capability(what.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prox_examples() {
        assert_eq!(prox(Potential::L2Squared, &[2.0, -4.0], 1.0).unwrap(), vec![1.0, -2.0]);
        assert_eq!(prox(Potential::L1, &[3.0, -0.5], 1.0).unwrap(), vec![2.0, 0.0]);
        assert_eq!(prox_linf_radius(&[3.0, 1.0], 1.0).unwrap(), vec![2.0, 1.0]);
        assert_eq!(prox(Potential::LinfScaled, &[3.0, 1.0], 0.5).unwrap(), vec![2.0, 1.0]);
        assert!(prox(Potential::L1, &[1.0], 0.0).is_err());
    }

    #[test]
    fn projection_examples() {
        assert_eq!(project_l1_ball(&[3.0, 1.0], 1.0).unwrap(), vec![1.0, 0.0]);
        assert_eq!(project_l1_ball(&[0.2, -0.3], 1.0).unwrap(), vec![0.2, -0.3]);
        assert!(project_l1_ball(&[1.0], 0.0).is_err());
    }

    #[test]
    fn moreau_examples() {
        let m = moreau(Potential::L2Squared, &[2.0], 1.0).unwrap();
        assert!((m.value - 1.0).abs() < 1e-15);
        assert_eq!(m.gradient, vec![1.0]);
        assert!((m.deriv_t + 0.5).abs() < 1e-15);
        let m = moreau(Potential::L1, &[0.5], 1.0).unwrap();
        assert!((m.value - 0.125).abs() < 1e-15);
        assert_eq!(m.gradient, vec![0.5]);
        assert!((m.deriv_t + 0.125).abs() < 1e-15);
    }

    #[test]
    fn point_mass_lambda() {
        let l = lambda_star_general(&Prior::Binary { kappa: 2.0 }, 0.5).unwrap();
        assert!((l - 1.5).abs() < 1e-12);
        assert_eq!(lambda_star_general(&Prior::Binary { kappa: 2.0 }, 2.5).unwrap(), 0.0);
    }
}

//! The summary functional c_κ(s, r) = E[(1 − κ s Z₁ Y − r Z₂)₊²] and its
//! partial derivatives.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{arg_err, Result};
use crate::numerics::{chi_prime, chi_unchecked, phi, q, QuadratureGrid, RngStream};

/// Serializable name of a built-in link.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkTag {
    /// ρ(t) = 1 / (1 + e^{−t})
    #[default]
    Std,
    /// ρ(t) = e^t / (e^t + e^{−t}) = 1 / (1 + e^{−2t})
    Fig1,
    /// ρ(t) = 1{t > 0}, the κ → ∞ limit.
    Sign,
}

impl LinkTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            LinkTag::Std => "std",
            LinkTag::Fig1 => "fig1",
            LinkTag::Sign => "sign",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "std" | "standard-logistic" => Some(LinkTag::Std),
            "fig1" | "scaled-logistic" => Some(LinkTag::Fig1),
            "sign" => Some(LinkTag::Sign),
            _ => None,
        }
    }
}

/// Label probability ρ: P(y = +1 | xᵀw⋆ = t) = ρ(t).
#[derive(Clone)]
pub enum LinkFunction {
    StandardLogistic,
    ScaledLogistic,
    HardSign,
    Custom {
        name: String,
        rho: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    },
}

impl LinkFunction {
    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            LinkFunction::StandardLogistic => 1.0 / (1.0 + (-t).exp()),
            LinkFunction::ScaledLogistic => 1.0 / (1.0 + (-2.0 * t).exp()),
            LinkFunction::HardSign => {
                if t > 0.0 {
                    1.0
                } else if t < 0.0 {
                    0.0
                } else {
                    0.5
                }
            }
            LinkFunction::Custom { rho, .. } => rho(t).clamp(0.0, 1.0),
        }
    }

    /// Scale of the transition of ρ: ρ(κz) changes over |z| ≈ 1/(κ·steepness).
    /// Infinite for the hard sign, unknown for custom links.
    pub fn steepness(&self) -> Option<f64> {
        match self {
            LinkFunction::StandardLogistic => Some(1.0),
            LinkFunction::ScaledLogistic => Some(2.0),
            LinkFunction::HardSign => Some(f64::INFINITY),
            LinkFunction::Custom { .. } => None,
        }
    }

    pub fn name(&self) -> &str {
        match self {
            LinkFunction::StandardLogistic => "standard-logistic",
            LinkFunction::ScaledLogistic => "scaled-logistic",
            LinkFunction::HardSign => "sign",
            LinkFunction::Custom { name, .. } => name,
        }
    }

    pub fn custom(name: impl Into<String>, rho: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        LinkFunction::Custom {
            name: name.into(),
            rho: Arc::new(rho),
        }
    }
}

impl From<LinkTag> for LinkFunction {
    fn from(tag: LinkTag) -> Self {
        match tag {
            LinkTag::Std => LinkFunction::StandardLogistic,
            LinkTag::Fig1 => LinkFunction::ScaledLogistic,
            LinkTag::Sign => LinkFunction::HardSign,
        }
    }
}

impl Default for LinkFunction {
    fn default() -> Self {
        LinkFunction::StandardLogistic
    }
}

impl fmt::Debug for LinkFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LinkFunction({})", self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryEval {
    pub value: f64,
    /// ∂c/∂s; `None` at r = 0.
    pub d_s: Option<f64>,
    /// ∂c/∂r; `None` at r = 0.
    pub d_r: Option<f64>,
}

const GL8: [(f64, f64); 4] = [
    (0.183_434_642_495_649_8, 0.362_683_783_378_362_0),
    (0.525_532_409_916_329_0, 0.313_706_645_877_887_3),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_5),
    (0.960_289_856_497_536_3, 0.101_228_536_290_376_3),
];

/// Gauss–Hermite stays at full precision while every feature of the outer
/// integrand is at least this wide.
const MIN_SMOOTH_WIDTH: f64 = 0.5;

/// Composite 8-point Gauss–Legendre rule for E[f(Z)] on [−12, 12]. Each
/// feature (center, width) gets a breakpoint and panels graded from `width`
/// up to the base panel size.
fn composite_rule(features: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut cuts: Vec<f64> = vec![-12.0, -8.0, -4.0, 4.0, 8.0, 12.0];
    for &(k, width) in features.iter().filter(|f| f.0.abs() < 12.0) {
        cuts.push(k);
        let mut d = width.max(1e-9);
        while d < 0.5 {
            cuts.push(k - d);
            cuts.push(k + d);
            d *= 2.0;
        }
    }
    cuts.retain(|c| c.abs() <= 12.0);
    cuts.sort_by(|a, b| a.total_cmp(b));
    cuts.dedup();
    let mut rule = Vec::new();
    for pair in cuts.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let far = a.abs().min(b.abs());
        let base = if far >= 8.0 { 2.0 } else if far >= 4.0 { 1.0 } else { 0.5 };
        let pieces = ((b - a) / base).ceil().max(1.0) as usize;
        let h = (b - a) / pieces as f64;
        for k in 0..pieces {
            let mid = a + (k as f64 + 0.5) * h;
            for &(x, w) in &GL8 {
                for z in [mid - 0.5 * h * x, mid + 0.5 * h * x] {
                    rule.push((z, 0.5 * h * w * phi(z)));
                }
            }
        }
    }
    rule
}

/// Nodes and weights for the outer expectation over Z₁ of an integrand
/// built from ρ(κZ₁) and, when `kink = Some((κs, r))`, the ramp of
/// (1 ∓ κsZ₁)₊ smoothed over r. `grid` is used when every feature is wide.
pub(crate) fn outer_rule(
    kappa: f64,
    kink: Option<(f64, f64)>,
    link: &LinkFunction,
    grid: &QuadratureGrid,
) -> Vec<(f64, f64)> {
    let mut features = Vec::new();
    if let Some((slope, r)) = kink {
        if slope != 0.0 && r < MIN_SMOOTH_WIDTH * slope.abs() {
            let w = r / slope.abs();
            features.push((1.0 / slope, w));
            features.push((-1.0 / slope, w));
        }
    }
    if kappa > 0.0 {
        if let Some(st) = link.steepness() {
            let w = 1.0 / (kappa * st);
            if w < MIN_SMOOTH_WIDTH {
                features.push((0.0, w));
            }
        }
    }
    if features.is_empty() {
        grid.nodes.iter().copied().zip(grid.weights.iter().copied()).collect()
    } else {
        composite_rule(&features)
    }
}

/// c_κ(s, r) with the Z₂ expectation in closed form:
/// E[(a − rZ₂)₊²] = r² χ(u), u = −a/r, a = 1 − κ s Z₁ Y.
/// The outer Z₁ expectation uses `grid` unless the integrand has a feature
/// narrower than the grid resolves (r small against κ|s|, or a steep link),
/// where a graded composite rule takes over.
pub fn eval_c(
    kappa: f64,
    s: f64,
    r: f64,
    link: &LinkFunction,
    grid: &QuadratureGrid,
) -> Result<SummaryEval> {
    if !(r >= 0.0) || !r.is_finite() {
        return arg_err(format!("eval_c: r must be finite and >= 0, got {r}"));
    }
    if !(kappa >= 0.0) || !kappa.is_finite() || !s.is_finite() {
        return arg_err(format!("eval_c: bad kappa {kappa} or s {s}"));
    }
    let rule = outer_rule(kappa, Some((kappa * s, r)), link, grid);
    if r == 0.0 {
        let value = rule
            .iter()
            .map(|&(z, w)| {
                let p = link.eval(kappa * z);
                let plus = (1.0 - kappa * s * z).max(0.0);
                let minus = (1.0 + kappa * s * z).max(0.0);
                w * (p * plus * plus + (1.0 - p) * minus * minus)
            })
            .sum();
        return Ok(SummaryEval {
            value,
            d_s: None,
            d_r: None,
        });
    }
    let (mut value, mut ds, mut dr) = (0.0, 0.0, 0.0);
    for &(z, w) in &rule {
        let p = link.eval(kappa * z);
        for (y, wy) in [(1.0, p), (-1.0, 1.0 - p)] {
            if wy == 0.0 {
                continue;
            }
            let u = (kappa * s * z * y - 1.0) / r;
            let ww = w * wy;
            value += ww * r * r * chi_unchecked(u);
            ds += ww * kappa * r * z * y * chi_prime(u);
            dr += ww * 2.0 * r * q(u);
        }
    }
    Ok(SummaryEval {
        value,
        d_s: Some(ds),
        d_r: Some(dr),
    })
}

/// Plain two-dimensional Monte Carlo estimate of c_κ(s, r) with its
/// standard error.
pub fn mc_oracle_c(
    kappa: f64,
    s: f64,
    r: f64,
    link: &LinkFunction,
    samples: usize,
    stream: RngStream,
) -> Result<(f64, f64)> {
    if samples < 10_000 {
        return arg_err(format!("mc_oracle_c: need at least 1e4 samples, got {samples}"));
    }
    if !(r >= 0.0) || !(kappa >= 0.0) {
        return arg_err("mc_oracle_c: kappa and r must be >= 0");
    }
    let mut rng = stream.rng();
    let (mut sum, mut sumsq) = (0.0, 0.0);
    for _ in 0..samples {
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        let y = if rng.random::<f64>() < link.eval(kappa * z1) {
            1.0
        } else {
            -1.0
        };
        let v = (1.0 - kappa * s * z1 * y - r * z2).max(0.0);
        let v = v * v;
        sum += v;
        sumsq += v * v;
    }
    let n = samples as f64;
    let mean = sum / n;
    let var = ((sumsq - sum * sum / n) / (n - 1.0)).max(0.0);
    Ok((mean, (var / n).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_slope_gives_chi() {
        let g = QuadratureGrid::standard();
        let link = LinkFunction::StandardLogistic;
        let e = eval_c(1.0, 0.0, 1.0, &link, g).unwrap();
        assert!((e.value - 1.924_660_216_656_229).abs() < 1e-12);
        assert!((e.d_r.unwrap() - 1.682_689_492_137_086).abs() < 1e-12);
        let e0 = eval_c(3.0, 0.0, 0.0, &link, g).unwrap();
        assert!((e0.value - 1.0).abs() < 1e-14);
        assert!(e0.d_s.is_none() && e0.d_r.is_none());
        assert!(eval_c(1.0, 0.0, -1.0, &link, g).is_err());
    }

    #[test]
    fn link_tags_round_trip() {
        for t in [LinkTag::Std, LinkTag::Fig1, LinkTag::Sign] {
            assert_eq!(LinkTag::parse(t.as_str()), Some(t));
        }
        let f = LinkFunction::from(LinkTag::Fig1);
        assert!((f.eval(1.0) - 1.0 / (1.0 + (-2.0f64).exp())).abs() < 1e-15);
    }
}

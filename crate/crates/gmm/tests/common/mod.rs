#![allow(dead_code)]

/// Φ(x) through erfc, independent of the crate's tail routine.
pub fn big_phi(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

pub fn density(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// E(a − rZ)₊² = (a² + r²)Φ(a/r) + a r φ(a/r).
pub fn inner(a: f64, r: f64) -> f64 {
    if r == 0.0 {
        return a.max(0.0).powi(2);
    }
    let u = a / r;
    (a * a + r * r) * big_phi(u) + a * r * density(u)
}

/// c_κ(s, r) by the trapezoid rule on [−12, 12] in Z₁.
pub fn c_oracle(kappa: f64, s: f64, r: f64, rho: impl Fn(f64) -> f64) -> f64 {
    c_oracle_with(kappa, s, r, rho, 48000, 12.0)
}

/// Trapezoid rule with `m` intervals on [−half, half].
pub fn c_oracle_with(kappa: f64, s: f64, r: f64, rho: impl Fn(f64) -> f64, m: usize, half: f64) -> f64 {
    let h = 2.0 * half / m as f64;
    let mut acc = 0.0;
    for i in 0..=m {
        let z = -half + i as f64 * h;
        let w = if i == 0 || i == m { 0.5 } else { 1.0 };
        let p = rho(kappa * z);
        let a_plus = 1.0 - kappa * s * z;
        let a_minus = 1.0 + kappa * s * z;
        acc += w * density(z) * (p * inner(a_plus, r) + (1.0 - p) * inner(a_minus, r));
    }
    acc * h
}

pub fn logistic(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

pub fn logistic2(t: f64) -> f64 {
    1.0 / (1.0 + (-2.0 * t).exp())
}

pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

/// min over a 400×400 log grid of c_κ(s, r)/r², s ∈ [1e-3, 1e4], r ∈ [1e-2, 1e4].
pub fn delta_star_grid(kappa: f64, rho: impl Fn(f64) -> f64 + Sync) -> f64 {
    use rayon::prelude::*;
    let n = 400;
    let logspace = |lo: f64, hi: f64, i: usize| 10f64.powf(lo + (hi - lo) * i as f64 / (n - 1) as f64);
    (0..n)
        .into_par_iter()
        .map(|i| {
            let s = logspace(-3.0, 4.0, i);
            (0..n)
                .map(|j| {
                    let r = logspace(-2.0, 4.0, j);
                    c_oracle_with(kappa, s, r, &rho, 600, 8.0) / (r * r)
                })
                .fold(f64::INFINITY, f64::min)
        })
        .reduce(|| f64::INFINITY, f64::min)
}

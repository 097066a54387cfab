//! Standard normal special functions, Gauss–Hermite quadrature and seeded
//! random streams.

use std::sync::OnceLock;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{arg_err, Error, Result};

pub const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Quadrature order used throughout the theory path.
pub const DEFAULT_ORDER: usize = 200;

/// Standard normal density, with the square of `t` carried in double-double
/// so the relative error stays at a few ulps far into the tail.
#[inline]
pub fn phi(t: f64) -> f64 {
    let hi = t * t;
    if hi > 1500.0 {
        return 0.0;
    }
    let lo = t.mul_add(t, -hi);
    INV_SQRT_2PI * (-0.5 * hi).exp() * (1.0 - 0.5 * lo)
}

/// Backward recurrence for the Mills-ratio continued fraction,
/// r_{k-1} = 1 / (t + k r_k). Returns (r0, r1, r2) with r0 = Q(t)/φ(t).
fn mills_chain(t: f64) -> (f64, f64, f64) {
    let terms = 40 + (1600.0 / (t * t)) as usize;
    let mut r = 0.0;
    let (mut r1, mut r2) = (0.0, 0.0);
    for k in (1..=terms).rev() {
        r = 1.0 / (t + k as f64 * r);
        if k == 3 {
            r2 = r;
        } else if k == 2 {
            r1 = r;
        }
    }
    (r, r1, r2)
}

/// Upper tail Q(t) = P(Z > t).
#[inline]
pub fn q(t: f64) -> f64 {
    if t > 6.0 {
        phi(t) * mills_chain(t).0
    } else if t < -6.0 {
        1.0 - phi(t) * mills_chain(-t).0
    } else {
        0.5 * libm::erfc(t * std::f64::consts::FRAC_1_SQRT_2)
    }
}

/// χ(t) = E[(Z − t)₊²] = Q(t)(1 + t²) − tφ(t), without argument checks.
#[inline]
pub fn chi_unchecked(t: f64) -> f64 {
    if t > 3.0 {
        let (r0, r1, r2) = mills_chain(t);
        2.0 * phi(t) * r0 * r1 * r2
    } else {
        q(t) * (1.0 + t * t) - t * phi(t)
    }
}

/// χ'(t) = 2(tQ(t) − φ(t)).
#[inline]
pub fn chi_prime(t: f64) -> f64 {
    if t > 3.0 {
        let (r0, r1, _) = mills_chain(t);
        -2.0 * phi(t) * r0 * r1
    } else {
        2.0 * (t * q(t) - phi(t))
    }
}

pub fn std_normal(t: f64) -> Result<(f64, f64)> {
    if !t.is_finite() {
        return Err(Error::Domain(format!("std_normal: non-finite argument {t}")));
    }
    Ok((phi(t), q(t)))
}

pub fn chi(t: f64) -> Result<f64> {
    if !t.is_finite() {
        return Err(Error::Domain(format!("chi: non-finite argument {t}")));
    }
    Ok(chi_unchecked(t))
}

/// Nodes and weights for expectations against the standard normal density.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureGrid {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub order: usize,
}

impl QuadratureGrid {
    /// E[f(Z)] for Z ~ N(0, 1).
    #[inline]
    pub fn expect(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&z, &w)| w * f(z))
            .sum()
    }

    /// Shared order-200 grid.
    pub fn standard() -> &'static QuadratureGrid {
        static GRID: OnceLock<QuadratureGrid> = OnceLock::new();
        GRID.get_or_init(|| gauss_hermite(DEFAULT_ORDER).expect("order 200 is valid"))
    }
}

/// Probabilists' Gauss–Hermite rule. Nodes start from the eigenvalues of the
/// Jacobi matrix and are polished by Newton's method on the orthonormal
/// Hermite recurrence, which also yields the weights.
pub fn gauss_hermite(order: usize) -> Result<QuadratureGrid> {
    if order < 2 {
        return arg_err(format!("gauss_hermite: order must be >= 2, got {order}"));
    }
    let n = order;
    // physicists' Jacobi matrix: off-diagonal sqrt(k/2)
    let jacobi = DMatrix::from_fn(n, n, |i, j| {
        if i + 1 == j || j + 1 == i {
            ((i.max(j)) as f64 / 2.0).sqrt()
        } else {
            0.0
        }
    });
    let mut roots: Vec<f64> = SymmetricEigen::new(jacobi).eigenvalues.iter().copied().collect();
    roots.sort_by(|a, b| a.total_cmp(b));
    let pim4 = std::f64::consts::PI.powf(-0.25);
    let nf = n as f64;
    // orthonormal recurrence; returns (p_n(z), p_n'(z))
    let eval = |z: f64| {
        let mut p1 = pim4;
        let mut p2 = 0.0;
        for j in 1..=n {
            let p3 = p2;
            p2 = p1;
            let jf = j as f64;
            p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
        }
        (p1, (2.0 * nf).sqrt() * p2)
    };
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for &r in &roots {
        let mut z = r;
        for _ in 0..5 {
            let (p, dp) = eval(z);
            let dz = p / dp;
            z -= dz;
            if dz.abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        let (_, dp) = eval(z);
        nodes.push(z * std::f64::consts::SQRT_2);
        weights.push(2.0 / (dp * dp) / std::f64::consts::PI.sqrt());
    }
    // exact symmetry
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let x = 0.5 * (nodes[j] - nodes[i]);
        let w = 0.5 * (weights[i] + weights[j]);
        nodes[i] = -x;
        nodes[j] = x;
        weights[i] = w;
        weights[j] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    if !nodes.windows(2).all(|p| p[0] < p[1]) {
        return Err(Error::NonConvergence {
            context: format!("gauss_hermite order {n}"),
            residuals: vec![],
        });
    }
    let total: f64 = weights.iter().sum();
    for v in &mut weights {
        *v /= total;
    }
    Ok(QuadratureGrid {
        nodes,
        weights,
        order,
    })
}

/// Identifies an independent random sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub base_seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(base_seed: u64, stream_id: u64) -> Self {
        Self {
            base_seed,
            stream_id,
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.base_seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

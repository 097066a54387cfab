use gmm::numerics::*;
use proptest::prelude::*;
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;

// (t, φ(t), Q(t), χ(t), χ'(t)) at 50 significant digits, rounded to 20.
const REFERENCE: [(f64, f64, f64, f64, f64); 14] = [
    (-8.0, 5.052271083536892288e-15, 0.9999999999999993779, 64.999999999999999982, -16.000000000000000151),
    (-3.0, 0.0044318484119380071756, 0.99865010196836990547, 9.9997965649195130763, -6.0007643086340954472),
    (-1.0, 0.2419707245191433498, 0.84134474606854294859, 1.924660216656229247, -2.1666309411753725968),
    (0.0, 0.39894228040143267794, 0.5, 0.5, -0.79788456080286535588),
    (0.5, 0.35206532676429947777, 0.30853753872598689636, 0.20963926002533388157, -0.39559311480261205919),
    (1.0, 0.2419707245191433498, 0.15865525393145705141, 0.075339783343770753032, -0.16663094117537259677),
    (2.5, 0.017528300493568537362, 0.006209665325776135167, 0.0011993223779556365552, -0.0040082743582563988894),
    (3.0, 0.0044318484119380071756, 0.0013498980316300945267, 0.00020343508048692373971, -0.00076430863409544719129),
    (5.0, 1.4867195147342977079e-6, 2.8665157187919391167e-7, 1.9343295187553163976e-8, -1.0692331067665629908e-7),
    (6.0, 6.075882849823285487e-9, 9.865876450376981407e-10, 4.8445767455118283954e-11, -3.1271395919419328558e-10),
    (7.5, 2.4343205330290098259e-13, 3.1908916729108962278e-14, 1.0450829697307209908e-15, -8.2303556691675310098e-15),
    (10.0, 7.6945986267064193463e-23, 7.619853024160526066e-24, 1.452927695711980294e-25, -1.4949120509178656073e-24),
    (20.0, 5.5209483621597631896e-88, 2.7536241186062336951e-89, 1.3599129147073808778e-91, -2.7400249894591598863e-90),
    (37.0, 2.1200065515246056269e-298, 5.7255712225245768227e-300, 8.3342176294277234055e-303, -3.0903983810244049185e-301),
];

fn rel(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        a.abs()
    } else {
        ((a - b) / b).abs()
    }
}

#[test]
fn density_and_tail_match_high_precision_values() {
    for &(t, d, tail, _, _) in &REFERENCE {
        let (pd, q) = std_normal(t).unwrap();
        let tol = if t.abs() <= 10.0 { 1e-14 } else { 1e-12 };
        assert!(rel(pd, d) <= tol, "pdf at {t}: {pd} vs {d}");
        assert!(rel(q, tail) <= tol, "tail at {t}: {q} vs {tail}");
    }
}

#[test]
fn chi_and_derivative_match_high_precision_values() {
    for &(t, _, _, c, dc) in &REFERENCE {
        let v = chi(t).unwrap();
        assert!(rel(v, c) <= 1e-12, "chi at {t}: {v} vs {c}");
        assert!(rel(chi_prime(t), dc) <= 1e-12, "chi' at {t}: {} vs {dc}", chi_prime(t));
    }
}

#[test]
fn spec_examples() {
    let (d, q) = std_normal(0.0).unwrap();
    assert!((d - 0.398_942_280_4).abs() < 1e-10 && q == 0.5);
    let (d, q) = std_normal(-1.0).unwrap();
    assert!((d - 0.241_970_724_5).abs() < 1e-10);
    assert!((q - 0.841_344_746_1).abs() < 1e-10);
    assert_eq!(std_normal(60.0).unwrap(), (0.0, 0.0));
    assert_eq!(chi(0.0).unwrap(), 0.5);
    assert!((chi(-1.0).unwrap() - 1.924_660_2).abs() < 1e-7);
    // quoted to four digits as 2.036e-4; the exact value is 2.03435e-4
    assert!(rel(chi(3.0).unwrap(), 2.036e-4) < 1e-3);
}

#[test]
fn non_finite_arguments_are_domain_errors() {
    for t in [f64::NAN, f64::INFINITY, f64::NEG_INFINITY] {
        assert!(matches!(std_normal(t), Err(gmm::Error::Domain(_))));
        assert!(matches!(chi(t), Err(gmm::Error::Domain(_))));
    }
}

#[test]
fn chi_monte_carlo_cross_check() {
    let mut rng = RngStream::new(11, 0).rng();
    let n = 2_000_000;
    for t in [-1.0, 3.0] {
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let z: f64 = rng.sample(StandardNormal);
            let v = (z - t).max(0.0).powi(2);
            s += v;
            s2 += v * v;
        }
        let m = s / n as f64;
        let se = ((s2 / n as f64 - m * m) / n as f64).sqrt();
        assert!((m - chi(t).unwrap()).abs() <= 3.0 * se, "t = {t}");
    }
}

fn normal_moment(k: u32) -> f64 {
    if k % 2 == 1 {
        return 0.0;
    }
    (1..k).step_by(2).map(|j| j as f64).product()
}

#[test]
fn quadrature_is_exact_for_low_degree_monomials() {
    for order in 2..=24 {
        let g = gauss_hermite(order).unwrap();
        assert_eq!(g.nodes.len(), order);
        assert_eq!(g.weights.len(), order);
        for k in 0..(2 * order as u32) {
            let got = g.expect(|z| z.powi(k as i32));
            let want = normal_moment(k);
            let err = if want == 0.0 { got.abs() / normal_moment(k - 1).max(1.0) } else { rel(got, want) };
            assert!(err <= 1e-10, "order {order}, degree {k}: {got} vs {want}");
        }
    }
    let g = QuadratureGrid::standard();
    for k in (0..=40).step_by(2) {
        assert!(rel(g.expect(|z| z.powi(k)), normal_moment(k as u32)) <= 1e-10, "degree {k}");
    }
    assert_eq!(gauss_hermite(2).unwrap().expect(|z| z * z), 1.0);
    assert!((gauss_hermite(3).unwrap().expect(|z| z.powi(4)) - 3.0).abs() < 1e-12);
}

#[test]
fn order_two_hundred_grid_against_monte_carlo() {
    let g = QuadratureGrid::standard();
    let f = |z: f64| chi_unchecked(0.7 * z - 0.3) * (1.0 + (z / 3.0).tanh());
    let quad = g.expect(f);
    let mut rng = RngStream::new(5, 9).rng();
    let n = 1_000_000;
    let (mut s, mut s2) = (0.0, 0.0);
    for _ in 0..n {
        let v = f(rng.sample(StandardNormal));
        s += v;
        s2 += v * v;
    }
    let m = s / n as f64;
    let se = ((s2 / n as f64 - m * m) / n as f64).sqrt();
    assert!((quad - m).abs() <= 3.0 * se);
}

#[test]
fn rng_streams_are_reproducible_and_distinct() {
    let draw = |seed, id| {
        let mut r = RngStream::new(seed, id).rng();
        (0..64).map(|_| r.next_u64()).collect::<Vec<_>>()
    };
    assert_eq!(draw(3, 4), draw(3, 4));
    assert_ne!(draw(3, 4), draw(3, 5));
    assert_ne!(draw(3, 4), draw(4, 4));
    let s = RngStream::new(1, 2);
    let back: RngStream = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
    assert_eq!(back, s);
}

proptest! {
    #[test]
    fn tails_are_complementary(t in -10.0f64..10.0) {
        prop_assert!((q(t) + q(-t) - 1.0).abs() <= 1e-14);
    }

    #[test]
    fn chi_reflection_identity(t in -8.0f64..8.0) {
        // E(Z − t)² split at t
        let lhs = chi(t).unwrap() + chi(-t).unwrap();
        prop_assert!(rel(lhs, 1.0 + t * t) <= 1e-13);
    }

    #[test]
    fn chi_is_positive_and_decreasing(t in -10.0f64..30.0, dt in 1e-3f64..1.0) {
        let a = chi(t).unwrap();
        let b = chi(t + dt).unwrap();
        prop_assert!(a > 0.0 && b <= a);
    }

    #[test]
    fn chi_derivative_matches_finite_differences(t in -6.0f64..6.0) {
        let h = 1e-5;
        let fd = (chi(t + h).unwrap() - chi(t - h).unwrap()) / (2.0 * h);
        prop_assert!((fd - chi_prime(t)).abs() <= 1e-7);
    }
}

use gmm::empirical::*;
use gmm::numerics::RngStream;
use gmm::potentials::{Potential, Prior};
use gmm::summary::LinkFunction;
use gmm::Error;
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

const POTENTIALS: [Potential; 3] = [Potential::L2Squared, Potential::L1, Potential::LinfScaled];

fn matrix(rows: usize, cols: usize, data: &[f64]) -> DenseMatrix {
    DenseMatrix::new(rows, cols, data.to_vec()).unwrap()
}

fn dataset(rows: &[&[f64]], labels: &[f64], truth: &[f64]) -> Dataset {
    let data: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
    Dataset::from_parts(matrix(rows.len(), truth.len(), &data), labels.to_vec(), truth.to_vec()).unwrap()
}

fn random_instance(p: usize, delta: f64, kappa: f64, prior: Prior, id: u64) -> Dataset {
    let n = sample_count(p, delta);
    generate_dataset(p, n, &prior.with_kappa(kappa), &LinkFunction::StandardLogistic, RngStream::new(77, id)).unwrap()
}

fn separable_instance(p: usize, delta: f64, kappa: f64, prior: Prior, first_id: u64) -> Dataset {
    (first_id..first_id + 50)
        .map(|id| random_instance(p, delta, kappa, prior, id))
        .find(|d| separability_test(d, 20 * p).unwrap().0)
        .expect("a separable draw")
}

#[test]
fn spectral_norm_examples() {
    let eye = matrix(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
    assert!((spectral_norm(&eye) - 1.0).abs() <= 1e-12);
    let d = matrix(2, 2, &[3.0, 0.0, 0.0, 1.0]);
    assert!((spectral_norm(&d) - 3.0).abs() <= 1e-12);
    assert_eq!(spectral_norm(&DenseMatrix::zeros(4, 2)), 0.0);
    assert!(DenseMatrix::new(2, 2, vec![1.0; 3]).is_err());
}

#[test]
fn spectral_norm_matches_dense_svd() {
    for id in 0..5 {
        let mut rng = RngStream::new(4, id).rng();
        let data: Vec<f64> = (0..50 * 80).map(|_| rng.sample(StandardNormal)).collect();
        let m = matrix(50, 80, &data);
        let svd = nalgebra::DMatrix::from_row_slice(50, 80, &data).singular_values();
        let want = svd.iter().copied().fold(0.0, f64::max);
        let got = spectral_norm(&m);
        assert!(((got - want) / want).abs() <= 1e-3, "{got} vs {want}");
    }
}

#[test]
fn matrix_products() {
    let m = matrix(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    assert_eq!(m.matvec(&[1.0, 0.0, -1.0]), vec![-2.0, -2.0]);
    assert_eq!(m.t_matvec(&[1.0, 1.0]), vec![5.0, 7.0, 9.0]);
    assert_eq!(m.row(1), &[4.0, 5.0, 6.0]);
}

#[test]
fn dataset_generation_is_deterministic() {
    let prior = Prior::SparseGaussian { sparsity: 0.3, kappa: 1.5 };
    let make = |id| generate_dataset(40, 25, &prior, &LinkFunction::StandardLogistic, RngStream::new(9, id)).unwrap();
    let (a, b, c) = (make(1), make(1), make(2));
    assert_eq!(a.features, b.features);
    assert_eq!(a.labels, b.labels);
    assert_eq!(a.ground_truth, b.ground_truth);
    assert_ne!(a.features, c.features);
    assert_eq!(a.stream, Some(RngStream::new(9, 1)));
}

#[test]
fn dataset_invariants() {
    for prior in [
        Prior::Gaussian { kappa: 2.0 },
        Prior::SparseGaussian { sparsity: 0.1, kappa: 2.0 },
        Prior::Binary { kappa: 2.0 },
    ] {
        let d = random_instance(150, 1.5, 2.0, prior, 3);
        assert_eq!(d.n, 100);
        assert_eq!(d.features.rows, 100);
        assert!(((norm(&d.ground_truth) - 2.0 * 150f64.sqrt()) / (2.0 * 150f64.sqrt())).abs() <= 1e-14);
        assert!(d.labels.iter().all(|&y| y == 1.0 || y == -1.0));
        assert!(d.labels.iter().any(|&y| y == 1.0) && d.labels.iter().any(|&y| y == -1.0));
    }
    assert_eq!(sample_count(100, 1.5), 67);
    assert_eq!(sample_count(3, 100.0), 1);
    let prior = Prior::Gaussian { kappa: 1.0 };
    assert!(generate_dataset(0, 5, &prior, &LinkFunction::StandardLogistic, RngStream::new(0, 0)).is_err());
    assert!(generate_dataset(5, 0, &prior, &LinkFunction::StandardLogistic, RngStream::new(0, 0)).is_err());
}

#[test]
fn features_have_unit_expected_norm() {
    let d = generate_dataset(100, 10_000, &Prior::Gaussian { kappa: 1.0 }, &LinkFunction::StandardLogistic, RngStream::new(5, 5))
        .unwrap();
    let avg = (0..d.n).map(|i| dot(d.features.row(i), d.features.row(i))).sum::<f64>() / d.n as f64;
    assert!((avg - 1.0).abs() <= 0.01, "{avg}");
}

#[test]
fn hard_sign_labels_follow_the_ground_truth() {
    let d = generate_dataset(50, 200, &Prior::Gaussian { kappa: 3.0 }, &LinkFunction::HardSign, RngStream::new(6, 0)).unwrap();
    for i in 0..d.n {
        let m = dot(d.features.row(i), &d.ground_truth);
        assert_eq!(d.labels[i], if m > 0.0 { 1.0 } else { -1.0 });
    }
}

#[test]
fn separability_examples() {
    let d = dataset(&[&[3.0, -4.0]], &[-1.0], &[1.0, 0.0]);
    let (sep, w) = separability_test(&d, 40).unwrap();
    assert!(sep);
    let w = w.unwrap();
    assert!((w[0] + 0.6).abs() <= 1e-12 && (w[1] - 0.8).abs() <= 1e-12, "{w:?}");

    let d = dataset(&[&[1.0, 2.0], &[1.0, 2.0]], &[1.0, -1.0], &[1.0, 0.0]);
    assert_eq!(separability_test(&d, 1000).unwrap(), (false, None));
    assert!(separability_test(&d, 0).is_err());
}

#[test]
fn random_instances_above_the_threshold_are_separable() {
    let hits = (0..20)
        .filter(|&id| {
            let d = random_instance(100, 1.5, 1.0, Prior::Gaussian { kappa: 1.0 }, 1000 + id);
            separability_test(&d, 2000).unwrap().0
        })
        .count();
    assert!(hits >= 18, "{hits}/20");
}

#[test]
fn primal_dual_small_examples() {
    let d = dataset(&[&[2.0]], &[1.0], &[1.0]);
    let r = solve_primal_dual(&d, Potential::L2Squared, 100_000, 1e-9).unwrap();
    assert!(r.converged);
    assert!((r.estimate[0] - 0.5).abs() <= 1e-6, "{:?}", r.estimate);

    let d = dataset(&[&[1.0, 0.0], &[0.0, 1.0]], &[1.0, -1.0], &[1.0, -1.0]);
    let r = solve_primal_dual(&d, Potential::L1, 100_000, 1e-9).unwrap();
    assert!(r.converged);
    assert!((r.estimate[0] - 1.0).abs() <= 1e-6 && (r.estimate[1] + 1.0).abs() <= 1e-6, "{:?}", r.estimate);
    // ℓ∞ and ℓ2 agree on this instance
    for pot in [Potential::L2Squared, Potential::LinfScaled] {
        let r = solve_primal_dual(&d, pot, 100_000, 1e-9).unwrap();
        assert!((r.estimate[0] - 1.0).abs() <= 1e-6 && (r.estimate[1] + 1.0).abs() <= 1e-6);
    }
    assert!(solve_primal_dual(&d, Potential::L1, 10, 0.0).is_err());
}

#[test]
fn primal_dual_reports_infeasible_data() {
    let d = dataset(&[&[1.0, 2.0], &[1.0, 2.0]], &[1.0, -1.0], &[1.0, 0.0]);
    let r = solve_primal_dual(&d, Potential::L2Squared, 5000, 1e-6).unwrap();
    assert!(!r.converged);
    assert!(r.primal_residual > 1e-6);
}

fn program_value(pot: Potential, w: &[f64]) -> f64 {
    match pot {
        Potential::L2Squared => 0.5 * dot(w, w),
        Potential::L1 => w.iter().map(|x| x.abs()).sum(),
        Potential::LinfScaled => w.iter().fold(0.0, |m: f64, x| m.max(x.abs())),
    }
}

#[test]
fn primal_dual_solutions_are_feasible_and_optimal() {
    let tol = 1e-6;
    for (k, pot) in POTENTIALS.into_iter().enumerate() {
        let prior = match pot {
            Potential::L1 => Prior::SparseGaussian { sparsity: 0.1, kappa: 2.0 },
            Potential::LinfScaled => Prior::Binary { kappa: 2.0 },
            Potential::L2Squared => Prior::Gaussian { kappa: 2.0 },
        };
        let d = separable_instance(60, 1.5, 2.0, prior, 100 * k as u64);
        let r = solve_primal_dual(&d, pot, 200_000, tol).unwrap();
        assert!(r.converged, "{}", pot.as_str());
        assert!(r.primal_residual <= tol && r.duality_gap.unwrap() <= tol);
        let a = d.signed_design();
        let margins = a.matvec(&r.estimate);
        assert!(margins.iter().all(|&m| m >= 1.0 - tol));

        let (_, witness) = separability_test(&d, 1200).unwrap();
        let witness = witness.unwrap();
        let wm = a.matvec(&witness).into_iter().fold(f64::INFINITY, f64::min);
        let scaled: Vec<f64> = witness.iter().map(|x| x / wm).collect();
        assert!(program_value(pot, &r.estimate) <= program_value(pot, &scaled) * (1.0 + tol));

        // complementary slackness: slack constraints carry no weight
        let dual = r.dual.unwrap();
        let top = dual.iter().copied().fold(0.0, f64::max);
        assert!(top > 0.0);
        for (m, l) in margins.iter().zip(&dual) {
            assert!(*l >= 0.0);
            if *m > 1.0 + 1e-3 {
                assert!(*l <= 1e-4 * top, "{}: margin {m}, weight {l} (max {top})", pot.as_str());
            }
        }
    }
}

#[test]
fn scaling_the_potential_leaves_the_direction_unchanged() {
    for (k, pot) in POTENTIALS.into_iter().enumerate() {
        let d = separable_instance(50, 2.0, 2.0, Prior::Gaussian { kappa: 2.0 }, 500 + 100 * k as u64);
        let a = solve_primal_dual(&d, pot, 200_000, 1e-7).unwrap();
        let b = solve_primal_dual_weighted(&d, pot, 3.0, 200_000, 1e-7).unwrap();
        assert!(a.converged && b.converged);
        assert!(angle_between(&a.estimate, &b.estimate) <= 1e-3, "{}", pot.as_str());
    }
    let d = dataset(&[&[2.0]], &[1.0], &[1.0]);
    assert!(solve_primal_dual_weighted(&d, Potential::L1, 0.0, 10, 1e-6).is_err());
}

#[test]
fn mirror_descent_preconditions() {
    let d = dataset(&[&[2.0]], &[1.0], &[1.0]);
    for pot in [Potential::L1, Potential::LinfScaled] {
        assert!(matches!(solve_mirror_descent(&d, pot, 0.1, 10, None), Err(Error::Capability(_))));
    }
    // σ_max = 2, bound 0.5
    assert!(matches!(solve_mirror_descent(&d, Potential::L2Squared, 2.1 / 4.0, 10, None), Err(Error::Argument(_))));
    assert!(solve_mirror_descent(&d, Potential::L2Squared, 0.0, 10, None).is_err());
    assert!(solve_mirror_descent(&d, Potential::L2Squared, 0.1, 10, Some(&[1.0, 0.0])).is_err());

    let md = solve_mirror_descent(&d, Potential::L2Squared, 0.1, 1000, Some(&[0.5])).unwrap();
    assert!(md.result.converged);
    assert!(md.result.estimate[0] > 0.0);
    assert!(md.angle_history.iter().all(|&(_, a)| a == 0.0));
}

#[test]
fn mirror_descent_tracks_the_max_margin_direction() {
    let d = separable_instance(100, 2.0, 2.0, Prior::Gaussian { kappa: 2.0 }, 900);
    let pd = solve_primal_dual(&d, Potential::L2Squared, 200_000, 1e-8).unwrap();
    assert!(pd.converged);
    let smax = spectral_norm(&d.features);
    let eta = 1.9 / (smax * smax);
    let md = solve_mirror_descent(&d, Potential::L2Squared, eta, 20_000, Some(&pd.estimate)).unwrap();
    assert!(md.result.converged);
    let h = &md.angle_history;
    assert!(h.len() >= 256 && h.last().unwrap().0 == 20_000);
    for w in h[h.len() / 2..].windows(2) {
        assert!(w[1].1 <= w[0].1 + 1e-12, "{w:?}");
    }
    assert!(h.last().unwrap().1 < h[0].1);
}

#[test]
fn evaluate_examples() {
    let d = dataset(&[&[1.0, 0.0]], &[1.0], &[3.0, 0.0]);
    let r = evaluate(&d, &[3.0, 0.0], None).unwrap();
    assert_eq!(r.gen_error, 0.0);
    assert!((r.correlation - d.kappa * d.kappa).abs() <= 1e-14);
    assert!((evaluate(&d, &[-3.0, 0.0], None).unwrap().gen_error - 1.0).abs() <= 1e-15);
    assert!((evaluate(&d, &[0.0, 2.0], None).unwrap().gen_error - 0.5).abs() <= 1e-15);
    assert!(matches!(evaluate(&d, &[0.0, 0.0], None), Err(Error::Domain(_))));
    assert!(evaluate(&d, &[1.0], None).is_err());
}

#[test]
fn evaluate_support_rates() {
    let d = dataset(&[&[1.0, 0.0, 0.0, 0.0]], &[1.0], &[1.0, -2.0, 0.0, 0.0]);
    let r = evaluate(&d, &[0.5, 1e-9, 0.3, 0.0], Some(1e-5)).unwrap();
    assert_eq!(r.support, Some(SupportRates { p1: 0.5, p2: Some(0.5) }));
    let dense = dataset(&[&[1.0, 0.0]], &[1.0], &[1.0, 1.0]);
    let r = evaluate(&dense, &[1.0, 0.0], Some(1e-5)).unwrap();
    assert_eq!(r.support, Some(SupportRates { p1: 0.5, p2: None }));
}

#[test]
fn solve_result_serde_round_trip() {
    let d = dataset(&[&[2.0]], &[1.0], &[1.0]);
    let r = solve_primal_dual(&d, Potential::L2Squared, 10_000, 1e-9).unwrap();
    let back: SolveResult = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
    assert_eq!(back.estimate, r.estimate);
    assert_eq!(back.converged, r.converged);
}

proptest! {
    #[test]
    fn evaluate_is_scale_invariant(seed in any::<u64>(), c in 0.001f64..1000.0) {
        let d = generate_dataset(20, 10, &Prior::Gaussian { kappa: 1.0 }, &LinkFunction::StandardLogistic, RngStream::new(seed, 0)).unwrap();
        let mut rng = RngStream::new(seed, 1).rng();
        let w: Vec<f64> = (0..20).map(|_| rng.sample(StandardNormal)).collect();
        let cw: Vec<f64> = w.iter().map(|x| c * x).collect();
        let a = evaluate(&d, &w, None).unwrap();
        let b = evaluate(&d, &cw, None).unwrap();
        prop_assert!((a.gen_error - b.gen_error).abs() <= 1e-12);
    }
}

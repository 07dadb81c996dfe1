use levytopic::rng::SimRng;
use levytopic::simplex::*;
use levytopic::stats::{mean, std_err, variance};
use proptest::prelude::*;
use rand::RngCore;

const M: usize = 100_000;

fn dirichlet_draws(alpha: &[f64], seed: u64) -> Vec<SimplexPoint> {
    let a = AlphaVector::new(alpha.to_vec()).unwrap();
    let mut rng = SimRng::new(seed);
    (0..M).map(|_| sample_dirichlet(&a, &mut rng)).collect()
}

fn component(draws: &[SimplexPoint], k: usize) -> Vec<f64> {
    draws.iter().map(|p| p.components()[k]).collect()
}

#[test]
fn symmetric_dirichlet_mean() {
    let d = dirichlet_draws(&[1.0, 1.0, 1.0], 1);
    for k in 0..3 {
        let c = component(&d, k);
        assert!((mean(&c) - 1.0 / 3.0).abs() < 3.0 * std_err(&c));
    }
}

#[test]
fn asymmetric_dirichlet_mean() {
    let c = component(&dirichlet_draws(&[10.0, 1.0], 2), 0);
    assert!((mean(&c) - 10.0 / 11.0).abs() < 3.0 * std_err(&c));
}

#[test]
fn dirichlet_component_variance() {
    // Var = a1 a2 / (A^2 (A + 1)) = 4 / 80.
    let c = component(&dirichlet_draws(&[2.0, 2.0], 3), 0);
    let m = mean(&c);
    let sq: Vec<f64> = c.iter().map(|x| (x - m).powi(2)).collect();
    assert!((variance(&c) - 0.05).abs() < 3.0 * std_err(&sq));
}

#[test]
fn lognormal_limits_and_moments() {
    let mut rng = SimRng::new(4);
    let tight = LevyParams::new(0.0, 1e-6).unwrap();
    for _ in 0..1000 {
        assert!((sample_lognormal(&tight, &mut rng) - 1.0).abs() < 1e-4);
    }

    let p = LevyParams::new(0.0, 1.0).unwrap();
    let mut xs: Vec<f64> = (0..M).map(|_| sample_lognormal(&p, &mut rng)).collect();
    assert!((mean(&xs) - 0.5f64.exp()).abs() < 3.0 * std_err(&xs));
    xs.sort_by(f64::total_cmp);
    // Sample median s.e. is 1 / (2 f(1) sqrt(M)) with f(1) = 1 / sqrt(2 pi).
    let median_se = (2.0 * std::f64::consts::PI).sqrt() / (2.0 * (M as f64).sqrt());
    assert!((xs[M / 2] - 1.0).abs() < 3.0 * median_se);
}

#[test]
fn quantile_matches_empirical_cdf() {
    let p = LevyParams::new(0.7, 0.9).unwrap();
    let mut rng = SimRng::new(5);
    let xs: Vec<f64> = (0..M).map(|_| sample_lognormal(&p, &mut rng)).collect();
    for q in [0.15, 0.5, 0.85] {
        let t = lognormal_quantile(&p, q).unwrap();
        let ecdf = xs.iter().filter(|&&x| x <= t).count() as f64 / M as f64;
        assert!((ecdf - q).abs() < 0.01, "q {q}: {ecdf}");
        assert!((p.cdf(t) - q).abs() < 1e-9);
    }
    assert_eq!(lognormal_quantile(&p, 0.5).unwrap(), 0.7f64.exp());
    assert!(lognormal_quantile(&p, 0.0).is_err());
    assert!(lognormal_quantile(&p, 1.0).is_err());
}

#[test]
fn same_seed_same_stream() {
    let mut a = SimRng::new(99);
    let mut b = SimRng::new(99);
    let xs: Vec<u64> = (0..100).map(|_| a.next_u64()).collect();
    let ys: Vec<u64> = (0..100).map(|_| b.next_u64()).collect();
    assert_eq!(xs, ys);
    let alpha = AlphaVector::symmetric(5, 0.3).unwrap();
    let d1 = sample_dirichlet(&alpha, &mut SimRng::new(7));
    let d2 = sample_dirichlet(&alpha, &mut SimRng::new(7));
    assert_eq!(d1, d2);
}

fn weights(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(1e-6f64..10.0, n)
}

proptest! {
    #[test]
    fn gibbs_inequality((p, q) in (2usize..12).prop_flat_map(|n| (weights(n), weights(n)))) {
        let p = SimplexPoint::from_weights(&p).unwrap();
        let q = SimplexPoint::from_weights(&q).unwrap();
        let d = kl_divergence(&p, &q).unwrap();
        prop_assert!(d >= 0.0);
        prop_assert!(kl_divergence(&p, &p).unwrap().abs() < 1e-12);
        let l1: f64 = p.components().iter().zip(q.components()).map(|(a, b)| (a - b).abs()).sum();
        // Pinsker: KL in nats >= L1^2 / 2, so a distinct pair has positive KL.
        prop_assert!(d * std::f64::consts::LN_2 >= l1 * l1 / 2.0 - 1e-12);
    }

    #[test]
    fn dirichlet_draws_on_simplex(alpha in prop::collection::vec(1e-3f64..20.0, 2..30), seed in any::<u64>()) {
        let a = AlphaVector::new(alpha).unwrap();
        let mut rng = SimRng::new(seed);
        for _ in 0..20 {
            let p = sample_dirichlet(&a, &mut rng);
            let s: f64 = p.components().iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-12);
            prop_assert!(p.components().iter().all(|&c| c >= 0.0));
            prop_assert!(p.log_components().iter().all(|l| l.is_finite()));
        }
    }
}

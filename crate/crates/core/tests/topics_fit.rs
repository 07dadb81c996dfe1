use levytopic::corpus::ChunkSequence;
use levytopic::levy::Trajectory;
use levytopic::rng::SimRng;
use levytopic::simplex::*;
use levytopic::stats::{mean, std_err};
use levytopic::topics::*;
use rand::Rng;

/// 50 chunks from each of two disjoint vocabularies, alternating in runs.
fn disjoint_chunks(seed: u64, k: usize) -> (ChunkSequence, Vec<usize>) {
    let mut rng = SimRng::new(seed);
    let mut chunks = Vec::new();
    let mut labels = Vec::new();
    for i in 0..100 {
        let g = (i / 5) % 2;
        let prefix = if g == 0 { "alpha" } else { "omega" };
        chunks.push(
            (0..k)
                .map(|_| format!("{prefix}{}", rng.random_range(0..20)))
                .collect(),
        );
        labels.push(g);
    }
    (ChunkSequence { k, chunks }, labels)
}

fn small_config() -> LdaConfig {
    LdaConfig {
        n_topics: 2,
        iters: 300,
        burn_in: 200,
        ..Default::default()
    }
}

#[test]
fn disjoint_vocabularies_separate() {
    let (chunks, labels) = disjoint_chunks(1, 30);
    let model = train_lda(&chunks, &small_config(), 42).unwrap();
    let traj = infer_mixtures(&model, &chunks);
    let maxes: Vec<f64> = traj
        .points()
        .iter()
        .map(|p| p.components().iter().cloned().fold(0.0, f64::max))
        .collect();
    assert!(mean(&maxes) > 0.9, "{}", mean(&maxes));

    // The dominant topic is shared within a group and differs across groups.
    let dominant: Vec<usize> = traj
        .points()
        .iter()
        .map(|p| (p.components()[1] > p.components()[0]) as usize)
        .collect();
    let flip = dominant[0] ^ labels[0];
    assert!(dominant.iter().zip(&labels).all(|(d, l)| d ^ l == flip));
    for p in traj.points() {
        assert!(p.components().iter().all(|&c| c > 0.0));
        assert!((p.components().iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn mixtures_match_recounted_assignments() {
    let (chunks, _) = disjoint_chunks(2, 30);
    let cfg = small_config();
    let model = train_lda(&chunks, &cfg, 7).unwrap();
    let traj = infer_mixtures(&model, &chunks);
    let total: usize = model.assignments.iter().map(Vec::len).sum();
    assert_eq!(total, chunks.len() * 30);
    for (z, p) in model.assignments.iter().zip(traj.points()) {
        let mut counts = [0.0f64; 2];
        for &t in z {
            counts[t as usize] += 1.0;
        }
        let n = z.len() as f64;
        for (k, c) in counts.iter().enumerate() {
            let oracle = (c + cfg.alpha0) / (n + 2.0 * cfg.alpha0);
            assert!((p.components()[k] - oracle).abs() < 1e-12);
        }
    }
    // Topic-word rows recount from the same assignments.
    let mut tw = vec![vec![0u32; model.vocab.len()]; 2];
    for (c, z) in chunks.chunks.iter().zip(&model.assignments) {
        for (w, &t) in c.iter().zip(z) {
            tw[t as usize][model.word_id(w).unwrap() as usize] += 1;
        }
    }
    assert_eq!(tw, model.topic_word_counts);
}

#[test]
fn training_is_deterministic() {
    let (chunks, _) = disjoint_chunks(3, 25);
    let a = train_lda(&chunks, &small_config(), 5).unwrap();
    let b = train_lda(&chunks, &small_config(), 5).unwrap();
    assert_eq!(a.topic_word(), b.topic_word());
    assert_eq!(a.to_json(), b.to_json());
}

#[test]
fn unseen_chunks_fold_in() {
    let (chunks, labels) = disjoint_chunks(4, 30);
    let model = train_lda(&chunks, &small_config(), 9).unwrap();
    let (fresh, fresh_labels) = disjoint_chunks(5, 30);
    let seen = infer_mixtures(&model, &chunks);
    let folded = infer_mixtures(&model, &fresh);
    let topic_of = |p: &SimplexPoint| (p.components()[1] > p.components()[0]) as usize;
    let flip = topic_of(&seen.points()[0]) ^ labels[0];
    for (p, l) in folded.points().iter().zip(&fresh_labels) {
        assert_eq!(topic_of(p) ^ l, flip);
    }
    assert_eq!(folded, infer_mixtures(&model, &fresh));
}

fn dirichlet_trajectory(alpha: &[f64], m: usize, seed: u64) -> Trajectory {
    let a = AlphaVector::new(alpha.to_vec()).unwrap();
    let mut rng = SimRng::new(seed);
    Trajectory::from_points((0..m).map(|_| sample_dirichlet(&a, &mut rng)).collect()).unwrap()
}

#[test]
fn dirichlet_mle_recovers_parameters() {
    let truth = [2.0, 5.0, 3.0];
    let traj = dirichlet_trajectory(&truth, 5000, 21);
    let fit = fit_stationary_alpha(&traj).unwrap();
    for (a, t) in fit.as_slice().iter().zip(truth) {
        assert!((a - t).abs() < 0.05 * t, "{a} vs {t}");
    }
    // Mean of Dir(alpha-hat) against the empirical component means.
    for (k, m) in fit.mean().iter().enumerate() {
        let c: Vec<f64> = traj.points().iter().map(|p| p.components()[k]).collect();
        assert!((mean(&c) - m).abs() < 3.0 * std_err(&c));
    }
}

#[test]
fn concentrated_points_give_large_symmetric_alpha() {
    let traj = dirichlet_trajectory(&[1e4, 1e4, 1e4], 500, 22);
    let fit = fit_stationary_alpha(&traj).unwrap();
    let a = fit.as_slice();
    assert!(fit.total() > 1e3, "{}", fit.total());
    let (lo, hi) = a
        .iter()
        .fold((f64::MAX, 0.0f64), |(l, h), &x| (l.min(x), h.max(x)));
    assert!(hi / lo < 1.05, "{a:?}");
}

#[test]
fn sparse_alpha_fit_and_trace() {
    let traj = dirichlet_trajectory(&[0.05; 25], 400, 23);
    let fit = fit_stationary_alpha_traced(&traj, ALPHA_FIT_MAX_ITERS).unwrap();
    assert!(fit.converged, "{} iterations", fit.iterations);
    for w in fit.log_likelihood.windows(2) {
        assert!(w[1] >= w[0] - 1e-10);
    }
    for a in fit.alpha.as_slice() {
        assert!((a - 0.05).abs() < 0.015, "{a}");
    }
}

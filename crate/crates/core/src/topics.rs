//! Per-source topic models and the stationary Dirichlet of a trajectory.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::ChunkSequence;
use crate::levy::Trajectory;
pub use crate::simplex::AlphaVector;
use crate::simplex::{SimRng, SimplexError, SimplexPoint};
use crate::special::{digamma, inverse_digamma, ln_gamma, trigamma};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TopicsError {
    #[error("vocabulary has {types} distinct words, fewer than {topics} topics")]
    VocabularyTooSmall { types: usize, topics: usize },
    #[error("invalid topic model configuration: {0}")]
    InvalidConfig(String),
    #[error("need at least {needed} {what}, got {got}")]
    TooFew {
        what: &'static str,
        needed: usize,
        got: usize,
    },
    #[error("Dirichlet fit did not converge in {iterations} iterations")]
    NonConvergence {
        last: AlphaVector,
        iterations: usize,
    },
    #[error(transparent)]
    Simplex(#[from] SimplexError),
    #[error("model file: {0}")]
    Format(String),
}

/// Collapsed Gibbs LDA settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LdaConfig {
    pub n_topics: usize,
    /// Symmetric document-topic prior.
    pub alpha0: f64,
    /// Symmetric topic-word prior.
    pub beta0: f64,
    pub iters: usize,
    /// Sweeps treated as burn-in. Mixtures come from the final sample, so
    /// this only has to be below `iters`.
    pub burn_in: usize,
    /// Gibbs sweeps used to fold unseen chunks into a trained model.
    pub fold_in_iters: usize,
}

impl Default for LdaConfig {
    fn default() -> Self {
        LdaConfig {
            n_topics: 25,
            alpha0: 0.1,
            beta0: 0.01,
            iters: 1000,
            burn_in: 800,
            fold_in_iters: 50,
        }
    }
}

impl LdaConfig {
    fn validate(&self) -> Result<(), TopicsError> {
        if self.n_topics < 2 {
            return Err(TopicsError::InvalidConfig(
                "need at least two topics".into(),
            ));
        }
        if self.n_topics > u16::MAX as usize {
            return Err(TopicsError::InvalidConfig("too many topics".into()));
        }
        if !(self.alpha0 > 0.0 && self.beta0 > 0.0) {
            return Err(TopicsError::InvalidConfig("priors must be positive".into()));
        }
        if self.iters == 0 || self.burn_in >= self.iters {
            return Err(TopicsError::InvalidConfig(format!(
                "iters = {}, burn_in = {}",
                self.iters, self.burn_in
            )));
        }
        Ok(())
    }
}

/// Content hash of a chunk sequence; identifies the training documents.
pub fn chunks_fingerprint(chunks: &ChunkSequence) -> String {
    let mut h = Sha256::new();
    h.update((chunks.k as u64).to_le_bytes());
    for c in &chunks.chunks {
        for t in c {
            h.update(t.as_bytes());
            h.update([0u8]);
        }
        h.update([1u8]);
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// A trained topic model together with its final Gibbs state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopicModel {
    pub version: u32,
    pub config: LdaConfig,
    pub seed: u64,
    pub vocab: Vec<String>,
    /// N x V word counts per topic from the final sample.
    pub topic_word_counts: Vec<Vec<u32>>,
    /// Topic of every training token, per chunk.
    pub assignments: Vec<Vec<u16>>,
    pub training_fingerprint: String,
    #[serde(skip)]
    index: HashMap<String, u32>,
    #[serde(skip)]
    topic_word: Vec<Vec<f64>>,
}

impl TopicModel {
    pub fn n_topics(&self) -> usize {
        self.config.n_topics
    }

    /// Smoothed word distribution of each topic; rows sum to one.
    pub fn topic_word(&self) -> &[Vec<f64>] {
        &self.topic_word
    }

    pub fn word_id(&self, w: &str) -> Option<u32> {
        self.index.get(w).copied()
    }

    fn rebuild(&mut self) {
        self.index = self
            .vocab
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i as u32))
            .collect();
        let v = self.vocab.len() as f64;
        let beta = self.config.beta0;
        self.topic_word = self
            .topic_word_counts
            .iter()
            .map(|row| {
                let total: f64 = row.iter().map(|&c| c as f64).sum::<f64>() + v * beta;
                row.iter().map(|&c| (c as f64 + beta) / total).collect()
            })
            .collect();
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, TopicsError> {
        let mut m: TopicModel =
            serde_json::from_str(text).map_err(|e| TopicsError::Format(e.to_string()))?;
        if m.version != MODEL_FORMAT_VERSION {
            return Err(TopicsError::Format(format!(
                "unsupported version {}",
                m.version
            )));
        }
        m.rebuild();
        Ok(m)
    }
}

/// Trains LDA by collapsed Gibbs sampling. Deterministic given `seed`.
pub fn train_lda(
    chunks: &ChunkSequence,
    config: &LdaConfig,
    seed: u64,
) -> Result<TopicModel, TopicsError> {
    config.validate()?;
    if chunks.len() < 2 {
        return Err(TopicsError::TooFew {
            what: "chunks",
            needed: 2,
            got: chunks.len(),
        });
    }
    let mut vocab: Vec<String> = Vec::new();
    let mut index: HashMap<String, u32> = HashMap::new();
    let docs: Vec<Vec<u32>> = chunks
        .chunks
        .iter()
        .map(|c| {
            c.iter()
                .map(|w| {
                    *index.entry(w.clone()).or_insert_with(|| {
                        vocab.push(w.clone());
                        (vocab.len() - 1) as u32
                    })
                })
                .collect()
        })
        .collect();
    let n = config.n_topics;
    if vocab.len() < n {
        return Err(TopicsError::VocabularyTooSmall {
            types: vocab.len(),
            topics: n,
        });
    }
    let v = vocab.len();
    let mut rng = SimRng::new(seed);

    let mut word_topic = vec![0u32; v * n];
    let mut doc_topic = vec![0u32; docs.len() * n];
    let mut topic_total = vec![0u32; n];
    let mut z: Vec<Vec<u16>> = docs
        .iter()
        .enumerate()
        .map(|(d, words)| {
            words
                .iter()
                .map(|&w| {
                    let t = rng.random_range(0..n);
                    word_topic[w as usize * n + t] += 1;
                    doc_topic[d * n + t] += 1;
                    topic_total[t] += 1;
                    t as u16
                })
                .collect()
        })
        .collect();

    let (alpha, beta) = (config.alpha0, config.beta0);
    let v_beta = v as f64 * beta;
    let mut probs = vec![0.0f64; n];
    for _ in 0..config.iters {
        for (d, words) in docs.iter().enumerate() {
            let dt = &mut doc_topic[d * n..(d + 1) * n];
            for (pos, &w) in words.iter().enumerate() {
                let w = w as usize;
                let old = z[d][pos] as usize;
                let wt = &mut word_topic[w * n..(w + 1) * n];
                wt[old] -= 1;
                dt[old] -= 1;
                topic_total[old] -= 1;

                let mut total = 0.0;
                for t in 0..n {
                    total += (dt[t] as f64 + alpha) * (wt[t] as f64 + beta)
                        / (topic_total[t] as f64 + v_beta);
                    probs[t] = total;
                }
                let u = rng.random::<f64>() * total;
                let new = probs.iter().position(|&c| c > u).unwrap_or(n - 1);

                wt[new] += 1;
                dt[new] += 1;
                topic_total[new] += 1;
                z[d][pos] = new as u16;
            }
        }
    }

    let topic_word_counts = (0..n)
        .map(|t| (0..v).map(|w| word_topic[w * n + t]).collect())
        .collect();
    let mut model = TopicModel {
        version: MODEL_FORMAT_VERSION,
        config: config.clone(),
        seed,
        vocab,
        topic_word_counts,
        assignments: z,
        training_fingerprint: chunks_fingerprint(chunks),
        index: HashMap::new(),
        topic_word: Vec::new(),
    };
    model.rebuild();
    Ok(model)
}

/// `(count_z + alpha0) / (known + N alpha0)` for one chunk's topic counts.
pub fn mixture_from_counts(counts: &[u32], alpha0: f64) -> SimplexPoint {
    let weights: Vec<f64> = counts.iter().map(|&c| c as f64 + alpha0).collect();
    SimplexPoint::from_weights(&weights).expect("positive smoothing keeps weights valid")
}

/// Topic mixture of every chunk, as a trajectory.
///
/// Training chunks use the held Gibbs assignments. Other chunk sequences are
/// folded in with the topic-word distributions held fixed; words outside the
/// training vocabulary are skipped.
pub fn infer_mixtures(model: &TopicModel, chunks: &ChunkSequence) -> Trajectory {
    let n = model.n_topics();
    let alpha0 = model.config.alpha0;
    let points: Vec<SimplexPoint> = if chunks_fingerprint(chunks) == model.training_fingerprint {
        model
            .assignments
            .iter()
            .map(|z| {
                let mut counts = vec![0u32; n];
                z.iter().for_each(|&t| counts[t as usize] += 1);
                mixture_from_counts(&counts, alpha0)
            })
            .collect()
    } else {
        let root = SimRng::new(model.seed).split(0xF01D);
        chunks
            .chunks
            .iter()
            .enumerate()
            .map(|(d, c)| {
                let words: Vec<usize> = c
                    .iter()
                    .filter_map(|w| model.word_id(w))
                    .map(|w| w as usize)
                    .collect();
                let mut rng = root.split(d as u64);
                mixture_from_counts(&fold_in(model, &words, &mut rng), alpha0)
            })
            .collect()
    };
    Trajectory::from_points(points).expect("smoothed mixtures are strictly positive")
}

fn fold_in(model: &TopicModel, words: &[usize], rng: &mut SimRng) -> Vec<u32> {
    let n = model.n_topics();
    let alpha = model.config.alpha0;
    let phi = model.topic_word();
    let mut counts = vec![0u32; n];
    let mut z: Vec<usize> = words
        .iter()
        .map(|_| {
            let t = rng.random_range(0..n);
            counts[t] += 1;
            t
        })
        .collect();
    let mut probs = vec![0.0; n];
    for _ in 0..model.config.fold_in_iters {
        for (pos, &w) in words.iter().enumerate() {
            counts[z[pos]] -= 1;
            let mut total = 0.0;
            for t in 0..n {
                total += (counts[t] as f64 + alpha) * phi[t][w];
                probs[t] = total;
            }
            let u = rng.random::<f64>() * total;
            let new = probs.iter().position(|&c| c > u).unwrap_or(n - 1);
            counts[new] += 1;
            z[pos] = new;
        }
    }
    counts
}

/// Outcome of the Dirichlet maximum-likelihood iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct AlphaFit {
    pub alpha: AlphaVector,
    pub iterations: usize,
    pub converged: bool,
    /// Mean log-likelihood per point after each iteration, starting with the
    /// initial guess.
    pub log_likelihood: Vec<f64>,
}

/// Mean log-density of points with mean log-components `mean_log` under Dir(alpha).
pub fn dirichlet_mean_log_likelihood(alpha: &[f64], mean_log: &[f64]) -> f64 {
    let total: f64 = alpha.iter().sum();
    ln_gamma(total)
        + alpha
            .iter()
            .zip(mean_log)
            .map(|(&a, &s)| (a - 1.0) * s - ln_gamma(a))
            .sum::<f64>()
}

pub const ALPHA_FIT_TOLERANCE: f64 = 1e-8;
pub const ALPHA_FIT_MAX_ITERS: usize = 1000;

/// Maximum-likelihood Dirichlet fit to the points of a trajectory.
pub fn fit_stationary_alpha(traj: &Trajectory) -> Result<AlphaVector, TopicsError> {
    let fit = fit_stationary_alpha_traced(traj, ALPHA_FIT_MAX_ITERS)?;
    if fit.converged {
        Ok(fit.alpha)
    } else {
        Err(TopicsError::NonConvergence {
            last: fit.alpha,
            iterations: fit.iterations,
        })
    }
}

/// Newton iteration on the Dirichlet likelihood, started from a moment
/// estimate. A step that leaves the positive orthant or lowers the
/// likelihood is replaced by the fixed-point update
/// `psi(alpha_k) = psi(A) + mean_i ln p_ik`. Stops when no component changes
/// by more than [`ALPHA_FIT_TOLERANCE`] relative to `max(1, alpha_k)`.
pub fn fit_stationary_alpha_traced(
    traj: &Trajectory,
    max_iters: usize,
) -> Result<AlphaFit, TopicsError> {
    if traj.len() < 10 {
        return Err(TopicsError::TooFew {
            what: "trajectory points",
            needed: 10,
            got: traj.len(),
        });
    }
    let n = traj.dim();
    let m = traj.len() as f64;
    let mut mean_log = vec![0.0; n];
    let mut mean = vec![0.0; n];
    let mut mean_sq = vec![0.0; n];
    for p in traj.points() {
        for k in 0..n {
            let l = p.log_components()[k];
            if !l.is_finite() {
                return Err(TopicsError::Simplex(SimplexError::InvalidPoint(
                    "Dirichlet fit needs strictly positive points".into(),
                )));
            }
            mean_log[k] += l / m;
            let c = p.components()[k];
            mean[k] += c / m;
            mean_sq[k] += c * c / m;
        }
    }

    // Moment estimate of the precision, averaged over components.
    let mut precision = 0.0;
    let mut used = 0.0;
    for k in 0..n {
        let var = mean_sq[k] - mean[k] * mean[k];
        if var > 0.0 && mean[k] > 0.0 {
            let s = mean[k] * (1.0 - mean[k]) / var - 1.0;
            if s.is_finite() && s > 0.0 {
                precision += s;
                used += 1.0;
            }
        }
    }
    let precision = if used > 0.0 {
        precision / used
    } else {
        n as f64
    };
    let mut alpha: Vec<f64> = mean.iter().map(|&mk| (precision * mk).max(1e-6)).collect();

    let mut trace = vec![dirichlet_mean_log_likelihood(&alpha, &mean_log)];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iters {
        iterations += 1;
        let current = trace[trace.len() - 1];
        let next = match newton_step(&alpha, &mean_log) {
            Some(a) if dirichlet_mean_log_likelihood(&a, &mean_log) >= current => a,
            _ => fixed_point_step(&alpha, &mean_log),
        };
        let change = alpha
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs() / a.max(1.0))
            .fold(0.0, f64::max);
        alpha = next;
        trace.push(dirichlet_mean_log_likelihood(&alpha, &mean_log));
        if change < ALPHA_FIT_TOLERANCE {
            converged = true;
            break;
        }
    }
    Ok(AlphaFit {
        alpha: AlphaVector::new(alpha)?,
        iterations,
        converged,
        log_likelihood: trace,
    })
}

fn fixed_point_step(alpha: &[f64], mean_log: &[f64]) -> Vec<f64> {
    let psi_total = digamma(alpha.iter().sum());
    mean_log
        .iter()
        .map(|&s| inverse_digamma(psi_total + s))
        .collect()
}

/// The Hessian is `diag(q) + z 11'`, so the Newton direction is O(N).
fn newton_step(alpha: &[f64], mean_log: &[f64]) -> Option<Vec<f64>> {
    let total: f64 = alpha.iter().sum();
    let psi_total = digamma(total);
    let g: Vec<f64> = alpha
        .iter()
        .zip(mean_log)
        .map(|(&a, &s)| psi_total - digamma(a) + s)
        .collect();
    let q: Vec<f64> = alpha.iter().map(|&a| -trigamma(a)).collect();
    let z = trigamma(total);
    let num: f64 = g.iter().zip(&q).map(|(g, q)| g / q).sum();
    let den: f64 = 1.0 / z + q.iter().map(|q| 1.0 / q).sum::<f64>();
    let b = num / den;
    let next: Vec<f64> = alpha
        .iter()
        .zip(g.iter().zip(&q))
        .map(|(&a, (g, q))| a - (g - b) / q)
        .collect();
    next.iter()
        .all(|a| a.is_finite() && *a > 0.0)
        .then_some(next)
}

/// Topic mixtures as CSV: chunk index then one column per topic.
pub fn trajectory_csv(traj: &Trajectory) -> String {
    traj.to_csv()
}

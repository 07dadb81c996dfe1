//! Coarse-graining: fits of `(mu, sigma)` across chunk sizes, limit regions
//! of the large-scale endpoints, and order-shuffled null trajectories.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{chunk, drop_top_words, ChunkingSpec, CorpusError, TokenStream};
use crate::inference::{
    fit, posterior_grid_for_trajectory, FitResult, GridSpec, InferenceError, PosteriorGrid,
    SimBudget,
};
use crate::levy::Trajectory;
use crate::rng::derive_seed;
use crate::rng::SimRng;
use crate::simplex::{AlphaVector, LambdaRange};
use crate::topics::{fit_stationary_alpha, infer_mixtures, train_lda, LdaConfig, TopicsError};

/// Centroid of the large-scale region reported for the philosophical texts.
pub const PHILOSOPHY_LIMIT_CENTROID: (f64, f64) = (2.07, 0.79);
/// Centroid of the large-scale region reported for the parliamentary debates.
pub const DEBATE_LIMIT_CENTROID: (f64, f64) = (1.87, 1.34);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Topics(#[from] TopicsError),
    #[error(transparent)]
    Inference(#[from] InferenceError),
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("covariance is degenerate (points are collinear)")]
    DegenerateCovariance { region: GaussianRegion },
}

/// Everything the per-scale pipeline needs besides the text and the seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub n_top_words: usize,
    pub lda: LdaConfig,
    pub grid: GridSpec,
    pub budget: SimBudget,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            n_top_words: 15,
            lda: LdaConfig::default(),
            grid: GridSpec::default(),
            budget: SimBudget::default(),
        }
    }
}

/// Seed for the topic model of `(source_id, k)`.
pub fn lda_seed(master_seed: u64, source_id: &str, k: usize) -> u64 {
    derive_seed(master_seed, &format!("lda/{source_id}/{k}"))
}

/// Seed for the likelihood simulations of a trajectory. It depends on the
/// trajectory content, so identical trajectories give identical fits.
pub fn sim_seed(master_seed: u64, traj: &Trajectory) -> u64 {
    derive_seed(master_seed, &format!("sim/{}", traj.fingerprint()))
}

/// Stationary Dirichlet and posterior fit of one trajectory.
#[derive(Clone, Debug)]
pub struct TrajectoryFit {
    pub alpha: AlphaVector,
    pub alpha_converged: bool,
    pub grid: PosteriorGrid,
    pub fit: FitResult,
}

/// Fits the stationary Dirichlet to the trajectory, then `(mu, sigma)`.
pub fn fit_trajectory(
    traj: &Trajectory,
    config: &PipelineConfig,
    seed: u64,
) -> Result<TrajectoryFit, FlowError> {
    let (alpha, alpha_converged) = match fit_stationary_alpha(traj) {
        Ok(a) => (a, true),
        Err(TopicsError::NonConvergence { last, iterations }) => {
            log::warn!("Dirichlet fit stopped after {iterations} iterations; using last iterate");
            (last, false)
        }
        Err(e) => return Err(e.into()),
    };
    let mut out = fit_trajectory_with_alpha(traj, &alpha, config, seed)?;
    out.alpha_converged = alpha_converged;
    Ok(out)
}

pub fn fit_trajectory_with_alpha(
    traj: &Trajectory,
    alpha: &AlphaVector,
    config: &PipelineConfig,
    seed: u64,
) -> Result<TrajectoryFit, FlowError> {
    let grid = posterior_grid_for_trajectory(traj, alpha, &config.grid, &config.budget, seed)?;
    let fit = fit(&grid);
    Ok(TrajectoryFit {
        alpha: alpha.clone(),
        alpha_converged: true,
        grid,
        fit,
    })
}

/// Chunks a prepared stream at size `k`, trains a topic model and returns the
/// chunk-mixture trajectory.
pub fn topic_trajectory(
    stream: &TokenStream,
    k: usize,
    lda: &LdaConfig,
    seed: u64,
) -> Result<Trajectory, FlowError> {
    let chunks = chunk(stream, ChunkingSpec::new(k)?)?;
    let model = train_lda(&chunks, lda, seed)?;
    Ok(infer_mixtures(&model, &chunks))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleProvenance {
    pub chunks: usize,
    pub lda_seed: u64,
    pub sim_seed: u64,
    pub trajectory_fingerprint: String,
    pub alpha_sum: f64,
    pub alpha_converged: bool,
}

/// Fit at one chunk size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowPoint {
    pub k: usize,
    pub fit: FitResult,
    pub lambda: LambdaRange,
    pub provenance: ScaleProvenance,
    /// Fit of the same trajectory with its chunk order shuffled, if requested.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub null_fit: Option<FitResult>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkippedScale {
    pub k: usize,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowCurve {
    pub source_id: String,
    pub points: Vec<FlowPoint>,
    pub skipped: Vec<SkippedScale>,
}

impl FlowCurve {
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("k,mu_hat,sd_mu,sigma_hat,sd_sigma,lambda_median,lambda_q15,lambda_q85\n");
        for p in &self.points {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                p.k,
                p.fit.mu_hat,
                p.fit.sd_mu,
                p.fit.sigma_hat,
                p.fit.sd_sigma,
                p.lambda.median,
                p.lambda.q15,
                p.lambda.q85
            );
        }
        out
    }

    pub fn endpoint(&self) -> Option<&FlowPoint> {
        self.points.last()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowOptions {
    /// Also fit an order-shuffled copy of every trajectory.
    pub null: bool,
}

/// Drops the source's most frequent words, as configured.
pub fn prepare_stream(stream: &TokenStream, config: &PipelineConfig) -> TokenStream {
    drop_top_words(stream, config.n_top_words)
}

/// Full pipeline at every chunk size in `k_list`, on a cleaned stream.
pub fn flow_curve(
    stream: &TokenStream,
    k_list: &[usize],
    config: &PipelineConfig,
    master_seed: u64,
    options: FlowOptions,
) -> FlowCurve {
    flow_curve_with(
        stream,
        k_list,
        config,
        master_seed,
        options,
        &|s, k, lda, seed| topic_trajectory(s, k, lda, seed),
    )
}

/// Chunk size, LDA settings and seed to a topic trajectory.
pub type TrajectoryFn<'a> =
    dyn Fn(&TokenStream, usize, &LdaConfig, u64) -> Result<Trajectory, FlowError> + Sync + 'a;

/// Like [`flow_curve`], with the chunk-to-trajectory step supplied by the
/// caller (e.g. a cache in front of [`topic_trajectory`]).
pub fn flow_curve_with(
    stream: &TokenStream,
    k_list: &[usize],
    config: &PipelineConfig,
    master_seed: u64,
    options: FlowOptions,
    trajectory_for: &TrajectoryFn<'_>,
) -> FlowCurve {
    let prepared = prepare_stream(stream, config);
    let mut ks: Vec<usize> = k_list.to_vec();
    ks.sort_unstable();
    ks.dedup();
    let results: Vec<(usize, Result<FlowPoint, FlowError>)> = ks
        .par_iter()
        .map(|&k| {
            let r = (|| {
                let seed = lda_seed(master_seed, &stream.source_id, k);
                let traj = trajectory_for(&prepared, k, &config.lda, seed)?;
                flow_point(k, &traj, seed, config, master_seed, options)
            })();
            (k, r)
        })
        .collect();
    let mut points = Vec::new();
    let mut skipped = Vec::new();
    for (k, r) in results {
        match r {
            Ok(p) => points.push(p),
            Err(e) => {
                log::warn!("{}: skipping k = {k}: {e}", stream.source_id);
                skipped.push(SkippedScale {
                    k,
                    reason: e.to_string(),
                });
            }
        }
    }
    FlowCurve {
        source_id: stream.source_id.clone(),
        points,
        skipped,
    }
}

/// Fits one trajectory and packages the result as a flow point.
pub fn flow_point(
    k: usize,
    traj: &Trajectory,
    lda_seed: u64,
    config: &PipelineConfig,
    master_seed: u64,
    options: FlowOptions,
) -> Result<FlowPoint, FlowError> {
    let seed = sim_seed(master_seed, traj);
    let tf = fit_trajectory(traj, config, seed)?;
    let null_fit = if options.null {
        let shuffled = shuffle_null(traj, derive_seed(seed, "shuffle"))?;
        Some(fit_trajectory_with_alpha(&shuffled, &tf.alpha, config, seed)?.fit)
    } else {
        None
    };
    Ok(FlowPoint {
        k,
        lambda: tf.fit.lambda_range(),
        fit: tf.fit,
        provenance: ScaleProvenance {
            chunks: traj.len(),
            lda_seed,
            sim_seed: seed,
            trajectory_fingerprint: traj.fingerprint(),
            alpha_sum: tf.alpha.total(),
            alpha_converged: tf.alpha_converged,
        },
        null_fit,
    })
}

/// Uniform random permutation of the trajectory's points.
pub fn shuffle_null(traj: &Trajectory, seed: u64) -> Result<Trajectory, FlowError> {
    if traj.len() < 3 {
        return Err(FlowError::TooFewPoints {
            needed: 3,
            got: traj.len(),
        });
    }
    let mut order: Vec<usize> = (0..traj.len()).collect();
    order.shuffle(&mut SimRng::new(seed));
    Ok(traj.reordered(&order))
}

/// Gaussian summary of a cloud of `(mu, sigma)` fits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianRegion {
    pub centroid: [f64; 2],
    pub covariance: [[f64; 2]; 2],
}

impl GaussianRegion {
    /// Eigenvalues (descending) and the unit eigenvector of the larger one.
    pub fn principal_axes(&self) -> ([f64; 2], [f64; 2]) {
        let [[a, b], [_, d]] = self.covariance;
        let tr = a + d;
        let det = a * d - b * b;
        let disc = (0.25 * (a - d) * (a - d) + b * b).sqrt();
        let l1 = 0.5 * tr + disc;
        let l2 = (0.5 * tr - disc).max(0.0).min(l1);
        let l2 = if l1 > 0.0 && det >= 0.0 {
            l2
        } else {
            l2.max(0.0)
        };
        let v = if b.abs() > 1e-300 {
            let (x, y) = (l1 - d, b);
            let n = (x * x + y * y).sqrt();
            [x / n, y / n]
        } else if a >= d {
            [1.0, 0.0]
        } else {
            [0.0, 1.0]
        };
        ([l1.max(0.0), l2], v)
    }

    pub fn is_degenerate(&self) -> bool {
        let ([l1, l2], _) = self.principal_axes();
        l1 <= 0.0 || l2 <= 1e-12 * l1
    }

    pub fn mahalanobis(&self, point: (f64, f64)) -> Result<f64, FlowError> {
        if self.is_degenerate() {
            return Err(FlowError::DegenerateCovariance {
                region: self.clone(),
            });
        }
        let [[a, b], [_, d]] = self.covariance;
        let det = a * d - b * b;
        let (dx, dy) = (point.0 - self.centroid[0], point.1 - self.centroid[1]);
        let q = (d * dx * dx - 2.0 * b * dx * dy + a * dy * dy) / det;
        Ok(q.max(0.0).sqrt())
    }

    /// Polyline of the `n_sigma` Mahalanobis contour.
    pub fn ellipse(&self, n_sigma: f64, vertices: usize) -> Vec<(f64, f64)> {
        let ([l1, l2], v) = self.principal_axes();
        let (r1, r2) = (n_sigma * l1.sqrt(), n_sigma * l2.sqrt());
        let w = [-v[1], v[0]];
        (0..=vertices)
            .map(|i| {
                let t = std::f64::consts::TAU * i as f64 / vertices as f64;
                let (c, s) = (r1 * t.cos(), r2 * t.sin());
                (
                    self.centroid[0] + c * v[0] + s * w[0],
                    self.centroid[1] + c * v[1] + s * w[1],
                )
            })
            .collect()
    }
}

/// Sample mean and sample covariance of the endpoint fits.
pub fn limit_region(points: &[(f64, f64)]) -> Result<GaussianRegion, FlowError> {
    limit_region_weighted(points, &vec![1.0; points.len()])
}

/// Weighted variant with reliability weights (e.g. inverse posterior
/// variances); equal weights reproduce [`limit_region`].
pub fn limit_region_weighted(
    points: &[(f64, f64)],
    weights: &[f64],
) -> Result<GaussianRegion, FlowError> {
    assert_eq!(points.len(), weights.len());
    if points.len() < 3 {
        return Err(FlowError::TooFewPoints {
            needed: 3,
            got: points.len(),
        });
    }
    let v1: f64 = weights.iter().sum();
    let v2: f64 = weights.iter().map(|w| w * w).sum();
    let mx = points
        .iter()
        .zip(weights)
        .map(|(p, w)| w * p.0)
        .sum::<f64>()
        / v1;
    let my = points
        .iter()
        .zip(weights)
        .map(|(p, w)| w * p.1)
        .sum::<f64>()
        / v1;
    let norm = v1 - v2 / v1;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (p, w) in points.iter().zip(weights) {
        let (dx, dy) = (p.0 - mx, p.1 - my);
        sxx += w * dx * dx;
        sxy += w * dx * dy;
        syy += w * dy * dy;
    }
    let region = GaussianRegion {
        centroid: [mx, my],
        covariance: [[sxx / norm, sxy / norm], [sxy / norm, syy / norm]],
    };
    if region.is_degenerate() {
        return Err(FlowError::DegenerateCovariance { region });
    }
    Ok(region)
}

/// Region of the fits' endpoints, weighting each by `1 / (sd_mu^2 + sd_sigma^2)`.
pub fn limit_region_from_fits(
    fits: &[FitResult],
    error_weighted: bool,
) -> Result<GaussianRegion, FlowError> {
    let pts: Vec<(f64, f64)> = fits.iter().map(|f| (f.mu_hat, f.sigma_hat)).collect();
    if error_weighted {
        let w: Vec<f64> = fits
            .iter()
            .map(|f| 1.0 / (f.sd_mu.powi(2) + f.sd_sigma.powi(2)).max(1e-12))
            .collect();
        limit_region_weighted(&pts, &w)
    } else {
        limit_region(&pts)
    }
}

pub fn mahalanobis_contains(
    region: &GaussianRegion,
    point: (f64, f64),
    n_sigma: f64,
) -> Result<bool, FlowError> {
    Ok(region.mahalanobis(point)? <= n_sigma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simplex::SimplexPoint;

    #[test]
    fn right_triangle_centroid() {
        let r = limit_region(&[(0.0, 0.0), (3.0, 0.0), (0.0, 3.0)]).unwrap();
        assert_eq!(r.centroid, [1.0, 1.0]);
        assert!((r.covariance[0][0] - 3.0).abs() < 1e-12);
        assert!((r.covariance[0][1] + 1.5).abs() < 1e-12);
    }

    #[test]
    fn collinear_points_are_degenerate() {
        match limit_region(&[(0.0, 0.0), (1.0, 1.0), (2.0, 2.0)]) {
            Err(FlowError::DegenerateCovariance { region }) => {
                let ([l1, l2], _) = region.principal_axes();
                assert!(l1 > 0.0 && l2.abs() < 1e-12);
                assert!(mahalanobis_contains(&region, (1.0, 1.0), 2.0).is_err());
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            limit_region(&[(0.0, 0.0), (1.0, 1.0)]),
            Err(FlowError::TooFewPoints { .. })
        ));
    }

    #[test]
    fn containment_with_identity_covariance() {
        let r = GaussianRegion {
            centroid: [0.0, 0.0],
            covariance: [[1.0, 0.0], [0.0, 1.0]],
        };
        assert!(mahalanobis_contains(&r, (0.0, 0.0), 1e-9).unwrap());
        assert!(!mahalanobis_contains(&r, (3.0, 0.0), 2.0).unwrap());
        assert!(mahalanobis_contains(&r, (0.0, 1.9), 2.0).unwrap());
    }

    #[test]
    fn ellipse_lies_on_contour() {
        let r = GaussianRegion {
            centroid: [2.0, 0.8],
            covariance: [[0.04, 0.01], [0.01, 0.02]],
        };
        for p in r.ellipse(2.0, 64) {
            assert!((r.mahalanobis(p).unwrap() - 2.0).abs() < 1e-9);
        }
    }

    #[test]
    fn shuffle_preserves_points_and_is_seeded() {
        let pts: Vec<SimplexPoint> = (1..=6)
            .map(|i| SimplexPoint::from_weights(&[i as f64, 1.0, 2.0]).unwrap())
            .collect();
        let t = Trajectory::from_points(pts).unwrap();
        let a = shuffle_null(&t, 5).unwrap();
        let b = shuffle_null(&t, 5).unwrap();
        assert_eq!(a, b);
        let key = |p: &SimplexPoint| p.components()[0].to_bits();
        let mut x: Vec<u64> = t.points().iter().map(key).collect();
        let mut y: Vec<u64> = a.points().iter().map(key).collect();
        x.sort();
        y.sort();
        assert_eq!(x, y);
        let short = Trajectory::from_points(t.points()[..2].to_vec()).unwrap();
        assert!(shuffle_null(&short, 1).is_err());
    }
}

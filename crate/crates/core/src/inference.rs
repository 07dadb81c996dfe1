//! Simulated-likelihood inference of `(mu, sigma)` on a flat-prior grid.
//!
//! The jump law for each focus value of a [`LambdaGrid`] is simulated once,
//! smoothed by a Gaussian kernel in `ln(jump)`, and evaluated at the observed
//! jumps. The likelihood of any `(mu, sigma)` is then a weighted mixture of
//! those per-cell densities, which makes a full posterior grid cheap.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::levy::{jump_from, simulate_lambda_grid, JumpSample, LambdaGrid, LevyError, Trajectory};
use crate::simplex::{lambda_range, AlphaVector, LambdaRange, LevyParams, SimRng};

/// Density floor; keeps every log-likelihood finite.
pub const DENSITY_FLOOR: f64 = 1e-12;
/// Jumps below this many bits are clamped before taking logs.
pub const MIN_JUMP: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InferenceError {
    #[error(transparent)]
    Levy(#[from] LevyError),
    #[error("sample is degenerate (all {0} values identical)")]
    DegenerateSample(usize),
    #[error("need at least {needed} samples for a density estimate, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("observed jump {0} is negative or not finite")]
    InvalidJump(f64),
    #[error("trajectory has {0} points; need at least 2")]
    ShortTrajectory(usize),
}

fn log_jump(k: f64) -> f64 {
    k.max(MIN_JUMP).ln()
}

/// Kernel density of `ln(jump)` tabulated on a regular grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityEstimate {
    pub lo: f64,
    pub step: f64,
    pub values: Vec<f64>,
    pub floor: f64,
    pub bandwidth: f64,
}

/// Silverman's rule of thumb, `0.9 min(sd, IQR/1.34) n^(-1/5)`.
pub fn silverman_bandwidth(sorted: &[f64]) -> f64 {
    let n = sorted.len() as f64;
    let mean = sorted.iter().sum::<f64>() / n;
    let var = sorted.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    let sd = var.sqrt();
    let iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    0.9 * spread * n.powf(-0.2)
}

fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    match sorted.get(i + 1) {
        Some(next) => sorted[i] + frac * (next - sorted[i]),
        None => sorted[i],
    }
}

impl DensityEstimate {
    /// Binned Gaussian KDE of already log-transformed values.
    pub fn from_log_values(values: &[f64]) -> Result<Self, InferenceError> {
        if values.len() < 2 {
            return Err(InferenceError::TooFewSamples {
                needed: 2,
                got: values.len(),
            });
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let (min, max) = (sorted[0], sorted[sorted.len() - 1]);
        if min == max {
            return Err(InferenceError::DegenerateSample(values.len()));
        }
        let h = silverman_bandwidth(&sorted);
        let lo = min - 5.0 * h;
        let hi = max + 5.0 * h;
        let nodes = (((hi - lo) / (h / 8.0)).ceil() as usize + 1).clamp(512, 16_384);
        let step = (hi - lo) / (nodes - 1) as f64;

        // Linear binning conserves mass exactly.
        let mut counts = vec![0.0; nodes];
        let unit = 1.0 / values.len() as f64;
        for &x in &sorted {
            let pos = (x - lo) / step;
            let i = (pos.floor() as usize).min(nodes - 2);
            let frac = pos - i as f64;
            counts[i] += unit * (1.0 - frac);
            counts[i + 1] += unit * frac;
        }

        let half = ((5.0 * h) / step).ceil() as usize;
        let mut kernel: Vec<f64> = (0..=2 * half)
            .map(|m| {
                let d = (m as f64 - half as f64) * step / h;
                (-0.5 * d * d).exp()
            })
            .collect();
        let ksum: f64 = kernel.iter().sum::<f64>() * step;
        kernel.iter_mut().for_each(|k| *k /= ksum);

        let mut dens = vec![0.0; nodes];
        for (i, &c) in counts.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let start = i.saturating_sub(half);
            let end = (i + half).min(nodes - 1);
            for (t, d) in dens.iter_mut().enumerate().take(end + 1).skip(start) {
                *d += c * kernel[t + half - i];
            }
        }
        Ok(DensityEstimate {
            lo,
            step,
            values: dens,
            floor: DENSITY_FLOOR,
            bandwidth: h,
        })
    }

    pub fn hi(&self) -> f64 {
        self.lo + self.step * (self.values.len() - 1) as f64
    }

    /// Density of `ln(jump)` at `x`, never below the floor.
    pub fn pdf(&self, x: f64) -> f64 {
        if !(x >= self.lo && x <= self.hi()) {
            return self.floor;
        }
        let pos = (x - self.lo) / self.step;
        let i = (pos.floor() as usize).min(self.values.len() - 2);
        let frac = pos - i as f64;
        let v = self.values[i] * (1.0 - frac) + self.values[i + 1] * frac;
        v.max(self.floor)
    }

    /// Trapezoid integral over the support.
    pub fn integral(&self) -> f64 {
        let n = self.values.len();
        self.step * (self.values.iter().sum::<f64>() - 0.5 * (self.values[0] + self.values[n - 1]))
    }
}

/// Kernel density of the logarithm of simulated jumps.
pub fn estimate_density(sample: &JumpSample) -> Result<DensityEstimate, InferenceError> {
    if sample.values.len() < crate::levy::MIN_JUMP_SAMPLES {
        return Err(InferenceError::TooFewSamples {
            needed: crate::levy::MIN_JUMP_SAMPLES,
            got: sample.values.len(),
        });
    }
    let logs: Vec<f64> = sample.values.iter().map(|&k| log_jump(k)).collect();
    DensityEstimate::from_log_values(&logs)
}

fn validate_jumps(jumps: &[f64]) -> Result<(), InferenceError> {
    match jumps.iter().find(|k| !(k.is_finite() && **k >= 0.0)) {
        Some(&bad) => Err(InferenceError::InvalidJump(bad)),
        None => Ok(()),
    }
}

/// Log-likelihood of observed jumps (bits) under a density of `ln(jump)`:
/// `sum_i [ln f(ln k_i) - ln k_i]`, the second term being the Jacobian.
pub fn log_likelihood(jumps: &[f64], dens: &DensityEstimate) -> f64 {
    jumps
        .iter()
        .map(|&k| {
            let x = log_jump(k);
            dens.pdf(x).ln() - x
        })
        .sum()
}

/// Which positions simulated jumps start from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartLaw {
    /// `v ~ Dir(alpha)`: one marginal jump law shared by every observation.
    Stationary,
    /// Each observed jump is scored against jumps simulated from the observed
    /// position it started at, with `sims_per_step` draws per focus cell.
    Conditional { sims_per_step: usize },
}

impl Default for StartLaw {
    fn default() -> Self {
        StartLaw::Conditional { sims_per_step: 200 }
    }
}

/// Simulation effort behind the likelihood.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SimBudget {
    pub lambda_grid: LambdaGrid,
    #[serde(default)]
    pub start: StartLaw,
}

impl SimBudget {
    pub fn with_sims_per_cell(mut self, sims: usize) -> Self {
        self.lambda_grid.sims_per_cell = sims;
        self
    }
}

/// Per-cell densities of the observed log-jumps.
#[derive(Clone, Debug)]
pub struct LikelihoodTable {
    grid: LambdaGrid,
    /// `cell_density[j][i]`: density of observation `i` under focus cell `j`.
    cell_density: Vec<Vec<f64>>,
    log_jacobian: f64,
}

impl LikelihoodTable {
    pub fn stationary(
        jumps: &[f64],
        alpha: &AlphaVector,
        grid: &LambdaGrid,
        seed: u64,
    ) -> Result<Self, InferenceError> {
        validate_jumps(jumps)?;
        let samples = simulate_lambda_grid(alpha, grid, seed)?;
        let x: Vec<f64> = jumps.iter().map(|&k| log_jump(k)).collect();
        let cell_density = samples
            .par_iter()
            .map(|s| {
                let d = estimate_density(s)?;
                Ok(x.iter().map(|&xi| d.pdf(xi)).collect())
            })
            .collect::<Result<Vec<Vec<f64>>, InferenceError>>()?;
        Ok(LikelihoodTable {
            grid: grid.clone(),
            cell_density,
            log_jacobian: -x.iter().sum::<f64>(),
        })
    }

    /// Scores jump `i` of `traj` against jumps simulated from `traj.points()[i]`.
    pub fn conditional(
        traj: &Trajectory,
        alpha: &AlphaVector,
        grid: &LambdaGrid,
        sims_per_step: usize,
        seed: u64,
    ) -> Result<Self, InferenceError> {
        if traj.len() < 2 {
            return Err(InferenceError::ShortTrajectory(traj.len()));
        }
        if sims_per_step < 2 {
            return Err(InferenceError::TooFewSamples {
                needed: 2,
                got: sims_per_step,
            });
        }
        let root = SimRng::new(seed);
        let x: Vec<f64> = traj.jumps().iter().map(|&k| log_jump(k)).collect();
        let n_cells = grid.len();
        // by_obs[i][j]
        let by_obs: Vec<Vec<f64>> = x
            .par_iter()
            .enumerate()
            .map(|(i, &xi)| {
                let start = &traj.points()[i];
                let mut rng = root.split(i as u64);
                let mut logs = vec![0.0; sims_per_step];
                grid.lambdas
                    .iter()
                    .map(|&lambda| {
                        for l in logs.iter_mut() {
                            *l = log_jump(jump_from(start, alpha, lambda, &mut rng));
                        }
                        point_kde(&mut logs, xi)
                    })
                    .collect()
            })
            .collect();
        let cell_density = (0..n_cells)
            .map(|j| by_obs.iter().map(|row| row[j]).collect())
            .collect();
        Ok(LikelihoodTable {
            grid: grid.clone(),
            cell_density,
            log_jacobian: -x.iter().sum::<f64>(),
        })
    }

    pub fn observations(&self) -> usize {
        self.cell_density.first().map_or(0, Vec::len)
    }

    /// `ln p(jumps | mu, sigma)` through the focus-grid mixture.
    pub fn log_likelihood(&self, params: &LevyParams) -> f64 {
        let w = self.grid.cell_weights(params);
        let mut mix = vec![0.0; self.observations()];
        for (wj, row) in w.iter().zip(&self.cell_density) {
            if *wj < 1e-300 {
                continue;
            }
            for (m, d) in mix.iter_mut().zip(row) {
                *m += wj * d;
            }
        }
        mix.iter().map(|m| m.max(DENSITY_FLOOR).ln()).sum::<f64>() + self.log_jacobian
    }
}

/// Gaussian KDE of `samples` evaluated at one point, floored.
fn point_kde(samples: &mut [f64], x: f64) -> f64 {
    samples.sort_by(f64::total_cmp);
    let h = silverman_bandwidth(samples);
    if h.is_nan() || h <= 0.0 {
        return DENSITY_FLOOR;
    }
    let norm = 1.0 / (samples.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    let s: f64 = samples
        .iter()
        .map(|&v| {
            let d = (x - v) / h;
            (-0.5 * d * d).exp()
        })
        .sum();
    (s * norm).max(DENSITY_FLOOR)
}

/// Bounds and resolution of the flat prior over `(mu, sigma)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    pub mu_min: f64,
    pub mu_max: f64,
    pub mu_points: usize,
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub sigma_points: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            mu_min: -5.0,
            mu_max: 4.0,
            mu_points: 61,
            sigma_min: 0.05,
            sigma_max: 3.0,
            sigma_points: 60,
        }
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

impl GridSpec {
    pub fn validate(&self) -> Result<(), InferenceError> {
        let ok = self.mu_min.is_finite()
            && self.mu_max.is_finite()
            && self.sigma_max.is_finite()
            && self.mu_max >= self.mu_min
            && self.sigma_min > 0.0
            && self.sigma_max >= self.sigma_min
            && self.mu_points >= 1
            && self.sigma_points >= 1;
        if ok {
            Ok(())
        } else {
            Err(InferenceError::InvalidGrid(format!("{self:?}")))
        }
    }

    pub fn mu_axis(&self) -> Vec<f64> {
        linspace(self.mu_min, self.mu_max, self.mu_points)
    }

    pub fn sigma_axis(&self) -> Vec<f64> {
        linspace(self.sigma_min, self.sigma_max, self.sigma_points)
    }
}

/// Normalized posterior over a `(mu, sigma)` grid, stored row-major by `mu`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosteriorGrid {
    pub mu_axis: Vec<f64>,
    pub sigma_axis: Vec<f64>,
    pub log_post: Vec<f64>,
    pub weights: Vec<f64>,
}

impl PosteriorGrid {
    /// Normalizes unnormalized log-posterior values by log-sum-exp.
    pub fn from_log_posterior(mu_axis: Vec<f64>, sigma_axis: Vec<f64>, log_post: Vec<f64>) -> Self {
        assert_eq!(mu_axis.len() * sigma_axis.len(), log_post.len());
        let max = log_post.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut weights: Vec<f64> = log_post.iter().map(|l| (l - max).exp()).collect();
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        PosteriorGrid {
            mu_axis,
            sigma_axis,
            log_post,
            weights,
        }
    }

    pub fn weight(&self, mu_index: usize, sigma_index: usize) -> f64 {
        self.weights[mu_index * self.sigma_axis.len() + sigma_index]
    }

    pub fn argmax(&self) -> (usize, usize) {
        let best = self
            .log_post
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .expect("nonempty grid");
        (best / self.sigma_axis.len(), best % self.sigma_axis.len())
    }

    /// True when the maximum sits on an edge of a grid axis that has more
    /// than one point; the posterior is then probably truncated.
    pub fn argmax_on_boundary(&self) -> bool {
        let (i, j) = self.argmax();
        let (nm, ns) = (self.mu_axis.len(), self.sigma_axis.len());
        (nm > 1 && (i == 0 || i == nm - 1)) || (ns > 1 && (j == 0 || j == ns - 1))
    }

    /// Shannon entropy of the cell weights, in nats.
    pub fn entropy(&self) -> f64 {
        -self
            .weights
            .iter()
            .filter(|w| **w > 0.0)
            .map(|w| w * w.ln())
            .sum::<f64>()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("mu,sigma,log_post,weight\n");
        for (i, mu) in self.mu_axis.iter().enumerate() {
            for (j, sigma) in self.sigma_axis.iter().enumerate() {
                let c = i * self.sigma_axis.len() + j;
                let _ = writeln!(
                    out,
                    "{mu},{sigma},{:e},{:e}",
                    self.log_post[c], self.weights[c]
                );
            }
        }
        out
    }
}

/// Evaluates the flat-prior posterior of a precomputed likelihood table.
pub fn posterior_from_table(
    table: &LikelihoodTable,
    spec: &GridSpec,
) -> Result<PosteriorGrid, InferenceError> {
    spec.validate()?;
    let mu_axis = spec.mu_axis();
    let sigma_axis = spec.sigma_axis();
    let cells: Vec<(f64, f64)> = mu_axis
        .iter()
        .flat_map(|&m| sigma_axis.iter().map(move |&s| (m, s)))
        .collect();
    let log_post: Vec<f64> = cells
        .par_iter()
        .map(|&(mu, sigma)| {
            table.log_likelihood(&LevyParams::new(mu, sigma).expect("grid sigma is positive"))
        })
        .collect();
    let grid = PosteriorGrid::from_log_posterior(mu_axis, sigma_axis, log_post);
    if grid.argmax_on_boundary() {
        log::warn!("posterior maximum lies on the grid boundary; estimates may be truncated");
    }
    Ok(grid)
}

/// Flat-prior posterior for observed jumps under the stationary-start law.
pub fn posterior_grid(
    jumps: &[f64],
    alpha: &AlphaVector,
    spec: &GridSpec,
    budget: &SimBudget,
    seed: u64,
) -> Result<PosteriorGrid, InferenceError> {
    spec.validate()?;
    let table = LikelihoodTable::stationary(jumps, alpha, &budget.lambda_grid, seed)?;
    posterior_from_table(&table, spec)
}

/// Flat-prior posterior for a trajectory, honoring `budget.start`.
pub fn posterior_grid_for_trajectory(
    traj: &Trajectory,
    alpha: &AlphaVector,
    spec: &GridSpec,
    budget: &SimBudget,
    seed: u64,
) -> Result<PosteriorGrid, InferenceError> {
    spec.validate()?;
    let table = match budget.start {
        StartLaw::Stationary => {
            LikelihoodTable::stationary(traj.jumps(), alpha, &budget.lambda_grid, seed)?
        }
        StartLaw::Conditional { sims_per_step } => {
            LikelihoodTable::conditional(traj, alpha, &budget.lambda_grid, sims_per_step, seed)?
        }
    };
    posterior_from_table(&table, spec)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub boundary_hit: bool,
    /// `1 / sum(w^2)`: number of cells effectively carrying the posterior.
    pub effective_cells: f64,
    pub argmax_mu: f64,
    pub argmax_sigma: f64,
}

/// Posterior means and standard deviations of `mu` and `sigma`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub mu_hat: f64,
    pub sigma_hat: f64,
    pub sd_mu: f64,
    pub sd_sigma: f64,
    pub diagnostics: FitDiagnostics,
}

impl FitResult {
    pub fn params(&self) -> LevyParams {
        LevyParams {
            mu: self.mu_hat,
            sigma: self.sigma_hat,
        }
    }

    pub fn lambda_range(&self) -> LambdaRange {
        lambda_range(&self.params())
    }
}

pub fn fit(grid: &PosteriorGrid) -> FitResult {
    let ns = grid.sigma_axis.len();
    let (mut m1, mut s1, mut m2, mut s2, mut w2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (c, &w) in grid.weights.iter().enumerate() {
        let mu = grid.mu_axis[c / ns];
        let sigma = grid.sigma_axis[c % ns];
        m1 += w * mu;
        s1 += w * sigma;
        w2 += w * w;
    }
    for (c, &w) in grid.weights.iter().enumerate() {
        m2 += w * (grid.mu_axis[c / ns] - m1).powi(2);
        s2 += w * (grid.sigma_axis[c % ns] - s1).powi(2);
    }
    let (i, j) = grid.argmax();
    // Clamp away rounding that could push a mean outside the axis range.
    let clamp = |v: f64, axis: &[f64]| v.clamp(axis[0], axis[axis.len() - 1]);
    FitResult {
        mu_hat: clamp(m1, &grid.mu_axis),
        sigma_hat: clamp(s1, &grid.sigma_axis),
        sd_mu: m2.sqrt(),
        sd_sigma: s2.sqrt(),
        diagnostics: FitDiagnostics {
            boundary_hit: grid.argmax_on_boundary(),
            effective_cells: 1.0 / w2,
            argmax_mu: grid.mu_axis[i],
            argmax_sigma: grid.sigma_axis[j],
        },
    }
}

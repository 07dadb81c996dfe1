//! The correlated Lévy-flight model on the topic simplex.
//!
//! A walk moves from `v` to `v' ~ Dir(alpha + lambda * v)`, with a fresh focus
//! `lambda ~ LogN(mu, sigma)` at every step. Step sizes are KL surprises in
//! bits. The jump law implied by a given `(mu, sigma)` is obtained by
//! simulation; [`LambdaGrid`] amortizes that simulation across many
//! parameter values.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::simplex::{
    dirichlet_ln_pdf, kl_divergence, sample_dirichlet, sample_dirichlet_shapes, sample_lognormal,
    AlphaVector, LevyParams, SimRng, SimplexError, SimplexPoint,
};
use crate::special::normal_cdf;

/// Smallest simulation size accepted by [`simulate_jump_distribution`].
pub const MIN_JUMP_SAMPLES: usize = 1000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LevyError {
    #[error(transparent)]
    Simplex(#[from] SimplexError),
    #[error("density grids are only defined for three topics, got {0}")]
    DimensionNotThree(usize),
    #[error("need at least {needed} {what}, got {got}")]
    TooFew {
        what: &'static str,
        needed: usize,
        got: usize,
    },
    #[error("negative or non-finite focus parameter {0}")]
    InvalidLambda(f64),
}

/// Time-ordered points `v_0 .. v_{K-1}` and the jumps `KL(v_{i+1} || v_i)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    points: Vec<SimplexPoint>,
    jumps: Vec<f64>,
}

impl Trajectory {
    pub fn from_points(points: Vec<SimplexPoint>) -> Result<Self, SimplexError> {
        if let Some(first) = points.first() {
            if let Some(bad) = points.iter().find(|p| p.dim() != first.dim()) {
                return Err(SimplexError::DimensionMismatch(first.dim(), bad.dim()));
            }
        }
        let jumps = points
            .windows(2)
            .map(|w| kl_divergence(&w[1], &w[0]))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Trajectory { points, jumps })
    }

    pub fn points(&self) -> &[SimplexPoint] {
        &self.points
    }

    pub fn jumps(&self) -> &[f64] {
        &self.jumps
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.first().map_or(0, SimplexPoint::dim)
    }

    pub fn mean_jump(&self) -> f64 {
        if self.jumps.is_empty() {
            return 0.0;
        }
        self.jumps.iter().sum::<f64>() / self.jumps.len() as f64
    }

    /// Content hash of the points.
    pub fn fingerprint(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        for p in &self.points {
            for c in p.log_components() {
                h.update(c.to_le_bytes());
            }
            h.update([0xFF]);
        }
        h.finalize()[..16]
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    /// Relabels topics in every point; jumps are recomputed.
    pub fn permute_topics(&self, perm: &[usize]) -> Trajectory {
        Trajectory::from_points(self.points.iter().map(|p| p.permuted(perm)).collect())
            .expect("relabeling preserves finiteness")
    }

    /// Same trajectory visiting its points in the order given by `order`.
    pub fn reordered(&self, order: &[usize]) -> Trajectory {
        Trajectory::from_points(order.iter().map(|&i| self.points[i].clone()).collect())
            .expect("reordering keeps every point")
    }

    /// One row per point: index, N mixture columns, and the jump into that
    /// point (empty for the first row).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index");
        for t in 0..self.dim() {
            let _ = write!(out, ",topic_{t}");
        }
        out.push_str(",jump_bits\n");
        for (i, p) in self.points.iter().enumerate() {
            let _ = write!(out, "{i}");
            for c in p.components() {
                let _ = write!(out, ",{c:e}");
            }
            match i.checked_sub(1).map(|j| self.jumps[j]) {
                Some(j) => {
                    let _ = writeln!(out, ",{j:e}");
                }
                None => out.push_str(",\n"),
            }
        }
        out
    }
}

fn check_dims(alpha: &AlphaVector, v: &SimplexPoint) -> Result<(), LevyError> {
    if alpha.dim() != v.dim() {
        return Err(SimplexError::DimensionMismatch(alpha.dim(), v.dim()).into());
    }
    Ok(())
}

fn tilted_shapes(alpha: &AlphaVector, lambda: f64, v_prev: &SimplexPoint) -> Vec<f64> {
    alpha
        .as_slice()
        .iter()
        .zip(v_prev.components())
        .map(|(a, v)| a + lambda * v)
        .collect()
}

/// One draw from `Dir(alpha + lambda * v_prev)`.
pub fn step(
    v_prev: &SimplexPoint,
    alpha: &AlphaVector,
    lambda: f64,
    rng: &mut SimRng,
) -> Result<SimplexPoint, LevyError> {
    check_dims(alpha, v_prev)?;
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(LevyError::InvalidLambda(lambda));
    }
    Ok(sample_dirichlet_shapes(
        &tilted_shapes(alpha, lambda, v_prev),
        rng,
    ))
}

/// A walk of `points` chunks, starting from a stationary draw.
pub fn simulate_trajectory(
    alpha: &AlphaVector,
    params: &LevyParams,
    points: usize,
    rng: &mut SimRng,
) -> Result<Trajectory, LevyError> {
    if points < 2 {
        return Err(LevyError::TooFew {
            what: "trajectory points",
            needed: 2,
            got: points,
        });
    }
    let mut path = Vec::with_capacity(points);
    path.push(sample_dirichlet(alpha, rng));
    for i in 1..points {
        let lambda = sample_lognormal(params, rng);
        let next = sample_dirichlet_shapes(&tilted_shapes(alpha, lambda, &path[i - 1]), rng);
        path.push(next);
    }
    Ok(Trajectory::from_points(path)?)
}

/// How the focus parameter is chosen for simulated jumps.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Focus {
    Fixed(f64),
    LogNormal(LevyParams),
}

impl Focus {
    fn draw(&self, rng: &mut SimRng) -> f64 {
        match self {
            Focus::Fixed(l) => *l,
            Focus::LogNormal(p) => sample_lognormal(p, rng),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JumpProvenance {
    pub alpha_id: String,
    pub focus: Focus,
    pub samples: usize,
    pub seed: u64,
}

/// Simulated jump sizes in bits.
#[derive(Clone, Debug, PartialEq)]
pub struct JumpSample {
    pub values: Vec<f64>,
    pub provenance: JumpProvenance,
}

impl JumpSample {
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn to_csv(&self) -> String {
        let p = &self.provenance;
        let mut out = format!(
            "# seed={} alpha={} samples={} focus={}\njump_bits\n",
            p.seed,
            p.alpha_id,
            p.samples,
            serde_json::to_string(&p.focus).unwrap_or_default()
        );
        for v in &self.values {
            let _ = writeln!(out, "{v:e}");
        }
        out
    }
}

/// Jumps `KL(v' || v)` for `M` independent pairs with `v ~ Dir(alpha)` and
/// `v' ~ Dir(alpha + lambda v)`.
pub fn simulate_jump_distribution(
    alpha: &AlphaVector,
    focus: Focus,
    samples: usize,
    rng: &mut SimRng,
) -> Result<JumpSample, LevyError> {
    if samples < MIN_JUMP_SAMPLES {
        return Err(LevyError::TooFew {
            what: "simulated jumps",
            needed: MIN_JUMP_SAMPLES,
            got: samples,
        });
    }
    if let Focus::Fixed(l) = focus {
        if !(l.is_finite() && l >= 0.0) {
            return Err(LevyError::InvalidLambda(l));
        }
    }
    let seed = rng.seed();
    let mut values = Vec::with_capacity(samples);
    for _ in 0..samples {
        let v = sample_dirichlet(alpha, rng);
        let lambda = focus.draw(rng);
        values.push(jump_from(&v, alpha, lambda, rng));
    }
    Ok(JumpSample {
        values,
        provenance: JumpProvenance {
            alpha_id: alpha.fingerprint(),
            focus,
            samples,
            seed,
        },
    })
}

/// Size of one step taken from `v` with focus `lambda`.
pub fn jump_from(v: &SimplexPoint, alpha: &AlphaVector, lambda: f64, rng: &mut SimRng) -> f64 {
    let next = sample_dirichlet_shapes(&tilted_shapes(alpha, lambda, v), rng);
    kl_divergence(&next, v).expect("log-space Dirichlet draws keep KL finite")
}

/// Log-spaced focus values at which the jump law is simulated once and
/// reused for every `(mu, sigma)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaGrid {
    pub lambdas: Vec<f64>,
    pub sims_per_cell: usize,
}

impl Default for LambdaGrid {
    fn default() -> Self {
        LambdaGrid::log_spaced(1e-4, 1e4, 96, 20_000)
    }
}

impl LambdaGrid {
    pub fn log_spaced(lo: f64, hi: f64, cells: usize, sims_per_cell: usize) -> Self {
        assert!(lo > 0.0 && hi > lo && cells >= 2);
        let (a, b) = (lo.ln(), hi.ln());
        let lambdas = (0..cells)
            .map(|i| (a + (b - a) * i as f64 / (cells - 1) as f64).exp())
            .collect();
        LambdaGrid {
            lambdas,
            sims_per_cell,
        }
    }

    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    /// Quadrature weights of `LogN(mu, sigma)` on the grid.
    ///
    /// The jump law is interpolated linearly in `ln(lambda)` between grid
    /// nodes (hat functions), so each weight is the integral of a hat function
    /// against the normal density of `ln(lambda)`. Mass beyond the end nodes
    /// is assigned to them. Weights are nonnegative and sum to one; they vary
    /// smoothly with `(mu, sigma)` even when `sigma` is below the grid spacing.
    pub fn cell_weights(&self, params: &LevyParams) -> Vec<f64> {
        let x: Vec<f64> = self.lambdas.iter().map(|l| l.ln()).collect();
        let n = x.len();
        let (mu, s) = (params.mu, params.sigma);
        // Probability and first moment of N(mu, s^2) restricted to [a, b].
        let piece = |a: f64, b: f64| {
            let (za, zb) = ((a - mu) / s, (b - mu) / s);
            let p = normal_cdf(zb) - normal_cdf(za);
            let m1 = mu * p - s * (phi(zb) - phi(za));
            (p, m1)
        };
        let mut w = vec![0.0; n];
        for j in 0..n - 1 {
            let (a, b) = (x[j], x[j + 1]);
            let (p, m1) = piece(a, b);
            let rising = ((m1 - a * p) / (b - a)).clamp(0.0, p);
            w[j + 1] += rising;
            w[j] += p - rising;
        }
        w[0] += normal_cdf((x[0] - mu) / s);
        w[n - 1] += 1.0 - normal_cdf((x[n - 1] - mu) / s);
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= total);
        w
    }
}

fn phi(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Stationary-start jump samples for every grid cell, in grid order. Cell
/// `j` uses the child generator `SimRng::new(seed).split(j)`.
pub fn simulate_lambda_grid(
    alpha: &AlphaVector,
    grid: &LambdaGrid,
    seed: u64,
) -> Result<Vec<JumpSample>, LevyError> {
    let root = SimRng::new(seed);
    grid.lambdas
        .par_iter()
        .enumerate()
        .map(|(j, &lambda)| {
            let mut rng = root.split(j as u64);
            simulate_jump_distribution(alpha, Focus::Fixed(lambda), grid.sims_per_cell, &mut rng)
        })
        .collect()
}

/// Density of `Dir(alpha + lambda v_prev)` sampled at the centroids of a
/// regular triangulation of the 2-simplex.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityGrid {
    pub resolution: usize,
    pub lambda: f64,
    /// Barycentric coordinates and density of each cell.
    pub cells: Vec<([f64; 3], f64)>,
}

impl DensityGrid {
    /// Area of each cell in the `(x1, x2)` chart, whose simplex has area 1/2.
    pub fn cell_area(&self) -> f64 {
        0.5 / (self.resolution * self.resolution) as f64
    }

    pub fn integral(&self) -> f64 {
        self.cells.iter().map(|(_, d)| d).sum::<f64>() * self.cell_area()
    }

    pub fn argmax(&self) -> [f64; 3] {
        self.cells
            .iter()
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .map(|c| c.0)
            .expect("grid has cells")
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "# resolution={} lambda={}\nx1,x2,x3,density\n",
            self.resolution, self.lambda
        );
        for (x, d) in &self.cells {
            let _ = writeln!(out, "{:.6},{:.6},{:.6},{:e}", x[0], x[1], x[2], d);
        }
        out
    }
}

pub fn density_grid(
    alpha: &AlphaVector,
    lambda: f64,
    v_prev: &SimplexPoint,
    resolution: usize,
) -> Result<DensityGrid, LevyError> {
    if alpha.dim() != 3 {
        return Err(LevyError::DimensionNotThree(alpha.dim()));
    }
    if v_prev.dim() != 3 {
        return Err(LevyError::DimensionNotThree(v_prev.dim()));
    }
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(LevyError::InvalidLambda(lambda));
    }
    let resolution = resolution.max(1);
    let shapes = tilted_shapes(alpha, lambda, v_prev);
    let r = resolution as f64;
    let mut cells = Vec::with_capacity(resolution * resolution);
    for i in 0..resolution {
        for j in 0..resolution - i {
            // upward triangle
            push_cell(
                &mut cells,
                &shapes,
                (i as f64 + 1.0 / 3.0) / r,
                (j as f64 + 1.0 / 3.0) / r,
            );
            if i + j + 1 < resolution {
                // downward triangle
                push_cell(
                    &mut cells,
                    &shapes,
                    (i as f64 + 2.0 / 3.0) / r,
                    (j as f64 + 2.0 / 3.0) / r,
                );
            }
        }
    }
    Ok(DensityGrid {
        resolution,
        lambda,
        cells,
    })
}

fn push_cell(cells: &mut Vec<([f64; 3], f64)>, shapes: &[f64], x1: f64, x2: f64) {
    let x = [x1, x2, (1.0 - x1 - x2).max(0.0)];
    cells.push((x, dirichlet_ln_pdf(shapes, &x).exp()));
}

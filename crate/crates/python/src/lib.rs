//! Python bindings: `import levytopic`.

// pyo3 0.22 macro expansion trips this lint on every PyResult.
#![allow(clippy::useless_conversion)]

use levytopic::corpus::{self, ChunkingSpec, CleanOptions, TokenStream};
use levytopic::flow::{self, PipelineConfig};
use levytopic::inference::{self, GridSpec, SimBudget, StartLaw};
use levytopic::levy::{self, LambdaGrid};
use levytopic::rng::SimRng;
use levytopic::simplex::{self, AlphaVector, LevyParams, SimplexPoint};
use levytopic::trees;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn point(v: Vec<f64>) -> PyResult<SimplexPoint> {
    SimplexPoint::new(v).map_err(err)
}

/// KL(p || q) in bits.
#[pyfunction]
fn kl_divergence(p: Vec<f64>, q: Vec<f64>) -> PyResult<f64> {
    simplex::kl_divergence(&point(p)?, &point(q)?).map_err(err)
}

#[pyfunction]
fn sample_dirichlet(alpha: Vec<f64>, seed: u64) -> PyResult<Vec<f64>> {
    let a = AlphaVector::new(alpha).map_err(err)?;
    Ok(simplex::sample_dirichlet(&a, &mut SimRng::new(seed))
        .components()
        .to_vec())
}

#[pyfunction]
fn lognormal_quantile(mu: f64, sigma: f64, q: f64) -> PyResult<f64> {
    simplex::lognormal_quantile(&LevyParams::new(mu, sigma).map_err(err)?, q).map_err(err)
}

/// `(median, q15, q85)` of the focus parameter.
#[pyfunction]
fn lambda_range(mu: f64, sigma: f64) -> PyResult<(f64, f64, f64)> {
    let r = simplex::lambda_range(&LevyParams::new(mu, sigma).map_err(err)?);
    Ok((r.median, r.q15, r.q85))
}

/// A walk on the topic simplex.
#[pyclass(module = "levytopic")]
#[derive(Clone)]
struct Trajectory {
    inner: levy::Trajectory,
}

#[pymethods]
impl Trajectory {
    #[new]
    fn new(points: Vec<Vec<f64>>) -> PyResult<Self> {
        let pts = points
            .into_iter()
            .map(point)
            .collect::<PyResult<Vec<_>>>()?;
        Ok(Trajectory {
            inner: levy::Trajectory::from_points(pts).map_err(err)?,
        })
    }

    #[getter]
    fn points(&self) -> Vec<Vec<f64>> {
        self.inner
            .points()
            .iter()
            .map(|p| p.components().to_vec())
            .collect()
    }

    /// KL jumps in bits between consecutive points.
    #[getter]
    fn jumps(&self) -> Vec<f64> {
        self.inner.jumps().to_vec()
    }

    fn shuffled(&self, seed: u64) -> PyResult<Trajectory> {
        Ok(Trajectory {
            inner: flow::shuffle_null(&self.inner, seed).map_err(err)?,
        })
    }

    fn to_csv(&self) -> String {
        self.inner.to_csv()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Trajectory(points={}, topics={})",
            self.inner.len(),
            self.inner.dim()
        )
    }
}

#[pyfunction]
#[pyo3(signature = (alpha, mu, sigma, points, seed))]
fn simulate_trajectory(
    alpha: Vec<f64>,
    mu: f64,
    sigma: f64,
    points: usize,
    seed: u64,
) -> PyResult<Trajectory> {
    let a = AlphaVector::new(alpha).map_err(err)?;
    let p = LevyParams::new(mu, sigma).map_err(err)?;
    Ok(Trajectory {
        inner: levy::simulate_trajectory(&a, &p, points, &mut SimRng::new(seed)).map_err(err)?,
    })
}

/// One-step density on the 2-simplex: list of `((x1, x2, x3), density)`.
#[pyfunction]
fn density_grid(
    alpha: Vec<f64>,
    lam: f64,
    v_prev: Vec<f64>,
    resolution: usize,
) -> PyResult<Vec<([f64; 3], f64)>> {
    let a = AlphaVector::new(alpha).map_err(err)?;
    Ok(levy::density_grid(&a, lam, &point(v_prev)?, resolution)
        .map_err(err)?
        .cells)
}

#[pyclass(module = "levytopic", get_all)]
#[derive(Clone)]
struct FitResult {
    mu_hat: f64,
    sigma_hat: f64,
    sd_mu: f64,
    sd_sigma: f64,
    boundary_hit: bool,
    lambda_median: f64,
    lambda_q15: f64,
    lambda_q85: f64,
}

#[pymethods]
impl FitResult {
    fn __repr__(&self) -> String {
        format!(
            "FitResult(mu_hat={:.4}, sd_mu={:.4}, sigma_hat={:.4}, sd_sigma={:.4})",
            self.mu_hat, self.sd_mu, self.sigma_hat, self.sd_sigma
        )
    }
}

impl From<&inference::FitResult> for FitResult {
    fn from(f: &inference::FitResult) -> Self {
        let l = f.lambda_range();
        FitResult {
            mu_hat: f.mu_hat,
            sigma_hat: f.sigma_hat,
            sd_mu: f.sd_mu,
            sd_sigma: f.sd_sigma,
            boundary_hit: f.diagnostics.boundary_hit,
            lambda_median: l.median,
            lambda_q15: l.q15,
            lambda_q85: l.q85,
        }
    }
}

/// Grid posterior over `(mu, sigma)`. `alpha=None` fits the stationary
/// Dirichlet to the trajectory first.
#[pyfunction]
#[pyo3(signature = (trajectory, seed, alpha=None, mu_points=61, sigma_points=60, cells=96, sims_per_cell=20000, sims_per_step=Some(200)))]
#[allow(clippy::too_many_arguments)]
fn fit(
    trajectory: &Trajectory,
    seed: u64,
    alpha: Option<Vec<f64>>,
    mu_points: usize,
    sigma_points: usize,
    cells: usize,
    sims_per_cell: usize,
    sims_per_step: Option<usize>,
) -> PyResult<FitResult> {
    let d = LambdaGrid::default();
    let budget = SimBudget {
        lambda_grid: LambdaGrid::log_spaced(
            d.lambdas[0],
            d.lambdas[d.lambdas.len() - 1],
            cells,
            sims_per_cell,
        ),
        start: match sims_per_step {
            Some(n) => StartLaw::Conditional { sims_per_step: n },
            None => StartLaw::Stationary,
        },
    };
    let spec = GridSpec {
        mu_points,
        sigma_points,
        ..GridSpec::default()
    };
    let traj = &trajectory.inner;
    let result = match alpha {
        Some(a) => {
            let a = AlphaVector::new(a).map_err(err)?;
            let grid = inference::posterior_grid_for_trajectory(traj, &a, &spec, &budget, seed)
                .map_err(err)?;
            inference::fit(&grid)
        }
        None => {
            let cfg = PipelineConfig {
                grid: spec,
                budget,
                ..PipelineConfig::default()
            };
            flow::fit_trajectory(traj, &cfg, seed).map_err(err)?.fit
        }
    };
    Ok((&result).into())
}

/// Lowercased alphabetic tokens, metadata lines dropped.
#[pyfunction]
#[pyo3(signature = (text, metadata_patterns=Vec::new(), strip_accents=false))]
fn clean_text(
    text: &str,
    metadata_patterns: Vec<String>,
    strip_accents: bool,
) -> PyResult<Vec<String>> {
    let opts = CleanOptions {
        strip_accents,
        metadata_patterns,
    };
    Ok(corpus::clean_text(text, &opts).map_err(err)?.tokens)
}

#[pyfunction]
fn drop_top_words(tokens: Vec<String>, n: usize) -> Vec<String> {
    corpus::drop_top_words(&TokenStream::new("py", tokens), n).tokens
}

#[pyfunction]
fn chunk(tokens: Vec<String>, k: usize) -> PyResult<Vec<Vec<String>>> {
    let spec = ChunkingSpec::new(k).map_err(err)?;
    Ok(corpus::chunk(&TokenStream::new("py", tokens), spec)
        .map_err(err)?
        .chunks)
}

/// Depth statistics of a thread given as JSON text.
#[pyfunction]
#[pyo3(signature = (json, min_depth=2))]
fn thread_stats(json: &str, min_depth: usize) -> PyResult<(Vec<usize>, f64, f64)> {
    let tree = corpus::parse_thread(json.as_bytes()).map_err(err)?;
    let h = trees::depth_distribution(&tree);
    Ok((
        h.counts.clone(),
        trees::average_depth(&h).map_err(err)?,
        trees::nesting_fraction(&h, min_depth).map_err(err)?,
    ))
}

/// `(slope, intercept, r_squared)`.
#[pyfunction]
fn ols_regression(x: Vec<f64>, y: Vec<f64>) -> PyResult<(f64, f64, f64)> {
    let r = trees::ols_regression(&x, &y).map_err(err)?;
    Ok((r.slope, r.intercept, r.r_squared))
}

#[pymodule]
#[pyo3(name = "levytopic")]
fn levytopic_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Trajectory>()?;
    m.add_class::<FitResult>()?;
    m.add_function(wrap_pyfunction!(kl_divergence, m)?)?;
    m.add_function(wrap_pyfunction!(sample_dirichlet, m)?)?;
    m.add_function(wrap_pyfunction!(lognormal_quantile, m)?)?;
    m.add_function(wrap_pyfunction!(lambda_range, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_trajectory, m)?)?;
    m.add_function(wrap_pyfunction!(density_grid, m)?)?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(clean_text, m)?)?;
    m.add_function(wrap_pyfunction!(drop_top_words, m)?)?;
    m.add_function(wrap_pyfunction!(chunk, m)?)?;
    m.add_function(wrap_pyfunction!(thread_stats, m)?)?;
    m.add_function(wrap_pyfunction!(ols_regression, m)?)?;
    Ok(())
}

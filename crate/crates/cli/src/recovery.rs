//! Parameter recovery on trajectories simulated from the model itself.

use levytopic::flow::shuffle_null;
use levytopic::inference::{fit, posterior_grid_for_trajectory, FitResult, GridSpec, SimBudget};
use levytopic::levy::{simulate_trajectory, Trajectory};
use levytopic::rng::{derive_seed, SimRng};
use levytopic::simplex::{AlphaVector, LevyParams};
use serde::{Deserialize, Serialize};

use crate::config::RecoveryConfig;
use crate::error::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveryCase {
    pub mu_true: f64,
    pub sigma_true: f64,
    pub tolerance: f64,
    pub fit: FitResult,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NullCheck {
    pub mu_unshuffled: f64,
    pub sd_unshuffled: f64,
    pub mu_shuffled: f64,
    pub sd_shuffled: f64,
    pub exp_mu_shuffled: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub n_topics: usize,
    pub alpha: f64,
    pub points: usize,
    pub cases: Vec<RecoveryCase>,
    pub null: NullCheck,
}

impl RecoveryReport {
    pub fn pass(&self) -> bool {
        self.cases.iter().all(|c| c.pass) && self.null.pass
    }
}

/// The two truth settings and their tolerances.
pub const CASES: [(f64, f64, f64); 2] = [(2.0, 0.8, 0.2), (0.0, 1.5, 0.3)];

pub fn simulate_case(
    cfg: &RecoveryConfig,
    params: &LevyParams,
    seed: u64,
) -> Result<(AlphaVector, Trajectory), CliError> {
    let alpha = AlphaVector::symmetric(cfg.n_topics, cfg.alpha)
        .map_err(|e| CliError::Config(format!("simulate.recovery: {e}")))?;
    let traj = simulate_trajectory(&alpha, params, cfg.points, &mut SimRng::new(seed))
        .map_err(|e| CliError::Config(format!("simulate.recovery: {e}")))?;
    Ok((alpha, traj))
}

fn fit_with(
    traj: &Trajectory,
    alpha: &AlphaVector,
    spec: &GridSpec,
    budget: &SimBudget,
    seed: u64,
) -> Result<FitResult, CliError> {
    let grid = posterior_grid_for_trajectory(traj, alpha, spec, budget, seed)
        .map_err(|e| CliError::data("recovery", e))?;
    Ok(fit(&grid))
}

/// Fits simulated trajectories with the generating alpha held known, then
/// refits the first one with its chunk order shuffled.
pub fn run_recovery(
    cfg: &RecoveryConfig,
    spec: &GridSpec,
    budget: &SimBudget,
    seed: u64,
) -> Result<RecoveryReport, CliError> {
    let mut cases = Vec::new();
    let mut first = None;
    for (i, &(mu, sigma, tol)) in CASES.iter().enumerate() {
        let params = LevyParams::new(mu, sigma).expect("valid truth");
        let (alpha, traj) = simulate_case(
            cfg,
            &params,
            derive_seed(seed, &format!("recovery/{i}/path")),
        )?;
        let f = fit_with(
            &traj,
            &alpha,
            spec,
            budget,
            derive_seed(seed, &format!("recovery/{i}/fit")),
        )?;
        let pass = (f.mu_hat - mu).abs() <= tol && (f.sigma_hat - sigma).abs() <= tol;
        if i == 0 {
            first = Some((alpha, traj, f.clone()));
        }
        cases.push(RecoveryCase {
            mu_true: mu,
            sigma_true: sigma,
            tolerance: tol,
            fit: f,
            pass,
        });
    }
    let (alpha, traj, base) = first.expect("at least one case");
    let shuffled = shuffle_null(&traj, derive_seed(seed, "recovery/shuffle"))
        .map_err(|e| CliError::data("recovery", e))?;
    let sh = fit_with(
        &shuffled,
        &alpha,
        spec,
        budget,
        derive_seed(seed, "recovery/0/fit"),
    )?;
    let sd = base.sd_mu.max(sh.sd_mu);
    let null = NullCheck {
        mu_unshuffled: base.mu_hat,
        sd_unshuffled: base.sd_mu,
        mu_shuffled: sh.mu_hat,
        sd_shuffled: sh.sd_mu,
        exp_mu_shuffled: sh.mu_hat.exp(),
        pass: sh.mu_hat.exp() < 0.5 && sh.mu_hat < base.mu_hat - 2.0 * sd,
    };
    Ok(RecoveryReport {
        n_topics: cfg.n_topics,
        alpha: cfg.alpha,
        points: cfg.points,
        cases,
        null,
    })
}

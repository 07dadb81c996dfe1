//! Comment-tree shape statistics and a small least-squares helper.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::CommentTree;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TreeError {
    #[error("no comments")]
    EmptyTree,
    #[error("predictor is constant")]
    ConstantPredictor,
    #[error("need at least 3 paired points, got {0}")]
    TooFewPoints(usize),
    #[error("x and y lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
}

/// Comment counts by depth. Index 0 holds depth 1 (top-level comments).
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DepthHistogram {
    pub counts: Vec<usize>,
}

impl DepthHistogram {
    pub fn count_at(&self, depth: usize) -> usize {
        depth
            .checked_sub(1)
            .and_then(|i| self.counts.get(i))
            .copied()
            .unwrap_or(0)
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn max_depth(&self) -> usize {
        self.counts.len()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("depth,count\n");
        for (i, c) in self.counts.iter().enumerate() {
            out.push_str(&format!("{},{}\n", i + 1, c));
        }
        out
    }
}

pub fn depth_distribution(tree: &CommentTree) -> DepthHistogram {
    let mut counts = Vec::new();
    for d in tree.comment_depths() {
        if counts.len() < d {
            counts.resize(d, 0);
        }
        counts[d - 1] += 1;
    }
    DepthHistogram { counts }
}

/// Share of comments at depth `min_depth` or deeper. Replies to other
/// comments are those with depth >= 2.
pub fn nesting_fraction(hist: &DepthHistogram, min_depth: usize) -> Result<f64, TreeError> {
    let total = hist.total();
    if total == 0 {
        return Err(TreeError::EmptyTree);
    }
    let deep: usize = hist
        .counts
        .iter()
        .enumerate()
        .filter(|(i, _)| i + 1 >= min_depth)
        .map(|(_, c)| c)
        .sum();
    Ok(deep as f64 / total as f64)
}

pub fn average_depth(hist: &DepthHistogram) -> Result<f64, TreeError> {
    let total = hist.total();
    if total == 0 {
        return Err(TreeError::EmptyTree);
    }
    let sum: usize = hist
        .counts
        .iter()
        .enumerate()
        .map(|(i, c)| (i + 1) * c)
        .sum();
    Ok(sum as f64 / total as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionResult {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares of `y` on `x` with intercept.
pub fn ols_regression(x: &[f64], y: &[f64]) -> Result<RegressionResult, TreeError> {
    if x.len() != y.len() {
        return Err(TreeError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 3 {
        return Err(TreeError::TooFewPoints(x.len()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(TreeError::ConstantPredictor);
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let r_squared = if ss_tot == 0.0 {
        1.0
    } else {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    };
    Ok(RegressionResult {
        slope,
        intercept,
        r_squared,
    })
}

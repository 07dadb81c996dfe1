//! Probability-simplex numerics: points, KL surprise, Dirichlet and
//! log-normal sampling, and log-normal quantiles.
//!
//! Points keep their log-components next to the linear ones. Dirichlet draws
//! with small shape parameters routinely produce components far below the
//! smallest positive `f64`; holding them in log space keeps every KL
//! divergence between sampled points finite.

use std::fmt;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use crate::rng::SimRng;
use crate::special::{ln_gamma, normal_cdf, normal_quantile};

const SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimplexError {
    #[error("point is not on the simplex: {0}")]
    InvalidPoint(String),
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("infinite divergence: p[{index}] > 0 but q[{index}] = 0")]
    InfiniteDivergence { index: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// A point of the (N-1)-simplex: N nonnegative components summing to one.
#[derive(Clone, Debug, PartialEq)]
pub struct SimplexPoint {
    components: Vec<f64>,
    log: Vec<f64>,
}

impl SimplexPoint {
    pub fn new(components: Vec<f64>) -> Result<Self, SimplexError> {
        if components.is_empty() {
            return Err(SimplexError::InvalidPoint("no components".into()));
        }
        if let Some(bad) = components.iter().find(|c| !c.is_finite() || **c < 0.0) {
            return Err(SimplexError::InvalidPoint(format!("component {bad}")));
        }
        let sum: f64 = components.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(SimplexError::InvalidPoint(format!(
                "components sum to {sum}"
            )));
        }
        let log = components.iter().map(|c| c.ln()).collect();
        Ok(SimplexPoint { components, log })
    }

    /// Normalizes nonnegative weights with a positive total.
    pub fn from_weights(weights: &[f64]) -> Result<Self, SimplexError> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0 && total.is_finite()) || weights.iter().any(|w| *w < 0.0) {
            return Err(SimplexError::InvalidPoint(format!(
                "weights must be nonnegative with positive finite sum, got {total}"
            )));
        }
        Ok(Self::from_log_weights(
            &weights.iter().map(|w| w.ln()).collect::<Vec<_>>(),
        ))
    }

    /// Normalizes unnormalized log-weights (log-sum-exp).
    pub fn from_log_weights(log_weights: &[f64]) -> Self {
        let max = log_weights
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let lse = max
            + log_weights
                .iter()
                .map(|l| (l - max).exp())
                .sum::<f64>()
                .ln();
        let log: Vec<f64> = log_weights.iter().map(|l| l - lse).collect();
        let components = log.iter().map(|l| l.exp()).collect();
        SimplexPoint { components, log }
    }

    /// Rebuilds a point from already normalized log-components, as stored by
    /// [`SimplexPoint::log_components`].
    pub fn from_log_components(log: Vec<f64>) -> Result<Self, SimplexError> {
        if log.is_empty() || log.iter().any(|l| l.is_nan() || *l > 0.0) {
            return Err(SimplexError::InvalidPoint("bad log-components".into()));
        }
        let components: Vec<f64> = log.iter().map(|l| l.exp()).collect();
        let sum: f64 = components.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(SimplexError::InvalidPoint(format!(
                "components sum to {sum}"
            )));
        }
        Ok(SimplexPoint { components, log })
    }

    pub fn uniform(n: usize) -> Self {
        Self::from_log_weights(&vec![0.0; n])
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[f64] {
        &self.components
    }

    pub fn log_components(&self) -> &[f64] {
        &self.log
    }

    /// Same point with coordinates reordered: `out[i] = self[perm[i]]`.
    pub fn permuted(&self, perm: &[usize]) -> SimplexPoint {
        SimplexPoint {
            components: perm.iter().map(|&i| self.components[i]).collect(),
            log: perm.iter().map(|&i| self.log[i]).collect(),
        }
    }
}

/// Concentration vector of a Dirichlet distribution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaVector {
    alpha: Vec<f64>,
}

impl AlphaVector {
    pub fn new(alpha: Vec<f64>) -> Result<Self, SimplexError> {
        if alpha.len() < 2 {
            return Err(SimplexError::InvalidParameter(
                "Dirichlet needs at least two components".into(),
            ));
        }
        if let Some(bad) = alpha.iter().find(|a| !(a.is_finite() && **a > 0.0)) {
            return Err(SimplexError::InvalidParameter(format!(
                "alpha components must be positive, got {bad}"
            )));
        }
        Ok(AlphaVector { alpha })
    }

    pub fn symmetric(n: usize, value: f64) -> Result<Self, SimplexError> {
        Self::new(vec![value; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.alpha
    }

    pub fn dim(&self) -> usize {
        self.alpha.len()
    }

    /// A = sum of components.
    pub fn total(&self) -> f64 {
        self.alpha.iter().sum()
    }

    pub fn mean(&self) -> Vec<f64> {
        let a = self.total();
        self.alpha.iter().map(|x| x / a).collect()
    }

    /// Short content hash, used to tag simulation provenance.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for a in &self.alpha {
            h.update(a.to_le_bytes());
        }
        let digest = h.finalize();
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn permuted(&self, perm: &[usize]) -> AlphaVector {
        AlphaVector {
            alpha: perm.iter().map(|&i| self.alpha[i]).collect(),
        }
    }
}

/// Parameters of the log-normal focus distribution, `ln(lambda) ~ N(mu, sigma^2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevyParams {
    pub mu: f64,
    pub sigma: f64,
}

impl LevyParams {
    pub fn new(mu: f64, sigma: f64) -> Result<Self, SimplexError> {
        if !mu.is_finite() || !(sigma.is_finite() && sigma > 0.0) {
            return Err(SimplexError::InvalidParameter(format!(
                "need finite mu and sigma > 0, got ({mu}, {sigma})"
            )));
        }
        Ok(LevyParams { mu, sigma })
    }

    /// Recovers `(mu, sigma)` from a median and one other quantile, e.g. the
    /// 85% point of a reported lambda range.
    pub fn from_median_and_quantile(median: f64, q: f64, value: f64) -> Result<Self, SimplexError> {
        if !(median > 0.0 && value > 0.0) || !(q > 0.0 && q < 1.0) || q == 0.5 {
            return Err(SimplexError::InvalidParameter(format!(
                "cannot solve sigma from median {median}, q {q}, value {value}"
            )));
        }
        Self::new(median.ln(), (value / median).ln() / normal_quantile(q))
    }

    pub fn cdf(&self, lambda: f64) -> f64 {
        if lambda <= 0.0 {
            return 0.0;
        }
        normal_cdf((lambda.ln() - self.mu) / self.sigma)
    }
}

impl fmt::Display for LevyParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(mu={}, sigma={})", self.mu, self.sigma)
    }
}

/// Median and 15%/85% points of the focus distribution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaRange {
    pub median: f64,
    pub q15: f64,
    pub q85: f64,
}

/// KL(p || q) in bits. `p` is the current chunk, `q` the previous one.
pub fn kl_divergence(p: &SimplexPoint, q: &SimplexPoint) -> Result<f64, SimplexError> {
    if p.dim() != q.dim() {
        return Err(SimplexError::DimensionMismatch(p.dim(), q.dim()));
    }
    let mut acc = 0.0;
    for (i, (&pi, (&lp, &lq))) in p
        .components
        .iter()
        .zip(p.log.iter().zip(q.log.iter()))
        .enumerate()
    {
        if pi == 0.0 {
            continue;
        }
        if lq == f64::NEG_INFINITY {
            return Err(SimplexError::InfiniteDivergence { index: i });
        }
        acc += pi * (lp - lq);
    }
    Ok((acc / std::f64::consts::LN_2).max(0.0))
}

/// Log of one Gamma(shape, 1) draw.
///
/// Marsaglia-Tsang squeeze/rejection for shape >= 1. Smaller shapes use the
/// boost `G(a) = G(a + 1) * U^(1/a)`, applied in log space so that the result
/// stays representable even when the draw itself underflows.
pub fn sample_log_gamma(shape: f64, rng: &mut SimRng) -> f64 {
    debug_assert!(shape > 0.0);
    if shape < 1.0 {
        let u = rng.open_unit();
        return sample_log_gamma(shape + 1.0, rng) + u.ln() / shape;
    }
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let x: f64 = StandardNormal.sample(rng);
        let t = 1.0 + c * x;
        if t <= 0.0 {
            continue;
        }
        let v = t * t * t;
        let u = rng.open_unit();
        let x2 = x * x;
        if u < 1.0 - 0.0331 * x2 * x2 || u.ln() < 0.5 * x2 + d * (1.0 - v + v.ln()) {
            return d.ln() + v.ln();
        }
    }
}

/// One Dirichlet draw for arbitrary positive shapes.
pub fn sample_dirichlet_shapes(shapes: &[f64], rng: &mut SimRng) -> SimplexPoint {
    let logs: Vec<f64> = shapes.iter().map(|&a| sample_log_gamma(a, rng)).collect();
    SimplexPoint::from_log_weights(&logs)
}

pub fn sample_dirichlet(alpha: &AlphaVector, rng: &mut SimRng) -> SimplexPoint {
    sample_dirichlet_shapes(alpha.as_slice(), rng)
}

pub fn sample_lognormal(params: &LevyParams, rng: &mut SimRng) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    (params.mu + params.sigma * z).exp()
}

pub fn lognormal_quantile(params: &LevyParams, q: f64) -> Result<f64, SimplexError> {
    if !(q > 0.0 && q < 1.0) {
        return Err(SimplexError::InvalidParameter(format!(
            "quantile level must lie in (0, 1), got {q}"
        )));
    }
    if q == 0.5 {
        return Ok(params.mu.exp());
    }
    Ok((params.mu + params.sigma * normal_quantile(q)).exp())
}

pub fn lambda_range(params: &LevyParams) -> LambdaRange {
    LambdaRange {
        median: params.mu.exp(),
        q15: (params.mu + params.sigma * normal_quantile(0.15)).exp(),
        q85: (params.mu + params.sigma * normal_quantile(0.85)).exp(),
    }
}

/// Log density of Dir(alpha) at `x`.
pub fn dirichlet_ln_pdf(alpha: &[f64], x: &[f64]) -> f64 {
    let total: f64 = alpha.iter().sum();
    let mut acc = ln_gamma(total);
    for (&a, &xi) in alpha.iter().zip(x) {
        acc += (a - 1.0) * xi.ln() - ln_gamma(a);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(v: &[f64]) -> SimplexPoint {
        SimplexPoint::new(v.to_vec()).unwrap()
    }

    #[test]
    fn kl_hand_values() {
        let d = kl_divergence(&pt(&[0.5, 0.5]), &pt(&[0.25, 0.75])).unwrap();
        // 0.5*log2(2) + 0.5*log2(2/3)
        assert!((d - (1.0 + (2.0f64 / 3.0).log2()) * 0.5).abs() < 1e-15);
        assert!((d - 0.207_519).abs() < 1e-6);
        let d = kl_divergence(&pt(&[1.0, 0.0]), &pt(&[0.5, 0.5])).unwrap();
        assert!((d - 1.0).abs() < 1e-15);
        let p = pt(&[0.2, 0.3, 0.5]);
        assert_eq!(kl_divergence(&p, &p).unwrap(), 0.0);
    }

    #[test]
    fn kl_infinite_and_mismatch() {
        let err = kl_divergence(&pt(&[0.5, 0.5]), &pt(&[1.0, 0.0])).unwrap_err();
        assert_eq!(err, SimplexError::InfiniteDivergence { index: 1 });
        assert!(matches!(
            kl_divergence(&pt(&[0.5, 0.5]), &pt(&[0.2, 0.3, 0.5])),
            Err(SimplexError::DimensionMismatch(2, 3))
        ));
    }

    #[test]
    fn point_validation() {
        assert!(SimplexPoint::new(vec![0.5, 0.6]).is_err());
        assert!(SimplexPoint::new(vec![-0.1, 1.1]).is_err());
        assert!(SimplexPoint::new(vec![]).is_err());
        let p = SimplexPoint::from_weights(&[1.0, 3.0]).unwrap();
        assert!((p.components()[1] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn tiny_shapes_stay_finite_in_log_space() {
        let mut rng = SimRng::new(9);
        let a = sample_dirichlet_shapes(&[1e-3, 1e-3, 1e-3], &mut rng);
        let b = sample_dirichlet_shapes(&[1e-3, 1e-3, 1e-3], &mut rng);
        assert!(a.log_components().iter().all(|l| l.is_finite()));
        assert!(kl_divergence(&a, &b).unwrap().is_finite());
    }

    #[test]
    fn lognormal_median_is_exp_mu() {
        let p = LevyParams::new(8.11f64.ln(), 0.8).unwrap();
        assert_eq!(lognormal_quantile(&p, 0.5).unwrap(), 8.11f64.ln().exp());
        assert!(lognormal_quantile(&p, 0.0).is_err());
        assert!(lognormal_quantile(&p, 1.0).is_err());
    }

    #[test]
    fn hume_rows_reconstruct_fifteen_percent_point() {
        // median 8.11, 85% point 19.01 -> 15% point 3.46
        let p = LevyParams::from_median_and_quantile(8.11, 0.85, 19.01).unwrap();
        assert!((p.sigma - 0.8218).abs() < 2e-4);
        let r = lambda_range(&p);
        assert!((r.q15 - 3.46).abs() < 0.005);
        assert!((r.q85 - 19.01).abs() < 1e-9);
        // median 0.81, 85% point 4.23 -> 15% point about 0.155
        let p = LevyParams::from_median_and_quantile(0.81, 0.85, 4.23).unwrap();
        assert!((p.sigma - 1.594).abs() < 1e-3);
        assert!((lognormal_quantile(&p, 0.15).unwrap() - 0.155).abs() < 0.002);
    }

    #[test]
    fn dirichlet_pdf_uniform_on_two_simplex() {
        // Dir(1,1,1) has constant density 2 on the 2-simplex.
        let v = dirichlet_ln_pdf(&[1.0, 1.0, 1.0], &[0.2, 0.3, 0.5]);
        assert!((v - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn invalid_params() {
        assert!(LevyParams::new(0.0, 0.0).is_err());
        assert!(LevyParams::new(f64::NAN, 1.0).is_err());
        assert!(AlphaVector::new(vec![1.0]).is_err());
        assert!(AlphaVector::new(vec![1.0, 0.0]).is_err());
    }
}

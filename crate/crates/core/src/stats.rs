//! Population statistics and norms for paired real sequences.
//!
//! Everything here divides by `N` (no Bessel correction) and uses a two-pass
//! scheme: means first, then centered moments.

use std::ops::Deref;

use serde::Serialize;

use crate::error::{Error, Result};

/// An ordered, nonempty vector of finite samples.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Sequence(Vec<f64>);

impl Sequence {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        check_values(&values)?;
        Ok(Sequence(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for Sequence {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl AsRef<[f64]> for Sequence {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for Sequence {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Sequence::new(values)
    }
}

pub(crate) fn check_values(s: &[f64]) -> Result<()> {
    if s.is_empty() {
        return Err(Error::invalid("empty sequence"));
    }
    if let Some(i) = s.iter().position(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("non-finite value at index {i}")));
    }
    Ok(())
}

pub(crate) fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    check_values(x)?;
    check_values(y)?;
    if x.len() != y.len() {
        return Err(Error::invalid(format!(
            "length mismatch: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    Ok(())
}

pub fn mean(s: &[f64]) -> Result<f64> {
    check_values(s)?;
    Ok(s.iter().sum::<f64>() / s.len() as f64)
}

pub fn population_variance(s: &[f64]) -> Result<f64> {
    let mu = mean(s)?;
    Ok(s.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / s.len() as f64)
}

pub fn covariance(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    let mx = mean(x)?;
    let my = mean(y)?;
    let s: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    Ok(s / x.len() as f64)
}

/// Pearson's ρ. Errors when either sequence is constant.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    let cov = covariance(x, y)?;
    let vx = population_variance(x)?;
    let vy = population_variance(y)?;
    if vx == 0.0 || vy == 0.0 {
        return Err(Error::degenerate("pearson requires two nonconstant sequences"));
    }
    Ok((cov / (vx.sqrt() * vy.sqrt())).clamp(-1.0, 1.0))
}

/// Lin's concordance correlation coefficient
/// `2σ_XY / (σ_X² + σ_Y² + (μ_X − μ_Y)²)`.
///
/// Exactly zero when the covariance vanishes; an error only when both inputs
/// are constant and equal, i.e. the denominator is zero.
pub fn ccc(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    let mx = mean(x)?;
    let my = mean(y)?;
    let n = x.len() as f64;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxx += da * da;
        syy += db * db;
        sxy += da * db;
    }
    if sxx == 0.0 && syy == 0.0 {
        return Err(Error::degenerate("ccc undefined for two constant sequences"));
    }
    if sxy == 0.0 {
        return Ok(0.0);
    }
    let gap = mx - my;
    let denom = sxx / n + syy / n + gap * gap;
    Ok((2.0 * sxy / n / denom).clamp(-1.0, 1.0))
}

/// `(Σ|e_i|^p)^(1/p)`, computed after scaling by the largest magnitude so
/// large `p` neither overflows nor underflows.
pub fn lp_norm(e: &[f64], p: f64) -> Result<f64> {
    check_values(e)?;
    if !(p > 0.0) || !p.is_finite() {
        return Err(Error::invalid(format!("norm order must be positive, got {p}")));
    }
    let m = e.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if m == 0.0 {
        return Ok(0.0);
    }
    let s: f64 = e.iter().map(|v| (v.abs() / m).powf(p)).sum();
    Ok(m * s.powf(1.0 / p))
}

pub fn mse(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    Ok(x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / x.len() as f64)
}

pub fn mae(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    Ok(x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum::<f64>() / x.len() as f64)
}

/// Mean k-powered error `Σ|x_i − y_i|^k / N`.
pub fn mke(x: &[f64], y: &[f64], k: f64) -> Result<f64> {
    check_pair(x, y)?;
    if !(k > 0.0) || !k.is_finite() {
        return Err(Error::invalid(format!("k must be positive, got {k}")));
    }
    let n = x.len() as f64;
    let s: f64 = if k == 2.0 {
        x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
    } else if k == 1.0 {
        x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum()
    } else {
        x.iter().zip(y).map(|(a, b)| (a - b).abs().powf(k)).sum()
    };
    Ok(s / n)
}

/// Every pairwise statistic of `(x, y)`.
///
/// Quantities that need a nonzero standard deviation (`pearson`, `c_b` and the
/// two penalties) are `None` when either input is constant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairStats {
    pub n: usize,
    pub mu_x: f64,
    pub mu_y: f64,
    pub var_x: f64,
    pub var_y: f64,
    pub cov_xy: f64,
    pub pearson: Option<f64>,
    pub c_b: Option<f64>,
    pub ccc: f64,
    pub mse: f64,
    pub mae: f64,
    /// `(μ_X − μ_Y) / sqrt(σ_X σ_Y)`
    pub shift_penalty: Option<f64>,
    /// `σ_X / σ_Y`
    pub scale_penalty: Option<f64>,
}

impl PairStats {
    pub fn compute(x: &[f64], y: &[f64]) -> Result<Self> {
        check_pair(x, y)?;
        let mu_x = mean(x)?;
        let mu_y = mean(y)?;
        let var_x = population_variance(x)?;
        let var_y = population_variance(y)?;
        let cov_xy = covariance(x, y)?;
        let ccc = ccc(x, y)?;
        let (sx, sy) = (var_x.sqrt(), var_y.sqrt());
        let nonconstant = var_x > 0.0 && var_y > 0.0;
        let pearson = nonconstant.then(|| (cov_xy / (sx * sy)).clamp(-1.0, 1.0));
        let scale_penalty = nonconstant.then(|| sx / sy);
        let shift_penalty = nonconstant.then(|| (mu_x - mu_y) / (sx * sy).sqrt());
        let c_b = match (scale_penalty, shift_penalty) {
            (Some(v), Some(u)) => Some(2.0 / (v + 1.0 / v + u * u)),
            _ => None,
        };
        Ok(PairStats {
            n: x.len(),
            mu_x,
            mu_y,
            var_x,
            var_y,
            cov_xy,
            pearson,
            c_b,
            ccc,
            mse: mse(x, y)?,
            mae: mae(x, y)?,
            shift_penalty,
            scale_penalty,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn mean_examples() {
        assert_eq!(mean(&[1.0, 2.0, 3.0]).unwrap(), 2.0);
        assert_eq!(mean(&[0.0; 4]).unwrap(), 0.0);
        assert_relative_eq!(mean(&[0.1, 0.2, 0.7]).unwrap(), 1.0 / 3.0, max_relative = 1e-15);
        assert!(matches!(mean(&[]), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn variance_examples() {
        assert_eq!(population_variance(&[4.5, 4.5, 4.5]).unwrap(), 0.0);
        assert_relative_eq!(population_variance(&[1.0, 2.0, 3.0]).unwrap(), 2.0 / 3.0);
        assert_eq!(population_variance(&[-1.0, 1.0]).unwrap(), 1.0);
        assert!(population_variance(&[]).is_err());
    }

    #[test]
    fn covariance_examples() {
        let x = [1.0, 2.0, 3.0];
        assert_relative_eq!(covariance(&x, &x).unwrap(), 2.0 / 3.0);
        assert_relative_eq!(covariance(&x, &[3.0, 2.0, 1.0]).unwrap(), -2.0 / 3.0);
        assert_eq!(covariance(&x, &[5.0, 5.0, 5.0]).unwrap(), 0.0);
        assert!(matches!(covariance(&x, &[1.0]), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn pearson_examples() {
        let x = [1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 3.0).collect();
        assert_relative_eq!(pearson(&x, &y).unwrap(), 1.0, max_relative = 1e-15);
        assert_relative_eq!(pearson(&x, &[-1.0, -2.0, -3.0]).unwrap(), -1.0, max_relative = 1e-15);
        assert_relative_eq!(
            pearson(&[1.0, 2.0, 3.0, 4.0], &[1.0, 2.0, 4.0, 3.0]).unwrap(),
            0.8,
            max_relative = 1e-14
        );
        assert!(matches!(pearson(&x, &[1.0, 1.0, 1.0]), Err(Error::DegenerateVariance(_))));
    }

    #[test]
    fn ccc_examples() {
        let x = [1.0, 2.0, 3.0];
        assert_eq!(ccc(&x, &x).unwrap(), 1.0);
        assert_relative_eq!(ccc(&[1.0, 0.0, -1.0], &[-1.0, 0.0, 1.0]).unwrap(), -1.0);
        assert_relative_eq!(ccc(&x, &[2.0, 3.0, 4.0]).unwrap(), 4.0 / 7.0, max_relative = 1e-15);
        // zero covariance with a positive denominator is exactly zero
        assert_eq!(ccc(&x, &[2.0, 2.0, 2.0]).unwrap(), 0.0);
        assert!(matches!(ccc(&[1.0, 1.0], &[1.0, 1.0]), Err(Error::DegenerateVariance(_))));
        assert!(matches!(ccc(&[1.0, 1.0], &[2.0, 2.0]), Err(Error::DegenerateVariance(_))));
    }

    #[test]
    fn norm_examples() {
        assert_relative_eq!(lp_norm(&[1.0, 1.0, 1.0], 2.0).unwrap(), 3f64.sqrt(), max_relative = 1e-15);
        assert_relative_eq!(lp_norm(&[3.0, -4.0], 2.0).unwrap(), 5.0, max_relative = 1e-15);
        assert_relative_eq!(lp_norm(&[1.0, -2.0, 3.0], 1.0).unwrap(), 6.0, max_relative = 1e-15);
        assert_eq!(lp_norm(&[0.0, 0.0], 3.0).unwrap(), 0.0);
        assert!(lp_norm(&[1.0], 0.0).is_err());
        assert!(lp_norm(&[1.0], -1.0).is_err());
        // no overflow for a large order
        assert_relative_eq!(lp_norm(&[1e300, 1e300], 8.0).unwrap(), 1e300 * 2f64.powf(0.125));
    }

    #[test]
    fn error_metric_examples() {
        let x = [1.0, 2.0, 3.0];
        assert_eq!(mse(&x, &[2.0, 3.0, 4.0]).unwrap(), 1.0);
        assert_eq!(mse(&x, &x).unwrap(), 0.0);
        assert_eq!(mae(&x, &x).unwrap(), 0.0);
        assert_eq!(mke(&x, &x, 3.0).unwrap(), 0.0);
        assert_eq!(mke(&[1.0, 2.0], &[0.0, 0.0], 4.0).unwrap(), 8.5);
        assert!(mke(&x, &x, 0.0).is_err());
        assert!(mse(&x, &[1.0]).is_err());
    }

    #[test]
    fn non_finite_rejected() {
        assert!(Sequence::new(vec![1.0, f64::NAN]).is_err());
        assert!(Sequence::new(vec![]).is_err());
        assert!(mean(&[1.0, f64::INFINITY]).is_err());
    }

    #[test]
    fn pair_stats_components() {
        let x = [1.0, 2.0, 3.0, 5.0];
        let y = [0.5, 2.5, 2.0, 6.0];
        let ps = PairStats::compute(&x, &y).unwrap();
        let rho = ps.pearson.unwrap();
        assert_relative_eq!(ps.ccc, rho * ps.c_b.unwrap(), max_relative = 1e-13);
        assert!(ps.c_b.unwrap() > 0.0 && ps.c_b.unwrap() <= 1.0);
        let constant = PairStats::compute(&x, &[1.0; 4]).unwrap();
        assert!(constant.pearson.is_none() && constant.c_b.is_none());
        assert_eq!(constant.ccc, 0.0);
    }
}

//! The MSE ↔ ρc relation and the ρc extremes reachable at a fixed MSE.
//!
//! For any pair, `σ_X² + σ_Y² + (μ_X − μ_Y)² = MSE + 2σ_XY`, so
//! `ρc = 2σ_XY / (MSE + 2σ_XY) = (1 + MSE / (2σ_XY))⁻¹`. Holding the gold
//! standard and the MSE fixed, ρc is largest when the errors are a positive
//! multiple of the centered gold and smallest when they are a negative
//! multiple. With `x = sqrt(MSE / σ_G²)` the two extremes are `Ψ(x)` and `ψ(x)`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::stats::{self, Sequence};

/// `ρc = 2·cov / (mse + 2·cov)`.
///
/// Zero covariance with a positive MSE gives exactly 0. The only failure is a
/// vanishing denominator, where the fraction itself is undefined.
pub fn ccc_from_mse_cov(mse: f64, cov: f64) -> Result<f64> {
    if !mse.is_finite() || !cov.is_finite() {
        return Err(Error::invalid("mse and covariance must be finite"));
    }
    if mse < 0.0 {
        return Err(Error::invalid(format!("mse must be nonnegative, got {mse}")));
    }
    let denom = mse + 2.0 * cov;
    if denom == 0.0 {
        return Err(Error::singular("mse + 2·cov = 0"));
    }
    Ok(2.0 * cov / denom)
}

/// `σ_X² + σ_Y² + (μ_X − μ_Y)² − (MSE + 2σ_XY)`; zero up to rounding.
pub fn variance_identity_residual(x: &[f64], y: &[f64]) -> Result<f64> {
    let mx = stats::mean(x)?;
    let my = stats::mean(y)?;
    let left = stats::population_variance(x)? + stats::population_variance(y)? + (mx - my).powi(2);
    let right = stats::mse(x, y)? + 2.0 * stats::covariance(x, y)?;
    Ok(left - right)
}

/// `Υ(t) = 2t / (1 + t²)`
pub fn upsilon(t: f64) -> f64 {
    2.0 * t / (1.0 + t * t)
}

/// Upper ρc envelope `Ψ(x) = Υ(1 + x)`.
pub fn psi_upper(x: f64) -> f64 {
    upsilon(1.0 + x)
}

/// Lower ρc envelope `ψ(x) = Υ(1 − x)`.
pub fn psi_lower(x: f64) -> f64 {
    upsilon(1.0 - x)
}

/// A gold standard together with its deviations from the mean.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CenteredGold {
    pub gold: Sequence,
    pub mean: f64,
    pub centered: Vec<f64>,
    pub var_g: f64,
}

impl CenteredGold {
    pub fn new(gold: &[f64]) -> Result<Self> {
        let mean = stats::mean(gold)?;
        let centered: Vec<f64> = gold.iter().map(|g| g - mean).collect();
        let var_g = centered.iter().map(|c| c * c).sum::<f64>() / gold.len() as f64;
        if var_g == 0.0 {
            return Err(Error::degenerate("gold standard is constant"));
        }
        Ok(CenteredGold {
            gold: Sequence::new(gold.to_vec())?,
            mean,
            centered,
            var_g,
        })
    }

    pub fn len(&self) -> usize {
        self.centered.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centered.is_empty()
    }

    pub fn sigma(&self) -> f64 {
        self.var_g.sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundsResult {
    /// `sqrt(mse / σ_G²)`
    pub x_param: f64,
    pub ccc_max: f64,
    pub ccc_min: f64,
    /// Errors (prediction − gold) attaining `ccc_max`.
    pub err_max: Sequence,
    /// Errors (prediction − gold) attaining `ccc_min`.
    pub err_min: Sequence,
}

pub fn bounds_given_mse(gold: &CenteredGold, mse: f64) -> Result<BoundsResult> {
    if !mse.is_finite() || mse < 0.0 {
        return Err(Error::invalid(format!("mse must be finite and nonnegative, got {mse}")));
    }
    let x = (mse / gold.var_g).sqrt();
    let err_max: Vec<f64> = gold.centered.iter().map(|c| x * c).collect();
    let err_min: Vec<f64> = gold.centered.iter().map(|c| -x * c).collect();
    Ok(BoundsResult {
        x_param: x,
        ccc_max: psi_upper(x),
        ccc_min: psi_lower(x),
        err_max: Sequence::new(err_max)?,
        err_min: Sequence::new(err_min)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnvelopeRow {
    pub x: f64,
    pub psi_upper: f64,
    pub psi_lower: f64,
}

/// `steps` uniformly spaced rows on `[0, x_max]`; a single row when `x_max = 0`.
pub fn region_data_mse(x_max: f64, steps: usize) -> Result<Vec<EnvelopeRow>> {
    let xs = linspace(x_max, steps)?;
    Ok(xs
        .into_iter()
        .map(|x| EnvelopeRow {
            x,
            psi_upper: psi_upper(x),
            psi_lower: psi_lower(x),
        })
        .collect())
}

pub(crate) fn linspace(x_max: f64, steps: usize) -> Result<Vec<f64>> {
    if steps < 2 {
        return Err(Error::invalid("steps must be at least 2"));
    }
    if !x_max.is_finite() || x_max < 0.0 {
        return Err(Error::invalid(format!("x_max must be finite and nonnegative, got {x_max}")));
    }
    if x_max == 0.0 {
        return Ok(vec![0.0]);
    }
    let last = (steps - 1) as f64;
    Ok((0..steps).map(|i| x_max * i as f64 / last).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn mapping_examples() {
        assert_eq!(ccc_from_mse_cov(0.0, 0.3).unwrap(), 1.0);
        assert_eq!(ccc_from_mse_cov(1.0, 0.5).unwrap(), 0.5);
        let g = [1.0, 2.0, 3.0];
        let p = [2.0, 3.0, 4.0];
        let via_map =
            ccc_from_mse_cov(stats::mse(&g, &p).unwrap(), stats::covariance(&g, &p).unwrap()).unwrap();
        assert_relative_eq!(via_map, 4.0 / 7.0, max_relative = 1e-15);
        assert_relative_eq!(via_map, stats::ccc(&g, &p).unwrap(), max_relative = 1e-15);
        assert_eq!(ccc_from_mse_cov(2.0, 0.0).unwrap(), 0.0);
        assert!(matches!(ccc_from_mse_cov(2.0, -1.0), Err(Error::Singularity(_))));
        assert!(matches!(ccc_from_mse_cov(-1.0, 1.0), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn identity_residual_examples() {
        let x = [1.0, 2.0, 3.0];
        assert_eq!(variance_identity_residual(&x, &x).unwrap(), 0.0);
        assert!(variance_identity_residual(&x, &[3.0, 1.0, 2.0]).unwrap().abs() < 1e-15);
    }

    #[test]
    fn envelope_anchor_points() {
        assert_eq!(psi_upper(0.0), 1.0);
        assert_eq!(psi_lower(0.0), 1.0);
        assert_relative_eq!(psi_upper(1.0), 0.8, max_relative = 1e-15);
        assert_relative_eq!(psi_upper(2.0), 0.6, max_relative = 1e-15);
        assert_eq!(psi_lower(1.0), 0.0);
        assert_eq!(psi_lower(2.0), -1.0);
        // 2(1 − 1.2)/(1 + 0.04) and 2(2.2)/(1 + 4.84)
        assert_relative_eq!(psi_lower(1.2), -0.4 / 1.04, max_relative = 1e-14);
        assert_relative_eq!(psi_upper(1.2), 4.4 / 5.84, max_relative = 1e-14);
        assert!((psi_lower(1.2) + 0.3846).abs() < 1e-4);
        assert!((psi_upper(1.2) - 0.7534).abs() < 1e-4);
    }

    #[test]
    fn bounds_examples() {
        let gold = CenteredGold::new(&[1.0, 2.0, 3.0]).unwrap();
        let zero = bounds_given_mse(&gold, 0.0).unwrap();
        assert_eq!((zero.ccc_max, zero.ccc_min), (1.0, 1.0));
        assert!(zero.err_max.iter().chain(zero.err_min.iter()).all(|e| *e == 0.0));

        let b = bounds_given_mse(&gold, gold.var_g).unwrap();
        assert_relative_eq!(b.ccc_max, 0.8, max_relative = 1e-15);
        assert!(b.ccc_min.abs() < 1e-15);
        let pred: Vec<f64> = gold.gold.iter().zip(b.err_max.iter()).map(|(g, e)| g + e).collect();
        for (p, want) in pred.iter().zip([0.0, 2.0, 4.0]) {
            assert_relative_eq!(*p, want, epsilon = 1e-15);
        }
        assert_relative_eq!(stats::ccc(&gold.gold, &pred).unwrap(), 0.8, max_relative = 1e-15);

        assert!(matches!(CenteredGold::new(&[2.0, 2.0]), Err(Error::DegenerateVariance(_))));
        assert!(matches!(bounds_given_mse(&gold, -1.0), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn region_examples() {
        let rows = region_data_mse(2.0, 3).unwrap();
        let xs: Vec<f64> = rows.iter().map(|r| r.x).collect();
        assert_eq!(xs, vec![0.0, 1.0, 2.0]);
        let up = [1.0, 0.8, 0.6];
        let lo = [1.0, 0.0, -1.0];
        for (r, (u, l)) in rows.iter().zip(up.iter().zip(lo)) {
            assert_relative_eq!(r.psi_upper, *u, max_relative = 1e-15);
            assert_relative_eq!(r.psi_lower, l, epsilon = 1e-15);
        }
        let single = region_data_mse(0.0, 2).unwrap();
        assert_eq!(single, vec![EnvelopeRow { x: 0.0, psi_upper: 1.0, psi_lower: 1.0 }]);
        assert!(region_data_mse(1.0, 1).is_err());
    }

    #[test]
    fn upper_envelope_decreases() {
        // finite-difference slope of Ψ is negative everywhere on x > 0
        let h = 1e-6;
        for row in region_data_mse(10.0, 200).unwrap().windows(2) {
            assert!(row[1].psi_upper < row[0].psi_upper);
            let x = row[1].x;
            let slope = (psi_upper(x + h) - psi_upper(x - h)) / (2.0 * h);
            assert!(slope < 0.0, "slope {slope} at {x}");
        }
    }
}

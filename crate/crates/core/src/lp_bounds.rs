//! ρc envelopes when the L_k norm of the errors, rather than the MSE, is fixed.
//!
//! For `0 < r < p` the norms of an N-vector satisfy
//! `L_p ≤ L_r ≤ N^((p−r)/(pr)) · L_p`. Fixing `L_k` therefore pins `sqrt(MSE)`
//! only to a band `[√MSE_min, θ_max·√MSE_min]`, and the lower ρc envelope
//! widens from `ψ(x)` to `min_θ ψ(θx)`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::mapping::{linspace, psi_lower, psi_upper};
use crate::stats::lp_norm;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormSandwich {
    /// `L_p`
    pub lo: f64,
    /// `L_r`
    pub mid: f64,
    /// `N^((p−r)/(pr)) · L_p`
    pub hi: f64,
}

/// Hölder sandwich of an error vector for `0 < r < p`.
///
/// Rounding can push an equality case out of order by an ulp or two; such
/// values are snapped so that `lo ≤ mid ≤ hi` always holds on the result.
pub fn norm_sandwich(e: &[f64], r: f64, p: f64) -> Result<NormSandwich> {
    if !(r > 0.0) || !(r < p) || !p.is_finite() {
        return Err(Error::invalid(format!("need 0 < r < p, got r={r}, p={p}")));
    }
    let n = e.len() as f64;
    let lo = lp_norm(e, p)?;
    let mid = lp_norm(e, r)?;
    let hi = n.powf((p - r) / (p * r)) * lo;
    let snap = 1e-12 * hi.max(f64::MIN_POSITIVE);
    let mid = if mid < lo && lo - mid <= snap { lo } else { mid };
    let mid = if mid > hi && mid - hi <= snap { hi } else { mid };
    Ok(NormSandwich { lo, mid, hi })
}

/// `N^(|k−2|/(2k))`; exactly 1 for `k = 2`.
pub fn theta_max(k: f64, n: usize) -> f64 {
    if k == 2.0 {
        return 1.0;
    }
    (n as f64).powf((k - 2.0).abs() / (2.0 * k))
}

/// Denominator turning `L_k` into `sqrt(MSE_min)`: `√N` for `k ≥ 2`,
/// `N^(1/k)` for `k < 2`. Both agree at `k = 2`.
pub fn mse_min_denominator(k: f64, n: usize) -> f64 {
    let n = n as f64;
    if k >= 2.0 {
        n.sqrt()
    } else {
        n.powf(1.0 / k)
    }
}

/// Feasible band of `sqrt(MSE)` at a fixed `L_k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThetaRange {
    pub k: f64,
    pub n: usize,
    pub theta_min: f64,
    pub theta_max: f64,
    pub mse_min_sqrt: f64,
    pub mse_max_sqrt: f64,
}

pub fn theta_range(k: f64, n: usize, lk: f64) -> Result<ThetaRange> {
    check_k_n(k, n)?;
    if !lk.is_finite() || lk < 0.0 {
        return Err(Error::invalid(format!("L_k must be finite and nonnegative, got {lk}")));
    }
    let tmax = theta_max(k, n);
    let lo = lk / mse_min_denominator(k, n);
    Ok(ThetaRange {
        k,
        n,
        theta_min: 1.0,
        theta_max: tmax,
        mse_min_sqrt: lo,
        mse_max_sqrt: tmax * lo,
    })
}

/// The θ of a concrete error vector: `sqrt(MSE) / sqrt(MSE_min)`.
pub fn theta_of(e: &[f64], k: f64) -> Result<f64> {
    let n = e.len();
    check_k_n(k, n)?;
    let lk = lp_norm(e, k)?;
    if lk == 0.0 {
        return Err(Error::invalid("theta undefined for a zero error vector"));
    }
    let rmse = lp_norm(e, 2.0)? / (n as f64).sqrt();
    Ok(rmse * mse_min_denominator(k, n) / lk)
}

fn check_k_n(k: f64, n: usize) -> Result<()> {
    if !(k > 0.0) || !k.is_finite() {
        return Err(Error::invalid(format!("k must be positive, got {k}")));
    }
    if n == 0 {
        return Err(Error::invalid("n must be at least 1"));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LkEnvelope {
    /// `L_k / (√N σ_G)` for `k ≥ 2`, `L_k / (N^(1/k) σ_G)` below.
    pub x: f64,
    pub theta: f64,
    pub theta_max: f64,
    /// `Ψ(x)`
    pub ccc_max_prime: f64,
    /// `min over θ ∈ [1, θ_max]` of `ψ(θx)`, i.e. the piecewise outer bound.
    pub ccc_min_prime: f64,
    /// `ψ(θx)` at the requested θ.
    pub ccc_min_theta: f64,
    /// `2/x`, the θ at which the outer bound touches −1, when that θ is feasible.
    pub theta_0: Option<f64>,
}

/// Piecewise lower envelope: `ψ(θ_max·x)` up to `x = 2/θ_max`, then −1 up to
/// `x = 2`, then `ψ(x)`.
pub fn lower_outer(x: f64, tmax: f64) -> f64 {
    if tmax * x <= 2.0 {
        psi_lower(tmax * x)
    } else if x <= 2.0 {
        -1.0
    } else {
        psi_lower(x)
    }
}

pub fn envelope_given_lk(k: f64, n: usize, lk: f64, sigma_g: f64, theta: f64) -> Result<LkEnvelope> {
    let range = theta_range(k, n, lk)?;
    if !(sigma_g > 0.0) || !sigma_g.is_finite() {
        return Err(Error::invalid(format!("sigma_g must be positive, got {sigma_g}")));
    }
    let slack = 1e-12 * range.theta_max;
    if !(theta >= 1.0 - slack && theta <= range.theta_max + slack) {
        return Err(Error::invalid(format!(
            "theta {theta} outside [1, {}]",
            range.theta_max
        )));
    }
    let x = range.mse_min_sqrt / sigma_g;
    let theta_0 = (x > 0.0 && range.theta_max * x >= 2.0 && x <= 2.0).then(|| 2.0 / x);
    Ok(LkEnvelope {
        x,
        theta,
        theta_max: range.theta_max,
        ccc_max_prime: psi_upper(x),
        ccc_min_prime: lower_outer(x, range.theta_max),
        ccc_min_theta: psi_lower(theta * x),
        theta_0,
    })
}

/// The other θ giving the same `ψ(θx)`: `θ₂ = θ₁ / (xθ₁ − 1)`.
///
/// Only defined on the branch `xθ₁ > 1`, where ψ is negative.
pub fn theta_conjugate(theta1: f64, x: f64) -> Result<f64> {
    if !(theta1 > 0.0) || !(x > 0.0) || !(x * theta1 > 1.0) || !(theta1 * x).is_finite() {
        return Err(Error::NoConjugate { theta: theta1, x });
    }
    Ok(theta1 / (x * theta1 - 1.0))
}

/// Geometric θ grid from 1 to `theta_max`; a single θ = 1 when `theta_max = 1`.
pub fn theta_grid(tmax: f64, steps: usize) -> Result<Vec<f64>> {
    if steps < 2 {
        return Err(Error::invalid("theta steps must be at least 2"));
    }
    if tmax == 1.0 {
        return Ok(vec![1.0]);
    }
    let last = (steps - 1) as f64;
    let mut grid: Vec<f64> = (0..steps).map(|j| tmax.powf(j as f64 / last)).collect();
    grid[0] = 1.0;
    grid[steps - 1] = tmax;
    Ok(grid)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LkRegionRow {
    pub x: f64,
    /// The L_k value this x corresponds to for the given N and σ_G.
    pub lk: f64,
    pub psi_upper: f64,
    pub psi_lower_outer: f64,
    /// `ψ(θx)` for each θ of [`LkRegion::thetas`].
    pub psi_lower_theta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LkRegion {
    pub k: f64,
    pub n: usize,
    pub theta_max: f64,
    pub thetas: Vec<f64>,
    pub rows: Vec<LkRegionRow>,
}

pub fn region_data_lk(
    k: f64,
    n: usize,
    sigma_g: f64,
    x_max: f64,
    steps: usize,
    theta_steps: usize,
) -> Result<LkRegion> {
    check_k_n(k, n)?;
    if !(sigma_g > 0.0) || !sigma_g.is_finite() {
        return Err(Error::invalid(format!("sigma_g must be positive, got {sigma_g}")));
    }
    let tmax = theta_max(k, n);
    let thetas = theta_grid(tmax, theta_steps)?;
    let denom = mse_min_denominator(k, n);
    let rows = linspace(x_max, steps)?
        .into_iter()
        .map(|x| LkRegionRow {
            x,
            lk: x * denom * sigma_g,
            psi_upper: psi_upper(x),
            psi_lower_outer: lower_outer(x, tmax),
            psi_lower_theta: thetas.iter().map(|t| psi_lower(t * x)).collect(),
        })
        .collect();
    Ok(LkRegion {
        k,
        n,
        theta_max: tmax,
        thetas,
        rows,
    })
}

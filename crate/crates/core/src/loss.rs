//! Training losses that reward agreement with the gold standard as well as
//! small errors, with analytic gradients with respect to the predictions.
//!
//! Error part: `Σε_j(g_j − p_j)²` (`ε_j = 1` outside the general variants).
//! Reward part: `Σα_j(g_jp_j)^(2β_j+1)`, which reduces to `αΣg_jp_j` for
//! `β = 0`. Ratio variants divide the two, Diff variants subtract, and
//! `AbsMseOverCov` uses `|MSE/σ_XY|^γ`, a monotone transform of ρc when
//! `σ_XY > 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{self, check_pair};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    /// `Σ(g−p)² / Σgp`, signed.
    Ratio,
    /// `|Σ(g−p)² / Σgp|^γ`
    RatioPow,
    /// `|Σε_j(g−p)² / Σα_j(gp)^(2β_j+1)|^γ`
    GeneralRatio,
    /// `Σ(g−p)² − αΣgp`; `α = 0` is plain (summed) squared error.
    Diff,
    /// `|Σ(g−p)² − αΣ(gp)^(2β+1)|^γ`
    DiffPow,
    /// `|Σε_j(g−p)² − Σα_j(gp)^(2β_j+1)|^γ`
    GeneralDiff,
    /// `|MSE / σ_XY|^γ`
    AbsMseOverCov,
}

impl Variant {
    pub const ALL: [Variant; 7] = [
        Variant::Ratio,
        Variant::RatioPow,
        Variant::GeneralRatio,
        Variant::Diff,
        Variant::DiffPow,
        Variant::GeneralDiff,
        Variant::AbsMseOverCov,
    ];

    pub fn is_general(self) -> bool {
        matches!(self, Variant::GeneralRatio | Variant::GeneralDiff)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossParams {
    pub variant: Variant,
    pub gamma: f64,
    pub alpha: f64,
    pub beta: u32,
    pub per_sample_alpha: Vec<f64>,
    pub per_sample_eps: Vec<f64>,
    pub per_sample_beta: Vec<u32>,
}

impl LossParams {
    /// `γ = 1`, `α = 1`, `β = 0`, no per-sample coefficients.
    pub fn new(variant: Variant) -> Self {
        LossParams {
            variant,
            gamma: 1.0,
            alpha: 1.0,
            beta: 0,
            per_sample_alpha: Vec::new(),
            per_sample_eps: Vec::new(),
            per_sample_beta: Vec::new(),
        }
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_beta(mut self, beta: u32) -> Self {
        self.beta = beta;
        self
    }

    /// Sets `α_j`, `ε_j` and `β_j` for the general variants.
    pub fn with_per_sample(mut self, alpha: Vec<f64>, eps: Vec<f64>, beta: Vec<u32>) -> Self {
        self.per_sample_alpha = alpha;
        self.per_sample_eps = eps;
        self.per_sample_beta = beta;
        self
    }

    /// Checks coefficient signs, and per-sample lengths against `n` for the
    /// general variants.
    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return Err(Error::invalid(format!("gamma must be positive, got {}", self.gamma)));
        }
        // α = 0 is allowed so that Diff covers plain squared error
        if !(self.alpha >= 0.0) || !self.alpha.is_finite() {
            return Err(Error::invalid(format!("alpha must be nonnegative, got {}", self.alpha)));
        }
        if self.variant.is_general() {
            for (name, len) in [
                ("alpha", self.per_sample_alpha.len()),
                ("eps", self.per_sample_eps.len()),
                ("beta", self.per_sample_beta.len()),
            ] {
                if len != n {
                    return Err(Error::invalid(format!("per-sample {name} has length {len}, expected {n}")));
                }
            }
            if self
                .per_sample_alpha
                .iter()
                .chain(&self.per_sample_eps)
                .any(|v| !(*v > 0.0) || !v.is_finite())
            {
                return Err(Error::invalid("per-sample alpha and eps must be positive"));
            }
        }
        Ok(())
    }

    fn eps(&self, j: usize) -> f64 {
        if self.variant.is_general() {
            self.per_sample_eps[j]
        } else {
            1.0
        }
    }

    fn reward_coef(&self, j: usize) -> (f64, i32) {
        match self.variant {
            Variant::GeneralRatio | Variant::GeneralDiff => {
                (self.per_sample_alpha[j], 2 * self.per_sample_beta[j] as i32 + 1)
            }
            Variant::Ratio | Variant::RatioPow => (1.0, 1),
            Variant::Diff => (self.alpha, 1),
            Variant::DiffPow => (self.alpha, 2 * self.beta as i32 + 1),
            Variant::AbsMseOverCov => (0.0, 1),
        }
    }
}

/// Inner value (before `|·|^γ`) and its gradient.
fn inner(params: &LossParams, gold: &[f64], pred: &[f64]) -> Result<(f64, Vec<f64>)> {
    check_pair(gold, pred)?;
    params.validate(gold.len())?;
    let n = gold.len();
    if params.variant == Variant::AbsMseOverCov {
        let nf = n as f64;
        let mu_g = stats::mean(gold)?;
        let mse = stats::mse(gold, pred)?;
        let cov = stats::covariance(gold, pred)?;
        if cov == 0.0 {
            return Err(Error::singular("σ_XY = 0"));
        }
        let grad = gold
            .iter()
            .zip(pred)
            .map(|(g, p)| {
                let d_mse = 2.0 * (p - g) / nf;
                let d_cov = (g - mu_g) / nf;
                (d_mse * cov - mse * d_cov) / (cov * cov)
            })
            .collect();
        return Ok((mse / cov, grad));
    }

    let mut sq = 0.0;
    let mut reward = 0.0;
    let mut d_sq = Vec::with_capacity(n);
    let mut d_reward = Vec::with_capacity(n);
    for j in 0..n {
        let (g, p) = (gold[j], pred[j]);
        let eps = params.eps(j);
        sq += eps * (g - p) * (g - p);
        d_sq.push(2.0 * eps * (p - g));
        let (a, m) = params.reward_coef(j);
        let gp = g * p;
        reward += a * gp.powi(m);
        d_reward.push(a * m as f64 * g * gp.powi(m - 1));
    }
    match params.variant {
        Variant::Ratio | Variant::RatioPow | Variant::GeneralRatio => {
            if reward == 0.0 {
                return Err(Error::singular("reward term Σgp vanishes"));
            }
            let grad = d_sq
                .iter()
                .zip(&d_reward)
                .map(|(a, b)| a / reward - sq * b / (reward * reward))
                .collect();
            Ok((sq / reward, grad))
        }
        _ => Ok((sq - reward, d_sq.iter().zip(&d_reward).map(|(a, b)| a - b).collect())),
    }
}

fn is_signed(variant: Variant) -> bool {
    matches!(variant, Variant::Ratio | Variant::Diff)
}

pub fn loss(params: &LossParams, gold: &[f64], pred: &[f64]) -> Result<f64> {
    let (u, _) = inner(params, gold, pred)?;
    Ok(if is_signed(params.variant) {
        u
    } else {
        u.abs().powf(params.gamma)
    })
}

/// `∂loss/∂p_i`. Where the inner value is exactly 0 the `|·|^γ` variants
/// return the zero subgradient.
pub fn loss_gradient(params: &LossParams, gold: &[f64], pred: &[f64]) -> Result<Vec<f64>> {
    let (u, du) = inner(params, gold, pred)?;
    if is_signed(params.variant) {
        return Ok(du);
    }
    if u == 0.0 {
        return Ok(vec![0.0; du.len()]);
    }
    let outer = params.gamma * u.abs().powf(params.gamma - 1.0) * u.signum();
    Ok(du.into_iter().map(|v| outer * v).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub iter: usize,
    pub loss: f64,
    pub mse: f64,
    pub ccc: f64,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trace {
    pub rows: Vec<TraceRow>,
    /// Set when the loss left the finite range; the last row shows it.
    pub diverged: bool,
    pub final_pred: Vec<f64>,
}

const MAX_HALVINGS: usize = 60;

/// Gradient descent `p ← p − step·∇loss`, halving the step whenever a move
/// would raise the loss. Row 0 is the starting point.
pub fn training_trace(
    params: &LossParams,
    gold: &[f64],
    init_pred: &[f64],
    step: f64,
    iters: usize,
) -> Result<Trace> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::invalid(format!("step must be positive, got {step}")));
    }
    if iters == 0 {
        return Err(Error::invalid("iters must be at least 1"));
    }
    let row = |iter: usize, p: &[f64], loss: f64, step: f64| -> Result<TraceRow> {
        Ok(TraceRow {
            iter,
            loss,
            mse: stats::mse(gold, p)?,
            ccc: stats::ccc(gold, p).unwrap_or(f64::NAN),
            step,
        })
    };
    let mut pred = init_pred.to_vec();
    let mut current = loss(params, gold, &pred)?;
    let mut step = step;
    let mut rows = vec![row(0, &pred, current, step)?];
    let mut diverged = !current.is_finite();
    let mut it = 0;
    while !diverged && it < iters {
        it += 1;
        let grad = loss_gradient(params, gold, &pred)?;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let trial: Vec<f64> = pred.iter().zip(&grad).map(|(p, g)| p - step * g).collect();
            match loss(params, gold, &trial) {
                Ok(v) if v <= current || !v.is_finite() => {
                    accepted = Some((trial, v));
                    break;
                }
                // an increase, or a step onto a singular set
                _ => step *= 0.5,
            }
        }
        let Some((trial, v)) = accepted else { break };
        if trial.iter().any(|p| !p.is_finite()) {
            diverged = true;
            rows.push(TraceRow { iter: it, loss: v, mse: f64::NAN, ccc: f64::NAN, step });
            break;
        }
        pred = trial;
        current = v;
        rows.push(row(it, &pred, current, step)?);
        diverged = !current.is_finite();
    }
    Ok(Trace {
        rows,
        diverged,
        final_pred: pred,
    })
}

//! Brute-force verifiers. None of these use the closed forms they audit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lp_bounds::{lower_outer, mse_min_denominator, theta_max, theta_of};
use crate::mapping::{psi_lower, psi_upper};
use crate::permutation::{Convention, ErrorSet};
use crate::stats::{self, check_pair, check_values, lp_norm};

/// Largest N accepted by [`permutation_oracle`] (9! = 362 880 orderings).
pub const MAX_ENUMERATION_N: usize = 9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub trials: u64,
    pub best_value: f64,
    pub worst_value: f64,
    pub witness_best: Vec<f64>,
    pub witness_worst: Vec<f64>,
    pub seed: Option<u64>,
    /// Smallest and largest θ seen (L_k sampling only).
    pub theta_span: Option<(f64, f64)>,
    /// Samples outside the envelope the oracle audits.
    pub violations: u64,
}

impl OracleReport {
    fn empty(seed: Option<u64>) -> Self {
        OracleReport {
            trials: 0,
            best_value: f64::NEG_INFINITY,
            worst_value: f64::INFINITY,
            witness_best: Vec::new(),
            witness_worst: Vec::new(),
            seed,
            theta_span: None,
            violations: 0,
        }
    }

    /// Record one candidate. Ties keep the earliest witness.
    pub fn observe(&mut self, witness: &[f64], value: f64) {
        self.trials += 1;
        if value > self.best_value {
            self.best_value = value;
            self.witness_best = witness.to_vec();
        }
        if value < self.worst_value {
            self.worst_value = value;
            self.witness_worst = witness.to_vec();
        }
    }
}

/// Heap's algorithm, calling `visit` once per ordering of `items`.
fn for_each_permutation(items: &mut [f64], mut visit: impl FnMut(&[f64])) {
    let n = items.len();
    let mut c = vec![0usize; n];
    visit(items);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                items.swap(0, i);
            } else {
                items.swap(c[i], i);
            }
            visit(items);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}

/// Exact max/min of ρc over every ordering of the error set.
///
/// Witnesses are error sequences aligned with `gold`.
pub fn permutation_oracle(gold: &[f64], errors: &ErrorSet, convention: Convention) -> Result<OracleReport> {
    check_pair(gold, errors.values())?;
    if gold.len() > MAX_ENUMERATION_N {
        return Err(Error::TooLarge {
            n: gold.len(),
            max: MAX_ENUMERATION_N,
        });
    }
    let mut report = OracleReport::empty(None);
    let mut items = errors.values().to_vec();
    let mut failure = None;
    for_each_permutation(&mut items, |perm| {
        if failure.is_some() {
            return;
        }
        let pred = convention.prediction(gold, perm);
        match stats::ccc(gold, &pred) {
            Ok(v) => report.observe(perm, v),
            Err(e) => failure = Some(e),
        }
    });
    match failure {
        Some(e) => Err(e),
        None => Ok(report),
    }
}

fn normal_direction(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        let d: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
        if d.iter().any(|v| *v != 0.0) {
            return d;
        }
    }
}

fn nonconstant_gold(gold: &[f64]) -> Result<f64> {
    check_values(gold)?;
    let var = stats::population_variance(gold)?;
    if var == 0.0 {
        return Err(Error::degenerate("gold standard is constant"));
    }
    Ok(var)
}

/// Random error vectors with `Σd_i² = N·mse`; the extremes of ρc found.
///
/// Every sample must land in `[ψ(x), Ψ(x)]`, `x = sqrt(mse/σ_G²)`; samples
/// outside by more than [`crate::tol::ORACLE_SLACK`] are counted as violations.
pub fn mse_sphere_oracle(gold: &[f64], mse: f64, trials: u64, seed: u64) -> Result<OracleReport> {
    let var_g = nonconstant_gold(gold)?;
    if !mse.is_finite() || mse < 0.0 {
        return Err(Error::invalid(format!("mse must be finite and nonnegative, got {mse}")));
    }
    let n = gold.len();
    let radius = (n as f64 * mse).sqrt();
    let x = (mse / var_g).sqrt();
    let (hi, lo) = (psi_upper(x), psi_lower(x));
    let slack = crate::tol::ORACLE_SLACK;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = OracleReport::empty(Some(seed));
    let mut pred = vec![0.0; n];
    for _ in 0..trials {
        let mut d = normal_direction(&mut rng, n);
        let scale = radius / lp_norm(&d, 2.0)?;
        d.iter_mut().for_each(|v| *v *= scale);
        for ((p, g), e) in pred.iter_mut().zip(gold).zip(&d) {
            *p = g + e;
        }
        let v = stats::ccc(gold, &pred)?;
        if v > hi + slack || v < lo - slack {
            report.violations += 1;
        }
        report.observe(&d, v);
    }
    Ok(report)
}

/// Random error vectors rescaled onto `L_k(d) = lk`.
///
/// The rescaled directions are not uniform on the L_k sphere; this is an
/// audit of the outer envelope and of the θ band, not an estimate of the span.
pub fn lk_sphere_oracle(gold: &[f64], k: f64, lk: f64, trials: u64, seed: u64) -> Result<OracleReport> {
    let var_g = nonconstant_gold(gold)?;
    if !(k > 0.0) || !k.is_finite() {
        return Err(Error::invalid(format!("k must be positive, got {k}")));
    }
    if !(lk > 0.0) || !lk.is_finite() {
        return Err(Error::invalid(format!("L_k must be positive, got {lk}")));
    }
    let n = gold.len();
    let x = lk / (mse_min_denominator(k, n) * var_g.sqrt());
    let tmax = theta_max(k, n);
    let (hi, lo) = (psi_upper(x), lower_outer(x, tmax));
    let slack = crate::tol::ORACLE_SLACK;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = OracleReport::empty(Some(seed));
    let (mut tlo, mut thi) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut pred = vec![0.0; n];
    for _ in 0..trials {
        let mut d = normal_direction(&mut rng, n);
        let scale = lk / lp_norm(&d, k)?;
        d.iter_mut().for_each(|v| *v *= scale);
        for ((p, g), e) in pred.iter_mut().zip(gold).zip(&d) {
            *p = g + e;
        }
        let v = stats::ccc(gold, &pred)?;
        let theta = theta_of(&d, k)?;
        tlo = tlo.min(theta);
        thi = thi.max(theta);
        let theta_ok = theta >= 1.0 - 1e-12 && theta <= tmax * (1.0 + 1e-12);
        if v > hi + slack || v < lo - slack || !theta_ok {
            report.violations += 1;
        }
        report.observe(&d, v);
    }
    report.theta_span = (trials > 0).then_some((tlo, thi));
    Ok(report)
}

/// Central-difference gradient of `f` at `at` with step `h`.
pub fn finite_difference<F>(f: F, at: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    check_values(at)?;
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::invalid(format!("step must be positive, got {h}")));
    }
    let mut probe = at.to_vec();
    let mut grad = Vec::with_capacity(at.len());
    for i in 0..at.len() {
        probe[i] = at[i] + h;
        let up = f(&probe)?;
        probe[i] = at[i] - h;
        let down = f(&probe)?;
        probe[i] = at[i];
        grad.push((up - down) / (2.0 * h));
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapping::{bounds_given_mse, CenteredGold};
    use approx::assert_relative_eq;

    #[test]
    fn heap_visits_every_ordering_once() {
        let mut items = [1.0, 2.0, 3.0, 4.0];
        let mut seen = Vec::new();
        for_each_permutation(&mut items, |p| seen.push(p.to_vec()));
        assert_eq!(seen.len(), 24);
        seen.sort_by(|a, b| a.partial_cmp(b).unwrap());
        seen.dedup();
        assert_eq!(seen.len(), 24);
    }

    #[test]
    fn permutation_oracle_examples() {
        let g = [0.3, 1.7, -0.4];
        let es = ErrorSet::new(&[0.5, -1.0, 2.0]).unwrap();
        let rep = permutation_oracle(&g, &es, Convention::PredictionMinusGold).unwrap();
        assert_eq!(rep.trials, 6);
        assert!(rep.best_value >= rep.worst_value);

        let flat = ErrorSet::new(&[0.7; 4]).unwrap();
        let rep = permutation_oracle(&[1.0, 2.0, 0.0, 5.0], &flat, Convention::GoldMinusPrediction).unwrap();
        assert_eq!(rep.best_value, rep.worst_value);

        let big = ErrorSet::new(&[0.0; 10]).unwrap();
        let g10: Vec<f64> = (0..10).map(f64::from).collect();
        assert!(matches!(
            permutation_oracle(&g10, &big, Convention::PredictionMinusGold),
            Err(Error::TooLarge { n: 10, max: 9 })
        ));
    }

    #[test]
    fn mse_sphere_examples() {
        let g = [0.1, 2.0, -1.3, 0.8, 1.1];
        let gold = CenteredGold::new(&g).unwrap();
        let mse = 0.7;
        let mut rep = mse_sphere_oracle(&g, mse, 2000, 11).unwrap();
        assert_eq!(rep.violations, 0);
        let b = bounds_given_mse(&gold, mse).unwrap();
        let pred: Vec<f64> = g.iter().zip(b.err_max.iter()).map(|(a, e)| a + e).collect();
        rep.observe(&b.err_max, stats::ccc(&g, &pred).unwrap());
        assert_relative_eq!(rep.best_value, b.ccc_max, max_relative = 1e-12);

        let tiny = mse_sphere_oracle(&g, 1e-14, 200, 3).unwrap();
        assert!(tiny.worst_value > 1.0 - 1e-6);

        assert_eq!(mse_sphere_oracle(&g, mse, 300, 5).unwrap(), mse_sphere_oracle(&g, mse, 300, 5).unwrap());
        assert!(mse_sphere_oracle(&[2.0, 2.0], 1.0, 10, 0).is_err());
    }

    #[test]
    fn lk_sphere_examples() {
        let g = [0.1, 2.0, -1.3, 0.8, 1.1, 0.0];
        let lk = 3.0;
        let a = lk_sphere_oracle(&g, 2.0, lk, 500, 9).unwrap();
        let b = mse_sphere_oracle(&g, lk * lk / g.len() as f64, 500, 9).unwrap();
        assert_relative_eq!(a.best_value, b.best_value, max_relative = 1e-12);
        assert_relative_eq!(a.worst_value, b.worst_value, max_relative = 1e-12);

        for k in [0.5, 1.0, 3.0, 4.0] {
            let rep = lk_sphere_oracle(&g, k, lk, 2000, 1).unwrap();
            assert_eq!(rep.violations, 0, "k={k}");
            let (lo, hi) = rep.theta_span.unwrap();
            assert!(lo >= 1.0 - 1e-12 && hi <= theta_max(k, g.len()) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn finite_difference_examples() {
        let sq = |x: &[f64]| Ok(x.iter().map(|v| v * v).sum::<f64>());
        let g = finite_difference(sq, &[1.0, 2.0], 1e-5).unwrap();
        assert_relative_eq!(g[0], 2.0, max_relative = 1e-9);
        assert_relative_eq!(g[1], 4.0, max_relative = 1e-9);

        let gold = [0.5, -1.0, 2.0];
        let at = [1.0, 0.0, 1.5];
        let f = |p: &[f64]| stats::mse(&gold, p);
        let fd = finite_difference(f, &at, 1e-6).unwrap();
        for i in 0..3 {
            assert_relative_eq!(fd[i], 2.0 * (at[i] - gold[i]) / 3.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn finite_difference_plateau() {
        // agreement is flat across several decades of h before rounding dominates
        let f = |x: &[f64]| Ok(x[0].sin() * x[1].exp());
        let at = [0.7, -0.3];
        let exact = [0.7f64.cos() * (-0.3f64).exp(), 0.7f64.sin() * (-0.3f64).exp()];
        for h in [1e-4, 1e-5, 1e-6, 1e-7, 1e-8] {
            let fd = finite_difference(f, &at, h).unwrap();
            let err = (fd[0] - exact[0]).abs().max((fd[1] - exact[1]).abs());
            assert!(err < 1e-7, "h={h} err={err}");
        }
    }
}

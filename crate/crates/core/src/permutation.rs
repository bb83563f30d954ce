//! Orderings of a fixed error multiset that extremize ρc against a gold standard.
//!
//! With the errors' values fixed, MSE and the error mean are fixed too and ρc
//! depends on the ordering only through `Σ g_i e_i`. The rearrangement
//! inequality then gives the optimum directly: pairing sorted errors with
//! sorted gold in the same order maximizes the sum, opposite order minimizes it.
//! Two sign conventions (`P = G + E` and `P = G − E`) give two maximizers and
//! two minimizers.

use std::cmp::Ordering;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::stats::{self, check_pair, check_values, Sequence};

/// A multiset of signed errors, stored sorted ascending.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorSet {
    values: Vec<f64>,
    pub mu_e: f64,
    pub mse: f64,
}

impl ErrorSet {
    pub fn new(values: &[f64]) -> Result<Self> {
        check_values(values)?;
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len() as f64;
        let mu_e = sorted.iter().sum::<f64>() / n;
        let mse = sorted.iter().map(|e| e * e).sum::<f64>() / n;
        Ok(ErrorSet {
            values: sorted,
            mu_e,
            mse,
        })
    }

    /// Canonical (ascending) order.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Convention {
    /// `P = G + E`
    PredictionMinusGold,
    /// `P = G − E`
    GoldMinusPrediction,
}

impl Convention {
    pub fn prediction(self, gold: &[f64], errors: &[f64]) -> Vec<f64> {
        match self {
            Convention::PredictionMinusGold => gold.iter().zip(errors).map(|(g, e)| g + e).collect(),
            Convention::GoldMinusPrediction => gold.iter().zip(errors).map(|(g, e)| g - e).collect(),
        }
    }

    pub fn errors(self, gold: &[f64], pred: &[f64]) -> Vec<f64> {
        match self {
            Convention::PredictionMinusGold => pred.iter().zip(gold).map(|(p, g)| p - g).collect(),
            Convention::GoldMinusPrediction => gold.iter().zip(pred).map(|(g, p)| g - p).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Objective {
    Max,
    Min,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PermutationResult {
    pub convention: Convention,
    pub objective: Objective,
    /// Error value assigned to each gold rank (rank 0 = smallest gold).
    pub assignment: Vec<f64>,
    /// Prediction in the original gold order.
    pub prediction: Sequence,
    /// ρc of `(gold, prediction)` computed directly.
    pub ccc_value: f64,
    /// ρc from the sorted-space closed form.
    pub formula_value: f64,
}

impl PermutationResult {
    /// Errors aligned with the original gold order.
    pub fn errors(&self, gold: &[f64]) -> Vec<f64> {
        self.convention.errors(gold, &self.prediction)
    }
}

/// The four extremal orderings of an error set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimalPermutations {
    pub max1: PermutationResult,
    pub max2: PermutationResult,
    pub min1: PermutationResult,
    pub min2: PermutationResult,
}

impl OptimalPermutations {
    pub fn all(&self) -> [&PermutationResult; 4] {
        [&self.max1, &self.max2, &self.min1, &self.min2]
    }
}

/// `1 − N·MSE / (2Nσ_G² + 2·sign·(Σg_ie_i − Nμ_Gμ_E) + N·MSE)`.
fn ccc_from_error_sums(n: f64, var_g: f64, dot_ge: f64, mu_g: f64, mu_e: f64, mse: f64, sign: f64) -> Result<f64> {
    let denom = 2.0 * n * var_g + sign * 2.0 * (dot_ge - n * mu_g * mu_e) + n * mse;
    if denom == 0.0 {
        return Err(Error::singular("ρc denominator vanishes"));
    }
    Ok(1.0 - n * mse / denom)
}

fn error_form(gold: &[f64], errors: &[f64], sign: f64) -> Result<f64> {
    check_pair(gold, errors)?;
    let n = gold.len() as f64;
    let mu_g = stats::mean(gold)?;
    let mu_e = stats::mean(errors)?;
    let var_g = stats::population_variance(gold)?;
    let mse = errors.iter().map(|e| e * e).sum::<f64>() / n;
    let dot: f64 = gold.iter().zip(errors).map(|(g, e)| g * e).sum();
    ccc_from_error_sums(n, var_g, dot, mu_g, mu_e, mse, sign)
}

/// ρc of `(gold, gold + errors)` written through `Σ g_i e_i`.
pub fn ccc_error_form1(gold: &[f64], errors: &[f64]) -> Result<f64> {
    error_form(gold, errors, 1.0)
}

/// ρc of `(gold, gold − errors)` written through `Σ g_i e_i`.
pub fn ccc_error_form2(gold: &[f64], errors: &[f64]) -> Result<f64> {
    error_form(gold, errors, -1.0)
}

/// Indices of `gold` sorted ascending by `(value, original index)`.
pub fn gold_ranks(gold: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..gold.len()).collect();
    idx.sort_by(|&a, &b| match gold[a].total_cmp(&gold[b]) {
        Ordering::Equal => a.cmp(&b),
        o => o,
    });
    idx
}

pub fn optimal_permutations(gold: &[f64], errors: &ErrorSet) -> Result<OptimalPermutations> {
    check_pair(gold, errors.values())?;
    let n = gold.len();
    let nf = n as f64;
    let mu_g = stats::mean(gold)?;
    let var_g = stats::population_variance(gold)?;
    if var_g == 0.0 {
        return Err(Error::degenerate("gold standard is constant"));
    }
    let ranks = gold_ranks(gold);
    let ascending = errors.values().to_vec();
    let descending: Vec<f64> = ascending.iter().rev().copied().collect();
    // Σ ḡ_i ē_i in sorted space
    let dot_same: f64 = ranks.iter().zip(&ascending).map(|(&i, e)| gold[i] * e).sum();
    let dot_opposite: f64 = ranks.iter().zip(&descending).map(|(&i, e)| gold[i] * e).sum();

    let build = |convention: Convention, objective: Objective, assignment: &[f64], dot: f64, sign: f64| -> Result<PermutationResult> {
        let mut ordered = vec![0.0; n];
        for (&i, &e) in ranks.iter().zip(assignment) {
            ordered[i] = e;
        }
        let prediction = convention.prediction(gold, &ordered);
        let ccc_value = stats::ccc(gold, &prediction)?;
        let formula_value = ccc_from_error_sums(nf, var_g, dot, mu_g, errors.mu_e, errors.mse, sign)?;
        Ok(PermutationResult {
            convention,
            objective,
            assignment: assignment.to_vec(),
            prediction: Sequence::new(prediction)?,
            ccc_value,
            formula_value,
        })
    };

    use Convention::*;
    Ok(OptimalPermutations {
        max1: build(PredictionMinusGold, Objective::Max, &ascending, dot_same, 1.0)?,
        max2: build(GoldMinusPrediction, Objective::Max, &descending, dot_opposite, -1.0)?,
        min1: build(PredictionMinusGold, Objective::Min, &descending, dot_opposite, 1.0)?,
        min2: build(GoldMinusPrediction, Objective::Min, &ascending, dot_same, -1.0)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MaxComparison {
    Form1Better,
    Form2Better,
    Tie,
}

/// Which convention's maximizer reaches the higher ρc. Decided by evaluating
/// both closed forms; no inequality settles it in general.
pub fn compare_max12(gold: &[f64], errors: &ErrorSet) -> Result<MaxComparison> {
    let opt = optimal_permutations(gold, errors)?;
    let (a, b) = (opt.max1.formula_value, opt.max2.formula_value);
    let tie = 1e-12 * 1f64.max(a.abs()).max(b.abs());
    Ok(if (a - b).abs() <= tie {
        MaxComparison::Tie
    } else if a > b {
        MaxComparison::Form1Better
    } else {
        MaxComparison::Form2Better
    })
}

/// `(1/n)Σa_kb_k − mean(a)·mean(b)`: nonnegative for similarly ordered
/// sequences, nonpositive for oppositely ordered ones.
pub fn chebyshev_check(a: &[f64], b: &[f64]) -> Result<f64> {
    check_pair(a, b)?;
    let n = a.len() as f64;
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    Ok(dot / n - stats::mean(a)? * stats::mean(b)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn error_form_examples() {
        let g = [1.0, 2.0, 3.0];
        assert_eq!(ccc_error_form1(&g, &[0.0; 3]).unwrap(), 1.0);
        assert_eq!(ccc_error_form2(&g, &[0.0; 3]).unwrap(), 1.0);
        assert_relative_eq!(
            ccc_error_form1(&g, &[0.1; 3]).unwrap(),
            stats::ccc(&g, &[1.1, 2.1, 3.1]).unwrap(),
            max_relative = 1e-14
        );
        assert!(ccc_error_form1(&g, &[1.0, 0.0, -1.0]).unwrap().abs() < 1e-15);
        let e = [0.3, -1.2, 0.7];
        assert_relative_eq!(
            ccc_error_form1(&g, &e).unwrap(),
            ccc_error_form2(&g, &[-0.3, 1.2, -0.7]).unwrap(),
            max_relative = 1e-15
        );
        assert!(matches!(ccc_error_form1(&[1.0, 1.0], &[0.0, 0.0]), Err(Error::Singularity(_))));
    }

    #[test]
    fn constant_errors_make_ordering_irrelevant() {
        let g = [3.0, -1.0, 2.0, 0.5];
        let es = ErrorSet::new(&[0.4; 4]).unwrap();
        let opt = optimal_permutations(&g, &es).unwrap();
        let plus: Vec<f64> = g.iter().map(|v| v + 0.4).collect();
        let minus: Vec<f64> = g.iter().map(|v| v - 0.4).collect();
        assert_eq!(opt.max1.prediction.values(), &plus[..]);
        assert_eq!(opt.min1.prediction.values(), &plus[..]);
        assert_eq!(opt.max2.prediction.values(), &minus[..]);
        assert_eq!(opt.min2.prediction.values(), &minus[..]);
        let first = opt.max1.ccc_value;
        for r in opt.all() {
            assert_relative_eq!(r.ccc_value, first, max_relative = 1e-14);
        }
    }

    #[test]
    fn orderings_follow_gold_ranks() {
        let g = [5.0, 1.0, 3.0];
        let es = ErrorSet::new(&[0.2, 0.0, 0.9]).unwrap();
        let opt = optimal_permutations(&g, &es).unwrap();
        // max1: largest error on largest gold, P = G + E
        assert_eq!(opt.max1.errors(&g).iter().map(|v| (v * 10.0).round()).collect::<Vec<_>>(), vec![9.0, 0.0, 2.0]);
        // max2: largest error on smallest gold, P = G − E
        assert_eq!(opt.max2.errors(&g).iter().map(|v| (v * 10.0).round()).collect::<Vec<_>>(), vec![0.0, 9.0, 2.0]);
        assert_eq!(opt.max1.assignment, vec![0.0, 0.2, 0.9]);
        assert_eq!(opt.max2.assignment, vec![0.9, 0.2, 0.0]);
        for r in opt.all() {
            assert_relative_eq!(r.ccc_value, r.formula_value, epsilon = 1e-12);
        }
        assert!(opt.max1.ccc_value >= opt.min1.ccc_value);
        assert!(opt.max2.ccc_value >= opt.min2.ccc_value);
    }

    #[test]
    fn tied_gold_is_deterministic() {
        let g = [1.0, 2.0, 1.0, 2.0];
        assert_eq!(gold_ranks(&g), vec![0, 2, 1, 3]);
        let es = ErrorSet::new(&[0.1, 0.2, 0.3, 0.4]).unwrap();
        let a = optimal_permutations(&g, &es).unwrap();
        let b = optimal_permutations(&g, &es).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn comparison_examples() {
        let g = [-2.0, -1.0, 0.0, 1.0, 2.0];
        let sym = ErrorSet::new(&[-0.5, -0.1, 0.0, 0.1, 0.5]).unwrap();
        assert_eq!(compare_max12(&g, &sym).unwrap(), MaxComparison::Tie);
        let zero = ErrorSet::new(&[0.0; 5]).unwrap();
        assert_eq!(compare_max12(&g, &zero).unwrap(), MaxComparison::Tie);
        let opt = optimal_permutations(&g, &zero).unwrap();
        assert_eq!(opt.max1.ccc_value, 1.0);
    }

    #[test]
    fn chebyshev_examples() {
        let a = [1.0, 2.0, 3.0];
        assert_relative_eq!(chebyshev_check(&a, &a).unwrap(), 2.0 / 3.0, max_relative = 1e-14);
        assert!(chebyshev_check(&a, &[3.0, 2.0, 1.0]).unwrap() <= 0.0);
        assert!(chebyshev_check(&a, &[0.0, 0.0, 7.0]).unwrap() >= 0.0);
    }

    #[test]
    fn constant_gold_rejected() {
        let es = ErrorSet::new(&[0.1, 0.2]).unwrap();
        assert!(matches!(optimal_permutations(&[1.0, 1.0], &es), Err(Error::DegenerateVariance(_))));
    }
}

//! ρc extremization at a fixed L_k error norm for even k.
//!
//! With `P = G + D` the objective `σ_XY / MSE` equals
//! `(Σy_i² + Σy_id_i) / Σd_i²` where `y` is the centered gold, and ρc is a
//! monotone function of it. The constraint `Σd_i^k = L_k^k` is smooth for even
//! k, so the optimum solves the Lagrange stationarity system. No closed form
//! exists beyond k = 2; the solver here is multi-start projected gradient
//! ascent on the constraint surface, finished with Newton steps on the full
//! Lagrange system.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mapping::{ccc_from_mse_cov, CenteredGold};
use crate::permutation::Objective;
use crate::stats::{check_values, lp_norm};
use crate::tol;

/// Restarts used by [`solve`] when none are specified.
pub const DEFAULT_RESTARTS: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationarityProblem {
    pub gold: CenteredGold,
    /// Even, at least 2.
    pub k: u32,
    /// Constraint value of the L_k norm; `MkE = lk^k / N`.
    pub lk: f64,
    pub objective: Objective,
}

impl StationarityProblem {
    pub fn new(gold: &[f64], k: u32, lk: f64, objective: Objective) -> Result<Self> {
        if k < 2 || k % 2 != 0 {
            return Err(Error::invalid(format!("k must be even and at least 2, got {k}")));
        }
        if !(lk > 0.0) || !lk.is_finite() {
            return Err(Error::invalid(format!("L_k must be positive, got {lk}")));
        }
        Ok(StationarityProblem {
            gold: CenteredGold::new(gold)?,
            k,
            lk,
            objective,
        })
    }

    pub fn n(&self) -> usize {
        self.gold.len()
    }

    /// Target mean k-powered error.
    pub fn mke(&self) -> f64 {
        self.lk.powi(self.k as i32) / self.n() as f64
    }

    fn sign(&self) -> f64 {
        match self.objective {
            Objective::Max => 1.0,
            Objective::Min => -1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverState {
    pub d: Vec<f64>,
    /// Multiplier of the constraint `Σd_i^k − N·MkE = 0` for the stated objective.
    pub lambda: f64,
    pub sigma_gd: f64,
    /// `σ_XY / MSE`
    pub objective_value: f64,
    /// Largest stationarity residual divided by the largest term it sums.
    pub residual_norm: f64,
    pub ccc: f64,
    pub restart: usize,
    pub iterations: usize,
}

struct Moments {
    mse: f64,
    mke: f64,
    sigma_gd: f64,
}

fn moments(y: &[f64], d: &[f64], k: u32) -> Moments {
    let n = d.len() as f64;
    Moments {
        mse: d.iter().map(|v| v * v).sum::<f64>() / n,
        mke: d.iter().map(|v| v.powi(k as i32)).sum::<f64>() / n,
        sigma_gd: y.iter().zip(d).map(|(a, b)| a * b).sum::<f64>() / n,
    }
}

fn check_iterate(prob: &StationarityProblem, d: &[f64]) -> Result<()> {
    check_values(d)?;
    if d.len() != prob.n() {
        return Err(Error::invalid(format!(
            "error vector has length {}, gold has {}",
            d.len(),
            prob.n()
        )));
    }
    if d.iter().all(|v| *v == 0.0) {
        return Err(Error::invalid("stationarity undefined for a zero error vector"));
    }
    Ok(())
}

/// Per-coordinate residual
/// `2σ_G²(d_i^k/MkE − d_i²/MSE) + σ_GD(d_i^k/MkE − 2d_i²/MSE) + y_i d_i`,
/// zero at every stationary point of `σ_XY/MSE` on the L_k sphere.
pub fn stationarity_residual(prob: &StationarityProblem, d: &[f64]) -> Result<Vec<f64>> {
    check_iterate(prob, d)?;
    Ok(residual_terms(prob, d).into_iter().map(|t| t.iter().sum()).collect())
}

fn residual_terms(prob: &StationarityProblem, d: &[f64]) -> Vec<[f64; 5]> {
    let y = &prob.gold.centered;
    let var = prob.gold.var_g;
    let m = moments(y, d, prob.k);
    d.iter()
        .zip(y)
        .map(|(&di, &yi)| {
            let dk = di.powi(prob.k as i32) / m.mke;
            let d2 = di * di / m.mse;
            [2.0 * var * dk, -2.0 * var * d2, m.sigma_gd * dk, -2.0 * m.sigma_gd * d2, yi * di]
        })
        .collect()
}

fn scaled_residual(prob: &StationarityProblem, d: &[f64]) -> f64 {
    let terms = residual_terms(prob, d);
    let scale = terms
        .iter()
        .flat_map(|t| t.iter())
        .fold(1.0f64, |acc, v| acc.max(v.abs()));
    let worst = terms
        .iter()
        .map(|t| t.iter().sum::<f64>().abs())
        .fold(0.0f64, f64::max);
    worst / scale
}

/// Monic quadratic in the i-th centered gold value implied by stationarity,
/// returned as `(a, b, c)` with `a = 1`:
///
/// `y_i² + y_i·(d_i·B + N·MSE·MkE)/(2A) + Σ_{j≠i} y_j·(y_j + d_j·B/(2A)) = 0`,
/// `A = d_i^{k−1}·MSE − d_i·MkE`, `B = d_i^{k−1}·MSE − 2d_i·MkE`.
///
/// At a stationary `d`, the true `y_i` is a root. `A` vanishes identically for
/// k = 2 and whenever `d_i = 0`; both are reported as a singularity.
pub fn quadratic_in_gold(prob: &StationarityProblem, d: &[f64], i: usize) -> Result<(f64, f64, f64)> {
    check_iterate(prob, d)?;
    if i >= d.len() {
        return Err(Error::invalid(format!("index {i} out of range")));
    }
    let y = &prob.gold.centered;
    let m = moments(y, d, prob.k);
    let n = d.len() as f64;
    let di = d[i];
    let dk1 = di.powi(prob.k as i32 - 1);
    let a_coef = dk1 * m.mse - di * m.mke;
    let scale = (dk1 * m.mse).abs().max((di * m.mke).abs());
    if a_coef.abs() <= 1e-14 * scale || scale == 0.0 {
        return Err(Error::singular(format!(
            "d_i^(k-1)·MSE = d_i·MkE at index {i}"
        )));
    }
    let b_coef = dk1 * m.mse - 2.0 * di * m.mke;
    let lin = (di * b_coef + n * m.mse * m.mke) / (2.0 * a_coef);
    let constant: f64 = (0..d.len())
        .filter(|&j| j != i)
        .map(|j| y[j] * (y[j] + d[j] * b_coef / (2.0 * a_coef)))
        .sum();
    Ok((1.0, lin, constant))
}

/// `σ_XY / MSE` of `(G, G + d)`.
fn ratio(y: &[f64], sum_yy: f64, d: &[f64]) -> f64 {
    let num = sum_yy + y.iter().zip(d).map(|(a, b)| a * b).sum::<f64>();
    num / d.iter().map(|v| v * v).sum::<f64>()
}

fn ratio_gradient(y: &[f64], sum_yy: f64, d: &[f64]) -> Vec<f64> {
    let num = sum_yy + y.iter().zip(d).map(|(a, b)| a * b).sum::<f64>();
    let dd: f64 = d.iter().map(|v| v * v).sum();
    y.iter()
        .zip(d)
        .map(|(yi, di)| yi / dd - 2.0 * di * num / (dd * dd))
        .collect()
}

fn ratio_hessian(y: &[f64], sum_yy: f64, d: &[f64]) -> DMatrix<f64> {
    let n = d.len();
    let num = sum_yy + y.iter().zip(d).map(|(a, b)| a * b).sum::<f64>();
    let dd: f64 = d.iter().map(|v| v * v).sum();
    let (dd2, dd3) = (dd * dd, dd * dd * dd);
    DMatrix::from_fn(n, n, |i, j| {
        let diag = if i == j { 2.0 * num / dd2 } else { 0.0 };
        -2.0 * (y[i] * d[j] + y[j] * d[i]) / dd2 - diag + 8.0 * num * d[i] * d[j] / dd3
    })
}

fn project(d: &mut [f64], k: u32, lk: f64) -> Result<()> {
    let norm = lp_norm(d, k as f64)?;
    if norm == 0.0 {
        return Err(Error::invalid("cannot project a zero vector onto the L_k sphere"));
    }
    let s = lk / norm;
    d.iter_mut().for_each(|v| *v *= s);
    Ok(())
}

fn constraint_normal(d: &[f64], k: u32) -> Vec<f64> {
    d.iter().map(|v| k as f64 * v.powi(k as i32 - 1)).collect()
}

fn tangent(g: &[f64], normal: &[f64]) -> Vec<f64> {
    let nn: f64 = normal.iter().map(|v| v * v).sum();
    if nn == 0.0 {
        return g.to_vec();
    }
    let c = g.iter().zip(normal).map(|(a, b)| a * b).sum::<f64>() / nn;
    g.iter().zip(normal).map(|(a, b)| a - c * b).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// One Newton step on `[s∇r − μ∇h; h − c] = 0`, followed by re-projection.
fn newton_step(prob: &StationarityProblem, sum_yy: f64, d: &[f64]) -> Option<Vec<f64>> {
    let n = d.len();
    let k = prob.k;
    let s = prob.sign();
    let y = &prob.gold.centered;
    let g: Vec<f64> = ratio_gradient(y, sum_yy, d).into_iter().map(|v| s * v).collect();
    let normal = constraint_normal(d, k);
    let nn = dot(&normal, &normal);
    if nn == 0.0 {
        return None;
    }
    let mu = dot(&g, &normal) / nn;
    let hess = ratio_hessian(y, sum_yy, d) * s;
    let target = prob.lk.powi(k as i32);
    let h = d.iter().map(|v| v.powi(k as i32)).sum::<f64>() - target;

    let mut jac = DMatrix::zeros(n + 1, n + 1);
    let mut rhs = DVector::zeros(n + 1);
    for i in 0..n {
        for j in 0..n {
            jac[(i, j)] = hess[(i, j)];
        }
        jac[(i, i)] -= mu * (k * (k - 1)) as f64 * d[i].powi(k as i32 - 2);
        jac[(i, n)] = -normal[i];
        jac[(n, i)] = normal[i];
        rhs[i] = -(g[i] - mu * normal[i]);
    }
    rhs[n] = -h;
    let step = jac.lu().solve(&rhs)?;
    let mut next: Vec<f64> = d.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
    if next.iter().any(|v| !v.is_finite()) {
        return None;
    }
    project(&mut next, k, prob.lk).ok()?;
    Some(next)
}

fn finish(prob: &StationarityProblem, d: Vec<f64>, restart: usize, iterations: usize) -> Result<SolverState> {
    let y = &prob.gold.centered;
    let m = moments(y, &d, prob.k);
    let n = d.len() as f64;
    let cov = prob.gold.var_g + m.sigma_gd;
    let lambda = -prob.sign() * (2.0 * prob.gold.var_g + m.sigma_gd) / (prob.k as f64 * n * m.mse * m.mke);
    Ok(SolverState {
        lambda,
        sigma_gd: m.sigma_gd,
        objective_value: cov / m.mse,
        residual_norm: scaled_residual(prob, &d),
        ccc: ccc_from_mse_cov(m.mse, cov)?,
        d,
        restart,
        iterations,
    })
}

/// Largest N for which every sign-pattern corner is used as a start.
pub const MAX_CORNER_N: usize = 10;

fn starting_points(prob: &StationarityProblem, seed: u64, restarts: usize) -> Vec<Vec<f64>> {
    let n = prob.n();
    let mut starts = vec![prob.gold.centered.iter().map(|v| prob.sign() * v).collect::<Vec<f64>>()];
    if n <= MAX_CORNER_N {
        for mask in 0u32..(1 << n) {
            starts.push((0..n).map(|i| if mask >> i & 1 == 1 { -1.0 } else { 1.0 }).collect());
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..restarts {
        starts.push(loop {
            let v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
            if v.iter().any(|x| *x != 0.0) {
                break v;
            }
        });
    }
    starts
}

/// Local optimization from one starting direction.
fn ascend(prob: &StationarityProblem, start: Vec<f64>, restart: usize, max_iters: usize) -> Result<SolverState> {
    let y = &prob.gold.centered;
    let sum_yy: f64 = y.iter().map(|v| v * v).sum();
    let s = prob.sign();
    let k = prob.k;
    let mut d = start;
    project(&mut d, k, prob.lk)?;
    let mut value = s * ratio(y, sum_yy, &d);
    let radius = lp_norm(&d, 2.0)?;
    let mut step = f64::NAN;
    let mut iters = 0;
    while iters < max_iters {
        let res = scaled_residual(prob, &d);
        if res <= tol::RESIDUAL * 1e-3 {
            break;
        }
        iters += 1;
        if res <= 1e-4 {
            if let Some(next) = newton_step(prob, sum_yy, &d) {
                let v = s * ratio(y, sum_yy, &next);
                let tolerance = 1e-12 * value.abs().max(1.0);
                if v >= value - tolerance && scaled_residual(prob, &next) < res {
                    d = next;
                    value = value.max(v);
                    continue;
                }
            }
        }
        let g: Vec<f64> = ratio_gradient(y, sum_yy, &d).into_iter().map(|v| s * v).collect();
        let t = tangent(&g, &constraint_normal(&d, k));
        let tnorm = dot(&t, &t).sqrt();
        if tnorm == 0.0 {
            break;
        }
        if !step.is_finite() {
            step = 0.1 * radius / tnorm;
        }
        let mut moved = false;
        for _ in 0..60 {
            let mut trial: Vec<f64> = d.iter().zip(&t).map(|(a, b)| a + step * b).collect();
            if project(&mut trial, k, prob.lk).is_ok() {
                let v = s * ratio(y, sum_yy, &trial);
                if v > value {
                    d = trial;
                    value = v;
                    step *= 1.5;
                    moved = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !moved {
            break;
        }
    }
    finish(prob, d, restart, iters)
}

/// Multi-start search for the extremum of ρc at the problem's L_k.
///
/// Restart 0 starts from the k = 2 optimum direction (±centered gold). For
/// N ≤ [`MAX_CORNER_N`] every sign pattern `(±1, …, ±1)` follows, since for
/// larger k the extremes sit near these corners and each pattern has its own
/// basin. Then come `restarts` Gaussian directions drawn from `seed`.
///
/// The best converged start wins; values within 1e-12 relative count as ties
/// and go to the earlier start. If no start reaches the residual tolerance,
/// `NotConverged` carries the best iterate.
pub fn solve(prob: &StationarityProblem, seed: u64, max_iters: usize) -> Result<SolverState> {
    solve_with_restarts(prob, seed, max_iters, DEFAULT_RESTARTS)
}

pub fn solve_with_restarts(
    prob: &StationarityProblem,
    seed: u64,
    max_iters: usize,
    restarts: usize,
) -> Result<SolverState> {
    let s = prob.sign();
    let mut best: Option<SolverState> = None;
    let mut best_any: Option<SolverState> = None;
    for (r, start) in starting_points(prob, seed, restarts).into_iter().enumerate() {
        let state = ascend(prob, start, r, max_iters)?;
        let better = |cur: &Option<SolverState>| {
            cur.as_ref()
                .is_none_or(|b| s * (state.objective_value - b.objective_value) > 1e-12 * b.objective_value.abs().max(1.0))
        };
        if better(&best_any) {
            best_any = Some(state.clone());
        }
        if state.residual_norm <= tol::RESIDUAL && better(&best) {
            best = Some(state);
        }
    }
    match best {
        Some(state) => Ok(state),
        None => {
            let state = best_any.expect("at least one restart runs");
            Err(Error::NotConverged {
                iters: max_iters,
                residual: state.residual_norm,
                best: Box::new(state),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapping::{bounds_given_mse, psi_lower, psi_upper};
    use crate::oracles::finite_difference;
    use approx::assert_relative_eq;

    const GOLD: [f64; 5] = [0.4, -1.1, 2.3, 0.9, -0.2];

    fn closed_form(obj: Objective, lk: f64) -> (StationarityProblem, Vec<f64>) {
        let prob = StationarityProblem::new(&GOLD, 2, lk, obj).unwrap();
        let b = bounds_given_mse(&prob.gold, prob.mke()).unwrap();
        let d = match obj {
            Objective::Max => b.err_max.into_vec(),
            Objective::Min => b.err_min.into_vec(),
        };
        (prob, d)
    }

    #[test]
    fn k2_closed_form_vectors_are_stationary() {
        for obj in [Objective::Max, Objective::Min] {
            let (prob, d) = closed_form(obj, 1.7);
            let res = stationarity_residual(&prob, &d).unwrap();
            assert!(res.iter().all(|r| r.abs() < 1e-13), "{res:?}");
        }
        let (prob, _) = closed_form(Objective::Max, 1.7);
        let res = stationarity_residual(&prob, &[1.0, 0.0, 0.5, -0.3, 0.2]).unwrap();
        assert!(res.iter().any(|r| r.abs() > 1e-3));
        assert!(stationarity_residual(&prob, &[0.0; 5]).is_err());
    }

    #[test]
    fn rejects_odd_or_small_k() {
        assert!(StationarityProblem::new(&GOLD, 3, 1.0, Objective::Max).is_err());
        assert!(StationarityProblem::new(&GOLD, 0, 1.0, Objective::Max).is_err());
        assert!(StationarityProblem::new(&GOLD, 4, 0.0, Objective::Max).is_err());
        assert!(matches!(
            StationarityProblem::new(&[1.0, 1.0], 4, 1.0, Objective::Max),
            Err(Error::DegenerateVariance(_))
        ));
    }

    #[test]
    fn analytic_derivatives_match_differences() {
        let y = CenteredGold::new(&GOLD).unwrap().centered;
        let syy: f64 = y.iter().map(|v| v * v).sum();
        let d = [0.3, -0.7, 1.1, 0.2, -0.5];
        let fd = finite_difference(|p| Ok(ratio(&y, syy, p)), &d, 1e-6).unwrap();
        for (a, b) in ratio_gradient(&y, syy, &d).iter().zip(&fd) {
            assert_relative_eq!(a, b, max_relative = 1e-7);
        }
        let hess = ratio_hessian(&y, syy, &d);
        for j in 0..d.len() {
            let col = finite_difference(|p| Ok(ratio_gradient(&y, syy, p)[j]), &d, 1e-6).unwrap();
            for i in 0..d.len() {
                assert_relative_eq!(hess[(j, i)], col[i], max_relative = 1e-6, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn k2_solver_matches_closed_form() {
        for obj in [Objective::Max, Objective::Min] {
            let (prob, d_cf) = closed_form(obj, 2.2);
            let st = solve(&prob, 7, 20_000).unwrap();
            let cos = dot(&st.d, &d_cf) / (dot(&st.d, &st.d).sqrt() * dot(&d_cf, &d_cf).sqrt());
            assert!(cos > 1.0 - 1e-6, "cos {cos}");
            let x = (prob.mke() / prob.gold.var_g).sqrt();
            let want = if obj == Objective::Max { psi_upper(x) } else { psi_lower(x) };
            assert_relative_eq!(st.ccc, want, epsilon = 1e-6);
        }
    }

    #[test]
    fn k4_solution_is_feasible_and_stationary() {
        let prob = StationarityProblem::new(&GOLD, 4, 1.3, Objective::Max).unwrap();
        let st = solve(&prob, 3, 20_000).unwrap();
        let norm = lp_norm(&st.d, 4.0).unwrap();
        assert!((norm - 1.3).abs() / 1.3 <= tol::CONSTRAINT);
        assert!(st.residual_norm <= tol::RESIDUAL);
        assert!(st.sigma_gd > 0.0);
        let min = solve(&StationarityProblem { objective: Objective::Min, ..prob }, 3, 20_000).unwrap();
        assert!(min.sigma_gd < 0.0);
        assert!(min.ccc < st.ccc);
    }

    #[test]
    fn quadratic_has_gold_as_root() {
        let prob = StationarityProblem::new(&GOLD, 4, 1.3, Objective::Max).unwrap();
        let st = solve(&prob, 3, 20_000).unwrap();
        let res = stationarity_residual(&prob, &st.d).unwrap();
        let m = moments(&prob.gold.centered, &st.d, 4);
        let n = GOLD.len() as f64;
        for i in 0..GOLD.len() {
            let (a, b, c) = quadratic_in_gold(&prob, &st.d, i).unwrap();
            assert_eq!(a, 1.0);
            let yi = prob.gold.centered[i];
            let q = yi * yi + b * yi + c;
            assert!(q.abs() < 1e-7 * (yi * yi + c.abs() + (b * yi).abs()), "q={q}");
            // q is the i-th residual rescaled by N·MSE·MkE / (2A·d_i)
            let di = st.d[i];
            let big_a = di.powi(3) * m.mse - di * m.mke;
            assert_relative_eq!(q, res[i] * n * m.mse * m.mke / (2.0 * big_a * di), epsilon = 1e-12, max_relative = 1e-9);
        }
    }

    #[test]
    fn quadratic_singular_cases() {
        let (prob, d) = closed_form(Objective::Max, 1.0);
        assert!(matches!(quadratic_in_gold(&prob, &d, 0), Err(Error::Singularity(_))));
        let prob4 = StationarityProblem::new(&GOLD, 4, 1.0, Objective::Max).unwrap();
        assert!(matches!(
            quadratic_in_gold(&prob4, &[0.0, 1.0, 0.5, 0.2, 0.1], 0),
            Err(Error::Singularity(_))
        ));
    }

    #[test]
    fn not_converged_carries_best_iterate() {
        let prob = StationarityProblem::new(&GOLD, 6, 2.0, Objective::Max).unwrap();
        match solve_with_restarts(&prob, 1, 1, 2) {
            Err(Error::NotConverged { best, .. }) => {
                assert_eq!(best.d.len(), GOLD.len());
                assert!(best.residual_norm > tol::RESIDUAL);
            }
            other => panic!("expected NotConverged, got {other:?}"),
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let prob = StationarityProblem::new(&GOLD, 4, 0.8, Objective::Min).unwrap();
        assert_eq!(solve(&prob, 42, 5000).unwrap(), solve(&prob, 42, 5000).unwrap());
    }
}

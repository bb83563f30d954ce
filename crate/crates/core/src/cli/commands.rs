use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use super::input::{read_table, Column, InputSpec, RawTable};
use super::report::{to_value, Cell, CsvTable, Digest, Report};
use super::{CliError, Command, InputArgs, OracleKind, OutputArgs, RegionKind};
use crate::even_p::{solve_with_restarts, StationarityProblem};
use crate::loss::{loss, loss_gradient, training_trace, LossParams};
use crate::lp_bounds::{envelope_given_lk, region_data_lk, theta_conjugate, theta_grid, theta_range};
use crate::mapping::{bounds_given_mse, ccc_from_mse_cov, region_data_mse, variance_identity_residual, CenteredGold};
use crate::oracles::{lk_sphere_oracle, mse_sphere_oracle, permutation_oracle};
use crate::permutation::{compare_max12, optimal_permutations, Convention, ErrorSet, Objective};
use crate::stats::{self, lp_norm, PairStats};
use crate::tol;

struct Outcome {
    seed: Option<u64>,
    inputs: Vec<Digest>,
    results: Value,
    table: CsvTable,
    /// Print the table rather than the report when neither `--json` nor `--out` is given.
    table_first: bool,
}

impl Outcome {
    fn new(inputs: Vec<Digest>, results: Value, table: CsvTable) -> Self {
        Outcome {
            seed: None,
            inputs,
            results,
            table,
            table_first: false,
        }
    }
}

pub(super) fn execute(cmd: Command, echo: Vec<String>, stdout: &mut dyn Write) -> Result<(), CliError> {
    let (outcome, output) = match cmd {
        Command::Analyze { input, pred_col, output } => (analyze(&input, &pred_col)?, output),
        Command::BoundsMse { input, mse, output } => (bounds_mse(&input, mse)?, output),
        Command::BoundsLk { input, k, lk, theta_steps, output } => (bounds_lk(&input, k, lk, theta_steps)?, output),
        Command::Permute { input, error_col, audit, output } => (permute(&input, &error_col, audit)?, output),
        Command::SolveEvenP { input, k, lk, objective, seed, restarts, max_iters, output } => {
            (solve_even_p(&input, k, lk, objective.into(), seed, restarts, max_iters)?, output)
        }
        Command::Loss {
            input,
            pred_col,
            variant,
            gamma,
            alpha,
            beta,
            alpha_col,
            eps_col,
            beta_col,
            step,
            iters,
            output,
        } => {
            let table = read_table(&input.spec())?;
            let mut params = LossParams::new(variant.into()).with_gamma(gamma).with_alpha(alpha).with_beta(beta);
            if let Some(c) = &alpha_col {
                params.per_sample_alpha = table.column(c)?;
            }
            if let Some(c) = &eps_col {
                params.per_sample_eps = table.column(c)?;
            }
            if let Some(c) = &beta_col {
                params.per_sample_beta = table
                    .column(c)?
                    .into_iter()
                    .map(|b| {
                        (b >= 0.0 && b.fract() == 0.0 && b <= u32::MAX as f64)
                            .then_some(b as u32)
                            .ok_or_else(|| CliError::Input(format!("beta must be a nonnegative integer, got {b}")))
                    })
                    .collect::<Result<_, _>>()?;
            }
            (loss_cmd(&table, &input.gold_col, &pred_col, &params, step, iters)?, output)
        }
        Command::Region { kind, x_max, steps, k, n, sigma_g, theta_steps, output } => {
            (region(kind, x_max, steps, k, n, sigma_g, theta_steps)?, output)
        }
        Command::Audit {
            oracle,
            input,
            format,
            header,
            gold_col,
            error_col,
            n,
            seed,
            trials,
            mse,
            k,
            lk,
            output,
        } => {
            let spec = input.map(|path| InputSpec { path, format, header });
            let inst = AuditInstance::load(spec.as_ref(), &gold_col, &error_col, n, seed)?;
            (audit(oracle, &inst, seed, trials, mse, k, lk)?, output)
        }
    };
    emit(outcome, echo, &output, stdout)
}

fn emit(outcome: Outcome, echo: Vec<String>, output: &OutputArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(format!("writing output: {e}"));
    if let Some(path) = &output.out {
        std::fs::write(path, outcome.table.render())
            .map_err(|e| CliError::Io(format!("writing {}: {e}", path.display())))?;
    } else if outcome.table_first && !output.json {
        return stdout.write_all(outcome.table.render().as_bytes()).map_err(io);
    }
    let report = Report {
        command: echo,
        version: env!("CARGO_PKG_VERSION"),
        seed: outcome.seed,
        inputs: outcome.inputs,
        results: outcome.results,
    };
    let text = if output.json { report.to_json() } else { report.to_text() };
    stdout.write_all(text.as_bytes()).map_err(io)
}

fn columns(headers: &[&str], cols: &[&[f64]]) -> CsvTable {
    let mut t = CsvTable::new(std::iter::once("index").chain(headers.iter().copied()));
    let n = cols.first().map_or(0, |c| c.len());
    for i in 0..n {
        let mut row = vec![Cell::Int(i as i64)];
        row.extend(cols.iter().map(|c| Cell::Num(c[i])));
        t.push(row);
    }
    t
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn read_gold(input: &InputArgs) -> Result<(RawTable, Vec<f64>), CliError> {
    let table = read_table(&input.spec())?;
    let gold = table.column(&input.gold_col)?;
    Ok((table, gold))
}

fn analyze(input: &InputArgs, pred_col: &Column) -> Result<Outcome, CliError> {
    let (table, gold) = read_gold(input)?;
    let pred = table.column(pred_col)?;
    let ps = PairStats::compute(&gold, &pred)?;
    let results = json!({
        "pair_stats": to_value(&ps),
        "ccc_direct": ps.ccc,
        "ccc_via_mse_cov": ccc_from_mse_cov(ps.mse, ps.cov_xy)?,
        "identity_residual": variance_identity_residual(&gold, &pred)?,
    });
    let err: Vec<f64> = pred.iter().zip(&gold).map(|(p, g)| p - g).collect();
    let inputs = vec![Digest::of("gold", &gold)?, Digest::of("pred", &pred)?];
    Ok(Outcome::new(inputs, results, columns(&["gold", "pred", "error"], &[&gold, &pred, &err])))
}

fn bounds_mse(input: &InputArgs, mse: f64) -> Result<Outcome, CliError> {
    let (_, gold) = read_gold(input)?;
    let cg = CenteredGold::new(&gold)?;
    let b = bounds_given_mse(&cg, mse)?;
    let pred_max = add(&gold, &b.err_max);
    let pred_min = add(&gold, &b.err_min);
    let results = json!({
        "mse": mse,
        "sigma_g": cg.sigma(),
        "x": b.x_param,
        "ccc_max": b.ccc_max,
        "ccc_min": b.ccc_min,
        "ccc_attained_max": stats::ccc(&gold, &pred_max)?,
        "ccc_attained_min": stats::ccc(&gold, &pred_min)?,
        "err_max": b.err_max.values(),
        "err_min": b.err_min.values(),
    });
    let table = columns(
        &["gold", "err_max", "err_min", "pred_max", "pred_min"],
        &[&gold, &b.err_max, &b.err_min, &pred_max, &pred_min],
    );
    Ok(Outcome::new(vec![Digest::of("gold", &gold)?], results, table))
}

fn bounds_lk(input: &InputArgs, k: f64, lk: f64, theta_steps: usize) -> Result<Outcome, CliError> {
    let (_, gold) = read_gold(input)?;
    let cg = CenteredGold::new(&gold)?;
    let n = gold.len();
    let range = theta_range(k, n, lk)?;
    let base = envelope_given_lk(k, n, lk, cg.sigma(), 1.0)?;
    let mut table = CsvTable::new(["theta", "sqrt_mse", "ccc_min_theta", "theta_conjugate"]);
    let mut grid = Vec::new();
    for theta in theta_grid(range.theta_max, theta_steps)? {
        let env = envelope_given_lk(k, n, lk, cg.sigma(), theta)?;
        let conj = theta_conjugate(theta, env.x).ok();
        table.push(vec![
            theta.into(),
            (theta * range.mse_min_sqrt).into(),
            env.ccc_min_theta.into(),
            conj.into(),
        ]);
        grid.push(json!({
            "theta": theta,
            "sqrt_mse": theta * range.mse_min_sqrt,
            "ccc_min_theta": env.ccc_min_theta,
            "theta_conjugate": conj,
        }));
    }
    let results = json!({
        "k": k,
        "n": n,
        "lk": lk,
        "sigma_g": cg.sigma(),
        "x": base.x,
        "theta_min": range.theta_min,
        "theta_max": range.theta_max,
        "sqrt_mse_min": range.mse_min_sqrt,
        "sqrt_mse_max": range.mse_max_sqrt,
        "ccc_max": base.ccc_max_prime,
        "ccc_min_outer": base.ccc_min_prime,
        "theta_0": base.theta_0,
        "grid": grid,
    });
    Ok(Outcome::new(vec![Digest::of("gold", &gold)?], results, table))
}

fn convention_name(c: Convention) -> &'static str {
    match c {
        Convention::PredictionMinusGold => "pred_minus_gold",
        Convention::GoldMinusPrediction => "gold_minus_pred",
    }
}

fn permute(input: &InputArgs, error_col: &Column, audit: bool) -> Result<Outcome, CliError> {
    let (table, gold) = read_gold(input)?;
    let errors = table.column(error_col)?;
    let es = ErrorSet::new(&errors)?;
    let opt = optimal_permutations(&gold, &es)?;
    let mut results = json!({
        "n": gold.len(),
        "mu_e": es.mu_e,
        "mse": es.mse,
        "max_comparison": to_value(&compare_max12(&gold, &es)?),
        "max1": to_value(&opt.max1),
        "max2": to_value(&opt.max2),
        "min1": to_value(&opt.min1),
        "min2": to_value(&opt.min2),
    });
    if audit {
        let mut block = serde_json::Map::new();
        for (conv, max, min) in [
            (Convention::PredictionMinusGold, &opt.max1, &opt.min1),
            (Convention::GoldMinusPrediction, &opt.max2, &opt.min2),
        ] {
            let rep = permutation_oracle(&gold, &es, conv)?;
            let agrees = tol::close(rep.best_value, max.formula_value, tol::ALGEBRAIC)
                && tol::close(rep.worst_value, min.formula_value, tol::ALGEBRAIC);
            block.insert(
                convention_name(conv).into(),
                json!({
                    "orderings": rep.trials,
                    "best": rep.best_value,
                    "worst": rep.worst_value,
                    "closed_form_max": max.formula_value,
                    "closed_form_min": min.formula_value,
                    "agrees": agrees,
                }),
            );
        }
        results["audit"] = Value::Object(block);
    }
    let p = |r: &crate::permutation::PermutationResult| r.prediction.values().to_vec();
    let (m1, m2) = (p(&opt.max1), p(&opt.max2));
    let diff: Vec<f64> = m1.iter().zip(&m2).map(|(a, b)| a - b).collect();
    let table = columns(
        &["gold", "pred_max1", "pred_max2", "pred_min1", "pred_min2", "max1_minus_max2"],
        &[&gold, &m1, &m2, &p(&opt.min1), &p(&opt.min2), &diff],
    );
    let inputs = vec![Digest::of("gold", &gold)?, Digest::of("errors", &errors)?];
    Ok(Outcome::new(inputs, results, table))
}

fn solve_even_p(
    input: &InputArgs,
    k: u32,
    lk: f64,
    objective: Objective,
    seed: u64,
    restarts: usize,
    max_iters: usize,
) -> Result<Outcome, CliError> {
    let (_, gold) = read_gold(input)?;
    let prob = StationarityProblem::new(&gold, k, lk, objective)?;
    let st = solve_with_restarts(&prob, seed, max_iters, restarts)?;
    let mut results = json!({
        "k": k,
        "lk": lk,
        "objective": to_value(&objective),
        "mke": prob.mke(),
        "lk_achieved": lp_norm(&st.d, k as f64)?,
        "state": to_value(&st),
    });
    if k == 2 {
        let b = bounds_given_mse(&prob.gold, prob.mke())?;
        let (dir, want) = match objective {
            Objective::Max => (b.err_max.values(), b.ccc_max),
            Objective::Min => (b.err_min.values(), b.ccc_min),
        };
        let dot: f64 = st.d.iter().zip(dir).map(|(a, b)| a * b).sum();
        let cosine = dot / (lp_norm(&st.d, 2.0)? * lp_norm(dir, 2.0)?);
        let agrees = cosine >= 1.0 - 1e-6 && (st.ccc - want).abs() <= 1e-6;
        results["closed_form"] = json!({
            "ccc": want,
            "cosine": cosine,
            "ccc_difference": st.ccc - want,
            "agrees": agrees,
        });
    }
    let pred = add(&gold, &st.d);
    let mut out = Outcome::new(
        vec![Digest::of("gold", &gold)?],
        results,
        columns(&["gold", "d", "pred"], &[&gold, &st.d, &pred]),
    );
    out.seed = Some(seed);
    Ok(out)
}

fn loss_cmd(
    table: &RawTable,
    gold_col: &Column,
    pred_col: &Column,
    params: &LossParams,
    step: f64,
    iters: Option<usize>,
) -> Result<Outcome, CliError> {
    let gold = table.column(gold_col)?;
    let pred = table.column(pred_col)?;
    let value = loss(params, &gold, &pred)?;
    let grad = loss_gradient(params, &gold, &pred)?;
    let mut results = json!({
        "variant": to_value(&params.variant),
        "gamma": params.gamma,
        "alpha": params.alpha,
        "beta": params.beta,
        "loss": value,
        "gradient": grad,
    });
    let table = match iters {
        None => columns(&["gold", "pred", "gradient"], &[&gold, &pred, &grad]),
        Some(iters) => {
            let trace = training_trace(params, &gold, &pred, step, iters)?;
            let mut t = CsvTable::new(["iter", "loss", "mse", "ccc", "step"]);
            for r in &trace.rows {
                t.push(vec![Cell::Int(r.iter as i64), r.loss.into(), r.mse.into(), r.ccc.into(), r.step.into()]);
            }
            results["trace"] = json!({
                "step": step,
                "iters": iters,
                "rows": trace.rows.len(),
                "diverged": trace.diverged,
                "initial": to_value(&trace.rows[0]),
                "final": to_value(trace.rows.last().expect("row 0 always present")),
            });
            t
        }
    };
    let inputs = vec![Digest::of("gold", &gold)?, Digest::of("pred", &pred)?];
    Ok(Outcome::new(inputs, results, table))
}

fn region(
    kind: RegionKind,
    x_max: f64,
    steps: usize,
    k: Option<f64>,
    n: Option<usize>,
    sigma_g: f64,
    theta_steps: usize,
) -> Result<Outcome, CliError> {
    let (results, table) = match kind {
        RegionKind::Mse => {
            let rows = region_data_mse(x_max, steps)?;
            let mut t = CsvTable::new(["x", "psi_upper", "psi_lower"]);
            for r in &rows {
                t.push(vec![r.x.into(), r.psi_upper.into(), r.psi_lower.into()]);
            }
            (json!({"kind": "mse", "x_max": x_max, "rows": rows.len()}), t)
        }
        RegionKind::Lk => {
            let k = k.ok_or_else(|| CliError::Input("region --kind lk needs --k".into()))?;
            let n = n.ok_or_else(|| CliError::Input("region --kind lk needs --n".into()))?;
            let reg = region_data_lk(k, n, sigma_g, x_max, steps, theta_steps)?;
            let mut headers = vec!["x".to_string(), "psi_upper".into(), "psi_lower".into(), "lk".into()];
            headers.extend((0..reg.thetas.len()).map(|j| format!("psi_theta_{j}")));
            let mut t = CsvTable::new(headers);
            for r in &reg.rows {
                let mut row = vec![r.x.into(), r.psi_upper.into(), r.psi_lower_outer.into(), r.lk.into()];
                row.extend(r.psi_lower_theta.iter().map(|v| Cell::Num(*v)));
                t.push(row);
            }
            let results = json!({
                "kind": "lk",
                "k": k,
                "n": n,
                "sigma_g": sigma_g,
                "x_max": x_max,
                "theta_max": reg.theta_max,
                "thetas": reg.thetas,
                "rows": reg.rows.len(),
            });
            (results, t)
        }
    };
    let mut out = Outcome::new(Vec::new(), results, table);
    out.table_first = true;
    Ok(out)
}

struct AuditInstance {
    gold: Vec<f64>,
    errors: Vec<f64>,
    generated: bool,
}

impl AuditInstance {
    fn load(spec: Option<&InputSpec>, gold_col: &Column, error_col: &Column, n: usize, seed: u64) -> Result<Self, CliError> {
        if let Some(spec) = spec {
            let table = read_table(spec)?;
            let gold = table.column(gold_col)?;
            // sampling oracles need only the gold column
            let errors = table.column(error_col).unwrap_or_default();
            return Ok(AuditInstance { gold, errors, generated: false });
        }
        if n < 2 {
            return Err(CliError::Input("--n must be at least 2".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gold = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let errors = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        Ok(AuditInstance { gold, errors, generated: true })
    }
}

fn audit(
    oracle: OracleKind,
    inst: &AuditInstance,
    seed: u64,
    trials: u64,
    mse: Option<f64>,
    k: f64,
    lk: Option<f64>,
) -> Result<Outcome, CliError> {
    let gold = &inst.gold;
    let n = gold.len();
    let mut inputs = vec![Digest::of("gold", gold)?];
    let (results, table) = match oracle {
        OracleKind::Permutation => {
            if inst.errors.len() != n {
                return Err(CliError::Input("permutation audit needs an error column".into()));
            }
            inputs.push(Digest::of("errors", &inst.errors)?);
            let es = ErrorSet::new(&inst.errors)?;
            let opt = optimal_permutations(gold, &es)?;
            let mut block = serde_json::Map::new();
            let mut cols = Vec::new();
            for (conv, max, min) in [
                (Convention::PredictionMinusGold, &opt.max1, &opt.min1),
                (Convention::GoldMinusPrediction, &opt.max2, &opt.min2),
            ] {
                let rep = permutation_oracle(gold, &es, conv)?;
                let agrees = tol::close(rep.best_value, max.formula_value, tol::ALGEBRAIC)
                    && tol::close(rep.worst_value, min.formula_value, tol::ALGEBRAIC);
                block.insert(
                    convention_name(conv).into(),
                    json!({
                        "orderings": rep.trials,
                        "best": rep.best_value,
                        "worst": rep.worst_value,
                        "closed_form_max": max.formula_value,
                        "closed_form_min": min.formula_value,
                        "agrees": agrees,
                    }),
                );
                cols.push(rep.witness_best);
            }
            let results = json!({"oracle": "permutation", "n": n, "generated": inst.generated, "conventions": block});
            let table = columns(&["gold", "best_errors_pred_minus_gold", "best_errors_gold_minus_pred"], &[gold, &cols[0], &cols[1]]);
            (results, table)
        }
        OracleKind::MseSphere => {
            let var_g = stats::population_variance(gold)?;
            let mse = mse.unwrap_or(var_g);
            let rep = mse_sphere_oracle(gold, mse, trials, seed)?;
            let x = (mse / var_g).sqrt();
            let results = json!({
                "oracle": "mse_sphere",
                "n": n,
                "generated": inst.generated,
                "mse": mse,
                "x": x,
                "envelope_upper": crate::mapping::psi_upper(x),
                "envelope_lower": crate::mapping::psi_lower(x),
                "report": to_value(&rep),
            });
            let table = witness_table(gold, &rep.witness_best, &rep.witness_worst);
            (results, table)
        }
        OracleKind::LkSphere => {
            let sigma = stats::population_variance(gold)?.sqrt();
            let lk = lk.unwrap_or((n as f64).sqrt() * sigma);
            let rep = lk_sphere_oracle(gold, k, lk, trials, seed)?;
            let env = envelope_given_lk(k, n, lk, sigma, 1.0)?;
            let results = json!({
                "oracle": "lk_sphere",
                "n": n,
                "generated": inst.generated,
                "k": k,
                "lk": lk,
                "x": env.x,
                "theta_max": env.theta_max,
                "envelope_upper": env.ccc_max_prime,
                "envelope_lower": env.ccc_min_prime,
                "report": to_value(&rep),
            });
            let table = witness_table(gold, &rep.witness_best, &rep.witness_worst);
            (results, table)
        }
    };
    let mut out = Outcome::new(inputs, results, table);
    out.seed = Some(seed);
    Ok(out)
}

fn witness_table(gold: &[f64], best: &[f64], worst: &[f64]) -> CsvTable {
    if best.len() == gold.len() && worst.len() == gold.len() {
        columns(&["gold", "best_errors", "worst_errors"], &[gold, best, worst])
    } else {
        columns(&["gold"], &[gold])
    }
}

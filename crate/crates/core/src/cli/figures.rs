//! Data behind each figure, one table per figure.

use clap::ValueEnum;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::calculus::{evaluate, evaluate_at_lambda, linear_only_per_event, selfish_block_only};
use crate::error::Result;
use crate::markov::{AttackerParams, Method};
use crate::optimizer::{optimize_beta, profitability_threshold, Objective};
use crate::reward::RewardSpec;
use crate::sim::{simulate, LambdaMode, SimConfig};

use super::output::{Cell, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FigureName {
    Interpolation,
    ThresholdAlphas,
    Bernoulli,
    RewComp,
    Sims,
    LinearOnly,
    BlockOnly,
}

impl FigureName {
    pub fn as_str(self) -> &'static str {
        match self {
            FigureName::Interpolation => "interpolation",
            FigureName::ThresholdAlphas => "threshold-alphas",
            FigureName::Bernoulli => "bernoulli",
            FigureName::RewComp => "rew-comp",
            FigureName::Sims => "sims",
            FigureName::LinearOnly => "linear-only",
            FigureName::BlockOnly => "block-only",
        }
    }
}

/// Reward sizes a figure is built from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sizes {
    pub c: f64,
    pub a: f64,
    pub p: f64,
    pub e: f64,
}

impl Default for Sizes {
    fn default() -> Self {
        Self {
            c: 1.0,
            a: 1.0,
            p: 0.25,
            e: 4.0,
        }
    }
}

impl Sizes {
    pub fn block(&self) -> Result<RewardSpec> {
        RewardSpec::constant(self.c)
    }

    pub fn linear_block(&self) -> Result<RewardSpec> {
        RewardSpec::composite([RewardSpec::constant(self.c)?, RewardSpec::linear(self.a)?])
    }

    pub fn full(&self) -> Result<RewardSpec> {
        RewardSpec::standard(self.c, self.a, self.p, self.e)
    }
}

/// Settings for the simulation figure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimSettings {
    pub events: u64,
    pub replicas: u32,
    pub seed: u64,
    pub lambda_mode: LambdaMode,
}

/// `α ∈ {0.05, 0.06, …, 0.45}`.
pub fn alpha_grid() -> Vec<f64> {
    (5..=45).map(|k| k as f64 / 100.0).collect()
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        f64::NAN
    }
}

/// Share of each reward source the attacker collects, per strategy. Each
/// column divides by the total rate of the sources it counts, so honest
/// mining scores `α` everywhere.
pub fn interpolation(sizes: Sizes, gamma: f64) -> Result<Table> {
    let spec = sizes.linear_block()?;
    let rows = alpha_grid()
        .par_iter()
        .map(|&alpha| {
            let selfish = evaluate(
                &spec,
                &AttackerParams::new(alpha, gamma, f64::INFINITY)?,
                Method::ClosedForm,
            )?
            .per_time;
            let lin = optimize_beta(&spec, alpha, gamma, Objective::LINEAR)?;
            let both = optimize_beta(&spec, alpha, gamma, Objective::LINEAR_BLOCK)?;
            Ok(vec![
                Cell::Num(alpha),
                Cell::Num(alpha),
                Cell::Num(ratio(selfish.block, sizes.c)),
                Cell::Num(ratio(lin.objective_value, sizes.a)),
                Cell::Num(ratio(both.objective_value, sizes.c + sizes.a)),
                Cell::Num(lin.beta_star),
                Cell::Num(both.beta_star),
            ])
        })
        .collect::<Result<Vec<_>>>()?;
    let mut t = Table::new(&[
        "alpha",
        "honest",
        "selfish_block",
        "cutoff_linear",
        "cutoff_linear_block",
        "beta_linear",
        "beta_linear_block",
    ]);
    rows.into_iter().for_each(|r| t.push(r));
    Ok(t)
}

/// `γ ∈ {0, 0.05, …, 1}`.
pub fn gamma_grid() -> Vec<f64> {
    (0..=20).map(|k| k as f64 / 20.0).collect()
}

/// Profitability thresholds as a function of γ for block-only,
/// linear-plus-block and full rewards.
pub fn threshold_alphas(sizes: Sizes) -> Result<Table> {
    let block = sizes.block()?;
    let lb = sizes.linear_block()?;
    let full = sizes.full()?;
    let rows = gamma_grid()
        .par_iter()
        .map(|&g| {
            Ok(vec![
                Cell::Num(g),
                profitability_threshold(&block, g, Objective::BLOCK)?.into(),
                profitability_threshold(&lb, g, Objective::LINEAR_BLOCK)?.into(),
                profitability_threshold(&full, g, Objective::TOTAL)?.into(),
            ])
        })
        .collect::<Result<Vec<_>>>()?;
    let mut t = Table::new(&["gamma", "block", "linear_block", "total"]);
    rows.into_iter().for_each(|r| t.push(r));
    Ok(t)
}

/// Shares collected under the full reward by strategies optimizing for the
/// Bernoulli bonus alone and for everything.
pub fn bernoulli(sizes: Sizes, gamma: f64) -> Result<Table> {
    let spec = sizes.full()?;
    let bonus = sizes.p * sizes.e;
    let all = sizes.c + sizes.a + bonus;
    let rows = alpha_grid()
        .par_iter()
        .map(|&alpha| {
            let selfish = evaluate(
                &spec,
                &AttackerParams::new(alpha, gamma, f64::INFINITY)?,
                Method::ClosedForm,
            )?
            .per_time;
            let bern = optimize_beta(&spec, alpha, gamma, Objective::BERNOULLI)?;
            let total = optimize_beta(&spec, alpha, gamma, Objective::TOTAL)?;
            Ok(vec![
                Cell::Num(alpha),
                Cell::Num(alpha),
                Cell::Num(ratio(selfish.block, sizes.c)),
                Cell::Num(ratio(bern.objective_value, bonus)),
                Cell::Num(ratio(total.objective_value, all)),
                Cell::Num(bern.beta_star),
                Cell::Num(total.beta_star),
            ])
        })
        .collect::<Result<Vec<_>>>()?;
    let mut t = Table::new(&[
        "alpha",
        "honest",
        "selfish_block",
        "cutoff_bernoulli",
        "cutoff_total",
        "beta_bernoulli",
        "beta_total",
    ]);
    rows.into_iter().for_each(|r| t.push(r));
    Ok(t)
}

/// Total reward of strategies tuned for different subsets, all evaluated on
/// the full reward.
pub fn rew_comp(sizes: Sizes, gamma: f64) -> Result<Table> {
    let spec = sizes.full()?;
    let honest = sizes.c + sizes.a + sizes.p * sizes.e;
    let rows = alpha_grid()
        .par_iter()
        .map(|&alpha| {
            let selfish = evaluate(
                &spec,
                &AttackerParams::new(alpha, gamma, f64::INFINITY)?,
                Method::ClosedForm,
            )?
            .per_time;
            let mut row = vec![Cell::Num(alpha), Cell::Num(alpha * honest), Cell::Num(selfish.total)];
            for o in [
                Objective::BLOCK,
                Objective::LINEAR,
                Objective::BERNOULLI,
                Objective::TOTAL,
            ] {
                row.push(Cell::Num(optimize_beta(&spec, alpha, gamma, o)?.full_breakdown.total));
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut t = Table::new(&[
        "alpha",
        "honest",
        "selfish",
        "cutoff_block",
        "cutoff_linear",
        "cutoff_bernoulli",
        "cutoff_total",
    ]);
    rows.into_iter().for_each(|r| t.push(r));
    Ok(t)
}

pub const SIM_ALPHAS: [f64; 4] = [0.1, 0.2, 0.3, 0.4];
pub const SIM_BETAS: [f64; 3] = [1.5, 3.0, 5.0];

/// Analytic and simulated per-component rewards and orphan rates.
pub fn sims(sizes: Sizes, gamma: f64, settings: SimSettings) -> Result<Table> {
    let spec = sizes.full()?;
    let points: Vec<(f64, f64)> = SIM_ALPHAS
        .iter()
        .flat_map(|&a| SIM_BETAS.iter().map(move |&b| (a, b)))
        .collect();
    let rows = points
        .par_iter()
        .map(|&(alpha, beta)| {
            let params = AttackerParams::new(alpha, gamma, beta)?;
            let an = evaluate(&spec, &params, Method::ClosedForm)?;
            let mut cfg = SimConfig::new(spec.clone(), params);
            cfg.lambda_mode = settings.lambda_mode;
            cfg.horizon_events = settings.events;
            cfg.replicas = settings.replicas;
            cfg.seed = settings.seed;
            let sim = simulate(&cfg)?;
            let mut row = vec![Cell::Num(alpha), Cell::Num(beta)];
            let quantities = [
                (an.per_time.block, sim.attacker.block, sim.attacker_se.block),
                (an.per_time.linear, sim.attacker.linear, sim.attacker_se.linear),
                (an.per_time.bernoulli, sim.attacker.bernoulli, sim.attacker_se.bernoulli),
                (an.per_time.total, sim.attacker.total, sim.attacker_se.total),
                (
                    an.equilibrium.lambda,
                    sim.empirical_orphan_rate.value,
                    sim.empirical_orphan_rate.se,
                ),
            ];
            for (a, s, se) in quantities {
                row.extend([Cell::Num(a), Cell::Num(s), Cell::Num(se)]);
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut cols = vec!["alpha".to_string(), "beta".to_string()];
    for q in ["block", "linear", "bernoulli", "total", "lambda"] {
        cols.extend([format!("analytic_{q}"), format!("simulated_{q}"), format!("se_{q}")]);
    }
    let mut t = Table {
        columns: cols,
        rows: Vec::new(),
    };
    rows.into_iter().for_each(|r| t.push(r));
    Ok(t)
}

pub const LINEAR_ONLY_ALPHAS: [f64; 3] = [0.2, 0.3, 0.4];
pub const LINEAR_ONLY_LAMBDAS: [f64; 2] = [0.0, 0.5];

/// `β ∈ {0, 0.25, …, 6}`.
pub fn linear_only_betas() -> Vec<f64> {
    (0..=24).map(|k| k as f64 / 4.0).collect()
}

/// Generic path-counting engine against the written-out formula for the
/// pure fee reward, at exogenous orphan rates.
pub fn linear_only(gamma: f64) -> Result<Table> {
    let spec = RewardSpec::linear(1.0)?;
    let mut t = Table::new(&["alpha", "lambda", "beta", "engine", "formula", "abs_diff"]);
    for alpha in LINEAR_ONLY_ALPHAS {
        for lambda in LINEAR_ONLY_LAMBDAS {
            for beta in linear_only_betas() {
                let params = AttackerParams::new(alpha, gamma, beta)?;
                let engine = evaluate_at_lambda(&spec, &params, lambda, Method::Quadrature)?
                    .per_event
                    .total;
                let formula = linear_only_per_event(alpha, gamma, beta, lambda);
                t.push(vec![
                    Cell::Num(alpha),
                    Cell::Num(lambda),
                    Cell::Num(beta),
                    Cell::Num(engine),
                    Cell::Num(formula),
                    Cell::Num((engine - formula).abs()),
                ]);
            }
        }
    }
    Ok(t)
}

pub const BLOCK_ONLY_GAMMAS: [f64; 3] = [0.0, 0.5, 1.0];

/// Classic selfish mining with block rewards only.
pub fn block_only() -> Result<Table> {
    let spec = RewardSpec::constant(1.0)?;
    let mut t = Table::new(&["alpha", "gamma", "honest", "formula", "engine"]);
    for gamma in BLOCK_ONLY_GAMMAS {
        for alpha in alpha_grid() {
            let engine = evaluate(
                &spec,
                &AttackerParams::new(alpha, gamma, f64::INFINITY)?,
                Method::ClosedForm,
            )?;
            t.push(vec![
                Cell::Num(alpha),
                Cell::Num(gamma),
                Cell::Num(alpha),
                Cell::Num(selfish_block_only(alpha, gamma)),
                Cell::Num(engine.per_time.total),
            ]);
        }
    }
    Ok(t)
}

/// Builds the named figure and a JSON description of its fixed inputs.
pub fn build(name: FigureName, sizes: Sizes, gamma: f64, sim: SimSettings) -> Result<(Table, Value)> {
    let grid = json!({ "alpha": [0.05, 0.45, 0.01] });
    Ok(match name {
        FigureName::Interpolation => (interpolation(sizes, gamma)?, grid),
        FigureName::ThresholdAlphas => (threshold_alphas(sizes)?, json!({ "gamma": [0.0, 1.0, 0.05] })),
        FigureName::Bernoulli => (bernoulli(sizes, gamma)?, grid),
        FigureName::RewComp => (rew_comp(sizes, gamma)?, grid),
        FigureName::Sims => (
            sims(sizes, gamma, sim)?,
            json!({ "alpha": SIM_ALPHAS, "beta": SIM_BETAS }),
        ),
        FigureName::LinearOnly => (
            linear_only(gamma)?,
            json!({ "alpha": LINEAR_ONLY_ALPHAS, "lambda": LINEAR_ONLY_LAMBDAS, "beta": [0.0, 6.0, 0.25] }),
        ),
        FigureName::BlockOnly => (
            block_only()?,
            json!({ "alpha": [0.05, 0.45, 0.01], "gamma": BLOCK_ONLY_GAMMAS }),
        ),
    })
}

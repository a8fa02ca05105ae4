//! Monte Carlo simulation of β-cutoff selfish mining against an aggregate
//! honest miner.
//!
//! Each replica draws its own ChaCha8 stream (`seed`, stream = replica
//! index), so `(seed, config)` fully determines the result and replicas run
//! in parallel without changing it.

mod fork;
pub mod stats;
pub mod trace;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::breakdown::RewardBreakdown;
use crate::error::{invalid, Error, Result};
use crate::markov::{solve_equilibrium, AttackerParams};
use crate::reward::RewardSpec;

use fork::{run_replica, ReplicaOutput};
use stats::{breakdown_rate, ratio, Batch, Estimate};
pub use trace::{state_occupancy, write_trace_csv, Action, ChainState, StateOccupancy, TraceRecord, Winner};

pub const MIN_EVENTS: u64 = 10_000;
pub const CALIBRATION_TOL: f64 = 0.002;
pub const CALIBRATION_MAX_ROUNDS: usize = 20;

/// Where the block-production rate `1/(1−λ)` comes from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaMode {
    /// The orphan rate of the analytic equilibrium.
    Analytic,
    /// Adjust the rate until the canonical chain grows at rate 1.
    SelfCalibrating,
    /// A fixed orphan rate.
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub spec: RewardSpec,
    pub params: AttackerParams,
    pub lambda_mode: LambdaMode,
    /// Block-creation events per replica.
    pub horizon_events: u64,
    pub seed: u64,
    pub replicas: u32,
    /// Batches per replica used for standard errors.
    pub batches: u32,
}

impl SimConfig {
    pub fn new(spec: RewardSpec, params: AttackerParams) -> Self {
        Self {
            spec,
            params,
            lambda_mode: LambdaMode::Analytic,
            horizon_events: 1_000_000,
            seed: 0,
            replicas: 1,
            batches: 20,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        self.params.validate()?;
        if self.horizon_events < MIN_EVENTS {
            return Err(invalid(
                "horizon_events",
                self.horizon_events as f64,
                "must be at least 10000",
            ));
        }
        if self.replicas == 0 {
            return Err(invalid("replicas", 0.0, "must be at least 1"));
        }
        if self.batches == 0 {
            return Err(invalid("batches", 0.0, "must be at least 1"));
        }
        if let LambdaMode::Fixed(l) = self.lambda_mode {
            if !(0.0..1.0).contains(&l) {
                return Err(invalid("lambda", l, "must lie in [0, 1)"));
            }
        }
        Ok(())
    }
}

/// Outcome of difficulty self-calibration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub lambda: f64,
    pub rounds: usize,
    pub growth_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    /// Canonical attacker reward per unit time.
    pub attacker: RewardBreakdown,
    pub attacker_se: RewardBreakdown,
    /// The part of `attacker` earned by blocks mined in state 0.
    pub attacker_state0: RewardBreakdown,
    pub attacker_state0_se: RewardBreakdown,
    pub honest: RewardBreakdown,
    pub honest_se: RewardBreakdown,
    /// Orphaned blocks over settled blocks.
    pub empirical_orphan_rate: Estimate,
    /// Canonical blocks per unit time.
    pub canonical_growth_rate: Estimate,
    /// Orphan rate that set the block-production rate.
    pub lambda_used: f64,
    pub calibration: Option<Calibration>,
    pub events: u64,
    pub elapsed_sim_time: f64,
    pub occupancy: StateOccupancy,
}

fn replica_rng(seed: u64, replica: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replica as u64);
    rng
}

fn run_all(config: &SimConfig, lambda: f64) -> Vec<ReplicaOutput> {
    let tau = 1.0 - lambda;
    (0..config.replicas)
        .into_par_iter()
        .map(|r| {
            let mut rng = replica_rng(config.seed, r);
            run_replica(
                &config.spec,
                config.params,
                tau,
                config.horizon_events,
                config.batches as u64,
                &mut rng,
                false,
            )
        })
        .collect()
}

fn summarize(outputs: &[ReplicaOutput], lambda: f64, calibration: Option<Calibration>) -> SimResult {
    let batches: Vec<Batch> = outputs.iter().flat_map(|o| o.batches.iter().copied()).collect();
    let mut total = Batch::default();
    let mut occupancy = StateOccupancy::default();
    for b in &batches {
        total.merge(b);
    }
    for o in outputs {
        occupancy.merge(&o.occupancy);
    }
    let (attacker, attacker_se) = breakdown_rate(&batches, |b| b.attacker);
    let (attacker_state0, attacker_state0_se) = breakdown_rate(&batches, |b| b.attacker_state0);
    let (honest, honest_se) = breakdown_rate(&batches, |b| b.honest);
    let orphan_pairs: Vec<(f64, f64)> = batches
        .iter()
        .map(|b| (b.orphans as f64, (b.orphans + b.canonical) as f64))
        .collect();
    let growth_pairs: Vec<(f64, f64)> = batches.iter().map(|b| (b.canonical as f64, b.time)).collect();
    SimResult {
        attacker,
        attacker_se,
        attacker_state0,
        attacker_state0_se,
        honest,
        honest_se,
        empirical_orphan_rate: ratio(&orphan_pairs),
        canonical_growth_rate: ratio(&growth_pairs),
        lambda_used: lambda,
        calibration,
        events: total.events,
        elapsed_sim_time: total.time,
        occupancy,
    }
}

/// Finds the block-production rate at which the canonical chain grows at
/// rate 1. All rounds reuse the same random streams, so with `S` the summed
/// unit-exponential gaps and `N(τ)` the canonical count, the update is
/// `τ ← N(τ)/S`. The implied orphan rate is `1 − τ`.
pub fn calibrate_lambda(config: &SimConfig) -> Result<Calibration> {
    config.validate()?;
    let mut tau = 1.0;
    let mut growth = f64::NAN;
    for round in 1..=CALIBRATION_MAX_ROUNDS {
        let outputs = run_all(config, 1.0 - tau);
        let canonical: u64 = outputs.iter().flat_map(|o| &o.batches).map(|b| b.canonical).sum();
        let unit: f64 = outputs.iter().map(|o| o.unit_time).sum();
        growth = canonical as f64 / (tau * unit);
        if (growth - 1.0).abs() <= CALIBRATION_TOL {
            return Ok(Calibration {
                lambda: 1.0 - tau,
                rounds: round,
                growth_rate: growth,
            });
        }
        tau = canonical as f64 / unit;
        if !(tau > 0.0 && tau <= 1.0) {
            break;
        }
    }
    Err(Error::CalibrationFailed {
        rounds: CALIBRATION_MAX_ROUNDS,
        growth_rate: growth,
    })
}

fn resolve_lambda(config: &SimConfig) -> Result<(f64, Option<Calibration>)> {
    Ok(match config.lambda_mode {
        LambdaMode::Analytic => (solve_equilibrium(&config.spec, &config.params)?.lambda, None),
        LambdaMode::Fixed(l) => (l, None),
        LambdaMode::SelfCalibrating => {
            let c = calibrate_lambda(config)?;
            (c.lambda, Some(c))
        }
    })
}

/// Runs every replica and reports per-unit-time rewards with standard errors
/// from batch means.
pub fn simulate(config: &SimConfig) -> Result<SimResult> {
    config.validate()?;
    let (lambda, calibration) = resolve_lambda(config)?;
    let outputs = run_all(config, lambda);
    Ok(summarize(&outputs, lambda, calibration))
}

/// Runs replica 0 alone and returns its per-event trace.
pub fn trace_replica(config: &SimConfig) -> Result<(SimResult, Vec<TraceRecord>)> {
    config.validate()?;
    let (lambda, calibration) = resolve_lambda(config)?;
    let mut rng = replica_rng(config.seed, 0);
    let mut out = run_replica(
        &config.spec,
        config.params,
        1.0 - lambda,
        config.horizon_events,
        config.batches as u64,
        &mut rng,
        true,
    );
    let trace = std::mem::take(&mut out.trace);
    Ok((summarize(std::slice::from_ref(&out), lambda, calibration), trace))
}

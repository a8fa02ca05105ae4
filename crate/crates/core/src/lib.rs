//! Expected rewards of β-cutoff selfish mining under static reward functions.
//!
//! The crate has four layers:
//!
//! * [`reward`] describes static rewards `R(t)` (constant, linear fees,
//!   Bernoulli bonuses and their sums) and their conditional laws.
//! * [`markov`] solves the selfish-mining Markov chain together with the
//!   orphan-rate fixed point induced by difficulty adjustment.
//! * [`calculus`] turns per-state rewards into a long-run reward rate, both
//!   in closed form and by generic path-counting quadrature.
//! * [`optimizer`] picks the cutoff β and finds profitability thresholds,
//!   and [`sim`] checks everything against a Monte Carlo fork simulator.

pub mod breakdown;
pub mod calculus;
pub mod cli;
pub mod error;
pub mod markov;
pub mod optimizer;
pub mod quadrature;
pub mod reward;
pub mod sim;

pub use breakdown::{Component, RewardBreakdown};
pub use calculus::{
    attacker_reward, evaluate, evaluate_at_lambda, f0, f_state, honest_benchmark, selfish_block_only, Evaluation,
    F0Cases, PerStateRewards,
};
pub use error::{Error, Result};
pub use markov::{
    hide_probability, orphan_rate, solve_equilibrium, stationary, AttackerParams, Equilibrium, Method,
    StationaryDistribution,
};
pub use optimizer::{optimize_beta, profitability_threshold, sweep, Objective, OptimizationResult};
pub use reward::{Atom, AtomSet, RewardSpec};
pub use sim::{calibrate_lambda, simulate, LambdaMode, SimConfig, SimResult};

#![allow(dead_code)]

use proptest::prelude::*;
use proptest::test_runner::{Config, RngSeed};
use selfish_rewards::RewardSpec;

pub const CASES: u32 = 1000;

/// Fixed-seed configuration shared by every property suite.
pub fn config(seed: u64) -> Config {
    Config {
        cases: CASES,
        rng_seed: RngSeed::Fixed(seed),
        failure_persistence: None,
        ..Config::default()
    }
}

pub fn rhat() -> RewardSpec {
    RewardSpec::standard(1.0, 1.0, 0.25, 4.0).unwrap()
}

/// Parts of a random reward: an optional constant, linear rate and
/// Bernoulli bonus, at least one present.
pub fn spec_parts() -> impl Strategy<Value = (Option<f64>, Option<f64>, Option<(f64, f64)>)> {
    (
        proptest::option::of(0.1..3.0f64),
        proptest::option::of(0.1..2.0f64),
        proptest::option::of((0.05..0.95f64, 0.5..6.0f64)),
    )
        .prop_filter("at least one reward source", |(c, a, b)| {
            c.is_some() || a.is_some() || b.is_some()
        })
}

pub fn build(c: Option<f64>, a: Option<f64>, b: Option<(f64, f64)>) -> RewardSpec {
    let mut parts = Vec::new();
    if let Some(c) = c {
        parts.push(RewardSpec::constant(c).unwrap());
    }
    if let Some(a) = a {
        parts.push(RewardSpec::linear(a).unwrap());
    }
    if let Some((p, e)) = b {
        parts.push(RewardSpec::bernoulli(p, e).unwrap());
    }
    RewardSpec::composite(parts).unwrap()
}

pub fn any_spec() -> impl Strategy<Value = RewardSpec> {
    spec_parts().prop_map(|(c, a, b)| build(c, a, b))
}

/// A cutoff that is either finite or infinite.
pub fn any_beta() -> impl Strategy<Value = f64> {
    prop_oneof![9 => 0.0..12.0f64, 1 => Just(f64::INFINITY)]
}

//! Batch accumulators and ratio-estimator standard errors.

use serde::{Deserialize, Serialize};

use crate::breakdown::RewardBreakdown;

/// Totals collected over one batch of consecutive events.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Batch {
    pub attacker: RewardBreakdown,
    pub attacker_state0: RewardBreakdown,
    pub honest: RewardBreakdown,
    pub canonical: u64,
    pub orphans: u64,
    pub events: u64,
    pub time: f64,
}

impl Batch {
    pub fn merge(&mut self, other: &Batch) {
        self.attacker += other.attacker;
        self.attacker_state0 += other.attacker_state0;
        self.honest += other.honest;
        self.canonical += other.canonical;
        self.orphans += other.orphans;
        self.events += other.events;
        self.time += other.time;
    }
}

/// A ratio `Σ y / Σ x` over batches with its delta-method standard error.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

/// Ratio estimate of `Σ y_b / Σ x_b` with standard error
/// `sqrt(Σ (y_b − R x_b)² / (n(n−1))) / mean(x)`.
pub fn ratio(pairs: &[(f64, f64)]) -> Estimate {
    let n = pairs.len() as f64;
    let sy: f64 = pairs.iter().map(|p| p.0).sum();
    let sx: f64 = pairs.iter().map(|p| p.1).sum();
    if sx <= 0.0 {
        return Estimate {
            value: 0.0,
            se: f64::NAN,
        };
    }
    let r = sy / sx;
    if pairs.len() < 2 {
        return Estimate { value: r, se: f64::NAN };
    }
    let ss: f64 = pairs.iter().map(|&(y, x)| (y - r * x).powi(2)).sum();
    let se = (ss / (n * (n - 1.0))).sqrt() / (sx / n);
    Estimate { value: r, se }
}

/// Rate per unit time of each breakdown component, with standard errors.
pub fn breakdown_rate(
    batches: &[Batch],
    pick: impl Fn(&Batch) -> RewardBreakdown,
) -> (RewardBreakdown, RewardBreakdown) {
    let comp = |f: &dyn Fn(&RewardBreakdown) -> f64| {
        let pairs: Vec<(f64, f64)> = batches.iter().map(|b| (f(&pick(b)), b.time)).collect();
        ratio(&pairs)
    };
    let block = comp(&|r| r.block);
    let linear = comp(&|r| r.linear);
    let bern = comp(&|r| r.bernoulli);
    let total = comp(&|r| r.total);
    let value = RewardBreakdown::new(block.value, linear.value, bern.value);
    let se = RewardBreakdown {
        block: block.se,
        linear: linear.se,
        bernoulli: bern.se,
        total: total.se,
    };
    (value, se)
}

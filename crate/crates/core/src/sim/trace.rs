//! Per-event trace records, CSV export and empirical state occupancy.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

/// A state of the selfish-mining chain, as observed by the simulator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ChainState {
    Zero,
    ZeroPrime,
    ZeroDoublePrime,
    Lead(u32),
}

impl fmt::Display for ChainState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChainState::Zero => f.write_str("0"),
            ChainState::ZeroPrime => f.write_str("0'"),
            ChainState::ZeroDoublePrime => f.write_str("0''"),
            ChainState::Lead(i) => write!(f, "{i}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Winner {
    Attacker,
    Honest,
}

/// What the new block did to the fork structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    /// Published on the public tip at once.
    Publish,
    /// Withheld by the attacker because its reward fell below the cutoff.
    Hide,
    /// Appended to the attacker's private chain.
    Extend,
    /// Honest block that triggers a race against a revealed attacker block.
    Race,
    /// Honest block answered by revealing one more private block.
    Reveal,
    /// Honest block answered by publishing the whole private chain.
    Override,
    /// Block that settles a race.
    Resolve,
}

impl Action {
    pub fn name(self) -> &'static str {
        match self {
            Action::Publish => "publish",
            Action::Hide => "hide",
            Action::Extend => "extend",
            Action::Race => "race",
            Action::Reveal => "reveal",
            Action::Override => "override",
            Action::Resolve => "resolve",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub event: u64,
    pub time: f64,
    pub winner: Winner,
    pub state_before: ChainState,
    pub state_after: ChainState,
    pub action: Action,
    pub reward: f64,
}

/// Writes the trace as CSV with a header row.
pub fn write_trace_csv<W: Write>(records: &[TraceRecord], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "event",
        "time",
        "winner",
        "state_before",
        "state_after",
        "action",
        "reward",
    ])?;
    for r in records {
        w.write_record([
            r.event.to_string(),
            format!("{:.12e}", r.time),
            match r.winner {
                Winner::Attacker => "attacker".to_string(),
                Winner::Honest => "honest".to_string(),
            },
            r.state_before.to_string(),
            r.state_after.to_string(),
            r.action.name().to_string(),
            format!("{:.12e}", r.reward),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Visit counts of the jump chain, one visit per block-creation event.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StateOccupancy {
    pub zero: u64,
    pub zero_prime: u64,
    pub zero_dprime: u64,
    /// `leads[i - 1]` counts visits to lead state `i`.
    pub leads: Vec<u64>,
}

impl StateOccupancy {
    pub fn record(&mut self, s: ChainState) {
        match s {
            ChainState::Zero => self.zero += 1,
            ChainState::ZeroPrime => self.zero_prime += 1,
            ChainState::ZeroDoublePrime => self.zero_dprime += 1,
            ChainState::Lead(i) => {
                let k = i as usize - 1;
                if self.leads.len() <= k {
                    self.leads.resize(k + 1, 0);
                }
                self.leads[k] += 1;
            }
        }
    }

    pub fn merge(&mut self, other: &StateOccupancy) {
        self.zero += other.zero;
        self.zero_prime += other.zero_prime;
        self.zero_dprime += other.zero_dprime;
        if self.leads.len() < other.leads.len() {
            self.leads.resize(other.leads.len(), 0);
        }
        for (a, b) in self.leads.iter_mut().zip(&other.leads) {
            *a += b;
        }
    }

    pub fn visits(&self) -> u64 {
        self.zero + self.zero_prime + self.zero_dprime + self.leads.iter().sum::<u64>()
    }

    /// Visit frequencies in the order `0, 0′, 0″, 1, 2, …`.
    pub fn frequencies(&self) -> Vec<(ChainState, f64)> {
        let n = self.visits().max(1) as f64;
        let mut out = vec![
            (ChainState::Zero, self.zero as f64 / n),
            (ChainState::ZeroPrime, self.zero_prime as f64 / n),
            (ChainState::ZeroDoublePrime, self.zero_dprime as f64 / n),
        ];
        for (k, c) in self.leads.iter().enumerate() {
            out.push((ChainState::Lead(k as u32 + 1), *c as f64 / n));
        }
        out
    }

    pub fn frequency(&self, s: ChainState) -> f64 {
        self.frequencies()
            .into_iter()
            .find(|(t, _)| *t == s)
            .map_or(0.0, |(_, f)| f)
    }
}

/// Empirical occupancy of a trace, counting the state each event starts in.
pub fn state_occupancy(trace: &[TraceRecord]) -> StateOccupancy {
    let mut occ = StateOccupancy::default();
    for r in trace {
        occ.record(r.state_before);
    }
    occ
}

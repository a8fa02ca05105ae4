//! The fork state machine of one simulated replica.
//!
//! Honest miners are collapsed into a single player holding `1 − α` of the
//! hashrate. Block-creation events arrive with exponential gaps of mean
//! `tau`. Rewards of a block are realized when it is mined, from the time
//! elapsed since its actual parent, and credited once the block is final.

use rand::Rng;
use rand_distr::Exp1;

use crate::breakdown::RewardBreakdown;
use crate::markov::AttackerParams;
use crate::reward::RewardSpec;

use super::stats::Batch;
use super::trace::{Action, ChainState, StateOccupancy, TraceRecord, Winner};

#[derive(Debug, Clone, Copy)]
struct Block {
    time: f64,
    parts: RewardBreakdown,
    /// Mined by the attacker while the chain was in state 0.
    from_zero: bool,
}

#[derive(Debug, Clone)]
enum Fork {
    Zero,
    /// A length-1 race between a revealed attacker block and an honest one.
    ZeroPrime {
        attacker: Block,
        honest: Block,
    },
    /// Everyone mines on the attacker's freshly published tip.
    ZeroDoublePrime,
    /// Private attacker blocks beyond the public fork point.
    Lead(Vec<Block>),
}

impl Fork {
    fn state(&self) -> ChainState {
        match self {
            Fork::Zero => ChainState::Zero,
            Fork::ZeroPrime { .. } => ChainState::ZeroPrime,
            Fork::ZeroDoublePrime => ChainState::ZeroDoublePrime,
            Fork::Lead(chain) => ChainState::Lead(chain.len() as u32),
        }
    }
}

/// Everything a replica produces.
#[derive(Debug, Clone, Default)]
pub struct ReplicaOutput {
    pub batches: Vec<Batch>,
    pub occupancy: StateOccupancy,
    /// Sum of the unit-exponential draws behind the inter-event gaps.
    pub unit_time: f64,
    pub trace: Vec<TraceRecord>,
}

struct Runner {
    beta: f64,
    batch: Batch,
}

impl Runner {
    fn credit(&mut self, block: &Block, attacker: bool) {
        self.batch.canonical += 1;
        if attacker {
            self.batch.attacker += block.parts;
            if block.from_zero {
                self.batch.attacker_state0 += block.parts;
            }
        } else {
            self.batch.honest += block.parts;
        }
    }
}

/// Runs `events` block-creation events with mean gap `tau`. The random
/// stream is consumed identically for every `tau`, so runs that differ only
/// in `tau` share their randomness.
pub fn run_replica<R: Rng>(
    spec: &RewardSpec,
    params: AttackerParams,
    tau: f64,
    events: u64,
    batches: u64,
    rng: &mut R,
    keep_trace: bool,
) -> ReplicaOutput {
    let alpha = params.alpha;
    let race_attacker_side = alpha + params.gamma * (1.0 - alpha);
    let batch_len = events.div_ceil(batches.max(1)).max(1);
    let mut run = Runner {
        beta: params.beta,
        batch: Batch::default(),
    };
    let mut out = ReplicaOutput::default();
    let mut fork = Fork::Zero;
    let mut now = 0.0f64;
    let mut batch_start = 0.0f64;
    // Timestamp of the block every honest miner builds on.
    let mut public_tip = 0.0f64;

    for event in 0..events {
        let gap: f64 = rng.sample(Exp1);
        let u: f64 = rng.random();
        out.unit_time += gap;
        now += gap * tau;
        let attacker_wins = u < alpha;
        let winner = if attacker_wins {
            Winner::Attacker
        } else {
            Winner::Honest
        };
        let before = fork.state();
        out.occupancy.record(before);

        // The parent of the new block, which fixes its fee window.
        let parent_time = match (&fork, attacker_wins) {
            (Fork::Lead(chain), true) => chain.last().unwrap().time,
            (Fork::ZeroPrime { attacker, .. }, _) if u < race_attacker_side => attacker.time,
            (Fork::ZeroPrime { honest, .. }, _) => honest.time,
            _ => public_tip,
        };
        let parts = spec.sample_parts(now - parent_time, rng);
        let block = Block {
            time: now,
            parts,
            from_zero: attacker_wins && matches!(fork, Fork::Zero),
        };

        let (next, action) = match fork {
            Fork::Zero => {
                if attacker_wins && parts.total < run.beta {
                    (Fork::Lead(vec![block]), Action::Hide)
                } else {
                    run.credit(&block, attacker_wins);
                    public_tip = now;
                    (Fork::Zero, Action::Publish)
                }
            }
            Fork::ZeroDoublePrime => {
                run.credit(&block, attacker_wins);
                public_tip = now;
                (Fork::Zero, Action::Publish)
            }
            Fork::ZeroPrime { attacker, honest } => {
                if u < race_attacker_side {
                    // The new block sits on the attacker's fork.
                    run.credit(&attacker, true);
                } else {
                    run.credit(&honest, false);
                }
                run.credit(&block, attacker_wins);
                run.batch.orphans += 1;
                public_tip = now;
                (Fork::Zero, Action::Resolve)
            }
            Fork::Lead(mut chain) => {
                if attacker_wins {
                    chain.push(block);
                    (Fork::Lead(chain), Action::Extend)
                } else if chain.len() == 1 {
                    let attacker = chain[0];
                    (
                        Fork::ZeroPrime {
                            attacker,
                            honest: block,
                        },
                        Action::Race,
                    )
                } else if chain.len() == 2 {
                    for b in &chain {
                        run.credit(b, true);
                    }
                    run.batch.orphans += 1;
                    public_tip = chain[1].time;
                    (Fork::ZeroDoublePrime, Action::Override)
                } else {
                    // The lead shrinks by one and stays at least 2, so both
                    // the revealed block and this honest block are settled.
                    run.batch.orphans += 1;
                    let first = chain.remove(0);
                    run.credit(&first, true);
                    (Fork::Lead(chain), Action::Reveal)
                }
            }
        };
        fork = next;

        if keep_trace {
            out.trace.push(TraceRecord {
                event,
                time: now,
                winner,
                state_before: before,
                state_after: fork.state(),
                action,
                reward: parts.total,
            });
        }

        run.batch.events += 1;
        if (event + 1) % batch_len == 0 || event + 1 == events {
            run.batch.time = now - batch_start;
            batch_start = now;
            out.batches.push(std::mem::take(&mut run.batch));
        }
    }
    out
}

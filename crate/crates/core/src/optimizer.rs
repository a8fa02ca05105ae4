//! Choosing the cutoff β and locating profitability thresholds in α.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::breakdown::{Component, RewardBreakdown};
use crate::calculus::{evaluate, honest_benchmark};
use crate::error::{invalid, Error, Result};
use crate::markov::{AttackerParams, Method};
use crate::reward::RewardSpec;

/// Number of interior grid points in the coarse β search.
pub const GRID_POINTS: usize = 400;
/// Search range beyond `C + ΣE`, in mean inter-block times of fee accrual.
pub const SEARCH_SPAN: f64 = 30.0;
pub const GOLDEN_TOL: f64 = 1e-6;
/// An attack counts as profitable only when it beats honest by this much.
pub const PROFIT_MARGIN: f64 = 1e-9;
pub const THRESHOLD_SCAN_STEP: f64 = 0.005;
pub const THRESHOLD_TOL: f64 = 1e-4;

/// The reward components a strategy optimizes for and is judged on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Objective {
    pub block: bool,
    pub linear: bool,
    pub bernoulli: bool,
}

impl Objective {
    pub const BLOCK: Objective = Objective {
        block: true,
        linear: false,
        bernoulli: false,
    };
    pub const LINEAR: Objective = Objective {
        block: false,
        linear: true,
        bernoulli: false,
    };
    pub const BERNOULLI: Objective = Objective {
        block: false,
        linear: false,
        bernoulli: true,
    };
    pub const LINEAR_BLOCK: Objective = Objective {
        block: true,
        linear: true,
        bernoulli: false,
    };
    pub const TOTAL: Objective = Objective {
        block: true,
        linear: true,
        bernoulli: true,
    };

    pub fn new(block: bool, linear: bool, bernoulli: bool) -> Result<Self> {
        if !(block || linear || bernoulli) {
            return Err(Error::InvalidSpec(
                "objective must include at least one component".into(),
            ));
        }
        Ok(Self {
            block,
            linear,
            bernoulli,
        })
    }

    pub fn includes(&self, c: Component) -> bool {
        match c {
            Component::Block => self.block,
            Component::Linear => self.linear,
            Component::Bernoulli => self.bernoulli,
        }
    }

    /// Sum of the selected components.
    pub fn value(&self, b: &RewardBreakdown) -> f64 {
        Component::ALL
            .iter()
            .filter(|c| self.includes(**c))
            .map(|c| b.get(*c))
            .sum()
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if *self == Objective::TOTAL {
            return f.write_str("total");
        }
        let names: Vec<&str> = Component::ALL
            .iter()
            .filter(|c| self.includes(**c))
            .map(|c| c.name())
            .collect();
        f.write_str(&names.join("+"))
    }
}

impl FromStr for Objective {
    type Err = Error;

    /// Accepts `total` or a `+`/`,`-separated subset of
    /// `block`, `linear`, `bernoulli`.
    fn from_str(s: &str) -> Result<Self> {
        if s.trim().eq_ignore_ascii_case("total") {
            return Ok(Objective::TOTAL);
        }
        let mut o = Objective {
            block: false,
            linear: false,
            bernoulli: false,
        };
        for part in s.split(['+', ',']) {
            match part.trim().to_ascii_lowercase().as_str() {
                "block" => o.block = true,
                "linear" => o.linear = true,
                "bernoulli" => o.bernoulli = true,
                other => return Err(Error::InvalidSpec(format!("unknown objective component '{other}'"))),
            }
        }
        Objective::new(o.block, o.linear, o.bernoulli)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub alpha: f64,
    pub gamma: f64,
    pub beta_star: f64,
    pub objective_value: f64,
    pub full_breakdown: RewardBreakdown,
    pub honest_value: f64,
    pub lambda: f64,
}

impl OptimizationResult {
    pub fn excess(&self) -> f64 {
        self.objective_value - self.honest_value
    }
}

struct Probe<'a> {
    spec: &'a RewardSpec,
    base: AttackerParams,
    objective: Objective,
}

impl Probe<'_> {
    fn eval(&self, beta: f64) -> Result<(f64, RewardBreakdown, f64)> {
        let e = evaluate(self.spec, &self.base.with_beta(beta), Method::ClosedForm)?;
        Ok((self.objective.value(&e.per_time), e.per_time, e.equilibrium.lambda))
    }
}

/// The coarse β grid: `C`, 400 evenly spaced interior points up to
/// `C + ΣE + 30·a`, then `+∞`.
pub fn beta_grid(spec: &RewardSpec) -> Vec<f64> {
    let c = spec.block_reward();
    let a = spec.linear_rate();
    let span = spec.max_bonus() + if a > 0.0 { SEARCH_SPAN * a } else { 1.0 };
    let mut grid = Vec::with_capacity(GRID_POINTS + 2);
    grid.push(c);
    for k in 1..=GRID_POINTS {
        grid.push(c + span * k as f64 / GRID_POINTS as f64);
    }
    grid.push(f64::INFINITY);
    grid
}

fn golden_section(probe: &Probe<'_>, mut lo: f64, mut hi: f64) -> Result<(f64, f64)> {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = probe.eval(x1)?.0;
    let mut f2 = probe.eval(x2)?.0;
    while hi - lo > GOLDEN_TOL {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = probe.eval(x1)?.0;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = probe.eval(x2)?.0;
        }
    }
    Ok(if f1 >= f2 { (x1, f1) } else { (x2, f2) })
}

/// Finds the cutoff maximizing the masked attacker reward rate. Honest
/// (`β = C`) and always-withhold (`β = ∞`) are always candidates; the best
/// finite grid point is refined by golden-section search on its bracket.
pub fn optimize_beta(spec: &RewardSpec, alpha: f64, gamma: f64, objective: Objective) -> Result<OptimizationResult> {
    let base = AttackerParams::new(alpha, gamma, spec.block_reward())?;
    spec.validate()?;
    let honest_value = objective.value(&honest_benchmark(spec, alpha));
    let probe = Probe { spec, base, objective };
    let grid = beta_grid(spec);
    let values = grid
        .iter()
        .map(|&b| probe.eval(b).map(|r| r.0))
        .collect::<Result<Vec<f64>>>()?;

    // Ties go to the larger cutoff, so that an always-withhold plateau
    // reports β = ∞.
    let mut best = 0;
    for (k, v) in values.iter().enumerate() {
        if *v >= values[best] {
            best = k;
        }
    }
    let mut beta_star = grid[best];
    let last_finite = grid.len() - 2;
    if best <= last_finite {
        let lo = grid[best.saturating_sub(1)];
        let hi = grid[(best + 1).min(last_finite)];
        if hi > lo {
            let (b, v) = golden_section(&probe, lo, hi)?;
            if v > values[best] {
                beta_star = b;
            }
        }
    }
    let (objective_value, full_breakdown, lambda) = probe.eval(beta_star)?;
    Ok(OptimizationResult {
        alpha,
        gamma,
        beta_star,
        objective_value,
        full_breakdown,
        honest_value,
        lambda,
    })
}

/// Whether the best β-cutoff strategy beats the honest benchmark on the
/// masked components by more than [`PROFIT_MARGIN`].
pub fn is_profitable(spec: &RewardSpec, alpha: f64, gamma: f64, objective: Objective) -> Result<bool> {
    Ok(optimize_beta(spec, alpha, gamma, objective)?.excess() > PROFIT_MARGIN)
}

/// Smallest hashrate at which some β-cutoff strategy is profitable, found by
/// a scan with step 0.005 followed by bisection to 1e-4. Returns `None` when
/// no profitable α exists below 0.5.
pub fn profitability_threshold(spec: &RewardSpec, gamma: f64, objective: Objective) -> Result<Option<f64>> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(invalid("gamma", gamma, "must lie in [0, 1]"));
    }
    let mut lo = 0.0;
    let mut k = 1;
    loop {
        let alpha = k as f64 * THRESHOLD_SCAN_STEP;
        if alpha >= 0.5 - 1e-12 {
            return Ok(None);
        }
        if is_profitable(spec, alpha, gamma, objective)? {
            let mut hi = alpha;
            while hi - lo > THRESHOLD_TOL {
                let mid = 0.5 * (lo + hi);
                if is_profitable(spec, mid, gamma, objective)? {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return Ok(Some(hi));
        }
        lo = alpha;
        k += 1;
    }
}

/// One optimization per `(α, objective)` pair, in grid order, computed in
/// parallel.
pub fn sweep(
    spec: &RewardSpec,
    alphas: &[f64],
    gamma: f64,
    objectives: &[Objective],
) -> Result<Vec<OptimizationResult>> {
    if alphas.is_empty() || objectives.is_empty() {
        return Err(Error::InvalidSpec(
            "sweep needs at least one alpha and one objective".into(),
        ));
    }
    for &a in alphas {
        if !(a > 0.0 && a < 0.5) {
            return Err(invalid("alpha", a, "sweep grid must lie in (0, 0.5)"));
        }
    }
    let jobs: Vec<(f64, Objective)> = alphas
        .iter()
        .flat_map(|&a| objectives.iter().map(move |&o| (a, o)))
        .collect();
    jobs.par_iter()
        .map(|&(a, o)| optimize_beta(spec, a, gamma, o))
        .collect()
}

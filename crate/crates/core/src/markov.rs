//! The β-cutoff selfish-mining Markov chain.
//!
//! States are `0` (no fork), `0′` (a length-1 race), `0″` (the attacker just
//! published its lead-2 chain and everyone mines on it) and `i ≥ 1` (the
//! attacker holds a private chain `i` blocks ahead). Difficulty adjusts so
//! that canonical blocks arrive at rate 1, so blocks are produced at rate
//! `1/(1−λ)` where `λ` is the orphan rate the strategy itself induces.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::quadrature::{exponential_cutoff, integrate_pieces};
use crate::reward::RewardSpec;

pub const FIXED_POINT_TOL: f64 = 1e-12;
pub const FIXED_POINT_MAX_ITER: usize = 200;
const QUAD_TOL: f64 = 1e-13;
const TAIL_EPS: f64 = 1e-14;

/// Attacker hashrate `alpha`, tie-break fraction `gamma` and reward cutoff
/// `beta`. A freshly mined block in state 0 is withheld iff its realized
/// reward is strictly below `beta`; `beta = +∞` is classic selfish mining.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackerParams {
    pub alpha: f64,
    pub gamma: f64,
    pub beta: f64,
}

impl AttackerParams {
    pub fn new(alpha: f64, gamma: f64, beta: f64) -> Result<Self> {
        let p = Self { alpha, gamma, beta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha < 0.5) {
            return Err(invalid("alpha", self.alpha, "must lie in [0, 0.5)"));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(invalid("gamma", self.gamma, "must lie in [0, 1]"));
        }
        if self.beta.is_nan() || self.beta < 0.0 {
            return Err(invalid("beta", self.beta, "must be >= 0 (or +inf)"));
        }
        Ok(())
    }

    pub fn with_beta(self, beta: f64) -> Self {
        Self { beta, ..self }
    }
}

/// How distributional integrals over the block interval are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Exact exponential integrals over each Bernoulli branch.
    #[default]
    ClosedForm,
    /// Breakpoint-aware adaptive quadrature over the atom law of `R(t)`.
    Quadrature,
}

/// Stationary masses of the jump chain. State `i ≥ 1` has mass
/// `p1 · tail_ratio^(i−1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationaryDistribution {
    pub p0: f64,
    pub p0_prime: f64,
    pub p0_dprime: f64,
    pub p1: f64,
    pub tail_ratio: f64,
}

impl StationaryDistribution {
    fn degenerate(alpha: f64) -> Self {
        Self {
            p0: 1.0,
            p0_prime: 0.0,
            p0_dprime: 0.0,
            p1: 0.0,
            tail_ratio: alpha / (1.0 - alpha),
        }
    }

    /// Mass of lead state `i ≥ 1`.
    pub fn lead(&self, i: u32) -> f64 {
        assert!(i >= 1, "lead states start at 1");
        self.p1 * self.tail_ratio.powi(i as i32 - 1)
    }

    /// Total mass, which is 1 up to rounding.
    pub fn total_mass(&self) -> f64 {
        self.p0 + self.p0_prime + self.p0_dprime + self.p1 / (1.0 - self.tail_ratio)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium {
    pub lambda: f64,
    pub h: f64,
    pub stationary: StationaryDistribution,
    pub iterations: usize,
}

impl Equilibrium {
    fn honest(alpha: f64) -> Self {
        Self {
            lambda: 0.0,
            h: 0.0,
            stationary: StationaryDistribution::degenerate(alpha),
            iterations: 0,
        }
    }

    /// Mean time between block-creation events, `1 − λ`.
    pub fn tau(&self) -> f64 {
        1.0 - self.lambda
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(0.0..1.0).contains(&lambda) {
        return Err(invalid("lambda", lambda, "must lie in [0, 1)"));
    }
    Ok(())
}

/// `Pr[C + bonus + a·t < β]` with `t ~ Exp(mean tau)`, for one branch.
pub(crate) fn branch_hide_mass(shift: f64, a: f64, beta: f64, tau: f64) -> f64 {
    if beta == f64::INFINITY {
        return 1.0;
    }
    if shift >= beta {
        return 0.0;
    }
    if a <= 0.0 {
        return 1.0;
    }
    -(-(beta - shift) / (a * tau)).exp_m1()
}

/// Probability that an attacker block mined in state 0 is withheld, i.e.
/// `∫ e^{-t/τ}/τ · Pr[R(t) < β] dt` with `τ = 1 − λ`. The caller applies the
/// factor `α` to get the transition probability `0 → 1`.
pub fn hide_probability(spec: &RewardSpec, params: &AttackerParams, lambda: f64) -> Result<f64> {
    hide_probability_with(spec, params, lambda, Method::ClosedForm)
}

pub fn hide_probability_with(spec: &RewardSpec, params: &AttackerParams, lambda: f64, method: Method) -> Result<f64> {
    spec.validate()?;
    params.validate()?;
    check_lambda(lambda)?;
    let beta = params.beta;
    if beta == f64::INFINITY {
        return Ok(1.0);
    }
    let tau = 1.0 - lambda;
    let h = match method {
        Method::ClosedForm => {
            let c = spec.block_reward();
            let a = spec.linear_rate();
            spec.branches()
                .iter()
                .map(|b| b.prob * branch_hide_mass(c + b.bonus, a, beta, tau))
                .sum::<f64>()
        }
        Method::Quadrature => {
            let model = spec.atom_model();
            let f = |t: f64| [(-t / tau).exp() / tau * model.at(t).cdf_strict(beta)];
            let upper = exponential_cutoff(tau, TAIL_EPS);
            integrate_pieces(&f, &spec.crossing_times(beta), upper, QUAD_TOL)[0]
        }
    };
    Ok(h.clamp(0.0, 1.0))
}

/// Stationary distribution of the chain for hashrate `alpha` and hide
/// probability `h`. With `α·h = 0` the attacker never hides and all mass
/// sits on state 0.
pub fn stationary(alpha: f64, h: f64) -> Result<StationaryDistribution> {
    if !(0.0..0.5).contains(&alpha) {
        return Err(invalid("alpha", alpha, "must lie in [0, 0.5)"));
    }
    if !(0.0..=1.0).contains(&h) {
        return Err(invalid("h", h, "must lie in [0, 1]"));
    }
    let ah = alpha * h;
    if ah == 0.0 {
        return Ok(StationaryDistribution::degenerate(alpha));
    }
    let p1 = 1.0 / (1.0 / ah + 1.0 + (1.0 - alpha) / (1.0 - 2.0 * alpha));
    Ok(StationaryDistribution {
        p0: p1 / ah,
        p0_prime: p1 * (1.0 - alpha),
        p0_dprime: p1 * alpha,
        p1,
        tail_ratio: alpha / (1.0 - alpha),
    })
}

/// Long-run fraction of produced blocks that end up orphaned:
/// `λ = p1 (1−α)(1 + α/(1−2α))`.
pub fn orphan_rate(alpha: f64, p1: f64) -> f64 {
    if p1 == 0.0 {
        return 0.0;
    }
    p1 * (1.0 - alpha) * (1.0 + alpha / (1.0 - 2.0 * alpha))
}

/// Chain quantities at a given (exogenous) orphan rate.
pub fn equilibrium_at(spec: &RewardSpec, params: &AttackerParams, lambda: f64, method: Method) -> Result<Equilibrium> {
    params.validate()?;
    check_lambda(lambda)?;
    if params.alpha == 0.0 {
        return Ok(Equilibrium {
            lambda,
            ..Equilibrium::honest(0.0)
        });
    }
    let h = hide_probability_with(spec, params, lambda, method)?;
    Ok(Equilibrium {
        lambda,
        h,
        stationary: stationary(params.alpha, h)?,
        iterations: 0,
    })
}

/// Solves the difficulty-adjustment fixed point
/// `λ = orphan_rate(α, stationary(α, h(λ)).p1)` by plain iteration from 0.
pub fn solve_equilibrium(spec: &RewardSpec, params: &AttackerParams) -> Result<Equilibrium> {
    solve_equilibrium_with(spec, params, Method::ClosedForm)
}

pub fn solve_equilibrium_with(spec: &RewardSpec, params: &AttackerParams, method: Method) -> Result<Equilibrium> {
    spec.validate()?;
    params.validate()?;
    let alpha = params.alpha;
    if alpha == 0.0 {
        return Ok(Equilibrium::honest(alpha));
    }
    let mut lambda = 0.0;
    let mut step = f64::INFINITY;
    for it in 1..=FIXED_POINT_MAX_ITER {
        let h = hide_probability_with(spec, params, lambda, method)?;
        let st = stationary(alpha, h)?;
        let next = orphan_rate(alpha, st.p1);
        step = (next - lambda).abs();
        lambda = next;
        if step < FIXED_POINT_TOL {
            let h = hide_probability_with(spec, params, lambda, method)?;
            return Ok(Equilibrium {
                lambda,
                h,
                stationary: stationary(alpha, h)?,
                iterations: it,
            });
        }
    }
    Err(Error::NonConvergence {
        iterations: FIXED_POINT_MAX_ITER,
        residual: step,
    })
}

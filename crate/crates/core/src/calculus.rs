//! Per-state attacker rewards and the long-run attacker reward rate.
//!
//! `f_i` is the expected reward of the attacker blocks that end up canonical
//! and were mined while the chain sat in state `i`. Rewards are combined as
//! `p0·f0 + p1·f1 + α Σ_{i≥2} f_i p_{i−1}` per block-creation event and
//! turned into a rate per unit of time by dividing by the mean inter-event
//! time `1 − λ`.

use serde::{Deserialize, Serialize};

use crate::breakdown::RewardBreakdown;
use crate::error::{invalid, Result};
use crate::markov::{equilibrium_at, solve_equilibrium_with, AttackerParams, Equilibrium, Method};
use crate::quadrature::{erlang_cutoff, erlang_log_norm, erlang_pdf_normed, integrate_pieces};
use crate::reward::RewardSpec;

const QUAD_TOL: f64 = 1e-13;
const TAIL_EPS: f64 = 1e-15;
/// The tail series is cut once the remaining terms are bounded by this.
pub const TAIL_TRUNCATION: f64 = 1e-13;

/// The three ways an attacker block mined in state 0 becomes canonical.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct F0Cases {
    /// Reward at or above β: published at once.
    pub case_i: RewardBreakdown,
    /// Reward below β, hidden, and the attacker also finds the next block.
    pub case_ii: RewardBreakdown,
    /// Reward below β, hidden, an honest block forces a race the attacker wins.
    pub case_iii: RewardBreakdown,
}

impl F0Cases {
    pub fn total(&self) -> RewardBreakdown {
        self.case_i + self.case_ii + self.case_iii
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PerStateRewards {
    pub f0: F0Cases,
    pub f1: RewardBreakdown,
    /// `α Σ_{i≥2} f_i p_{i−1}`, stationary weights included.
    pub tail: RewardBreakdown,
}

/// Full result of evaluating a strategy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub equilibrium: Equilibrium,
    pub per_state: PerStateRewards,
    /// Expected canonical attacker reward per block-creation event.
    pub per_event: RewardBreakdown,
    /// Expected canonical attacker reward per unit of time.
    pub per_time: RewardBreakdown,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..0.5).contains(&alpha) {
        return Err(invalid("alpha", alpha, "must lie in [0, 0.5)"));
    }
    Ok(())
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(0.0..1.0).contains(&lambda) {
        return Err(invalid("lambda", lambda, "must lie in [0, 1)"));
    }
    Ok(())
}

/// Coefficient of the withheld mass in `f0`: the attacker wins the next
/// block (`α`) or loses it and then wins the race (`(1−α)(α + γ(1−α))`).
fn hidden_coef(alpha: f64, gamma: f64) -> f64 {
    alpha * alpha + alpha * (1.0 - alpha) * (alpha + gamma * (1.0 - alpha))
}

/// `E[parts(t)·1{R(t) ≥ β}]` and `E[parts(t)·1{R(t) < β}]` integrated
/// against the exponential density of mean `tau`, in closed form.
fn censored_parts_closed(spec: &RewardSpec, beta: f64, tau: f64) -> (RewardBreakdown, RewardBreakdown) {
    let c = spec.block_reward();
    let a = spec.linear_rate();
    let mut above = RewardBreakdown::ZERO;
    let mut below = RewardBreakdown::ZERO;
    for br in spec.branches() {
        let shift = c + br.bonus;
        // Probability and time-weighted mass of the region R ≥ β.
        let (mass_up, time_up) = if beta == f64::INFINITY {
            (0.0, 0.0)
        } else if a <= 0.0 {
            if shift >= beta {
                (1.0, tau)
            } else {
                (0.0, 0.0)
            }
        } else {
            let u = ((beta - shift) / a).max(0.0);
            let e = (-u / tau).exp();
            (e, (tau + u) * e)
        };
        let mass_down = 1.0 - mass_up;
        let time_down = tau - time_up;
        above += RewardBreakdown::new(c * mass_up, a * time_up, br.bonus * mass_up) * br.prob;
        below += RewardBreakdown::new(c * mass_down, a * time_down, br.bonus * mass_down) * br.prob;
    }
    (above, below)
}

fn censored_parts_quadrature(spec: &RewardSpec, beta: f64, tau: f64) -> (RewardBreakdown, RewardBreakdown) {
    let model = spec.atom_model();
    let f = |t: f64| {
        let atoms = model.at(t);
        let below = atoms.parts_strictly_below(beta);
        let above = atoms.mean_parts() - below;
        let w = (-t / tau).exp() / tau;
        [
            w * above.block,
            w * above.linear,
            w * above.bernoulli,
            w * below.block,
            w * below.linear,
            w * below.bernoulli,
        ]
    };
    let upper = erlang_cutoff(1, tau, TAIL_EPS);
    let r = integrate_pieces(&f, &spec.crossing_times(beta), upper, QUAD_TOL);
    (
        RewardBreakdown::new(r[0], r[1], r[2]),
        RewardBreakdown::new(r[3], r[4], r[5]),
    )
}

/// The three cases of `f0` at orphan rate `lambda`.
pub fn f0_cases(spec: &RewardSpec, params: &AttackerParams, lambda: f64, method: Method) -> Result<F0Cases> {
    spec.validate()?;
    params.validate()?;
    check_lambda(lambda)?;
    let (alpha, gamma) = (params.alpha, params.gamma);
    let tau = 1.0 - lambda;
    let (above, below) = match method {
        Method::ClosedForm => censored_parts_closed(spec, params.beta, tau),
        Method::Quadrature => censored_parts_quadrature(spec, params.beta, tau),
    };
    Ok(F0Cases {
        case_i: above * alpha,
        case_ii: below * (alpha * alpha),
        case_iii: below * (hidden_coef(alpha, gamma) - alpha * alpha),
    })
}

/// Expected canonical attacker reward from a block mined in state 0.
pub fn f0(spec: &RewardSpec, params: &AttackerParams, lambda: f64) -> Result<RewardBreakdown> {
    Ok(f0_cases(spec, params, lambda, Method::ClosedForm)?.total())
}

/// `∫ Erlang_k(t) · E[parts(R(t))] dt` by quadrature.
fn erlang_mean_parts(spec: &RewardSpec, k: u32, tau: f64) -> RewardBreakdown {
    let log_norm = erlang_log_norm(k, tau);
    let model = spec.atom_model();
    let f = |t: f64| {
        let m = model.at(t).mean_parts();
        let w = erlang_pdf_normed(k, tau, t, log_norm);
        [w * m.block, w * m.linear, w * m.bernoulli]
    };
    let upper = erlang_cutoff(k, tau, TAIL_EPS);
    let r = integrate_pieces(&f, &[], upper, QUAD_TOL);
    RewardBreakdown::new(r[0], r[1], r[2])
}

/// Contribution `g_j = α(1−α)^j ∫ Erlang_{j+1} E[R]` of the path
/// `H^j A` to every `f_i` with `i > j`.
fn path_term(spec: &RewardSpec, alpha: f64, tau: f64, j: u32, method: Method) -> RewardBreakdown {
    let weight = alpha * (1.0 - alpha).powi(j as i32);
    let mean = match method {
        Method::ClosedForm => RewardBreakdown::new(
            spec.block_reward(),
            spec.linear_rate() * (j as f64 + 1.0) * tau,
            spec.mean_bonus(),
        ),
        Method::Quadrature => erlang_mean_parts(spec, j + 1, tau),
    };
    mean * weight
}

/// Expected reward of the canonicalized attacker block mined in lead state
/// `i`. State 1 shares the two-path set of state 2.
pub fn f_state(spec: &RewardSpec, i: u32, alpha: f64, lambda: f64) -> Result<RewardBreakdown> {
    f_state_with(spec, i, alpha, lambda, Method::ClosedForm)
}

pub fn f_state_with(spec: &RewardSpec, i: u32, alpha: f64, lambda: f64, method: Method) -> Result<RewardBreakdown> {
    spec.validate()?;
    check_alpha(alpha)?;
    check_lambda(lambda)?;
    if i == 0 {
        return Err(invalid("state", 0.0, "lead states start at 1"));
    }
    if alpha == 0.0 {
        return Ok(RewardBreakdown::ZERO);
    }
    let i = i.max(2);
    let tau = 1.0 - lambda;
    Ok(match method {
        Method::ClosedForm => {
            let q = (1.0 - alpha).powi(i as i32);
            let win = 1.0 - q;
            let time = tau * (1.0 - (1.0 + i as f64 * alpha) * q) / alpha;
            RewardBreakdown::new(
                spec.block_reward() * win,
                spec.linear_rate() * time,
                spec.mean_bonus() * win,
            )
        }
        Method::Quadrature => (0..i).map(|j| path_term(spec, alpha, tau, j, method)).sum(),
    })
}

/// Closed form of `α Σ_{i≥2} f_i p_{i−1}` for rewards whose mean is affine
/// in time.
fn tail_closed(spec: &RewardSpec, alpha: f64, tau: f64, p1: f64) -> RewardBreakdown {
    let d = 1.0 - 2.0 * alpha;
    let fixed = 2.0 * alpha * alpha * (1.0 - alpha) / d;
    let time = tau * alpha * alpha * (3.0 - 2.0 * alpha) / d;
    RewardBreakdown::new(
        spec.block_reward() * fixed,
        spec.linear_rate() * time,
        spec.mean_bonus() * fixed,
    ) * p1
}

/// Upper bound on `|g_j|` used to decide where the tail series stops.
fn path_term_bound(spec: &RewardSpec, alpha: f64, tau: f64, j: u32) -> f64 {
    let top = spec.block_reward() + spec.max_bonus() + spec.linear_rate() * (j as f64 + 1.0) * tau;
    alpha * (1.0 - alpha).powi(j as i32) * top
}

/// `α Σ_{i≥2} f_i p_{i−1}` by summing path terms. With `p_{i−1} = p1 r^{i−2}`
/// and `f_i = Σ_{j<i} g_j`, exchanging the sums gives
/// `α p1 Σ_j g_j r^{max(0, j−1)} / (1−r)`. The series is cut once a
/// geometric majorant of the remainder drops below [`TAIL_TRUNCATION`];
/// `extra_terms` adds further terms beyond that point.
pub fn tail_series(
    spec: &RewardSpec,
    alpha: f64,
    lambda: f64,
    p1: f64,
    method: Method,
    extra_terms: u32,
) -> Result<(RewardBreakdown, u32)> {
    spec.validate()?;
    check_alpha(alpha)?;
    check_lambda(lambda)?;
    if alpha == 0.0 || p1 == 0.0 {
        return Ok((RewardBreakdown::ZERO, 0));
    }
    let tau = 1.0 - lambda;
    let r = alpha / (1.0 - alpha);
    let scale = alpha * p1 / (1.0 - r);
    let weight = |j: u32| scale * r.powi(j.saturating_sub(1) as i32);
    let remainder_bound = |from: u32| {
        let mut sum = 0.0;
        let mut k = from;
        loop {
            let b = weight(k) * path_term_bound(spec, alpha, tau, k);
            sum += b;
            if b < 1e-22 || k > from + 100_000 {
                return sum;
            }
            k += 1;
        }
    };
    let mut acc = RewardBreakdown::ZERO;
    let mut j = 0u32;
    while remainder_bound(j) >= TAIL_TRUNCATION {
        acc += path_term(spec, alpha, tau, j, method) * weight(j);
        j += 1;
    }
    for _ in 0..extra_terms {
        acc += path_term(spec, alpha, tau, j, method) * weight(j);
        j += 1;
    }
    Ok((acc, j))
}

impl PerStateRewards {
    /// Per-state rewards at orphan rate `lambda`, with the stationary mass
    /// `p1` needed for the tail aggregate.
    pub fn compute(spec: &RewardSpec, params: &AttackerParams, lambda: f64, p1: f64, method: Method) -> Result<Self> {
        let alpha = params.alpha;
        let tau = 1.0 - lambda;
        let f0 = f0_cases(spec, params, lambda, method)?;
        let f1 = f_state_with(spec, 1, alpha, lambda, method)?;
        let tail = match method {
            Method::ClosedForm => tail_closed(spec, alpha, tau, p1),
            Method::Quadrature => tail_series(spec, alpha, lambda, p1, method, 0)?.0,
        };
        Ok(Self { f0, f1, tail })
    }
}

fn combine(eq: Equilibrium, per_state: PerStateRewards) -> Evaluation {
    let st = eq.stationary;
    let per_event = per_state.f0.total() * st.p0 + per_state.f1 * st.p1 + per_state.tail;
    Evaluation {
        equilibrium: eq,
        per_state,
        per_event,
        per_time: per_event / eq.tau(),
    }
}

fn zero_evaluation(eq: Equilibrium) -> Evaluation {
    Evaluation {
        equilibrium: eq,
        per_state: PerStateRewards::default(),
        per_event: RewardBreakdown::ZERO,
        per_time: RewardBreakdown::ZERO,
    }
}

/// Evaluates the strategy at its own difficulty-adjustment fixed point.
pub fn evaluate(spec: &RewardSpec, params: &AttackerParams, method: Method) -> Result<Evaluation> {
    let eq = solve_equilibrium_with(spec, params, method)?;
    if params.alpha == 0.0 {
        return Ok(zero_evaluation(eq));
    }
    let per_state = PerStateRewards::compute(spec, params, eq.lambda, eq.stationary.p1, method)?;
    Ok(combine(eq, per_state))
}

/// Evaluates the strategy with the orphan rate held at an exogenous value.
pub fn evaluate_at_lambda(
    spec: &RewardSpec,
    params: &AttackerParams,
    lambda: f64,
    method: Method,
) -> Result<Evaluation> {
    let eq = equilibrium_at(spec, params, lambda, method)?;
    if params.alpha == 0.0 {
        return Ok(zero_evaluation(eq));
    }
    let per_state = PerStateRewards::compute(spec, params, lambda, eq.stationary.p1, method)?;
    Ok(combine(eq, per_state))
}

/// Expected canonical attacker reward per unit of time.
pub fn attacker_reward(spec: &RewardSpec, params: &AttackerParams) -> Result<RewardBreakdown> {
    Ok(evaluate(spec, params, Method::ClosedForm)?.per_time)
}

/// Reward rate of an `alpha` miner when everyone is honest: canonical blocks
/// arrive at rate 1 and fees accrue at the linear rate.
pub fn honest_benchmark(spec: &RewardSpec, alpha: f64) -> RewardBreakdown {
    RewardBreakdown::new(
        alpha * spec.block_reward(),
        alpha * spec.linear_rate(),
        alpha * spec.mean_bonus(),
    )
}

/// Reward rate of classic selfish mining (always withhold) with a unit block
/// reward and nothing else.
pub fn selfish_block_only(alpha: f64, gamma: f64) -> f64 {
    if alpha <= 0.0 {
        return 0.0;
    }
    let d = 1.0 - 2.0 * alpha;
    let p1 = 1.0 / (1.0 / alpha + 1.0 + (1.0 - alpha) / d);
    let p0 = p1 / alpha;
    let lambda = p1 * (1.0 - alpha) * (1.0 + alpha / d);
    let f0 = alpha * alpha + alpha * (1.0 - alpha) * (alpha + gamma * (1.0 - alpha));
    let f1 = alpha + alpha * (1.0 - alpha);
    let tail = p1 * 2.0 * alpha * alpha * (1.0 - alpha) / d;
    (p0 * f0 + p1 * f1 + tail) / (1.0 - lambda)
}

/// Per-event attacker reward for the pure fee reward `R(t) = t` at an
/// exogenous orphan rate, written out term by term.
pub fn linear_only_per_event(alpha: f64, gamma: f64, beta: f64, lambda: f64) -> f64 {
    let tau = 1.0 - lambda;
    let d = 1.0 - 2.0 * alpha;
    let tail_w = (-beta / tau).exp();
    let above = tail_w * (beta + tau);
    let below = tau - above;
    let f0 = alpha * above + alpha * alpha * below + alpha * (1.0 - alpha) * (alpha + gamma * (1.0 - alpha)) * below;
    let f1 = tau * (alpha + 2.0 * alpha * (1.0 - alpha));
    let h = 1.0 - tail_w;
    if alpha * h == 0.0 {
        return f0;
    }
    let p1 = 1.0 / (1.0 / (alpha * h) + 1.0 + (1.0 - alpha) / d);
    let p0 = p1 / (alpha * h);
    f0 * p0 + f1 * p1 + p1 * tau * alpha * alpha * (3.0 - 2.0 * alpha) / d
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn rhat() -> RewardSpec {
        RewardSpec::standard(1.0, 1.0, 0.25, 4.0).unwrap()
    }

    fn params(alpha: f64, gamma: f64, beta: f64) -> AttackerParams {
        AttackerParams::new(alpha, gamma, beta).unwrap()
    }

    #[test]
    fn f_state_example() {
        let f = f_state(&rhat(), 2, 1.0 / 3.0, 0.0).unwrap();
        assert_abs_diff_eq!(f.block + f.bernoulli, 10.0 / 9.0, epsilon = 1e-14);
        assert_abs_diff_eq!(f.linear, 7.0 / 9.0, epsilon = 1e-14);
        assert_abs_diff_eq!(f.total, 17.0 / 9.0, epsilon = 1e-14);
        assert_eq!(f_state(&rhat(), 1, 1.0 / 3.0, 0.0).unwrap(), f);
        assert_eq!(f_state(&rhat(), 1, 0.0, 0.0).unwrap().total, 0.0);
        assert!(f_state(&rhat(), 0, 0.2, 0.0).is_err());
    }

    #[test]
    fn f_state_quadrature_matches_three_paths() {
        let lin = RewardSpec::linear(1.0).unwrap();
        let (alpha, lambda): (f64, f64) = (0.3, 0.1);
        let tau = 1.0 - lambda;
        // Paths A, HA, HHA with Erlang means tau, 2 tau, 3 tau.
        let direct = alpha * tau + alpha * (1.0 - alpha) * 2.0 * tau + alpha * (1.0 - alpha).powi(2) * 3.0 * tau;
        let q = f_state_with(&lin, 3, alpha, lambda, Method::Quadrature).unwrap();
        let c = f_state(&lin, 3, alpha, lambda).unwrap();
        assert_abs_diff_eq!(q.total, direct, epsilon = 1e-9);
        assert_abs_diff_eq!(c.total, direct, epsilon = 1e-14);
    }

    #[test]
    fn f0_block_only_example() {
        let c1 = RewardSpec::constant(1.0).unwrap();
        let cases = f0_cases(
            &c1,
            &params(1.0 / 3.0, 0.0, f64::INFINITY),
            2.0 / 9.0,
            Method::ClosedForm,
        )
        .unwrap();
        assert_eq!(cases.case_i.total, 0.0);
        assert_abs_diff_eq!(cases.case_ii.total, 1.0 / 9.0, epsilon = 1e-15);
        assert_abs_diff_eq!(cases.case_iii.total, 2.0 / 27.0, epsilon = 1e-15);
        assert_abs_diff_eq!(cases.total().total, 5.0 / 27.0, epsilon = 1e-15);
    }

    #[test]
    fn f0_never_hide() {
        for (alpha, gamma) in [(0.1, 0.0), (0.3, 0.5), (0.45, 1.0)] {
            let cases = f0_cases(&rhat(), &params(alpha, gamma, 1.0), 0.0, Method::ClosedForm).unwrap();
            assert_eq!(cases.case_ii.total, 0.0);
            assert_eq!(cases.case_iii.total, 0.0);
            assert_abs_diff_eq!(cases.case_i.total, alpha * (1.0 + 1.0 + 1.0), epsilon = 1e-15);
        }
    }

    #[test]
    fn attacker_reward_examples() {
        let z = attacker_reward(&rhat(), &params(0.0, 0.0, 3.0)).unwrap();
        assert_eq!(z, RewardBreakdown::ZERO);
        for gamma in [0.0, 0.5, 1.0] {
            let r = attacker_reward(&rhat(), &params(0.2, gamma, 1.0)).unwrap();
            assert_abs_diff_eq!(r.total, 0.6, epsilon = 1e-12);
        }
    }

    #[test]
    fn block_only_paths_agree() {
        let c1 = RewardSpec::constant(1.0).unwrap();
        for (alpha, gamma) in [(0.4, 0.5), (1.0 / 3.0, 0.0), (0.1, 1.0)] {
            let r = attacker_reward(&c1, &params(alpha, gamma, f64::INFINITY)).unwrap();
            assert_abs_diff_eq!(r.total, selfish_block_only(alpha, gamma), epsilon = 1e-14);
        }
        assert_abs_diff_eq!(selfish_block_only(1.0 / 3.0, 0.0), 1.0 / 3.0, epsilon = 1e-14);
        assert_eq!(selfish_block_only(0.0, 0.0), 0.0);
    }

    #[test]
    fn honest_benchmark_examples() {
        assert_abs_diff_eq!(honest_benchmark(&rhat(), 0.2).total, 0.6, epsilon = 1e-15);
        let cl = RewardSpec::composite([RewardSpec::constant(1.0).unwrap(), RewardSpec::linear(1.0).unwrap()]).unwrap();
        assert_abs_diff_eq!(honest_benchmark(&cl, 0.3).total, 0.6, epsilon = 1e-15);
        assert_eq!(honest_benchmark(&rhat(), 0.0).total, 0.0);
    }

    #[test]
    fn linear_only_formula_matches_engine() {
        let lin = RewardSpec::linear(1.0).unwrap();
        for alpha in [0.2, 0.3, 0.4] {
            for lambda in [0.0, 0.5] {
                for beta in [0.25, 1.0, 2.0, 5.0] {
                    let p = params(alpha, 0.0, beta);
                    let e = evaluate_at_lambda(&lin, &p, lambda, Method::Quadrature).unwrap();
                    let f = linear_only_per_event(alpha, 0.0, beta, lambda);
                    assert!((e.per_event.total - f).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn tail_closed_matches_series() {
        let spec = rhat();
        for alpha in [0.05, 0.25, 0.45] {
            let tau = 0.8;
            let closed = tail_closed(&spec, alpha, tau, 0.1);
            let (series, _) = tail_series(&spec, alpha, 0.2, 0.1, Method::ClosedForm, 0).unwrap();
            assert!(closed.max_abs_diff(&series) < 1e-12, "alpha={alpha}");
        }
    }

    #[test]
    fn quadrature_engine_matches_closed_forms() {
        let spec = rhat();
        for (alpha, gamma, beta) in [(0.3, 0.0, 3.0), (0.15, 0.5, 5.5), (0.45, 0.25, 8.0)] {
            let p = params(alpha, gamma, beta);
            let c = evaluate(&spec, &p, Method::ClosedForm).unwrap();
            let q = evaluate(&spec, &p, Method::Quadrature).unwrap();
            assert!(c.per_time.max_abs_diff(&q.per_time) < 1e-8);
        }
    }
}

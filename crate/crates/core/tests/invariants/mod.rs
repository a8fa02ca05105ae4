//! Randomized invariants, each run for 1000 seeded cases.

use proptest::prelude::*;
use proptest::strategy::Strategy;
use proptest::test_runner::{TestCaseError, TestRunner};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use selfish_rewards::calculus::{evaluate_at_lambda, linear_only_per_event, tail_series};
use selfish_rewards::cli::config::Options;
use selfish_rewards::markov::{hide_probability_with, Method};
use selfish_rewards::optimizer::{beta_grid, is_profitable};
use selfish_rewards::sim::{trace_replica, ChainState};
use selfish_rewards::{
    attacker_reward, evaluate, honest_benchmark, optimize_beta, orphan_rate, selfish_block_only, simulate,
    solve_equilibrium, stationary, AttackerParams, Objective, RewardSpec, SimConfig,
};

use crate::common::{any_beta, any_spec, build, config, rhat, spec_parts};

pub type Outcome = Result<(), String>;
pub type Suite = (&'static str, fn() -> Outcome);

fn check<S>(seed: u64, strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Outcome
where
    S: Strategy,
    S::Value: std::fmt::Debug,
{
    TestRunner::new(config(seed))
        .run(&strategy, test)
        .map_err(|e| e.to_string())
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

pub fn atoms_sum_to_one() -> Outcome {
    check(1, any_spec(), |spec| {
        for k in 0..=100 {
            let t = k as f64 * 0.1;
            let total = spec.atoms_at(t).total_prob();
            prop_assert!((total - 1.0).abs() <= 1e-12, "t = {t}: mass {total}");
        }
        Ok(())
    })
}

pub fn cdf_is_monotone_with_correct_ends() -> Outcome {
    check(2, (any_spec(), 0.0..10.0f64), |(spec, t)| {
        let atoms = spec.atoms_at(t);
        let lo = atoms.atoms.iter().map(|a| a.value).fold(f64::INFINITY, f64::min);
        let hi = atoms.atoms.iter().map(|a| a.value).fold(f64::NEG_INFINITY, f64::max);
        prop_assert_eq!(spec.cdf_at(t, lo - 1e-9), 0.0);
        prop_assert!((spec.cdf_at(t, hi) - 1.0).abs() <= 1e-12);
        let mut prev = 0.0;
        for k in 0..=200 {
            let x = lo - 1.0 + (hi - lo + 2.0) * k as f64 / 200.0;
            let f = spec.cdf_at(t, x);
            prop_assert!(f + 1e-15 >= prev, "cdf decreased at x = {x}");
            prev = f;
        }
        Ok(())
    })
}

pub fn censored_mean_is_monotone_and_converges() -> Outcome {
    check(3, (any_spec(), 0.0..10.0f64), |(spec, t)| {
        let top = spec.block_reward() + spec.linear_rate() * t + spec.max_bonus();
        let mut prev = f64::NEG_INFINITY;
        for k in 0..=100 {
            let beta = (top + 1.0) * k as f64 / 100.0;
            let m = spec.censored_mean_below(t, beta);
            prop_assert!(m + 1e-12 >= prev, "decreased at beta = {beta}");
            prev = m;
        }
        prop_assert!(close(spec.censored_mean_below(t, top + 1.0), spec.mean_at(t), 1e-12));
        prop_assert!(close(
            spec.censored_mean_below(t, f64::INFINITY),
            spec.mean_at(t),
            1e-12
        ));
        Ok(())
    })
}

pub fn composite_mean_is_additive() -> Outcome {
    check(4, (spec_parts(), 0.0..10.0f64), |((c, a, b), t)| {
        let whole = build(c, a, b).mean_at(t);
        let mut sum = 0.0;
        if let Some(c) = c {
            sum += RewardSpec::constant(c).unwrap().mean_at(t);
        }
        if let Some(a) = a {
            sum += RewardSpec::linear(a).unwrap().mean_at(t);
        }
        if let Some((p, e)) = b {
            sum += RewardSpec::bernoulli(p, e).unwrap().mean_at(t);
        }
        prop_assert!(close(whole, sum, 1e-12), "{whole} vs {sum}");
        Ok(())
    })
}

/// Empirical CDF of `n` draws against `cdf_at`, with the two-sided
/// Dvoretzky–Kiefer–Wolfowitz band at confidence 0.999. For a discrete law
/// the supremum is attained at the atoms.
pub fn dkw_within_band(spec: &RewardSpec, t: f64, n: usize, seed: u64) -> Result<(), String> {
    let atoms = spec.atoms_at(t);
    let mut values: Vec<f64> = atoms.atoms.iter().map(|a| a.value).collect();
    values.sort_by(f64::total_cmp);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut at_most = vec![0usize; values.len()];
    for _ in 0..n {
        let x = spec.sample_at(t, &mut rng);
        for (k, v) in values.iter().enumerate() {
            if x <= *v {
                at_most[k] += 1;
            }
        }
    }
    let eps = ((2.0f64 / 0.001).ln() / (2.0 * n as f64)).sqrt();
    for (k, v) in values.iter().enumerate() {
        let dev = (at_most[k] as f64 / n as f64 - spec.cdf_at(t, *v)).abs();
        if dev > eps {
            return Err(format!("deviation {dev} > {eps} at x = {v}"));
        }
    }
    Ok(())
}

pub fn sampling_matches_cdf() -> Outcome {
    check(5, (any_spec(), 0.0..10.0f64, any::<u64>()), |(spec, t, seed)| {
        dkw_within_band(&spec, t, 10_000, seed).map_err(TestCaseError::fail)
    })
}

fn params() -> impl Strategy<Value = (f64, f64, f64)> {
    (0.01..0.49f64, 0.0..=1.0f64, any_beta())
}

pub fn fixed_point_residual() -> Outcome {
    check(6, (any_spec(), params()), |(spec, (alpha, gamma, beta))| {
        let p = AttackerParams::new(alpha, gamma, beta).unwrap();
        let eq = solve_equilibrium(&spec, &p).unwrap();
        let h = selfish_rewards::hide_probability(&spec, &p, eq.lambda).unwrap();
        let image = orphan_rate(alpha, stationary(alpha, h).unwrap().p1);
        prop_assert!((image - eq.lambda).abs() < 1e-10, "residual {}", image - eq.lambda);
        Ok(())
    })
}

pub fn hide_probability_monotone_in_beta() -> Outcome {
    check(
        7,
        (any_spec(), params(), any_beta(), 0.0..0.6f64),
        |(spec, (alpha, gamma, b1), b2, lambda)| {
            let (lo, hi) = if b1 <= b2 { (b1, b2) } else { (b2, b1) };
            let h_lo =
                selfish_rewards::hide_probability(&spec, &AttackerParams::new(alpha, gamma, lo).unwrap(), lambda)
                    .unwrap();
            let h_hi =
                selfish_rewards::hide_probability(&spec, &AttackerParams::new(alpha, gamma, hi).unwrap(), lambda)
                    .unwrap();
            prop_assert!(h_lo <= h_hi + 1e-15, "h({lo}) = {h_lo} > h({hi}) = {h_hi}");
            Ok(())
        },
    )
}

pub fn no_hiding_iff_no_orphans() -> Outcome {
    let beta = prop_oneof![any_beta(), (0.0..3.0f64)];
    check(
        8,
        (any_spec(), 0.01..0.49f64, 0.0..=1.0f64, beta),
        |(spec, alpha, gamma, beta)| {
            let eq = solve_equilibrium(&spec, &AttackerParams::new(alpha, gamma, beta).unwrap()).unwrap();
            prop_assert_eq!(eq.lambda == 0.0, eq.h == 0.0, "lambda {} h {}", eq.lambda, eq.h);
            Ok(())
        },
    )
}

pub fn constant_spec_always_hides_above_cutoff() -> Outcome {
    check(
        9,
        (0.0..5.0f64, 1e-9..5.0f64, 0.01..0.49f64, 0.0..0.99f64),
        |(c, gap, alpha, lambda)| {
            let spec = RewardSpec::constant(c).unwrap();
            let p = AttackerParams::new(alpha, 0.0, c + gap).unwrap();
            prop_assert_eq!(selfish_rewards::hide_probability(&spec, &p, lambda).unwrap(), 1.0);
            Ok(())
        },
    )
}

pub fn hide_probability_quadrature_agrees() -> Outcome {
    check(
        10,
        (1.0..=8.0f64, 0.0..=0.3f64, 0.01..0.49f64),
        |(beta, lambda, alpha)| {
            let p = AttackerParams::new(alpha, 0.0, beta).unwrap();
            let closed = hide_probability_with(&rhat(), &p, lambda, Method::ClosedForm).unwrap();
            let quad = hide_probability_with(&rhat(), &p, lambda, Method::Quadrature).unwrap();
            prop_assert!((closed - quad).abs() < 1e-9, "{closed} vs {quad}");
            Ok(())
        },
    )
}

pub fn closed_form_matches_quadrature() -> Outcome {
    check(
        11,
        (0.05..=0.45f64, 1.0..=8.0f64, 0.0..=0.5f64),
        |(alpha, beta, gamma)| {
            let p = AttackerParams::new(alpha, gamma, beta).unwrap();
            let closed = evaluate(&rhat(), &p, Method::ClosedForm).unwrap();
            let quad = evaluate(&rhat(), &p, Method::Quadrature).unwrap();
            let d = closed.per_time.max_abs_diff(&quad.per_time);
            prop_assert!(d < 1e-8, "difference {d}");
            Ok(())
        },
    )
}

pub fn components_do_not_mix() -> Outcome {
    check(12, (spec_parts(), params()), |((c, a, b), (alpha, gamma, beta))| {
        let spec = build(c, a, b);
        let r = attacker_reward(&spec, &AttackerParams::new(alpha, gamma, beta).unwrap()).unwrap();
        prop_assert!(close(r.total, r.block + r.linear + r.bernoulli, 1e-12));
        if c.is_none() {
            prop_assert_eq!(r.block, 0.0);
        }
        if a.is_none() {
            prop_assert_eq!(r.linear, 0.0);
        }
        if b.is_none() {
            prop_assert_eq!(r.bernoulli, 0.0);
        }
        // Each part scales with its own size when the hiding decision is
        // unaffected, as it is for an always-withholding attacker.
        if beta.is_infinite() {
            let doubled = build(c.map(|c| 2.0 * c), a, b);
            let r2 = attacker_reward(&doubled, &AttackerParams::new(alpha, gamma, beta).unwrap()).unwrap();
            prop_assert!(close(r2.block, 2.0 * r.block, 1e-12));
            prop_assert!(close(r2.linear, r.linear, 1e-12));
            prop_assert!(close(r2.bernoulli, r.bernoulli, 1e-12));
        }
        Ok(())
    })
}

pub fn limits_are_consistent() -> Outcome {
    check(
        13,
        (
            0.01..0.49f64,
            0.0..=1.0f64,
            0.0..12.0f64,
            prop_oneof![Just(0.0), Just(0.5), 0.0..0.9f64],
        ),
        |(alpha, gamma, beta, lambda)| {
            let block = attacker_reward(
                &RewardSpec::constant(1.0).unwrap(),
                &AttackerParams::new(alpha, gamma, f64::INFINITY).unwrap(),
            )
            .unwrap();
            prop_assert!(close(block.total, selfish_block_only(alpha, gamma), 1e-12));
            let p = AttackerParams::new(alpha, gamma, beta).unwrap();
            let engine = evaluate_at_lambda(&RewardSpec::linear(1.0).unwrap(), &p, lambda, Method::Quadrature).unwrap();
            let formula = linear_only_per_event(alpha, gamma, beta, lambda);
            prop_assert!(
                (engine.per_event.total - formula).abs() < 1e-10,
                "{} vs {formula}",
                engine.per_event.total
            );
            Ok(())
        },
    )
}

pub fn cutoff_at_block_reward_is_honest() -> Outcome {
    check(14, (any_spec(), 0.0..0.49f64, 0.0..=1.0f64), |(spec, alpha, gamma)| {
        let p = AttackerParams::new(alpha, gamma, spec.block_reward()).unwrap();
        let r = attacker_reward(&spec, &p).unwrap();
        let h = honest_benchmark(&spec, alpha);
        prop_assert!(r.max_abs_diff(&h) <= 1e-12 * (1.0 + h.total), "{r:?} vs {h:?}");
        prop_assert_eq!(solve_equilibrium(&spec, &p).unwrap().lambda, 0.0);
        Ok(())
    })
}

pub fn tail_truncation_is_tight() -> Outcome {
    check(
        15,
        (any_spec(), 0.01..0.49f64, 0.0..0.9f64, 0.0..1.0f64),
        |(spec, alpha, lambda, p1)| {
            let (base, _) = tail_series(&spec, alpha, lambda, p1, Method::ClosedForm, 0).unwrap();
            let (more, _) = tail_series(&spec, alpha, lambda, p1, Method::ClosedForm, 10).unwrap();
            prop_assert!((more.total - base.total).abs() < 1e-10);
            Ok(())
        },
    )
}

const SINGLES: [Objective; 3] = [Objective::BLOCK, Objective::LINEAR, Objective::BERNOULLI];

fn sized_rhat() -> impl Strategy<Value = RewardSpec> {
    (0.25..2.0f64, 0.1..0.5f64, 2.0..6.0f64).prop_map(|(a, p, e)| RewardSpec::standard(1.0, a, p, e).unwrap())
}

pub fn total_objective_dominates() -> Outcome {
    check(
        16,
        (sized_rhat(), 0.01..0.49f64, 0.0..=1.0f64),
        |(spec, alpha, gamma)| {
            let best = optimize_beta(&spec, alpha, gamma, Objective::TOTAL).unwrap();
            for obj in SINGLES {
                let other = optimize_beta(&spec, alpha, gamma, obj).unwrap();
                prop_assert!(
                    best.full_breakdown.total >= other.full_breakdown.total - 1e-9,
                    "{obj}: {} > {}",
                    other.full_breakdown.total,
                    best.full_breakdown.total
                );
            }
            Ok(())
        },
    )
}

/// Profitable sets are nested, which is what ordered thresholds mean.
pub fn profitable_sets_are_nested() -> Outcome {
    check(17, (sized_rhat(), 0.01..0.49f64), |(spec, alpha)| {
        let block = is_profitable(&spec, alpha, 0.0, Objective::BLOCK).unwrap();
        let linear_block = is_profitable(&spec, alpha, 0.0, Objective::LINEAR_BLOCK).unwrap();
        let total = is_profitable(&spec, alpha, 0.0, Objective::TOTAL).unwrap();
        prop_assert!(
            !block || linear_block,
            "block profitable but not linear+block at {alpha}"
        );
        prop_assert!(
            !linear_block || total,
            "linear+block profitable but not total at {alpha}"
        );
        Ok(())
    })
}

pub fn optimum_beats_every_grid_point() -> Outcome {
    let objective = prop_oneof![
        Just(Objective::TOTAL),
        Just(Objective::LINEAR_BLOCK),
        Just(Objective::BLOCK)
    ];
    check(
        18,
        (sized_rhat(), 0.01..0.49f64, 0.0..=1.0f64, objective),
        |(spec, alpha, gamma, obj)| {
            let r = optimize_beta(&spec, alpha, gamma, obj).unwrap();
            for beta in beta_grid(&spec) {
                let e = evaluate(
                    &spec,
                    &AttackerParams::new(alpha, gamma, beta).unwrap(),
                    Method::ClosedForm,
                )
                .unwrap();
                prop_assert!(
                    obj.value(&e.per_time) <= r.objective_value + 1e-12,
                    "beta {beta} beats beta* {}",
                    r.beta_star
                );
            }
            Ok(())
        },
    )
}

pub fn block_profitability_monotone_in_gamma() -> Outcome {
    check(19, (0.01..0.49f64, 0.0..=1.0f64, 0.0..=1.0f64), |(alpha, g1, g2)| {
        let (lo, hi) = if g1 <= g2 { (g1, g2) } else { (g2, g1) };
        let spec = RewardSpec::constant(1.0).unwrap();
        let at_lo = is_profitable(&spec, alpha, lo, Objective::BLOCK).unwrap();
        let at_hi = is_profitable(&spec, alpha, hi, Objective::BLOCK).unwrap();
        prop_assert!(!at_lo || at_hi, "profitable at gamma {lo} but not {hi}");
        Ok(())
    })
}

fn sim_config(spec: RewardSpec, alpha: f64, gamma: f64, beta: f64, seed: u64) -> SimConfig {
    let mut c = SimConfig::new(spec, AttackerParams::new(alpha, gamma, beta).unwrap());
    c.horizon_events = 10_000;
    c.seed = seed;
    c.batches = 4;
    c
}

/// Fees persist: the linear rewards of canonical blocks telescope to the
/// timestamp of the last canonical block, so they sum to at most `a` times
/// the elapsed time, and the shortfall is the unsettled stretch at the end.
pub fn canonical_fees_telescope() -> Outcome {
    check(
        20,
        (0.1..2.0f64, params(), any::<u64>()),
        |(a, (alpha, gamma, beta), seed)| {
            let cfg = sim_config(RewardSpec::linear(a).unwrap(), alpha, gamma, beta, seed);
            let (r, trace) = trace_replica(&cfg).unwrap();
            let credited = (r.attacker.linear + r.honest.linear) * r.elapsed_sim_time;
            let elapsed = r.elapsed_sim_time;
            prop_assert!(credited <= a * elapsed * (1.0 + 1e-9), "{credited} > {}", a * elapsed);
            // The last canonical block is no earlier than the last event at
            // which the chain was settled in state 0.
            let last_settled = trace
                .iter()
                .rev()
                .find(|t| t.state_after == ChainState::Zero)
                .map_or(0.0, |t| t.time);
            prop_assert!(
                credited >= a * last_settled * (1.0 - 1e-9),
                "{credited} < {}",
                a * last_settled
            );
            let mut prev = -1.0;
            for rec in &trace {
                prop_assert!(rec.time > prev);
                prev = rec.time;
            }
            Ok(())
        },
    )
}

/// With a sure bonus of size `E` every canonical block carries exactly `E`
/// and orphans carry nothing.
pub fn orphan_bonuses_are_never_paid() -> Outcome {
    check(
        21,
        (0.5..6.0f64, params(), any::<u64>()),
        |(e, (alpha, gamma, beta), seed)| {
            let cfg = sim_config(RewardSpec::bernoulli(1.0, e).unwrap(), alpha, gamma, beta, seed);
            let r = simulate(&cfg).unwrap();
            let paid = (r.attacker.bernoulli + r.honest.bernoulli) * r.elapsed_sim_time;
            let canonical = r.canonical_growth_rate.value * r.elapsed_sim_time;
            prop_assert!(close(paid, e * canonical.round(), 1e-9), "{paid} vs {}", e * canonical);
            Ok(())
        },
    )
}

pub fn simulation_is_deterministic() -> Outcome {
    check(
        22,
        (any_spec(), params(), any::<u64>()),
        |(spec, (alpha, gamma, beta), seed)| {
            let cfg = sim_config(spec, alpha, gamma, beta, seed);
            prop_assert_eq!(simulate(&cfg).unwrap(), simulate(&cfg).unwrap());
            Ok(())
        },
    )
}

fn options() -> impl Strategy<Value = Options> {
    (
        proptest::option::of(0.0..0.5f64),
        proptest::option::of(0.0..=1.0f64),
        proptest::option::of(any_beta()),
        proptest::option::of(0.1..3.0f64),
        proptest::option::of(any::<u64>()),
        proptest::option::of(10_000..10_000_000u64),
        proptest::option::of(1..16u32),
        proptest::option::of(prop_oneof![Just("csv".to_string()), Just("json".to_string())]),
    )
        .prop_map(
            |(alpha, gamma, beta, block_reward, seed, events, replicas, format)| Options {
                alpha,
                gamma,
                beta,
                block_reward,
                seed,
                events,
                replicas,
                format,
                ..Options::default()
            },
        )
}

/// A config file and flags compose with the flags winning field by field.
pub fn flags_override_config_file() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("run.json");
    check(23, (options(), options()), |(file, flags)| {
        std::fs::write(&path, serde_json::to_string(&file).unwrap()).unwrap();
        let merged = Options {
            config: Some(path.clone()),
            ..flags.clone()
        }
        .resolve()
        .unwrap();
        macro_rules! pick {
            ($f:ident) => {
                prop_assert_eq!(merged.$f.clone(), flags.$f.clone().or(file.$f.clone()));
            };
        }
        pick!(alpha);
        pick!(gamma);
        pick!(beta);
        pick!(block_reward);
        pick!(seed);
        pick!(events);
        pick!(replicas);
        pick!(format);
        Ok(())
    })
}

pub const SUITES: &[Suite] = &[
    ("atom masses sum to one", atoms_sum_to_one),
    ("cdf monotone with correct ends", cdf_is_monotone_with_correct_ends),
    (
        "censored mean monotone and convergent",
        censored_mean_is_monotone_and_converges,
    ),
    ("composite mean additive", composite_mean_is_additive),
    ("samples inside DKW band", sampling_matches_cdf),
    ("fixed-point residual", fixed_point_residual),
    ("hide probability monotone in beta", hide_probability_monotone_in_beta),
    ("no hiding iff no orphans", no_hiding_iff_no_orphans),
    (
        "constant reward hides above cutoff",
        constant_spec_always_hides_above_cutoff,
    ),
    ("hide probability quadrature agrees", hide_probability_quadrature_agrees),
    ("closed form matches quadrature", closed_form_matches_quadrature),
    ("components do not mix", components_do_not_mix),
    ("limit consistency", limits_are_consistent),
    ("cutoff at block reward is honest", cutoff_at_block_reward_is_honest),
    ("tail truncation tight", tail_truncation_is_tight),
    ("total objective dominates", total_objective_dominates),
    ("profitable sets nested", profitable_sets_are_nested),
    ("optimum beats grid", optimum_beats_every_grid_point),
    (
        "block profitability monotone in gamma",
        block_profitability_monotone_in_gamma,
    ),
    ("canonical fees telescope", canonical_fees_telescope),
    ("orphan bonuses never paid", orphan_bonuses_are_never_paid),
    ("simulation deterministic", simulation_is_deterministic),
    ("flags override config file", flags_override_config_file),
];

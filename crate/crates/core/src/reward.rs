//! Static reward functions and their conditional laws.
//!
//! A reward `R(t)` depends only on the time `t` elapsed since the parent
//! block. Every supported source is deterministic given `t` (a constant or a
//! linear fee stream) or an independent Bernoulli bonus, so the law of `R(t)`
//! is a finite set of atoms whose values move linearly in `t`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::breakdown::RewardBreakdown;
use crate::error::{Error, Result};

/// Atom values closer than this are merged.
pub const MERGE_TOL: f64 = 1e-12;

/// Declarative description of a static reward source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpecJson", into = "SpecJson")]
pub enum RewardSpec {
    /// A fixed amount `c` per block.
    Constant { c: f64 },
    /// Fees accruing at rate `a` per unit of time since the parent block.
    Linear { a: f64 },
    /// A bonus `e` that occurs independently with probability `p`.
    Bernoulli { p: f64, e: f64 },
    /// The sum of several sources. Always flat and non-empty when built
    /// through [`RewardSpec::composite`].
    Composite(Vec<RewardSpec>),
}

/// One independent Bernoulli trial of a flattened spec.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trial {
    pub p: f64,
    pub e: f64,
}

/// One outcome of the Bernoulli trials: the summed bonus and its probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Branch {
    pub prob: f64,
    pub bonus: f64,
}

/// A support point of `R(t)` with its probability and per-source split.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub value: f64,
    pub prob: f64,
    pub parts: RewardBreakdown,
}

/// Exact discrete conditional law of `R(t)` at a fixed `t`, sorted by value.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomSet {
    pub atoms: Vec<Atom>,
}

/// Block reward, fee rate and bonus branches of a spec; [`AtomModel::at`]
/// gives the atoms at any elapsed time.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomModel {
    block: f64,
    rate: f64,
    branches: Vec<Branch>,
}

impl AtomModel {
    pub fn at(&self, t: f64) -> AtomSet {
        let lin = self.rate * t;
        let atoms = self
            .branches
            .iter()
            .map(|b| Atom {
                value: self.block + lin + b.bonus,
                prob: b.prob,
                parts: RewardBreakdown::new(self.block, lin, b.bonus),
            })
            .collect();
        AtomSet { atoms }
    }
}

fn check_nonneg(name: &'static str, v: f64) -> Result<()> {
    if !v.is_finite() || v < 0.0 {
        return Err(Error::InvalidSpec(format!("{name} must be finite and >= 0, got {v}")));
    }
    Ok(())
}

impl RewardSpec {
    pub fn constant(c: f64) -> Result<Self> {
        let s = RewardSpec::Constant { c };
        s.validate()?;
        Ok(s)
    }

    pub fn linear(a: f64) -> Result<Self> {
        let s = RewardSpec::Linear { a };
        s.validate()?;
        Ok(s)
    }

    pub fn bernoulli(p: f64, e: f64) -> Result<Self> {
        let s = RewardSpec::Bernoulli { p, e };
        s.validate()?;
        Ok(s)
    }

    /// Builds a flat composite. Nested composites are spliced in and all
    /// constant terms are merged into one (placed where the first appeared).
    /// A single resulting part is returned unwrapped.
    pub fn composite(parts: impl IntoIterator<Item = RewardSpec>) -> Result<Self> {
        let mut flat = Vec::new();
        let mut stack: Vec<RewardSpec> = parts.into_iter().collect();
        stack.reverse();
        while let Some(s) = stack.pop() {
            match s {
                RewardSpec::Composite(inner) => stack.extend(inner.into_iter().rev()),
                other => {
                    other.validate()?;
                    flat.push(other);
                }
            }
        }
        if flat.is_empty() {
            return Err(Error::InvalidSpec("composite must contain at least one part".into()));
        }
        let mut merged: Vec<RewardSpec> = Vec::with_capacity(flat.len());
        let mut const_slot: Option<usize> = None;
        for s in flat {
            if let RewardSpec::Constant { c } = s {
                if let Some(i) = const_slot {
                    if let RewardSpec::Constant { c: acc } = &mut merged[i] {
                        *acc += c;
                    }
                    continue;
                }
                const_slot = Some(merged.len());
            }
            merged.push(s);
        }
        if merged.len() == 1 {
            return Ok(merged.pop().unwrap());
        }
        Ok(RewardSpec::Composite(merged))
    }

    /// The combined reward `C + a·t + E·1[X = 1]` with `X ~ Bernoulli(p)`.
    pub fn standard(c: f64, a: f64, p: f64, e: f64) -> Result<Self> {
        RewardSpec::composite([
            RewardSpec::constant(c)?,
            RewardSpec::linear(a)?,
            RewardSpec::bernoulli(p, e)?,
        ])
    }

    /// Checks the parameter ranges and the flat, non-empty composite shape.
    pub fn validate(&self) -> Result<()> {
        match *self {
            RewardSpec::Constant { c } => check_nonneg("constant", c),
            RewardSpec::Linear { a } => check_nonneg("linear rate", a),
            RewardSpec::Bernoulli { p, e } => {
                check_nonneg("bernoulli size", e)?;
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::InvalidSpec(format!("bernoulli p must be in [0,1], got {p}")));
                }
                Ok(())
            }
            RewardSpec::Composite(ref parts) => {
                if parts.is_empty() {
                    return Err(Error::InvalidSpec("composite must contain at least one part".into()));
                }
                for part in parts {
                    if matches!(part, RewardSpec::Composite(_)) {
                        return Err(Error::InvalidSpec(
                            "nested composite; build with RewardSpec::composite".into(),
                        ));
                    }
                    part.validate()?;
                }
                Ok(())
            }
        }
    }

    fn leaves(&self) -> Vec<&RewardSpec> {
        match self {
            RewardSpec::Composite(parts) => parts.iter().flat_map(|p| p.leaves()).collect(),
            leaf => vec![leaf],
        }
    }

    /// Sum of all constant terms.
    pub fn block_reward(&self) -> f64 {
        self.leaves()
            .iter()
            .map(|s| match s {
                RewardSpec::Constant { c } => *c,
                _ => 0.0,
            })
            .sum()
    }

    /// Sum of all linear rates.
    pub fn linear_rate(&self) -> f64 {
        self.leaves()
            .iter()
            .map(|s| match s {
                RewardSpec::Linear { a } => *a,
                _ => 0.0,
            })
            .sum()
    }

    pub fn trials(&self) -> Vec<Trial> {
        self.leaves()
            .iter()
            .filter_map(|s| match s {
                RewardSpec::Bernoulli { p, e } => Some(Trial { p: *p, e: *e }),
                _ => None,
            })
            .collect()
    }

    /// Expected Bernoulli bonus per block, `Σ p·E`.
    pub fn mean_bonus(&self) -> f64 {
        self.trials().iter().map(|t| t.p * t.e).sum()
    }

    /// Largest possible Bernoulli bonus, `Σ E`.
    pub fn max_bonus(&self) -> f64 {
        self.trials().iter().map(|t| t.e).sum()
    }

    /// Law of the summed Bernoulli bonus, sorted by bonus, with equal bonuses
    /// merged and zero-probability outcomes dropped.
    pub fn branches(&self) -> Vec<Branch> {
        let mut out = vec![Branch { prob: 1.0, bonus: 0.0 }];
        for trial in self.trials() {
            let mut next = Vec::with_capacity(out.len() * 2);
            for b in &out {
                next.push(Branch {
                    prob: b.prob * (1.0 - trial.p),
                    bonus: b.bonus,
                });
                next.push(Branch {
                    prob: b.prob * trial.p,
                    bonus: b.bonus + trial.e,
                });
            }
            out = merge_branches(next);
        }
        out
    }

    /// Exact conditional law of `R(t)`.
    pub fn atoms_at(&self, t: f64) -> AtomSet {
        self.atom_model().at(t)
    }

    /// The time-independent part of the atom structure, for callers that
    /// need [`RewardSpec::atoms_at`] at many times.
    pub fn atom_model(&self) -> AtomModel {
        AtomModel {
            block: self.block_reward(),
            rate: self.linear_rate(),
            branches: self.branches(),
        }
    }

    /// `Pr[R(t) ≤ x]`.
    pub fn cdf_at(&self, t: f64, x: f64) -> f64 {
        self.atoms_at(t).cdf(x)
    }

    pub fn mean_at(&self, t: f64) -> f64 {
        self.block_reward() + self.linear_rate() * t + self.mean_bonus()
    }

    /// Expected per-source split of `R(t)`.
    pub fn mean_parts_at(&self, t: f64) -> RewardBreakdown {
        RewardBreakdown::new(self.block_reward(), self.linear_rate() * t, self.mean_bonus())
    }

    /// `E[R(t)·1{R(t) ≤ β}]`.
    pub fn censored_mean_below(&self, t: f64, beta: f64) -> f64 {
        self.atoms_at(t).censored_mean_below(beta)
    }

    /// `E[R(t)·1{R(t) > β}]`.
    pub fn censored_mean_above(&self, t: f64, beta: f64) -> f64 {
        self.atoms_at(t).censored_mean_above(beta)
    }

    /// Times `t > 0` at which some atom value crosses `β`.
    pub fn crossing_times(&self, beta: f64) -> Vec<f64> {
        let a = self.linear_rate();
        if a <= 0.0 || !beta.is_finite() {
            return Vec::new();
        }
        let c = self.block_reward();
        let mut ts: Vec<f64> = self
            .branches()
            .iter()
            .map(|b| (beta - c - b.bonus) / a)
            .filter(|t| *t > 0.0)
            .collect();
        ts.sort_by(f64::total_cmp);
        ts.dedup_by(|x, y| (*x - *y).abs() <= MERGE_TOL);
        ts
    }

    /// Draws one realization of `R(t)` split by source.
    pub fn sample_parts<R: Rng + ?Sized>(&self, t: f64, rng: &mut R) -> RewardBreakdown {
        let mut bonus = 0.0;
        for trial in self.trials() {
            if rng.random::<f64>() < trial.p {
                bonus += trial.e;
            }
        }
        RewardBreakdown::new(self.block_reward(), self.linear_rate() * t, bonus)
    }

    /// Draws one realization of `R(t)`.
    pub fn sample_at<R: Rng + ?Sized>(&self, t: f64, rng: &mut R) -> f64 {
        self.sample_parts(t, rng).total
    }
}

fn merge_branches(mut v: Vec<Branch>) -> Vec<Branch> {
    v.retain(|b| b.prob > 0.0);
    v.sort_by(|x, y| x.bonus.total_cmp(&y.bonus));
    let mut out: Vec<Branch> = Vec::with_capacity(v.len());
    for b in v {
        match out.last_mut() {
            Some(last) if (last.bonus - b.bonus).abs() <= MERGE_TOL => last.prob += b.prob,
            _ => out.push(b),
        }
    }
    out
}

impl AtomSet {
    pub fn total_prob(&self) -> f64 {
        self.atoms.iter().map(|a| a.prob).sum()
    }

    /// `Pr[R ≤ x]`.
    pub fn cdf(&self, x: f64) -> f64 {
        self.atoms.iter().filter(|a| a.value <= x).map(|a| a.prob).sum()
    }

    /// `Pr[R < x]`.
    pub fn cdf_strict(&self, x: f64) -> f64 {
        self.atoms.iter().filter(|a| a.value < x).map(|a| a.prob).sum()
    }

    pub fn mean(&self) -> f64 {
        self.atoms.iter().map(|a| a.value * a.prob).sum()
    }

    pub fn censored_mean_below(&self, beta: f64) -> f64 {
        self.atoms
            .iter()
            .filter(|a| a.value <= beta)
            .map(|a| a.value * a.prob)
            .sum()
    }

    pub fn censored_mean_above(&self, beta: f64) -> f64 {
        self.atoms
            .iter()
            .filter(|a| a.value > beta)
            .map(|a| a.value * a.prob)
            .sum()
    }

    /// `E[parts·1{R < β}]`, the mass a β-cutoff attacker withholds.
    pub fn parts_strictly_below(&self, beta: f64) -> RewardBreakdown {
        self.atoms
            .iter()
            .filter(|a| a.value < beta)
            .map(|a| a.parts * a.prob)
            .sum()
    }

    pub fn mean_parts(&self) -> RewardBreakdown {
        self.atoms.iter().map(|a| a.parts * a.prob).sum()
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct TrialJson {
    p: f64,
    e: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum BernoulliJson {
    One(TrialJson),
    Many(Vec<TrialJson>),
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    constant: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    linear: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bernoulli: Option<BernoulliJson>,
}

impl TryFrom<SpecJson> for RewardSpec {
    type Error = Error;

    fn try_from(j: SpecJson) -> Result<Self> {
        let mut parts = Vec::new();
        if let Some(c) = j.constant {
            parts.push(RewardSpec::constant(c)?);
        }
        if let Some(a) = j.linear {
            parts.push(RewardSpec::linear(a)?);
        }
        match j.bernoulli {
            Some(BernoulliJson::One(t)) => parts.push(RewardSpec::bernoulli(t.p, t.e)?),
            Some(BernoulliJson::Many(ts)) => {
                for t in ts {
                    parts.push(RewardSpec::bernoulli(t.p, t.e)?);
                }
            }
            None => {}
        }
        if parts.is_empty() {
            return Ok(RewardSpec::Constant { c: 0.0 });
        }
        RewardSpec::composite(parts)
    }
}

impl From<RewardSpec> for SpecJson {
    fn from(s: RewardSpec) -> Self {
        let leaves = s.leaves();
        let has = |f: fn(&RewardSpec) -> bool| leaves.iter().any(|l| f(l));
        let trials: Vec<TrialJson> = s.trials().iter().map(|t| TrialJson { p: t.p, e: t.e }).collect();
        SpecJson {
            constant: has(|l| matches!(l, RewardSpec::Constant { .. })).then(|| s.block_reward()),
            linear: has(|l| matches!(l, RewardSpec::Linear { .. })).then(|| s.linear_rate()),
            bernoulli: match trials.len() {
                0 => None,
                1 => Some(BernoulliJson::One(trials[0])),
                _ => Some(BernoulliJson::Many(trials)),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rhat() -> RewardSpec {
        RewardSpec::standard(1.0, 1.0, 0.25, 4.0).unwrap()
    }

    #[test]
    fn atoms_of_combined_reward() {
        let set = rhat().atoms_at(0.5);
        let pairs: Vec<(f64, f64)> = set.atoms.iter().map(|a| (a.value, a.prob)).collect();
        assert_eq!(pairs, vec![(1.5, 0.75), (5.5, 0.25)]);
        assert_eq!(set.atoms[1].parts, RewardBreakdown::new(1.0, 0.5, 4.0));
    }

    #[test]
    fn degenerate_atoms() {
        let c = RewardSpec::constant(1.0).unwrap().atoms_at(7.0);
        assert_eq!(c.atoms.len(), 1);
        assert_eq!((c.atoms[0].value, c.atoms[0].prob), (1.0, 1.0));
        let b = RewardSpec::bernoulli(1.0, 4.0).unwrap().atoms_at(0.0);
        assert_eq!(b.atoms.len(), 1);
        assert_eq!((b.atoms[0].value, b.atoms[0].prob), (4.0, 1.0));
    }

    #[test]
    fn equal_bonuses_merge() {
        let s = RewardSpec::composite([
            RewardSpec::bernoulli(0.5, 2.0).unwrap(),
            RewardSpec::bernoulli(0.5, 2.0).unwrap(),
        ])
        .unwrap();
        let set = s.atoms_at(0.0);
        let pairs: Vec<(f64, f64)> = set.atoms.iter().map(|a| (a.value, a.prob)).collect();
        assert_eq!(pairs, vec![(0.0, 0.25), (2.0, 0.5), (4.0, 0.25)]);
    }

    #[test]
    fn cdf_examples() {
        assert_eq!(rhat().cdf_at(0.5, 3.0), 0.75);
        assert_eq!(RewardSpec::constant(1.0).unwrap().cdf_at(3.0, 0.5), 0.0);
        assert_eq!(RewardSpec::linear(1.0).unwrap().cdf_at(2.0, 3.0), 1.0);
        assert_eq!(RewardSpec::linear(1.0).unwrap().cdf_at(2.0, 2.0), 1.0);
    }

    #[test]
    fn mean_examples() {
        assert_eq!(rhat().mean_at(2.0), 4.0);
        assert_eq!(RewardSpec::bernoulli(0.5, 2.0).unwrap().mean_at(9.0), 1.0);
        let s = RewardSpec::composite([RewardSpec::linear(2.0).unwrap(), RewardSpec::constant(3.0).unwrap()]).unwrap();
        assert_eq!(s.atoms_at(1.5).mean(), 6.0);
        assert_eq!(s.mean_at(1.5), 6.0);
    }

    #[test]
    fn censored_examples() {
        let s = rhat();
        assert_eq!(s.censored_mean_below(0.5, 3.0), 1.125);
        assert_eq!(s.censored_mean_below(0.5, f64::INFINITY), s.mean_at(0.5));
        assert_eq!(RewardSpec::constant(1.0).unwrap().censored_mean_below(0.0, 0.5), 0.0);
        let t = 0.5;
        assert_eq!(
            s.censored_mean_below(t, 3.0) + s.censored_mean_above(t, 3.0),
            s.mean_at(t)
        );
    }

    #[test]
    fn sampling_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(RewardSpec::constant(1.0).unwrap().sample_at(5.0, &mut rng), 1.0);
        assert_eq!(RewardSpec::bernoulli(0.0, 4.0).unwrap().sample_at(0.0, &mut rng), 0.0);
    }

    #[test]
    fn composite_flattens_and_merges_constants() {
        let inner =
            RewardSpec::composite([RewardSpec::constant(1.0).unwrap(), RewardSpec::linear(1.0).unwrap()]).unwrap();
        let s = RewardSpec::composite([inner, RewardSpec::constant(2.0).unwrap()]).unwrap();
        assert_eq!(
            s,
            RewardSpec::Composite(vec![RewardSpec::Constant { c: 3.0 }, RewardSpec::Linear { a: 1.0 }])
        );
        assert!(RewardSpec::composite(Vec::new()).is_err());
        assert!(RewardSpec::Composite(vec![s.clone()]).validate().is_err());
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(RewardSpec::constant(-1.0).is_err());
        assert!(RewardSpec::linear(f64::NAN).is_err());
        assert!(RewardSpec::bernoulli(1.5, 1.0).is_err());
        assert!(RewardSpec::bernoulli(0.5, -1.0).is_err());
    }

    #[test]
    fn json_round_trip() {
        let s: RewardSpec =
            serde_json::from_str(r#"{"constant": 1, "linear": 1, "bernoulli": {"p": 0.25, "e": 4}}"#).unwrap();
        assert_eq!(s, rhat());
        let text = serde_json::to_string(&s).unwrap();
        let back: RewardSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);
        let only: RewardSpec = serde_json::from_str(r#"{"linear": 2}"#).unwrap();
        assert_eq!(only, RewardSpec::Linear { a: 2.0 });
        let many: RewardSpec =
            serde_json::from_str(r#"{"bernoulli": [{"p": 0.5, "e": 1}, {"p": 0.1, "e": 3}]}"#).unwrap();
        assert_eq!(many.trials().len(), 2);
        assert!(serde_json::from_str::<RewardSpec>(r#"{"constant": -1}"#).is_err());
        assert!(serde_json::from_str::<RewardSpec>(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn crossing_times_of_combined_reward() {
        assert_eq!(rhat().crossing_times(6.0), vec![1.0, 5.0]);
        assert_eq!(rhat().crossing_times(3.0), vec![2.0]);
        assert!(RewardSpec::constant(1.0).unwrap().crossing_times(3.0).is_empty());
    }
}

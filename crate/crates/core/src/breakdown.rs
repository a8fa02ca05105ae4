//! Reward split by source.

use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, Mul, Sub};

use serde::{Deserialize, Serialize};

/// A reward amount (or rate) split into block, linear-fee and Bernoulli parts.
///
/// `total` is kept equal to the sum of the three parts by every constructor
/// and arithmetic operator.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub block: f64,
    pub linear: f64,
    pub bernoulli: f64,
    pub total: f64,
}

/// One of the three reward sources.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Component {
    Block,
    Linear,
    Bernoulli,
}

impl Component {
    pub const ALL: [Component; 3] = [Component::Block, Component::Linear, Component::Bernoulli];

    pub fn name(self) -> &'static str {
        match self {
            Component::Block => "block",
            Component::Linear => "linear",
            Component::Bernoulli => "bernoulli",
        }
    }
}

impl RewardBreakdown {
    pub const ZERO: RewardBreakdown = RewardBreakdown {
        block: 0.0,
        linear: 0.0,
        bernoulli: 0.0,
        total: 0.0,
    };

    pub fn new(block: f64, linear: f64, bernoulli: f64) -> Self {
        Self {
            block,
            linear,
            bernoulli,
            total: block + linear + bernoulli,
        }
    }

    pub fn get(&self, component: Component) -> f64 {
        match component {
            Component::Block => self.block,
            Component::Linear => self.linear,
            Component::Bernoulli => self.bernoulli,
        }
    }

    /// Applies `f` to each part and recomputes the total.
    pub fn map(self, mut f: impl FnMut(f64) -> f64) -> Self {
        Self::new(f(self.block), f(self.linear), f(self.bernoulli))
    }

    pub fn zip_with(self, other: Self, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        Self::new(
            f(self.block, other.block),
            f(self.linear, other.linear),
            f(self.bernoulli, other.bernoulli),
        )
    }

    /// Largest absolute difference over the three parts and the total.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (self.block - other.block)
            .abs()
            .max((self.linear - other.linear).abs())
            .max((self.bernoulli - other.bernoulli).abs())
            .max((self.total - other.total).abs())
    }

    pub fn is_finite(&self) -> bool {
        self.block.is_finite() && self.linear.is_finite() && self.bernoulli.is_finite()
    }
}

impl Add for RewardBreakdown {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl AddAssign for RewardBreakdown {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl Sub for RewardBreakdown {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl Mul<f64> for RewardBreakdown {
    type Output = Self;
    fn mul(self, rhs: f64) -> Self {
        self.map(|x| x * rhs)
    }
}

impl Div<f64> for RewardBreakdown {
    type Output = Self;
    fn div(self, rhs: f64) -> Self {
        self.map(|x| x / rhs)
    }
}

impl Sum for RewardBreakdown {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::ZERO, Add::add)
    }
}

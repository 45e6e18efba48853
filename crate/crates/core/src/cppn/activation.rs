//! Activation repertoire for CPPN nodes.

use serde::{Deserialize, Serialize};

use crate::num::Real;

/// Activation function tag carried by each CPPN node.
///
/// Hidden nodes draw from the full repertoire; output nodes are fixed to
/// [`Activation::Sigmoid`] so decode thresholds operate on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Sigmoid,
    Sine,
    Gaussian,
    Linear,
    Abs,
}

/// The repertoire hidden nodes are drawn from, in mutation-sampling order.
pub const HIDDEN_REPERTOIRE: [Activation; 5] = [
    Activation::Sigmoid,
    Activation::Sine,
    Activation::Gaussian,
    Activation::Linear,
    Activation::Abs,
];

impl Activation {
    pub fn apply<S: Real>(self, x: S) -> S {
        match self {
            Activation::Sigmoid => S::one() / (S::one() + (-x).exp()),
            Activation::Sine => x.sin(),
            Activation::Gaussian => (-(x * x)).exp(),
            Activation::Linear => x,
            Activation::Abs => x.abs(),
        }
    }

    /// Stable tag used by the genome text format.
    pub fn tag(self) -> &'static str {
        match self {
            Activation::Sigmoid => "sigmoid",
            Activation::Sine => "sine",
            Activation::Gaussian => "gaussian",
            Activation::Linear => "linear",
            Activation::Abs => "abs",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "sigmoid" => Some(Activation::Sigmoid),
            "sine" => Some(Activation::Sine),
            "gaussian" => Some(Activation::Gaussian),
            "linear" => Some(Activation::Linear),
            "abs" => Some(Activation::Abs),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values_at_zero() {
        assert_eq!(Activation::Sigmoid.apply(0.0f64), 0.5);
        assert_eq!(Activation::Sine.apply(0.0f64), 0.0);
        assert_eq!(Activation::Gaussian.apply(0.0f64), 1.0);
        assert_eq!(Activation::Linear.apply(0.0f64), 0.0);
        assert_eq!(Activation::Abs.apply(0.0f64), 0.0);
    }

    #[test]
    fn sigmoid_range_and_symmetry() {
        for x in [-50.0, -3.0, -0.1, 0.0, 0.1, 3.0, 50.0] {
            let y: f64 = Activation::Sigmoid.apply(x);
            assert!((0.0..=1.0).contains(&y));
            let y_neg: f64 = Activation::Sigmoid.apply(-x);
            assert!((y + y_neg - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn tag_round_trip() {
        for act in HIDDEN_REPERTOIRE {
            assert_eq!(Activation::from_tag(act.tag()), Some(act));
        }
        assert_eq!(Activation::from_tag("nope"), None);
    }
}

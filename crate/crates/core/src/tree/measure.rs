use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::NodeId;
use crate::rational::Rational;

/// A probability distribution on infinite bit sequences, given by the
/// conditional probability of the next bit being `0` at each node.
///
/// Nodes absent from the table use `default_p0`; the uniform measure is the
/// empty table with `default_p0 = 1/2`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Measure {
    default_p0: Rational,
    conditionals: BTreeMap<NodeId, Rational>,
    epsilon: Option<Rational>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MeasureViolation {
    /// A conditional probability outside the open interval (0, 1).
    Degenerate { node: Option<NodeId>, p0: Rational },
    /// A conditional probability not strictly above the separation bound.
    NotSeparated { node: Option<NodeId>, p0: Rational, p1: Rational, epsilon: Rational },
}

impl Measure {
    pub fn uniform() -> Self {
        Measure { default_p0: Rational::ratio(1, 2), conditionals: BTreeMap::new(), epsilon: None }
    }

    /// Uniform everywhere except the listed nodes, where `p0` is given.
    pub fn with_conditionals(conditionals: impl IntoIterator<Item = (NodeId, Rational)>) -> Self {
        Measure { conditionals: conditionals.into_iter().collect(), ..Self::uniform() }
    }

    pub fn with_default(mut self, p0: Rational) -> Self {
        self.default_p0 = p0;
        self
    }

    pub fn with_epsilon(mut self, epsilon: Rational) -> Self {
        self.epsilon = Some(epsilon);
        self
    }

    pub fn epsilon(&self) -> Option<&Rational> {
        self.epsilon.as_ref()
    }

    pub fn is_uniform(&self) -> bool {
        self.conditionals.values().all(|p| *p == self.default_p0) && self.default_p0 == Rational::ratio(1, 2)
    }

    /// μ(x0)/μ(x).
    pub fn p0(&self, x: &NodeId) -> &Rational {
        self.conditionals.get(x).unwrap_or(&self.default_p0)
    }

    /// μ(x1)/μ(x).
    pub fn p1(&self, x: &NodeId) -> Rational {
        Rational::one().saturating_sub(self.p0(x))
    }

    /// μ(x) as the product of conditionals along the path.
    pub fn mass(&self, x: &NodeId) -> Rational {
        let mut m = Rational::one();
        for d in 0..x.depth() {
            let parent = x.ancestor_at(d);
            if x.bit(d) == 0 {
                m *= self.p0(&parent);
            } else {
                m *= &self.p1(&parent);
            }
        }
        m
    }

    /// Checks that every conditional lies strictly in (0, 1) and, when a
    /// separation bound is set, strictly above it on both sides.
    pub fn check(&self) -> Vec<MeasureViolation> {
        let mut out = Vec::new();
        let entries = std::iter::once((None, &self.default_p0))
            .chain(self.conditionals.iter().map(|(n, p)| (Some(*n), p)));
        for (node, p0) in entries {
            if p0.is_zero() || *p0 >= Rational::one() {
                out.push(MeasureViolation::Degenerate { node, p0: p0.clone() });
                continue;
            }
            if let Some(eps) = &self.epsilon {
                let p1 = Rational::one().saturating_sub(p0);
                if p0 <= eps || p1 <= *eps {
                    out.push(MeasureViolation::NotSeparated {
                        node,
                        p0: p0.clone(),
                        p1,
                        epsilon: eps.clone(),
                    });
                }
            }
        }
        out
    }
}

impl Default for Measure {
    fn default() -> Self {
        Self::uniform()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(s: &str) -> Rational {
        s.parse().unwrap()
    }

    #[test]
    fn masses_multiply_conditionals() {
        let mu = Measure::with_conditionals([(NodeId::root(), r("1/3"))]);
        assert_eq!(mu.mass(&"0".parse().unwrap()), r("1/3"));
        assert_eq!(mu.mass(&"1".parse().unwrap()), r("2/3"));
        assert_eq!(mu.mass(&"10".parse().unwrap()), r("1/3"));
        let x: NodeId = "01".parse().unwrap();
        let sum = mu.mass(&x.child(0)) + mu.mass(&x.child(1));
        assert_eq!(sum, mu.mass(&x));
    }

    #[test]
    fn separation_is_flagged() {
        let mu = Measure::with_conditionals([("0".parse().unwrap(), r("1/10"))]).with_epsilon(r("1/10"));
        let v = mu.check();
        assert_eq!(v.len(), 1);
        assert!(matches!(v[0], MeasureViolation::NotSeparated { .. }));
        let ok = Measure::with_conditionals([("0".parse().unwrap(), r("1/9"))]).with_epsilon(r("1/10"));
        assert!(ok.check().is_empty());
    }

    #[test]
    fn degenerate_is_flagged() {
        let mu = Measure::with_conditionals([(NodeId::root(), Rational::zero())]);
        assert!(matches!(mu.check()[0], MeasureViolation::Degenerate { .. }));
        assert!(Measure::uniform().is_uniform());
        assert!(!mu.is_uniform());
    }
}

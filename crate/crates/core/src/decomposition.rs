//! Splitting a positive martingale into an even-step and an odd-step
//! martingale whose values multiply back to the original at every node.

use std::collections::BTreeMap;

use rand::Rng;
use thiserror::Error;

use crate::rational::Rational;
use crate::tree::{NodeId, ParityRole, RootRule, Valuation, Violation};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecompositionError {
    #[error("shift must be positive, got {0}")]
    NonPositiveShift(Rational),
    #[error("value at {0:?} is not positive")]
    NotPositive(NodeId),
    #[error("missing value at {0:?}")]
    Missing(NodeId),
    #[error("not a martingale: {0}")]
    NotMartingale(Violation),
}

/// A martingale restricted to the nodes of depth at most `depth`, all stored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiniteMartingale {
    depth: u32,
    values: BTreeMap<NodeId, Rational>,
}

fn all_nodes(depth: u32) -> impl Iterator<Item = NodeId> {
    (0..=depth).flat_map(|d| NodeId::root().descendants(d))
}

impl FiniteMartingale {
    pub fn new(depth: u32, values: BTreeMap<NodeId, Rational>) -> Result<Self, DecompositionError> {
        if let Some(x) = all_nodes(depth).find(|x| !values.contains_key(x)) {
            return Err(DecompositionError::Missing(x));
        }
        let m = FiniteMartingale { depth, values };
        if let Some(v) = m.as_valuation(ParityRole::FullBettor).validate_martingale().into_iter().next() {
            return Err(DecompositionError::NotMartingale(v));
        }
        Ok(m)
    }

    pub fn constant_one(depth: u32) -> Self {
        FiniteMartingale { depth, values: all_nodes(depth).map(|x| (x, Rational::one())).collect() }
    }

    /// Splits each node's capital between its children in a random
    /// proportion `k/8`, `1 <= k <= 7`, so every value stays positive.
    pub fn random_positive(rng: &mut impl Rng, depth: u32) -> Self {
        let mut values = BTreeMap::from([(NodeId::root(), Rational::one())]);
        for x in all_nodes(depth.saturating_sub(1)) {
            if depth == 0 {
                break;
            }
            let v = values[&x].clone();
            let k = rng.gen_range(1..=7u64);
            values.insert(x.child(0), &v * Rational::ratio(k, 4));
            values.insert(x.child(1), &v * Rational::ratio(8 - k, 4));
        }
        FiniteMartingale { depth, values }
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn value(&self, x: &NodeId) -> &Rational {
        &self.values[x]
    }

    pub fn values(&self) -> &BTreeMap<NodeId, Rational> {
        &self.values
    }

    /// The same values as a tree valuation with the given betting role.
    pub fn as_valuation(&self, role: ParityRole) -> Valuation {
        Valuation::from_parts(role, 0, Some(self.depth), RootRule::Pinned, self.values.clone())
    }
}

/// `(t + c) / (1 + c)`.
pub fn make_positive(t: &FiniteMartingale, c: &Rational) -> Result<FiniteMartingale, DecompositionError> {
    if c.is_zero() {
        return Err(DecompositionError::NonPositiveShift(c.clone()));
    }
    let denom = Rational::one() + c;
    let values = t
        .values
        .iter()
        .map(|(x, v)| (*x, (v + c).checked_div(&denom).expect("positive denominator")))
        .collect();
    Ok(FiniteMartingale { depth: t.depth, values })
}

/// The even-step and odd-step factors of a positive martingale.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    /// Bets only at odd-length nodes.
    pub even: FiniteMartingale,
    /// Bets only at even-length nodes.
    pub odd: FiniteMartingale,
}

/// Each factor copies the original's proportional split on its own steps
/// and stays constant on the others.
pub fn split(t: &FiniteMartingale) -> Result<Split, DecompositionError> {
    if let Some((x, _)) = t.values.iter().find(|(_, v)| v.is_zero()) {
        return Err(DecompositionError::NotPositive(*x));
    }
    let mut even = BTreeMap::from([(NodeId::root(), Rational::one())]);
    let mut odd = BTreeMap::from([(NodeId::root(), Rational::one())]);
    for x in all_nodes(t.depth.saturating_sub(1)) {
        if t.depth == 0 {
            break;
        }
        let (better, holder) = if x.depth() % 2 == 1 { (&mut even, &mut odd) } else { (&mut odd, &mut even) };
        let tv = t.value(&x);
        let bv = better[&x].clone();
        let hv = holder[&x].clone();
        for c in x.children() {
            let ratio = t.value(&c).checked_div(tv).expect("positive values");
            better.insert(c, &bv * ratio);
            holder.insert(c, hv.clone());
        }
    }
    Ok(Split {
        even: FiniteMartingale { depth: t.depth, values: even },
        odd: FiniteMartingale { depth: t.depth, values: odd },
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundednessReport {
    pub max_t: Rational,
    pub max_even: Rational,
    pub max_odd: Rational,
    /// `max_t <= max_even * max_odd`.
    pub holds: bool,
}

/// Maxima of `t` and both factors along the root-to-`prefix` path.
pub fn boundedness_check(t: &FiniteMartingale, parts: &Split, prefix: &NodeId) -> BoundednessReport {
    let max_on = |m: &FiniteMartingale| prefix.path_from_root().map(|x| m.value(&x).clone()).max().expect("nonempty");
    let (max_t, max_even, max_odd) = (max_on(t), max_on(&parts.even), max_on(&parts.odd));
    let holds = max_t <= &max_even * &max_odd;
    BoundednessReport { max_t, max_even, max_odd, holds }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn n(s: &str) -> NodeId {
        s.parse().unwrap()
    }

    fn r(s: &str) -> Rational {
        s.parse().unwrap()
    }

    fn example() -> FiniteMartingale {
        let values = [("", "1"), ("0", "3/2"), ("1", "1/2"), ("00", "2"), ("01", "1"), ("10", "1/2"), ("11", "1/2")]
            .into_iter()
            .map(|(x, v)| (n(x), r(v)))
            .collect();
        FiniteMartingale::new(2, values).unwrap()
    }

    #[test]
    fn worked_example() {
        let t = example();
        let s = split(&t).unwrap();
        assert_eq!(s.odd.value(&n("0")), &r("3/2"));
        assert_eq!(s.odd.value(&n("00")), &r("3/2"));
        assert_eq!(s.odd.value(&n("11")), &r("1/2"));
        assert_eq!(s.even.value(&n("1")), &r("1"));
        assert_eq!(s.even.value(&n("00")), &r("4/3"));
        assert_eq!(s.even.value(&n("01")), &r("2/3"));
        assert_eq!(s.even.value(&n("10")), &r("1"));
        let rep = boundedness_check(&t, &s, &n("00"));
        assert_eq!((rep.max_t.clone(), rep.max_even.clone(), rep.max_odd.clone()), (r("2"), r("4/3"), r("3/2")));
        assert!(rep.holds);
    }

    #[test]
    fn shift_makes_positive() {
        let values = [("", "1"), ("0", "0"), ("1", "2")].into_iter().map(|(x, v)| (n(x), r(v))).collect();
        let t = FiniteMartingale::new(1, values).unwrap();
        assert!(matches!(split(&t), Err(DecompositionError::NotPositive(_))));
        let p = make_positive(&t, &Rational::one()).unwrap();
        assert_eq!(p.value(&n("0")), &r("1/2"));
        assert_eq!(p.value(&n("1")), &r("3/2"));
        assert!(split(&p).is_ok());
        assert!(make_positive(&t, &Rational::zero()).is_err());
        assert_eq!(make_positive(&FiniteMartingale::constant_one(3), &Rational::one()).unwrap(), FiniteMartingale::constant_one(3));
    }

    #[test]
    fn constant_splits_to_constants() {
        let one = FiniteMartingale::constant_one(4);
        let s = split(&one).unwrap();
        assert_eq!(s.even, one);
        assert_eq!(s.odd, one);
    }

    #[test]
    fn rejects_incomplete_or_non_martingale() {
        assert!(matches!(FiniteMartingale::new(1, BTreeMap::from([(n(""), r("1"))])), Err(DecompositionError::Missing(_))));
        let values = [("", "1"), ("0", "1"), ("1", "1/2")].into_iter().map(|(x, v)| (n(x), r(v))).collect();
        assert!(matches!(FiniteMartingale::new(1, values), Err(DecompositionError::NotMartingale(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn split_identities(seed in any::<u64>(), depth in 1u32..=7) {
            let t = FiniteMartingale::random_positive(&mut ChaCha8Rng::seed_from_u64(seed), depth);
            prop_assert!(t.as_valuation(ParityRole::FullBettor).validate_martingale().is_empty());
            let s = split(&t).unwrap();
            prop_assert!(s.even.as_valuation(ParityRole::EvenBettor).validate_martingale().is_empty());
            prop_assert!(s.odd.as_valuation(ParityRole::OddBettor).validate_martingale().is_empty());
            for (x, v) in t.values() {
                prop_assert_eq!(s.even.value(x) * s.odd.value(x), v.clone());
            }
            let leaf = NodeId::from_bits(depth, (seed as u128) & ((1u128 << depth) - 1)).unwrap();
            prop_assert!(boundedness_check(&t, &s, &leaf).holds);
        }
    }
}

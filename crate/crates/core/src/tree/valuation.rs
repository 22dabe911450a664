use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Measure, NodeId, ParityRole};
use crate::rational::Rational;

/// How the root value of a valuation is constrained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RootRule {
    /// The root is exactly 1 and cannot be written.
    Pinned,
    /// The root may be raised but never above 1. Used for adversary
    /// valuations projected into an embedded subgame.
    AtMostOne,
}

/// Inequality (supermartingale) or equality (martingale) at betting nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strictness {
    Supermartingale,
    Martingale,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ViolationKind {
    /// value(x)·μ(x) is below the weighted children mass (or differs from it
    /// for a martingale).
    Averaging { value: Rational, children: Rational },
    /// A child of a non-betting node differs from the node.
    ChildMismatch { child: NodeId, value: Rational, child_value: Rational },
    RootNotOne { value: Rational },
    RootAboveOne { value: Rational },
    OutsideTree,
}

/// One failed structural constraint, located at the node that owns it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub node: NodeId,
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let at = format!("{:?}", self.node);
        match &self.kind {
            ViolationKind::Averaging { value, children } => {
                write!(f, "at {at}: value {value} against children mass {children}")
            }
            ViolationKind::ChildMismatch { child, value, child_value } => {
                write!(f, "at {at}: non-betting node has {value} but child {child:?} has {child_value}")
            }
            ViolationKind::RootNotOne { value } => write!(f, "root is pinned to 1, found {value}"),
            ViolationKind::RootAboveOne { value } => write!(f, "root may not exceed 1, found {value}"),
            ViolationKind::OutsideTree => write!(f, "node {at} lies outside the tree"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValuationError {
    #[error("monotonicity violation at {node:?}: {proposed} is below current {current}")]
    Monotonicity { node: NodeId, current: Rational, proposed: Rational },
    #[error("structure violation {0}")]
    Structure(Violation),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RaiseError {
    #[error("raise requires the root to become {required}")]
    RootBlocked { required: Rational },
    #[error("node {0:?} lies outside the tree")]
    OutsideTree(NodeId),
}

/// One stored `(path, value)` pair, the serialized unit of a valuation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValuationRecord {
    pub path: NodeId,
    pub value: Rational,
}

/// A supermartingale on a (finite or sparse infinite) binary tree.
///
/// Only finitely many values are stored. An unstored node takes its
/// parent's value when the parent does not bet, and 0 when it does; the
/// unstored root is 1. This extension satisfies every constraint, so
/// validation only needs to look at stored nodes and their parents.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Valuation {
    role: ParityRole,
    root_depth_offset: u32,
    height: Option<u32>,
    root_rule: RootRule,
    values: BTreeMap<NodeId, Rational>,
}

impl Valuation {
    /// A fresh valuation: root 1, everything else by default extension.
    pub fn new(role: ParityRole, root_depth_offset: u32, height: Option<u32>) -> Self {
        Valuation { role, root_depth_offset, height, root_rule: RootRule::Pinned, values: BTreeMap::new() }
    }

    /// Builds a valuation from stored values without checking them.
    pub fn from_parts(
        role: ParityRole,
        root_depth_offset: u32,
        height: Option<u32>,
        root_rule: RootRule,
        values: BTreeMap<NodeId, Rational>,
    ) -> Self {
        Valuation { role, root_depth_offset, height, root_rule, values }
    }

    pub fn role(&self) -> ParityRole {
        self.role
    }

    pub fn root_depth_offset(&self) -> u32 {
        self.root_depth_offset
    }

    pub fn height(&self) -> Option<u32> {
        self.height
    }

    pub fn root_rule(&self) -> RootRule {
        self.root_rule
    }

    pub fn stored(&self) -> &BTreeMap<NodeId, Rational> {
        &self.values
    }

    pub fn bets(&self, x: &NodeId) -> bool {
        self.role.bets_at(self.root_depth_offset + x.depth())
    }

    pub fn in_tree(&self, x: &NodeId) -> bool {
        self.height.map_or(true, |h| x.depth() <= h)
    }

    fn has_children(&self, x: &NodeId) -> bool {
        self.height.map_or(true, |h| x.depth() < h)
    }

    /// Stored value, or the default extension.
    pub fn get_value(&self, x: &NodeId) -> Rational {
        if let Some(v) = self.values.get(x) {
            return v.clone();
        }
        let mut cur = *x;
        while let Some(p) = cur.parent() {
            if self.bets(&p) {
                return Rational::zero();
            }
            if let Some(v) = self.values.get(&p) {
                return v.clone();
            }
            cur = p;
        }
        Rational::one()
    }

    /// Nodes whose value changes when `assigned` are written: the assigned
    /// nodes plus unstored descendants that inherit through non-betting nodes.
    pub fn affected_nodes<'a>(&self, assigned: impl IntoIterator<Item = &'a NodeId>) -> BTreeSet<NodeId> {
        let mut out = BTreeSet::new();
        let mut stack: Vec<NodeId> = assigned.into_iter().copied().collect();
        while let Some(x) = stack.pop() {
            if !out.insert(x) {
                continue;
            }
            if !self.bets(&x) && self.has_children(&x) {
                for c in x.children() {
                    if !self.values.contains_key(&c) {
                        stack.push(c);
                    }
                }
            }
        }
        out
    }

    fn check_root(&self) -> Option<Violation> {
        let v = self.get_value(&NodeId::root());
        match self.root_rule {
            RootRule::Pinned if !v.is_one() => {
                Some(Violation { node: NodeId::root(), kind: ViolationKind::RootNotOne { value: v } })
            }
            RootRule::AtMostOne if v > Rational::one() => {
                Some(Violation { node: NodeId::root(), kind: ViolationKind::RootAboveOne { value: v } })
            }
            _ => None,
        }
    }

    /// Checks the constraint owned by `x` (between `x` and its children),
    /// with fair-coin averaging.
    fn check_node_uniform(&self, x: &NodeId, strictness: Strictness) -> Option<Violation> {
        let v = self.get_value(x);
        let [x0, x1] = x.children();
        let (c0, c1) = (self.get_value(&x0), self.get_value(&x1));
        if !self.bets(x) {
            return mismatch(x, &v, &x0, &c0).or_else(|| mismatch(x, &v, &x1, &c1));
        }
        let avg = Rational::average(&c0, &c1);
        let ok = match strictness {
            Strictness::Supermartingale => v >= avg,
            Strictness::Martingale => v == avg,
        };
        (!ok).then(|| Violation { node: *x, kind: ViolationKind::Averaging { value: v, children: avg } })
    }

    /// Same constraint in absolute measure form: value(x)·μ(x) against
    /// value(x0)·μ(x0) + value(x1)·μ(x1).
    fn check_node_measure(&self, x: &NodeId, mu: &Measure, strictness: Strictness) -> Option<Violation> {
        let v = self.get_value(x);
        let [x0, x1] = x.children();
        let (c0, c1) = (self.get_value(&x0), self.get_value(&x1));
        if !self.bets(x) {
            return mismatch(x, &v, &x0, &c0).or_else(|| mismatch(x, &v, &x1, &c1));
        }
        let lhs = &v * mu.mass(x);
        let rhs = &c0 * mu.mass(&x0) + &c1 * mu.mass(&x1);
        let ok = match strictness {
            Strictness::Supermartingale => lhs >= rhs,
            Strictness::Martingale => lhs == rhs,
        };
        (!ok).then(|| Violation { node: *x, kind: ViolationKind::Averaging { value: lhs, children: rhs } })
    }

    /// Stored nodes, their parents, and the root: the only places a
    /// constraint can fail.
    fn check_region(&self) -> BTreeSet<NodeId> {
        let mut region: BTreeSet<NodeId> = BTreeSet::from([NodeId::root()]);
        for x in self.values.keys() {
            region.insert(*x);
            if let Some(p) = x.parent() {
                region.insert(p);
            }
        }
        region
    }

    fn collect_violations(&self, check: impl Fn(&NodeId) -> Option<Violation>) -> Vec<Violation> {
        let mut out: Vec<Violation> = self
            .values
            .keys()
            .filter(|x| !self.in_tree(x))
            .map(|x| Violation { node: *x, kind: ViolationKind::OutsideTree })
            .collect();
        out.extend(self.check_root());
        for x in self.check_region() {
            if self.in_tree(&x) && self.has_children(&x) {
                out.extend(check(&x));
            }
        }
        out
    }

    /// Fair-coin supermartingale check over the stored support and its
    /// one-step closure. Empty means valid.
    pub fn validate(&self) -> Vec<Violation> {
        self.collect_violations(|x| self.check_node_uniform(x, Strictness::Supermartingale))
    }

    /// Check against an arbitrary measure, as a super- or plain martingale.
    pub fn validate_with(&self, mu: &Measure, strictness: Strictness) -> Vec<Violation> {
        self.collect_violations(|x| self.check_node_measure(x, mu, strictness))
    }

    pub fn validate_martingale(&self) -> Vec<Violation> {
        self.collect_violations(|x| self.check_node_uniform(x, Strictness::Martingale))
    }

    /// Writes new values, each at least the current one, and rejects the
    /// batch if the result is not a valid supermartingale. `self` is untouched.
    pub fn apply_increase(&self, assignments: &[(NodeId, Rational)]) -> Result<Valuation, ValuationError> {
        let mut next = self.clone();
        let mut touched = BTreeSet::new();
        for (x, v) in assignments {
            if !next.in_tree(x) {
                return Err(ValuationError::Structure(Violation { node: *x, kind: ViolationKind::OutsideTree }));
            }
            let current = next.get_value(x);
            if x.is_root() {
                match next.root_rule {
                    RootRule::Pinned if *v != current => {
                        return Err(ValuationError::Structure(Violation {
                            node: *x,
                            kind: ViolationKind::RootNotOne { value: v.clone() },
                        }));
                    }
                    RootRule::AtMostOne if *v > Rational::one() => {
                        return Err(ValuationError::Structure(Violation {
                            node: *x,
                            kind: ViolationKind::RootAboveOne { value: v.clone() },
                        }));
                    }
                    _ => {}
                }
            }
            if *v < current {
                return Err(ValuationError::Monotonicity { node: *x, current, proposed: v.clone() });
            }
            next.values.insert(*x, v.clone());
            touched.insert(*x);
        }
        let mut region = BTreeSet::new();
        for x in &touched {
            region.insert(*x);
            if let Some(p) = x.parent() {
                region.insert(p);
            }
        }
        for x in region {
            if next.has_children(&x) {
                if let Some(v) = next.check_node_uniform(&x, Strictness::Supermartingale) {
                    return Err(ValuationError::Structure(v));
                }
            }
        }
        Ok(next)
    }

    /// The least set of increases that makes the targets hold and keeps the
    /// valuation valid: equal values across non-betting families, and
    /// averaged-up parents at betting nodes, propagated toward the root.
    pub fn raise_closure(&self, targets: &[(NodeId, Rational)]) -> Result<Vec<(NodeId, Rational)>, RaiseError> {
        let mut new: BTreeMap<NodeId, Rational> = BTreeMap::new();
        let mut queue: VecDeque<NodeId> = VecDeque::new();

        fn val(me: &Valuation, new: &BTreeMap<NodeId, Rational>, x: &NodeId) -> Rational {
            new.get(x).cloned().unwrap_or_else(|| me.get_value(x))
        }

        let raise = |x: NodeId,
                     v: Rational,
                     new: &mut BTreeMap<NodeId, Rational>,
                     queue: &mut VecDeque<NodeId>|
         -> Result<(), RaiseError> {
            if !self.in_tree(&x) {
                return Err(RaiseError::OutsideTree(x));
            }
            if v <= val(self, new, &x) {
                return Ok(());
            }
            if x.is_root() {
                let blocked = match self.root_rule {
                    RootRule::Pinned => true,
                    RootRule::AtMostOne => v > Rational::one(),
                };
                if blocked {
                    return Err(RaiseError::RootBlocked { required: v });
                }
            }
            new.insert(x, v);
            queue.push_back(x);
            Ok(())
        };

        for (x, v) in targets {
            raise(*x, v.clone(), &mut new, &mut queue)?;
        }
        while let Some(x) = queue.pop_front() {
            if !self.bets(&x) && self.has_children(&x) {
                let [x0, x1] = x.children();
                let m = [val(self, &new, &x), val(self, &new, &x0), val(self, &new, &x1)]
                    .into_iter()
                    .max()
                    .expect("three values");
                for n in [x, x0, x1] {
                    raise(n, m.clone(), &mut new, &mut queue)?;
                }
            }
            if let Some(p) = x.parent() {
                let [p0, p1] = p.children();
                let (v0, v1) = (val(self, &new, &p0), val(self, &new, &p1));
                if self.bets(&p) {
                    raise(p, Rational::average(&v0, &v1), &mut new, &mut queue)?;
                } else {
                    let m = val(self, &new, &p).max(v0).max(v1);
                    for n in [p, p0, p1] {
                        raise(n, m.clone(), &mut new, &mut queue)?;
                    }
                }
            }
        }
        Ok(new.into_iter().collect())
    }

    /// Stores the default value of every child of a stored node. The
    /// represented function does not change.
    pub fn materialize(&self) -> Valuation {
        let mut out = self.clone();
        let extra: Vec<(NodeId, Rational)> = self
            .values
            .keys()
            .chain(std::iter::once(&NodeId::root()))
            .filter(|x| self.has_children(x))
            .flat_map(|x| x.children())
            .filter(|c| !self.values.contains_key(c))
            .map(|c| (c, self.get_value(&c)))
            .collect();
        out.values.extend(extra);
        out.values.entry(NodeId::root()).or_insert_with(|| self.get_value(&NodeId::root()));
        out
    }

    /// Stored values in `(depth, path)` order.
    pub fn records(&self) -> Vec<ValuationRecord> {
        self.values.iter().map(|(path, value)| ValuationRecord { path: *path, value: value.clone() }).collect()
    }

    /// Maximum over the path from the root to `x`, both ends included.
    pub fn path_max(&self, x: &NodeId) -> Rational {
        x.path_from_root().map(|n| self.get_value(&n)).max().expect("path is nonempty")
    }
}

fn mismatch(x: &NodeId, v: &Rational, child: &NodeId, cv: &Rational) -> Option<Violation> {
    (cv != v).then(|| Violation {
        node: *x,
        kind: ViolationKind::ChildMismatch { child: *child, value: v.clone(), child_value: cv.clone() },
    })
}

/// Descends from `from` to depth `to_depth`, choosing at each node a child
/// where neither valuation exceeds its current value (least combined value,
/// ties to bit 0). For a pair of complementary parity roles such a child
/// always exists: one role is constant across the children and the other
/// has a child no larger than the parent.
pub fn min_nonincreasing_path(t0: &Valuation, t1: &Valuation, from: &NodeId, to_depth: u32) -> NodeId {
    let mut x = *from;
    while x.depth() < to_depth {
        let (a0, a1) = (t0.get_value(&x), t1.get_value(&x));
        let scored: Vec<(bool, Rational, NodeId)> = x
            .children()
            .into_iter()
            .map(|c| {
                let (b0, b1) = (t0.get_value(&c), t1.get_value(&c));
                (b0 <= a0 && b1 <= a1, b0 + b1, c)
            })
            .collect();
        debug_assert!(scored.iter().any(|s| s.0), "no nonincreasing child below {x:?}");
        let best = scored
            .iter()
            .filter(|s| s.0)
            .min_by(|a, b| a.1.cmp(&b.1))
            .or_else(|| scored.iter().min_by(|a, b| a.1.cmp(&b.1)))
            .expect("two children");
        x = best.2;
    }
    x
}

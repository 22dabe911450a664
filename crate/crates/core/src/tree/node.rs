use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Deepest node addressable by a [`NodeId`].
pub const MAX_DEPTH: u32 = 127;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NodeError {
    #[error("invalid node path {0:?}")]
    Parse(String),
    #[error("path depth {0} exceeds the maximum of {MAX_DEPTH}")]
    TooDeep(u32),
}

/// A node of the infinite binary tree, i.e. a finite bit string.
///
/// The path is packed into a `u128` with the first step in the most
/// significant position, so nodes of equal depth compare lexicographically
/// by comparing `bits`. The empty string is the root.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct NodeId {
    depth: u8,
    bits: u128,
}

impl NodeId {
    pub const ROOT: NodeId = NodeId { depth: 0, bits: 0 };

    pub fn root() -> Self {
        Self::ROOT
    }

    /// Builds the node at `depth` whose path, read as a binary number, is `bits`.
    pub fn from_bits(depth: u32, bits: u128) -> Result<Self, NodeError> {
        if depth > MAX_DEPTH {
            return Err(NodeError::TooDeep(depth));
        }
        debug_assert!(depth == 0 || bits >> depth == 0);
        Ok(NodeId { depth: depth as u8, bits })
    }

    /// `0^depth`, the leftmost node at `depth`.
    pub fn zeros(depth: u32) -> Self {
        Self::from_bits(depth, 0).expect("depth within range")
    }

    pub fn depth(&self) -> u32 {
        self.depth as u32
    }

    pub fn bits(&self) -> u128 {
        self.bits
    }

    pub fn is_root(&self) -> bool {
        self.depth == 0
    }

    /// Bit `i` of the path, counted from the root (`i < depth`).
    pub fn bit(&self, i: u32) -> u8 {
        debug_assert!(i < self.depth());
        ((self.bits >> (self.depth() - 1 - i)) & 1) as u8
    }

    pub fn last_bit(&self) -> Option<u8> {
        (self.depth > 0).then(|| (self.bits & 1) as u8)
    }

    pub fn child(&self, bit: u8) -> Self {
        assert!(self.depth() < MAX_DEPTH, "node depth overflow");
        NodeId { depth: self.depth + 1, bits: (self.bits << 1) | (bit & 1) as u128 }
    }

    pub fn children(&self) -> [NodeId; 2] {
        [self.child(0), self.child(1)]
    }

    pub fn parent(&self) -> Option<Self> {
        (self.depth > 0).then(|| NodeId { depth: self.depth - 1, bits: self.bits >> 1 })
    }

    pub fn sibling(&self) -> Option<Self> {
        (self.depth > 0).then(|| NodeId { depth: self.depth, bits: self.bits ^ 1 })
    }

    /// Ancestor at `depth` (self when `depth == self.depth()`).
    pub fn ancestor_at(&self, depth: u32) -> Self {
        assert!(depth <= self.depth());
        let shift = self.depth() - depth;
        NodeId { depth: depth as u8, bits: if shift >= 128 { 0 } else { self.bits >> shift } }
    }

    /// True when `self` is a prefix of `other` (inclusive).
    pub fn is_prefix_of(&self, other: &NodeId) -> bool {
        self.depth <= other.depth && other.ancestor_at(self.depth()) == *self
    }

    /// Appends `suffix` to this path.
    pub fn join(&self, suffix: &NodeId) -> Result<Self, NodeError> {
        let depth = self.depth() + suffix.depth();
        if depth > MAX_DEPTH {
            return Err(NodeError::TooDeep(depth));
        }
        let bits = if suffix.depth == 0 { self.bits } else { (self.bits << suffix.depth) | suffix.bits };
        Ok(NodeId { depth: depth as u8, bits })
    }

    /// The path of `self` below `prefix`, if `prefix` is a prefix of `self`.
    pub fn strip_prefix(&self, prefix: &NodeId) -> Option<Self> {
        if !prefix.is_prefix_of(self) {
            return None;
        }
        let depth = self.depth() - prefix.depth();
        let mask = if depth == 0 { 0 } else { u128::MAX >> (128 - depth) };
        Some(NodeId { depth: depth as u8, bits: self.bits & mask })
    }

    /// Nodes from the root down to `self`, inclusive at both ends.
    pub fn path_from_root(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..=self.depth()).map(move |d| self.ancestor_at(d))
    }

    /// All descendants of `self` exactly `levels` below it, left to right.
    pub fn descendants(&self, levels: u32) -> impl Iterator<Item = NodeId> {
        let base = *self;
        assert!(base.depth() + levels <= MAX_DEPTH && levels < 64, "descendant range too large");
        (0..(1u128 << levels)).map(move |suffix| NodeId {
            depth: base.depth + levels as u8,
            bits: if levels == 0 { base.bits } else { (base.bits << levels) | suffix },
        })
    }
}

impl Ord for NodeId {
    /// Breadth-first order: by depth, then lexicographically.
    fn cmp(&self, other: &Self) -> Ordering {
        self.depth.cmp(&other.depth).then(self.bits.cmp(&other.bits))
    }
}

impl PartialOrd for NodeId {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.depth() {
            f.write_str(if self.bit(i) == 0 { "0" } else { "1" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_root() {
            f.write_str("Λ")
        } else {
            write!(f, "\"{self}\"")
        }
    }
}

impl FromStr for NodeId {
    type Err = NodeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.len() as u32 > MAX_DEPTH {
            return Err(NodeError::TooDeep(s.len() as u32));
        }
        let mut node = NodeId::root();
        for c in s.chars() {
            node = match c {
                '0' => node.child(0),
                '1' => node.child(1),
                _ => return Err(NodeError::Parse(s.to_string())),
            };
        }
        Ok(node)
    }
}

impl Serialize for NodeId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for NodeId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Which steps a supermartingale is allowed to bet on.
///
/// Step `k` decides the bit that extends strings of length `k - 1`, so a node
/// at global depth `d` is where step `d + 1` is wagered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ParityRole {
    FullBettor,
    /// Bets on even steps only: constant across the children of even-length strings.
    EvenBettor,
    /// Bets on odd steps only: constant across the children of odd-length strings.
    OddBettor,
}

impl ParityRole {
    /// Whether a supermartingale with this role may differ between the two
    /// children of a node at `global_depth`.
    pub fn bets_at(self, global_depth: u32) -> bool {
        match self {
            ParityRole::FullBettor => true,
            ParityRole::EvenBettor => global_depth % 2 == 1,
            ParityRole::OddBettor => global_depth % 2 == 0,
        }
    }

    /// The parity-restricted role that bets at `global_depth`.
    pub fn betting_at(global_depth: u32) -> ParityRole {
        if global_depth % 2 == 0 {
            ParityRole::OddBettor
        } else {
            ParityRole::EvenBettor
        }
    }

    /// The other parity-restricted role. `FullBettor` maps to itself.
    pub fn other(self) -> ParityRole {
        match self {
            ParityRole::FullBettor => ParityRole::FullBettor,
            ParityRole::EvenBettor => ParityRole::OddBettor,
            ParityRole::OddBettor => ParityRole::EvenBettor,
        }
    }
}

//! The game on a finite tree of odd height: thresholds, move protocol,
//! labels, leaf classification, and the referee.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rational::Rational;
use crate::tree::{NodeId, ParityRole, RootRule, Valuation, ValuationError, Violation};

/// Largest supported finite-tree height. Strategy moves touch every leaf.
pub const MAX_HEIGHT: u32 = 25;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GameError {
    #[error("height {0} must be odd and at least 3")]
    BadHeight(u32),
    #[error("height {0} exceeds the supported maximum {MAX_HEIGHT}")]
    TooTall(u32),
    #[error("monotonicity violation on {sup} at {node:?}: {proposed} below {current}")]
    Monotonicity { sup: Sup, node: NodeId, current: Rational, proposed: Rational },
    #[error("structure violation on {sup}: {violation}")]
    Structure { sup: Sup, violation: Violation },
    #[error("label violation at {leaf:?}: {reason}")]
    Label { leaf: NodeId, reason: String },
    #[error("{mover:?} may not write {sup}")]
    Mover { mover: Mover, sup: Sup },
    #[error("phase cannot go from {from:?} to {to:?}")]
    Phase { from: Phase, to: Phase },
}

impl GameError {
    fn from_valuation(sup: Sup, e: ValuationError) -> Self {
        match e {
            ValuationError::Monotonicity { node, current, proposed } => {
                GameError::Monotonicity { sup, node, current, proposed }
            }
            ValuationError::Structure(violation) => GameError::Structure { sup, violation },
        }
    }
}

/// The two kinds of winning leaf.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    One,
    Two,
}

impl Label {
    pub fn index(self) -> u8 {
        match self {
            Label::One => 1,
            Label::Two => 2,
        }
    }

    pub fn from_index(i: u8) -> Option<Label> {
        match i {
            1 => Some(Label::One),
            2 => Some(Label::Two),
            _ => None,
        }
    }
}

impl Serialize for Label {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(self.index())
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let i = u8::deserialize(d)?;
        Label::from_index(i).ok_or_else(|| serde::de::Error::custom(format!("label must be 1 or 2, got {i}")))
    }
}

/// The two (M, m) threshold pairs of a tree of height `h`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Thresholds {
    pub h: u32,
    /// 1 + 1/(2^h - 1)
    pub big_m1: Rational,
    pub small_m1: Rational,
    pub big_m2: Rational,
    /// 1 + 1/2^((h-1)/2)
    pub small_m2: Rational,
}

impl Thresholds {
    /// What `t` must reach in a leaf with this label.
    pub fn big(&self, label: Label) -> &Rational {
        match label {
            Label::One => &self.big_m1,
            Label::Two => &self.big_m2,
        }
    }

    /// What `t0`, `t1` may not exceed on the path to a leaf with this label.
    pub fn small(&self, label: Label) -> &Rational {
        match label {
            Label::One => &self.small_m1,
            Label::Two => &self.small_m2,
        }
    }
}

pub fn check_height(h: u32) -> Result<(), GameError> {
    if h < 3 || h % 2 == 0 {
        return Err(GameError::BadHeight(h));
    }
    if h > MAX_HEIGHT {
        return Err(GameError::TooTall(h));
    }
    Ok(())
}

/// `2^h / (2^h - 1)`, the value M places in funded leaves.
pub fn leaf_capital(h: u32) -> Rational {
    let p = Rational::pow2(h);
    let pm1 = p.checked_sub(&Rational::one()).expect("2^h >= 1");
    p.checked_div(&pm1).expect("h >= 1")
}

pub fn thresholds(h: u32) -> Result<Thresholds, GameError> {
    check_height(h)?;
    let pm1 = Rational::pow2(h).checked_sub(&Rational::one()).expect("2^h >= 1");
    let big_m1 = Rational::one() + Rational::one().checked_div(&pm1).expect("nonzero");
    Ok(Thresholds {
        h,
        big_m1,
        small_m1: Rational::one(),
        big_m2: Rational::ratio(3, 2),
        small_m2: Rational::one() + Rational::inv_pow2((h - 1) / 2),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mover {
    M,
    A,
}

/// Which of the three supermartingales an assignment writes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sup {
    T,
    T0,
    T1,
}

impl Sup {
    pub fn role(self) -> ParityRole {
        match self {
            Sup::T => ParityRole::FullBettor,
            Sup::T0 => ParityRole::EvenBettor,
            Sup::T1 => ParityRole::OddBettor,
        }
    }

    /// The adversary valuation with the given parity role.
    pub fn for_role(role: ParityRole) -> Sup {
        match role {
            ParityRole::FullBettor => Sup::T,
            ParityRole::EvenBettor => Sup::T0,
            ParityRole::OddBettor => Sup::T1,
        }
    }
}

impl fmt::Display for Sup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sup::T => "t",
            Sup::T0 => "t0",
            Sup::T1 => "t1",
        })
    }
}

/// Progress of M's finite-tree strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    Init,
    Stage1,
    DoneCaseA,
    DoneCaseB,
}

impl Phase {
    fn can_become(self, next: Phase) -> bool {
        matches!(
            (self, next),
            (Phase::Init, Phase::Stage1) | (Phase::Stage1, Phase::DoneCaseA) | (Phase::Stage1, Phase::DoneCaseB)
        ) || self == next
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    #[serde(rename = "valuation")]
    pub sup: Sup,
    pub path: NodeId,
    pub value: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelAttachment {
    pub path: NodeId,
    pub label: Label,
}

/// One validated batch of increases by one player.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Move {
    pub mover: Mover,
    pub assignments: Vec<Assignment>,
    #[serde(default)]
    pub labels: Vec<LabelAttachment>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase: Option<Phase>,
}

impl Move {
    pub fn adversary(assignments: Vec<Assignment>) -> Self {
        Move { mover: Mover::A, assignments, labels: Vec::new(), phase: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", content = "label", rename_all = "kebab-case")]
pub enum LeafStatus {
    Unlabeled,
    Winning(Label),
    Pending(Label),
    Discredited(Label),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "kebab-case")]
pub enum Verdict {
    MWins { leaf: NodeId, label: Label },
    AWins,
}

/// Full state of one finite-tree game. Immutable: moves produce new states.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GameState {
    h: u32,
    root_parity: u32,
    thresholds: Thresholds,
    t: Valuation,
    t0: Valuation,
    t1: Valuation,
    labels: BTreeMap<NodeId, Label>,
    move_log: Vec<Move>,
    phase: Phase,
    initial_t0: Valuation,
    initial_t1: Valuation,
}

impl GameState {
    /// A fresh standalone game: all three roots pinned at 1.
    pub fn new(h: u32, root_parity: u32) -> Result<Self, GameError> {
        let parity = root_parity % 2;
        let t0 = Valuation::new(ParityRole::EvenBettor, parity, Some(h));
        let t1 = Valuation::new(ParityRole::OddBettor, parity, Some(h));
        Self::with_adversary_start(h, parity, t0, t1)
    }

    /// A game whose adversary valuations start from given (already valid)
    /// values, as when a subgame is embedded into a larger tree.
    pub fn with_adversary_start(h: u32, root_parity: u32, t0: Valuation, t1: Valuation) -> Result<Self, GameError> {
        let thresholds = thresholds(h)?;
        let parity = root_parity % 2;
        debug_assert_eq!(t0.role(), ParityRole::EvenBettor);
        debug_assert_eq!(t1.role(), ParityRole::OddBettor);
        for (sup, v) in [(Sup::T0, &t0), (Sup::T1, &t1)] {
            if let Some(violation) = v.validate().into_iter().next() {
                return Err(GameError::Structure { sup, violation });
            }
        }
        Ok(GameState {
            h,
            root_parity: parity,
            thresholds,
            t: Valuation::new(ParityRole::FullBettor, parity, Some(h)),
            initial_t0: t0.clone(),
            initial_t1: t1.clone(),
            t0,
            t1,
            labels: BTreeMap::new(),
            move_log: Vec::new(),
            phase: Phase::Init,
        })
    }

    /// Local adversary valuations for an embedded subgame: root may sit below 1.
    pub fn embedded_valuation(role: ParityRole, root_parity: u32, h: u32, values: BTreeMap<NodeId, Rational>) -> Valuation {
        Valuation::from_parts(role, root_parity % 2, Some(h), RootRule::AtMostOne, values)
    }

    pub fn h(&self) -> u32 {
        self.h
    }

    pub fn root_parity(&self) -> u32 {
        self.root_parity
    }

    pub fn thresholds(&self) -> &Thresholds {
        &self.thresholds
    }

    pub fn valuation(&self, sup: Sup) -> &Valuation {
        match sup {
            Sup::T => &self.t,
            Sup::T0 => &self.t0,
            Sup::T1 => &self.t1,
        }
    }

    pub fn t(&self) -> &Valuation {
        &self.t
    }

    pub fn t0(&self) -> &Valuation {
        &self.t0
    }

    pub fn t1(&self) -> &Valuation {
        &self.t1
    }

    /// The adversary valuation with the given role.
    pub fn adversary(&self, role: ParityRole) -> &Valuation {
        self.valuation(Sup::for_role(role))
    }

    pub fn labels(&self) -> &BTreeMap<NodeId, Label> {
        &self.labels
    }

    pub fn move_log(&self) -> &[Move] {
        &self.move_log
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn is_leaf(&self, x: &NodeId) -> bool {
        x.depth() == self.h
    }

    /// Validates `mv` against the protocol and returns the resulting state.
    pub fn submit_move(&self, mv: Move) -> Result<GameState, GameError> {
        let mut next = self.clone();
        let mut by_sup: BTreeMap<Sup, Vec<(NodeId, Rational)>> = BTreeMap::new();
        for a in &mv.assignments {
            let allowed = match mv.mover {
                Mover::M => a.sup == Sup::T,
                Mover::A => a.sup != Sup::T,
            };
            if !allowed {
                return Err(GameError::Mover { mover: mv.mover, sup: a.sup });
            }
            by_sup.entry(a.sup).or_default().push((a.path, a.value.clone()));
        }
        for (sup, batch) in by_sup {
            let updated = next.valuation(sup).apply_increase(&batch).map_err(|e| GameError::from_valuation(sup, e))?;
            match sup {
                Sup::T => next.t = updated,
                Sup::T0 => next.t0 = updated,
                Sup::T1 => next.t1 = updated,
            }
        }
        if !mv.labels.is_empty() && mv.mover != Mover::M {
            return Err(GameError::Label { leaf: mv.labels[0].path, reason: "only M attaches labels".into() });
        }
        for att in &mv.labels {
            if !next.is_leaf(&att.path) {
                return Err(GameError::Label { leaf: att.path, reason: "labels go on leaves only".into() });
            }
            if let Some(old) = next.labels.get(&att.path) {
                return Err(GameError::Label {
                    leaf: att.path,
                    reason: format!("already labeled {}", old.index()),
                });
            }
            next.labels.insert(att.path, att.label);
        }
        if let Some(phase) = mv.phase {
            if mv.mover != Mover::M || !next.phase.can_become(phase) {
                return Err(GameError::Phase { from: next.phase, to: phase });
            }
            next.phase = phase;
        }
        next.move_log.push(mv);
        Ok(next)
    }

    /// Max of `t0` and `t1` over the root-to-`x` path, memoized in `cache`.
    fn path_max_adversary(&self, x: &NodeId, cache: &mut HashMap<NodeId, Rational>) -> Rational {
        if let Some(v) = cache.get(x) {
            return v.clone();
        }
        let here = self.t0.get_value(x).max(self.t1.get_value(x));
        let v = match x.parent() {
            Some(p) => self.path_max_adversary(&p, cache).max(here),
            None => here,
        };
        cache.insert(*x, v.clone());
        v
    }

    fn status_with(&self, leaf: &NodeId, cache: &mut HashMap<NodeId, Rational>) -> LeafStatus {
        let Some(&label) = self.labels.get(leaf) else {
            return LeafStatus::Unlabeled;
        };
        if self.path_max_adversary(leaf, cache) > *self.thresholds.small(label) {
            LeafStatus::Discredited(label)
        } else if self.t.get_value(leaf) >= *self.thresholds.big(label) {
            LeafStatus::Winning(label)
        } else {
            LeafStatus::Pending(label)
        }
    }

    pub fn leaf_status(&self, leaf: &NodeId) -> LeafStatus {
        self.status_with(leaf, &mut HashMap::new())
    }

    /// Status of every labeled leaf, left to right.
    pub fn statuses(&self) -> Vec<(NodeId, LeafStatus)> {
        let mut cache = HashMap::new();
        self.labels.keys().map(|leaf| (*leaf, self.status_with(leaf, &mut cache))).collect()
    }

    /// The leftmost winning leaf.
    pub fn current_winner(&self) -> Option<(NodeId, Label)> {
        let mut cache = HashMap::new();
        self.labels.keys().find_map(|leaf| match self.status_with(leaf, &mut cache) {
            LeafStatus::Winning(label) => Some((*leaf, label)),
            _ => None,
        })
    }

    /// Verdict once the adversary has stopped moving.
    pub fn referee_final(&self) -> Verdict {
        match self.current_winner() {
            Some((leaf, label)) => Verdict::MWins { leaf, label },
            None => Verdict::AWins,
        }
    }

    /// Rebuilds the state by replaying the move log from the initial position.
    pub fn replay(&self) -> Result<GameState, GameError> {
        let mut s = GameState::with_adversary_start(self.h, self.root_parity, self.initial_t0.clone(), self.initial_t1.clone())?;
        for mv in &self.move_log {
            s = s.submit_move(mv.clone())?;
        }
        Ok(s)
    }
}

//! M's two-move winning strategy on a finite tree.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::game::{leaf_capital, Assignment, GameState, Label, LabelAttachment, LeafStatus, Move, Mover, Phase, Sup};
use crate::rational::Rational;
use crate::tree::{NodeId, ParityRole};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StrategyError {
    /// A state the strategy's correctness argument rules out.
    #[error("engine bug: {0}")]
    EngineBug(String),
}

/// The spine `A_0 = Λ, A_1, ..., A_h` that M's moves are organized around,
/// with `B_j` the sibling of `A_j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SelectedPath {
    leaf: NodeId,
}

impl SelectedPath {
    /// The all-zeros path.
    pub fn all_left(h: u32) -> Self {
        SelectedPath { leaf: NodeId::zeros(h) }
    }

    pub fn h(&self) -> u32 {
        self.leaf.depth()
    }

    pub fn spine(&self, j: u32) -> NodeId {
        self.leaf.ancestor_at(j)
    }

    /// Sibling of the spine node at depth `j >= 1`.
    pub fn branch(&self, j: u32) -> NodeId {
        self.spine(j).sibling().expect("j >= 1")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Case {
    /// Nothing to do yet.
    Quiet,
    /// Some adversary value exceeds 1 at the spine node at depth `i`.
    A(u32),
    /// Every leaf funded by the opening move is discredited.
    B,
}

/// Builds an M move that raises the listed leaves (never lowering any) and
/// makes every internal node the average of its children again.
fn funding_move(s: &GameState, plan: impl IntoIterator<Item = NodeId>, value: &Rational, label: Label, phase: Phase) -> Move {
    let h = s.h();
    let t = s.t();
    let mut level: BTreeMap<NodeId, Rational> =
        t.stored().iter().filter(|(x, _)| x.depth() == h).map(|(x, v)| (*x, v.clone())).collect();
    let mut assignments = Vec::new();
    let mut labels = Vec::new();
    for leaf in plan {
        if !s.labels().contains_key(&leaf) {
            labels.push(LabelAttachment { path: leaf, label });
        }
        let cur = level.get(&leaf).cloned().unwrap_or_else(Rational::zero);
        if *value > cur {
            level.insert(leaf, value.clone());
            assignments.push(Assignment { sup: Sup::T, path: leaf, value: value.clone() });
        }
    }
    for _ in 1..h {
        let mut up: BTreeMap<NodeId, Rational> = BTreeMap::new();
        for x in level.keys() {
            let p = x.parent().expect("below root");
            if up.contains_key(&p) {
                continue;
            }
            let [c0, c1] = p.children();
            let get = |c: &NodeId| level.get(c).cloned().unwrap_or_else(Rational::zero);
            up.insert(p, Rational::average(&get(&c0), &get(&c1)));
        }
        for (x, v) in &up {
            if *v != t.get_value(x) {
                assignments.push(Assignment { sup: Sup::T, path: *x, value: v.clone() });
            }
        }
        level = up;
    }
    let root_avg: Rational = level.values().sum::<Rational>().half();
    debug_assert!(root_avg <= Rational::one(), "M overspent: {root_avg}");
    Move { mover: Mover::M, assignments, labels, phase: Some(phase) }
}

/// The opening move: every leaf below `B_3, B_5, ..., B_h` gets the leaf
/// capital and label 1.
pub fn first_move(s: &GameState, path: &SelectedPath) -> Move {
    let h = s.h();
    let plan = (3..=h).step_by(2).flat_map(|j| path.branch(j).descendants(h - j));
    funding_move(s, plan, &leaf_capital(h), Label::One, Phase::Stage1)
}

/// The role that bets at the spine node at local depth `j`.
fn spine_bettor(s: &GameState, j: u32) -> ParityRole {
    ParityRole::betting_at(s.root_parity() + j)
}

pub fn detect_case(s: &GameState, path: &SelectedPath) -> Result<Case, StrategyError> {
    if s.phase() != Phase::Stage1 {
        return Ok(Case::Quiet);
    }
    let one = Rational::one();
    for i in 1..=s.h() {
        let x = path.spine(i);
        if s.t0().get_value(&x) > one || s.t1().get_value(&x) > one {
            return Ok(Case::A(i));
        }
    }
    let statuses = s.statuses();
    let funded: Vec<_> = statuses.iter().filter(|(_, st)| !matches!(st, LeafStatus::Unlabeled)).collect();
    if funded.is_empty() || funded.iter().any(|(_, st)| !matches!(st, LeafStatus::Discredited(_))) {
        return Ok(Case::Quiet);
    }
    for j in (3..=s.h()).step_by(2) {
        let role = spine_bettor(s, j - 1);
        let v = s.adversary(role).get_value(&path.branch(j));
        if v <= one {
            return Err(StrategyError::EngineBug(format!(
                "all funded leaves discredited but {role:?} is {v} at {}",
                path.branch(j)
            )));
        }
    }
    Ok(Case::B)
}

/// Funds every leaf except the spine leaf with the leaf capital.
pub fn case_a_move(s: &GameState, path: &SelectedPath) -> Move {
    let spine_leaf = path.spine(s.h());
    let plan = NodeId::root().descendants(s.h()).filter(|x| *x != spine_leaf);
    funding_move(s, plan, &leaf_capital(s.h()), Label::One, Phase::DoneCaseA)
}

/// Funds every leaf below `B_1` with 3/2 and label 2.
pub fn case_b_move(s: &GameState, path: &SelectedPath) -> Move {
    let plan = path.branch(1).descendants(s.h() - 1);
    funding_move(s, plan, &Rational::ratio(3, 2), Label::Two, Phase::DoneCaseB)
}

/// Lower bounds forced on the spine-betting role in case B.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpineBounds {
    /// Bounds at `A_{h-1}, A_{h-2}, ..., A_1`, in that order.
    pub along: Vec<Rational>,
    /// Upper bound on the same role at `B_1`.
    pub branch_cap: Rational,
}

/// Walks up the spine from `A_h` (bound 0): at each node where the role
/// bets, its value is at least the average of the spine child and the
/// branch child (which exceeds 1); elsewhere it equals the spine child.
pub fn path_lower_bounds(h: u32) -> SpineBounds {
    let mut bound = Rational::zero();
    let mut along = Vec::new();
    for k in (1..h).rev() {
        if k % 2 == 0 {
            bound = Rational::average(&bound, &Rational::one());
        }
        along.push(bound.clone());
    }
    let branch_cap = Rational::from_int(2).saturating_sub(&bound);
    SpineBounds { along, branch_cap }
}

/// M's reaction to the current state, if any.
pub fn respond(s: &GameState, path: &SelectedPath) -> Result<Option<Move>, StrategyError> {
    match s.phase() {
        Phase::Init => Ok(Some(first_move(s, path))),
        Phase::Stage1 => Ok(match detect_case(s, path)? {
            Case::Quiet => None,
            Case::A(_) => Some(case_a_move(s, path)),
            Case::B => Some(case_b_move(s, path)),
        }),
        Phase::DoneCaseA | Phase::DoneCaseB => Ok(None),
    }
}

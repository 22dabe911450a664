//! Nests finite games along a branch of the infinite tree.
//!
//! Stage 0 is a game of the initial height at the root. Whenever the deepest
//! active stage has a winning leaf, a child stage is rooted there: same
//! height for a label-1 leaf, height + 2 for label 2. Stage-local values are
//! the global ones divided by the stage's scale (the product of the `M`
//! thresholds above it for `t`, of the `m` thresholds for `t0`, `t1`).
//! When a stage's chosen leaf is discredited, every stage below it is
//! discarded and frozen, and the leftmost winning leaf becomes the new choice.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversary::{close_targets, Adversary, AdversaryConfig, AdversaryKind, Target};
use crate::game::{
    thresholds, Assignment, GameError, GameState, Label, LabelAttachment, LeafStatus, Move, Mover, Phase, Sup,
};
use crate::rational::Rational;
use crate::strategy::{respond, SelectedPath, StrategyError};
use crate::trace::SessionRecord;
use crate::tree::{NodeId, ParityRole, RootRule, Valuation, ValuationError, MAX_DEPTH};

const RANDOM_ATTEMPTS: u32 = 32;

/// 2.3843, strictly above the infinite product of `1 + 2^-k` over `k >= 1`.
pub fn universal_allowance_bound() -> Rational {
    Rational::ratio(23843, 10000)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ComposeError {
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Strategy(#[from] StrategyError),
    #[error("stage at {root:?} of height {h} would exceed depth {MAX_DEPTH}")]
    TooDeep { root: NodeId, h: u32 },
    #[error("engine bug: {0}")]
    EngineBug(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StageStatus {
    Active,
    Discarded,
}

#[derive(Debug, Clone)]
pub struct Stage {
    pub index: usize,
    pub parent: Option<usize>,
    pub root: NodeId,
    pub h: u32,
    pub root_parity: u32,
    pub m_scale: Rational,
    pub a_scale: Rational,
    pub game: GameState,
    pub status: StageStatus,
    /// Local leaf and label of the chosen winning leaf.
    pub candidate: Option<(NodeId, Label)>,
    pub candidate_changes: usize,
}

impl Stage {
    pub fn global(&self, local: &NodeId) -> NodeId {
        self.root.join(local).expect("depth checked at spawn")
    }

    /// Local path of a global node inside this stage's tree.
    pub fn local(&self, global: &NodeId) -> Option<NodeId> {
        global.strip_prefix(&self.root).filter(|l| l.depth() <= self.h)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StepOutcome {
    Applied,
    /// The adversary's batch was invalid globally and was not applied.
    Rejected(String),
    Halted,
}

/// Summary of the branch selected by the active chain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchReport {
    pub omega_prefix: NodeId,
    pub stage_roots: Vec<NodeId>,
    pub heights: Vec<u32>,
    pub labels: Vec<Label>,
    /// Global `t` at each stage root, then at the final chosen leaf.
    pub t_along: Vec<Rational>,
    pub a_max_along: Rational,
    pub growth_product: Rational,
    pub allowance_product: Rational,
    pub ok: bool,
}

/// Runs one adversary policy against the composed tree: scripted policies
/// act on the shallowest active stage still in its first phase, random ones
/// on a random active stage.
#[derive(Debug, Clone)]
pub struct GlobalAdversary {
    config: AdversaryConfig,
    per_stage: BTreeMap<usize, Adversary>,
    rng: ChaCha8Rng,
    made: usize,
}

impl GlobalAdversary {
    pub fn new(config: AdversaryConfig) -> Self {
        let seed = match config.kind {
            AdversaryKind::Random { seed, .. } => seed,
            _ => 0,
        };
        GlobalAdversary { config, per_stage: BTreeMap::new(), rng: ChaCha8Rng::seed_from_u64(seed ^ 0x5eed), made: 0 }
    }

    pub fn config(&self) -> &AdversaryConfig {
        &self.config
    }

    fn stage_adversary(&mut self, index: usize) -> &mut Adversary {
        let config = &self.config;
        self.per_stage.entry(index).or_insert_with(|| {
            let mut c = config.clone();
            if let AdversaryKind::Random { seed, .. } = &mut c.kind {
                *seed = seed.wrapping_add((index as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
            }
            Adversary::new(c)
        })
    }

    fn next_batch(&mut self, stages: &[Stage], chain: &[usize], t0: &Valuation, t1: &Valuation) -> Option<Vec<Assignment>> {
        if self.made >= self.config.budget || chain.is_empty() {
            return None;
        }
        let random = matches!(self.config.kind, AdversaryKind::Random { .. });
        let mut attempts = 0;
        loop {
            let proposal = if random {
                let pick = chain[self.rng.gen_range(0..chain.len())];
                self.stage_adversary(pick).propose(&stages[pick].game).map(|p| (pick, p))
            } else {
                chain
                    .iter()
                    .filter(|&&i| stages[i].game.phase() == Phase::Stage1)
                    .find_map(|&i| self.stage_adversary(i).propose(&stages[i].game).map(|p| (i, p)))
            };
            let (pick, local) = proposal?;
            let stage = &stages[pick];
            let global: Vec<Target> =
                local.into_iter().map(|(sup, x, v)| (sup, stage.global(&x), v * &stage.a_scale)).collect();
            let closed = close_targets(&global, |sup| if sup == Sup::T0 { t0 } else { t1 });
            match closed {
                Ok(batch) if !batch.is_empty() => {
                    self.stage_adversary(pick).accepted();
                    self.made += 1;
                    return Some(batch);
                }
                _ => {
                    attempts += 1;
                    if !random || attempts >= RANDOM_ATTEMPTS {
                        return None;
                    }
                }
            }
        }
    }
}

/// A composition run in progress.
#[derive(Debug, Clone)]
pub struct Session {
    initial_h: u32,
    max_stages: usize,
    stages: Vec<Stage>,
    chain: Vec<usize>,
    t0: Valuation,
    t1: Valuation,
    adversary: GlobalAdversary,
    records: Vec<SessionRecord>,
    move_index: usize,
    steps: usize,
    rejected: usize,
}

impl Session {
    pub fn new(initial_h: u32, adversary: AdversaryConfig, max_stages: usize) -> Result<Self, ComposeError> {
        thresholds(initial_h)?;
        let mut s = Session {
            initial_h,
            max_stages,
            stages: Vec::new(),
            chain: Vec::new(),
            t0: Valuation::new(ParityRole::EvenBettor, 0, None),
            t1: Valuation::new(ParityRole::OddBettor, 0, None),
            records: vec![SessionRecord::Session { initial_h, max_stages, adversary: adversary.clone() }],
            adversary: GlobalAdversary::new(adversary),
            move_index: 0,
            steps: 0,
            rejected: 0,
        };
        if max_stages > 0 {
            s.spawn(None, NodeId::root(), initial_h, Rational::one(), Rational::one())?;
            s.settle()?;
        }
        Ok(s)
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    /// Indices of the active stages, root first.
    pub fn chain(&self) -> &[usize] {
        &self.chain
    }

    pub fn t0(&self) -> &Valuation {
        &self.t0
    }

    pub fn t1(&self) -> &Valuation {
        &self.t1
    }

    pub fn records(&self) -> &[SessionRecord] {
        &self.records
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn rejected(&self) -> usize {
        self.rejected
    }

    pub fn initial_h(&self) -> u32 {
        self.initial_h
    }

    pub fn max_stages(&self) -> usize {
        self.max_stages
    }

    fn project(global: &Valuation, root: &NodeId, h: u32, scale: &Rational, role: ParityRole) -> Valuation {
        let mut values: BTreeMap<NodeId, Rational> = global
            .stored()
            .iter()
            .filter_map(|(x, v)| {
                let l = x.strip_prefix(root)?;
                (l.depth() <= h).then(|| (l, v.checked_div(scale).expect("scale is positive")))
            })
            .collect();
        values.insert(NodeId::root(), global.get_value(root).checked_div(scale).expect("scale is positive"));
        Valuation::from_parts(role, root.depth() % 2, Some(h), RootRule::AtMostOne, values)
    }

    fn spawn(&mut self, parent: Option<usize>, root: NodeId, h: u32, m_scale: Rational, a_scale: Rational) -> Result<(), ComposeError> {
        if root.depth() + h > MAX_DEPTH {
            return Err(ComposeError::TooDeep { root, h });
        }
        let parity = root.depth() % 2;
        let t0 = Self::project(&self.t0, &root, h, &a_scale, ParityRole::EvenBettor);
        let t1 = Self::project(&self.t1, &root, h, &a_scale, ParityRole::OddBettor);
        let game = GameState::with_adversary_start(h, parity, t0, t1)?;
        let index = self.stages.len();
        self.records.push(SessionRecord::StageSpawn {
            index,
            parent,
            root,
            h,
            root_parity: parity,
            m_scale: m_scale.clone(),
            a_scale: a_scale.clone(),
        });
        self.stages.push(Stage {
            index,
            parent,
            root,
            h,
            root_parity: parity,
            m_scale,
            a_scale,
            game,
            status: StageStatus::Active,
            candidate: None,
            candidate_changes: 0,
        });
        self.chain.push(index);
        self.react(index)?;
        let winner = self.stages[index]
            .game
            .current_winner()
            .ok_or_else(|| ComposeError::EngineBug(format!("new stage {index} has no winning leaf")))?;
        self.choose(index, winner, false);
        Ok(())
    }

    fn choose(&mut self, index: usize, winner: (NodeId, Label), changed: bool) {
        let stage = &mut self.stages[index];
        stage.candidate = Some(winner);
        if changed {
            stage.candidate_changes += 1;
        }
        let leaf = stage.global(&winner.0);
        self.records.push(SessionRecord::Candidate { stage: index, leaf, label: winner.1 });
    }

    /// Lets M respond in stage `index` until it has nothing to add.
    fn react(&mut self, index: usize) -> Result<(), ComposeError> {
        loop {
            let stage = &self.stages[index];
            let path = SelectedPath::all_left(stage.h);
            let Some(mv) = respond(&stage.game, &path)? else {
                return Ok(());
            };
            let assignments = mv
                .assignments
                .iter()
                .map(|a| Assignment { sup: Sup::T, path: stage.global(&a.path), value: &a.value * &stage.m_scale })
                .collect();
            let labels = mv
                .labels
                .iter()
                .map(|l| LabelAttachment { path: stage.global(&l.path), label: l.label })
                .collect();
            self.records.push(SessionRecord::GlobalMove {
                index: self.move_index,
                mover: Mover::M,
                stage: Some(index),
                phase: mv.phase,
                assignments,
                labels,
            });
            self.move_index += 1;
            let next = self.stages[index].game.submit_move(mv)?;
            self.stages[index].game = next;
        }
    }

    fn settle(&mut self) -> Result<(), ComposeError> {
        while self.chain.len() < self.max_stages {
            let Some(&last) = self.chain.last() else {
                return Ok(());
            };
            let deepest = &self.stages[last];
            let Some((leaf, label)) = deepest.candidate else {
                return Err(ComposeError::EngineBug(format!("stage {} has no candidate", deepest.index)));
            };
            let th = thresholds(deepest.h)?;
            let h = if label == Label::Two { deepest.h + 2 } else { deepest.h };
            let root = deepest.global(&leaf);
            let m_scale = &deepest.m_scale * th.big(label);
            let a_scale = &deepest.a_scale * th.small(label);
            let parent = deepest.index;
            self.spawn(Some(parent), root, h, m_scale, a_scale)?;
        }
        Ok(())
    }

    /// One adversary move (if any) and every reaction to it.
    pub fn step(&mut self) -> Result<StepOutcome, ComposeError> {
        match self.adversary.next_batch(&self.stages, &self.chain, &self.t0, &self.t1) {
            None => Ok(StepOutcome::Halted),
            Some(batch) => self.step_with(batch),
        }
    }

    /// Applies an explicit adversary batch in global coordinates.
    pub fn step_with(&mut self, batch: Vec<Assignment>) -> Result<StepOutcome, ComposeError> {
        self.steps += 1;
        let mut split: BTreeMap<Sup, Vec<(NodeId, Rational)>> = BTreeMap::new();
        for a in &batch {
            if a.sup == Sup::T {
                return self.reject(batch, "adversary may not write t".into());
            }
            split.entry(a.sup).or_default().push((a.path, a.value.clone()));
        }
        let apply = |v: &Valuation, sup: Sup| -> Result<Valuation, ValuationError> {
            v.apply_increase(split.get(&sup).map(Vec::as_slice).unwrap_or(&[]))
        };
        let (t0, t1) = match (apply(&self.t0, Sup::T0), apply(&self.t1, Sup::T1)) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(e), _) | (_, Err(e)) => return self.reject(batch, e.to_string()),
        };
        let affected: Vec<(Sup, BTreeSet<NodeId>)> = [(Sup::T0, &t0), (Sup::T1, &t1)]
            .into_iter()
            .map(|(sup, v)| (sup, v.affected_nodes(split.get(&sup).into_iter().flatten().map(|(x, _)| x))))
            .collect();
        self.t0 = t0;
        self.t1 = t1;
        self.records.push(SessionRecord::GlobalMove {
            index: self.move_index,
            mover: Mover::A,
            stage: None,
            phase: None,
            assignments: batch,
            labels: Vec::new(),
        });
        self.move_index += 1;

        for pos in 0..self.chain.len() {
            let index = self.chain[pos];
            let stage = &self.stages[index];
            let mut local = Vec::new();
            for (sup, nodes) in &affected {
                let global = if *sup == Sup::T0 { &self.t0 } else { &self.t1 };
                for x in nodes {
                    let Some(l) = stage.local(x) else { continue };
                    let v = global.get_value(x).checked_div(&stage.a_scale).expect("scale is positive");
                    if v != stage.game.valuation(*sup).get_value(&l) {
                        local.push(Assignment { sup: *sup, path: l, value: v });
                    }
                }
            }
            if !local.is_empty() {
                let next = stage
                    .game
                    .submit_move(Move::adversary(local))
                    .map_err(|e| ComposeError::EngineBug(format!("projection into stage {index} failed: {e}")))?;
                self.stages[index].game = next;
            }
            self.react(index)?;
            let stage = &self.stages[index];
            let (leaf, _) = stage.candidate.expect("active stages have a candidate");
            if matches!(stage.game.leaf_status(&leaf), LeafStatus::Winning(_)) {
                continue;
            }
            let winner = stage
                .game
                .current_winner()
                .ok_or_else(|| ComposeError::EngineBug(format!("stage {index} has no winning leaf")))?;
            self.choose(index, winner, true);
            for &dropped in &self.chain[pos + 1..] {
                self.stages[dropped].status = StageStatus::Discarded;
                self.records.push(SessionRecord::StageDiscard { index: dropped });
            }
            self.chain.truncate(pos + 1);
            break;
        }
        self.settle()?;
        Ok(StepOutcome::Applied)
    }

    fn reject(&mut self, batch: Vec<Assignment>, reason: String) -> Result<StepOutcome, ComposeError> {
        let _ = batch;
        self.rejected += 1;
        self.records.push(SessionRecord::GlobalReject { index: self.move_index, reason: reason.clone() });
        Ok(StepOutcome::Rejected(reason))
    }

    /// Steps until the adversary halts or `max_steps` is reached.
    pub fn run(&mut self, max_steps: usize) -> Result<BranchReport, ComposeError> {
        for _ in 0..max_steps {
            if self.step()? == StepOutcome::Halted {
                break;
            }
        }
        let report = self.branch_report();
        self.records.push(SessionRecord::Report { report: report.clone() });
        Ok(report)
    }

    /// The global `t` stitched together from every stage, active or not.
    pub fn assemble_global(&self) -> Valuation {
        let mut values = BTreeMap::new();
        for stage in &self.stages {
            for (x, v) in stage.game.t().stored() {
                if x.is_root() {
                    continue;
                }
                let prev = values.insert(stage.global(x), v * &stage.m_scale);
                debug_assert!(prev.is_none(), "stages overlap at {x:?}");
            }
        }
        Valuation::from_parts(ParityRole::FullBettor, 0, None, RootRule::Pinned, values)
    }

    pub fn branch_report(&self) -> BranchReport {
        let t = self.assemble_global();
        let chain: Vec<&Stage> = self.chain.iter().map(|&i| &self.stages[i]).collect();
        let omega_prefix = match chain.last() {
            Some(Stage { candidate: Some((leaf, _)), .. }) => chain.last().expect("nonempty").global(leaf),
            Some(deepest) => deepest.root,
            None => NodeId::root(),
        };
        let mut t_along: Vec<Rational> = chain.iter().map(|s| t.get_value(&s.root)).collect();
        t_along.push(t.get_value(&omega_prefix));
        let a_max_along = omega_prefix
            .path_from_root()
            .map(|x| self.t0.get_value(&x).max(self.t1.get_value(&x)))
            .max()
            .expect("path is nonempty");
        let mut growth_product = Rational::one();
        let mut allowance_product = Rational::one();
        let mut labels = Vec::new();
        for s in &chain {
            if let Some((_, label)) = s.candidate {
                let th = s.game.thresholds();
                growth_product *= th.big(label);
                allowance_product *= th.small(label);
                labels.push(label);
            }
        }
        let ok = t_along.last().expect("nonempty") >= &growth_product
            && a_max_along <= allowance_product
            && allowance_product < universal_allowance_bound()
            && chain.iter().zip(&t_along).all(|(s, v)| *v >= s.m_scale);
        BranchReport {
            omega_prefix,
            stage_roots: chain.iter().map(|s| s.root).collect(),
            heights: chain.iter().map(|s| s.h).collect(),
            labels,
            t_along,
            a_max_along,
            growth_product,
            allowance_product,
            ok,
        }
    }
}

/// Phase of every active stage, root first.
pub fn chain_phases(session: &Session) -> Vec<Phase> {
    session.chain().iter().map(|&i| session.stages()[i].game.phase()).collect()
}

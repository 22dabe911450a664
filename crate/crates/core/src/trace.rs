//! JSON Lines traces of finite games and composed sessions, and a verifier
//! that replays them independently of the engine that wrote them.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversary::AdversaryConfig;
use crate::composer::{universal_allowance_bound, BranchReport};
use crate::game::{thresholds, Assignment, GameError, GameState, Label, LabelAttachment, LeafStatus, Move, Mover, Phase, Sup, Verdict};
use crate::rational::Rational;
use crate::tree::{NodeId, ParityRole, Valuation, ValuationError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FiniteRecord {
    Start {
        h: u32,
        root_parity: u32,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        adversary: Option<AdversaryConfig>,
    },
    Move {
        index: usize,
        #[serde(flatten)]
        mv: Move,
    },
    Status {
        leaf: NodeId,
        status: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<Label>,
    },
    Verdict {
        result: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        leaf: Option<NodeId>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<Label>,
    },
}

impl FiniteRecord {
    pub fn status(leaf: NodeId, status: LeafStatus) -> Self {
        let (name, label) = match status {
            LeafStatus::Unlabeled => ("unlabeled", None),
            LeafStatus::Winning(l) => ("winning", Some(l)),
            LeafStatus::Pending(l) => ("pending", Some(l)),
            LeafStatus::Discredited(l) => ("discredited", Some(l)),
        };
        FiniteRecord::Status { leaf, status: name.into(), label }
    }

    pub fn verdict(v: &Verdict) -> Self {
        match v {
            Verdict::MWins { leaf, label } => {
                FiniteRecord::Verdict { result: "m-wins".into(), leaf: Some(*leaf), label: Some(*label) }
            }
            Verdict::AWins => FiniteRecord::Verdict { result: "a-wins".into(), leaf: None, label: None },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SessionRecord {
    Session {
        initial_h: u32,
        max_stages: usize,
        adversary: AdversaryConfig,
    },
    StageSpawn {
        index: usize,
        parent: Option<usize>,
        root: NodeId,
        h: u32,
        root_parity: u32,
        m_scale: Rational,
        a_scale: Rational,
    },
    StageDiscard {
        index: usize,
    },
    /// `leaf` is global.
    Candidate {
        stage: usize,
        leaf: NodeId,
        label: Label,
    },
    GlobalMove {
        index: usize,
        mover: Mover,
        stage: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        phase: Option<Phase>,
        assignments: Vec<Assignment>,
        #[serde(default)]
        labels: Vec<LabelAttachment>,
    },
    GlobalReject {
        index: usize,
        reason: String,
    },
    Report {
        #[serde(flatten)]
        report: BranchReport,
    },
}

pub fn write_jsonl<T: Serialize>(out: &mut impl Write, records: &[T]) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut *out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationClass {
    Monotonicity,
    Structure,
    Label,
    Mover,
    Phase,
    Status,
    Verdict,
    Bookkeeping,
    Report,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VerifyError {
    #[error("line {line}: malformed trace: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: {class:?} violation: {message}")]
    Violation { line: usize, class: ViolationClass, message: String },
}

impl VerifyError {
    pub fn exit_code(&self) -> i32 {
        match self {
            VerifyError::Violation { .. } => 1,
            VerifyError::Malformed { .. } => 2,
        }
    }

    pub fn class(&self) -> Option<ViolationClass> {
        match self {
            VerifyError::Violation { class, .. } => Some(*class),
            VerifyError::Malformed { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TraceKind {
    Finite,
    Session,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerifySummary {
    pub kind: TraceKind,
    pub records: usize,
    pub moves: usize,
}

fn violation(line: usize, class: ViolationClass, message: impl Into<String>) -> VerifyError {
    VerifyError::Violation { line, class, message: message.into() }
}

fn game_violation(line: usize, e: GameError) -> VerifyError {
    let class = match &e {
        GameError::Monotonicity { .. } => ViolationClass::Monotonicity,
        GameError::Structure { .. } => ViolationClass::Structure,
        GameError::Label { .. } => ViolationClass::Label,
        GameError::Mover { .. } => ViolationClass::Mover,
        GameError::Phase { .. } => ViolationClass::Phase,
        GameError::BadHeight(_) | GameError::TooTall(_) => {
            return VerifyError::Malformed { line, message: e.to_string() };
        }
    };
    violation(line, class, e.to_string())
}

fn valuation_violation(line: usize, sup: Sup, e: ValuationError) -> VerifyError {
    match e {
        ValuationError::Monotonicity { node, current, proposed } => violation(
            line,
            ViolationClass::Monotonicity,
            format!("{sup} at {node:?} lowered from {current} to {proposed}"),
        ),
        ValuationError::Structure(v) => violation(line, ViolationClass::Structure, format!("{sup}: {v}")),
    }
}

fn read_lines(input: impl BufRead) -> Result<Vec<(usize, serde_json::Value)>, VerifyError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| VerifyError::Malformed { line: line_no, message: e.to_string() })?;
        if line.trim().is_empty() {
            continue;
        }
        let v: serde_json::Value = serde_json::from_str(&line)
            .map_err(|e| VerifyError::Malformed { line: line_no, message: e.to_string() })?;
        out.push((line_no, v));
    }
    Ok(out)
}

fn parse<T: for<'de> Deserialize<'de>>(line: usize, v: serde_json::Value) -> Result<T, VerifyError> {
    serde_json::from_value(v).map_err(|e| VerifyError::Malformed { line, message: e.to_string() })
}

/// Replays a trace of either kind, detected from its first record.
pub fn verify(input: impl BufRead) -> Result<VerifySummary, VerifyError> {
    let lines = read_lines(input)?;
    let Some((first_line, first)) = lines.first() else {
        return Err(VerifyError::Malformed { line: 0, message: "empty trace".into() });
    };
    match first.get("kind").and_then(|k| k.as_str()) {
        Some("start") => {
            let records = lines.into_iter().map(|(l, v)| parse(l, v).map(|r| (l, r))).collect::<Result<Vec<_>, _>>()?;
            verify_finite(&records)
        }
        Some("session") => {
            let records = lines.into_iter().map(|(l, v)| parse(l, v).map(|r| (l, r))).collect::<Result<Vec<_>, _>>()?;
            verify_session(&records)
        }
        _ => Err(VerifyError::Malformed { line: *first_line, message: "trace must start with a start or session record".into() }),
    }
}

pub fn verify_finite(records: &[(usize, FiniteRecord)]) -> Result<VerifySummary, VerifyError> {
    let mut iter = records.iter();
    let Some((line, FiniteRecord::Start { h, root_parity, .. })) = iter.next() else {
        return Err(VerifyError::Malformed { line: 1, message: "missing start record".into() });
    };
    let mut state = GameState::new(*h, *root_parity).map_err(|e| game_violation(*line, e))?;
    let mut moves = 0;
    for (line, rec) in iter {
        match rec {
            FiniteRecord::Start { .. } => {
                return Err(VerifyError::Malformed { line: *line, message: "second start record".into() });
            }
            FiniteRecord::Move { index, mv } => {
                if *index != moves {
                    return Err(violation(*line, ViolationClass::Bookkeeping, format!("move index {index}, expected {moves}")));
                }
                state = state.submit_move(mv.clone()).map_err(|e| game_violation(*line, e))?;
                moves += 1;
            }
            FiniteRecord::Status { leaf, .. } => {
                let want = FiniteRecord::status(*leaf, state.leaf_status(leaf));
                if want != *rec {
                    return Err(violation(*line, ViolationClass::Status, format!("recorded {rec:?}, replay gives {want:?}")));
                }
            }
            FiniteRecord::Verdict { .. } => {
                let want = FiniteRecord::verdict(&state.referee_final());
                if want != *rec {
                    return Err(violation(*line, ViolationClass::Verdict, format!("recorded {rec:?}, replay gives {want:?}")));
                }
            }
        }
    }
    Ok(VerifySummary { kind: TraceKind::Finite, records: records.len(), moves })
}

struct StageBook {
    root: NodeId,
    h: u32,
    m_scale: Rational,
    a_scale: Rational,
    discarded: bool,
    candidate: Option<(NodeId, Label)>,
}

impl StageBook {
    fn contains(&self, x: &NodeId) -> bool {
        x.strip_prefix(&self.root).is_some_and(|l| l.depth() <= self.h)
    }

    fn is_leaf(&self, x: &NodeId) -> bool {
        self.contains(x) && x.depth() == self.root.depth() + self.h
    }
}

fn path_max(t0: &Valuation, t1: &Valuation, x: &NodeId) -> Rational {
    x.path_from_root().map(|n| t0.get_value(&n).max(t1.get_value(&n))).max().expect("nonempty path")
}

pub fn verify_session(records: &[(usize, SessionRecord)]) -> Result<VerifySummary, VerifyError> {
    let mut iter = records.iter();
    let Some((_, SessionRecord::Session { initial_h, .. })) = iter.next() else {
        return Err(VerifyError::Malformed { line: 1, message: "missing session record".into() });
    };
    let mut t = Valuation::new(ParityRole::FullBettor, 0, None);
    let mut t0 = Valuation::new(ParityRole::EvenBettor, 0, None);
    let mut t1 = Valuation::new(ParityRole::OddBettor, 0, None);
    let mut stages: Vec<StageBook> = Vec::new();
    let mut labels: BTreeMap<NodeId, Label> = BTreeMap::new();
    let mut moves = 0;

    for (line, rec) in iter {
        let line = *line;
        let book = |msg: String| violation(line, ViolationClass::Bookkeeping, msg);
        match rec {
            SessionRecord::Session { .. } => {
                return Err(VerifyError::Malformed { line, message: "second session record".into() });
            }
            SessionRecord::StageSpawn { index, parent, root, h, root_parity, m_scale, a_scale } => {
                if *index != stages.len() {
                    return Err(book(format!("stage index {index}, expected {}", stages.len())));
                }
                if *root_parity != root.depth() % 2 {
                    return Err(book(format!("stage {index} parity {root_parity} at depth {}", root.depth())));
                }
                let (want_root, want_h, want_m, want_a) = match parent {
                    None => {
                        if *index != 0 {
                            return Err(book(format!("stage {index} has no parent")));
                        }
                        (NodeId::root(), *initial_h, Rational::one(), Rational::one())
                    }
                    Some(p) => {
                        let Some(ps) = stages.get(*p).filter(|s| !s.discarded) else {
                            return Err(book(format!("stage {index} spawned from missing or discarded stage {p}")));
                        };
                        let Some((leaf, label)) = ps.candidate else {
                            return Err(book(format!("parent stage {p} has no chosen leaf")));
                        };
                        let th = thresholds(ps.h).map_err(|e| book(e.to_string()))?;
                        let h = if label == Label::Two { ps.h + 2 } else { ps.h };
                        (leaf, h, &ps.m_scale * th.big(label), &ps.a_scale * th.small(label))
                    }
                };
                if (*root, *h, m_scale, a_scale) != (want_root, want_h, &want_m, &want_a) {
                    return Err(book(format!(
                        "stage {index} is ({root:?}, {h}, {m_scale}, {a_scale}), expected ({want_root:?}, {want_h}, {want_m}, {want_a})"
                    )));
                }
                stages.push(StageBook {
                    root: *root,
                    h: *h,
                    m_scale: m_scale.clone(),
                    a_scale: a_scale.clone(),
                    discarded: false,
                    candidate: None,
                });
            }
            SessionRecord::StageDiscard { index } => match stages.get_mut(*index) {
                Some(s) if !s.discarded => s.discarded = true,
                _ => return Err(book(format!("discard of unknown or discarded stage {index}"))),
            },
            SessionRecord::Candidate { stage, leaf, label } => {
                let Some(s) = stages.get(*stage).filter(|s| !s.discarded) else {
                    return Err(book(format!("candidate for unknown or discarded stage {stage}")));
                };
                if !s.is_leaf(leaf) || labels.get(leaf) != Some(label) {
                    return Err(book(format!("{leaf:?} is not a leaf of stage {stage} labeled {}", label.index())));
                }
                let th = thresholds(s.h).map_err(|e| book(e.to_string()))?;
                let need = &s.m_scale * th.big(*label);
                let allow = &s.a_scale * th.small(*label);
                let (tv, am) = (t.get_value(leaf), path_max(&t0, &t1, leaf));
                if tv < need || am > allow {
                    return Err(violation(
                        line,
                        ViolationClass::Status,
                        format!("chosen leaf {leaf:?} is not winning: t = {tv} (need {need}), path max {am} (allowed {allow})"),
                    ));
                }
                stages[*stage].candidate = Some((*leaf, *label));
            }
            SessionRecord::GlobalMove { index, mover, stage, assignments, labels: new_labels, .. } => {
                if *index != moves {
                    return Err(book(format!("move index {index}, expected {moves}")));
                }
                moves += 1;
                let mut split: BTreeMap<Sup, Vec<(NodeId, Rational)>> = BTreeMap::new();
                for a in assignments {
                    if (*mover == Mover::M) != (a.sup == Sup::T) {
                        return Err(violation(line, ViolationClass::Mover, format!("{mover:?} wrote {}", a.sup)));
                    }
                    split.entry(a.sup).or_default().push((a.path, a.value.clone()));
                }
                match mover {
                    Mover::A => {
                        if !new_labels.is_empty() {
                            return Err(violation(line, ViolationClass::Label, "adversary attached a label"));
                        }
                        for (sup, batch) in split {
                            let v = if sup == Sup::T0 { &mut t0 } else { &mut t1 };
                            *v = v.apply_increase(&batch).map_err(|e| valuation_violation(line, sup, e))?;
                        }
                    }
                    Mover::M => {
                        let Some(s) = stage.and_then(|i| stages.get(i)).filter(|s| !s.discarded) else {
                            return Err(book(format!("M move for unknown or discarded stage {stage:?}")));
                        };
                        for (x, _) in split.get(&Sup::T).into_iter().flatten() {
                            if !s.contains(x) || *x == s.root {
                                return Err(violation(line, ViolationClass::Structure, format!("M wrote {x:?} outside its stage")));
                            }
                        }
                        for l in new_labels {
                            if !s.is_leaf(&l.path) {
                                return Err(violation(line, ViolationClass::Label, format!("label on non-leaf {:?}", l.path)));
                            }
                            if labels.insert(l.path, l.label).is_some() {
                                return Err(violation(line, ViolationClass::Label, format!("{:?} relabeled", l.path)));
                            }
                        }
                        if let Some(batch) = split.get(&Sup::T) {
                            t = t.apply_increase(batch).map_err(|e| valuation_violation(line, Sup::T, e))?;
                        }
                    }
                }
            }
            SessionRecord::GlobalReject { .. } => {}
            SessionRecord::Report { report } => {
                let want = recompute_report(&stages, &t, &t0, &t1).map_err(book)?;
                if want != *report {
                    return Err(violation(line, ViolationClass::Report, format!("recorded {report:?}, replay gives {want:?}")));
                }
                if !want.ok {
                    return Err(violation(line, ViolationClass::Report, "branch report checks fail"));
                }
            }
        }
    }
    Ok(VerifySummary { kind: TraceKind::Session, records: records.len(), moves })
}

fn recompute_report(stages: &[StageBook], t: &Valuation, t0: &Valuation, t1: &Valuation) -> Result<BranchReport, String> {
    let chain: Vec<&StageBook> = stages.iter().filter(|s| !s.discarded).collect();
    let omega_prefix = chain.last().map_or(NodeId::root(), |d| d.candidate.map_or(d.root, |(leaf, _)| leaf));
    let mut t_along: Vec<Rational> = chain.iter().map(|s| t.get_value(&s.root)).collect();
    t_along.push(t.get_value(&omega_prefix));
    let mut growth_product = Rational::one();
    let mut allowance_product = Rational::one();
    let mut labels = Vec::new();
    for s in &chain {
        if let Some((_, label)) = s.candidate {
            let th = thresholds(s.h).map_err(|e| e.to_string())?;
            growth_product *= th.big(label);
            allowance_product *= th.small(label);
            labels.push(label);
        }
    }
    let a_max_along = path_max(t0, t1, &omega_prefix);
    let ok = t_along.last().expect("nonempty") >= &growth_product
        && a_max_along <= allowance_product
        && allowance_product < universal_allowance_bound()
        && chain.iter().zip(&t_along).all(|(s, v)| *v >= s.m_scale);
    Ok(BranchReport {
        omega_prefix,
        stage_roots: chain.iter().map(|s| s.root).collect(),
        heights: chain.iter().map(|s| s.h).collect(),
        labels,
        t_along,
        a_max_along,
        growth_product,
        allowance_product,
        ok,
    })
}

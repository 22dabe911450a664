//! Adversary policies for the pair of parity-restricted supermartingales.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::game::{Assignment, GameState, Move, Sup};
use crate::rational::Rational;
use crate::strategy::SelectedPath;
use crate::tree::{NodeId, ParityRole, RaiseError, Valuation};

/// How many random proposals to try before a random adversary gives up on a move.
const RANDOM_ATTEMPTS: u32 = 32;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AdversaryKind {
    Passive,
    /// One raise of `role` to 9/8 at the spine node at depth `target`.
    CaseA { target: u32, role: ParityRole },
    /// Discredits every opening leaf, one branch per move.
    CaseB { delta: Rational },
    /// Random raises in multiples of `step`.
    Random { seed: u64, step: Rational },
    /// Left to right over the leaves, switching role by [`no_shortcut_sequence`].
    Pattern { delta: Rational },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdversaryConfig {
    #[serde(flatten)]
    pub kind: AdversaryKind,
    pub budget: usize,
}

impl AdversaryConfig {
    pub fn passive() -> Self {
        AdversaryConfig { kind: AdversaryKind::Passive, budget: 0 }
    }

    pub fn case_a(target: u32, role: ParityRole) -> Self {
        AdversaryConfig { kind: AdversaryKind::CaseA { target, role }, budget: 1 }
    }

    pub fn case_b(delta: Rational) -> Self {
        AdversaryConfig { kind: AdversaryKind::CaseB { delta }, budget: usize::MAX }
    }

    pub fn random(seed: u64, budget: usize) -> Self {
        AdversaryConfig { kind: AdversaryKind::Random { seed, step: Rational::ratio(1, 4) }, budget }
    }

    pub fn pattern(delta: Rational, budget: usize) -> Self {
        AdversaryConfig { kind: AdversaryKind::Pattern { delta }, budget }
    }
}

/// `0` when `n` has an even number of trailing zeros, `1` otherwise (`n >= 1`).
pub fn no_shortcut_sequence(n: u64) -> u8 {
    assert!(n >= 1, "sequence starts at 1");
    (n.trailing_zeros() % 2) as u8
}

/// A running adversary. Proposals are in the frame of the game passed in.
#[derive(Debug, Clone)]
pub struct Adversary {
    config: AdversaryConfig,
    made: usize,
    rng: ChaCha8Rng,
}

pub type Target = (Sup, NodeId, Rational);

impl Adversary {
    pub fn new(config: AdversaryConfig) -> Self {
        let seed = match config.kind {
            AdversaryKind::Random { seed, .. } => seed,
            _ => 0,
        };
        Adversary { config, made: 0, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn config(&self) -> &AdversaryConfig {
        &self.config
    }

    pub fn moves_made(&self) -> usize {
        self.made
    }

    /// Whether a rejected proposal should be followed by a fresh one.
    pub fn resamples(&self) -> bool {
        matches!(self.config.kind, AdversaryKind::Random { .. })
    }

    /// Marks a proposal as played.
    pub fn accepted(&mut self) {
        self.made += 1;
    }

    /// Raw raise targets for the next move, or `None` to stop.
    pub fn propose(&mut self, game: &GameState) -> Option<Vec<Target>> {
        if self.made >= self.config.budget {
            return None;
        }
        let h = game.h();
        let parity = game.root_parity();
        let path = SelectedPath::all_left(h);
        match &self.config.kind {
            AdversaryKind::Passive => None,
            AdversaryKind::CaseA { target, role } => {
                if self.made > 0 || *target == 0 || *target > h || *role == ParityRole::FullBettor {
                    return None;
                }
                Some(vec![(Sup::for_role(*role), path.spine(*target), Rational::ratio(9, 8))])
            }
            AdversaryKind::CaseB { delta } => {
                let j = 3 + 2 * self.made as u32;
                if j > h {
                    return None;
                }
                let role = ParityRole::betting_at(parity + j - 1);
                let v = Rational::one() + delta;
                let branch = path.branch(j);
                let targets = (0..=h - j)
                    .flat_map(|l| branch.descendants(l))
                    .map(|x| (Sup::for_role(role), x, v.clone()))
                    .collect();
                Some(targets)
            }
            AdversaryKind::Random { step, .. } => {
                let step = step.clone();
                let sup = if self.rng.gen_bool(0.5) { Sup::T0 } else { Sup::T1 };
                let depth = self.rng.gen_range(1..=h);
                let bits = self.rng.gen_range(0..(1u128 << depth));
                let x = NodeId::from_bits(depth, bits).expect("depth within tree");
                let k = self.rng.gen_range(1..=4u64);
                let value = game.valuation(sup).get_value(&x) + step * Rational::from_int(k);
                Some(vec![(sup, x, value)])
            }
            AdversaryKind::Pattern { delta } => {
                let k = self.made as u64 + 1;
                if k > 1u64 << h {
                    return None;
                }
                let leaf = NodeId::from_bits(h, (k - 1) as u128).expect("leaf");
                let role = pattern_role(parity, h, k);
                Some(vec![(Sup::for_role(role), leaf, Rational::one() + delta)])
            }
        }
    }
}

/// Role raised on the `k`-th leaf: bit 0 of the sequence means the role that
/// bets just above the leaves.
fn pattern_role(parity: u32, h: u32, k: u64) -> ParityRole {
    let bettor = ParityRole::betting_at(parity + h - 1);
    if no_shortcut_sequence(k) == 0 {
        bettor
    } else {
        bettor.other()
    }
}

/// Extends raw targets to a full valid batch against the given valuations.
pub fn close_targets<'a>(
    targets: &[Target],
    valuation: impl Fn(Sup) -> &'a Valuation,
) -> Result<Vec<Assignment>, RaiseError> {
    let mut by_sup: BTreeMap<Sup, Vec<(NodeId, Rational)>> = BTreeMap::new();
    for (sup, x, v) in targets {
        by_sup.entry(*sup).or_default().push((*x, v.clone()));
    }
    let mut out = Vec::new();
    for (sup, batch) in by_sup {
        for (path, value) in valuation(sup).raise_closure(&batch)? {
            out.push(Assignment { sup, path, value });
        }
    }
    Ok(out)
}

/// The adversary's next move in a finite game, or `None` when it halts.
pub fn next_move(adv: &mut Adversary, game: &GameState) -> Option<Move> {
    let mut attempts = 0;
    loop {
        let targets = adv.propose(game)?;
        match close_targets(&targets, |sup| game.valuation(sup)) {
            Ok(assignments) if !assignments.is_empty() => {
                adv.accepted();
                return Some(Move::adversary(assignments));
            }
            _ => {
                attempts += 1;
                if !adv.resamples() || attempts >= RANDOM_ATTEMPTS {
                    return None;
                }
            }
        }
    }
}

/// Outcome of the informal left-to-right raising pattern.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternRun {
    pub steps: usize,
    /// `(step, leaf)` for every leaf not yet raised whose path already exceeds 1.
    pub premature: Vec<(usize, NodeId)>,
    /// The first step whose raise could not be made valid.
    pub blocked: Option<usize>,
}

/// Raises the first `steps` leaves of a height-`h` tree to `1 + delta`,
/// left to right, alternating roles by [`no_shortcut_sequence`], with
/// minimal closure each time; records leaves discredited before their turn.
pub fn informal_left_to_right(h: u32, steps: usize, delta: &Rational) -> PatternRun {
    let mut t0 = Valuation::new(ParityRole::EvenBettor, 0, Some(h));
    let mut t1 = Valuation::new(ParityRole::OddBettor, 0, Some(h));
    let mut run = PatternRun { steps: 0, premature: Vec::new(), blocked: None };
    let one = Rational::one();
    let value = Rational::one() + delta;
    for k in 1..=steps {
        let leaf = NodeId::from_bits(h, (k - 1) as u128).expect("leaf");
        let target = match pattern_role(0, h, k as u64) {
            ParityRole::EvenBettor => &mut t0,
            _ => &mut t1,
        };
        let closure = match target.raise_closure(&[(leaf, value.clone())]) {
            Ok(c) => c,
            Err(_) => {
                run.blocked = Some(k);
                break;
            }
        };
        *target = target.apply_increase(&closure).expect("closure is valid");
        run.steps = k;
        for later in NodeId::root().descendants(h).skip(k) {
            if later.path_from_root().any(|x| t0.get_value(&x) > one || t1.get_value(&x) > one) {
                run.premature.push((k, later));
            }
        }
    }
    run
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::Verdict;
    use crate::strategy::respond;

    #[test]
    fn sequence_prefix() {
        let got: Vec<u8> = (1..=16).map(no_shortcut_sequence).collect();
        assert_eq!(got, [0, 1, 0, 0, 0, 1, 0, 1, 0, 1, 0, 0, 0, 1, 0, 0]);
    }

    #[test]
    fn passive_halts() {
        let g = GameState::new(3, 0).unwrap();
        let mut a = Adversary::new(AdversaryConfig::passive());
        assert_eq!(next_move(&mut a, &g), None);
    }

    #[test]
    fn blocked_case_a_target_halts() {
        // t0 does not bet at the root, so it cannot rise above 1 on depth 1.
        let g = GameState::new(3, 0).unwrap();
        let mut a = Adversary::new(AdversaryConfig::case_a(1, ParityRole::EvenBettor));
        assert_eq!(next_move(&mut a, &g), None);
        let mut a = Adversary::new(AdversaryConfig::case_a(1, ParityRole::OddBettor));
        assert!(next_move(&mut a, &g).is_some());
        assert_eq!(next_move(&mut a, &g), None);
    }

    #[test]
    fn case_b_discredits_every_opening_leaf() {
        let path = SelectedPath::all_left(5);
        let mut g = GameState::new(5, 0).unwrap();
        g = g.submit_move(respond(&g, &path).unwrap().unwrap()).unwrap();
        let mut a = Adversary::new(AdversaryConfig::case_b(Rational::ratio(1, 16)));
        let mut n = 0;
        while let Some(mv) = next_move(&mut a, &g) {
            g = g.submit_move(mv).unwrap();
            n += 1;
            if let Some(m) = respond(&g, &path).unwrap() {
                g = g.submit_move(m).unwrap();
            }
        }
        assert_eq!(n, 2);
        assert_eq!(g.phase(), crate::game::Phase::DoneCaseB);
        assert!(matches!(g.referee_final(), Verdict::MWins { label: crate::game::Label::Two, .. }));
    }

    #[test]
    fn random_moves_are_valid_and_reproducible() {
        let run = |seed| {
            let mut g = GameState::new(5, 1).unwrap();
            let mut a = Adversary::new(AdversaryConfig::random(seed, 20));
            let mut moves = Vec::new();
            while let Some(mv) = next_move(&mut a, &g) {
                g = g.submit_move(mv.clone()).unwrap();
                moves.push(mv);
            }
            assert!(g.t0().validate().is_empty() && g.t1().validate().is_empty());
            moves
        };
        assert_eq!(run(7), run(7));
        assert!(!run(7).is_empty());
    }

    #[test]
    fn pattern_first_leaves() {
        let g = GameState::new(3, 0).unwrap();
        let mut a = Adversary::new(AdversaryConfig::pattern(Rational::ratio(1, 8), 2));
        let first = a.propose(&g).unwrap();
        assert_eq!(first[0].0, Sup::T1);
        assert_eq!(first[0].1, "000".parse().unwrap());
        a.accepted();
        let second = a.propose(&g).unwrap();
        assert_eq!(second[0].0, Sup::T0);
        assert_eq!(second[0].1, "001".parse().unwrap());
    }
}

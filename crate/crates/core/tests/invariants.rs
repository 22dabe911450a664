use proptest::prelude::*;
use splitgame::adversary::AdversaryConfig;
use splitgame::composer::{Session, StageStatus, StepOutcome};
use splitgame::game::{GameState, LeafStatus, Mover, Sup};
use splitgame::play::play_finite;
use splitgame::rational::Rational;
use splitgame::tree::NodeId;

fn states(h: u32, cfg: &AdversaryConfig) -> Vec<GameState> {
    let run = play_finite(h, 0, cfg).unwrap();
    let mut out = vec![GameState::new(h, 0).unwrap()];
    for mv in run.state.move_log() {
        let next = out.last().unwrap().submit_move(mv.clone()).unwrap();
        out.push(next);
    }
    out
}

fn leaves(h: u32) -> Vec<NodeId> {
    NodeId::root().descendants(h).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn game_history_is_monotone(seed in any::<u64>(), h in prop::sample::select(vec![3u32, 5, 7])) {
        let history = states(h, &AdversaryConfig::random(seed, 40));
        for pair in history.windows(2) {
            let (before, after) = (&pair[0], &pair[1]);
            for sup in [Sup::T, Sup::T0, Sup::T1] {
                for x in leaves(h) {
                    prop_assert!(after.valuation(sup).get_value(&x) >= before.valuation(sup).get_value(&x));
                }
            }
            for (x, l) in before.labels() {
                prop_assert_eq!(after.labels().get(x), Some(l));
            }
            for x in leaves(h) {
                if let LeafStatus::Discredited(l) = before.leaf_status(&x) {
                    prop_assert_eq!(after.leaf_status(&x), LeafStatus::Discredited(l));
                }
            }
        }
        let log = history.last().unwrap().move_log();
        for (i, s) in history.iter().enumerate().skip(1) {
            if log.get(i).map_or(true, |mv| mv.mover == Mover::A) {
                prop_assert!(s.current_winner().is_some());
            }
        }
    }

    #[test]
    fn case_b_runs_end_with_label_two(k in 4u32..=10, h in prop::sample::select(vec![5u32, 7, 9])) {
        let run = play_finite(h, 0, &AdversaryConfig::case_b(Rational::inv_pow2(k))).unwrap();
        let (leaf, label) = run.state.current_winner().unwrap();
        prop_assert_eq!(label.index(), 2);
        prop_assert!(leaf.bit(0) == 1);
    }

    #[test]
    fn discarded_stages_stay_frozen(seed in any::<u64>()) {
        let mut s = Session::new(3, AdversaryConfig::random(seed, 60), 4).unwrap();
        let mut frozen: Vec<(usize, usize)> = Vec::new();
        for _ in 0..60 {
            if matches!(s.step().unwrap(), StepOutcome::Halted) {
                break;
            }
            for &(i, moves) in &frozen {
                prop_assert_eq!(s.stages()[i].game.move_log().len(), moves);
                prop_assert_eq!(s.stages()[i].status, StageStatus::Discarded);
            }
            for st in s.stages() {
                if st.status == StageStatus::Discarded && !frozen.iter().any(|&(i, _)| i == st.index) {
                    frozen.push((st.index, st.game.move_log().len()));
                }
            }
        }
        let report = s.branch_report();
        prop_assert!(report.ok);
    }
}

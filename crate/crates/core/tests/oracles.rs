mod common;

use common::{and_or_no_shortcut, product_upper_bound, r};
use splitgame::adversary::{informal_left_to_right, no_shortcut_sequence};
use splitgame::composer::universal_allowance_bound;
use splitgame::rational::Rational;

#[test]
fn and_or_oracle_matches_closed_form() {
    let oracle = and_or_no_shortcut(6);
    let closed: Vec<u8> = (1..=64).map(no_shortcut_sequence).collect();
    assert_eq!(&oracle[..4], &[0, 1, 0, 0]);
    assert_eq!(oracle, closed);
    assert_eq!(no_shortcut_sequence(32), 1);
}

#[test]
fn partial_products_stay_below_guard() {
    let bound = universal_allowance_bound();
    for k in [20, 24, 32] {
        assert!(product_upper_bound(k) < bound, "K = {k}");
    }
    // The guard is tight to four decimals: the partial product alone passes 2.3842.
    let p20: Rational = (1..=20).map(|k| Rational::one() + Rational::inv_pow2(k)).product();
    assert!(p20 > r("23842/10000"));
}

#[test]
fn informal_pattern_discredits_nothing_early() {
    let h = 7;
    let run = informal_left_to_right(h, 1 << (h - 2), &r("1/1024"));
    assert_eq!(run.blocked, None);
    assert_eq!(run.steps, 32);
    assert!(run.premature.is_empty(), "{:?}", &run.premature[..run.premature.len().min(5)]);
}

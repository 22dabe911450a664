#![allow(dead_code)]

use splitgame::rational::Rational;

/// Shortcut-avoiding assignment on an alternating AND/OR tree of the given
/// height whose leaf parents are AND nodes. Leaves are filled left to right;
/// each leaf takes a value under which no node that still has unfilled
/// leaves gets its value fixed. Bit 0 stands for leaf value `true`.
pub fn and_or_no_shortcut(height: u32) -> Vec<u8> {
    let n = 1usize << height;
    let mut leaves: Vec<Option<bool>> = vec![None; n];
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let mut chosen = None;
        for bit in [0u8, 1] {
            leaves[k] = Some(bit == 0);
            if !premature(&leaves, height, 0, 0, n) {
                chosen = Some(bit);
                break;
            }
        }
        let bit = chosen.unwrap_or(0);
        leaves[k] = Some(bit == 0);
        out.push(bit);
    }
    out
}

/// Node at `depth` covering leaves `lo..hi`: AND when `height - depth` is odd.
fn eval(leaves: &[Option<bool>], height: u32, depth: u32, lo: usize, hi: usize) -> Option<bool> {
    if hi - lo == 1 {
        return leaves[lo];
    }
    let mid = (lo + hi) / 2;
    let a = eval(leaves, height, depth + 1, lo, mid);
    let b = eval(leaves, height, depth + 1, mid, hi);
    let is_and = (height - depth) % 2 == 1;
    match (is_and, a, b) {
        (true, Some(false), _) | (true, _, Some(false)) => Some(false),
        (true, Some(true), Some(true)) => Some(true),
        (false, Some(true), _) | (false, _, Some(true)) => Some(true),
        (false, Some(false), Some(false)) => Some(false),
        _ => None,
    }
}

fn premature(leaves: &[Option<bool>], height: u32, depth: u32, lo: usize, hi: usize) -> bool {
    if hi - lo == 1 {
        return false;
    }
    let open = leaves[lo..hi].iter().any(Option::is_none);
    if open && eval(leaves, height, depth, lo, hi).is_some() {
        return true;
    }
    let mid = (lo + hi) / 2;
    premature(leaves, height, depth + 1, lo, mid) || premature(leaves, height, depth + 1, mid, hi)
}

/// `prod_{k=1..K} (1 + 2^-k) * (1 + 2^(1-K))`, an upper bound on the
/// infinite product because the tail is at most `exp(2^-K) <= 1 + 2^(1-K)`.
pub fn product_upper_bound(k_max: u32) -> Rational {
    let partial: Rational = (1..=k_max).map(|k| Rational::one() + Rational::inv_pow2(k)).product();
    partial * (Rational::one() + Rational::inv_pow2(k_max - 1))
}

pub fn r(s: &str) -> Rational {
    s.parse().unwrap()
}

pub mod mutate {
    use serde_json::{json, Value};
    use splitgame::rational::Rational;
    use std::collections::HashMap;

    pub fn is_move(v: &Value, mover: &str) -> bool {
        matches!(v["kind"].as_str(), Some("move") | Some("global-move")) && v["mover"] == mover
    }

    /// Halves a value that an earlier move already set to something positive.
    pub fn lower_value(lines: &mut [Value]) -> bool {
        let mut seen: HashMap<(String, String), Rational> = HashMap::new();
        for v in lines.iter_mut() {
            if !(is_move(v, "M") || is_move(v, "A")) {
                continue;
            }
            for a in v["assignments"].as_array_mut().unwrap() {
                let key = (a["valuation"].as_str().unwrap().to_string(), a["path"].as_str().unwrap().to_string());
                if let Some(prev) = seen.get(&key) {
                    if !prev.is_zero() {
                        a["value"] = json!(prev.half().to_string());
                        return true;
                    }
                }
                seen.insert(key, a["value"].as_str().unwrap().parse().unwrap());
            }
        }
        false
    }

    /// Raises one child of the root for the role that does not bet there.
    pub fn mismatch_siblings(lines: &mut [Value]) -> bool {
        let Some(v) = lines.iter_mut().find(|v| is_move(v, "A")) else {
            return false;
        };
        v["assignments"].as_array_mut().unwrap().push(json!({"valuation": "t0", "path": "0", "value": "1001/1000"}));
        true
    }

    /// Repeats the first label in M's last move.
    pub fn relabel(lines: &mut [Value]) -> bool {
        let Some(first) = lines.iter().find(|v| is_move(v, "M")).map(|v| v["labels"][0].clone()) else {
            return false;
        };
        let last = lines.iter_mut().rev().find(|v| is_move(v, "M")).unwrap();
        last["labels"].as_array_mut().unwrap().push(first);
        true
    }
}

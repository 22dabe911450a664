//! Exact-arithmetic simulation of a game between a supermartingale and a
//! pair of parity-restricted supermartingales on binary trees.

pub mod adversary;
pub mod composer;
pub mod decomposition;
pub mod game;
pub mod play;
pub mod rational;
pub mod strategy;
pub mod trace;
pub mod tree;

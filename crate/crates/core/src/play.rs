//! Drives a single finite game between M's strategy and an adversary.

use thiserror::Error;

use crate::adversary::{next_move, Adversary, AdversaryConfig};
use crate::game::{GameError, GameState, Verdict};
use crate::strategy::{respond, SelectedPath, StrategyError};
use crate::trace::FiniteRecord;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlayError {
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Strategy(#[from] StrategyError),
    #[error("engine bug: {0}")]
    EngineBug(String),
}

#[derive(Debug, Clone)]
pub struct FiniteRun {
    pub state: GameState,
    pub verdict: Verdict,
    pub records: Vec<FiniteRecord>,
    pub adversary_moves: usize,
}

pub fn play_finite(h: u32, root_parity: u32, config: &AdversaryConfig) -> Result<FiniteRun, PlayError> {
    let path = SelectedPath::all_left(h);
    let mut state = GameState::new(h, root_parity)?;
    let mut records = vec![FiniteRecord::Start { h, root_parity: state.root_parity(), adversary: Some(config.clone()) }];
    let mut adversary = Adversary::new(config.clone());

    let m_turn = |state: &mut GameState, records: &mut Vec<FiniteRecord>| -> Result<(), PlayError> {
        if let Some(mv) = respond(state, &path)? {
            *state = state.submit_move(mv.clone())?;
            records.push(FiniteRecord::Move { index: state.move_log().len() - 1, mv });
        }
        if state.current_winner().is_none() {
            return Err(PlayError::EngineBug(format!("no winning leaf after M's move {}", state.move_log().len())));
        }
        Ok(())
    };

    m_turn(&mut state, &mut records)?;
    let mut adversary_moves = 0;
    while let Some(mv) = next_move(&mut adversary, &state) {
        state = state
            .submit_move(mv.clone())
            .map_err(|e| PlayError::EngineBug(format!("adversary produced an invalid move: {e}")))?;
        records.push(FiniteRecord::Move { index: state.move_log().len() - 1, mv });
        adversary_moves += 1;
        m_turn(&mut state, &mut records)?;
    }
    for (leaf, status) in state.statuses() {
        records.push(FiniteRecord::status(leaf, status));
    }
    let verdict = state.referee_final();
    records.push(FiniteRecord::verdict(&verdict));
    Ok(FiniteRun { state, verdict, records, adversary_moves })
}

//! Two-player zero-sum perfect-information games behind one step/encode
//! interface.
//!
//! Every game alternates movers strictly: Othello models a forced pass as an
//! ordinary ply with a dedicated pass action, so `to_move` flips on every
//! step. Rewards and outcomes are always in the frame of the player who just
//! moved.

mod countup;
mod hex;
mod othello;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Player = u8;

/// Board cell contents: `EMPTY` or `player + 1`.
pub(crate) const EMPTY: u8 = 0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GameSpec {
    CountUp { target: u32, max_increment: u32 },
    Hex { side: usize },
    Othello { side: usize },
}

impl GameSpec {
    pub fn countup(target: u32, max_increment: u32) -> Self {
        GameSpec::CountUp { target, max_increment }
    }

    pub fn hex(side: usize) -> Self {
        GameSpec::Hex { side }
    }

    pub fn othello(side: usize) -> Self {
        GameSpec::Othello { side }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            GameSpec::CountUp { target, max_increment } => {
                if target == 0 || max_increment == 0 {
                    return Err(Error::InvalidSpec(format!(
                        "count-up needs positive target and max increment (got {target}, {max_increment})"
                    )));
                }
            }
            GameSpec::Hex { side } => {
                if !(2..=8).contains(&side) {
                    return Err(Error::InvalidSpec(format!("hex side must be in 2..=8, got {side}")));
                }
            }
            GameSpec::Othello { side } => {
                if !(4..=8).contains(&side) || side % 2 != 0 {
                    return Err(Error::InvalidSpec(format!(
                        "othello side must be even and in 4..=8, got {side}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &'static str {
        match self {
            GameSpec::CountUp { .. } => "countup",
            GameSpec::Hex { .. } => "hex",
            GameSpec::Othello { .. } => "othello",
        }
    }

    pub fn num_actions(&self) -> usize {
        match *self {
            GameSpec::CountUp { max_increment, .. } => max_increment as usize,
            GameSpec::Hex { side } => side * side,
            GameSpec::Othello { side } => side * side + 1,
        }
    }

    pub fn feature_len(&self) -> usize {
        match *self {
            GameSpec::CountUp { target, .. } => target as usize + 1,
            GameSpec::Hex { side } | GameSpec::Othello { side } => 3 * side * side,
        }
    }

    /// Upper bound on the number of plies in any game.
    pub fn max_plies(&self) -> usize {
        match *self {
            GameSpec::CountUp { target, .. } => target as usize,
            GameSpec::Hex { side } => side * side,
            GameSpec::Othello { side } => 3 * side * side,
        }
    }

    /// Human-readable label for an action index.
    pub fn action_label(&self, action: usize) -> String {
        match *self {
            GameSpec::CountUp { .. } => format!("+{}", action + 1),
            GameSpec::Hex { side } => cell_label(action, side),
            GameSpec::Othello { side } => {
                if action == side * side {
                    "pass".to_string()
                } else {
                    cell_label(action, side)
                }
            }
        }
    }

    /// Inverse of [`GameSpec::action_label`], case-insensitive.
    pub fn parse_action(&self, text: &str) -> Option<usize> {
        let text = text.trim().to_ascii_lowercase();
        match *self {
            GameSpec::CountUp { max_increment, .. } => {
                let n: u32 = text.trim_start_matches('+').parse().ok()?;
                (1..=max_increment).contains(&n).then(|| n as usize - 1)
            }
            GameSpec::Hex { side } => parse_cell(&text, side),
            GameSpec::Othello { side } => {
                if text == "pass" {
                    Some(side * side)
                } else {
                    parse_cell(&text, side)
                }
            }
        }
    }
}

impl fmt::Display for GameSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            GameSpec::CountUp { target, max_increment } => write!(f, "countup({target},{max_increment})"),
            GameSpec::Hex { side } => write!(f, "hex({side})"),
            GameSpec::Othello { side } => write!(f, "othello({side})"),
        }
    }
}

fn cell_label(cell: usize, side: usize) -> String {
    let col = (b'a' + (cell % side) as u8) as char;
    format!("{col}{}", cell / side + 1)
}

fn parse_cell(text: &str, side: usize) -> Option<usize> {
    let mut chars = text.chars();
    let col = chars.next()?;
    if !col.is_ascii_lowercase() {
        return None;
    }
    let col = (col as u8 - b'a') as usize;
    let row: usize = chars.as_str().parse().ok()?;
    (col < side && (1..=side).contains(&row)).then(|| (row - 1) * side + col)
}

/// Boolean legality vector with a matching sparse index list.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LegalMask {
    bits: Vec<bool>,
    legal: Vec<usize>,
}

impl LegalMask {
    pub fn from_bits(bits: Vec<bool>) -> Self {
        let legal = bits.iter().enumerate().filter_map(|(a, &b)| b.then_some(a)).collect();
        LegalMask { bits, legal }
    }

    pub fn from_indices(num_actions: usize, indices: &[usize]) -> Result<Self> {
        let mut bits = vec![false; num_actions];
        for &a in indices {
            if a >= num_actions {
                return Err(Error::ShapeMismatch {
                    expected: num_actions,
                    got: a + 1,
                });
            }
            bits[a] = true;
        }
        Ok(Self::from_bits(bits))
    }

    pub fn all(num_actions: usize) -> Self {
        Self::from_bits(vec![true; num_actions])
    }

    /// Size of the full action space.
    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn count(&self) -> usize {
        self.legal.len()
    }

    pub fn is_legal(&self, action: usize) -> bool {
        self.bits.get(action).copied().unwrap_or(false)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn legal(&self) -> &[usize] {
        &self.legal
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub(crate) enum Position {
    Counter(u32),
    Board(Vec<u8>),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GameState {
    spec: GameSpec,
    position: Position,
    to_move: Player,
    terminal: bool,
    outcome: Option<i8>,
    ply: u32,
}

/// Canonical per-state key used for tabular lookup.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct StateKey(pub u128);

/// Features plus key: everything an approximator needs to score a state.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub key: StateKey,
    pub features: Vec<f64>,
}

impl GameState {
    pub fn spec(&self) -> GameSpec {
        self.spec
    }

    pub fn to_move(&self) -> Player {
        self.to_move
    }

    pub fn is_terminal(&self) -> bool {
        self.terminal
    }

    /// Final result from the perspective of the player who made the last move.
    pub fn outcome(&self) -> Option<i8> {
        self.outcome
    }

    /// Final result from `player`'s perspective.
    pub fn outcome_for(&self, player: Player) -> Option<i8> {
        // The last mover is the opponent of `to_move` under strict alternation.
        self.outcome.map(|o| if player == self.to_move { -o } else { o })
    }

    pub fn ply(&self) -> u32 {
        self.ply
    }

    /// Count-up counter value; `None` for board games.
    pub fn counter(&self) -> Option<u32> {
        match self.position {
            Position::Counter(c) => Some(c),
            Position::Board(_) => None,
        }
    }

    /// Board cells (`0` empty, `p + 1` for player `p`); `None` for count-up.
    pub fn cells(&self) -> Option<&[u8]> {
        match &self.position {
            Position::Board(b) => Some(b),
            Position::Counter(_) => None,
        }
    }

    pub fn observe(&self) -> Observation {
        Observation {
            key: state_key(self),
            features: encode(self),
        }
    }
}

pub fn reset(spec: GameSpec) -> Result<GameState> {
    spec.validate()?;
    let position = match spec {
        GameSpec::CountUp { .. } => Position::Counter(0),
        GameSpec::Hex { side } => Position::Board(vec![EMPTY; side * side]),
        GameSpec::Othello { side } => Position::Board(othello::initial_board(side)),
    };
    Ok(GameState {
        spec,
        position,
        to_move: 0,
        terminal: false,
        outcome: None,
        ply: 0,
    })
}

/// Applies `action`, returning the successor and the mover-frame reward.
pub fn step(state: &GameState, action: usize) -> Result<(GameState, f64)> {
    if state.terminal {
        return Err(Error::TerminalState);
    }
    let mask = legal_actions(state)?;
    if !mask.is_legal(action) {
        return Err(Error::IllegalAction {
            state: describe(state),
            action,
        });
    }
    let mover = state.to_move;
    let (position, outcome) = match (&state.spec, &state.position) {
        (&GameSpec::CountUp { target, .. }, &Position::Counter(c)) => countup::apply(c, action, target),
        (&GameSpec::Hex { side }, Position::Board(b)) => hex::apply(b, side, mover, action),
        (&GameSpec::Othello { side }, Position::Board(b)) => othello::apply(b, side, mover, action),
        _ => unreachable!("position variant always matches the spec"),
    };
    let next = GameState {
        spec: state.spec,
        position,
        to_move: 1 - mover,
        terminal: outcome.is_some(),
        outcome,
        ply: state.ply + 1,
    };
    let reward = outcome.map_or(0.0, f64::from);
    Ok((next, reward))
}

pub fn legal_actions(state: &GameState) -> Result<LegalMask> {
    if state.terminal {
        return Err(Error::TerminalState);
    }
    let bits = match (&state.spec, &state.position) {
        (&GameSpec::CountUp { max_increment, .. }, Position::Counter(_)) => {
            vec![true; max_increment as usize]
        }
        (&GameSpec::Hex { .. }, Position::Board(b)) => b.iter().map(|&c| c == EMPTY).collect(),
        (&GameSpec::Othello { side }, Position::Board(b)) => othello::legal_bits(b, side, state.to_move),
        _ => unreachable!("position variant always matches the spec"),
    };
    Ok(LegalMask::from_bits(bits))
}

/// Fixed-length feature vector.
///
/// Count-up: one-hot counter over `0..target` followed by a to-move bit.
/// Boards: player-0 stone plane, player-1 stone plane, then a plane that is 1
/// when player 0 is to move.
pub fn encode(state: &GameState) -> Vec<f64> {
    let mut out = vec![0.0; state.spec.feature_len()];
    match &state.position {
        Position::Counter(c) => {
            let target = out.len() - 1;
            if (*c as usize) < target {
                out[*c as usize] = 1.0;
            }
            out[target] = if state.to_move == 0 { 1.0 } else { 0.0 };
        }
        Position::Board(b) => {
            let n = b.len();
            for (i, &c) in b.iter().enumerate() {
                if c != EMPTY {
                    out[(c as usize - 1) * n + i] = 1.0;
                }
            }
            if state.to_move == 0 {
                out[2 * n..].iter_mut().for_each(|x| *x = 1.0);
            }
        }
    }
    out
}

/// Count-up is impartial: the counter alone fixes the mover-frame state, so
/// its key ignores `to_move`. Board keys are base-3 cell digits with the
/// player to move appended.
pub fn state_key(state: &GameState) -> StateKey {
    match &state.position {
        Position::Counter(c) => StateKey(u128::from(*c)),
        Position::Board(b) => {
            let digits = b.iter().fold(0u128, |acc, &c| acc * 3 + u128::from(c));
            StateKey(digits * 2 + u128::from(state.to_move))
        }
    }
}

pub fn render(state: &GameState) -> String {
    let body = match (&state.spec, &state.position) {
        (&GameSpec::CountUp { target, .. }, &Position::Counter(c)) => {
            format!("counter: {c} / {target}\n")
        }
        (&GameSpec::Hex { side }, Position::Board(b)) => hex::render(b, side),
        (&GameSpec::Othello { side }, Position::Board(b)) => othello::render(b, side),
        _ => unreachable!("position variant always matches the spec"),
    };
    let status = match state.outcome {
        None => format!("player {} to move", state.to_move),
        Some(o) => {
            let last = 1 - state.to_move;
            match o {
                1 => format!("player {last} wins"),
                -1 => format!("player {} wins", state.to_move),
                _ => "draw".to_string(),
            }
        }
    };
    format!("{body}{status}\n")
}

fn describe(state: &GameState) -> String {
    match &state.position {
        Position::Counter(c) => format!("{} counter={c} to_move={}", state.spec, state.to_move),
        Position::Board(b) => format!("{} cells={b:?} to_move={}", state.spec, state.to_move),
    }
}

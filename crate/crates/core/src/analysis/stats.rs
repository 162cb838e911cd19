use serde::{Deserialize, Serialize};

use super::arena::Agent;
use crate::error::{Error, Result};
use crate::games::{self, GameSpec};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LegalActionStats {
    pub mean: f64,
    pub max: usize,
    pub states: u64,
}

/// Legal-action counts over every non-terminal state visited in `games`
/// self-play games of `agent`.
pub fn legal_action_stats(spec: GameSpec, games: usize, seed: u64, agent: &dyn Agent) -> Result<LegalActionStats> {
    if games == 0 {
        return Err(Error::OutOfRange {
            name: "games",
            value: 0.0,
        });
    }
    let mut total = 0u64;
    let mut states = 0u64;
    let mut max = 0;
    for g in 0..games as u64 {
        let mut rng = rng::stream(seed, &[g]);
        let mut state = games::reset(spec)?;
        while !state.is_terminal() {
            let n = games::legal_actions(&state)?.count();
            total += n as u64;
            states += 1;
            max = max.max(n);
            let a = agent.act(&state, &mut rng)?;
            state = games::step(&state, a)?.0;
        }
    }
    Ok(LegalActionStats {
        mean: total as f64 / states as f64,
        max,
        states,
    })
}

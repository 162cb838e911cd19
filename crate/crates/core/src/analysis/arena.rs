//! Agents and the alternating-color match harness.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::countup::{solve_countup_optimal, CountUpSolution};
use crate::approx::Parameters;
use crate::error::{Error, Result};
use crate::games::{self, GameSpec, GameState};
use crate::regopt::RegWeights;
use crate::rng::{self, Rng};
use crate::search::{greedy_action, search, SearchConfig};
use crate::selfplay::acting_policy;

pub trait Agent: Send + Sync {
    fn name(&self) -> String;
    fn act(&self, state: &GameState, rng: &mut Rng) -> Result<usize>;
}

/// Argmax of the policy head.
#[derive(Clone, Debug)]
pub struct GreedyAgent {
    pub params: Parameters,
}

impl GreedyAgent {
    pub fn new(params: Parameters) -> Self {
        GreedyAgent { params }
    }
}

impl Agent for GreedyAgent {
    fn name(&self) -> String {
        "greedy".into()
    }

    fn act(&self, state: &GameState, _rng: &mut Rng) -> Result<usize> {
        greedy_action(&self.params, state)
    }
}

/// PUCT search; zero simulations falls back to the greedy policy head.
#[derive(Clone, Debug)]
pub struct SearchAgent {
    pub params: Parameters,
    pub weights: RegWeights,
    pub config: SearchConfig,
}

impl Agent for SearchAgent {
    fn name(&self) -> String {
        format!("search({})", self.config.simulations)
    }

    fn act(&self, state: &GameState, _rng: &mut Rng) -> Result<usize> {
        Ok(search(state, &self.params, self.weights, self.config)?.action)
    }
}

/// Samples from the improved policy, as during self-play.
#[derive(Clone, Debug)]
pub struct PolicySamplingAgent {
    pub params: Parameters,
    pub weights: RegWeights,
}

impl Agent for PolicySamplingAgent {
    fn name(&self) -> String {
        "sampling".into()
    }

    fn act(&self, state: &GameState, rng: &mut Rng) -> Result<usize> {
        let mask = games::legal_actions(state)?;
        let acting = acting_policy(&self.params, &state.observe(), &mask, self.weights)?;
        Ok(acting.improved.sample_with(rng.gen()))
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct RandomAgent;

impl Agent for RandomAgent {
    fn name(&self) -> String {
        "random".into()
    }

    fn act(&self, state: &GameState, rng: &mut Rng) -> Result<usize> {
        let mask = games::legal_actions(state)?;
        let legal = mask.legal();
        Ok(legal[rng.gen_range(0..legal.len())])
    }
}

/// Plays the lowest-index minimax-optimal increment.
#[derive(Clone, Debug)]
pub struct OptimalCountUpAgent {
    solution: CountUpSolution,
}

impl OptimalCountUpAgent {
    pub fn new(spec: GameSpec) -> Result<Self> {
        match spec {
            GameSpec::CountUp { target, max_increment } => Ok(OptimalCountUpAgent {
                solution: solve_countup_optimal(target, max_increment)?,
            }),
            other => Err(Error::InvalidSpec(format!(
                "optimal agent only exists for count-up, not {other}"
            ))),
        }
    }
}

impl Agent for OptimalCountUpAgent {
    fn name(&self) -> String {
        "optimal-countup".into()
    }

    fn act(&self, state: &GameState, _rng: &mut Rng) -> Result<usize> {
        let c = state
            .counter()
            .ok_or_else(|| Error::InvalidSpec(format!("{} is not count-up", state.spec())))?;
        if state.spec() != GameSpec::countup(self.solution.target, self.solution.max_increment) {
            return Err(Error::InvalidSpec(format!(
                "agent solved countup({},{}), asked to play {}",
                self.solution.target,
                self.solution.max_increment,
                state.spec()
            )));
        }
        Ok(self.solution.best_action(c))
    }
}

/// Result of one game from the first agent's point of view.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameRecord {
    pub seed: u64,
    /// Player index the first agent played as.
    pub seat: u8,
    pub outcome: i8,
    pub plies: u32,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub wins: u32,
    pub losses: u32,
    pub draws: u32,
    pub games: Vec<GameRecord>,
}

impl MatchResult {
    pub fn played(&self) -> u32 {
        self.wins + self.losses + self.draws
    }

    /// Draws count as half a win.
    pub fn win_rate(&self) -> f64 {
        if self.played() == 0 {
            return 0.0;
        }
        (f64::from(self.wins) + 0.5 * f64::from(self.draws)) / f64::from(self.played())
    }

    pub fn seeds(&self) -> Vec<u64> {
        self.games.iter().map(|g| g.seed).collect()
    }
}

/// Plays one game; `agents[p]` moves for player `p`. Returns the outcome
/// for player 0 and the ply count.
pub fn play_game(agents: [&dyn Agent; 2], spec: GameSpec, seed: u64) -> Result<(i8, u32)> {
    let mut state = games::reset(spec)?;
    let mut rngs = [rng::stream(seed, &[0]), rng::stream(seed, &[1])];
    let mut transcript = Vec::new();
    while !state.is_terminal() {
        let p = state.to_move() as usize;
        let action = agents[p].act(&state, &mut rngs[p])?;
        transcript.push(action);
        if !games::legal_actions(&state)?.is_legal(action) {
            return Err(Error::IllegalAgentMove {
                agent: agents[p].name(),
                action,
                transcript,
            });
        }
        state = games::step(&state, action)?.0;
    }
    Ok((state.outcome_for(0).unwrap_or(0), state.ply()))
}

/// `a` moves first in even-numbered games and second in odd ones. Game `i`
/// uses seed `derive_seed(seed, [i])`; games run in parallel and are
/// tallied in index order.
pub fn play_match(a: &dyn Agent, b: &dyn Agent, spec: GameSpec, games: usize, seed: u64) -> Result<MatchResult> {
    if games == 0 {
        return Err(Error::OutOfRange {
            name: "games",
            value: 0.0,
        });
    }
    let records: Vec<GameRecord> = (0..games as u64)
        .into_par_iter()
        .map(|i| {
            let game_seed = rng::derive_seed(seed, &[i]);
            let seat = (i % 2) as u8;
            let seats: [&dyn Agent; 2] = if seat == 0 { [a, b] } else { [b, a] };
            let (o, plies) = play_game(seats, spec, game_seed)?;
            Ok(GameRecord {
                seed: game_seed,
                seat,
                outcome: if seat == 0 { o } else { -o },
                plies,
            })
        })
        .collect::<Result<_>>()?;
    let mut result = MatchResult::default();
    for r in &records {
        match r.outcome.signum() {
            1 => result.wins += 1,
            -1 => result.losses += 1,
            _ => result.draws += 1,
        }
    }
    result.games = records;
    Ok(result)
}

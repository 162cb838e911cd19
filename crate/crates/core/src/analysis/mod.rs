//! Exact solvers, match play, and measurement tools.

mod arena;
mod bias_variance;
mod countup;
mod elo;
mod stats;

pub use arena::{
    play_game, play_match, Agent, GameRecord, GreedyAgent, MatchResult, OptimalCountUpAgent, PolicySamplingAgent,
    RandomAgent, SearchAgent,
};
pub use bias_variance::{bias_variance, BiasVarianceConfig, BiasVarianceReport, BiasVarianceRow};
pub use countup::{solve_countup_optimal, solve_countup_qre, CountUpSolution, QrePolicy};
pub use elo::elo_from_winrate;
pub use stats::{legal_action_stats, LegalActionStats};

use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;

#[derive(Parser)]
#[command(
    name = "klent",
    version,
    about = "Regularized self-play: train, evaluate, play, and measure"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Config sources for a run, lowest precedence first: the file, then
/// `--set` pairs, then the named flags.
#[derive(Args, Clone, Debug, Default)]
pub struct RunArgs {
    /// Flat `key = value` config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Any config key, e.g. `--set hidden=64,64`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// countup | hex | othello
    #[arg(long)]
    pub game: Option<String>,
    /// klent | kl-only | ent-only | one-step | monte-carlo
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub backend: Option<String>,
    #[arg(long)]
    pub budget: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Output directory; defaults to $KLENT_OUT, then `runs/default`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Train to the simulator budget, writing config, metrics, and checkpoints.
    Train(RunArgs),
    /// Play a checkpoint against another checkpoint, `random`, or `optimal-countup`.
    Eval {
        checkpoint: PathBuf,
        opponent: String,
        #[arg(long, default_value_t = 100)]
        games: usize,
        /// Search simulations per move; 0 plays the greedy policy head.
        #[arg(long, default_value_t = 0)]
        simulations: u32,
        #[arg(long, default_value_t = klent::search::DEFAULT_C_PUCT)]
        c_puct: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Rating of the opponent for the Elo estimate.
        #[arg(long, default_value_t = 1000.0)]
        anchor: f64,
    },
    /// Play against a checkpoint in the terminal.
    Play {
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 0)]
        simulations: u32,
        /// Which player you are (0 moves first).
        #[arg(long, default_value_t = 0)]
        seat: u8,
    },
    /// Print the exact count-up strategy, and the QRE with `--alpha`.
    SolveCountup {
        target: u32,
        max_increment: u32,
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Bias and variance of lambda-returns under a frozen checkpoint, as CSV.
    BiasVariance {
        checkpoint: PathBuf,
        /// Comma-separated lambda grid.
        #[arg(long, default_value = "0,0.5,0.8824969025845955,1")]
        lambdas: String,
        #[arg(long, default_value_t = 1000)]
        rollouts: usize,
        #[arg(long, default_value_t = 1000)]
        oracle_rollouts: usize,
        #[arg(long, default_value_t = 32)]
        eval_episodes: usize,
        #[arg(long, default_value_t = 3)]
        eval_plies: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train and evaluate every (alpha, beta, lambda) cell for each seed.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value = "0.03")]
        alphas: String,
        #[arg(long, default_value = "0.1")]
        betas: String,
        #[arg(long, default_value = "0.8824969025845955")]
        lambdas: String,
        /// Comma-separated seeds.
        #[arg(long, default_value = "0")]
        seeds: String,
        #[arg(long, default_value_t = 200)]
        eval_games: usize,
    },
    /// Mean and max legal-action counts over random playouts.
    LegalStats {
        #[arg(long, default_value = "hex")]
        game: String,
        /// Board side, or count-up target.
        #[arg(long)]
        size: Option<u32>,
        #[arg(long, default_value_t = 1000)]
        games: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::Train(args) => commands::train(&args, &mut out),
        Command::Eval {
            checkpoint,
            opponent,
            games,
            simulations,
            c_puct,
            seed,
            anchor,
        } => commands::eval(
            &checkpoint,
            &opponent,
            games,
            klent::search::SearchConfig { simulations, c_puct },
            seed,
            anchor,
            &mut out,
        ),
        Command::Play {
            checkpoint,
            simulations,
            seat,
        } => commands::play(&checkpoint, simulations, seat, &mut io::stdin().lock(), &mut out),
        Command::SolveCountup {
            target,
            max_increment,
            alpha,
        } => commands::solve_countup(target, max_increment, alpha, &mut out),
        Command::BiasVariance {
            checkpoint,
            lambdas,
            rollouts,
            oracle_rollouts,
            eval_episodes,
            eval_plies,
            seed,
            out: path,
        } => {
            let cfg = klent::analysis::BiasVarianceConfig {
                lambdas: commands::parse_list(&lambdas)?,
                rollouts,
                oracle_rollouts,
                eval_episodes,
                eval_plies,
                seed,
                ..Default::default()
            };
            commands::bias_variance(&checkpoint, cfg, path.as_deref(), &mut out)
        }
        Command::Sweep {
            run,
            alphas,
            betas,
            lambdas,
            seeds,
            eval_games,
        } => {
            let grid = commands::SweepGrid {
                alphas: commands::parse_list(&alphas)?,
                betas: commands::parse_list(&betas)?,
                lambdas: commands::parse_list(&lambdas)?,
                seeds: commands::parse_list(&seeds)?,
            };
            commands::sweep(&run, &grid, eval_games, &mut out)
        }
        Command::LegalStats {
            game,
            size,
            games,
            seed,
        } => commands::legal_stats(&game, size, games, seed, &mut out),
    }?;
    out.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

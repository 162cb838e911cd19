use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs::{self, File};
use std::io::{BufRead, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use klent::analysis::{
    bias_variance as measure_bias_variance, elo_from_winrate, legal_action_stats, play_match, solve_countup_optimal,
    solve_countup_qre, Agent, BiasVarianceConfig, GreedyAgent, MatchResult, OptimalCountUpAgent, RandomAgent,
    SearchAgent,
};
use klent::approx::{Checkpoint, Parameters};
use klent::config::{parse_pairs, RunConfig};
use klent::games::{self, GameSpec, GameState};
use klent::rng;
use klent::search::{greedy_action, SearchConfig};
use klent::selfplay::Trainer;

use crate::RunArgs;

pub fn parse_list<T: FromStr>(text: &str) -> Result<Vec<T>>
where
    T::Err: Display,
{
    let items = text
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|e| anyhow::anyhow!("bad list item '{s}': {e}")))
        .collect::<Result<Vec<T>>>()?;
    if items.is_empty() {
        bail!("empty list '{text}'");
    }
    Ok(items)
}

/// Raw config pairs from the file, `--set`, and the named flags, in that order.
fn pairs(args: &RunArgs) -> Result<BTreeMap<String, String>> {
    let mut map = match &args.config {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            parse_pairs(&text)?
        }
        None => BTreeMap::new(),
    };
    for kv in &args.set {
        let (k, v) = kv
            .split_once('=')
            .with_context(|| format!("--set expects KEY=VALUE, got '{kv}'"))?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    let named = [
        ("game", args.game.clone()),
        ("preset", args.preset.clone()),
        ("backend", args.backend.clone()),
        ("budget", args.budget.map(|v| v.to_string())),
        ("seed", args.seed.map(|v| v.to_string())),
        ("alpha", args.alpha.map(|v| format!("{v:?}"))),
        ("beta", args.beta.map(|v| format!("{v:?}"))),
        ("lambda", args.lambda.map(|v| format!("{v:?}"))),
        ("out_dir", args.out.as_ref().map(|p| p.display().to_string())),
    ];
    for (k, v) in named {
        if let Some(v) = v {
            map.insert(k.to_string(), v);
        }
    }
    Ok(map)
}

fn checkpoint_of(trainer: &Trainer, hash: u64) -> Checkpoint {
    let cfg = trainer.config();
    Checkpoint {
        game: cfg.game,
        hp: cfg.hp,
        params: trainer.params().clone(),
        optimizer: trainer.optimizer().clone(),
        iteration: trainer.iteration(),
        sim_evals: trainer.sim_evals(),
        config_hash: hash,
    }
}

/// Count-up position with counter `c`; the game is impartial, so the mover
/// does not matter.
fn countup_state(spec: GameSpec, c: u32) -> Result<GameState> {
    let mut s = games::reset(spec)?;
    for _ in 0..c {
        s = games::step(&s, 0)?.0;
    }
    Ok(s)
}

pub fn train(args: &RunArgs, out: &mut impl Write) -> Result<()> {
    let run = RunConfig::resolve(&pairs(args)?)?;
    let dir = &run.out_dir;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    fs::write(dir.join("config.txt"), run.to_text())?;
    let metrics_path = run.metrics_path();
    if let Some(parent) = metrics_path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut metrics =
        BufWriter::new(File::create(&metrics_path).with_context(|| format!("creating {}", metrics_path.display()))?);
    let hash = run.hash();
    let mut trainer = Trainer::new(run.train.clone())?;
    let mut last_eval = None;
    while !trainer.finished() {
        let m = trainer.iterate()?;
        writeln!(metrics, "{}", m.to_json_line())?;
        if !m.mean_loss.is_finite() {
            metrics.flush()?;
            bail!("non-finite loss at iteration {}", m.iteration);
        }
        if m.eval_win_rate.is_some() {
            last_eval = m.eval_win_rate;
        }
        if run.checkpoint_every > 0 && trainer.iteration() % run.checkpoint_every == 0 {
            let path = dir.join(format!("checkpoint-{:06}.bin", trainer.iteration()));
            checkpoint_of(&trainer, hash).save(&path)?;
        }
    }
    metrics.flush()?;
    let final_path = dir.join("final.bin");
    checkpoint_of(&trainer, hash).save(&final_path)?;

    let cfg = trainer.config();
    writeln!(
        out,
        "trained {} ({}) for {} iterations: {} / {} simulator evaluations",
        cfg.game,
        run.preset.name(),
        trainer.iteration(),
        trainer.sim_evals(),
        cfg.budget
    )?;
    match last_eval {
        Some(w) => writeln!(out, "last eval win rate vs random: {w:.4}")?,
        None => writeln!(out, "last eval win rate vs random: none")?,
    }
    if let GameSpec::CountUp { target, max_increment } = cfg.game {
        let sol = solve_countup_optimal(target, max_increment)?;
        let mut matches = 0;
        for c in (0..target).rev() {
            let a = greedy_action(trainer.params(), &countup_state(cfg.game, c)?)?;
            let tag = if !sol.is_winning(c) {
                "losing state"
            } else if sol.optimal[c as usize].contains(&a) {
                matches += 1;
                "optimal"
            } else {
                "NOT optimal"
            };
            writeln!(out, "  state {c}: greedy {} ({tag})", cfg.game.action_label(a))?;
        }
        let winning = (0..target).filter(|&c| sol.is_winning(c)).count();
        writeln!(out, "greedy policy optimal in {matches}/{winning} winning states")?;
    }
    writeln!(
        out,
        "wrote {}, {}, {}",
        dir.join("config.txt").display(),
        metrics_path.display(),
        final_path.display()
    )?;
    Ok(())
}

fn load(path: &Path) -> Result<Checkpoint> {
    Checkpoint::load(path).with_context(|| format!("loading checkpoint {}", path.display()))
}

fn search_agent(ck: Checkpoint, config: SearchConfig) -> Result<SearchAgent> {
    Ok(SearchAgent {
        weights: ck.hp.weights()?,
        params: ck.params,
        config,
    })
}

fn seat_line(r: &MatchResult, seat: u8) -> String {
    let (mut w, mut d, mut l) = (0, 0, 0);
    for g in r.games.iter().filter(|g| g.seat == seat) {
        match g.outcome.signum() {
            1 => w += 1,
            -1 => l += 1,
            _ => d += 1,
        }
    }
    format!("W {w} D {d} L {l}")
}

pub fn eval(
    checkpoint: &Path,
    opponent: &str,
    games: usize,
    config: SearchConfig,
    seed: u64,
    anchor: f64,
    out: &mut impl Write,
) -> Result<()> {
    let ck = load(checkpoint)?;
    let game = ck.game;
    let agent = search_agent(ck, config)?;
    let opp: Box<dyn Agent> = match opponent {
        "random" => Box::new(RandomAgent),
        "optimal-countup" => Box::new(OptimalCountUpAgent::new(game)?),
        path => {
            let other = load(Path::new(path))?;
            if other.game != game {
                bail!("checkpoints are for different games: {game} vs {}", other.game);
            }
            Box::new(search_agent(other, config)?)
        }
    };
    let r = play_match(&agent, opp.as_ref(), game, games, seed)?;
    writeln!(
        out,
        "{} vs {} on {game}, {} games",
        agent.name(),
        opp.name(),
        r.played()
    )?;
    writeln!(out, "wins {} draws {} losses {}", r.wins, r.draws, r.losses)?;
    writeln!(out, "  moving first:  {}", seat_line(&r, 0))?;
    writeln!(out, "  moving second: {}", seat_line(&r, 1))?;
    writeln!(out, "win rate {:.4} (draws count half)", r.win_rate())?;
    match elo_from_winrate(r.win_rate(), anchor) {
        Ok(e) => writeln!(out, "elo {e:.2} (opponent anchored at {anchor})")?,
        Err(_) => writeln!(
            out,
            "elo unbounded at win rate {} (opponent anchored at {anchor})",
            r.win_rate()
        )?,
    }
    Ok(())
}

pub fn play(
    checkpoint: &Path,
    simulations: u32,
    seat: u8,
    input: &mut impl BufRead,
    out: &mut impl Write,
) -> Result<()> {
    if seat > 1 {
        bail!("seat must be 0 or 1");
    }
    let ck = load(checkpoint)?;
    let spec = ck.game;
    let agent = search_agent(
        ck,
        SearchConfig {
            simulations,
            ..SearchConfig::default()
        },
    )?;
    let mut rng = rng::stream(0, &[]);
    let mut state = games::reset(spec)?;
    writeln!(out, "{spec}: you are player {seat}")?;
    loop {
        write!(out, "{}", games::render(&state))?;
        if state.is_terminal() {
            let line = match state.outcome_for(seat) {
                Some(1) => "you win",
                Some(-1) => "you lose",
                _ => "draw",
            };
            writeln!(out, "game over: {line}")?;
            return Ok(());
        }
        let mask = games::legal_actions(&state)?;
        if state.to_move() == seat {
            let labels: Vec<String> = mask.legal().iter().map(|&a| spec.action_label(a)).collect();
            write!(out, "your move [{}]: ", labels.join(" "))?;
            out.flush()?;
            let mut line = String::new();
            if input.read_line(&mut line)? == 0 {
                writeln!(out, "\nend of input, leaving")?;
                return Ok(());
            }
            match spec.parse_action(&line).filter(|&a| mask.is_legal(a)) {
                Some(a) => state = games::step(&state, a)?.0,
                None => writeln!(out, "illegal move '{}'; legal moves: {}", line.trim(), labels.join(" "))?,
            }
        } else {
            let a = agent.act(&state, &mut rng)?;
            writeln!(out, "agent plays {}", spec.action_label(a))?;
            state = games::step(&state, a)?.0;
        }
    }
}

pub fn solve_countup(target: u32, max_increment: u32, alpha: Option<f64>, out: &mut impl Write) -> Result<()> {
    let sol = solve_countup_optimal(target, max_increment)?;
    writeln!(out, "count-up to {target}, increments 1..={max_increment}")?;
    writeln!(out, "state  optimal strategy")?;
    for (s, text) in sol.table() {
        writeln!(out, "{s:>5}  {text}")?;
    }
    if let Some(alpha) = alpha {
        let qre = solve_countup_qre(target, max_increment, alpha)?;
        writeln!(out, "\nquantal response equilibrium, alpha = {alpha}")?;
        let mut header = String::from("state");
        for i in 1..=max_increment {
            header.push_str(&format!("   pi(+{i})"));
        }
        for i in 1..=max_increment {
            header.push_str(&format!("    Q(+{i})"));
        }
        writeln!(out, "{header}")?;
        for s in (0..target as usize).rev() {
            let mut row = format!("{s:>5}");
            for p in &qre.policy[s] {
                row.push_str(&format!(" {p:>8.4}"));
            }
            for q in &qre.q[s] {
                row.push_str(&format!(" {q:>8.4}"));
            }
            writeln!(out, "{row}")?;
        }
        writeln!(out, "fixed-point residual {:.1e}", qre.residual())?;
    }
    Ok(())
}

pub fn bias_variance(
    checkpoint: &Path,
    mut cfg: BiasVarianceConfig,
    csv_path: Option<&Path>,
    out: &mut impl Write,
) -> Result<()> {
    let ck = load(checkpoint)?;
    cfg.gamma = ck.hp.gamma;
    let report = measure_bias_variance(ck.game, &ck.params, ck.hp.weights()?, &cfg)?;
    let csv = report.to_csv();
    match csv_path {
        Some(p) => {
            fs::write(p, &csv).with_context(|| format!("writing {}", p.display()))?;
            writeln!(out, "{}", report.eval_states)?;
            writeln!(out, "wrote {} rows to {}", report.rows.len(), p.display())?;
        }
        None => write!(out, "{csv}")?,
    }
    Ok(())
}

pub struct SweepGrid {
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub seeds: Vec<u64>,
}

/// Greedy policy head vs random, alternating colors, seeded by the run seed.
/// `klent eval <final.bin> random --seed <seed>` reproduces it.
fn train_and_eval(map: &BTreeMap<String, String>, eval_games: usize) -> Result<f64> {
    let run = RunConfig::resolve(map)?;
    let mut trainer = Trainer::new(run.train.clone())?;
    while !trainer.finished() {
        trainer.iterate()?;
    }
    let seed = run.train.seed;
    let agent = GreedyAgent::new(Parameters::clone(trainer.params()));
    Ok(play_match(&agent, &RandomAgent, run.train.game, eval_games, seed)?.win_rate())
}

pub fn sweep(args: &RunArgs, grid: &SweepGrid, eval_games: usize, out: &mut impl Write) -> Result<()> {
    let base = pairs(args)?;
    writeln!(
        out,
        "{:>8} {:>8} {:>8} {:>5} {:>8} {:>8}  status",
        "alpha", "beta", "lambda", "runs", "mean", "std"
    )?;
    let mut failed = 0;
    for &alpha in &grid.alphas {
        for &beta in &grid.betas {
            for &lambda in &grid.lambdas {
                let mut rates = Vec::new();
                let mut errors = Vec::new();
                for &seed in &grid.seeds {
                    let mut map = base.clone();
                    map.insert("alpha".into(), format!("{alpha:?}"));
                    map.insert("beta".into(), format!("{beta:?}"));
                    map.insert("lambda".into(), format!("{lambda:?}"));
                    map.insert("seed".into(), seed.to_string());
                    match train_and_eval(&map, eval_games) {
                        Ok(w) => rates.push(w),
                        Err(e) => errors.push(format!("seed {seed}: {e:#}")),
                    }
                }
                let n = rates.len();
                let mean = rates.iter().sum::<f64>() / n.max(1) as f64;
                let std = if n > 1 {
                    (rates.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
                } else {
                    0.0
                };
                let status = if errors.is_empty() {
                    "ok".to_string()
                } else {
                    failed += 1;
                    format!("FAILED {}", errors.join("; "))
                };
                let (mean, std) = if n == 0 {
                    ("-".to_string(), "-".to_string())
                } else {
                    (format!("{mean:.4}"), format!("{std:.4}"))
                };
                writeln!(
                    out,
                    "{alpha:>8} {beta:>8} {lambda:>8.4} {n:>5} {mean:>8} {std:>8}  {status}"
                )?;
            }
        }
    }
    let cells = grid.alphas.len() * grid.betas.len() * grid.lambdas.len();
    writeln!(out, "{} of {cells} cells completed", cells - failed)?;
    Ok(())
}

pub fn legal_stats(game: &str, size: Option<u32>, games: usize, seed: u64, out: &mut impl Write) -> Result<()> {
    let spec = match game {
        "countup" => GameSpec::countup(size.unwrap_or(7), 2),
        "hex" => GameSpec::hex(size.unwrap_or(3) as usize),
        "othello" => GameSpec::othello(size.unwrap_or(4) as usize),
        other => bail!("unknown game '{other}'"),
    };
    spec.validate()?;
    let s = legal_action_stats(spec, games, seed, &RandomAgent)?;
    writeln!(
        out,
        "{spec}: {} states over {games} random games, legal actions mean {:.3} max {} (action space {})",
        s.states,
        s.mean,
        s.max,
        spec.num_actions()
    )?;
    Ok(())
}

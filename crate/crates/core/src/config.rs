//! Hyperparameters, ablation presets, and the flat `key = value` run config.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::approx::{AdamConfig, Backend};
use crate::error::{Error, Result};
use crate::games::GameSpec;
use crate::regopt::RegWeights;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    /// Entropy weight.
    pub alpha: f64,
    /// KL weight.
    pub beta: f64,
    /// Return mixing.
    pub lambda: f64,
    /// Discount; 1 for board games.
    pub gamma: f64,
}

impl Hyperparameters {
    pub fn weights(&self) -> Result<RegWeights> {
        RegWeights::new(self.alpha, self.beta)
    }

    pub fn validate(&self) -> Result<()> {
        self.weights()?;
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::OutOfRange {
                name: "lambda",
                value: self.lambda,
            });
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::OutOfRange {
                name: "gamma",
                value: self.gamma,
            });
        }
        Ok(())
    }
}

/// The ablation variants: full method, each regularizer alone, and the two
/// return extremes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Preset {
    Klent,
    KlOnly,
    EntOnly,
    OneStep,
    MonteCarlo,
}

pub const DEFAULT_LAMBDA: f64 = 0.882_496_902_584_595;

impl Preset {
    pub const ALL: [Preset; 5] = [
        Preset::Klent,
        Preset::KlOnly,
        Preset::EntOnly,
        Preset::OneStep,
        Preset::MonteCarlo,
    ];

    pub fn hyperparameters(self) -> Hyperparameters {
        let lambda = (-1.0f64 / 8.0).exp();
        let (alpha, beta, lambda) = match self {
            Preset::Klent => (0.03, 0.1, lambda),
            Preset::KlOnly => (0.0, 0.1, lambda),
            Preset::EntOnly => (0.03, 0.0, lambda),
            Preset::OneStep => (0.03, 0.1, 0.0),
            Preset::MonteCarlo => (0.03, 0.1, 1.0),
        };
        Hyperparameters {
            alpha,
            beta,
            lambda,
            gamma: 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::Klent => "klent",
            Preset::KlOnly => "kl-only",
            Preset::EntOnly => "ent-only",
            Preset::OneStep => "one-step",
            Preset::MonteCarlo => "monte-carlo",
        }
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown preset '{s}'")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub game: GameSpec,
    pub hp: Hyperparameters,
    pub backend: Backend,
    pub hidden: Vec<usize>,
    /// Buffer capacity in records.
    pub capacity: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub adam: AdamConfig,
    /// Simulator-evaluation budget; training stops once it is reached.
    pub budget: u64,
    /// Evaluate every this many iterations (0 disables).
    pub eval_every: u64,
    pub eval_games: usize,
    pub seed: u64,
    /// Parallel episode workers during collection.
    pub workers: usize,
    /// Guard against broken environments; 0 means the game's own bound.
    pub max_plies: usize,
    /// Record wall-clock seconds in metrics (makes them non-reproducible).
    pub timing: bool,
}

impl TrainConfig {
    /// Desk-scale defaults for `game`. Count-up uses the tabular backend with a
    /// larger step size; board games use the MLP.
    pub fn new(game: GameSpec, preset: Preset) -> Self {
        let backend = match game {
            GameSpec::CountUp { .. } => Backend::Tabular,
            _ => Backend::Mlp,
        };
        TrainConfig {
            game,
            hp: preset.hyperparameters(),
            backend,
            hidden: vec![128, 128],
            capacity: 4096,
            batch_size: 256,
            epochs: 1,
            adam: AdamConfig {
                learning_rate: default_learning_rate(backend),
                ..AdamConfig::default()
            },
            budget: 200_000,
            eval_every: 10,
            eval_games: 200,
            seed: 0,
            workers: 1,
            max_plies: 0,
            timing: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.game.validate()?;
        self.hp.validate()?;
        let sizes = [
            ("capacity", self.capacity),
            ("batch_size", self.batch_size),
            ("epochs", self.epochs),
            ("workers", self.workers),
        ];
        for (name, v) in sizes {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.budget == 0 {
            return Err(Error::Config("budget must be positive".into()));
        }
        if self.adam.learning_rate.is_nan() || self.adam.learning_rate <= 0.0 {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if self.backend == Backend::Mlp && self.hidden.contains(&0) {
            return Err(Error::Config("hidden widths must be positive".into()));
        }
        Ok(())
    }

    pub fn max_plies(&self) -> usize {
        if self.max_plies == 0 {
            self.game.max_plies()
        } else {
            self.max_plies
        }
    }
}

pub fn default_learning_rate(backend: Backend) -> f64 {
    match backend {
        Backend::Tabular => 0.02,
        Backend::Mlp => 1e-3,
    }
}

/// Everything needed to run training from the command line.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub preset: Preset,
    pub out_dir: PathBuf,
    /// Defaults to `<out_dir>/metrics.jsonl`.
    pub metrics: Option<PathBuf>,
    /// Checkpoint every this many iterations (0: only the final one).
    pub checkpoint_every: u64,
}

const KEYS: &[&str] = &[
    "game",
    "target",
    "max_increment",
    "side",
    "preset",
    "alpha",
    "beta",
    "lambda",
    "gamma",
    "backend",
    "hidden",
    "capacity",
    "batch_size",
    "epochs",
    "learning_rate",
    "adam_beta1",
    "adam_beta2",
    "adam_epsilon",
    "budget",
    "eval_every",
    "eval_games",
    "seed",
    "workers",
    "max_plies",
    "timing",
    "out_dir",
    "metrics",
    "checkpoint_every",
];

/// Keys that locate outputs rather than define the run; excluded from the hash.
const OUTPUT_KEYS: &[&str] = &["out_dir", "metrics"];

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        if !KEYS.contains(&k) {
            return Err(Error::Config(format!("line {}: unknown key '{k}'", n + 1)));
        }
        map.insert(k.to_string(), v.to_string());
    }
    Ok(map)
}

fn get<T: FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<Option<T>> {
    map.get(key)
        .map(|v| {
            v.parse::<T>()
                .map_err(|_| Error::Config(format!("bad value for {key}: '{v}'")))
        })
        .transpose()
}

impl RunConfig {
    pub fn from_text(text: &str) -> Result<Self> {
        Self::resolve(&parse_pairs(text)?)
    }

    /// Builds a config from raw pairs: game defaults, then the preset, then
    /// any explicit overrides (explicit alpha/beta/lambda beat the preset).
    pub fn resolve(map: &BTreeMap<String, String>) -> Result<Self> {
        for k in map.keys() {
            if !KEYS.contains(&k.as_str()) {
                return Err(Error::Config(format!("unknown key '{k}'")));
            }
        }
        let game_name = map.get("game").map(String::as_str).unwrap_or("countup");
        let game = match game_name {
            "countup" => GameSpec::countup(
                get(map, "target")?.unwrap_or(7),
                get(map, "max_increment")?.unwrap_or(2),
            ),
            "hex" => GameSpec::hex(get(map, "side")?.unwrap_or(3)),
            "othello" => GameSpec::othello(get(map, "side")?.unwrap_or(4)),
            other => return Err(Error::Config(format!("unknown game '{other}'"))),
        };
        let preset: Preset = get(map, "preset")?.unwrap_or(Preset::Klent);
        let mut t = TrainConfig::new(game, preset);
        if let Some(b) = map.get("backend") {
            t.backend = match b.as_str() {
                "tabular" => Backend::Tabular,
                "mlp" => Backend::Mlp,
                other => return Err(Error::Config(format!("unknown backend '{other}'"))),
            };
            t.adam.learning_rate = default_learning_rate(t.backend);
        }
        if let Some(v) = get(map, "alpha")? {
            t.hp.alpha = v;
        }
        if let Some(v) = get(map, "beta")? {
            t.hp.beta = v;
        }
        if let Some(v) = get(map, "lambda")? {
            t.hp.lambda = v;
        }
        if let Some(v) = get(map, "gamma")? {
            t.hp.gamma = v;
        }
        if let Some(h) = map.get("hidden") {
            t.hidden = if h.is_empty() {
                Vec::new()
            } else {
                h.split(',')
                    .map(|x| {
                        x.trim()
                            .parse()
                            .map_err(|_| Error::Config(format!("bad hidden width '{x}'")))
                    })
                    .collect::<Result<_>>()?
            };
        }
        macro_rules! set {
            ($key:literal, $field:expr) => {
                if let Some(v) = get(map, $key)? {
                    $field = v;
                }
            };
        }
        set!("capacity", t.capacity);
        set!("batch_size", t.batch_size);
        set!("epochs", t.epochs);
        set!("learning_rate", t.adam.learning_rate);
        set!("adam_beta1", t.adam.beta1);
        set!("adam_beta2", t.adam.beta2);
        set!("adam_epsilon", t.adam.epsilon);
        set!("budget", t.budget);
        set!("eval_every", t.eval_every);
        set!("eval_games", t.eval_games);
        set!("seed", t.seed);
        set!("workers", t.workers);
        set!("max_plies", t.max_plies);
        set!("timing", t.timing);
        t.validate()?;
        let out_dir = map
            .get("out_dir")
            .map(PathBuf::from)
            .or_else(|| std::env::var_os("KLENT_OUT").map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("runs/default"));
        Ok(RunConfig {
            train: t,
            preset,
            out_dir,
            metrics: map.get("metrics").map(PathBuf::from),
            checkpoint_every: get(map, "checkpoint_every")?.unwrap_or(0),
        })
    }

    pub fn metrics_path(&self) -> PathBuf {
        self.metrics
            .clone()
            .unwrap_or_else(|| self.out_dir.join("metrics.jsonl"))
    }

    /// Fully explicit config text; parsing it reproduces `self`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.pairs() {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    fn pairs(&self) -> Vec<(&'static str, String)> {
        let t = &self.train;
        let mut p = vec![("game", t.game.name().to_string())];
        match t.game {
            GameSpec::CountUp { target, max_increment } => {
                p.push(("target", target.to_string()));
                p.push(("max_increment", max_increment.to_string()));
            }
            GameSpec::Hex { side } | GameSpec::Othello { side } => p.push(("side", side.to_string())),
        }
        let backend = match t.backend {
            Backend::Tabular => "tabular",
            Backend::Mlp => "mlp",
        };
        let hidden: Vec<String> = t.hidden.iter().map(|h| h.to_string()).collect();
        p.extend([
            ("preset", self.preset.name().to_string()),
            ("alpha", fmt_f64(t.hp.alpha)),
            ("beta", fmt_f64(t.hp.beta)),
            ("lambda", fmt_f64(t.hp.lambda)),
            ("gamma", fmt_f64(t.hp.gamma)),
            ("backend", backend.to_string()),
            ("hidden", hidden.join(",")),
            ("capacity", t.capacity.to_string()),
            ("batch_size", t.batch_size.to_string()),
            ("epochs", t.epochs.to_string()),
            ("learning_rate", fmt_f64(t.adam.learning_rate)),
            ("adam_beta1", fmt_f64(t.adam.beta1)),
            ("adam_beta2", fmt_f64(t.adam.beta2)),
            ("adam_epsilon", fmt_f64(t.adam.epsilon)),
            ("budget", t.budget.to_string()),
            ("eval_every", t.eval_every.to_string()),
            ("eval_games", t.eval_games.to_string()),
            ("seed", t.seed.to_string()),
            ("workers", t.workers.to_string()),
            ("max_plies", t.max_plies.to_string()),
            ("timing", t.timing.to_string()),
            ("checkpoint_every", self.checkpoint_every.to_string()),
            ("out_dir", self.out_dir.display().to_string()),
        ]);
        if let Some(m) = &self.metrics {
            p.push(("metrics", m.display().to_string()));
        }
        p
    }

    /// First 8 bytes (little-endian) of SHA-256 over the run-defining keys.
    pub fn hash(&self) -> u64 {
        let mut h = Sha256::new();
        for (k, v) in self.pairs() {
            if OUTPUT_KEYS.contains(&k) {
                continue;
            }
            h.update(k.as_bytes());
            h.update(b"=");
            h.update(v.as_bytes());
            h.update(b"\n");
        }
        let digest = h.finalize();
        u64::from_le_bytes(digest[..8].try_into().unwrap())
    }
}

/// Shortest representation that parses back to the same bits.
fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

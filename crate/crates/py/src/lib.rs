//! Python bindings: games, the closed-form policy improvement, lambda-returns,
//! training, search, and the count-up solvers.

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use klent::analysis;
use klent::approx::{Checkpoint, Parameters};
use klent::config::RunConfig;
use klent::games::{self, GameSpec, GameState, LegalMask};
use klent::regopt::{self, ActionDistribution, QValues, RegWeights};
use klent::returns::{self, StepSignal};
use klent::search::{self, SearchConfig};
use klent::selfplay::{IterationMetrics, Trainer as CoreTrainer};

fn err(e: klent::Error) -> PyErr {
    match e {
        klent::Error::Io(io) => PyIOError::new_err(io.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn mask_of(n: usize, legal: Option<Vec<bool>>) -> PyResult<LegalMask> {
    match legal {
        None => Ok(LegalMask::all(n)),
        Some(bits) if bits.len() == n => Ok(LegalMask::from_bits(bits)),
        Some(bits) => Err(PyValueError::new_err(format!(
            "legal has length {}, expected {n}",
            bits.len()
        ))),
    }
}

/// An immutable game position.
#[pyclass(module = "klent_py", frozen, from_py_object)]
#[derive(Clone)]
struct Game {
    state: GameState,
}

#[pymethods]
impl Game {
    #[staticmethod]
    #[pyo3(signature = (target=7, max_increment=2))]
    fn countup(target: u32, max_increment: u32) -> PyResult<Self> {
        Self::start(GameSpec::countup(target, max_increment))
    }

    #[staticmethod]
    #[pyo3(signature = (side=3))]
    fn hex(side: usize) -> PyResult<Self> {
        Self::start(GameSpec::hex(side))
    }

    #[staticmethod]
    #[pyo3(signature = (side=4))]
    fn othello(side: usize) -> PyResult<Self> {
        Self::start(GameSpec::othello(side))
    }

    #[getter]
    fn num_actions(&self) -> usize {
        self.state.spec().num_actions()
    }

    #[getter]
    fn to_move(&self) -> u8 {
        self.state.to_move()
    }

    #[getter]
    fn is_terminal(&self) -> bool {
        self.state.is_terminal()
    }

    #[getter]
    fn ply(&self) -> u32 {
        self.state.ply()
    }

    /// +1, 0, or -1 for `player` once the game is over, else None.
    fn outcome_for(&self, player: u8) -> Option<i8> {
        self.state.outcome_for(player)
    }

    fn legal_actions(&self) -> PyResult<Vec<usize>> {
        Ok(games::legal_actions(&self.state).map_err(err)?.legal().to_vec())
    }

    /// Returns the next position and the mover-frame reward.
    fn step(&self, action: usize) -> PyResult<(Game, f64)> {
        let (state, r) = games::step(&self.state, action).map_err(err)?;
        Ok((Game { state }, r))
    }

    fn features(&self) -> Vec<f64> {
        games::encode(&self.state)
    }

    fn action_label(&self, action: usize) -> String {
        self.state.spec().action_label(action)
    }

    fn parse_action(&self, text: &str) -> Option<usize> {
        self.state.spec().parse_action(text)
    }

    fn render(&self) -> String {
        games::render(&self.state)
    }

    fn __repr__(&self) -> String {
        format!("Game({}, ply {})", self.state.spec(), self.state.ply())
    }
}

impl Game {
    fn start(spec: GameSpec) -> PyResult<Self> {
        Ok(Game {
            state: games::reset(spec).map_err(err)?,
        })
    }
}

/// Frozen parameters plus the regularization weights used to act with them.
#[pyclass(module = "klent_py", frozen, from_py_object)]
#[derive(Clone)]
struct Policy {
    game: GameSpec,
    params: Parameters,
    weights: RegWeights,
}

#[pymethods]
impl Policy {
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let ck = Checkpoint::load(path.as_ref()).map_err(err)?;
        Ok(Policy {
            game: ck.game,
            weights: ck.hp.weights().map_err(err)?,
            params: ck.params,
        })
    }

    /// `(policy head, q head)` over all actions; illegal entries are 0.
    fn forward(&self, game: &Game) -> PyResult<(Vec<f64>, Vec<f64>)> {
        let mask = games::legal_actions(&game.state).map_err(err)?;
        let out = self.params.forward(&game.state.observe(), &mask).map_err(err)?;
        Ok((out.policy().probs().to_vec(), out.q.values().to_vec()))
    }

    fn greedy_action(&self, game: &Game) -> PyResult<usize> {
        search::greedy_action(&self.params, &game.state).map_err(err)
    }

    /// `(action, visits, values)` from PUCT search at the root.
    #[pyo3(signature = (game, simulations, c_puct=search::DEFAULT_C_PUCT))]
    fn search(
        &self,
        py: Python<'_>,
        game: &Game,
        simulations: u32,
        c_puct: f64,
    ) -> PyResult<(usize, Vec<u32>, Vec<f64>)> {
        let cfg = SearchConfig { simulations, c_puct };
        let r = py
            .detach(|| search::search(&game.state, &self.params, self.weights, cfg))
            .map_err(err)?;
        Ok((r.action, r.visits, r.values))
    }

    /// Win rate against uniform random play with alternating colors.
    #[pyo3(signature = (games, simulations=0, seed=0))]
    fn win_rate_vs_random(&self, py: Python<'_>, games: usize, simulations: u32, seed: u64) -> PyResult<f64> {
        let agent = analysis::SearchAgent {
            params: self.params.clone(),
            weights: self.weights,
            config: SearchConfig {
                simulations,
                ..SearchConfig::default()
            },
        };
        let r = py
            .detach(|| analysis::play_match(&agent, &analysis::RandomAgent, self.game, games, seed))
            .map_err(err)?;
        Ok(r.win_rate())
    }
}

fn metrics_dict<'py>(py: Python<'py>, m: &IterationMetrics) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("schema", &m.schema)?;
    d.set_item("iteration", m.iteration)?;
    d.set_item("sim_evals", m.sim_evals)?;
    d.set_item("mean_loss", m.mean_loss)?;
    d.set_item("mean_entropy", m.mean_entropy)?;
    d.set_item("mean_episode_length", m.mean_episode_length)?;
    d.set_item("episodes", m.episodes)?;
    d.set_item("eval_win_rate", m.eval_win_rate)?;
    Ok(d)
}

/// Self-play trainer built from flat `key = value` config text.
#[pyclass(module = "klent_py")]
struct Trainer {
    inner: CoreTrainer,
    config_hash: u64,
}

#[pymethods]
impl Trainer {
    #[new]
    #[pyo3(signature = (config=""))]
    fn new(config: &str) -> PyResult<Self> {
        let run = RunConfig::from_text(config).map_err(err)?;
        Ok(Trainer {
            config_hash: run.hash(),
            inner: CoreTrainer::new(run.train).map_err(err)?,
        })
    }

    #[getter]
    fn finished(&self) -> bool {
        self.inner.finished()
    }

    #[getter]
    fn iteration(&self) -> u64 {
        self.inner.iteration()
    }

    #[getter]
    fn sim_evals(&self) -> u64 {
        self.inner.sim_evals()
    }

    /// One collect-and-fit iteration; returns its metrics.
    fn iterate<'py>(&mut self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let inner = &mut self.inner;
        let m = py.detach(|| inner.iterate()).map_err(err)?;
        metrics_dict(py, &m)
    }

    /// Iterates until the budget is spent; returns every iteration's metrics.
    fn train<'py>(&mut self, py: Python<'py>) -> PyResult<Vec<Bound<'py, PyDict>>> {
        let inner = &mut self.inner;
        let all = py
            .detach(|| {
                let mut all = Vec::new();
                while !inner.finished() {
                    all.push(inner.iterate()?);
                }
                Ok(all)
            })
            .map_err(err)?;
        all.iter().map(|m| metrics_dict(py, m)).collect()
    }

    fn policy(&self) -> PyResult<Policy> {
        let cfg = self.inner.config();
        Ok(Policy {
            game: cfg.game,
            params: self.inner.params().clone(),
            weights: cfg.hp.weights().map_err(err)?,
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        let cfg = self.inner.config();
        Checkpoint {
            game: cfg.game,
            hp: cfg.hp,
            params: self.inner.params().clone(),
            optimizer: self.inner.optimizer().clone(),
            iteration: self.inner.iteration(),
            sim_evals: self.inner.sim_evals(),
            config_hash: self.config_hash,
        }
        .save(path.as_ref())
        .map_err(err)
    }
}

/// Closed-form maximizer of `E[q] - beta KL(p || prior) + alpha H(p)`.
#[pyfunction]
#[pyo3(signature = (q, prior, alpha, beta, legal=None))]
fn improved_policy(
    q: Vec<f64>,
    prior: Vec<f64>,
    alpha: f64,
    beta: f64,
    legal: Option<Vec<bool>>,
) -> PyResult<Vec<f64>> {
    let mask = mask_of(q.len(), legal)?;
    let q = QValues::new(q, mask.clone()).map_err(err)?;
    let prior = ActionDistribution::new(prior, mask).map_err(err)?;
    let w = RegWeights::new(alpha, beta).map_err(err)?;
    Ok(regopt::improved_policy(&q, &prior, w).map_err(err)?.probs().to_vec())
}

#[pyfunction]
#[pyo3(signature = (candidate, q, prior, alpha, beta, legal=None))]
fn objective(
    candidate: Vec<f64>,
    q: Vec<f64>,
    prior: Vec<f64>,
    alpha: f64,
    beta: f64,
    legal: Option<Vec<bool>>,
) -> PyResult<f64> {
    let mask = mask_of(q.len(), legal)?;
    let candidate = ActionDistribution::new(candidate, mask.clone()).map_err(err)?;
    let q = QValues::new(q, mask.clone()).map_err(err)?;
    let prior = ActionDistribution::new(prior, mask).map_err(err)?;
    let w = RegWeights::new(alpha, beta).map_err(err)?;
    regopt::objective(&candidate, &q, &prior, w).map_err(err)
}

/// Negamax lambda-returns for one trajectory; `movers[t]` is who acted at `t`.
#[pyfunction]
#[pyo3(signature = (rewards, values, movers, lam, gamma=1.0))]
fn lambda_returns(rewards: Vec<f64>, values: Vec<f64>, movers: Vec<u8>, lam: f64, gamma: f64) -> PyResult<Vec<f64>> {
    if rewards.len() != values.len() || rewards.len() != movers.len() {
        return Err(PyValueError::new_err(
            "rewards, values, and movers must have equal length",
        ));
    }
    let steps: Vec<StepSignal> = rewards
        .into_iter()
        .zip(values)
        .zip(movers)
        .map(|((reward, vhat), mover)| StepSignal { reward, vhat, mover })
        .collect();
    Ok(returns::lambda_returns(&steps, lam, gamma).map_err(err)?.g_lambda)
}

/// `(state, strategy)` rows, highest state first.
#[pyfunction]
fn solve_countup(target: u32, max_increment: u32) -> PyResult<Vec<(u32, String)>> {
    Ok(analysis::solve_countup_optimal(target, max_increment)
        .map_err(err)?
        .table())
}

type Table = Vec<Vec<f64>>;

/// `(policy, q)` per state of the count-up QRE at temperature `alpha`.
#[pyfunction]
fn solve_countup_qre(target: u32, max_increment: u32, alpha: f64) -> PyResult<(Table, Table)> {
    let qre = analysis::solve_countup_qre(target, max_increment, alpha).map_err(err)?;
    Ok((qre.policy, qre.q))
}

#[pyfunction]
#[pyo3(signature = (win_rate, anchor=1000.0))]
fn elo_from_winrate(win_rate: f64, anchor: f64) -> PyResult<f64> {
    analysis::elo_from_winrate(win_rate, anchor).map_err(err)
}

#[pymodule]
fn klent_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Game>()?;
    m.add_class::<Policy>()?;
    m.add_class::<Trainer>()?;
    m.add_function(wrap_pyfunction!(improved_policy, m)?)?;
    m.add_function(wrap_pyfunction!(objective, m)?)?;
    m.add_function(wrap_pyfunction!(lambda_returns, m)?)?;
    m.add_function(wrap_pyfunction!(solve_countup, m)?)?;
    m.add_function(wrap_pyfunction!(solve_countup_qre, m)?)?;
    m.add_function(wrap_pyfunction!(elo_from_winrate, m)?)?;
    m.add("DEFAULT_LAMBDA", klent::config::DEFAULT_LAMBDA)?;
    Ok(())
}

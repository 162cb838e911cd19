//! Test-time PUCT search over the learned policy and action values.
//!
//! Node priors are the improved policy; a freshly expanded node is valued by
//! the inner product of its improved policy with its (clipped) action values,
//! and terminal nodes back up the true outcome. Unvisited edges read their
//! mean value from the network's clipped `Q(s, a)`.

use crate::approx::Parameters;
use crate::error::{Error, Result};
use crate::games::{self, GameState, Player};
use crate::regopt::RegWeights;
use crate::selfplay::acting_policy;

pub const DEFAULT_C_PUCT: f64 = 1.25;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SearchConfig {
    pub simulations: u32,
    pub c_puct: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            simulations: 0,
            c_puct: DEFAULT_C_PUCT,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchResult {
    pub action: usize,
    /// Root visit counts over the full action space; sums to the simulation count.
    pub visits: Vec<u32>,
    /// Root mean values over the full action space, mover frame (0 when unvisited).
    pub values: Vec<f64>,
}

#[derive(Clone, Debug)]
struct Edge {
    action: usize,
    prior: f64,
    q_net: f64,
    visits: u32,
    total: f64,
    child: Option<usize>,
}

impl Edge {
    fn mean(&self) -> f64 {
        if self.visits == 0 {
            self.q_net
        } else {
            self.total / f64::from(self.visits)
        }
    }
}

#[derive(Clone, Debug)]
struct Node {
    state: GameState,
    mover: Player,
    edges: Vec<Edge>,
    /// Leaf value (non-terminal) or outcome for the last mover (terminal).
    value: f64,
}

struct Tree<'a> {
    nodes: Vec<Node>,
    params: &'a Parameters,
    weights: RegWeights,
}

impl Tree<'_> {
    fn expand(&mut self, state: GameState) -> Result<usize> {
        let mover = state.to_move();
        let node = if state.is_terminal() {
            let value = f64::from(state.outcome().unwrap_or(0));
            Node {
                state,
                mover,
                edges: Vec::new(),
                value,
            }
        } else {
            let mask = games::legal_actions(&state)?;
            let acting = acting_policy(self.params, &state.observe(), &mask, self.weights)?;
            let q = acting.output.q.values();
            let edges = mask
                .legal()
                .iter()
                .map(|&a| Edge {
                    action: a,
                    prior: acting.improved.prob(a),
                    q_net: q[a].clamp(-1.0, 1.0),
                    visits: 0,
                    total: 0.0,
                    child: None,
                })
                .collect::<Vec<_>>();
            let value = mask
                .legal()
                .iter()
                .map(|&a| acting.improved.prob(a) * q[a].clamp(-1.0, 1.0))
                .sum();
            Node {
                state,
                mover,
                edges,
                value,
            }
        };
        self.nodes.push(node);
        Ok(self.nodes.len() - 1)
    }

    fn select(&self, node: usize, c_puct: f64) -> usize {
        let n = &self.nodes[node];
        let parent_visits: u32 = n.edges.iter().map(|e| e.visits).sum();
        let sqrt_n = f64::from(parent_visits).sqrt();
        let mut best = 0;
        let mut best_score = f64::NEG_INFINITY;
        for (i, e) in n.edges.iter().enumerate() {
            let score = e.mean() + c_puct * e.prior * sqrt_n / (1.0 + f64::from(e.visits));
            if score > best_score {
                best = i;
                best_score = score;
            }
        }
        best
    }

    /// One descent; returns nothing, updates edge statistics on the path.
    fn simulate(&mut self, root: usize, c_puct: f64) -> Result<()> {
        let mut path: Vec<(usize, usize)> = Vec::new();
        let mut node = root;
        // Value of the reached leaf in the frame of the mover at the last edge.
        let leaf_value;
        loop {
            let e = self.select(node, c_puct);
            path.push((node, e));
            match self.nodes[node].edges[e].child {
                Some(c) => {
                    let child = &self.nodes[c];
                    if child.state.is_terminal() {
                        leaf_value = child.value;
                        break;
                    }
                    node = c;
                }
                None => {
                    let action = self.nodes[node].edges[e].action;
                    let (next, _) = games::step(&self.nodes[node].state, action)?;
                    let c = self.expand(next)?;
                    self.nodes[node].edges[e].child = Some(c);
                    let child = &self.nodes[c];
                    leaf_value = if child.state.is_terminal() || child.mover == self.nodes[node].mover {
                        child.value
                    } else {
                        -child.value
                    };
                    break;
                }
            }
        }
        let mut value = leaf_value;
        for i in (0..path.len()).rev() {
            let (n, e) = path[i];
            let edge = &mut self.nodes[n].edges[e];
            edge.visits += 1;
            edge.total += value;
            if i > 0 {
                let parent = path[i - 1].0;
                if self.nodes[parent].mover != self.nodes[n].mover {
                    value = -value;
                }
            }
        }
        Ok(())
    }
}

/// Greedy argmax of the policy head, ties to the lowest index.
pub fn greedy_action(params: &Parameters, state: &GameState) -> Result<usize> {
    let mask = games::legal_actions(state)?;
    let out = params.forward(&state.observe(), &mask)?;
    Ok(out.policy().argmax())
}

pub fn search(state: &GameState, params: &Parameters, weights: RegWeights, cfg: SearchConfig) -> Result<SearchResult> {
    if state.is_terminal() {
        return Err(Error::TerminalState);
    }
    let num_actions = state.spec().num_actions();
    if cfg.simulations == 0 {
        return Ok(SearchResult {
            action: greedy_action(params, state)?,
            visits: vec![0; num_actions],
            values: vec![0.0; num_actions],
        });
    }
    let mut tree = Tree {
        nodes: Vec::new(),
        params,
        weights,
    };
    let root = tree.expand(state.clone())?;
    for _ in 0..cfg.simulations {
        tree.simulate(root, cfg.c_puct)?;
    }
    let mut visits = vec![0; num_actions];
    let mut values = vec![0.0; num_actions];
    let mut best: Option<&Edge> = None;
    for e in &tree.nodes[root].edges {
        visits[e.action] = e.visits;
        if e.visits > 0 {
            values[e.action] = e.total / f64::from(e.visits);
        }
        if best.is_none_or(|b| e.visits > b.visits) {
            best = Some(e);
        }
    }
    Ok(SearchResult {
        action: best.expect("non-terminal root has edges").action,
        visits,
        values,
    })
}

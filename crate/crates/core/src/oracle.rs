//! Value-iteration oracle, per-episode suboptimality and the
//! optimal-instance check.

use std::collections::VecDeque;

use crate::agents::Transition;
use crate::env::{TabularMdp, TerminalKind};
use crate::error::{Error, Result};
use crate::table::{ActionLayout, QKey, QTable, StateId};
use crate::Environment;

pub const DEFAULT_TOLERANCE: f64 = 1e-10;
pub const DEFAULT_MAX_ITERATIONS: usize = 1_000_000;

/// Optimal action values of a tabular model.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleResult {
    layout: ActionLayout,
    q_star: Vec<f64>,
    v_star: Vec<f64>,
    /// Largest absolute change in the final sweep.
    pub residual: f64,
    pub iterations: usize,
}

impl OracleResult {
    pub fn layout(&self) -> &ActionLayout {
        &self.layout
    }

    pub fn q(&self, key: QKey) -> Result<f64> {
        Ok(self.q_star[self.layout.flat(key)?])
    }

    pub fn v(&self, state: StateId) -> f64 {
        match state {
            StateId::NonTerminal(s) => self.v_star[s],
            StateId::Terminal => 0.0,
        }
    }

    pub fn is_optimal(&self, key: QKey) -> Result<bool> {
        Ok(self.q(key)? == self.v_star[key.state])
    }

    /// Unaliased table holding `Q*`.
    pub fn to_table(&self) -> QTable {
        let mut table = QTable::new(self.layout.clone());
        table.load_from(|k| self.q_star[self.layout.flat(k).expect("own layout")]);
        table
    }
}

fn state_values(layout: &ActionLayout, q: &[f64]) -> Vec<f64> {
    (0..layout.n_states())
        .map(|s| {
            let base = layout.flat(QKey::new(s, 0)).expect("non-empty action set");
            q[base..base + layout.n_actions(s)].iter().copied().fold(f64::NEG_INFINITY, f64::max)
        })
        .collect()
}

fn backup(mdp: &TabularMdp, gamma: f64, key: QKey, v: &[f64]) -> f64 {
    mdp.row(key.state, key.action)
        .expect("key from the model's own layout")
        .iter()
        .map(|o| {
            let next = match o.next {
                StateId::NonTerminal(t) => v[t],
                StateId::Terminal => 0.0,
            };
            o.prob * (o.reward + gamma * next)
        })
        .sum()
}

pub fn value_iteration(mdp: &TabularMdp, gamma: f64, tol: f64, max_iter: usize) -> Result<OracleResult> {
    value_iteration_from(mdp, gamma, tol, max_iter, None)
}

/// Synchronous sweeps of `Q(s,a) ← Σ P(s'|s,a)[R + γV(s')]` starting from
/// `initial` (all zero when absent) until the largest change is at most `tol`.
pub fn value_iteration_from(
    mdp: &TabularMdp,
    gamma: f64,
    tol: f64,
    max_iter: usize,
    initial: Option<&[f64]>,
) -> Result<OracleResult> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::config(format!("gamma must lie in [0, 1], got {gamma}")));
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::config(format!("tolerance must be positive, got {tol}")));
    }
    let layout = mdp.layout().clone();
    let keys: Vec<QKey> = layout.keys().collect();
    let mut q = match initial {
        Some(init) if init.len() == keys.len() => init.to_vec(),
        Some(init) => {
            return Err(Error::contract(format!(
                "initial values have {} entries, model has {}",
                init.len(),
                keys.len()
            )))
        }
        None => vec![0.0; keys.len()],
    };
    let mut next = vec![0.0; keys.len()];
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    while iterations < max_iter {
        let v = state_values(&layout, &q);
        residual = 0.0;
        for (i, &key) in keys.iter().enumerate() {
            next[i] = backup(mdp, gamma, key, &v);
            residual = f64::max(residual, (next[i] - q[i]).abs());
        }
        std::mem::swap(&mut q, &mut next);
        iterations += 1;
        if residual <= tol {
            let v_star = state_values(&layout, &q);
            return Ok(OracleResult {
                layout,
                q_star: q,
                v_star,
                residual,
                iterations,
            });
        }
    }
    Err(Error::NonConvergence { residual, iterations })
}

/// Largest `|Q(s,a) − Σ P[R + γ max_b Q(s',b)]|` over all keys.
pub fn bellman_residual(mdp: &TabularMdp, gamma: f64, oracle: &OracleResult) -> f64 {
    let layout = mdp.layout();
    layout
        .keys()
        .map(|k| (oracle.q(k).expect("same layout") - backup(mdp, gamma, k, &oracle.v_star)).abs())
        .fold(0.0, f64::max)
}

/// Steps of one episode in order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EpisodeTrace {
    pub steps: Vec<Transition>,
    pub terminal: Option<TerminalKind>,
}

impl EpisodeTrace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, tr: Transition) {
        self.steps.push(tr);
    }

    /// Consecutive steps chain, and the last step ends in `Terminal` exactly
    /// when a terminal kind is recorded.
    pub fn is_well_formed(&self) -> bool {
        let chained = self
            .steps
            .windows(2)
            .all(|w| w[0].next == StateId::NonTerminal(w[1].state));
        let ending = match self.steps.last() {
            Some(last) => last.next.is_terminal() == self.terminal.is_some(),
            None => self.terminal.is_none(),
        };
        chained && ending
    }
}

/// `Σ_t [Q*(s_t, a_t) − V*(s_t)]`; never positive, zero iff every action was
/// optimal.
pub fn episode_suboptimality(trace: &EpisodeTrace, oracle: &OracleResult) -> Result<f64> {
    trace.steps.iter().try_fold(0.0, |acc, tr| {
        let q = oracle
            .q(QKey::new(tr.state, tr.action))
            .map_err(|_| Error::contract(format!("step ({}, {}) is not a key of the oracle's model", tr.state, tr.action)))?;
        Ok(acc + (q - oracle.v_star[tr.state]))
    })
}

pub fn default_horizon(mdp: &TabularMdp) -> usize {
    4 * mdp.n_states()
}

/// Whether the greedy policy of `table` (lowest-index tie-break) takes only
/// `Q*`-optimal actions at every state reachable from `start`. For
/// deterministic models the greedy rollout must also terminate within
/// `horizon` steps; for stochastic ones every positive-probability successor
/// of a greedy action is explored, up to `horizon` expansions.
pub fn instance_optimal(table: &QTable, oracle: &OracleResult, mdp: &TabularMdp, start: usize, horizon: usize) -> bool {
    let greedy_ok = |s: usize| -> Option<usize> {
        let a = table.greedy_action(s);
        match oracle.is_optimal(QKey::new(s, a)) {
            Ok(true) => Some(a),
            _ => None,
        }
    };

    if mdp.is_deterministic() {
        let mut state = start;
        for _ in 0..horizon {
            let Some(a) = greedy_ok(state) else { return false };
            match mdp.row(state, a).expect("valid key")[0].next {
                StateId::Terminal => return true,
                StateId::NonTerminal(next) => state = next,
            }
        }
        return false;
    }

    let mut seen = vec![false; mdp.n_states()];
    let mut queue = VecDeque::from([start]);
    seen[start] = true;
    let mut expansions = 0;
    while let Some(state) = queue.pop_front() {
        if expansions == horizon {
            break;
        }
        expansions += 1;
        let Some(a) = greedy_ok(state) else { return false };
        for o in mdp.row(state, a).expect("valid key") {
            if let StateId::NonTerminal(next) = o.next {
                if o.prob > 0.0 && !seen[next] {
                    seen[next] = true;
                    queue.push_back(next);
                }
            }
        }
    }
    true
}

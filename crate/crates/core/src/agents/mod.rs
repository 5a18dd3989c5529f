//! Learning agents sharing one stepping interface.

mod eligibility;
mod tsdt;

pub use eligibility::{EligibilityEntry, EligibilityTrace, TraceUpdate};
pub use tsdt::{TsdtEntry, TsdtTrace};

use std::fmt;
use std::str::FromStr;

use crate::env::TabularMdp;
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::table::{backup_q_learning, backup_sarsa, epsilon_greedy, HyperParams, QTable, StateId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    QLearning,
    Sarsa,
    Watkins,
    Optimistic,
    Tsdt,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::QLearning,
        Algorithm::Sarsa,
        Algorithm::Watkins,
        Algorithm::Optimistic,
        Algorithm::Tsdt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::QLearning => "q_learning",
            Algorithm::Sarsa => "sarsa",
            Algorithm::Watkins => "watkins",
            Algorithm::Optimistic => "optimistic",
            Algorithm::Tsdt => "tsdt",
        }
    }

    /// Whether the next action is chosen before the current transition is
    /// learned from. Sarsa and the eligibility traces need it for the update;
    /// Q-learning and TSDT choose from the freshly updated table.
    pub fn selects_before_update(self) -> bool {
        matches!(self, Algorithm::Sarsa | Algorithm::Watkins | Algorithm::Optimistic)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::config(format!("unknown algorithm `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AgentConfig {
    pub hp: HyperParams,
    pub algorithm: Algorithm,
    /// Optimistic Q(λ): drop the optimistic-only flag after an entry updates.
    pub clear_optimistic_on_update: bool,
    /// Keep at most this many trace entries, evicting the oldest.
    pub trace_bound: Option<usize>,
    /// Evict trace entries backed by the same Q-table cell as a new entry.
    pub evict_aliased_duplicates: bool,
    /// Visiting `(s, a)` also retires the trace entries of `(s, b)`, `b ≠ a`.
    pub replace_siblings: bool,
}

impl AgentConfig {
    pub fn new(algorithm: Algorithm, hp: HyperParams) -> Self {
        Self {
            hp,
            algorithm,
            clear_optimistic_on_update: false,
            trace_bound: None,
            evict_aliased_duplicates: false,
            replace_siblings: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trace_bound == Some(0) {
            return Err(Error::config("trace_bound must be at least 1"));
        }
        Ok(())
    }
}

/// One observed step `(s, a, r, s')`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transition {
    pub state: usize,
    pub action: usize,
    pub reward: f64,
    pub next: StateId,
}

impl Transition {
    pub fn new(state: usize, action: usize, reward: f64, next: StateId) -> Self {
        Self {
            state,
            action,
            reward,
            next,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum TraceState {
    OneStep,
    Eligibility(EligibilityTrace),
    Tsdt(TsdtTrace),
}

/// An algorithm plus its per-episode trace bookkeeping.
#[derive(Clone, Debug, PartialEq)]
pub struct Agent {
    cfg: AgentConfig,
    trace: TraceState,
}

impl Agent {
    pub fn new(cfg: AgentConfig) -> Result<Self> {
        cfg.validate()?;
        let trace = match cfg.algorithm {
            Algorithm::QLearning | Algorithm::Sarsa => TraceState::OneStep,
            Algorithm::Watkins | Algorithm::Optimistic => TraceState::Eligibility(EligibilityTrace::new()),
            Algorithm::Tsdt => TraceState::Tsdt(TsdtTrace::new()),
        };
        Ok(Self { cfg, trace })
    }

    pub fn config(&self) -> &AgentConfig {
        &self.cfg
    }

    pub fn algorithm(&self) -> Algorithm {
        self.cfg.algorithm
    }

    /// Empties the trace. The Q-table is never touched here.
    pub fn begin_episode(&mut self) {
        match &mut self.trace {
            TraceState::OneStep => {}
            TraceState::Eligibility(t) => t.clear(),
            TraceState::Tsdt(t) => t.clear(),
        }
    }

    pub fn trace_len(&self) -> usize {
        match &self.trace {
            TraceState::OneStep => 0,
            TraceState::Eligibility(t) => t.len(),
            TraceState::Tsdt(t) => t.len(),
        }
    }

    pub fn eligibility_trace(&self) -> Option<&EligibilityTrace> {
        match &self.trace {
            TraceState::Eligibility(t) => Some(t),
            _ => None,
        }
    }

    pub fn tsdt_trace(&self) -> Option<&TsdtTrace> {
        match &self.trace {
            TraceState::Tsdt(t) => Some(t),
            _ => None,
        }
    }

    /// Learns from one transition. `next_action` is the action already chosen
    /// for `tr.next`; it must be present exactly when the successor is
    /// non-terminal for algorithms that select before updating, and is
    /// ignored otherwise.
    pub fn update(&mut self, table: &mut QTable, tr: &Transition, next_action: Option<usize>) -> Result<()> {
        if self.cfg.algorithm.selects_before_update() && tr.next.is_terminal() != next_action.is_none() {
            return Err(Error::contract(format!(
                "{}: next action must be given exactly for non-terminal successors",
                self.cfg.algorithm
            )));
        }
        let cfg = &self.cfg;
        match (&mut self.trace, cfg.algorithm) {
            (TraceState::OneStep, Algorithm::QLearning) => {
                backup_q_learning(table, tr.state, tr.action, tr.reward, tr.next, &cfg.hp)?;
            }
            (TraceState::OneStep, Algorithm::Sarsa) => {
                backup_sarsa(table, tr.state, tr.action, tr.reward, tr.next, next_action, &cfg.hp)?;
            }
            (TraceState::Eligibility(t), Algorithm::Watkins) => t.watkins_step(table, tr, cfg)?,
            (TraceState::Eligibility(t), Algorithm::Optimistic) => t.optimistic_step(table, tr, next_action, cfg)?,
            (TraceState::Tsdt(t), Algorithm::Tsdt) => t.step(table, tr, cfg)?,
            _ => unreachable!("trace state always matches the algorithm"),
        }
        Ok(())
    }
}

/// ε-greedy selection shared by every algorithm.
pub fn agent_act(table: &QTable, state: usize, hp: &HyperParams, rng: &mut Rng) -> usize {
    epsilon_greedy(table, state, hp.epsilon(), rng)
}

/// Replays scripted episodes through an agent, resetting the trace between
/// episodes, and returns the learned table. Every transition must agree with
/// the deterministic `mdp`, consecutive steps must chain, and each episode
/// must end in the terminal state.
pub fn run_scenario(mdp: &TabularMdp, episodes: &[Vec<Transition>], cfg: &AgentConfig, table: QTable) -> Result<QTable> {
    validate_script(mdp, episodes)?;
    let mut table = table;
    let mut agent = Agent::new(*cfg)?;
    for episode in episodes {
        agent.begin_episode();
        for (i, tr) in episode.iter().enumerate() {
            let next_action = episode.get(i + 1).map(|n| n.action);
            agent.update(&mut table, tr, next_action)?;
        }
    }
    Ok(table)
}

fn validate_script(mdp: &TabularMdp, episodes: &[Vec<Transition>]) -> Result<()> {
    for (e, episode) in episodes.iter().enumerate() {
        for (i, tr) in episode.iter().enumerate() {
            let row = mdp
                .row(tr.state, tr.action)
                .map_err(|_| Error::contract(format!("episode {e} step {i}: invalid key ({}, {})", tr.state, tr.action)))?;
            let matches = row.len() == 1 && row[0].next == tr.next && row[0].reward == tr.reward;
            if !matches {
                return Err(Error::contract(format!(
                    "episode {e} step {i}: transition ({}, {}, {}, {}) disagrees with the model",
                    tr.state, tr.action, tr.reward, tr.next
                )));
            }
            match episode.get(i + 1) {
                Some(next) if tr.next != StateId::NonTerminal(next.state) => {
                    return Err(Error::contract(format!("episode {e} step {i}: steps do not chain")));
                }
                None if !tr.next.is_terminal() => {
                    return Err(Error::contract(format!("episode {e} does not end in the terminal state")));
                }
                _ => {}
            }
        }
    }
    Ok(())
}

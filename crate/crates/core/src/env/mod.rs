//! Environments: explicit tabular MDPs and the map-driven cliff walk.

mod grid;
mod mdp;

pub use grid::{Cell, Direction, GridMap, MapCounts, Noise, Rewards};
pub use mdp::{fig1, fig1_mdp, Outcome, TabularMdp};

use crate::error::Result;
use crate::rng::Rng;
use crate::table::{ActionLayout, StateId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TerminalKind {
    Goal,
    Failure,
}

/// Result of one environment transition.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOutcome {
    pub reward: f64,
    pub next: StateId,
    pub terminal: Option<TerminalKind>,
}

/// Anything an agent can be trained in.
pub trait Environment: Sync {
    fn layout(&self) -> &ActionLayout;

    /// Samples one transition. Consumes exactly one `next_f64` draw.
    fn step(&self, state: usize, action: usize, rng: &mut Rng) -> Result<StepOutcome>;

    /// Designated start state, if the environment has one.
    fn fixed_start(&self) -> Option<usize>;

    /// Explicit model whose sampled behaviour matches `step`.
    fn to_tabular(&self) -> TabularMdp;

    fn state_label(&self, state: usize) -> String;

    fn action_label(&self, state: usize, action: usize) -> String;
}

//! Tabular TD control with eligibility traces: Q-learning, Sarsa, Watkins'
//! Q(λ), an optimistic Q(λ) variant and temporal second-difference traces,
//! plus a value-iteration oracle and a batch experiment harness.

pub mod agents;
pub mod env;
pub mod error;
pub mod harness;
pub mod oracle;
pub mod rng;
pub mod table;
pub mod worked;

pub use agents::{Agent, AgentConfig, Algorithm, Transition};
pub use env::{Environment, GridMap, StepOutcome, TabularMdp, TerminalKind};
pub use error::{Error, Result};
pub use oracle::{value_iteration, OracleResult};
pub use rng::Rng;
pub use table::{ActionLayout, HyperParams, QKey, QTable, StateId};

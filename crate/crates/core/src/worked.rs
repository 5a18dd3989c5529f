//! Worked examples on the three-state MDP with pinned final Q-values.
//!
//! Episodes are written as a state sequence plus terminal reward, e.g.
//! `{A, C, 1}` moves A→C and then ends from C with reward 1. All runs use
//! `α = γ = λ = 1`.
//!
//! The pinned values arise when revisiting a state keeps the trace entries of
//! its other actions (`replace_siblings = false`). With per-state replacement
//! the second example leaves `Q(C, toB)` at −1 instead of 8; every other
//! pinned value is the same under both settings.

use std::fmt;

use crate::agents::{run_scenario, AgentConfig, Algorithm, Transition};
use crate::env::{fig1, fig1_mdp, Environment, TabularMdp};
use crate::error::{Error, Result};
use crate::table::{AliasMap, HyperParams, QKey, QTable, StateId};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WorkedExample {
    /// `{A, C, 1}` then `{A, C, 10}`.
    LongerTraces,
    /// `{A, C, 1}` then `{A, C, B, C, 10}`.
    SecondDifference,
    /// As `SecondDifference`, with `(A, toC)` and `(B, toC)` sharing one value.
    StateAbstraction,
}

impl WorkedExample {
    pub const ALL: [WorkedExample; 3] = [
        WorkedExample::LongerTraces,
        WorkedExample::SecondDifference,
        WorkedExample::StateAbstraction,
    ];

    pub fn name(self) -> &'static str {
        match self {
            WorkedExample::LongerTraces => "longer-traces",
            WorkedExample::SecondDifference => "second-difference",
            WorkedExample::StateAbstraction => "state-abstraction",
        }
    }

    pub fn episodes(self, mdp: &TabularMdp) -> Result<Vec<Vec<Transition>>> {
        let second = match self {
            WorkedExample::LongerTraces => fig1_episode(mdp, &["A", "C"], 10.0)?,
            _ => fig1_episode(mdp, &["A", "C", "B", "C"], 10.0)?,
        };
        Ok(vec![fig1_episode(mdp, &["A", "C"], 1.0)?, second])
    }

    pub fn initial_table(self, mdp: &TabularMdp) -> QTable {
        let layout = mdp.layout().clone();
        match self {
            WorkedExample::StateAbstraction => {
                let shared = vec![QKey::new(fig1::A, fig1::A_TO_C), QKey::new(fig1::B, fig1::B_TO_C)];
                let alias = AliasMap::from_groups(&layout, &[shared]).expect("valid fig1 keys");
                QTable::with_alias(layout, alias, 0.0)
            }
            _ => QTable::new(layout),
        }
    }

    /// Pinned final values for `algorithm`.
    pub fn expected(self, algorithm: Algorithm) -> Vec<(&'static str, QKey, f64)> {
        use fig1::*;
        use Algorithm::*;
        let a_c = ("Q(A,toC)", QKey::new(A, A_TO_C));
        let b_c = ("Q(B,toC)", QKey::new(B, B_TO_C));
        let c_b = ("Q(C,toB)", QKey::new(C, C_TO_B));
        let c_10 = ("Q(C,term10)", QKey::new(C, C_TERM10));
        let shared = ("Q(A,toC)=Q(B,toC)", QKey::new(A, A_TO_C));
        let rows: Vec<((&str, QKey), f64)> = match (self, algorithm) {
            (WorkedExample::LongerTraces, Watkins) => vec![(a_c, 0.0), (c_10, 10.0)],
            (WorkedExample::LongerTraces, _) => vec![(a_c, 9.0), (c_10, 10.0)],
            (WorkedExample::SecondDifference, Watkins) => vec![(b_c, 0.0), (c_b, -1.0), (a_c, 0.0), (c_10, 10.0)],
            (WorkedExample::SecondDifference, Optimistic) => vec![(b_c, 9.0), (c_b, 8.0), (a_c, 7.0), (c_10, 10.0)],
            (WorkedExample::SecondDifference, _) => vec![(b_c, 9.0), (c_b, 8.0), (a_c, 9.0), (c_10, 10.0)],
            (WorkedExample::StateAbstraction, Watkins) => vec![(shared, 0.0), (c_10, 10.0)],
            (WorkedExample::StateAbstraction, Optimistic) => vec![(shared, 16.0), (c_10, 10.0)],
            (WorkedExample::StateAbstraction, _) => vec![(shared, 9.0), (c_10, 10.0)],
        };
        rows.into_iter().map(|((label, key), v)| (label, key, v)).collect()
    }
}

/// Transitions for a state sequence ending with a terminal action of the
/// given reward, e.g. `(["A", "C"], 1.0)` for `{A, C, 1}`.
pub fn fig1_episode(mdp: &TabularMdp, states: &[&str], terminal_reward: f64) -> Result<Vec<Transition>> {
    let index = |name: &str| {
        mdp.state_index(name)
            .ok_or_else(|| Error::contract(format!("unknown state `{name}`")))
    };
    let mut steps = Vec::with_capacity(states.len());
    for pair in states.windows(2) {
        let (from, to) = (index(pair[0])?, index(pair[1])?);
        let action = mdp
            .action_index(from, &format!("to{}", pair[1]))
            .ok_or_else(|| Error::contract(format!("no move {} -> {}", pair[0], pair[1])))?;
        let reward = mdp.row(from, action)?[0].reward;
        steps.push(Transition::new(from, action, reward, StateId::NonTerminal(to)));
    }
    let last = index(states.last().ok_or_else(|| Error::contract("empty episode"))?)?;
    let action = mdp
        .action_index(last, &format!("term{terminal_reward}"))
        .ok_or_else(|| Error::contract(format!("no terminal action with reward {terminal_reward}")))?;
    steps.push(Transition::new(last, action, terminal_reward, StateId::Terminal));
    Ok(steps)
}

/// `α = γ = λ = 1`, no exploration, siblings kept in the trace.
pub fn worked_example_config(algorithm: Algorithm) -> AgentConfig {
    let hp = HyperParams::new(1.0, 1.0, 1.0, 0.0).expect("unit rates are valid");
    AgentConfig {
        replace_siblings: false,
        ..AgentConfig::new(algorithm, hp)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValueCheck {
    pub label: &'static str,
    pub expected: f64,
    pub actual: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub example: WorkedExample,
    pub algorithm: Algorithm,
    pub values: Vec<ValueCheck>,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.values.iter().all(|v| v.expected == v.actual)
    }
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed() { "PASS" } else { "FAIL" };
        write!(f, "{status} {:<18} {:<11}", self.example.name(), self.algorithm.name())?;
        for v in &self.values {
            write!(f, " {}: expected {} actual {}", v.label, v.expected, v.actual)?;
            if v.expected != v.actual {
                f.write_str(" <-- mismatch")?;
            }
            f.write_str(";")?;
        }
        Ok(())
    }
}

pub fn run_check(example: WorkedExample, algorithm: Algorithm, cfg: &AgentConfig) -> Result<CheckResult> {
    let mdp = fig1_mdp();
    let table = run_scenario(&mdp, &example.episodes(&mdp)?, cfg, example.initial_table(&mdp))?;
    let values = example
        .expected(algorithm)
        .into_iter()
        .map(|(label, key, expected)| {
            Ok(ValueCheck {
                label,
                expected,
                actual: table.get(key)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(CheckResult {
        example,
        algorithm,
        values,
    })
}

/// All nine example × trace-algorithm checks.
pub fn run_worked_examples() -> Result<Vec<CheckResult>> {
    let mut out = Vec::with_capacity(9);
    for example in WorkedExample::ALL {
        for algorithm in [Algorithm::Watkins, Algorithm::Optimistic, Algorithm::Tsdt] {
            out.push(run_check(example, algorithm, &worked_example_config(algorithm))?);
        }
    }
    Ok(out)
}

use super::{Environment, StepOutcome, TerminalKind};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::table::{ActionLayout, QKey, StateId};

/// One successor of a state-action row.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Outcome {
    pub next: StateId,
    pub prob: f64,
    pub reward: f64,
    pub terminal: Option<TerminalKind>,
}

/// Explicit transition and reward model. Rewards are attached to transitions.
#[derive(Clone, Debug, PartialEq)]
pub struct TabularMdp {
    layout: ActionLayout,
    state_names: Vec<String>,
    action_names: Vec<Vec<String>>,
    rows: Vec<Vec<Outcome>>,
}

impl TabularMdp {
    /// `rows[s][a]` lists the successors of `(s, a)`.
    pub fn new(
        state_names: Vec<String>,
        action_names: Vec<Vec<String>>,
        rows: Vec<Vec<Vec<Outcome>>>,
    ) -> Result<Self> {
        if state_names.len() != rows.len() || action_names.len() != rows.len() {
            return Err(Error::contract("state names, action names and rows disagree in length"));
        }
        let counts: Vec<usize> = rows.iter().map(Vec::len).collect();
        let layout = ActionLayout::new(&counts)?;
        let n_states = rows.len();
        let mut flat = Vec::with_capacity(layout.n_keys());
        for (s, state_rows) in rows.into_iter().enumerate() {
            if action_names[s].len() != state_rows.len() {
                return Err(Error::contract(format!("state {s}: action names do not match rows")));
            }
            for (a, row) in state_rows.into_iter().enumerate() {
                let mut total = 0.0;
                for o in &row {
                    if !(0.0..=1.0).contains(&o.prob) {
                        return Err(Error::contract(format!(
                            "({s}, {a}): probability {} outside [0, 1]",
                            o.prob
                        )));
                    }
                    if let StateId::NonTerminal(t) = o.next {
                        if t >= n_states {
                            return Err(Error::contract(format!("({s}, {a}): successor {t} out of range")));
                        }
                    }
                    if o.next.is_terminal() != o.terminal.is_some() {
                        return Err(Error::contract(format!(
                            "({s}, {a}): terminal kind must be set exactly for terminal successors"
                        )));
                    }
                    total += o.prob;
                }
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::contract(format!("({s}, {a}): probabilities sum to {total}")));
                }
                flat.push(row);
            }
        }
        Ok(Self {
            layout,
            state_names,
            action_names,
            rows: flat,
        })
    }

    pub fn n_states(&self) -> usize {
        self.layout.n_states()
    }

    pub fn row(&self, state: usize, action: usize) -> Result<&[Outcome]> {
        let flat = self.layout.flat(QKey::new(state, action))?;
        Ok(&self.rows[flat])
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.state_names.iter().position(|n| n == name)
    }

    pub fn action_index(&self, state: usize, name: &str) -> Option<usize> {
        self.action_names.get(state)?.iter().position(|n| n == name)
    }

    /// True when every row has a single successor.
    pub fn is_deterministic(&self) -> bool {
        self.rows.iter().all(|r| r.len() == 1)
    }
}

impl Environment for TabularMdp {
    fn layout(&self) -> &ActionLayout {
        &self.layout
    }

    fn step(&self, state: usize, action: usize, rng: &mut Rng) -> Result<StepOutcome> {
        let row = self.row(state, action)?;
        let u = rng.next_f64();
        let mut acc = 0.0;
        let mut chosen = row.last().expect("rows are non-empty");
        for o in row {
            acc += o.prob;
            if u < acc {
                chosen = o;
                break;
            }
        }
        Ok(StepOutcome {
            reward: chosen.reward,
            next: chosen.next,
            terminal: chosen.terminal,
        })
    }

    fn fixed_start(&self) -> Option<usize> {
        Some(0)
    }

    fn to_tabular(&self) -> TabularMdp {
        self.clone()
    }

    fn state_label(&self, state: usize) -> String {
        self.state_names[state].clone()
    }

    fn action_label(&self, state: usize, action: usize) -> String {
        self.action_names[state][action].clone()
    }
}

/// State and action indices of the three-state worked-example MDP.
pub mod fig1 {
    pub const A: usize = 0;
    pub const B: usize = 1;
    pub const C: usize = 2;

    pub const A_TO_B: usize = 0;
    pub const A_TO_C: usize = 1;
    pub const B_TO_A: usize = 0;
    pub const B_TO_C: usize = 1;
    pub const C_TERM1: usize = 0;
    pub const C_TO_B: usize = 1;
    pub const C_TERM10: usize = 2;
    pub const C_TO_A: usize = 3;
}

/// Deterministic MDP over A, B, C. Every move between states costs 1; C can
/// also end the episode with reward 1 or 10. Episodes start in A.
pub fn fig1_mdp() -> TabularMdp {
    let mv = |to: usize| {
        vec![Outcome {
            next: StateId::NonTerminal(to),
            prob: 1.0,
            reward: -1.0,
            terminal: None,
        }]
    };
    let end = |reward: f64| {
        vec![Outcome {
            next: StateId::Terminal,
            prob: 1.0,
            reward,
            terminal: Some(TerminalKind::Goal),
        }]
    };
    let names = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    TabularMdp::new(
        names(&["A", "B", "C"]),
        vec![
            names(&["toB", "toC"]),
            names(&["toA", "toC"]),
            names(&["term1", "toB", "term10", "toA"]),
        ],
        vec![
            vec![mv(fig1::B), mv(fig1::C)],
            vec![mv(fig1::A), mv(fig1::C)],
            vec![end(1.0), mv(fig1::B), end(10.0), mv(fig1::A)],
        ],
    )
    .expect("fig1 model is well formed")
}

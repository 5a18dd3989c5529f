//! Identifier spaces, the aliasable Q-table, one-step backups and
//! ε-greedy action selection.

use std::fmt;

use crate::error::{Error, Result};
use crate::rng::Rng;

/// A state index, or the absorbing terminal marker.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StateId {
    NonTerminal(usize),
    Terminal,
}

impl StateId {
    pub fn index(self) -> Option<usize> {
        match self {
            StateId::NonTerminal(s) => Some(s),
            StateId::Terminal => None,
        }
    }

    pub fn is_terminal(self) -> bool {
        matches!(self, StateId::Terminal)
    }
}

impl From<usize> for StateId {
    fn from(s: usize) -> Self {
        StateId::NonTerminal(s)
    }
}

impl fmt::Display for StateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateId::NonTerminal(s) => write!(f, "{s}"),
            StateId::Terminal => f.write_str("terminal"),
        }
    }
}

/// A non-terminal state paired with one of its actions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct QKey {
    pub state: usize,
    pub action: usize,
}

impl QKey {
    pub const fn new(state: usize, action: usize) -> Self {
        Self { state, action }
    }
}

/// Per-state action counts, flattened so every `QKey` has a dense index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ActionLayout {
    offsets: Vec<usize>,
}

impl ActionLayout {
    /// Every state needs at least one action; there are no non-terminal
    /// absorbing states.
    pub fn new(action_counts: &[usize]) -> Result<Self> {
        let mut offsets = Vec::with_capacity(action_counts.len() + 1);
        offsets.push(0);
        for (s, &n) in action_counts.iter().enumerate() {
            if n == 0 {
                return Err(Error::contract(format!("state {s} has an empty action set")));
            }
            offsets.push(offsets[s] + n);
        }
        Ok(Self { offsets })
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Result<Self> {
        Self::new(&vec![n_actions; n_states])
    }

    pub fn n_states(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn n_keys(&self) -> usize {
        *self.offsets.last().unwrap_or(&0)
    }

    pub fn n_actions(&self, state: usize) -> usize {
        self.offsets[state + 1] - self.offsets[state]
    }

    pub fn flat(&self, key: QKey) -> Result<usize> {
        if key.state < self.n_states() && key.action < self.n_actions(key.state) {
            Ok(self.offsets[key.state] + key.action)
        } else {
            Err(Error::Key {
                state: key.state,
                action: key.action,
            })
        }
    }

    pub fn keys(&self) -> impl Iterator<Item = QKey> + '_ {
        (0..self.n_states()).flat_map(move |s| (0..self.n_actions(s)).map(move |a| QKey::new(s, a)))
    }
}

/// Maps every `QKey` to a storage cell. Keys sharing a cell share a value.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AliasMap {
    cell_of: Vec<usize>,
    n_cells: usize,
}

impl AliasMap {
    pub fn identity(layout: &ActionLayout) -> Self {
        Self {
            cell_of: (0..layout.n_keys()).collect(),
            n_cells: layout.n_keys(),
        }
    }

    /// Each group becomes one shared cell; keys outside all groups keep a
    /// private cell. A key may appear in at most one group.
    pub fn from_groups(layout: &ActionLayout, groups: &[Vec<QKey>]) -> Result<Self> {
        let mut cell_of = vec![usize::MAX; layout.n_keys()];
        let mut n_cells = 0;
        for group in groups {
            if group.is_empty() {
                continue;
            }
            for &key in group {
                let flat = layout.flat(key)?;
                if cell_of[flat] != usize::MAX {
                    return Err(Error::contract(format!(
                        "key ({}, {}) appears in two alias groups",
                        key.state, key.action
                    )));
                }
                cell_of[flat] = n_cells;
            }
            n_cells += 1;
        }
        for cell in cell_of.iter_mut().filter(|c| **c == usize::MAX) {
            *cell = n_cells;
            n_cells += 1;
        }
        Ok(Self { cell_of, n_cells })
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn cell(&self, flat: usize) -> usize {
        self.cell_of[flat]
    }
}

/// Action values with optional aliasing between keys.
#[derive(Clone, Debug, PartialEq)]
pub struct QTable {
    layout: ActionLayout,
    alias: AliasMap,
    cells: Vec<f64>,
}

impl QTable {
    pub fn new(layout: ActionLayout) -> Self {
        Self::with_initial(layout, 0.0)
    }

    pub fn with_initial(layout: ActionLayout, initial: f64) -> Self {
        let alias = AliasMap::identity(&layout);
        Self::with_alias(layout, alias, initial)
    }

    /// # Panics
    ///
    /// Panics if `alias` was built for a different layout.
    pub fn with_alias(layout: ActionLayout, alias: AliasMap, initial: f64) -> Self {
        assert_eq!(alias.cell_of.len(), layout.n_keys(), "alias map does not match layout");
        let cells = vec![initial; alias.n_cells()];
        Self { layout, alias, cells }
    }

    pub fn layout(&self) -> &ActionLayout {
        &self.layout
    }

    pub fn alias(&self) -> &AliasMap {
        &self.alias
    }

    pub fn n_states(&self) -> usize {
        self.layout.n_states()
    }

    pub fn n_actions(&self, state: usize) -> usize {
        self.layout.n_actions(state)
    }

    /// Storage cell backing `key`.
    pub fn cell(&self, key: QKey) -> Result<usize> {
        Ok(self.alias.cell(self.layout.flat(key)?))
    }

    pub fn get(&self, key: QKey) -> Result<f64> {
        Ok(self.cells[self.cell(key)?])
    }

    pub fn set(&mut self, key: QKey, value: f64) -> Result<()> {
        let cell = self.cell(key)?;
        self.cells[cell] = value;
        Ok(())
    }

    pub(crate) fn get_cell(&self, cell: usize) -> f64 {
        self.cells[cell]
    }

    pub(crate) fn add_cell(&mut self, cell: usize, delta: f64) {
        self.cells[cell] += delta;
    }

    pub fn cells(&self) -> &[f64] {
        &self.cells
    }

    /// Max action value of `state`; exactly 0 for `Terminal`.
    ///
    /// # Panics
    ///
    /// Panics if a non-terminal index is outside the table.
    pub fn v(&self, state: StateId) -> f64 {
        match state {
            StateId::Terminal => 0.0,
            StateId::NonTerminal(s) => {
                let base = self.layout.offsets[s];
                let n = self.layout.n_actions(s);
                (base..base + n)
                    .map(|flat| self.cells[self.alias.cell(flat)])
                    .fold(f64::NEG_INFINITY, f64::max)
            }
        }
    }

    fn action_value(&self, state: usize, action: usize) -> f64 {
        self.cells[self.alias.cell(self.layout.offsets[state] + action)]
    }

    /// Whether `action` attains `V(state)`. NaN never does, except that a
    /// state whose values are all NaN has every action tied.
    fn is_greedy(&self, state: usize, action: usize, best: f64) -> bool {
        best == f64::NEG_INFINITY && self.action_value(state, action).is_nan()
            || self.action_value(state, action) == best
    }

    /// All actions whose value equals `V(state)` exactly.
    pub fn greedy_actions(&self, state: usize) -> Vec<usize> {
        let best = self.v(StateId::NonTerminal(state));
        (0..self.n_actions(state))
            .filter(|&a| self.is_greedy(state, a, best))
            .collect()
    }

    /// Lowest-index maximiser; the deterministic tie-break used by rollouts.
    pub fn greedy_action(&self, state: usize) -> usize {
        let best = self.v(StateId::NonTerminal(state));
        (0..self.n_actions(state))
            .find(|&a| self.is_greedy(state, a, best))
            .expect("non-empty action set")
    }

    /// Overwrites every key with `values(key)`. For aliased keys the last
    /// key written wins.
    pub fn load_from(&mut self, values: impl Fn(QKey) -> f64) {
        let keys: Vec<QKey> = self.layout.keys().collect();
        for key in keys {
            let cell = self.cell(key).expect("key from own layout");
            self.cells[cell] = values(key);
        }
    }
}

/// Learning, discount, trace-decay and exploration rates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HyperParams {
    alpha: f64,
    gamma: f64,
    lambda: f64,
    epsilon: f64,
}

impl HyperParams {
    pub fn new(alpha: f64, gamma: f64, lambda: f64, epsilon: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::config(format!("alpha must lie in (0, 1], got {alpha}")));
        }
        for (name, v) in [("gamma", gamma), ("lambda", lambda), ("epsilon", epsilon)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::config(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        Ok(Self {
            alpha,
            gamma,
            lambda,
            epsilon,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn with_epsilon(self, epsilon: f64) -> Result<Self> {
        Self::new(self.alpha, self.gamma, self.lambda, epsilon)
    }
}

/// Off-policy one-step backup toward `r + γV(s')`. Returns the TD error applied.
pub fn backup_q_learning(
    table: &mut QTable,
    state: usize,
    action: usize,
    reward: f64,
    next: StateId,
    hp: &HyperParams,
) -> Result<f64> {
    let cell = table.cell(QKey::new(state, action))?;
    let delta = reward + hp.gamma * table.v(next) - table.cells[cell];
    table.cells[cell] += hp.alpha * delta;
    Ok(delta)
}

/// On-policy one-step backup toward `r + γQ(s', a')`.
pub fn backup_sarsa(
    table: &mut QTable,
    state: usize,
    action: usize,
    reward: f64,
    next: StateId,
    next_action: Option<usize>,
    hp: &HyperParams,
) -> Result<f64> {
    let cell = table.cell(QKey::new(state, action))?;
    let next_value = match (next, next_action) {
        (StateId::Terminal, None) => 0.0,
        (StateId::NonTerminal(s2), Some(a2)) => table.get(QKey::new(s2, a2))?,
        (StateId::Terminal, Some(_)) => {
            return Err(Error::contract("next action given for a terminal successor"))
        }
        (StateId::NonTerminal(_), None) => {
            return Err(Error::contract("next action missing for a non-terminal successor"))
        }
    };
    let delta = reward + hp.gamma * next_value - table.cells[cell];
    table.cells[cell] += hp.alpha * delta;
    Ok(delta)
}

/// With probability ε a uniform action, otherwise a uniform pick among the
/// greedy actions. Always consumes one `next_f64` draw first.
pub fn epsilon_greedy(table: &QTable, state: usize, epsilon: f64, rng: &mut Rng) -> usize {
    let n = table.n_actions(state);
    if rng.next_f64() < epsilon {
        return rng.below(n);
    }
    let best = table.v(StateId::NonTerminal(state));
    let ties = (0..n).filter(|&a| table.is_greedy(state, a, best)).count();
    if ties == 1 {
        return (0..n)
            .find(|&a| table.is_greedy(state, a, best))
            .expect("one maximiser");
    }
    let pick = rng.below(ties);
    (0..n)
        .filter(|&a| table.is_greedy(state, a, best))
        .nth(pick)
        .expect("pick < ties")
}

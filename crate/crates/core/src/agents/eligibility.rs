//! Replacing eligibility traces: Watkins' Q(λ) and Optimistic Q(λ).
//!
//! Both keep one record per visited key in insertion order and walk the
//! records most-recent-first on every step. Only tracked records are touched;
//! an untracked key has `e = 0` and no optimistic flag, so it could not change.

use super::{AgentConfig, Transition};
use crate::error::{Error, Result};
use crate::table::{QKey, QTable, StateId};

#[derive(Clone, Debug, PartialEq)]
pub struct EligibilityEntry {
    pub key: QKey,
    pub cell: usize,
    /// Eligibility, in `[0, 1]`.
    pub e: f64,
    /// Set once an apparently suboptimal action has been taken since the
    /// entry's last plain update; only positive updates are then allowed.
    pub optimistic_only: bool,
    /// Return accumulated while `optimistic_only` is set.
    pub partial_return: f64,
    pub seq: u64,
}

/// One Q-value change made while walking the trace.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceUpdate {
    pub key: QKey,
    pub delta: f64,
    pub optimistic_only: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EligibilityTrace {
    entries: Vec<EligibilityEntry>,
    next_seq: u64,
}

impl EligibilityTrace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries oldest first.
    pub fn entries(&self) -> &[EligibilityEntry] {
        &self.entries
    }

    pub fn entry(&self, key: QKey) -> Option<&EligibilityEntry> {
        self.entries.iter().find(|e| e.key == key)
    }

    /// Puts `key` at the most recent position with `e = 1` and no optimistic
    /// flag, zeroing sibling actions of the same state when configured.
    fn refresh(&mut self, key: QKey, cell: usize, cfg: &AgentConfig, drop_zeroed: bool) {
        self.entries.retain(|e| e.key != key);
        if cfg.replace_siblings {
            for entry in self.entries.iter_mut().filter(|e| e.key.state == key.state) {
                entry.e = 0.0;
            }
            if drop_zeroed {
                self.entries.retain(|e| e.key.state != key.state);
            }
        }
        if cfg.evict_aliased_duplicates {
            self.entries.retain(|e| e.cell != cell);
        }
        self.entries.push(EligibilityEntry {
            key,
            cell,
            e: 1.0,
            optimistic_only: false,
            partial_return: 0.0,
            seq: self.next_seq,
        });
        self.next_seq += 1;
        if let Some(bound) = cfg.trace_bound {
            let excess = self.entries.len().saturating_sub(bound);
            self.entries.drain(..excess);
        }
    }

    /// Watkins' Q(λ): an apparently suboptimal action empties the trace.
    pub fn watkins_step(&mut self, table: &mut QTable, tr: &Transition, cfg: &AgentConfig) -> Result<()> {
        let key = QKey::new(tr.state, tr.action);
        let cell = table.cell(key)?;
        let hp = &cfg.hp;
        if table.get_cell(cell) < table.v(StateId::NonTerminal(tr.state)) {
            self.entries.clear();
        }
        self.refresh(key, cell, cfg, true);

        let delta_off = hp.gamma() * table.v(tr.next) - table.get_cell(cell);
        let decay = hp.gamma() * hp.lambda();
        for entry in self.entries.iter_mut().rev() {
            // Same expression shape as the optimistic path with no flag set.
            let delta = entry.e * tr.reward + entry.e * delta_off;
            table.add_cell(entry.cell, hp.alpha() * delta);
            entry.e *= decay;
        }
        self.entries.retain(|e| e.e != 0.0);
        Ok(())
    }

    pub fn optimistic_step(
        &mut self,
        table: &mut QTable,
        tr: &Transition,
        next_action: Option<usize>,
        cfg: &AgentConfig,
    ) -> Result<()> {
        self.optimistic_step_observed(table, tr, next_action, cfg, |_| {})
    }

    /// Optimistic Q(λ) step; `observe` sees every Q-value change.
    pub fn optimistic_step_observed(
        &mut self,
        table: &mut QTable,
        tr: &Transition,
        next_action: Option<usize>,
        cfg: &AgentConfig,
        mut observe: impl FnMut(TraceUpdate),
    ) -> Result<()> {
        let key = QKey::new(tr.state, tr.action);
        let cell = table.cell(key)?;
        let next_q = match (tr.next, next_action) {
            (StateId::NonTerminal(s2), Some(a2)) => table.get(QKey::new(s2, a2))?,
            (StateId::Terminal, None) => 0.0,
            (StateId::NonTerminal(_), None) => {
                return Err(Error::contract("next action missing for a non-terminal successor"))
            }
            (StateId::Terminal, Some(_)) => {
                return Err(Error::contract("next action given for a terminal successor"))
            }
        };
        let hp = &cfg.hp;

        if table.get_cell(cell) < table.v(StateId::NonTerminal(tr.state)) {
            for entry in &mut self.entries {
                entry.optimistic_only = true;
            }
        }
        self.refresh(key, cell, cfg, false);

        let q_sa = table.get_cell(cell);
        let delta_on = hp.gamma() * next_q - q_sa;
        let delta_off = hp.gamma() * table.v(tr.next) - q_sa;
        let decay = hp.gamma() * hp.lambda();

        for entry in self.entries.iter_mut().rev() {
            if !entry.optimistic_only {
                entry.partial_return = 0.0;
            }
            entry.partial_return += entry.e * tr.reward;
            let delta = entry.partial_return + entry.e * delta_off;
            if !entry.optimistic_only || delta > 0.0 {
                table.add_cell(entry.cell, hp.alpha() * delta);
                observe(TraceUpdate {
                    key: entry.key,
                    delta,
                    optimistic_only: entry.optimistic_only,
                });
                entry.partial_return = entry.e * (delta_on - delta_off);
                if cfg.clear_optimistic_on_update {
                    entry.optimistic_only = false;
                }
            }
            entry.e *= decay;
        }
        // With e = 0 an entry can only still act through a positive pending
        // return under the optimistic flag.
        self.entries
            .retain(|e| e.e != 0.0 || (e.optimistic_only && e.partial_return > 0.0));
        Ok(())
    }
}

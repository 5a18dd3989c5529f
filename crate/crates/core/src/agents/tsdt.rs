//! Temporal second difference trace.
//!
//! Each entry stores the transition it was created from and the TD error left
//! behind by its last update. Every step recomputes each entry's TD error and
//! applies only the change since then (the second difference), newest entry
//! first, so improvements in successor values flow back along the trace.

use super::{AgentConfig, Transition};
use crate::error::Result;
use crate::table::{HyperParams, QKey, QTable, StateId};

#[derive(Clone, Debug, PartialEq)]
pub struct TsdtEntry {
    pub key: QKey,
    pub cell: usize,
    /// Insertion timestamp; strictly increasing along the trace.
    pub t: u64,
    pub reward: f64,
    pub next: StateId,
    /// TD error remaining after the entry's last update.
    pub stored_delta: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TsdtTrace {
    entries: Vec<TsdtEntry>,
    clock: u64,
}

impl TsdtTrace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn clear(&mut self) {
        self.entries.clear();
        self.clock = 0;
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries oldest first.
    pub fn entries(&self) -> &[TsdtEntry] {
        &self.entries
    }

    pub fn entry(&self, key: QKey) -> Option<&TsdtEntry> {
        self.entries.iter().find(|e| e.key == key)
    }

    pub fn insert(&mut self, table: &QTable, tr: &Transition, cfg: &AgentConfig) -> Result<()> {
        let key = QKey::new(tr.state, tr.action);
        let cell = table.cell(key)?;
        if cfg.replace_siblings {
            self.entries.retain(|e| e.key.state != key.state);
        } else {
            self.entries.retain(|e| e.key != key);
        }
        if cfg.evict_aliased_duplicates {
            self.entries.retain(|e| e.cell != cell);
        }
        self.clock += 1;
        self.entries.push(TsdtEntry {
            key,
            cell,
            t: self.clock,
            reward: tr.reward,
            next: tr.next,
            stored_delta: 0.0,
        });
        if let Some(bound) = cfg.trace_bound {
            let excess = self.entries.len().saturating_sub(bound);
            self.entries.drain(..excess);
        }
        Ok(())
    }

    /// Applies second-difference updates to every entry, newest first.
    pub fn update_pass(&mut self, table: &mut QTable, hp: &HyperParams) {
        for entry in self.entries.iter_mut().rev() {
            let target = entry.reward + hp.gamma() * table.v(entry.next);
            let delta = target - table.get_cell(entry.cell);
            let second = delta - entry.stored_delta;
            table.add_cell(entry.cell, hp.alpha() * second);
            entry.stored_delta = entry.reward + hp.gamma() * table.v(entry.next) - table.get_cell(entry.cell);
        }
    }

    pub fn step(&mut self, table: &mut QTable, tr: &Transition, cfg: &AgentConfig) -> Result<()> {
        self.insert(table, tr, cfg)?;
        self.update_pass(table, &cfg.hp);
        Ok(())
    }
}

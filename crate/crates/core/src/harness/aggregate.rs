use super::experiment::{ExperimentOutput, ExperimentSpec, Metric};
use crate::env::TabularMdp;
use crate::error::{Error, Result};
use crate::oracle::{instance_optimal, OracleResult};

/// Trailing running mean: `out[i]` averages `series[max(0, i+1-window)..=i]`.
pub fn smooth(series: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    let mut out = Vec::with_capacity(series.len());
    let mut sum = 0.0;
    for i in 0..series.len() {
        sum += series[i];
        if i >= window {
            sum -= series[i - window];
        }
        let n = (i + 1).min(window);
        out.push(sum / n as f64);
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct Curve {
    pub label: String,
    /// Mean over seeds per episode.
    pub mean: Vec<f64>,
    pub smoothed: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CensusRow {
    pub label: String,
    pub seed: usize,
    pub start_state: String,
    pub optimal: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CensusSummary {
    pub label: String,
    pub optimal: usize,
    pub total: usize,
}

impl CensusSummary {
    pub fn fraction(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.optimal as f64 / self.total as f64
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Aggregate {
    pub metric: Metric,
    pub curves: Vec<Curve>,
    pub census: Vec<CensusRow>,
    pub summary: Vec<CensusSummary>,
}

impl Aggregate {
    pub fn curve(&self, label: &str) -> Option<&Curve> {
        self.curves.iter().find(|c| c.label == label)
    }

    pub fn summary_for(&self, label: &str) -> Option<&CensusSummary> {
        self.summary.iter().find(|c| c.label == label)
    }
}

/// Per-agent smoothed mean curves and the optimal-instance census over every
/// final table and every non-terminal start state.
pub fn aggregate(
    output: &ExperimentOutput,
    spec: &ExperimentSpec,
    mdp: &TabularMdp,
    oracle: &OracleResult,
    state_label: impl Fn(usize) -> String,
    horizon: usize,
) -> Result<Aggregate> {
    let n_agents = spec.agents.len();
    let mut seen = vec![vec![vec![false; spec.episodes]; spec.seeds]; n_agents];
    for r in &output.records {
        if r.agent >= n_agents || r.seed >= spec.seeds || r.episode >= spec.episodes {
            return Err(Error::contract(format!(
                "record ({}, seed {}, episode {}) is outside the configured run",
                r.label, r.seed, r.episode
            )));
        }
        if std::mem::replace(&mut seen[r.agent][r.seed][r.episode], true) {
            return Err(Error::contract(format!(
                "duplicate record ({}, seed {}, episode {})",
                r.label, r.seed, r.episode
            )));
        }
    }
    let mut gaps = Vec::new();
    for (a, per_seed) in seen.iter().enumerate() {
        for (s, per_episode) in per_seed.iter().enumerate() {
            let missing = per_episode.iter().filter(|x| !**x).count();
            if missing > 0 {
                gaps.push(format!("{} seed {s}: {missing} episodes", spec.agents[a].label));
            }
        }
    }
    if !gaps.is_empty() {
        return Err(Error::contract(format!("missing records: {}", gaps.join(", "))));
    }

    // Sum in seed order so the result does not depend on record order.
    let mut by_agent = vec![vec![vec![0.0; spec.episodes]; spec.seeds]; n_agents];
    for r in &output.records {
        by_agent[r.agent][r.seed][r.episode] = r.metric(spec.metric);
    }
    let curves = by_agent
        .iter()
        .zip(&spec.agents)
        .map(|(per_seed, agent)| {
            let mean: Vec<f64> = (0..spec.episodes)
                .map(|e| per_seed.iter().map(|s| s[e]).sum::<f64>() / spec.seeds as f64)
                .collect();
            let smoothed = smooth(&mean, spec.smoothing_window);
            Curve {
                label: agent.label.clone(),
                mean,
                smoothed,
            }
        })
        .collect();

    let mut tables: Vec<_> = output.final_tables.iter().collect();
    tables.sort_by_key(|t| (t.agent, t.seed));
    let mut census = Vec::new();
    let mut summary: Vec<CensusSummary> = spec
        .agents
        .iter()
        .map(|a| CensusSummary {
            label: a.label.clone(),
            optimal: 0,
            total: 0,
        })
        .collect();
    for ft in tables {
        for start in 0..mdp.n_states() {
            let optimal = instance_optimal(&ft.table, oracle, mdp, start, horizon);
            let entry = &mut summary[ft.agent];
            entry.total += 1;
            entry.optimal += usize::from(optimal);
            census.push(CensusRow {
                label: ft.label.clone(),
                seed: ft.seed,
                start_state: state_label(start),
                optimal,
            });
        }
    }
    for s in &summary {
        if s.total != spec.seeds * mdp.n_states() {
            return Err(Error::contract(format!(
                "{}: {} final-table instances, expected {}",
                s.label,
                s.total,
                spec.seeds * mdp.n_states()
            )));
        }
    }

    Ok(Aggregate {
        metric: spec.metric,
        curves,
        census,
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn smoothing_examples() {
        assert_eq!(smooth(&[0.0, 1.0], 2), vec![0.0, 0.5]);
        assert_eq!(smooth(&[3.0, 3.0, 3.0], 2), vec![3.0, 3.0, 3.0]);
        assert_eq!(smooth(&[1.0, 5.0, -2.0], 1), vec![1.0, 5.0, -2.0]);
        assert!(smooth(&[], 5).is_empty());
        assert_eq!(smooth(&[1.0, 2.0, 3.0, 4.0], 3), vec![1.0, 1.5, 2.0, 3.0]);
    }

    fn brute_force_smooth(series: &[f64], window: usize) -> Vec<f64> {
        (0..series.len())
            .map(|i| {
                let lo = (i + 1).saturating_sub(window);
                let slice = &series[lo..=i];
                slice.iter().sum::<f64>() / slice.len() as f64
            })
            .collect()
    }

    proptest! {
        #[test]
        fn smoothing_matches_direct_means_and_stays_in_range(
            series in prop::collection::vec(-100.0f64..100.0, 0..200),
            window in 1usize..50,
        ) {
            let fast = smooth(&series, window);
            let slow = brute_force_smooth(&series, window);
            prop_assert_eq!(fast.len(), series.len());
            for (a, b) in fast.iter().zip(&slow) {
                prop_assert!((a - b).abs() < 1e-9);
            }
            if !series.is_empty() {
                let lo = series.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = series.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                for v in &fast {
                    prop_assert!(*v >= lo - 1e-9 && *v <= hi + 1e-9);
                }
            }
        }

        #[test]
        fn smoothing_commutes_with_constant_shift(
            series in prop::collection::vec(-10.0f64..10.0, 1..100),
            window in 1usize..20,
            shift in -50.0f64..50.0,
        ) {
            let shifted: Vec<f64> = series.iter().map(|x| x + shift).collect();
            let a = smooth(&shifted, window);
            let b = smooth(&series, window);
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - (y + shift)).abs() < 1e-9);
            }
        }
    }
}

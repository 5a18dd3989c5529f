//! Flat `key = value` experiment files.
//!
//! Lines starting with `#` or `;` are comments. Keys may appear once.
//! Per-algorithm settings use a prefix, e.g. `tsdt.lambda = 0.2`, and take
//! precedence over the global key of the same name.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::experiment::{AgentSpec, EnvSource, EpsilonDecay, ExperimentSpec, Metric, StartMode, DEFAULT_STEP_CAP};
use crate::agents::{AgentConfig, Algorithm};
use crate::error::{Error, Result};
use crate::table::HyperParams;

const GLOBAL_KEYS: &[&str] = &[
    "env",
    "algorithms",
    "episodes",
    "seeds",
    "base_seed",
    "window",
    "start",
    "metric",
    "step_cap",
    "initial_q",
    "epsilon_final",
    "epsilon_decay_episodes",
    "out_dir",
    "plot",
];

/// Keys accepted both globally and with an `<algorithm>.` prefix.
const AGENT_KEYS: &[&str] = &[
    "alpha",
    "gamma",
    "lambda",
    "epsilon",
    "trace_bound",
    "clear_optimistic_on_update",
    "evict_aliased_duplicates",
    "replace_siblings",
];

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub spec: ExperimentSpec,
    pub out_dir: PathBuf,
    pub plot: bool,
}

#[derive(Clone, Debug)]
struct Entry {
    value: String,
    line: usize,
}

/// Raw key/value pairs before interpretation.
#[derive(Clone, Debug, Default)]
pub struct ConfigFile {
    entries: BTreeMap<String, Entry>,
    base_dir: PathBuf,
}

impl ConfigFile {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') || trimmed.starts_with(';') {
                continue;
            }
            let (key, value) = trimmed.split_once('=').ok_or_else(|| Error::Parse {
                line,
                column: 1,
                message: format!("expected `key = value`, found `{trimmed}`"),
            })?;
            let key = key.trim().to_string();
            if key.is_empty() {
                return Err(Error::Parse {
                    line,
                    column: 1,
                    message: "empty key".into(),
                });
            }
            let entry = Entry {
                value: value.trim().to_string(),
                line,
            };
            if let Some(prev) = entries.insert(key.clone(), entry) {
                return Err(Error::config(format!(
                    "duplicate key `{key}` on lines {} and {line}",
                    prev.line
                )));
            }
        }
        Ok(Self {
            entries,
            base_dir: base_dir.to_path_buf(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new("")))
    }

    /// Sets `key`, replacing any value from the file.
    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.entries.insert(
            key.trim().to_string(),
            Entry {
                value: value.into(),
                line: 0,
            },
        );
    }

    /// Parses a `key=value` override.
    pub fn set_pair(&mut self, pair: &str) -> Result<()> {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| Error::config(format!("override `{pair}` is not key=value")))?;
        self.set(k, v.trim());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|e| e.value.as_str())
    }

    pub fn build(&self) -> Result<RunConfig> {
        let algorithms: Vec<Algorithm> = match self.get("algorithms") {
            Some(list) => list
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(Algorithm::from_str)
                .collect::<Result<_>>()?,
            None => return Err(Error::config("missing key `algorithms`")),
        };
        for (i, a) in algorithms.iter().enumerate() {
            if algorithms[..i].contains(a) {
                return Err(Error::config(format!("algorithm `{a}` listed twice")));
            }
        }

        for key in self.entries.keys() {
            let known = match key.split_once('.') {
                Some((prefix, rest)) => {
                    let alg = Algorithm::from_str(prefix)
                        .map_err(|_| Error::config(format!("unknown key `{key}`")))?;
                    if !AGENT_KEYS.contains(&rest) {
                        false
                    } else if !algorithms.contains(&alg) {
                        return Err(Error::config(format!("key `{key}` names an algorithm not in `algorithms`")));
                    } else {
                        true
                    }
                }
                None => GLOBAL_KEYS.contains(&key.as_str()) || AGENT_KEYS.contains(&key.as_str()),
            };
            if !known {
                return Err(Error::config(format!("unknown key `{key}`")));
            }
        }

        let environment = match self.get("env") {
            None => return Err(Error::config("missing key `env`")),
            Some("fig1") => EnvSource::Fig1,
            Some(path) => EnvSource::Map(self.base_dir.join(path)),
        };

        let agents = algorithms
            .iter()
            .map(|&alg| self.agent(alg))
            .collect::<Result<Vec<_>>>()?;

        let mut spec = ExperimentSpec::new(environment, agents);
        spec.episodes = self.parsed("episodes", 1)?;
        spec.seeds = self.parsed("seeds", 1)?;
        spec.base_seed = self.parsed("base_seed", 0)?;
        spec.smoothing_window = self.parsed("window", 1)?;
        spec.step_cap = self.parsed("step_cap", DEFAULT_STEP_CAP)?;
        spec.initial_q = self.parsed("initial_q", 0.0)?;
        spec.start_mode = match self.get("start").unwrap_or("uniform_random") {
            "uniform_random" => StartMode::UniformRandom,
            "fixed" => StartMode::Fixed,
            other => return Err(Error::config(format!("start: expected uniform_random or fixed, found `{other}`"))),
        };
        spec.metric = match self.get("metric").unwrap_or("suboptimality") {
            "suboptimality" => Metric::Suboptimality,
            "return" => Metric::Return,
            "steps" => Metric::Steps,
            other => return Err(Error::config(format!("metric: unknown metric `{other}`"))),
        };
        spec.epsilon_decay = match (self.get("epsilon_final"), self.get("epsilon_decay_episodes")) {
            (None, None) => None,
            (Some(_), Some(_)) => Some(EpsilonDecay {
                final_epsilon: self.parsed("epsilon_final", 0.0)?,
                episodes: self.parsed("epsilon_decay_episodes", 0)?,
            }),
            _ => {
                return Err(Error::config(
                    "epsilon_final and epsilon_decay_episodes must be given together",
                ))
            }
        };
        spec.validate()?;

        let out_dir = self.base_dir.join(self.get("out_dir").unwrap_or("out"));
        Ok(RunConfig {
            spec,
            out_dir,
            plot: self.parsed("plot", false)?,
        })
    }

    fn agent(&self, alg: Algorithm) -> Result<AgentSpec> {
        let hp = HyperParams::new(
            self.agent_parsed(alg, "alpha", 1.0)?,
            self.agent_parsed(alg, "gamma", 1.0)?,
            self.agent_parsed(alg, "lambda", 1.0)?,
            self.agent_parsed(alg, "epsilon", 0.1)?,
        )
        .map_err(|e| Error::config(format!("{alg}: {e}")))?;
        let defaults = AgentConfig::new(alg, hp);
        let trace_bound = match self.agent_value(alg, "trace_bound") {
            None | Some("none") => None,
            Some(v) => Some(parse_value::<usize>(&format!("{alg}.trace_bound"), v)?),
        };
        Ok(AgentSpec::new(AgentConfig {
            trace_bound,
            clear_optimistic_on_update: self.agent_parsed(
                alg,
                "clear_optimistic_on_update",
                defaults.clear_optimistic_on_update,
            )?,
            evict_aliased_duplicates: self.agent_parsed(
                alg,
                "evict_aliased_duplicates",
                defaults.evict_aliased_duplicates,
            )?,
            replace_siblings: self.agent_parsed(alg, "replace_siblings", defaults.replace_siblings)?,
            ..defaults
        }))
    }

    fn agent_value(&self, alg: Algorithm, key: &str) -> Option<&str> {
        self.get(&format!("{}.{key}", alg.name())).or_else(|| self.get(key))
    }

    fn agent_parsed<T: FromStr>(&self, alg: Algorithm, key: &str, default: T) -> Result<T> {
        match self.agent_value(alg, key) {
            Some(v) => parse_value(key, v),
            None => Ok(default),
        }
    }

    fn parsed<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.get(key) {
            Some(v) => parse_value(key, v),
            None => Ok(default),
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::config(format!("{key}: cannot parse `{value}`")))
}

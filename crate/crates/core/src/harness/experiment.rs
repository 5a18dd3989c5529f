use std::path::PathBuf;

use rayon::prelude::*;

use crate::agents::{agent_act, Agent, AgentConfig, Transition};
use crate::env::{fig1_mdp, Environment, GridMap, StepOutcome, TabularMdp};
use crate::error::{Error, Result};
use crate::oracle::{episode_suboptimality, value_iteration, EpisodeTrace, OracleResult, DEFAULT_MAX_ITERATIONS, DEFAULT_TOLERANCE};
use crate::rng::Rng;
use crate::table::{HyperParams, QTable, StateId};

pub const DEFAULT_STEP_CAP: usize = 100_000;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EnvSource {
    Fig1,
    Map(PathBuf),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StartMode {
    UniformRandom,
    Fixed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Metric {
    Suboptimality,
    Return,
    Steps,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Suboptimality => "suboptimality",
            Metric::Return => "return",
            Metric::Steps => "steps",
        }
    }
}

/// Linear decay of ε from the agent's starting value to `final_epsilon`
/// over `episodes` episodes, constant afterwards.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpsilonDecay {
    pub final_epsilon: f64,
    pub episodes: usize,
}

impl EpsilonDecay {
    pub fn epsilon_at(&self, start: f64, episode: usize) -> f64 {
        if self.episodes == 0 {
            return self.final_epsilon;
        }
        let frac = (episode as f64 / self.episodes as f64).min(1.0);
        start + (self.final_epsilon - start) * frac
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AgentSpec {
    pub label: String,
    pub config: AgentConfig,
}

impl AgentSpec {
    pub fn new(config: AgentConfig) -> Self {
        Self {
            label: config.algorithm.name().to_string(),
            config,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub environment: EnvSource,
    pub agents: Vec<AgentSpec>,
    pub episodes: usize,
    pub seeds: usize,
    pub base_seed: u64,
    pub smoothing_window: usize,
    pub start_mode: StartMode,
    pub metric: Metric,
    pub epsilon_decay: Option<EpsilonDecay>,
    pub step_cap: usize,
    pub initial_q: f64,
}

impl ExperimentSpec {
    pub fn new(environment: EnvSource, agents: Vec<AgentSpec>) -> Self {
        Self {
            environment,
            agents,
            episodes: 1,
            seeds: 1,
            base_seed: 0,
            smoothing_window: 1,
            start_mode: StartMode::UniformRandom,
            metric: Metric::Suboptimality,
            epsilon_decay: None,
            step_cap: DEFAULT_STEP_CAP,
            initial_q: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.agents.is_empty() {
            return Err(Error::config("at least one algorithm is required"));
        }
        for (name, v) in [
            ("episodes", self.episodes),
            ("seeds", self.seeds),
            ("window", self.smoothing_window),
            ("step_cap", self.step_cap),
        ] {
            if v == 0 {
                return Err(Error::config(format!("{name} must be at least 1")));
            }
        }
        for agent in &self.agents {
            agent.config.validate()?;
        }
        if let Some(decay) = self.epsilon_decay {
            if !(0.0..=1.0).contains(&decay.final_epsilon) {
                return Err(Error::config("epsilon_final must lie in [0, 1]"));
            }
        }
        Ok(())
    }
}

/// A loaded environment plus its oracle.
pub struct Workbench {
    pub env: Box<dyn Environment + Send>,
    pub mdp: TabularMdp,
    pub oracle: OracleResult,
    pub gamma: f64,
}

impl Workbench {
    pub fn new(env: Box<dyn Environment + Send>, gamma: f64) -> Result<Self> {
        let mdp = env.to_tabular();
        let oracle = value_iteration(&mdp, gamma, DEFAULT_TOLERANCE, DEFAULT_MAX_ITERATIONS)?;
        Ok(Self { env, mdp, oracle, gamma })
    }

    /// Oracle discount follows the first agent's γ.
    pub fn load(spec: &ExperimentSpec) -> Result<Self> {
        let gamma = spec.agents.first().map_or(1.0, |a| a.config.hp.gamma());
        Self::new(load_environment(&spec.environment)?, gamma)
    }
}

pub fn load_environment(source: &EnvSource) -> Result<Box<dyn Environment + Send>> {
    match source {
        EnvSource::Fig1 => Ok(Box::new(fig1_mdp())),
        EnvSource::Map(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            Ok(Box::new(GridMap::parse(&text)?))
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeResult {
    pub trace: EpisodeTrace,
    pub suboptimality: f64,
    pub episode_return: f64,
    pub steps: usize,
    pub truncated: bool,
}

/// One `(algorithm, seed, episode)` row.
#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub agent: usize,
    pub label: String,
    pub seed: usize,
    pub episode: usize,
    pub suboptimality: f64,
    pub episode_return: f64,
    pub steps: usize,
    pub truncated: bool,
}

impl RunRecord {
    pub fn metric(&self, metric: Metric) -> f64 {
        match metric {
            Metric::Suboptimality => self.suboptimality,
            Metric::Return => self.episode_return,
            Metric::Steps => self.steps as f64,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FinalTable {
    pub agent: usize,
    pub label: String,
    pub seed: usize,
    pub table: QTable,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExperimentOutput {
    pub records: Vec<RunRecord>,
    pub final_tables: Vec<FinalTable>,
}

fn start_state(env: &dyn Environment, mode: StartMode, rng: &mut Rng) -> Result<usize> {
    match mode {
        StartMode::UniformRandom => Ok(rng.below(env.layout().n_states())),
        StartMode::Fixed => env
            .fixed_start()
            .ok_or_else(|| Error::config("fixed start mode needs a designated start state")),
    }
}

/// Runs one episode from a start state chosen per `mode`. Each step
/// draws the action choice before the environment transition, both from
/// `rng`.
#[allow(clippy::too_many_arguments)]
pub fn run_episode(
    env: &dyn Environment,
    table: &mut QTable,
    agent: &mut Agent,
    oracle: &OracleResult,
    hp: &HyperParams,
    mode: StartMode,
    step_cap: usize,
    rng: &mut Rng,
) -> Result<EpisodeResult> {
    agent.begin_episode();
    let mut state = start_state(env, mode, rng)?;
    let mut action = agent_act(table, state, hp, rng);
    let mut trace = EpisodeTrace::new();
    let mut episode_return = 0.0;
    let before_update = agent.algorithm().selects_before_update();
    let mut truncated = false;

    loop {
        if trace.steps.len() == step_cap {
            truncated = true;
            break;
        }
        let StepOutcome { reward, next, terminal } = env.step(state, action, rng)?;
        let tr = Transition::new(state, action, reward, next);
        trace.push(tr);
        episode_return += reward;

        let next_action = if before_update {
            let a2 = next.index().map(|s2| agent_act(table, s2, hp, rng));
            agent.update(table, &tr, a2)?;
            a2
        } else {
            agent.update(table, &tr, None)?;
            next.index().map(|s2| agent_act(table, s2, hp, rng))
        };

        match (next, next_action) {
            (StateId::NonTerminal(s2), Some(a2)) => {
                state = s2;
                action = a2;
            }
            _ => {
                trace.terminal = terminal;
                break;
            }
        }
    }

    let suboptimality = episode_suboptimality(&trace, oracle)?;
    let steps = trace.steps.len();
    Ok(EpisodeResult {
        trace,
        suboptimality,
        episode_return,
        steps,
        truncated,
    })
}

struct RunOutput {
    records: Vec<RunRecord>,
    table: QTable,
}

fn run_one(bench: &Workbench, spec: &ExperimentSpec, agent_index: usize, seed: usize) -> Result<RunOutput> {
    let agent_spec = &spec.agents[agent_index];
    let mut rng = Rng::derive(spec.base_seed, &[agent_index as u64, seed as u64]);
    let mut table = QTable::with_initial(bench.env.layout().clone(), spec.initial_q);
    let mut agent = Agent::new(agent_spec.config)?;
    let base_hp = agent_spec.config.hp;
    let mut records = Vec::with_capacity(spec.episodes);
    for episode in 0..spec.episodes {
        let hp = match spec.epsilon_decay {
            Some(decay) => base_hp.with_epsilon(decay.epsilon_at(base_hp.epsilon(), episode))?,
            None => base_hp,
        };
        let result = run_episode(
            bench.env.as_ref(),
            &mut table,
            &mut agent,
            &bench.oracle,
            &hp,
            spec.start_mode,
            spec.step_cap,
            &mut rng,
        )?;
        records.push(RunRecord {
            agent: agent_index,
            label: agent_spec.label.clone(),
            seed,
            episode,
            suboptimality: result.suboptimality,
            episode_return: result.episode_return,
            steps: result.steps,
            truncated: result.truncated,
        });
    }
    Ok(RunOutput { records, table })
}

/// Runs every `(agent, seed)` pair on a fresh table. Runs execute in
/// parallel; results are ordered by `(agent, seed, episode)` regardless.
pub fn run_experiment(spec: &ExperimentSpec, bench: &Workbench, threads: Option<usize>) -> Result<ExperimentOutput> {
    spec.validate()?;
    let jobs: Vec<(usize, usize)> = (0..spec.agents.len())
        .flat_map(|a| (0..spec.seeds).map(move |s| (a, s)))
        .collect();
    let work = || -> Result<Vec<RunOutput>> {
        jobs.par_iter()
            .map(|&(agent, seed)| run_one(bench, spec, agent, seed))
            .collect()
    };
    let runs = match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::config(format!("thread pool: {e}")))?
            .install(work)?,
        None => work()?,
    };

    let mut out = ExperimentOutput::default();
    for ((agent, seed), run) in jobs.into_iter().zip(runs) {
        out.records.extend(run.records);
        out.final_tables.push(FinalTable {
            agent,
            label: spec.agents[agent].label.clone(),
            seed,
            table: run.table,
        });
    }
    Ok(out)
}

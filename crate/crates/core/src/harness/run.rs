//! Experiment configuration, result schema and the single `run` entry point
//! behind every CLI subcommand.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::baselines::{mdqn_train, utilitarian_train};
use super::evaluate::{evaluate_policy, EvaluationReport};
use super::pareto::{default_scalings, pareto_sweep, ParetoPoint};
use crate::agent::{train, write_metrics_csv, AgentConfig, EpisodeRecord};
use crate::env::{four_room_env, one_state_env_with_gamma, random_momdp, EpisodicEnv, FourRoomConfig, ONE_STATE_GAMMA};
use crate::error::{Error, Result};
use crate::lp::{build_p0_lp, export_lp, maxmin_exact};
use crate::momdp::{policy_return_vector, StochasticPolicy, TabularMOMDP};
use crate::solvers::{minimize_exact, CuttingPlaneOptions, Objective};
use crate::weights::{write_trajectory_csv, TrajectoryRow};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    SolveExact,
    SolveLp,
    Train,
    Evaluate,
    ParetoSweep,
    Ablate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    #[default]
    Proposed,
    Utilitarian,
    Mdqn,
}

fn default_one_state_gamma() -> f64 {
    ONE_STATE_GAMMA
}
fn default_long_horizon() -> usize {
    1000
}
fn default_horizon() -> usize {
    200
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvSpec {
    OneState {
        #[serde(default = "default_one_state_gamma")]
        gamma: f64,
        #[serde(default = "default_long_horizon")]
        max_episode_steps: usize,
    },
    FourRoom(FourRoomConfig),
    Random {
        seed: u64,
        num_states: usize,
        num_actions: usize,
        num_objectives: usize,
        gamma: f64,
        #[serde(default = "default_horizon")]
        max_episode_steps: usize,
    },
    /// Model JSON on disk; relative paths resolve against the config file.
    File {
        path: PathBuf,
        #[serde(default = "default_horizon")]
        max_episode_steps: usize,
        #[serde(default)]
        terminal_states: Vec<usize>,
    },
}

impl EnvSpec {
    pub fn build(&self, base_dir: Option<&Path>) -> Result<EpisodicEnv> {
        match self {
            EnvSpec::OneState { gamma, max_episode_steps } => EpisodicEnv::new(one_state_env_with_gamma(*gamma), *max_episode_steps, &[]),
            EnvSpec::FourRoom(cfg) => four_room_env(cfg),
            EnvSpec::Random {
                seed,
                num_states,
                num_actions,
                num_objectives,
                gamma,
                max_episode_steps,
            } => EpisodicEnv::new(
                random_momdp(*seed, *num_states, *num_actions, *num_objectives, *gamma)?,
                *max_episode_steps,
                &[],
            ),
            EnvSpec::File {
                path,
                max_episode_steps,
                terminal_states,
            } => {
                let full = match base_dir {
                    Some(dir) if path.is_relative() => dir.join(path),
                    _ => path.clone(),
                };
                let text = std::fs::read_to_string(&full).map_err(|e| Error::Io(format!("{}: {e}", full.display())))?;
                EpisodicEnv::new(TabularMOMDP::from_json(&text)?, *max_episode_steps, terminal_states)
            }
        }
    }

    pub fn describe(&self) -> String {
        match self {
            EnvSpec::OneState { gamma, .. } => format!("one_state(gamma={gamma})"),
            EnvSpec::FourRoom(cfg) => format!("four_room(items={}, gamma={})", cfg.items.len(), cfg.gamma),
            EnvSpec::Random {
                seed,
                num_states,
                num_actions,
                num_objectives,
                gamma,
                ..
            } => {
                format!("random(seed={seed}, p={num_states}, q={num_actions}, K={num_objectives}, gamma={gamma})")
            }
            EnvSpec::File { path, .. } => format!("file({})", path.display()),
        }
    }

    /// Hyperparameters a run starts from before `agent` overrides.
    pub fn base_agent_config(&self) -> AgentConfig {
        match self {
            EnvSpec::FourRoom(_) => AgentConfig::four_room(),
            _ => AgentConfig::default(),
        }
    }
}

/// Policy to score in an `evaluate` run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicySource {
    Uniform,
    /// The occupancy-LP max-min policy.
    LpOptimal,
    /// Row-stochastic table `[p][q]`.
    Table(Vec<Vec<f64>>),
}

fn default_seeds() -> Vec<u64> {
    vec![0, 1, 2, 3, 4]
}
fn default_eval_episodes() -> usize {
    200
}
fn default_ablation_samples() -> Vec<usize> {
    vec![5, 20]
}
fn default_slack() -> f64 {
    1e-9
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: ExperimentKind,
    pub env: EnvSpec,
    #[serde(default)]
    pub algorithm: Algorithm,
    /// Overrides applied on top of the environment's base agent settings.
    #[serde(default)]
    pub agent: serde_json::Map<String, Value>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_eval_episodes")]
    pub eval_episodes: usize,
    /// Temperature for the soft problem in `solve-exact`.
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub policy: Option<PolicySource>,
    #[serde(default)]
    pub scalings: Option<Vec<Vec<f64>>>,
    #[serde(default = "default_ablation_samples")]
    pub ablation_samples: Vec<usize>,
    #[serde(default = "default_slack")]
    pub pareto_slack: f64,
}

impl RunConfig {
    pub fn new(experiment: ExperimentKind, env: EnvSpec) -> Self {
        Self {
            experiment,
            env,
            algorithm: Algorithm::default(),
            agent: Default::default(),
            seeds: default_seeds(),
            eval_episodes: default_eval_episodes(),
            alpha: None,
            policy: None,
            scalings: None,
            ablation_samples: default_ablation_samples(),
            pareto_slack: default_slack(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Base settings for the environment with `agent` overrides merged in.
    pub fn agent_config(&self) -> Result<AgentConfig> {
        let mut base = serde_json::to_value(self.env.base_agent_config())?;
        let obj = base.as_object_mut().expect("struct serializes to an object");
        for (k, v) in &self.agent {
            if !obj.contains_key(k) {
                return Err(Error::Config(format!("unknown agent setting {k:?}")));
            }
            obj.insert(k.clone(), v.clone());
        }
        serde_json::from_value(base).map_err(|e| Error::Config(format!("agent settings: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if self.eval_episodes == 0 {
            return Err(Error::Config("eval_episodes must be positive".into()));
        }
        self.agent_config()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub evaluation: EvaluationReport,
    pub weights: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmResult {
    pub name: String,
    pub per_objective_mean: Vec<f64>,
    pub per_objective_stderr: Vec<f64>,
    pub min_return: f64,
    pub per_seed: Vec<SeedSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactSummary {
    pub lp_value: Option<f64>,
    pub lp_weights: Option<Vec<f64>>,
    /// Minimizer of the hard scalarized objective.
    pub hard_value: Option<f64>,
    pub hard_weights: Option<Vec<f64>>,
    /// Minimizer of the soft objective, when a temperature was given.
    pub soft_value: Option<f64>,
    pub soft_weights: Option<Vec<f64>>,
}

/// Deterministic result document: no wall-clock fields, so identical
/// configs and seeds serialize to identical bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub schema_version: u32,
    /// The configuration that produced this result, after seed overrides.
    pub config: RunConfig,
    pub experiment: ExperimentKind,
    pub algorithm: Option<Algorithm>,
    pub environment: String,
    pub seeds: Vec<u64>,
    /// Mean over seeds of the per-seed evaluation means (or exact returns
    /// for solver runs).
    pub per_objective_mean: Vec<f64>,
    /// Standard error across seeds.
    pub per_objective_stderr: Vec<f64>,
    /// `min_k per_objective_mean[k]`.
    pub min_return: f64,
    pub learned_weights: Vec<Vec<f64>>,
    pub per_seed: Vec<SeedSummary>,
    pub exact: Option<ExactSummary>,
    pub arms: Vec<ArmResult>,
    pub pareto: Vec<ParetoPoint>,
}

/// A named file produced by a run, written next to `result.json`.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub result: RunResult,
    pub artifacts: Vec<Artifact>,
    pub elapsed_seconds: f64,
}

impl RunOutcome {
    /// Writes `result.json`, `timing.json` and all artifacts into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("result.json"), serde_json::to_string_pretty(&self.result)? + "\n")?;
        let timing = serde_json::json!({ "elapsed_seconds": self.elapsed_seconds });
        std::fs::write(dir.join("timing.json"), serde_json::to_string_pretty(&timing)? + "\n")?;
        for a in &self.artifacts {
            std::fs::write(dir.join(&a.name), &a.contents)?;
        }
        Ok(())
    }
}

fn mean_and_stderr(rows: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let k = rows.first().map_or(0, |r| r.len());
    let n = rows.len() as f64;
    let mean: Vec<f64> = (0..k).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect();
    let stderr = (0..k)
        .map(|j| {
            if rows.len() < 2 {
                return 0.0;
            }
            let var = rows.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        })
        .collect();
    (mean, stderr)
}

fn min_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::INFINITY, f64::min)
}

struct SeedRun {
    summary: SeedSummary,
    episodes: Vec<EpisodeRecord>,
    trajectory: Vec<TrajectoryRow>,
    policy: StochasticPolicy,
}

fn train_one(env: &EpisodicEnv, algorithm: Algorithm, cfg: &AgentConfig, eval_episodes: usize) -> Result<SeedRun> {
    let seed = cfg.seed;
    let (policy, episodes, trajectory, weights) = match algorithm {
        Algorithm::Proposed => {
            let out = train(env, cfg)?;
            (out.policy, out.episodes, out.trajectory, Some(out.weights.into_vec()))
        }
        Algorithm::Utilitarian => {
            let out = utilitarian_train(env, cfg)?;
            (out.policy, out.episodes, Vec::new(), None)
        }
        Algorithm::Mdqn => {
            let (out, _) = mdqn_train(env, cfg)?;
            (out.policy, out.episodes, Vec::new(), None)
        }
    };
    let gamma = cfg.gamma.unwrap_or(env.model().gamma());
    let evaluation = evaluate_policy(env, &policy, eval_episodes, gamma, seed).map_err(|e| e.in_phase("evaluate", Some(seed)))?;
    Ok(SeedRun {
        summary: SeedSummary { seed, evaluation, weights },
        episodes,
        trajectory,
        policy,
    })
}

fn train_seeds(env: &EpisodicEnv, algorithm: Algorithm, base: &AgentConfig, seeds: &[u64], eval_episodes: usize) -> Result<Vec<SeedRun>> {
    seeds
        .par_iter()
        .map(|&seed| {
            let cfg = AgentConfig { seed, ..base.clone() };
            train_one(env, algorithm, &cfg, eval_episodes).map_err(|e| e.in_phase("train", Some(seed)))
        })
        .collect()
}

fn aggregate(name: &str, runs: &[SeedRun]) -> ArmResult {
    let means: Vec<Vec<f64>> = runs.iter().map(|r| r.summary.evaluation.mean.clone()).collect();
    let (mean, stderr) = mean_and_stderr(&means);
    ArmResult {
        name: name.to_string(),
        min_return: min_of(&mean),
        per_objective_mean: mean,
        per_objective_stderr: stderr,
        per_seed: runs.iter().map(|r| r.summary.clone()).collect(),
    }
}

fn empty_result(cfg: &RunConfig) -> RunResult {
    RunResult {
        schema_version: SCHEMA_VERSION,
        config: cfg.clone(),
        experiment: cfg.experiment,
        algorithm: None,
        environment: cfg.env.describe(),
        seeds: cfg.seeds.clone(),
        per_objective_mean: Vec::new(),
        per_objective_stderr: Vec::new(),
        min_return: f64::NAN,
        learned_weights: Vec::new(),
        per_seed: Vec::new(),
        exact: None,
        arms: Vec::new(),
        pareto: Vec::new(),
    }
}

fn csv_artifact(name: String, write: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<Artifact> {
    let mut buf = Vec::new();
    write(&mut buf)?;
    Ok(Artifact {
        name,
        contents: String::from_utf8(buf).expect("csv output is utf-8"),
    })
}

fn policy_artifact(name: String, policy: &StochasticPolicy) -> Result<Artifact> {
    let rows: Vec<&[f64]> = (0..policy.num_states()).map(|s| policy.row(s)).collect();
    Ok(Artifact {
        name,
        contents: serde_json::to_string(&rows)? + "\n",
    })
}

/// Executes one experiment. `base_dir` resolves relative model paths.
pub fn run(cfg: &RunConfig, base_dir: Option<&Path>) -> Result<RunOutcome> {
    let start = Instant::now();
    cfg.validate()?;
    let env = cfg.env.build(base_dir).map_err(|e| e.in_phase("build environment", None))?;
    let model = env.model();
    let mut result = empty_result(cfg);
    let mut artifacts = Vec::new();
    match cfg.experiment {
        ExperimentKind::SolveLp => {
            let sol = maxmin_exact(model).map_err(|e| e.in_phase("solve lp", None))?;
            result.per_objective_mean = policy_return_vector(model, &sol.policy)?.0;
            result.per_objective_stderr = vec![0.0; model.num_objectives()];
            result.min_return = sol.value;
            result.exact = Some(ExactSummary {
                lp_value: Some(sol.value),
                lp_weights: Some(sol.weights.clone()),
                hard_value: None,
                hard_weights: None,
                soft_value: None,
                soft_weights: None,
            });
            artifacts.push(Artifact {
                name: "lp.txt".into(),
                contents: export_lp(&build_p0_lp(model)),
            });
            artifacts.push(policy_artifact("policy.json".into(), &sol.policy)?);
            artifacts.push(Artifact {
                name: "occupancy.json".into(),
                contents: serde_json::to_string(&sol.occupancy)? + "\n",
            });
        }
        ExperimentKind::SolveExact => {
            let opts = CuttingPlaneOptions::default();
            let hard = minimize_exact(model, Objective::Hard, opts).map_err(|e| e.in_phase("solve exact", None))?;
            let mut summary = ExactSummary {
                lp_value: None,
                lp_weights: None,
                hard_value: Some(hard.value),
                hard_weights: Some(hard.weights.to_vec()),
                soft_value: None,
                soft_weights: None,
            };
            let mut policy = hard.policy.clone();
            if let Some(alpha) = cfg.alpha {
                let soft = minimize_exact(model, Objective::Soft { alpha }, opts).map_err(|e| e.in_phase("solve exact (soft)", None))?;
                summary.soft_value = Some(soft.value);
                summary.soft_weights = Some(soft.weights.to_vec());
                policy = soft.policy;
            }
            result.per_objective_mean = policy_return_vector(model, &policy)?.0;
            result.per_objective_stderr = vec![0.0; model.num_objectives()];
            result.min_return = min_of(&result.per_objective_mean);
            result.exact = Some(summary);
            artifacts.push(policy_artifact("policy.json".into(), &policy)?);
        }
        ExperimentKind::Train => {
            let agent = cfg.agent_config()?;
            let runs = train_seeds(&env, cfg.algorithm, &agent, &cfg.seeds, cfg.eval_episodes)?;
            let arm = aggregate("train", &runs);
            result.algorithm = Some(cfg.algorithm);
            result.per_objective_mean = arm.per_objective_mean;
            result.per_objective_stderr = arm.per_objective_stderr;
            result.min_return = arm.min_return;
            result.learned_weights = runs.iter().filter_map(|r| r.summary.weights.clone()).collect();
            result.per_seed = arm.per_seed;
            for r in &runs {
                let seed = r.summary.seed;
                artifacts.push(csv_artifact(format!("metrics_seed{seed}.csv"), |b| {
                    write_metrics_csv(&r.episodes, b)
                })?);
                if !r.trajectory.is_empty() {
                    artifacts.push(csv_artifact(format!("trajectory_seed{seed}.csv"), |b| {
                        write_trajectory_csv(&r.trajectory, b)
                    })?);
                }
                artifacts.push(policy_artifact(format!("policy_seed{seed}.json"), &r.policy)?);
            }
        }
        ExperimentKind::Evaluate => {
            let policy = match cfg.policy.as_ref().unwrap_or(&PolicySource::LpOptimal) {
                PolicySource::Uniform => StochasticPolicy::uniform(model.num_states(), model.num_actions()),
                PolicySource::LpOptimal => maxmin_exact(model)?.policy,
                PolicySource::Table(rows) => {
                    if rows.len() != model.num_states() {
                        return Err(Error::Dimension(format!(
                            "policy has {} rows, model has {} states",
                            rows.len(),
                            model.num_states()
                        )));
                    }
                    StochasticPolicy::new(model.num_states(), model.num_actions(), rows.concat())?
                }
            };
            let reports = cfg
                .seeds
                .iter()
                .map(|&seed| {
                    evaluate_policy(&env, &policy, cfg.eval_episodes, model.gamma(), seed)
                        .map(|evaluation| SeedSummary {
                            seed,
                            evaluation,
                            weights: None,
                        })
                        .map_err(|e| e.in_phase("evaluate", Some(seed)))
                })
                .collect::<Result<Vec<_>>>()?;
            let (mean, stderr) = mean_and_stderr(&reports.iter().map(|r| r.evaluation.mean.clone()).collect::<Vec<_>>());
            result.min_return = min_of(&mean);
            result.per_objective_mean = mean;
            result.per_objective_stderr = stderr;
            result.per_seed = reports;
        }
        ExperimentKind::ParetoSweep => {
            let scalings = cfg.scalings.clone().unwrap_or_else(|| default_scalings(model.num_objectives()));
            let points = pareto_sweep(model, &scalings, cfg.pareto_slack).map_err(|e| e.in_phase("pareto sweep", None))?;
            if let Some(first) = points.first() {
                result.per_objective_mean = first.returns.clone();
                result.per_objective_stderr = vec![0.0; first.returns.len()];
                result.min_return = min_of(&first.returns);
            }
            result.pareto = points;
        }
        ExperimentKind::Ablate => {
            let agent = cfg.agent_config()?;
            let mut arms = vec![(
                "fixed_weights".to_string(),
                AgentConfig {
                    weight_learning: false,
                    ..agent.clone()
                },
            )];
            for &n in &cfg.ablation_samples {
                arms.push((
                    format!("samples_{n}"),
                    AgentConfig {
                        num_samples: n,
                        ..agent.clone()
                    },
                ));
            }
            result.algorithm = Some(Algorithm::Proposed);
            for (name, arm_cfg) in arms {
                let runs = train_seeds(&env, Algorithm::Proposed, &arm_cfg, &cfg.seeds, cfg.eval_episodes)
                    .map_err(|e| e.in_phase(&format!("ablation arm {name}"), None))?;
                result.arms.push(aggregate(&name, &runs));
            }
            // Headline figures are those of the last (full-method) arm.
            let last = result.arms.last().expect("fixed-weight arm always runs");
            result.per_objective_mean = last.per_objective_mean.clone();
            result.per_objective_stderr = last.per_objective_stderr.clone();
            result.min_return = last.min_return;
        }
    }
    Ok(RunOutcome {
        result,
        artifacts,
        elapsed_seconds: start.elapsed().as_secs_f64(),
    })
}

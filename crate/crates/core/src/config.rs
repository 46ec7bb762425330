//! JSON experiment configuration.
//!
//! Coalition keys are sorted, comma-separated, 1-based agent indices
//! (`"1,2,4"`). Matrices are row-major. Coalitions that are not listed are
//! worth 0.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{EngineConfig, EngineError, InnovationRule, StepSchedule};
use crate::game::{Coalition, TuGame};
use crate::network::{GraphSchedule, ScheduleRule, WeightMatrix};
use crate::polytope::OperatorConfig;
use crate::state::StackedState;

/// The bundled four-agent experiment.
pub const FOUR_AGENT_JSON: &str = include_str!("../examples/four_agent.json");

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    /// Malformed document or a value that cannot describe a model.
    #[error("at `{path}`: {message}")]
    Parse { path: String, message: String },
}

impl ConfigError {
    fn at(path: impl Into<String>, message: impl ToString) -> Self {
        ConfigError::Parse {
            path: path.into(),
            message: message.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameSpec {
    pub n_agents: usize,
    pub values: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleSpec {
    Periodic { order: Vec<usize> },
    /// `script` once, then `tail` forever.
    Scripted { script: Vec<usize>, tail: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphsSpec {
    pub matrices: Vec<Vec<Vec<f64>>>,
    pub schedule: ScheduleSpec,
    /// Claimed lower bound on the positive entries; defaults to the smallest
    /// positive entry of the family.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum StepSpec {
    Fixed { alpha: f64 },
    Harmonic,
    Power { c: f64, p: f64 },
}

impl From<StepSpec> for StepSchedule {
    fn from(s: StepSpec) -> Self {
        match s {
            StepSpec::Fixed { alpha } => StepSchedule::Fixed(alpha),
            StepSpec::Harmonic => StepSchedule::Harmonic,
            StepSpec::Power { c, p } => StepSchedule::Power { c, p },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    /// Block `i` is `v(I)·e_i`.
    SelfAllocation,
    Blocks { blocks: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum InnovationSpec {
    #[default]
    Operator,
    General { perp_scale: f64, minus_scale: f64 },
}

impl From<InnovationSpec> for InnovationRule {
    fn from(s: InnovationSpec) -> Self {
        match s {
            InnovationSpec::Operator => InnovationRule::Operator,
            InnovationSpec::General {
                perp_scale,
                minus_scale,
            } => InnovationRule::General {
                perp_scale,
                minus_scale,
            },
        }
    }
}

fn default_max_iters() -> usize {
    1000
}

fn default_stop_tol() -> f64 {
    1e-6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub game: GameSpec,
    pub graphs: GraphsSpec,
    pub beta: f64,
    pub steps: StepSpec,
    pub initial: InitialSpec,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_stop_tol")]
    pub stop_tol: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub innovation: InnovationSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub innovation_bound: Option<f64>,
}

impl ExperimentConfig {
    /// Parses a document; errors carry the JSON path of the offending value.
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            ConfigError::at(path, e.into_inner())
        })?;
        cfg.check_shapes()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn four_agent() -> Self {
        Self::from_json(FOUR_AGENT_JSON).expect("bundled config parses")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Structural checks that do not depend on any modelling assumption.
    fn check_shapes(&self) -> Result<(), ConfigError> {
        self.game()?;
        self.schedule()?;
        Ok(())
    }

    pub fn game(&self) -> Result<TuGame, ConfigError> {
        let mut values = BTreeMap::new();
        for (key, &v) in &self.game.values {
            let c = Coalition::parse_key(key)
                .map_err(|e| ConfigError::at(format!("game.values.{key}"), e))?;
            values.insert(c, v);
        }
        TuGame::new(self.game.n_agents, values).map_err(|e| ConfigError::at("game", e))
    }

    pub fn schedule(&self) -> Result<GraphSchedule, ConfigError> {
        let family = self
            .graphs
            .matrices
            .iter()
            .enumerate()
            .map(|(i, m)| {
                WeightMatrix::from_rows(m.clone())
                    .map_err(|e| ConfigError::at(format!("graphs.matrices[{i}]"), e))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let rule = match &self.graphs.schedule {
            ScheduleSpec::Periodic { order } => ScheduleRule::periodic(order.clone()),
            ScheduleSpec::Scripted { script, tail } => {
                ScheduleRule::scripted(script.clone(), tail.clone())
            }
        };
        GraphSchedule::new(family, rule).map_err(|e| ConfigError::at("graphs", e))
    }

    pub fn step_schedule(&self) -> StepSchedule {
        self.steps.into()
    }

    pub fn operator(&self) -> Result<OperatorConfig, EngineError> {
        Ok(OperatorConfig::new(self.beta)?)
    }

    /// Engine settings; fails when β or the step schedule is inadmissible.
    pub fn engine_config(&self) -> Result<EngineConfig, EngineError> {
        let cfg = EngineConfig {
            operator: self.operator()?,
            steps: self.step_schedule(),
            max_iters: self.max_iters,
            stop_tol: self.stop_tol,
            innovation_bound: self.innovation_bound,
            innovation: self.innovation.into(),
            seed: self.seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// `w(0)`; `None` when explicit blocks do not form an `N × N` state.
    pub fn initial_state(&self, game: &TuGame) -> Option<StackedState> {
        let n = game.n_agents();
        match &self.initial {
            InitialSpec::SelfAllocation => Some(StackedState::self_allocation(n, game.grand_value())),
            InitialSpec::Blocks { blocks } => StackedState::from_blocks(blocks.clone())
                .ok()
                .filter(|w| w.n_agents() == n),
        }
    }
}

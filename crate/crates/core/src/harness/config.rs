//! TOML experiment files.
//!
//! ```toml
//! [env]          # MecConfig, defaults are preset A
//! [experiment]   # methods, slots, reps, seed
//! [bo]           # BoParams shared by the GP methods, with [bo.kernel] and [bo.acquisition]
//! [tvbo]         # rho
//! [ctx_tvbo]     # rho, l_s, learn_l_s
//! [mab]          # gamma, levels
//! [bco]          # gamma, delta, step, baseline, baseline_decay
//! ```
//!
//! Unknown keys are rejected everywhere.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::{BcoParams, MabParams};
use crate::error::{Error, Result};
use crate::mec_env::MecConfig;

use super::agent::{BoParams, RewardTransform};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Tvbo,
    CtxTvbo,
    TiBo,
    Mab,
    Bco,
    /// Plays the per-slot optimum; a self-check of the regret bookkeeping.
    Oracle,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Tvbo,
        Method::CtxTvbo,
        Method::TiBo,
        Method::Mab,
        Method::Bco,
        Method::Oracle,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Tvbo => "tvbo",
            Method::CtxTvbo => "ctx-tvbo",
            Method::TiBo => "ti-bo",
            Method::Mab => "mab",
            Method::Bco => "bco",
            Method::Oracle => "oracle",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown method `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TvboParams {
    pub rho: f64,
}

impl Default for TvboParams {
    fn default() -> Self {
        Self { rho: 0.048 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CtxTvboParams {
    pub rho: f64,
    pub l_s: f64,
    pub learn_l_s: bool,
}

impl Default for CtxTvboParams {
    fn default() -> Self {
        Self {
            rho: 0.02,
            l_s: 0.2,
            learn_l_s: false,
        }
    }
}

/// Hyperparameters of every method; only the chosen method's block is read.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MethodParams {
    pub bo: BoParams,
    pub tvbo: TvboParams,
    pub ctx_tvbo: CtxTvboParams,
    pub mab: MabParams,
    pub bco: BcoParams,
    pub reward_transform: RewardTransform,
    pub action_floor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    pub methods: Vec<Method>,
    pub slots: u32,
    pub reps: u32,
    pub seed: u64,
    /// Applied to rewards before any learning agent sees them.
    pub reward_transform: RewardTransform,
    /// Lowest normalized power and frequency the continuous learners may
    /// play; the MAB grid starts at `1 / levels`.
    pub action_floor: f64,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            methods: vec![Method::Tvbo, Method::CtxTvbo, Method::TiBo, Method::Mab, Method::Bco],
            slots: 200,
            reps: 100,
            seed: 0,
            reward_transform: RewardTransform::default(),
            action_floor: 0.2,
        }
    }
}

/// A whole config file.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub env: MecConfig,
    pub experiment: ExperimentSection,
    pub bo: BoParams,
    pub tvbo: TvboParams,
    pub ctx_tvbo: CtxTvboParams,
    pub mab: MabParams,
    pub bco: BcoParams,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.env.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// One spec per configured method.
    pub fn specs(&self) -> Vec<ExperimentSpec> {
        self.experiment
            .methods
            .iter()
            .map(|&m| self.spec(m))
            .collect()
    }

    pub fn params(&self) -> MethodParams {
        MethodParams {
            bo: self.bo.clone(),
            tvbo: self.tvbo.clone(),
            ctx_tvbo: self.ctx_tvbo.clone(),
            mab: self.mab.clone(),
            bco: self.bco.clone(),
            reward_transform: self.experiment.reward_transform,
            action_floor: self.experiment.action_floor,
        }
    }

    pub fn spec(&self, method: Method) -> ExperimentSpec {
        ExperimentSpec {
            env: self.env.clone(),
            method,
            label: method.as_str().to_string(),
            params: self.params(),
            slots: self.experiment.slots,
            reps: self.experiment.reps,
            seed: self.experiment.seed,
        }
    }
}

/// Everything a run depends on. Output is a pure function of this value.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub env: MecConfig,
    pub method: Method,
    /// Written to the `method` column; defaults to the method name.
    pub label: String,
    pub params: MethodParams,
    pub slots: u32,
    pub reps: u32,
    pub seed: u64,
}

impl ExperimentSpec {
    pub fn new(env: MecConfig, method: Method) -> Self {
        ExperimentConfig {
            env,
            ..Default::default()
        }
        .spec(method)
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        if self.slots == 0 {
            return Err(Error::Config("slots must be >= 1".into()));
        }
        if self.reps == 0 {
            return Err(Error::Config("reps must be >= 1".into()));
        }
        Ok(())
    }

    /// Seed of repetition `rep`.
    pub fn rep_seed(&self, rep: u32) -> u64 {
        self.seed.wrapping_add(rep as u64)
    }
}

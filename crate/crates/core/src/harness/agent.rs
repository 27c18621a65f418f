//! The per-slot agent interface and the (contextual) time-varying BO agent.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::acquisition::{maximize_ucb, AcquisitionOptions};
use crate::bandit::Exp3Bank;
use crate::error::Result;
use crate::gp::{FitOptions, GpModel};
use crate::kernels::{KernelConfig, MixedPoint};
use crate::mec_env::{Decision, MecConfig};

use super::streams::{stream_rng, Stream};

/// A decision maker that sees only its own rewards (and, when it asks for
/// it, the per-slot task context).
pub trait Agent: Send {
    fn name(&self) -> &str;

    /// Whether the harness should pass the observed context to `decide`.
    fn uses_context(&self) -> bool {
        false
    }

    /// Decision for slot `t` (1-based). `context` is `(I¹…I^M, L¹…L^M)` in
    /// bits and cycles when [`Agent::uses_context`] is true.
    fn decide(&mut self, t: u32, context: Option<&[f64]>) -> Result<Decision>;

    /// Reward observed after deploying the last decision.
    fn observe(&mut self, decision: &Decision, y: f64) -> Result<()>;

    /// Hyperparameter refits that failed and kept the previous values.
    fn fit_failures(&self) -> usize {
        0
    }
}

/// Monotone map applied to observed rewards before an agent learns from
/// them. Regret is always measured on the raw reward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RewardTransform {
    Identity,
    /// `sign(y) ln(1 + |y|)`. Keeps the unbounded cost blow-up near zero
    /// power or frequency from swamping the learners.
    #[default]
    SignedLog,
}

impl RewardTransform {
    pub fn apply(self, y: f64) -> f64 {
        match self {
            RewardTransform::Identity => y,
            RewardTransform::SignedLog => y.signum() * y.abs().ln_1p(),
        }
    }
}

/// Feeds transformed rewards to the wrapped agent.
pub struct Transformed<A: ?Sized> {
    pub transform: RewardTransform,
    pub inner: Box<A>,
}

impl Agent for Transformed<dyn Agent> {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn uses_context(&self) -> bool {
        self.inner.uses_context()
    }

    fn decide(&mut self, t: u32, context: Option<&[f64]>) -> Result<Decision> {
        self.inner.decide(t, context)
    }

    fn observe(&mut self, decision: &Decision, y: f64) -> Result<()> {
        self.inner.observe(decision, self.transform.apply(y))
    }

    fn fit_failures(&self) -> usize {
        self.inner.fit_failures()
    }
}

/// Affine standardization of raw contexts.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextScaling {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl ContextScaling {
    /// Center at the generation means and divide by `sigmas` standard
    /// deviations of the AR(1) innovations, in the generation units of each
    /// quantity (1e4 bytes for inputs, 1e6 cycles for workloads).
    pub fn from_env(cfg: &MecConfig, sigmas: f64) -> Self {
        let scale_units = sigmas * cfg.innovation_var.sqrt();
        let i_unit = 1e4 * 8.0;
        let l_unit = 1e6;
        let mut mean = vec![cfg.mean_i * i_unit; cfg.m];
        mean.extend(std::iter::repeat_n(cfg.mean_l * l_unit, cfg.m));
        let mut scale = vec![scale_units * i_unit; cfg.m];
        scale.extend(std::iter::repeat_n(scale_units * l_unit, cfg.m));
        Self { mean, scale }
    }

    pub fn apply(&self, raw: &[f64]) -> Vec<f64> {
        raw.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }
}

/// Settings shared by every GP-based agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoParams {
    /// EXP3 exploration coefficient for the offloading agents.
    pub gamma: f64,
    /// Refit before slot `t` when `t mod refit_every = 1`.
    pub refit_every: usize,
    pub restarts: usize,
    pub fit_max_iters: usize,
    /// Refits are skipped below this many observations.
    pub min_refit_points: usize,
    /// Uniformly random continuous decisions for the first slots.
    pub warm_start: usize,
    /// Standardize the GP targets.
    pub normalize_y: bool,
    /// Context standardization width in innovation standard deviations.
    pub context_scale: f64,
    /// Initial kernel hyperparameters; `rho`, `l_s` and the contextual flag
    /// are overridden per method.
    pub kernel: KernelConfig,
    pub acquisition: AcquisitionOptions,
}

impl Default for BoParams {
    fn default() -> Self {
        Self {
            gamma: 0.1,
            refit_every: 10,
            restarts: 5,
            fit_max_iters: 100,
            min_refit_points: 5,
            warm_start: 0,
            normalize_y: true,
            context_scale: 6.0,
            kernel: KernelConfig::default(),
            acquisition: AcquisitionOptions::default(),
        }
    }
}

/// Time-varying BO: EXP3 for the offloading vector, GP-UCB for the
/// continuous block. With a context scaling it becomes the contextual
/// variant; with `ρ = 0` and no context it is plain time-invariant BO.
pub struct BoAgent {
    name: String,
    env: MecConfig,
    params: BoParams,
    gp: GpModel,
    bank: Exp3Bank,
    context: Option<ContextScaling>,
    rng_exp3: ChaCha8Rng,
    rng_acq: ChaCha8Rng,
    rng_fit: ChaCha8Rng,
    pending: Option<(Vec<usize>, Vec<f64>, u32, Option<Vec<f64>>)>,
    fit_failures: usize,
}

impl BoAgent {
    pub fn new(
        name: impl Into<String>,
        env: &MecConfig,
        params: &BoParams,
        kernel: KernelConfig,
        seed: u64,
    ) -> Result<Self> {
        env.validate()?;
        params.acquisition.validate()?;
        let context = kernel
            .contextual
            .then(|| ContextScaling::from_env(env, params.context_scale));
        let gp = GpModel::new(kernel)?.with_output_normalization(params.normalize_y);
        Ok(Self {
            name: name.into(),
            env: env.clone(),
            params: params.clone(),
            gp,
            bank: Exp3Bank::new(env.m, env.n + 1, params.gamma)?,
            context,
            rng_exp3: stream_rng(seed, Stream::Exp3),
            rng_acq: stream_rng(seed, Stream::Acquisition),
            rng_fit: stream_rng(seed, Stream::Hyperparameters),
            pending: None,
            fit_failures: 0,
        })
    }

    pub fn model(&self) -> &GpModel {
        &self.gp
    }

    pub fn bank(&self) -> &Exp3Bank {
        &self.bank
    }

    fn maybe_refit(&mut self, t: u32) {
        let n = self.gp.len();
        let every = self.params.refit_every;
        if every == 0 || n < self.params.min_refit_points.max(1) || t as usize % every != 1 % every {
            return;
        }
        let opts = FitOptions {
            restarts: self.params.restarts,
            max_iters: self.params.fit_max_iters,
            ..Default::default()
        };
        match self.gp.fit_hyperparameters(&opts, &mut self.rng_fit) {
            Ok(r) if r.fell_back => self.fit_failures += 1,
            Ok(_) => {}
            Err(e) => {
                log::warn!("{}: refit failed at n = {n}: {e}", self.name);
                self.fit_failures += 1;
            }
        }
    }
}

impl Agent for BoAgent {
    fn name(&self) -> &str {
        &self.name
    }

    fn uses_context(&self) -> bool {
        self.context.is_some()
    }

    fn decide(&mut self, t: u32, context: Option<&[f64]>) -> Result<Decision> {
        self.maybe_refit(t);
        let s = match (&self.context, context) {
            (Some(sc), Some(raw)) => Some(sc.apply(raw)),
            (Some(_), None) => {
                return Err(crate::error::Error::ContextMismatch {
                    model: "contextual",
                    point: "non-contextual",
                })
            }
            _ => None,
        };
        let dim = 2 * self.env.m;
        let c = self.bank.sample_actions(&mut self.rng_exp3);
        let x = if self.gp.len() < self.params.warm_start {
            (0..dim)
                .map(|_| self.rng_acq.random_range(self.params.acquisition.x_floor..=1.0))
                .collect()
        } else {
            maximize_ucb(
                &self.gp,
                &c,
                t,
                s.as_deref(),
                dim,
                &self.params.acquisition,
                &mut self.rng_acq,
            )?
        };
        let d = Decision::from_normalized(&self.env, c.clone(), &x);
        self.pending = Some((c, x, t, s));
        Ok(d)
    }

    fn observe(&mut self, _decision: &Decision, y: f64) -> Result<()> {
        let (c, x, t, s) = self
            .pending
            .take()
            .expect("observe called without a preceding decide");
        self.bank.update(&c, y)?;
        let z = MixedPoint::new(c, x, t, s)?;
        if let Err(e) = self.gp.add_observation(z, y) {
            log::warn!("{}: dropping observation at slot {t}: {e}", self.name);
        }
        Ok(())
    }

    fn fit_failures(&self) -> usize {
        self.fit_failures
    }
}

use std::io::Write;

use rayon::prelude::*;

use crate::baselines::{time_invariant_bo_agent, BcoAgent, BcoParams, MabAgent};
use crate::error::{Error, Result};
use crate::kernels::KernelConfig;
use crate::mec_env::{self, Decision, MecConfig};

use super::agent::{Agent, BoAgent, RewardTransform, Transformed};
use super::config::{ExperimentSpec, Method, MethodParams};
use super::fmt_num;
use super::streams::{stream_rng, Stream};

/// One slot of one repetition.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotRecord {
    pub rep: u32,
    pub slot: u32,
    pub method: String,
    pub decision: Decision,
    /// Observed (possibly noisy) reward.
    pub y: f64,
    pub oracle_value: f64,
    /// Instantaneous regret against the noise-free reward of the decision.
    pub regret: f64,
    pub cum_regret: f64,
    pub avg_regret: f64,
    pub edc_total: f64,
    pub edc_per_wd: Vec<f64>,
}

pub const CSV_COLUMNS: [&str; 9] = [
    "rep",
    "slot",
    "method",
    "y",
    "oracle_value",
    "regret",
    "cum_regret",
    "avg_regret",
    "edc_total",
];

/// Build the agent of `method` for one repetition seed.
pub fn make_agent(
    env: &MecConfig,
    method: Method,
    params: &MethodParams,
    seed: u64,
) -> Result<Box<dyn Agent>> {
    let mut bo = params.bo.clone();
    bo.acquisition.x_floor = params.action_floor;
    let bo = &bo;
    let bco = BcoParams {
        x_floor: params.action_floor,
        ..params.bco.clone()
    };
    let inner: Box<dyn Agent> = match method {
        Method::Tvbo => {
            let kernel = KernelConfig {
                rho: params.tvbo.rho,
                contextual: false,
                ..bo.kernel
            };
            Box::new(BoAgent::new("tvbo", env, bo, kernel, seed)?)
        }
        Method::CtxTvbo => {
            let kernel = KernelConfig {
                rho: params.ctx_tvbo.rho,
                l_s: params.ctx_tvbo.l_s,
                learn_l_s: params.ctx_tvbo.learn_l_s,
                contextual: true,
                ..bo.kernel
            };
            Box::new(BoAgent::new("ctx-tvbo", env, bo, kernel, seed)?)
        }
        Method::TiBo => Box::new(time_invariant_bo_agent(env, bo, seed)?),
        Method::Mab => Box::new(MabAgent::new(env, &params.mab, seed)?),
        Method::Bco => Box::new(BcoAgent::new(env, &bco, seed)?),
        Method::Oracle => {
            return Err(Error::Config(
                "the oracle is played by the harness, not an agent".into(),
            ))
        }
    };
    Ok(match params.reward_transform {
        RewardTransform::Identity => inner,
        transform => Box::new(Transformed { transform, inner }),
    })
}

/// Play `spec.slots` slots of repetition `rep`.
///
/// The environment trajectory and the observation noise come from their
/// own streams, so every method faces the same states for a given seed.
pub fn run_repetition(spec: &ExperimentSpec, rep: u32) -> Result<Vec<SlotRecord>> {
    spec.validate()?;
    let env = &spec.env;
    let seed = spec.rep_seed(rep);
    let mut env_rng = stream_rng(seed, Stream::Environment);
    let mut noise_rng = stream_rng(seed, Stream::ObservationNoise);
    let mut agent = match spec.method {
        Method::Oracle => None,
        m => Some(make_agent(env, m, &spec.params, seed)?),
    };

    let mut out = Vec::with_capacity(spec.slots as usize);
    let mut state = mec_env::init_state(env, &mut env_rng);
    let mut cum = 0.0;
    for t in 1..=spec.slots {
        if t > 1 {
            state = mec_env::advance(env, &state, &mut env_rng);
        }
        let oracle = mec_env::oracle_optimum(env, &state)?;
        let decision = match agent.as_mut() {
            Some(a) => {
                let ctx = a.uses_context().then(|| state.context());
                a.decide(t, ctx.as_deref())?
            }
            None => oracle.decision.clone(),
        };
        decision.validate(env)?;
        let cost = mec_env::edc(env, &state, &decision)?;
        let y = mec_env::observe(env, &state, &decision, &mut noise_rng)?;
        let regret = oracle.value - cost.reward;
        cum += regret;
        if let Some(a) = agent.as_mut() {
            a.observe(&decision, y)?;
        }
        out.push(SlotRecord {
            rep,
            slot: t,
            method: spec.label.clone(),
            decision,
            y,
            oracle_value: oracle.value,
            regret,
            cum_regret: cum,
            avg_regret: cum / t as f64,
            edc_total: cost.total,
            edc_per_wd: cost.per_wd,
        });
    }
    if let Some(a) = agent.filter(|a| a.fit_failures() > 0) {
        log::info!(
            "{} rep {rep}: {} hyperparameter refits kept previous values",
            spec.label,
            a.fit_failures()
        );
    }
    Ok(out)
}

/// All repetitions, in repetition order. Repetitions run in parallel; the
/// result does not depend on the thread count.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<SlotRecord>> {
    spec.validate()?;
    let per_rep: Vec<Result<Vec<SlotRecord>>> = (0..spec.reps)
        .into_par_iter()
        .map(|rep| run_repetition(spec, rep))
        .collect();
    let mut out = Vec::with_capacity((spec.reps * spec.slots) as usize);
    for r in per_rep {
        out.extend(r?);
    }
    Ok(out)
}

pub fn write_records_csv<W: Write>(w: W, records: &[SlotRecord]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let io = |e: csv::Error| Error::Io(e.to_string());
    wr.write_record(CSV_COLUMNS).map_err(io)?;
    for r in records {
        wr.write_record([
            r.rep.to_string(),
            r.slot.to_string(),
            r.method.clone(),
            fmt_num(r.y),
            fmt_num(r.oracle_value),
            fmt_num(r.regret),
            fmt_num(r.cum_regret),
            fmt_num(r.avg_regret),
            fmt_num(r.edc_total),
        ])
        .map_err(io)?;
    }
    wr.flush()?;
    Ok(())
}

//! Comparison methods: time-invariant BO, discretized multi-agent EXP3 and
//! one-point bandit convex optimization.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::acquisition::X_FLOOR;
use crate::bandit::{Exp3Bank, RewardRange};
use crate::error::{Error, Result};
use crate::harness::agent::{Agent, BoAgent, BoParams};
use crate::harness::streams::{stream_rng, Stream};
use crate::kernels::KernelConfig;
use crate::mec_env::{Decision, MecConfig};

/// BO that ignores time and context: `ρ = 0`, no context kernel.
pub fn time_invariant_bo_agent(env: &MecConfig, params: &BoParams, seed: u64) -> Result<BoAgent> {
    let kernel = KernelConfig {
        rho: 0.0,
        contextual: false,
        ..params.kernel
    };
    BoAgent::new("ti-bo", env, params, kernel, seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MabParams {
    pub gamma: f64,
    /// Number of levels of the upper-inclusive uniform grid on `(0, peak]`.
    pub levels: usize,
}

impl Default for MabParams {
    fn default() -> Self {
        Self {
            gamma: 0.1,
            levels: 5,
        }
    }
}

/// Three EXP3 agents per device: offloading target, power level and
/// frequency level, all driven by the shared scalar reward.
pub struct MabAgent {
    env: MecConfig,
    levels: usize,
    offload: Exp3Bank,
    power: Exp3Bank,
    freq: Exp3Bank,
    rng_c: ChaCha8Rng,
    rng_p: ChaCha8Rng,
    rng_f: ChaCha8Rng,
    pending: Option<(Vec<usize>, Vec<usize>, Vec<usize>)>,
}

impl MabAgent {
    pub fn new(env: &MecConfig, params: &MabParams, seed: u64) -> Result<Self> {
        env.validate()?;
        if params.levels == 0 {
            return Err(Error::Config("mab.levels must be positive".into()));
        }
        Ok(Self {
            env: env.clone(),
            levels: params.levels,
            offload: Exp3Bank::new(env.m, env.n + 1, params.gamma)?,
            power: Exp3Bank::new(env.m, params.levels, params.gamma)?,
            freq: Exp3Bank::new(env.m, params.levels, params.gamma)?,
            rng_c: stream_rng(seed, Stream::Exp3),
            rng_p: stream_rng(seed, Stream::MabPower),
            rng_f: stream_rng(seed, Stream::MabFrequency),
            pending: None,
        })
    }

    /// Fraction of the peak for grid index `k`.
    pub fn level(&self, k: usize) -> f64 {
        (k + 1) as f64 / self.levels as f64
    }

    pub fn banks(&self) -> [&Exp3Bank; 3] {
        [&self.offload, &self.power, &self.freq]
    }
}

impl Agent for MabAgent {
    fn name(&self) -> &str {
        "mab"
    }

    fn decide(&mut self, _t: u32, _context: Option<&[f64]>) -> Result<Decision> {
        let c = self.offload.sample_actions(&mut self.rng_c);
        let pk = self.power.sample_actions(&mut self.rng_p);
        let fk = self.freq.sample_actions(&mut self.rng_f);
        let d = Decision {
            c: c.clone(),
            p: pk.iter().map(|&k| self.level(k) * self.env.p_peak_w).collect(),
            f: fk.iter().map(|&k| self.level(k) * self.env.f_peak_hz).collect(),
        };
        self.pending = Some((c, pk, fk));
        Ok(d)
    }

    fn observe(&mut self, _decision: &Decision, y: f64) -> Result<()> {
        let (c, pk, fk) = self
            .pending
            .take()
            .expect("observe called without a preceding decide");
        self.offload.update(&c, y)?;
        self.power.update(&pk, y)?;
        self.freq.update(&fk, y)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BcoParams {
    /// EXP3 exploration coefficient for the offloading agents.
    pub gamma: f64,
    /// Exploration radius in normalized coordinates.
    pub delta: f64,
    /// Gradient step size in normalized coordinates.
    pub step: f64,
    /// Subtract a running average of past normalized rewards before forming
    /// the gradient estimate.
    pub baseline: bool,
    /// Weight of the newest reward in the running average.
    pub baseline_decay: f64,
    /// Lower edge of the normalized box. Experiments set it from
    /// `experiment.action_floor`.
    #[serde(skip)]
    pub x_floor: f64,
}

impl Default for BcoParams {
    fn default() -> Self {
        Self {
            gamma: 0.1,
            delta: 0.1,
            step: 0.05,
            baseline: false,
            baseline_decay: 0.1,
            x_floor: X_FLOOR,
        }
    }
}

/// One-point gradient-free ascent on `[x_floor, 1]^d`.
///
/// Plays `x̂ + δ u` with `u` uniform on the unit sphere and moves `x̂` along
/// `(d / δ) (ŷ - b) u`, where `ŷ` is the min/max-normalized reward and `b`
/// an optional running baseline.
#[derive(Debug, Clone)]
pub struct OnePointAscent {
    params: BcoParams,
    center: Vec<f64>,
    dir: Option<Vec<f64>>,
    range: RewardRange,
    baseline: Option<f64>,
}

impl OnePointAscent {
    pub fn new(dim: usize, params: BcoParams) -> Result<Self> {
        if !(params.delta >= 0.0 && params.step >= 0.0) {
            return Err(Error::Config("bco delta and step must be >= 0".into()));
        }
        if !(params.x_floor > 0.0 && params.x_floor < 1.0) {
            return Err(Error::Config("bco x_floor must lie in (0, 1)".into()));
        }
        if !(0.0..=1.0).contains(&params.baseline_decay) {
            return Err(Error::Config("bco.baseline_decay must lie in [0, 1]".into()));
        }
        Ok(Self {
            center: vec![0.5 * (1.0 + params.x_floor); dim],
            params,
            dir: None,
            range: RewardRange::default(),
            baseline: None,
        })
    }

    pub fn with_center(mut self, center: Vec<f64>) -> Self {
        self.center = center;
        project(&mut self.center, self.params.x_floor);
        self
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn play<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Vec<f64> {
        let d = self.center.len();
        let mut u: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
        u.iter_mut().for_each(|v| *v /= norm);
        let mut x: Vec<f64> = self
            .center
            .iter()
            .zip(&u)
            .map(|(c, v)| c + self.params.delta * v)
            .collect();
        project(&mut x, self.params.x_floor);
        self.dir = Some(u);
        x
    }

    pub fn update(&mut self, y_raw: f64) -> Result<()> {
        let u = self
            .dir
            .take()
            .expect("update called without a preceding play");
        let y = self.range.normalize(y_raw)?;
        let signal = if self.params.baseline {
            let b = *self.baseline.get_or_insert(y);
            let s = y - b;
            self.baseline = Some(b + self.params.baseline_decay * (y - b));
            s
        } else {
            y
        };
        if self.params.delta > 0.0 {
            let k = self.params.step * self.center.len() as f64 / self.params.delta * signal;
            for (c, v) in self.center.iter_mut().zip(&u) {
                *c += k * v;
            }
            project(&mut self.center, self.params.x_floor);
        }
        Ok(())
    }
}

fn project(x: &mut [f64], lo: f64) {
    x.iter_mut().for_each(|v| *v = v.clamp(lo, 1.0));
}

/// EXP3 for offloading, one-point gradient ascent for the continuous block.
pub struct BcoAgent {
    env: MecConfig,
    bank: Exp3Bank,
    ascent: OnePointAscent,
    rng_c: ChaCha8Rng,
    rng_x: ChaCha8Rng,
    pending: Option<Vec<usize>>,
}

impl BcoAgent {
    pub fn new(env: &MecConfig, params: &BcoParams, seed: u64) -> Result<Self> {
        env.validate()?;
        Ok(Self {
            env: env.clone(),
            bank: Exp3Bank::new(env.m, env.n + 1, params.gamma)?,
            ascent: OnePointAscent::new(2 * env.m, params.clone())?,
            rng_c: stream_rng(seed, Stream::Exp3),
            rng_x: stream_rng(seed, Stream::Bco),
            pending: None,
        })
    }

    pub fn ascent(&self) -> &OnePointAscent {
        &self.ascent
    }
}

impl Agent for BcoAgent {
    fn name(&self) -> &str {
        "bco"
    }

    fn decide(&mut self, _t: u32, _context: Option<&[f64]>) -> Result<Decision> {
        let c = self.bank.sample_actions(&mut self.rng_c);
        let x = self.ascent.play(&mut self.rng_x);
        self.pending = Some(c.clone());
        Ok(Decision::from_normalized(&self.env, c, &x))
    }

    fn observe(&mut self, _decision: &Decision, y: f64) -> Result<()> {
        let c = self
            .pending
            .take()
            .expect("observe called without a preceding decide");
        self.bank.update(&c, y)?;
        self.ascent.update(y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn mab_emits_grid_values() {
        let env = MecConfig::default();
        let mut a = MabAgent::new(&env, &MabParams::default(), 3).unwrap();
        let grid_p: Vec<f64> = (1..=5).map(|k| k as f64 / 5.0 * env.p_peak_w).collect();
        let grid_f: Vec<f64> = (1..=5).map(|k| k as f64 / 5.0 * env.f_peak_hz).collect();
        for t in 1..200 {
            let d = a.decide(t, None).unwrap();
            d.validate(&env).unwrap();
            assert!(d.p.iter().all(|p| grid_p.contains(p)));
            assert!(d.f.iter().all(|f| grid_f.contains(f)));
            a.observe(&d, -(t as f64 % 7.0)).unwrap();
        }
    }

    #[test]
    fn constant_reward_with_baseline_keeps_center() {
        let p = BcoParams {
            baseline: true,
            ..Default::default()
        };
        let mut o = OnePointAscent::new(4, p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let x = o.play(&mut rng);
            assert!(x.iter().all(|v| *v > 0.0 && *v <= 1.0));
            o.update(0.0).unwrap();
        }
        assert_eq!(o.center(), &[0.5 * (1.0 + X_FLOOR); 4]);
    }

    #[test]
    fn bco_plays_feasible_points() {
        let env = MecConfig::default();
        let mut a = BcoAgent::new(&env, &BcoParams::default(), 8).unwrap();
        for t in 1..300 {
            let d = a.decide(t, None).unwrap();
            d.validate(&env).unwrap();
            a.observe(&d, -((t * 31 % 17) as f64)).unwrap();
        }
    }
}

//! Dynamic multi-server multi-user MEC simulator.
//!
//! Per slot the hidden state holds Rician-faded uplink channels, edge CPU
//! frequencies and task sizes driven by AR(1) residuals. Agents only ever
//! see the (optionally noisy) reward of the decision they played; the
//! clairvoyant optimum is computed here from the full state for regret.

use std::io::Write;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};

const SPEED_OF_LIGHT: f64 = 3e8;
const BITS_PER_BYTE: f64 = 8.0;
const FC_UNIT: f64 = 1e9;
const L_UNIT: f64 = 1e6;
const I_UNIT_BYTES: f64 = 1e4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MecConfig {
    /// Number of wireless devices.
    pub m: usize,
    /// Number of base stations.
    pub n: usize,
    /// Device-to-station distances in meters, `m` rows of `n` entries.
    pub distances: Vec<Vec<f64>>,
    pub rician_k: f64,
    /// AR(1) mixing of the state residuals, `0` frozen, `1` independent.
    pub eta: f64,
    pub bandwidth_hz: f64,
    pub noise_power_w: f64,
    /// Effective switched capacitance of the device CPUs.
    pub xi: f64,
    pub beta_d: f64,
    pub beta_e: f64,
    pub p_peak_w: f64,
    pub f_peak_hz: f64,
    pub antenna_gain: f64,
    pub carrier_hz: f64,
    pub path_loss_exponent: f64,
    /// Mean edge CPU frequency, GHz.
    pub mean_fc: f64,
    /// Mean workload, Mcycles.
    pub mean_l: f64,
    /// Mean input size, units of 1e4 bytes.
    pub mean_i: f64,
    /// Variance of the AR(1) innovations, in the units of the means.
    pub innovation_var: f64,
    /// Standard deviation of additive Gaussian noise on observed rewards.
    pub obs_noise_std: f64,
}

impl Default for MecConfig {
    fn default() -> Self {
        Self {
            m: 2,
            n: 2,
            distances: vec![vec![20.0, 13.0], vec![15.0, 18.0]],
            rician_k: 4.0,
            eta: 0.2,
            bandwidth_hz: 2e6,
            noise_power_w: 1e-10,
            xi: 1e-26,
            beta_d: 0.5,
            beta_e: 0.5,
            p_peak_w: 0.1,
            f_peak_hz: 1e8,
            antenna_gain: 4.11,
            carrier_hz: 915e6,
            path_loss_exponent: 3.0,
            mean_fc: 26.0,
            mean_l: 125.0,
            mean_i: 125.0,
            innovation_var: 3.0,
            obs_noise_std: 0.0,
        }
    }
}

impl MecConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.n == 0 {
            return Err(Error::Config("m and n must be positive".into()));
        }
        if self.distances.len() != self.m || self.distances.iter().any(|r| r.len() != self.n) {
            return Err(Error::Config(format!(
                "distances must be a {} x {} matrix",
                self.m, self.n
            )));
        }
        for row in &self.distances {
            for &d in row {
                ensure_positive(d, "distance")?;
            }
        }
        for (v, name) in [
            (self.bandwidth_hz, "bandwidth_hz"),
            (self.noise_power_w, "noise_power_w"),
            (self.xi, "xi"),
            (self.beta_d, "beta_d"),
            (self.beta_e, "beta_e"),
            (self.p_peak_w, "p_peak_w"),
            (self.f_peak_hz, "f_peak_hz"),
            (self.antenna_gain, "antenna_gain"),
            (self.carrier_hz, "carrier_hz"),
            (self.path_loss_exponent, "path_loss_exponent"),
            (self.mean_fc, "mean_fc"),
            (self.mean_l, "mean_l"),
            (self.mean_i, "mean_i"),
            (self.innovation_var, "innovation_var"),
        ] {
            ensure_positive(v, name)?;
        }
        if !(self.rician_k >= 0.0 && self.rician_k.is_finite()) {
            return Err(Error::Config("rician_k must be finite and >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(Error::Config("eta must lie in [0, 1]".into()));
        }
        if !(self.obs_noise_std >= 0.0 && self.obs_noise_std.is_finite()) {
            return Err(Error::Config("obs_noise_std must be finite and >= 0".into()));
        }
        Ok(())
    }

    /// Average channel power gain `A_d (c / (4π φ d))^PL`.
    pub fn average_gain(&self, m: usize, n: usize) -> f64 {
        let d = self.distances[m][n];
        self.antenna_gain
            * (SPEED_OF_LIGHT / (4.0 * std::f64::consts::PI * self.carrier_hz * d))
                .powf(self.path_loss_exponent)
    }

    /// `(P_peak · 1_M, f_peak · 1_M)`.
    pub fn x_peak(&self) -> Vec<f64> {
        let mut v = vec![self.p_peak_w; self.m];
        v.extend(std::iter::repeat_n(self.f_peak_hz, self.m));
        v
    }

    /// Local CPU frequency minimizing `β_d L/f + β_e ξ L f²` on `(0, f_peak]`.
    pub fn optimal_local_frequency(&self) -> f64 {
        (self.beta_d / (2.0 * self.beta_e * self.xi))
            .cbrt()
            .min(self.f_peak_hz)
    }

    fn innovation(&self) -> Normal<f64> {
        Normal::new(0.0, self.innovation_var.sqrt()).expect("validated variance")
    }
}

/// Hidden system state of one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct MecState {
    /// Uplink channel coefficients, `m × n` row-major.
    pub h: Vec<Complex64>,
    /// Edge CPU frequencies, Hz.
    pub f_c: Vec<f64>,
    /// Workloads, cycles.
    pub l: Vec<f64>,
    /// Input sizes, bits.
    pub i_bits: Vec<f64>,
    /// AR(1) residuals in generation units.
    pub res_fc: Vec<f64>,
    pub res_l: Vec<f64>,
    pub res_i: Vec<f64>,
    /// Fixed line-of-sight phase per device/station pair.
    pub los_phase: Vec<f64>,
}

impl MecState {
    pub fn gain(&self, n_bs: usize, m: usize, n: usize) -> f64 {
        self.h[m * n_bs + n].norm_sqr()
    }

    /// Observable task description `(I¹…I^M, L¹…L^M)` in bits and cycles.
    pub fn context(&self) -> Vec<f64> {
        let mut v = self.i_bits.clone();
        v.extend_from_slice(&self.l);
        v
    }
}

fn draw_residual<R: Rng + ?Sized>(
    prev: Option<f64>,
    mean: f64,
    eta: f64,
    dist: &Normal<f64>,
    rng: &mut R,
) -> f64 {
    loop {
        let e = dist.sample(rng);
        let r = match prev {
            None => e,
            Some(p) => (1.0 - eta).sqrt() * p + eta.sqrt() * e,
        };
        if mean + r > 0.0 {
            return r;
        }
    }
}

fn draw_channels<R: Rng + ?Sized>(cfg: &MecConfig, phases: &[f64], rng: &mut R) -> Vec<Complex64> {
    let k = cfg.rician_k;
    let los_w = (k / (k + 1.0)).sqrt();
    let nlos_w = (1.0 / (k + 1.0)).sqrt();
    let half = std::f64::consts::FRAC_1_SQRT_2;
    let mut h = Vec::with_capacity(cfg.m * cfg.n);
    for m in 0..cfg.m {
        for n in 0..cfg.n {
            let amp = cfg.average_gain(m, n).sqrt();
            let los = Complex64::from_polar(1.0, phases[m * cfg.n + n]);
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            let nlos = Complex64::new(re * half, im * half);
            h.push(amp * (los_w * los + nlos_w * nlos));
        }
    }
    h
}

fn assemble(cfg: &MecConfig, res_fc: Vec<f64>, res_l: Vec<f64>, res_i: Vec<f64>) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let f_c = res_fc.iter().map(|r| (cfg.mean_fc + r) * FC_UNIT).collect();
    let l = res_l.iter().map(|r| (cfg.mean_l + r) * L_UNIT).collect();
    let i = res_i
        .iter()
        .map(|r| (cfg.mean_i + r) * I_UNIT_BYTES * BITS_PER_BYTE)
        .collect();
    (f_c, l, i)
}

/// First slot: residuals drawn from the innovation distribution, fresh LoS
/// phases and channels.
pub fn init_state<R: Rng + ?Sized>(cfg: &MecConfig, rng: &mut R) -> MecState {
    let dist = cfg.innovation();
    let los_phase: Vec<f64> = (0..cfg.m * cfg.n)
        .map(|_| rng.random_range(0.0..std::f64::consts::TAU))
        .collect();
    let res_fc: Vec<f64> = (0..cfg.n)
        .map(|_| draw_residual(None, cfg.mean_fc, cfg.eta, &dist, rng))
        .collect();
    let res_l: Vec<f64> = (0..cfg.m)
        .map(|_| draw_residual(None, cfg.mean_l, cfg.eta, &dist, rng))
        .collect();
    let res_i: Vec<f64> = (0..cfg.m)
        .map(|_| draw_residual(None, cfg.mean_i, cfg.eta, &dist, rng))
        .collect();
    let h = draw_channels(cfg, &los_phase, rng);
    let (f_c, l, i_bits) = assemble(cfg, res_fc.clone(), res_l.clone(), res_i.clone());
    MecState {
        h,
        f_c,
        l,
        i_bits,
        res_fc,
        res_l,
        res_i,
        los_phase,
    }
}

/// One AR(1) step of the residuals and an independent channel redraw.
pub fn advance<R: Rng + ?Sized>(cfg: &MecConfig, state: &MecState, rng: &mut R) -> MecState {
    let dist = cfg.innovation();
    let step = |prev: &[f64], mean: f64, rng: &mut R| -> Vec<f64> {
        prev.iter()
            .map(|&p| draw_residual(Some(p), mean, cfg.eta, &dist, rng))
            .collect()
    };
    let res_fc = step(&state.res_fc, cfg.mean_fc, rng);
    let res_l = step(&state.res_l, cfg.mean_l, rng);
    let res_i = step(&state.res_i, cfg.mean_i, rng);
    let h = draw_channels(cfg, &state.los_phase, rng);
    let (f_c, l, i_bits) = assemble(cfg, res_fc.clone(), res_l.clone(), res_i.clone());
    MecState {
        h,
        f_c,
        l,
        i_bits,
        res_fc,
        res_l,
        res_i,
        los_phase: state.los_phase.clone(),
    }
}

/// Offloading choice, transmit powers (W) and local CPU frequencies (Hz).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Decision {
    pub c: Vec<usize>,
    pub p: Vec<f64>,
    pub f: Vec<f64>,
}

impl Decision {
    pub fn validate(&self, cfg: &MecConfig) -> Result<()> {
        if self.c.len() != cfg.m || self.p.len() != cfg.m || self.f.len() != cfg.m {
            return Err(Error::Infeasible(format!(
                "decision must have {} entries per block",
                cfg.m
            )));
        }
        if let Some(c) = self.c.iter().find(|&&c| c > cfg.n) {
            return Err(Error::Infeasible(format!("offloading target {c} > N = {}", cfg.n)));
        }
        for &p in &self.p {
            if !(p > 0.0 && p <= cfg.p_peak_w) {
                return Err(Error::Infeasible(format!("power {p} outside (0, P_peak]")));
            }
        }
        for &f in &self.f {
            if !(f > 0.0 && f <= cfg.f_peak_hz) {
                return Err(Error::Infeasible(format!("frequency {f} outside (0, f_peak]")));
            }
        }
        Ok(())
    }

    /// Continuous block `(p, f)` divided by the peak values.
    pub fn normalized_x(&self, cfg: &MecConfig) -> Vec<f64> {
        self.p
            .iter()
            .map(|p| p / cfg.p_peak_w)
            .chain(self.f.iter().map(|f| f / cfg.f_peak_hz))
            .collect()
    }

    /// Inverse of [`Decision::normalized_x`].
    pub fn from_normalized(cfg: &MecConfig, c: Vec<usize>, x: &[f64]) -> Self {
        let m = cfg.m;
        Self {
            c,
            p: x[..m].iter().map(|v| v * cfg.p_peak_w).collect(),
            f: x[m..2 * m].iter().map(|v| v * cfg.f_peak_hz).collect(),
        }
    }
}

/// Per-device and total energy-delay cost of a decision.
#[derive(Debug, Clone, PartialEq)]
pub struct EdcBreakdown {
    pub delay: Vec<f64>,
    pub energy: Vec<f64>,
    pub per_wd: Vec<f64>,
    pub total: f64,
    /// `-total`.
    pub reward: f64,
}

/// Uplink rate `W log₂(1 + p |h|² / σ²)`.
pub fn uplink_rate(cfg: &MecConfig, p: f64, gain: f64) -> f64 {
    cfg.bandwidth_hz * (p * gain / cfg.noise_power_w).ln_1p() / std::f64::consts::LN_2
}

pub fn edc(cfg: &MecConfig, state: &MecState, d: &Decision) -> Result<EdcBreakdown> {
    d.validate(cfg)?;
    let mut delay = Vec::with_capacity(cfg.m);
    let mut energy = Vec::with_capacity(cfg.m);
    for m in 0..cfg.m {
        let l = state.l[m];
        match d.c[m] {
            0 => {
                let f = d.f[m];
                delay.push(l / f);
                energy.push(cfg.xi * l * f * f);
            }
            bs => {
                let n = bs - 1;
                let rate = uplink_rate(cfg, d.p[m], state.gain(cfg.n, m, n));
                let tx_time = state.i_bits[m] / rate;
                let sharing = d.c.iter().filter(|&&c| c == bs).count() as f64;
                let edge_time = l * sharing / state.f_c[n];
                delay.push(tx_time + edge_time);
                energy.push(d.p[m] * tx_time);
            }
        }
    }
    let per_wd: Vec<f64> = delay
        .iter()
        .zip(&energy)
        .map(|(t, e)| cfg.beta_d * t + cfg.beta_e * e)
        .collect();
    let total: f64 = per_wd.iter().sum();
    Ok(EdcBreakdown {
        delay,
        energy,
        per_wd,
        total,
        reward: -total,
    })
}

/// Bandit feedback: the reward plus optional Gaussian observation noise.
pub fn observe<R: Rng + ?Sized>(
    cfg: &MecConfig,
    state: &MecState,
    d: &Decision,
    rng: &mut R,
) -> Result<f64> {
    let r = edc(cfg, state, d)?.reward;
    if cfg.obs_noise_std > 0.0 {
        let e: f64 = rng.sample(StandardNormal);
        Ok(r + cfg.obs_noise_std * e)
    } else {
        Ok(r)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    pub decision: Decision,
    /// Reward of `decision`, the per-slot maximum.
    pub value: f64,
}

/// `(β_d + β_e p) · I / R(p)`: the power-dependent part of an offloading
/// device's cost.
fn offload_cost(cfg: &MecConfig, p: f64, gain: f64, bits: f64) -> f64 {
    let rate = uplink_rate(cfg, p, gain);
    if rate > 0.0 {
        (cfg.beta_d + cfg.beta_e * p) * bits / rate
    } else {
        f64::INFINITY
    }
}

/// Minimize [`offload_cost`] over `(0, P_peak]`: 200-point grid, then
/// golden-section refinement around the best grid point.
pub fn best_offload_power(cfg: &MecConfig, gain: f64, bits: f64) -> (f64, f64) {
    const GRID: usize = 200;
    let peak = cfg.p_peak_w;
    let cost = |p: f64| offload_cost(cfg, p, gain, bits);
    let step = peak / GRID as f64;
    let (mut best_p, mut best_c) = (peak, cost(peak));
    let mut best_k = GRID;
    for k in 1..=GRID {
        let p = step * k as f64;
        let c = cost(p);
        if c < best_c {
            best_p = p;
            best_c = c;
            best_k = k;
        }
    }
    if !best_c.is_finite() {
        return (peak, f64::INFINITY);
    }
    let mut a = step * (best_k as f64 - 1.0);
    let mut b = (step * (best_k as f64 + 1.0)).min(peak);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let (mut f1, mut f2) = (cost(x1.max(f64::MIN_POSITIVE)), cost(x2));
    for _ in 0..200 {
        if b - a <= 1e-15 * peak {
            break;
        }
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = cost(x1.max(f64::MIN_POSITIVE));
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = cost(x2);
        }
    }
    for p in [x1, x2, 0.5 * (a + b), b] {
        if p > 0.0 && p <= peak {
            let c = cost(p);
            if c < best_c {
                best_c = c;
                best_p = p;
            }
        }
    }
    (best_p, best_c)
}

/// Clairvoyant per-slot optimum by enumeration of all `(N+1)^M` offloading
/// vectors. Ties resolve to the lexicographically smallest vector.
pub fn oracle_optimum(cfg: &MecConfig, state: &MecState) -> Result<OracleSolution> {
    let (m_wd, n_bs) = (cfg.m, cfg.n);
    let f_star = cfg.optimal_local_frequency();
    let local_cost: Vec<f64> = (0..m_wd)
        .map(|m| {
            let l = state.l[m];
            cfg.beta_d * l / f_star + cfg.beta_e * cfg.xi * l * f_star * f_star
        })
        .collect();
    // best transmit power and its cost for every (device, station)
    let mut tx: Vec<(f64, f64)> = Vec::with_capacity(m_wd * n_bs);
    for m in 0..m_wd {
        for n in 0..n_bs {
            tx.push(best_offload_power(
                cfg,
                state.gain(n_bs, m, n),
                state.i_bits[m],
            ));
        }
    }
    let arms = n_bs + 1;
    let total = arms.checked_pow(m_wd as u32).ok_or_else(|| {
        Error::Config(format!("(N+1)^M = {arms}^{m_wd} is too large to enumerate"))
    })?;
    let mut c = vec![0usize; m_wd];
    let mut counts = vec![0usize; arms];
    let mut best: Option<(f64, Vec<usize>)> = None;
    for code in 0..total {
        let mut rest = code;
        for slot in c.iter_mut().rev() {
            *slot = rest % arms;
            rest /= arms;
        }
        counts.iter_mut().for_each(|v| *v = 0);
        for &k in &c {
            counts[k] += 1;
        }
        let mut cost = 0.0;
        for (m, &k) in c.iter().enumerate() {
            cost += if k == 0 {
                local_cost[m]
            } else {
                let n = k - 1;
                tx[m * n_bs + n].1 + cfg.beta_d * state.l[m] * counts[k] as f64 / state.f_c[n]
            };
        }
        if best.as_ref().is_none_or(|(b, _)| cost < *b) {
            best = Some((cost, c.clone()));
        }
    }
    let (_, c) = best.expect("at least one assignment");
    let p = c
        .iter()
        .enumerate()
        .map(|(m, &k)| if k == 0 { cfg.p_peak_w } else { tx[m * n_bs + k - 1].0 })
        .collect();
    let f = c
        .iter()
        .map(|&k| if k == 0 { f_star } else { cfg.f_peak_hz })
        .collect();
    let decision = Decision { c, p, f };
    let value = edc(cfg, state, &decision)?.reward;
    Ok(OracleSolution { decision, value })
}

/// Header of the per-slot state export.
pub fn state_csv_header(cfg: &MecConfig) -> String {
    let mut cols = vec!["slot".to_string()];
    cols.extend((1..=cfg.m).map(|m| format!("L_{m}")));
    cols.extend((1..=cfg.m).map(|m| format!("I_{m}")));
    cols.extend((1..=cfg.n).map(|n| format!("fc_{n}")));
    for m in 1..=cfg.m {
        for n in 1..=cfg.n {
            cols.push(format!("h2_{m}_{n}"));
        }
    }
    cols.join(",")
}

pub fn write_state_csv<W: Write>(
    cfg: &MecConfig,
    states: &[MecState],
    mut out: W,
) -> std::io::Result<()> {
    writeln!(out, "{}", state_csv_header(cfg))?;
    for (t, s) in states.iter().enumerate() {
        let mut row = vec![(t + 1).to_string()];
        row.extend(s.l.iter().map(|v| crate::harness::fmt_num(*v)));
        row.extend(s.i_bits.iter().map(|v| crate::harness::fmt_num(*v)));
        row.extend(s.f_c.iter().map(|v| crate::harness::fmt_num(*v)));
        row.extend(s.h.iter().map(|h| crate::harness::fmt_num(h.norm_sqr())));
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fixed_state(cfg: &MecConfig, gain: f64) -> MecState {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut s = init_state(cfg, &mut rng);
        s.h.iter_mut().for_each(|h| *h = Complex64::new(gain.sqrt(), 0.0));
        s.l.iter_mut().for_each(|v| *v = 1.25e8);
        s.i_bits.iter_mut().for_each(|v| *v = 1e7);
        s.f_c.iter_mut().for_each(|v| *v = 26e9);
        s
    }

    #[test]
    fn local_cost_by_hand() {
        let cfg = MecConfig {
            m: 1,
            n: 1,
            distances: vec![vec![15.0]],
            ..Default::default()
        };
        let s = fixed_state(&cfg, 1e-8);
        let d = Decision {
            c: vec![0],
            p: vec![0.05],
            f: vec![1e8],
        };
        let e = edc(&cfg, &s, &d).unwrap();
        assert!((e.delay[0] - 1.25).abs() < 1e-12);
        assert!((e.energy[0] - 1.25e-2).abs() < 1e-15);
        assert!((e.total - 0.63125).abs() < 1e-12);
        assert_eq!(e.reward, -e.total);
    }

    #[test]
    fn unit_snr_rate_is_bandwidth() {
        let cfg = MecConfig::default();
        // p |h|² / σ² = 1
        assert!((uplink_rate(&cfg, 0.1, 1e-9) - 2e6).abs() < 1e-6);
    }

    #[test]
    fn shared_station_doubles_edge_time() {
        let cfg = MecConfig::default();
        let s = fixed_state(&cfg, 1e-8);
        let alone = Decision {
            c: vec![1, 0],
            p: vec![0.1, 0.1],
            f: vec![1e8, 1e8],
        };
        let shared = Decision {
            c: vec![1, 1],
            ..alone.clone()
        };
        let a = edc(&cfg, &s, &alone).unwrap();
        let b = edc(&cfg, &s, &shared).unwrap();
        let rate = uplink_rate(&cfg, 0.1, 1e-8);
        let tx = 1e7 / rate;
        let edge_alone = a.delay[0] - tx;
        let edge_shared = b.delay[0] - tx;
        assert!((edge_shared - 2.0 * edge_alone).abs() < 1e-12);
    }

    #[test]
    fn infeasible_decisions_rejected() {
        let cfg = MecConfig::default();
        let s = fixed_state(&cfg, 1e-8);
        for d in [
            Decision {
                c: vec![3, 0],
                p: vec![0.1, 0.1],
                f: vec![1e8, 1e8],
            },
            Decision {
                c: vec![0, 0],
                p: vec![0.0, 0.1],
                f: vec![1e8, 1e8],
            },
            Decision {
                c: vec![0, 0],
                p: vec![0.1, 0.1],
                f: vec![1e8, 2e8],
            },
            Decision {
                c: vec![0],
                p: vec![0.1],
                f: vec![1e8],
            },
        ] {
            assert!(edc(&cfg, &s, &d).is_err());
        }
    }

    #[test]
    fn frozen_dynamics_keep_residuals() {
        let cfg = MecConfig {
            eta: 0.0,
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s0 = init_state(&cfg, &mut rng);
        let mut s = s0.clone();
        for _ in 0..20 {
            s = advance(&cfg, &s, &mut rng);
        }
        assert_eq!(s.res_l, s0.res_l);
        assert_eq!(s.res_fc, s0.res_fc);
        assert_eq!(s.res_i, s0.res_i);
        assert_ne!(s.h, s0.h);
    }

    #[test]
    fn local_frequency_clips_at_peak() {
        let cfg = MecConfig::default();
        let unclipped = (0.5f64 / (2.0 * 0.5 * 1e-26)).cbrt();
        assert!((unclipped - 3.684e8).abs() / 3.684e8 < 1e-3);
        assert_eq!(cfg.optimal_local_frequency(), 1e8);
    }

    #[test]
    fn dead_channel_forces_local() {
        let cfg = MecConfig {
            m: 1,
            n: 1,
            distances: vec![vec![15.0]],
            ..Default::default()
        };
        let s = fixed_state(&cfg, 0.0);
        let o = oracle_optimum(&cfg, &s).unwrap();
        assert_eq!(o.decision.c, vec![0]);
        assert!(o.value.is_finite());
    }

    #[test]
    fn normalized_roundtrip() {
        let cfg = MecConfig::default();
        let d = Decision {
            c: vec![1, 0],
            p: vec![0.05, 0.1],
            f: vec![1e8, 2.5e7],
        };
        let x = d.normalized_x(&cfg);
        assert_eq!(x, vec![0.5, 1.0, 1.0, 0.25]);
        assert_eq!(Decision::from_normalized(&cfg, d.c.clone(), &x), d);
    }

    #[test]
    fn config_validation() {
        assert!(MecConfig::default().validate().is_ok());
        let bad = MecConfig {
            distances: vec![vec![1.0]],
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = MecConfig {
            eta: 1.5,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}

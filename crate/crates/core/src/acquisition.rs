//! UCB acquisition over the normalized continuous box for a fixed
//! categorical decision.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bandit::Exp3Bank;
use crate::error::{Error, Result};
use crate::gp::{GpModel, Query};

/// Open lower bound of the normalized box.
pub const X_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AcquisitionOptions {
    /// Exploration weight; the bonus is `√ζ · σ^e`.
    pub zeta: f64,
    /// Exponent `e` on the posterior standard deviation: 1 gives `σ`, 2
    /// gives the variance.
    pub sigma_exponent: u8,
    /// Uniform random starts, in addition to the best observed point.
    pub starts: usize,
    pub max_iters: usize,
    /// Lower edge of the search box in normalized coordinates. Experiments
    /// set it from `experiment.action_floor`.
    #[serde(skip)]
    pub x_floor: f64,
}

impl Default for AcquisitionOptions {
    fn default() -> Self {
        Self {
            zeta: 2.0,
            sigma_exponent: 1,
            starts: 10,
            max_iters: 200,
            x_floor: X_FLOOR,
        }
    }
}

impl AcquisitionOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.zeta >= 0.0 && self.zeta.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "zeta",
                reason: format!("must be finite and >= 0, got {}", self.zeta),
            });
        }
        if !matches!(self.sigma_exponent, 1 | 2) {
            return Err(Error::InvalidParameter {
                name: "sigma_exponent",
                reason: format!("must be 1 or 2, got {}", self.sigma_exponent),
            });
        }
        if !(self.x_floor > 0.0 && self.x_floor < 1.0) {
            return Err(Error::InvalidParameter {
                name: "x_floor",
                reason: format!("must lie in (0, 1), got {}", self.x_floor),
            });
        }
        Ok(())
    }

    fn bonus(&self, var: f64) -> f64 {
        let s = match self.sigma_exponent {
            2 => var,
            _ => var.sqrt(),
        };
        self.zeta.sqrt() * s
    }

    fn bonus_grad_factor(&self, var: f64) -> f64 {
        match self.sigma_exponent {
            2 => self.zeta.sqrt(),
            _ if var > 0.0 => self.zeta.sqrt() * 0.5 / var.sqrt(),
            _ => 0.0,
        }
    }
}

fn check_box(x: &[f64]) -> Result<()> {
    for &v in x {
        if !(v > 0.0 && v <= 1.0) {
            return Err(Error::Infeasible(format!(
                "normalized continuous entry {v} outside (0, 1]"
            )));
        }
    }
    Ok(())
}

/// `μ_t(z) + √ζ σ_t(z)^e` at normalized `x`.
pub fn ucb(
    model: &GpModel,
    x: &[f64],
    c: &[usize],
    t: u32,
    s: Option<&[f64]>,
    opts: &AcquisitionOptions,
) -> Result<f64> {
    opts.validate()?;
    check_box(x)?;
    let q = model.query(c, t, s)?;
    let (mu, var) = q.eval(x);
    Ok(mu + opts.bonus(var))
}

struct Objective<'a> {
    q: Query<'a>,
    opts: AcquisitionOptions,
}

impl Objective<'_> {
    fn value(&self, x: &[f64]) -> f64 {
        let (mu, var) = self.q.eval(x);
        mu + self.opts.bonus(var)
    }

    fn value_grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let pg = self.q.eval_with_grad(x);
        let k = self.opts.bonus_grad_factor(pg.var);
        let g = pg
            .d_mean
            .iter()
            .zip(&pg.d_var)
            .map(|(dm, dv)| dm + k * dv)
            .collect();
        (pg.mean + self.opts.bonus(pg.var), g)
    }
}

fn project(x: &mut [f64], lo: f64) {
    for v in x.iter_mut() {
        *v = v.clamp(lo, 1.0);
    }
}

/// Multi-start projected gradient ascent of the UCB on `[x_floor, 1]^d`.
///
/// Starts are the continuous part of the best observation (if any)
/// followed by `opts.starts` uniform draws. Returns the normalized
/// maximizer; on ties the earliest start wins.
pub fn maximize_ucb<R: Rng + ?Sized>(
    model: &GpModel,
    c: &[usize],
    t: u32,
    s: Option<&[f64]>,
    dim: usize,
    opts: &AcquisitionOptions,
    rng: &mut R,
) -> Result<Vec<f64>> {
    opts.validate()?;
    let obj = Objective {
        q: model.query(c, t, s)?,
        opts: *opts,
    };
    let mut starts: Vec<Vec<f64>> = Vec::with_capacity(opts.starts + 1);
    if let Some(best) = model
        .targets()
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
        .map(|(i, _)| model.points()[i].x.clone())
    {
        if best.len() != dim {
            return Err(Error::DimensionMismatch {
                what: "continuous vector",
                expected: dim,
                got: best.len(),
            });
        }
        starts.push(best);
    }
    for _ in 0..opts.starts {
        starts.push((0..dim).map(|_| rng.random_range(opts.x_floor..=1.0)).collect());
    }
    if starts.is_empty() {
        starts.push(vec![1.0; dim]);
    }

    let mut best: Option<(f64, Vec<f64>)> = None;
    for start in starts {
        let (f, x) = ascend(&obj, start, opts);
        if best.as_ref().is_none_or(|(bf, _)| f > *bf) {
            best = Some((f, x));
        }
    }
    Ok(best.expect("at least one start").1)
}

fn ascend(obj: &Objective<'_>, mut x: Vec<f64>, opts: &AcquisitionOptions) -> (f64, Vec<f64>) {
    project(&mut x, opts.x_floor);
    let (mut f, mut g) = obj.value_grad(&x);
    let mut step = 0.1;
    for _ in 0..opts.max_iters {
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 1e-12) {
            break;
        }
        let mut cand: Vec<f64> = x.iter().zip(&g).map(|(a, d)| a + step * d / norm).collect();
        project(&mut cand, opts.x_floor);
        let moved = cand
            .iter()
            .zip(&x)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if moved < 1e-9 {
            break;
        }
        let fc = obj.value(&cand);
        if fc > f {
            let (fv, gv) = obj.value_grad(&cand);
            x = cand;
            f = fv;
            g = gv;
            step = (step * 1.5).min(1.0);
        } else {
            step *= 0.5;
            if step < 1e-7 {
                break;
            }
        }
    }
    (f, x)
}

/// One propose step: sample the offloading vector from the EXP3 bank, then
/// maximize the UCB over the continuous block at slot `t_next`.
pub fn propose<R: Rng + ?Sized>(
    model: &GpModel,
    bank: &Exp3Bank,
    t_next: u32,
    s_next: Option<&[f64]>,
    dim: usize,
    opts: &AcquisitionOptions,
    rng: &mut R,
) -> Result<(Vec<usize>, Vec<f64>)> {
    let c = bank.sample_actions(rng);
    let x = maximize_ucb(model, &c, t_next, s_next, dim, opts, rng)?;
    Ok((c, x))
}

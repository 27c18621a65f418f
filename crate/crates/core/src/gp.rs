//! Exact GP regression over [`MixedPoint`]s.
//!
//! The model keeps every observation, a packed Cholesky factor of
//! `K + σ_o² I` and the weight vector `(K + σ_o² I)⁻¹ y`. Observations are
//! appended with a one-row extension of the factor; the factor is rebuilt
//! from scratch only when the hyperparameters change or the extension
//! breaks down numerically.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{ensure_finite, Error, Result};
use crate::kernels::{
    compose_xc, full_kernel, match_fraction, matern_52_dist, matern_52_dx_factor, sq_dist,
    temporal_factor, KernelConfig, MixedPoint, PairwiseTerms,
};
use crate::linalg::Cholesky;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Settings of the multi-start marginal likelihood ascent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub restarts: usize,
    pub max_iters: usize,
    /// Convergence threshold on the ∞-norm of the projected gradient.
    pub grad_tol: f64,
    /// Stop once an accepted step gains less than `f_tol · max(1, |L|)`.
    pub f_tol: f64,
    /// Standard deviation of the log-space perturbation of restart starts.
    pub perturbation: f64,
    /// Box on each log-hyperparameter, natural units `(lo, hi)`.
    pub l_x_bounds: (f64, f64),
    pub omega_bounds: (f64, f64),
    pub noise_bounds: (f64, f64),
    pub l_s_bounds: (f64, f64),
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            restarts: 5,
            max_iters: 100,
            grad_tol: 1e-5,
            f_tol: 1e-7,
            perturbation: 1.0,
            l_x_bounds: (1e-2, 20.0),
            omega_bounds: (1e-3, 1e2),
            noise_bounds: (1e-6, 10.0),
            l_s_bounds: (1e-2, 20.0),
        }
    }
}

impl FitOptions {
    fn log_bounds(&self, cfg: &KernelConfig) -> Vec<(f64, f64)> {
        use crate::kernels::Hyper::*;
        cfg.free_params()
            .into_iter()
            .map(|h| {
                let (lo, hi) = match h {
                    LogLengthscale => self.l_x_bounds,
                    LogOmega => self.omega_bounds,
                    LogNoise => self.noise_bounds,
                    LogContextLengthscale => self.l_s_bounds,
                };
                (lo.ln(), hi.ln())
            })
            .collect()
    }
}

/// Outcome of [`GpModel::fit_hyperparameters`].
#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub cfg: KernelConfig,
    pub lml: f64,
    /// `true` when no restart produced a finite likelihood and the previous
    /// configuration was kept.
    pub fell_back: bool,
}

#[derive(Debug, Clone)]
pub struct GpModel {
    points: Vec<MixedPoint>,
    y: Vec<f64>,
    cfg: KernelConfig,
    normalize_y: bool,
    y_center: f64,
    y_scale: f64,
    chol: Cholesky,
    alpha: Vec<f64>,
}

impl GpModel {
    pub fn new(cfg: KernelConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            points: Vec::new(),
            y: Vec::new(),
            cfg,
            normalize_y: false,
            y_center: 0.0,
            y_scale: 1.0,
            chol: Cholesky::empty(),
            alpha: Vec::new(),
        })
    }

    /// Standardize targets (sample mean and standard deviation) before
    /// fitting; predictions are mapped back to the original units.
    pub fn with_output_normalization(mut self, on: bool) -> Self {
        self.normalize_y = on;
        self.refresh_targets();
        self
    }

    pub fn from_data(cfg: KernelConfig, points: Vec<MixedPoint>, y: Vec<f64>) -> Result<Self> {
        let mut m = Self::new(cfg)?;
        if points.len() != y.len() {
            return Err(Error::DimensionMismatch {
                what: "observations",
                expected: points.len(),
                got: y.len(),
            });
        }
        for (p, v) in points.into_iter().zip(y) {
            m.add_observation(p, v)?;
        }
        Ok(m)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn config(&self) -> &KernelConfig {
        &self.cfg
    }

    pub fn points(&self) -> &[MixedPoint] {
        &self.points
    }

    pub fn targets(&self) -> &[f64] {
        &self.y
    }

    pub fn cholesky(&self) -> &Cholesky {
        &self.chol
    }

    /// Jitter currently added to the diagonal of `K + σ_o² I`.
    pub fn jitter(&self) -> f64 {
        self.chol.jitter()
    }

    fn check_point(&self, z: &MixedPoint) -> Result<()> {
        if z.is_contextual() != self.cfg.contextual {
            return Err(Error::ContextMismatch {
                model: if self.cfg.contextual {
                    "contextual"
                } else {
                    "non-contextual"
                },
                point: if z.is_contextual() {
                    "contextual"
                } else {
                    "non-contextual"
                },
            });
        }
        if let Some(first) = self.points.first() {
            if first.x.len() != z.x.len() {
                return Err(Error::DimensionMismatch {
                    what: "continuous vector",
                    expected: first.x.len(),
                    got: z.x.len(),
                });
            }
            if first.c.len() != z.c.len() {
                return Err(Error::DimensionMismatch {
                    what: "categorical vector",
                    expected: first.c.len(),
                    got: z.c.len(),
                });
            }
        }
        Ok(())
    }

    /// Replace the kernel configuration and refactor.
    pub fn set_config(&mut self, cfg: KernelConfig) -> Result<()> {
        cfg.validate()?;
        let old = std::mem::replace(&mut self.cfg, cfg);
        if let Err(e) = self.refactor() {
            self.cfg = old;
            self.refactor()?;
            return Err(e);
        }
        Ok(())
    }

    fn refactor(&mut self) -> Result<()> {
        if self.points.is_empty() {
            self.chol = Cholesky::empty();
            self.alpha.clear();
            return Ok(());
        }
        let terms = PairwiseTerms::new(&self.points, &self.cfg)?;
        let mut k = terms.gram(&self.cfg);
        for i in 0..k.n {
            k.data[i * k.n + i] += self.cfg.sigma_o2;
        }
        self.chol = Cholesky::factor(&k.data, k.n)?;
        self.refresh_targets();
        Ok(())
    }

    fn refresh_targets(&mut self) {
        if self.normalize_y && !self.y.is_empty() {
            let n = self.y.len() as f64;
            let mean = self.y.iter().sum::<f64>() / n;
            let var = self.y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            let sd = var.sqrt();
            self.y_center = mean;
            self.y_scale = if sd > 1e-12 * mean.abs().max(1.0) {
                sd
            } else {
                1.0
            };
        } else {
            self.y_center = 0.0;
            self.y_scale = 1.0;
        }
        if self.chol.len() == self.y.len() {
            let yt = self.scaled_targets();
            self.alpha = self.chol.solve(&yt);
        }
    }

    fn scaled_targets(&self) -> Vec<f64> {
        self.y
            .iter()
            .map(|v| (v - self.y_center) / self.y_scale)
            .collect()
    }

    /// Append `(z, y)`, extending the factorization by one row.
    pub fn add_observation(&mut self, z: MixedPoint, y: f64) -> Result<()> {
        ensure_finite(y, "observation")?;
        self.check_point(&z)?;
        let cross = self
            .points
            .iter()
            .map(|p| full_kernel(p, &z, &self.cfg))
            .collect::<Result<Vec<_>>>()?;
        let diag = full_kernel(&z, &z, &self.cfg)? + self.cfg.sigma_o2;
        self.points.push(z);
        self.y.push(y);
        if !self.chol.try_append(&cross, diag) {
            log::debug!(
                "rank-one extension failed at n = {}, refactoring",
                self.points.len()
            );
            if let Err(e) = self.refactor() {
                self.points.pop();
                self.y.pop();
                self.refactor()?;
                return Err(e);
            }
            return Ok(());
        }
        self.refresh_targets();
        Ok(())
    }

    /// Posterior mean and variance at `z`, in the units of the targets.
    pub fn posterior(&self, z: &MixedPoint) -> Result<(f64, f64)> {
        self.check_point(z)?;
        let prior = full_kernel(z, z, &self.cfg)?;
        if self.points.is_empty() {
            return Ok((0.0, prior));
        }
        let k = self
            .points
            .iter()
            .map(|p| full_kernel(p, z, &self.cfg))
            .collect::<Result<Vec<_>>>()?;
        Ok(self.finish_posterior(&k, prior))
    }

    fn finish_posterior(&self, k: &[f64], prior: f64) -> (f64, f64) {
        let mu: f64 = k.iter().zip(&self.alpha).map(|(a, b)| a * b).sum();
        let v = self.chol.solve_lower(k);
        let var = (prior - v.iter().map(|x| x * x).sum::<f64>()).max(0.0);
        (
            self.y_center + self.y_scale * mu,
            self.y_scale * self.y_scale * var,
        )
    }

    /// Prepare repeated posterior evaluations over the continuous block for
    /// fixed categorical decision, slot and context.
    pub fn query(&self, c: &[usize], t: u32, s: Option<&[f64]>) -> Result<Query<'_>> {
        if s.is_some() != self.cfg.contextual {
            return Err(Error::ContextMismatch {
                model: if self.cfg.contextual {
                    "contextual"
                } else {
                    "non-contextual"
                },
                point: if s.is_some() {
                    "contextual"
                } else {
                    "non-contextual"
                },
            });
        }
        if t < 1 {
            return Err(Error::InvalidParameter {
                name: "t",
                reason: "slot index starts at 1".into(),
            });
        }
        let mut weight = Vec::with_capacity(self.points.len());
        let mut kc = Vec::with_capacity(self.points.len());
        for p in &self.points {
            if p.c.len() != c.len() {
                return Err(Error::DimensionMismatch {
                    what: "categorical vector",
                    expected: p.c.len(),
                    got: c.len(),
                });
            }
            let ks = match (s, &p.s) {
                (Some(s), Some(ps)) => matern_52_dist(sq_dist(s, ps).sqrt(), self.cfg.l_s),
                _ => 1.0,
            };
            weight.push(ks * temporal_factor(p.t.abs_diff(t), self.cfg.rho));
            kc.push(self.cfg.omega * match_fraction(c, &p.c));
        }
        Ok(Query {
            model: self,
            c: c.to_vec(),
            t,
            s: s.map(<[f64]>::to_vec),
            weight,
            kc,
            prior: self.cfg.prior_variance(),
        })
    }

    pub fn log_marginal_likelihood(&self) -> Result<f64> {
        if self.points.is_empty() {
            return Err(Error::EmptyData);
        }
        let yt = self.scaled_targets();
        Ok(lml_from_factor(&self.chol, &self.alpha, &yt))
    }

    /// Gradient of the log marginal likelihood with respect to the free
    /// log-hyperparameters (see [`KernelConfig::free_params`]).
    pub fn lml_gradient(&self) -> Result<Vec<f64>> {
        if self.points.is_empty() {
            return Err(Error::EmptyData);
        }
        let terms = PairwiseTerms::new(&self.points, &self.cfg)?;
        Ok(gradient_from_factor(&terms, &self.cfg, &self.chol, &self.alpha))
    }

    /// Multi-start projected gradient ascent of the log marginal likelihood
    /// in log-space. The first start is the current configuration, the
    /// others are Gaussian perturbations of it. The best configuration found
    /// is installed in the model and returned.
    pub fn fit_hyperparameters<R: Rng + ?Sized>(
        &mut self,
        opts: &FitOptions,
        rng: &mut R,
    ) -> Result<FitReport> {
        if self.points.is_empty() {
            return Err(Error::EmptyData);
        }
        let current_lml = self.log_marginal_likelihood().unwrap_or(f64::NEG_INFINITY);
        if opts.restarts == 0 {
            return Ok(FitReport {
                cfg: self.cfg,
                lml: current_lml,
                fell_back: false,
            });
        }
        let objective = LmlObjective::new(&self.points, self.scaled_targets(), self.cfg)?;
        let bounds = opts.log_bounds(&self.cfg);
        let base = self.cfg.log_params();
        let mut best: Option<(f64, Vec<f64>)> = None;
        for r in 0..opts.restarts {
            let start: Vec<f64> = base
                .iter()
                .zip(&bounds)
                .map(|(&v, &(lo, hi))| {
                    let e: f64 = if r == 0 {
                        0.0
                    } else {
                        rng.sample::<f64, _>(StandardNormal) * opts.perturbation
                    };
                    (v + e).clamp(lo, hi)
                })
                .collect();
            if let Some((f, theta)) = objective.ascend(start, &bounds, opts) {
                if best.as_ref().is_none_or(|(bf, _)| f > *bf) {
                    best = Some((f, theta));
                }
            }
        }
        match best {
            Some((f, theta)) if f.is_finite() && f >= current_lml => {
                let cfg = self.cfg.with_log_params(&theta);
                match self.set_config(cfg) {
                    Ok(()) => Ok(FitReport {
                        cfg,
                        lml: f,
                        fell_back: false,
                    }),
                    Err(e) => {
                        log::warn!("refit produced unusable config: {e}");
                        Ok(FitReport {
                            cfg: self.cfg,
                            lml: current_lml,
                            fell_back: true,
                        })
                    }
                }
            }
            Some(_) => Ok(FitReport {
                cfg: self.cfg,
                lml: current_lml,
                fell_back: false,
            }),
            None => {
                log::warn!("no restart produced a finite likelihood; keeping hyperparameters");
                Ok(FitReport {
                    cfg: self.cfg,
                    lml: current_lml,
                    fell_back: true,
                })
            }
        }
    }
}

fn lml_from_factor(chol: &Cholesky, alpha: &[f64], y: &[f64]) -> f64 {
    let fit: f64 = y.iter().zip(alpha).map(|(a, b)| a * b).sum();
    -0.5 * fit - 0.5 * chol.log_det() - 0.5 * y.len() as f64 * LN_2PI
}

fn gradient_from_factor(
    terms: &PairwiseTerms,
    cfg: &KernelConfig,
    chol: &Cholesky,
    alpha: &[f64],
) -> Vec<f64> {
    // ∂L/∂θ = ½ Σ_ij (α α' - A⁻¹)_ij (∂A/∂θ)_ij
    let n = alpha.len();
    let mut q = chol.inverse();
    for i in 0..n {
        for j in 0..n {
            q[i * n + j] = 0.5 * (alpha[i] * alpha[j] - q[i * n + j]);
        }
    }
    terms.contract_gradients(cfg, &q)
}

/// Log marginal likelihood of a fixed dataset as a function of the free
/// log-hyperparameters.
struct LmlObjective {
    terms: PairwiseTerms,
    y: Vec<f64>,
    template: KernelConfig,
}

impl LmlObjective {
    fn new(points: &[MixedPoint], y: Vec<f64>, template: KernelConfig) -> Result<Self> {
        Ok(Self {
            terms: PairwiseTerms::new(points, &template)?,
            y,
            template,
        })
    }

    fn factor(&self, theta: &[f64]) -> Option<(KernelConfig, Cholesky, Vec<f64>, f64)> {
        let cfg = self.template.with_log_params(theta);
        let mut k = self.terms.gram(&cfg);
        for i in 0..k.n {
            k.data[i * k.n + i] += cfg.sigma_o2;
        }
        let chol = Cholesky::factor(&k.data, k.n).ok()?;
        let alpha = chol.solve(&self.y);
        let f = lml_from_factor(&chol, &alpha, &self.y);
        f.is_finite().then_some((cfg, chol, alpha, f))
    }

    fn value_and_grad(&self, theta: &[f64]) -> Option<(f64, Vec<f64>)> {
        self.grad_at(self.factor(theta)?)
    }

    fn grad_at(
        &self,
        (cfg, chol, alpha, f): (KernelConfig, Cholesky, Vec<f64>, f64),
    ) -> Option<(f64, Vec<f64>)> {
        let g = gradient_from_factor(&self.terms, &cfg, &chol, &alpha);
        g.iter().all(|v| v.is_finite()).then_some((f, g))
    }

    /// Projected gradient ascent with Barzilai–Borwein step proposals and
    /// Armijo backtracking.
    fn ascend(
        &self,
        mut theta: Vec<f64>,
        bounds: &[(f64, f64)],
        opts: &FitOptions,
    ) -> Option<(f64, Vec<f64>)> {
        let project = |v: &mut [f64]| {
            for (x, &(lo, hi)) in v.iter_mut().zip(bounds) {
                *x = x.clamp(lo, hi);
            }
        };
        let (mut f, mut g) = self.value_and_grad(&theta)?;
        let mut step = 0.1 / g.iter().fold(1e-12_f64, |m, v| m.max(v.abs()));
        for _ in 0..opts.max_iters {
            let pg = projected_gradient(&theta, &g, bounds);
            if pg.iter().all(|v| v.abs() < opts.grad_tol) {
                break;
            }
            let mut accepted = None;
            while step > 1e-14 {
                let mut cand: Vec<f64> = theta.iter().zip(&g).map(|(t, d)| t + step * d).collect();
                project(&mut cand);
                let ascent: f64 = cand
                    .iter()
                    .zip(&theta)
                    .zip(&g)
                    .map(|((c, t), d)| (c - t) * d)
                    .sum();
                if ascent <= 0.0 {
                    break;
                }
                if let Some(fac) = self.factor(&cand) {
                    if fac.3 >= f + 1e-4 * ascent {
                        accepted = Some((cand, fac));
                        break;
                    }
                }
                step *= 0.5;
            }
            let Some((cand, fac)) = accepted else { break };
            let Some((fc, gc)) = self.grad_at(fac) else {
                break;
            };
            let stalled = fc - f < opts.f_tol * f.abs().max(1.0);
            let s: Vec<f64> = cand.iter().zip(&theta).map(|(a, b)| a - b).collect();
            let yv: Vec<f64> = gc.iter().zip(&g).map(|(a, b)| a - b).collect();
            let sy: f64 = s.iter().zip(&yv).map(|(a, b)| a * b).sum();
            let ss: f64 = s.iter().map(|a| a * a).sum();
            step = if sy < 0.0 {
                (ss / -sy).clamp(1e-6, 1e3)
            } else {
                (step * 2.0).min(1e3)
            };
            theta = cand;
            f = fc;
            g = gc;
            if stalled {
                break;
            }
        }
        Some((f, theta))
    }
}

fn projected_gradient(theta: &[f64], g: &[f64], bounds: &[(f64, f64)]) -> Vec<f64> {
    theta
        .iter()
        .zip(g)
        .zip(bounds)
        .map(|((&t, &d), &(lo, hi))| {
            if (t <= lo && d < 0.0) || (t >= hi && d > 0.0) {
                0.0
            } else {
                d
            }
        })
        .collect()
}

/// Posterior over the continuous block at fixed `(c, t, s)`.
pub struct Query<'a> {
    model: &'a GpModel,
    c: Vec<usize>,
    t: u32,
    s: Option<Vec<f64>>,
    weight: Vec<f64>,
    kc: Vec<f64>,
    prior: f64,
}

/// Posterior moments and their gradients with respect to normalized `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorGrad {
    pub mean: f64,
    pub var: f64,
    pub d_mean: Vec<f64>,
    pub d_var: Vec<f64>,
}

impl Query<'_> {
    pub fn point(&self, x: &[f64]) -> Result<MixedPoint> {
        MixedPoint::new(self.c.clone(), x.to_vec(), self.t, self.s.clone())
    }

    fn cross(&self, x: &[f64]) -> Vec<f64> {
        let cfg = &self.model.cfg;
        self.model
            .points
            .iter()
            .zip(&self.weight)
            .zip(&self.kc)
            .map(|((p, &w), &kc)| {
                let kx = matern_52_dist(sq_dist(x, &p.x).sqrt(), cfg.l_x);
                w * compose_xc(kc, kx, cfg.lambda)
            })
            .collect()
    }

    /// Posterior mean and variance at normalized `x`.
    pub fn eval(&self, x: &[f64]) -> (f64, f64) {
        if self.model.is_empty() {
            return (0.0, self.prior);
        }
        let k = self.cross(x);
        self.model.finish_posterior(&k, self.prior)
    }

    pub fn eval_with_grad(&self, x: &[f64]) -> PosteriorGrad {
        let d = x.len();
        let m = self.model;
        if m.is_empty() {
            return PosteriorGrad {
                mean: 0.0,
                var: self.prior,
                d_mean: vec![0.0; d],
                d_var: vec![0.0; d],
            };
        }
        let cfg = &m.cfg;
        let k = self.cross(x);
        let (mean, var) = m.finish_posterior(&k, self.prior);
        // β = A⁻¹ k; ∂σ²/∂x = -2 Σ β_i ∂k_i, ∂μ/∂x = Σ α_i ∂k_i
        let beta = m.chol.solve(&k);
        let mut d_mean = vec![0.0; d];
        let mut d_var = vec![0.0; d];
        for (i, p) in m.points.iter().enumerate() {
            let r = sq_dist(x, &p.x).sqrt();
            let coef = self.weight[i]
                * ((1.0 - cfg.lambda) + cfg.lambda * self.kc[i])
                * matern_52_dx_factor(r, cfg.l_x);
            let a = coef * m.alpha[i];
            let b = -2.0 * coef * beta[i];
            for j in 0..d {
                let diff = x[j] - p.x[j];
                d_mean[j] += a * diff;
                d_var[j] += b * diff;
            }
        }
        let s2 = m.y_scale * m.y_scale;
        for j in 0..d {
            d_mean[j] *= m.y_scale;
            d_var[j] *= s2;
        }
        if var <= 0.0 {
            d_var.iter_mut().for_each(|v| *v = 0.0);
        }
        PosteriorGrad {
            mean,
            var,
            d_mean,
            d_var,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_points(n: usize, rng: &mut ChaCha8Rng, ctx: bool) -> Vec<MixedPoint> {
        (0..n)
            .map(|i| {
                let c = (0..2).map(|_| rng.random_range(0..3)).collect();
                let x = (0..4).map(|_| rng.random_range(0.01..=1.0)).collect();
                let s = ctx.then(|| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect());
                MixedPoint::new(c, x, i as u32 + 1, s).unwrap()
            })
            .collect()
    }

    #[test]
    fn empty_model_returns_prior() {
        let cfg = KernelConfig::default();
        let gp = GpModel::new(cfg).unwrap();
        let z = MixedPoint::new(vec![1, 0], vec![0.3, 0.5], 3, None).unwrap();
        let (mu, var) = gp.posterior(&z).unwrap();
        assert_eq!(mu, 0.0);
        assert_eq!(var, cfg.prior_variance());
        assert!(gp.log_marginal_likelihood().is_err());
    }

    #[test]
    fn noiseless_single_observation_interpolates() {
        let cfg = KernelConfig {
            sigma_o2: 1e-12,
            ..Default::default()
        };
        let mut gp = GpModel::new(cfg).unwrap();
        let z = MixedPoint::new(vec![1, 0], vec![0.3, 0.5], 1, None).unwrap();
        gp.add_observation(z.clone(), -2.5).unwrap();
        let (mu, var) = gp.posterior(&z).unwrap();
        assert!((mu + 2.5).abs() < 1e-4);
        assert!(var < 1e-9);
        assert_eq!(gp.len(), 1);
    }

    #[test]
    fn rejects_bad_observations() {
        let mut gp = GpModel::new(KernelConfig::default()).unwrap();
        let z = MixedPoint::new(vec![1], vec![0.3], 1, None).unwrap();
        assert!(gp.add_observation(z.clone(), f64::NAN).is_err());
        let zc = MixedPoint::new(vec![1], vec![0.3], 1, Some(vec![0.0])).unwrap();
        assert!(matches!(
            gp.add_observation(zc, 1.0),
            Err(Error::ContextMismatch { .. })
        ));
        gp.add_observation(z, 1.0).unwrap();
        let wrong = MixedPoint::new(vec![1, 1], vec![0.3], 2, None).unwrap();
        assert!(gp.add_observation(wrong, 1.0).is_err());
        assert_eq!(gp.len(), 1);
    }

    #[test]
    fn single_point_lml() {
        // λ = 0 and ω → 0 give κ(z, z) → 1
        let cfg = KernelConfig {
            omega: 1e-12,
            lambda: 0.0,
            sigma_o2: 1e-12,
            ..Default::default()
        };
        let mut gp = GpModel::new(cfg).unwrap();
        let z = MixedPoint::new(vec![0], vec![0.5], 1, None).unwrap();
        gp.add_observation(z, 0.0).unwrap();
        let lml = gp.log_marginal_likelihood().unwrap();
        assert!((lml + 0.918_938_533).abs() < 1e-6, "{lml}");
    }

    #[test]
    fn query_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for ctx in [false, true] {
            let pts = random_points(12, &mut rng, ctx);
            let y: Vec<f64> = (0..12).map(|i| (i as f64 * 0.7).sin()).collect();
            let cfg = KernelConfig {
                rho: 0.05,
                contextual: ctx,
                l_s: 0.8,
                ..Default::default()
            };
            let gp = GpModel::from_data(cfg, pts, y)
                .unwrap()
                .with_output_normalization(true);
            let s = ctx.then(|| vec![0.1, 0.2, -0.3, 0.0]);
            let q = gp.query(&[1, 2], 13, s.as_deref()).unwrap();
            let x = vec![0.4, 0.6, 0.35, 0.8];
            let g = q.eval_with_grad(&x);
            let (m0, v0) = q.eval(&x);
            assert!((g.mean - m0).abs() < 1e-14 && (g.var - v0).abs() < 1e-14);
            let h = 1e-6;
            for j in 0..4 {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[j] += h;
                xm[j] -= h;
                let (mp, vp) = q.eval(&xp);
                let (mm, vm) = q.eval(&xm);
                let fd_m = (mp - mm) / (2.0 * h);
                let fd_v = (vp - vm) / (2.0 * h);
                assert!((fd_m - g.d_mean[j]).abs() < 1e-6 * (1.0 + fd_m.abs()));
                assert!((fd_v - g.d_var[j]).abs() < 1e-6 * (1.0 + fd_v.abs()));
            }
            let z = q.point(&x).unwrap();
            let (pm, pv) = gp.posterior(&z).unwrap();
            assert!((pm - m0).abs() < 1e-12 && (pv - v0).abs() < 1e-12);
        }
    }

    #[test]
    fn restarts_zero_is_noop_and_fit_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pts = random_points(15, &mut rng, false);
        let y: Vec<f64> = pts.iter().map(|p| p.x[0] * 2.0 - p.c[0] as f64).collect();
        let cfg = KernelConfig::default();
        let mut gp = GpModel::from_data(cfg, pts, y).unwrap();
        let opts = FitOptions {
            restarts: 0,
            ..Default::default()
        };
        let rep = gp.fit_hyperparameters(&opts, &mut rng).unwrap();
        assert_eq!(rep.cfg, cfg);
        assert_eq!(*gp.config(), cfg);

        let mut a = gp.clone();
        let mut b = gp.clone();
        let opts = FitOptions::default();
        let ra = a
            .fit_hyperparameters(&opts, &mut ChaCha8Rng::seed_from_u64(5))
            .unwrap();
        let rb = b
            .fit_hyperparameters(&opts, &mut ChaCha8Rng::seed_from_u64(5))
            .unwrap();
        assert_eq!(ra.cfg.l_x.to_bits(), rb.cfg.l_x.to_bits());
        assert_eq!(ra.cfg.omega.to_bits(), rb.cfg.omega.to_bits());
        assert_eq!(ra.cfg.sigma_o2.to_bits(), rb.cfg.sigma_o2.to_bits());
        assert!(ra.lml >= gp.log_marginal_likelihood().unwrap());
    }
}

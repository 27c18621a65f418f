//! Covariance functions over mixed categorical/continuous inputs with a
//! temporal factor and an optional context factor.
//!
//! The full kernel between two points is
//!
//! ```text
//! κ(z, z') = κ_s(s, s') · κ_temp(t, t') · κ_xc((x, c), (x', c'))
//! κ_xc     = (1 - λ) (κ_c + κ_x) + λ κ_c κ_x
//! ```
//!
//! where `κ_x` is a unit-amplitude Matérn-5/2 kernel on normalized
//! continuous inputs, `κ_c` the overlap kernel scaled by `ω`, `κ_temp`
//! the `(1 - ρ)^{|t - t'|/2}` forgetting factor, and `κ_s` a Matérn-5/2
//! kernel on standardized contexts (contextual mode only).

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, ensure_positive, Error, Result};
use crate::linalg::SquareMatrix;

const SQRT5: f64 = 2.236_067_977_499_79;

/// Matérn smoothness. Fixed; not a tunable hyperparameter.
pub const MATERN_NU: f64 = 2.5;

/// One query of the black-box reward.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedPoint {
    /// Offloading decision per device, `0` = local, `n` = base station `n`.
    pub c: Vec<usize>,
    /// Continuous decision `(p¹…p^M, f¹…f^M)` normalized by the peak values.
    pub x: Vec<f64>,
    /// Slot index, starting at 1.
    pub t: u32,
    /// Standardized context `(I¹…I^M, L¹…L^M)`, contextual mode only.
    pub s: Option<Vec<f64>>,
}

impl MixedPoint {
    pub fn new(c: Vec<usize>, x: Vec<f64>, t: u32, s: Option<Vec<f64>>) -> Result<Self> {
        if t < 1 {
            return Err(Error::InvalidParameter {
                name: "t",
                reason: "slot index starts at 1".into(),
            });
        }
        for &v in &x {
            ensure_finite(v, "x")?;
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::Infeasible(format!(
                    "normalized continuous entry {v} outside (0, 1]"
                )));
            }
        }
        if let Some(s) = &s {
            for &v in s {
                ensure_finite(v, "context")?;
            }
        }
        Ok(Self { c, x, t, s })
    }

    pub fn is_contextual(&self) -> bool {
        self.s.is_some()
    }
}

/// Free hyperparameters, all optimized in log-space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Hyper {
    LogLengthscale,
    LogOmega,
    LogNoise,
    LogContextLengthscale,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelConfig {
    /// Matérn lengthscale on normalized continuous inputs.
    pub l_x: f64,
    /// Categorical kernel variance.
    pub omega: f64,
    /// Weight of the product composition in `κ_xc`.
    pub lambda: f64,
    /// Temporal dynamics level in `[0, 1]`.
    pub rho: f64,
    /// Matérn lengthscale on standardized contexts.
    pub l_s: f64,
    /// Observation noise variance.
    pub sigma_o2: f64,
    pub contextual: bool,
    /// Also learn `l_s` by marginal likelihood (contextual mode only).
    pub learn_l_s: bool,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            l_x: 0.5,
            omega: 1.0,
            lambda: 0.5,
            rho: 0.0,
            l_s: 0.2,
            sigma_o2: 0.01,
            contextual: false,
            learn_l_s: false,
        }
    }
}

impl KernelConfig {
    pub fn validate(&self) -> Result<()> {
        ensure_positive(self.l_x, "l_x")?;
        ensure_positive(self.omega, "omega")?;
        ensure_positive(self.sigma_o2, "sigma_o2")?;
        ensure_positive(self.l_s, "l_s")?;
        check_unit(self.lambda, "lambda")?;
        check_unit(self.rho, "rho")?;
        Ok(())
    }

    pub fn free_params(&self) -> Vec<Hyper> {
        let mut v = vec![Hyper::LogLengthscale, Hyper::LogOmega, Hyper::LogNoise];
        if self.contextual && self.learn_l_s {
            v.push(Hyper::LogContextLengthscale);
        }
        v
    }

    pub fn log_param(&self, h: Hyper) -> f64 {
        match h {
            Hyper::LogLengthscale => self.l_x.ln(),
            Hyper::LogOmega => self.omega.ln(),
            Hyper::LogNoise => self.sigma_o2.ln(),
            Hyper::LogContextLengthscale => self.l_s.ln(),
        }
    }

    pub fn set_log_param(&mut self, h: Hyper, v: f64) {
        let e = v.exp();
        match h {
            Hyper::LogLengthscale => self.l_x = e,
            Hyper::LogOmega => self.omega = e,
            Hyper::LogNoise => self.sigma_o2 = e,
            Hyper::LogContextLengthscale => self.l_s = e,
        }
    }

    pub fn log_params(&self) -> Vec<f64> {
        self.free_params()
            .into_iter()
            .map(|h| self.log_param(h))
            .collect()
    }

    pub fn with_log_params(&self, theta: &[f64]) -> Self {
        let mut out = *self;
        for (h, &v) in self.free_params().into_iter().zip(theta) {
            out.set_log_param(h, v);
        }
        out
    }

    /// Prior variance `κ(z, z)`, identical for every point.
    pub fn prior_variance(&self) -> f64 {
        (1.0 - self.lambda) * (self.omega + 1.0) + self.lambda * self.omega
    }

    fn mode(&self) -> &'static str {
        if self.contextual {
            "contextual"
        } else {
            "non-contextual"
        }
    }
}

fn check_unit(v: f64, name: &'static str) -> Result<f64> {
    if v.is_finite() && (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: format!("must lie in [0, 1], got {v}"),
        })
    }
}

/// Matérn-5/2 as a function of distance.
#[inline]
pub(crate) fn matern_52_dist(r: f64, l: f64) -> f64 {
    let u = SQRT5 * r / l;
    (1.0 + u + u * u / 3.0) * (-u).exp()
}

/// `∂κ/∂log l` of Matérn-5/2 at distance `r`.
#[inline]
pub(crate) fn matern_52_dlogl(r: f64, l: f64) -> f64 {
    let u = SQRT5 * r / l;
    u * u / 3.0 * (1.0 + u) * (-u).exp()
}

/// Factor `g` with `∂κ/∂x = g · (x - x')` for Matérn-5/2.
#[inline]
pub(crate) fn matern_52_dx_factor(r: f64, l: f64) -> f64 {
    let u = SQRT5 * r / l;
    -5.0 / (3.0 * l * l) * (1.0 + u) * (-u).exp()
}

#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn matern_52(x: &[f64], x2: &[f64], l_x: f64) -> Result<f64> {
    ensure_positive(l_x, "l_x")?;
    if x.len() != x2.len() {
        return Err(Error::DimensionMismatch {
            what: "continuous vector",
            expected: x.len(),
            got: x2.len(),
        });
    }
    for &v in x.iter().chain(x2) {
        ensure_finite(v, "continuous vector")?;
    }
    Ok(matern_52_dist(sq_dist(x, x2).sqrt(), l_x))
}

#[inline]
pub(crate) fn match_fraction(c: &[usize], c2: &[usize]) -> f64 {
    if c.is_empty() {
        return 0.0;
    }
    let hits = c.iter().zip(c2).filter(|(a, b)| a == b).count();
    hits as f64 / c.len() as f64
}

pub fn categorical_kernel(c: &[usize], c2: &[usize], omega: f64) -> Result<f64> {
    ensure_positive(omega, "omega")?;
    if c.len() != c2.len() {
        return Err(Error::DimensionMismatch {
            what: "categorical vector",
            expected: c.len(),
            got: c2.len(),
        });
    }
    Ok(omega * match_fraction(c, c2))
}

#[inline]
pub(crate) fn compose_xc(kc: f64, kx: f64, lambda: f64) -> f64 {
    (1.0 - lambda) * (kc + kx) + lambda * kc * kx
}

pub fn mixed_kernel(z: &MixedPoint, z2: &MixedPoint, cfg: &KernelConfig) -> Result<f64> {
    check_unit(cfg.lambda, "lambda")?;
    let kc = categorical_kernel(&z.c, &z2.c, cfg.omega)?;
    let kx = matern_52(&z.x, &z2.x, cfg.l_x)?;
    Ok(compose_xc(kc, kx, cfg.lambda))
}

#[inline]
pub(crate) fn temporal_factor(dt: u32, rho: f64) -> f64 {
    if dt == 0 {
        1.0
    } else {
        (1.0 - rho).powf(dt as f64 / 2.0)
    }
}

pub fn temporal_kernel(t: u32, t2: u32, rho: f64) -> Result<f64> {
    check_unit(rho, "rho")?;
    if t < 1 || t2 < 1 {
        return Err(Error::InvalidParameter {
            name: "t",
            reason: "slot index starts at 1".into(),
        });
    }
    Ok(temporal_factor(t.abs_diff(t2), rho))
}

fn check_mode(z: &MixedPoint, cfg: &KernelConfig) -> Result<()> {
    if z.is_contextual() != cfg.contextual {
        return Err(Error::ContextMismatch {
            model: cfg.mode(),
            point: if z.is_contextual() {
                "contextual"
            } else {
                "non-contextual"
            },
        });
    }
    Ok(())
}

pub fn full_kernel(z: &MixedPoint, z2: &MixedPoint, cfg: &KernelConfig) -> Result<f64> {
    check_mode(z, cfg)?;
    check_mode(z2, cfg)?;
    let temp = temporal_kernel(z.t, z2.t, cfg.rho)?;
    let kxc = mixed_kernel(z, z2, cfg)?;
    let ks = match (&z.s, &z2.s) {
        (Some(s), Some(s2)) => matern_52(s, s2, cfg.l_s)?,
        _ => 1.0,
    };
    Ok(ks * temp * kxc)
}

/// Hyperparameter-independent pairwise quantities of a point set.
///
/// Refitting evaluates the Gram matrix for many hyperparameter values on a
/// fixed dataset; only distances, category overlaps and slot gaps are
/// needed, so they are computed once here. `ρ` is fixed per experiment and
/// folded into `temp`.
#[derive(Debug, Clone)]
pub struct PairwiseTerms {
    n: usize,
    // packed lower triangle, including the diagonal
    r_x: Vec<f64>,
    frac: Vec<f64>,
    temp: Vec<f64>,
    r_s: Option<Vec<f64>>,
}

impl PairwiseTerms {
    pub fn new(points: &[MixedPoint], cfg: &KernelConfig) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyData);
        }
        cfg.validate()?;
        let dim_x = points[0].x.len();
        let dim_c = points[0].c.len();
        for p in points {
            check_mode(p, cfg)?;
            if p.x.len() != dim_x {
                return Err(Error::DimensionMismatch {
                    what: "continuous vector",
                    expected: dim_x,
                    got: p.x.len(),
                });
            }
            if p.c.len() != dim_c {
                return Err(Error::DimensionMismatch {
                    what: "categorical vector",
                    expected: dim_c,
                    got: p.c.len(),
                });
            }
        }
        let n = points.len();
        let len = n * (n + 1) / 2;
        let mut r_x = Vec::with_capacity(len);
        let mut frac = Vec::with_capacity(len);
        let mut temp = Vec::with_capacity(len);
        let mut r_s = cfg.contextual.then(|| Vec::with_capacity(len));
        for i in 0..n {
            for j in 0..=i {
                let (a, b) = (&points[i], &points[j]);
                r_x.push(sq_dist(&a.x, &b.x).sqrt());
                frac.push(match_fraction(&a.c, &b.c));
                temp.push(temporal_factor(a.t.abs_diff(b.t), cfg.rho));
                if let (Some(rs), Some(sa), Some(sb)) = (r_s.as_mut(), &a.s, &b.s) {
                    if sa.len() != sb.len() {
                        return Err(Error::DimensionMismatch {
                            what: "context vector",
                            expected: sa.len(),
                            got: sb.len(),
                        });
                    }
                    rs.push(sq_dist(sa, sb).sqrt());
                }
            }
        }
        Ok(Self {
            n,
            r_x,
            frac,
            temp,
            r_s,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    fn kernel_at(&self, k: usize, cfg: &KernelConfig) -> f64 {
        let kx = matern_52_dist(self.r_x[k], cfg.l_x);
        let kc = cfg.omega * self.frac[k];
        let ks = self
            .r_s
            .as_ref()
            .map_or(1.0, |r| matern_52_dist(r[k], cfg.l_s));
        ks * self.temp[k] * compose_xc(kc, kx, cfg.lambda)
    }

    /// Dense `K` (no noise term).
    pub fn gram(&self, cfg: &KernelConfig) -> SquareMatrix {
        let mut out = SquareMatrix::zeros(self.n);
        let mut k = 0;
        for i in 0..self.n {
            for j in 0..=i {
                let v = self.kernel_at(k, cfg);
                out.set(i, j, v);
                out.set(j, i, v);
                k += 1;
            }
        }
        out
    }

    /// `Σ_ij Q_ij ∂(K + σ²I)_ij/∂θ` for every free hyperparameter, with `Q`
    /// a dense symmetric row-major matrix. This is the contraction the
    /// marginal likelihood gradient needs; it never materializes `∂K/∂θ`.
    pub fn contract_gradients(&self, cfg: &KernelConfig, q: &[f64]) -> Vec<f64> {
        let params = cfg.free_params();
        let mut out = vec![0.0; params.len()];
        let n = self.n;
        let mut k = 0;
        for i in 0..n {
            for j in 0..=i {
                let w = if i == j { q[i * n + i] } else { 2.0 * q[i * n + j] };
                let d = self.entry_gradients(k, cfg);
                for (o, h) in out.iter_mut().zip(&params) {
                    *o += w * d.get(*h);
                }
                k += 1;
            }
        }
        if let Some(pos) = params.iter().position(|h| *h == Hyper::LogNoise) {
            out[pos] = cfg.sigma_o2 * (0..n).map(|i| q[i * n + i]).sum::<f64>();
        }
        out
    }

    /// Dense `∂(K + σ²I)/∂θ` for each free hyperparameter.
    pub fn gradient_matrices(&self, cfg: &KernelConfig) -> Vec<(Hyper, SquareMatrix)> {
        let params = cfg.free_params();
        let mut mats: Vec<SquareMatrix> =
            params.iter().map(|_| SquareMatrix::zeros(self.n)).collect();
        let mut k = 0;
        for i in 0..self.n {
            for j in 0..=i {
                let d = self.entry_gradients(k, cfg);
                for (m, h) in mats.iter_mut().zip(&params) {
                    let v = if *h == Hyper::LogNoise {
                        if i == j {
                            cfg.sigma_o2
                        } else {
                            0.0
                        }
                    } else {
                        d.get(*h)
                    };
                    m.set(i, j, v);
                    m.set(j, i, v);
                }
                k += 1;
            }
        }
        params.into_iter().zip(mats).collect()
    }

    #[inline]
    fn entry_gradients(&self, k: usize, cfg: &KernelConfig) -> EntryGrad {
        let r = self.r_x[k];
        let kx = matern_52_dist(r, cfg.l_x);
        let dkx = matern_52_dlogl(r, cfg.l_x);
        let kc = cfg.omega * self.frac[k];
        let (ks, dks) = match &self.r_s {
            Some(rs) => (
                matern_52_dist(rs[k], cfg.l_s),
                matern_52_dlogl(rs[k], cfg.l_s),
            ),
            None => (1.0, 0.0),
        };
        let temp = self.temp[k];
        let lam = cfg.lambda;
        EntryGrad {
            l_x: ks * temp * ((1.0 - lam) + lam * kc) * dkx,
            omega: ks * temp * ((1.0 - lam) * kc + lam * kc * kx),
            l_s: dks * temp * compose_xc(kc, kx, lam),
        }
    }
}

struct EntryGrad {
    l_x: f64,
    omega: f64,
    l_s: f64,
}

impl EntryGrad {
    #[inline]
    fn get(&self, h: Hyper) -> f64 {
        match h {
            Hyper::LogLengthscale => self.l_x,
            Hyper::LogOmega => self.omega,
            Hyper::LogContextLengthscale => self.l_s,
            Hyper::LogNoise => 0.0,
        }
    }
}

/// Gram matrix `K[i][j] = κ(z_i, z_j)`, without the noise term.
pub fn gram(points: &[MixedPoint], cfg: &KernelConfig) -> Result<SquareMatrix> {
    Ok(PairwiseTerms::new(points, cfg)?.gram(cfg))
}

/// Analytic `∂(K + σ_o² I)/∂θ` for each free log-hyperparameter.
pub fn gram_gradients(
    points: &[MixedPoint],
    cfg: &KernelConfig,
) -> Result<Vec<(Hyper, SquareMatrix)>> {
    Ok(PairwiseTerms::new(points, cfg)?.gradient_matrices(cfg))
}

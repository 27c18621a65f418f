//! Multi-agent EXP3 with log-domain weights.
//!
//! One agent per device, each choosing among `arms` actions. Rewards arrive
//! as a single shared scalar; they are mapped to `[0, 1]` with a running
//! min/max before the importance-weighted update.

use rand::Rng;

use crate::error::{ensure_finite, Error, Result};

/// Running min/max normalization of raw rewards to `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RewardRange {
    bounds: Option<(f64, f64)>,
}

impl RewardRange {
    /// Expand the range with `y` and return its normalized value.
    ///
    /// The range starts at the first observation ±10 % of its magnitude.
    pub fn normalize(&mut self, y: f64) -> Result<f64> {
        ensure_finite(y, "reward")?;
        let (lo, hi) = match self.bounds {
            None => {
                let half = (0.1 * y.abs()).max(1e-12);
                (y - half, y + half)
            }
            Some((lo, hi)) => (lo.min(y), hi.max(y)),
        };
        self.bounds = Some((lo, hi));
        Ok(((y - lo) / (hi - lo)).clamp(0.0, 1.0))
    }

    pub fn bounds(&self) -> Option<(f64, f64)> {
        self.bounds
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Exp3Bank {
    agents: usize,
    arms: usize,
    gamma: f64,
    // agents × arms, row-major
    log_w: Vec<f64>,
    range: RewardRange,
}

impl Exp3Bank {
    pub fn new(agents: usize, arms: usize, gamma: f64) -> Result<Self> {
        if agents == 0 || arms == 0 {
            return Err(Error::InvalidParameter {
                name: "agents/arms",
                reason: "must be positive".into(),
            });
        }
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "gamma",
                reason: format!("must lie in (0, 1], got {gamma}"),
            });
        }
        Ok(Self {
            agents,
            arms,
            gamma,
            log_w: vec![0.0; agents * arms],
            range: RewardRange::default(),
        })
    }

    pub fn agents(&self) -> usize {
        self.agents
    }

    pub fn arms(&self) -> usize {
        self.arms
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn log_weights(&self, m: usize) -> &[f64] {
        &self.log_w[m * self.arms..(m + 1) * self.arms]
    }

    pub fn set_log_weights(&mut self, m: usize, w: &[f64]) -> Result<()> {
        if w.len() != self.arms {
            return Err(Error::DimensionMismatch {
                what: "log weights",
                expected: self.arms,
                got: w.len(),
            });
        }
        for &v in w {
            ensure_finite(v, "log weight")?;
        }
        self.log_w[m * self.arms..(m + 1) * self.arms].copy_from_slice(w);
        Ok(())
    }

    pub fn reward_range(&self) -> &RewardRange {
        &self.range
    }

    /// `q(k) = (1 - γ) w_k / Σ w + γ / K` for agent `m`.
    pub fn action_probabilities(&self, m: usize) -> Vec<f64> {
        assert!(m < self.agents, "agent {m} out of range");
        let lw = self.log_weights(m);
        let max = lw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = lw.iter().map(|v| (v - max).exp()).collect();
        let total: f64 = e.iter().sum();
        let floor = self.gamma / self.arms as f64;
        e.into_iter()
            .map(|v| (1.0 - self.gamma) * v / total + floor)
            .collect()
    }

    /// One independent draw per agent.
    pub fn sample_actions<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<usize> {
        (0..self.agents)
            .map(|m| sample_index(&self.action_probabilities(m), rng))
            .collect()
    }

    /// Normalize `y_raw` with the running range, then apply
    /// [`Exp3Bank::update_normalized`].
    pub fn update(&mut self, actions: &[usize], y_raw: f64) -> Result<f64> {
        self.check_actions(actions)?;
        let y = self.range.normalize(y_raw)?;
        self.update_normalized(actions, y)?;
        Ok(y)
    }

    /// Importance-weighted exponential update with a reward already in
    /// `[0, 1]`: the played arm of agent `m` gains `γ ŷ / (q_m(k) K)` in
    /// log-weight, other arms are unchanged.
    pub fn update_normalized(&mut self, actions: &[usize], y: f64) -> Result<()> {
        self.check_actions(actions)?;
        ensure_finite(y, "normalized reward")?;
        let scale = self.gamma / self.arms as f64;
        for (m, &k) in actions.iter().enumerate() {
            let q = self.action_probabilities(m)[k];
            self.log_w[m * self.arms + k] += scale * estimated_reward(y, q);
        }
        Ok(())
    }

    fn check_actions(&self, actions: &[usize]) -> Result<()> {
        if actions.len() != self.agents {
            return Err(Error::DimensionMismatch {
                what: "actions",
                expected: self.agents,
                got: actions.len(),
            });
        }
        if let Some(&k) = actions.iter().find(|&&k| k >= self.arms) {
            return Err(Error::InvalidParameter {
                name: "action",
                reason: format!("arm {k} out of range (arms = {})", self.arms),
            });
        }
        Ok(())
    }
}

/// Importance-weighted estimate for the played arm; unplayed arms get 0.
#[inline]
pub fn estimated_reward(y: f64, q_played: f64) -> f64 {
    y / q_played
}

/// Inverse-CDF draw from a probability vector.
pub fn sample_index<R: Rng + ?Sized>(p: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &v) in p.iter().enumerate() {
        acc += v;
        if u < acc {
            return i;
        }
    }
    p.len() - 1
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn equal_weights_are_uniform() {
        let b = Exp3Bank::new(2, 4, 0.3).unwrap();
        for q in b.action_probabilities(1) {
            assert!((q - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn gamma_one_is_uniform() {
        let mut b = Exp3Bank::new(1, 3, 1.0).unwrap();
        b.set_log_weights(0, &[5.0, -2.0, 0.0]).unwrap();
        for q in b.action_probabilities(0) {
            assert!((q - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn spot_probability() {
        let mut b = Exp3Bank::new(1, 3, 0.1).unwrap();
        b.set_log_weights(0, &[1.0, 0.0, 0.0]).unwrap();
        let q = b.action_probabilities(0);
        let e = std::f64::consts::E;
        let expect = 0.9 * e / (e + 2.0) + 0.1 / 3.0;
        assert!((q[0] - expect).abs() < 1e-15);
        assert!((q[0] - 0.551_839).abs() < 1e-6);
    }

    #[test]
    fn update_touches_only_played_arm() {
        let mut b = Exp3Bank::new(1, 4, 0.2).unwrap();
        b.update_normalized(&[2], 0.5).unwrap();
        let lw = b.log_weights(0);
        // q = 0.25 → φ̂ = 2, Δ = γ φ̂ / K = 0.1
        assert!((lw[2] - 0.1).abs() < 1e-15);
        assert_eq!(lw[0], 0.0);
        assert_eq!(lw[1], 0.0);
        assert_eq!(lw[3], 0.0);
        assert_eq!(estimated_reward(0.5, 0.25), 2.0);
    }

    #[test]
    fn errors() {
        assert!(Exp3Bank::new(1, 3, 0.0).is_err());
        assert!(Exp3Bank::new(1, 3, 1.5).is_err());
        let mut b = Exp3Bank::new(2, 3, 0.1).unwrap();
        assert!(b.update(&[0, 1], f64::NAN).is_err());
        assert!(b.update(&[0, 3], 1.0).is_err());
        assert!(b.update(&[0], 1.0).is_err());
    }

    #[test]
    fn reward_range_expands() {
        let mut r = RewardRange::default();
        assert!((r.normalize(-10.0).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(r.bounds(), Some((-11.0, -9.0)));
        assert_eq!(r.normalize(-5.0).unwrap(), 1.0);
        assert_eq!(r.normalize(-20.0).unwrap(), 0.0);
        assert!((r.normalize(-12.5).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn sampling_is_deterministic() {
        let b = Exp3Bank::new(3, 4, 0.5).unwrap();
        let mut r1 = ChaCha8Rng::seed_from_u64(9);
        let mut r2 = ChaCha8Rng::seed_from_u64(9);
        let a: Vec<_> = (0..50).map(|_| b.sample_actions(&mut r1)).collect();
        let c: Vec<_> = (0..50).map(|_| b.sample_actions(&mut r2)).collect();
        assert_eq!(a, c);
    }
}

use mecbo::bandit::{estimated_reward, sample_index, Exp3Bank};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn check_simplex(bank: &Exp3Bank) {
    let floor = bank.gamma() / bank.arms() as f64;
    for m in 0..bank.agents() {
        let q = bank.action_probabilities(m);
        let s: f64 = q.iter().sum();
        assert!((s - 1.0).abs() < 1e-12, "sum {s}");
        assert!(q.iter().all(|&v| v >= floor - 1e-15), "{q:?} below {floor}");
    }
}

#[test]
fn spot_probability() {
    let mut bank = Exp3Bank::new(1, 3, 0.1).unwrap();
    bank.set_log_weights(0, &[1.0, 0.0, 0.0]).unwrap();
    let e = std::f64::consts::E;
    let want = 0.9 * e / (e + 2.0) + 0.1 / 3.0;
    let q = bank.action_probabilities(0);
    assert!((q[0] - want).abs() < 1e-15);
    assert!((q[0] - 0.551839).abs() < 1e-6);
}

#[test]
fn gamma_one_is_uniform() {
    let mut bank = Exp3Bank::new(1, 4, 1.0).unwrap();
    bank.set_log_weights(0, &[30.0, -2.0, 0.0, 5.0]).unwrap();
    assert!(bank.action_probabilities(0).iter().all(|&q| (q - 0.25).abs() < 1e-15));
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut counts = [0usize; 4];
    let n = 100_000;
    for _ in 0..n {
        counts[bank.sample_actions(&mut rng)[0]] += 1;
    }
    for c in counts {
        assert!((c as f64 / n as f64 - 0.25).abs() < 0.01);
    }
}

#[test]
fn dominant_arm_is_played() {
    let mut bank = Exp3Bank::new(1, 3, 0.01).unwrap();
    bank.set_log_weights(0, &[50.0, 0.0, 0.0]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let hits = (0..10_000)
        .filter(|_| bank.sample_actions(&mut rng)[0] == 0)
        .count();
    assert!(hits as f64 / 1e4 >= 0.98);
}

#[test]
fn sampling_is_deterministic() {
    let bank = Exp3Bank::new(3, 3, 0.3).unwrap();
    let draw = |seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..50).map(|_| bank.sample_actions(&mut rng)).collect::<Vec<_>>()
    };
    assert_eq!(draw(7), draw(7));
}

#[test]
fn update_spot_value_and_unchosen_arms() {
    let mut bank = Exp3Bank::new(1, 4, 0.1).unwrap();
    assert_eq!(estimated_reward(0.5, 0.25), 2.0);
    bank.update_normalized(&[2], 0.5).unwrap();
    let lw = bank.log_weights(0);
    // γ φ̂ / K with φ̂ = 0.5 / 0.25
    assert!((lw[2] - 0.1 * 2.0 / 4.0).abs() < 1e-15);
    assert_eq!([lw[0], lw[1], lw[3]], [0.0, 0.0, 0.0]);
}

#[test]
fn estimate_is_unbiased_by_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let arms = rng.random_range(2..6);
        let gamma = rng.random_range(0.01..=1.0);
        let mut bank = Exp3Bank::new(1, arms, gamma).unwrap();
        let w: Vec<f64> = (0..arms).map(|_| rng.random_range(-5.0..5.0)).collect();
        bank.set_log_weights(0, &w).unwrap();
        let rewards: Vec<f64> = (0..arms).map(|_| rng.random_range(0.0..=1.0)).collect();
        let q = bank.action_probabilities(0);
        let scale = gamma / arms as f64;
        // E_k~q[φ̂(j)] = Σ_k q(k) 𝟙(k = j) ŷ_j / q(j)
        let mut expect = vec![0.0; arms];
        for played in 0..arms {
            let mut b = bank.clone();
            b.update_normalized(&[played], rewards[played]).unwrap();
            for j in 0..arms {
                let phi = (b.log_weights(0)[j] - w[j]) / scale;
                expect[j] += q[played] * phi;
            }
        }
        for j in 0..arms {
            assert!((expect[j] - rewards[j]).abs() < 1e-12, "{} vs {}", expect[j], rewards[j]);
        }
    }
}

#[test]
fn million_adversarial_updates_stay_finite() {
    let mut bank = Exp3Bank::new(2, 3, 0.1).unwrap();
    for _ in 0..1_000_000 {
        // reward 1 on the arm with the smallest probability, every agent
        let acts: Vec<usize> = (0..2)
            .map(|m| {
                let q = bank.action_probabilities(m);
                (0..3).min_by(|&a, &b| q[a].total_cmp(&q[b])).unwrap()
            })
            .collect();
        bank.update_normalized(&acts, 1.0).unwrap();
    }
    for m in 0..2 {
        assert!(bank.log_weights(m).iter().all(|v| v.is_finite()));
    }
    check_simplex(&bank);

    let mut fixed = Exp3Bank::new(1, 3, 0.1).unwrap();
    for _ in 0..1_000_000 {
        fixed.update_normalized(&[0], 1.0).unwrap();
    }
    assert!(fixed.log_weights(0)[0].is_finite());
    check_simplex(&fixed);
    assert!((fixed.action_probabilities(0)[0] - (0.9 + 0.1 / 3.0)).abs() < 1e-12);
}

#[test]
fn raw_rewards_are_normalized() {
    let mut bank = Exp3Bank::new(1, 2, 0.1).unwrap();
    let y0 = bank.update(&[0], -10.0).unwrap();
    assert!((y0 - 0.5).abs() < 1e-12);
    assert_eq!(bank.update(&[1], -20.0).unwrap(), 0.0);
    assert_eq!(bank.update(&[1], -5.0).unwrap(), 1.0);
    assert_eq!(bank.reward_range().bounds(), Some((-20.0, -5.0)));
    assert!(bank.update(&[0], f64::NAN).is_err());
    assert!(bank.update(&[2], 1.0).is_err());
}

#[test]
fn sample_index_follows_cdf() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let p = [0.0, 1.0, 0.0];
    assert!((0..100).all(|_| sample_index(&p, &mut rng) == 1));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn probabilities_on_simplex(
        w in prop::collection::vec(-700.0f64..700.0, 1..8),
        gamma in 1e-3f64..=1.0,
    ) {
        let mut bank = Exp3Bank::new(1, w.len(), gamma).unwrap();
        bank.set_log_weights(0, &w).unwrap();
        let q = bank.action_probabilities(0);
        prop_assert!((q.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(q.iter().all(|&v| v >= gamma / w.len() as f64 - 1e-15));
    }

    #[test]
    fn rewarded_arm_gains_probability(
        w in prop::collection::vec(-5.0f64..5.0, 2..6),
        gamma in 0.01f64..0.99,
        y in 0.01f64..=1.0,
        pick in any::<prop::sample::Index>(),
    ) {
        let mut bank = Exp3Bank::new(1, w.len(), gamma).unwrap();
        bank.set_log_weights(0, &w).unwrap();
        let k = pick.index(w.len());
        let before = bank.action_probabilities(0)[k];
        bank.update_normalized(&[k], y).unwrap();
        prop_assert!(bank.action_probabilities(0)[k] > before);
    }
}

"""Smoke test for the mecbo Python module."""

import math
import os

import mecbo

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def main():
    cfg = mecbo.KernelConfig(rho=0.1)
    assert abs(cfg.prior_variance() - 1.5) < 1e-12

    assert abs(mecbo.matern_52([0.3], [0.3], 0.5) - 1.0) < 1e-12
    assert abs(mecbo.temporal_kernel(1, 3, 0.19) - 0.81) < 1e-12
    assert mecbo.categorical_kernel([0, 1], [0, 1], 1.0) == 1.0

    pts = [mecbo.MixedPoint([i % 2], [0.2 * (i + 1)], i + 1) for i in range(4)]
    k = mecbo.gram(pts, cfg)
    assert len(k) == 4 and all(abs(k[i][j] - k[j][i]) < 1e-12 for i in range(4) for j in range(4))

    gp = mecbo.GpModel(cfg)
    for i, z in enumerate(pts):
        gp.add_observation(z, math.sin(i))
    mean, var = gp.posterior(pts[0])
    assert math.isfinite(mean) and var >= 0.0
    assert len(gp.lml_gradient()) == 3
    before = gp.log_marginal_likelihood()
    assert gp.fit_hyperparameters(restarts=2, seed=1) >= before - 1e-9

    bank = mecbo.Exp3Bank(2, 3, gamma=0.1, seed=7)
    a = bank.sample_actions()
    bank.update(a, 1.0)
    assert abs(sum(bank.action_probabilities(0)) - 1.0) < 1e-12

    env = mecbo.MecEnv(seed=3)
    c, p, f, value = env.oracle()
    assert abs(env.edc(c, p, f) + value) < 1e-9
    env.step()
    assert env.slot == 2 and len(env.context()) == 2 * env.m

    preset = os.path.join(ROOT, "configs", "preset_a.toml")
    cols = mecbo.run_experiment("mab", config=preset, slots=10, reps=2, seed=5)
    assert len(cols["y"]) == 20
    assert all(g >= -1e-6 for g in cols["regret"])

    try:
        mecbo.KernelConfig(rho=2.0)
    except ValueError:
        pass
    else:
        raise AssertionError("invalid rho accepted")

    print("python smoke test passed")


if __name__ == "__main__":
    main()

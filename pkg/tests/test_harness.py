"""Tests for experiment orchestration, grids, and result emission."""

import dataclasses
import json

import numpy as np
import pytest

from neuralbandit.harness import (
    ConfigError,
    EnvironmentConfig,
    ExperimentConfig,
    PolicyConfig,
    emit_results,
    grid_search,
    run_experiment,
    run_single,
)
from neuralbandit.policies import OraclePolicy


def linear_linucb_config(horizon=40, reps=2, seed=3, noise=0.1):
    return ExperimentConfig(
        environment=EnvironmentConfig(kind="linear", dimension=5, num_actions=4,
                                      horizon=horizon, noise_scale=noise),
        policy=PolicyConfig(algorithm="lin_ucb", alpha=1.0),
        repetitions=reps,
        base_seed=seed,
    )


def tiny_neural_config(**env_overrides):
    env = dict(kind="h1", dimension=4, num_actions=3, horizon=20, noise_scale=0.5)
    env.update(env_overrides)
    return ExperimentConfig(
        environment=EnvironmentConfig(**env),
        policy=PolicyConfig(algorithm="neural_ucb", width=4, depth=2, gamma=0.1,
                            eta=1e-3, cadence=10, batch_size=None, j_steps=5),
        repetitions=2,
        base_seed=9,
    )


class TestRunExperiment:
    def test_oracle_policy_has_zero_regret_on_noiseless_environment(self):
        config = tiny_neural_config(noise_scale=0.0)
        factory = lambda env, rng: (OraclePolicy(env), False)
        results = run_experiment(config, policy_factory=factory)
        for res in results:
            assert np.all(res.instant_regret == 0.0)
            assert res.final_regret == 0.0

    def test_same_seed_gives_identical_trajectories(self):
        config = tiny_neural_config()
        first = run_experiment(config)
        second = run_experiment(config)
        for a, b in zip(first, second):
            assert np.array_equal(a.instant_regret, b.instant_regret)
            assert np.array_equal(a.cum_regret, b.cum_regret)

    def test_repetition_seeds_offset_from_base(self):
        results = run_experiment(linear_linucb_config(reps=3, seed=11))
        assert [r.seed for r in results] == [11, 12, 13]

    def test_cumulative_is_prefix_sum_and_nondecreasing(self):
        results = run_experiment(linear_linucb_config())
        for res in results:
            assert np.allclose(res.cum_regret, np.cumsum(res.instant_regret), atol=0)
            assert np.all(np.diff(res.cum_regret) >= 0.0)

    def test_parallel_matches_sequential(self, monkeypatch):
        config = linear_linucb_config(reps=4)
        monkeypatch.setenv("NEURAL_BANDIT_THREADS", "1")
        sequential = run_experiment(config)
        monkeypatch.setenv("NEURAL_BANDIT_THREADS", "4")
        parallel = run_experiment(config)
        for a, b in zip(sequential, parallel):
            assert np.array_equal(a.instant_regret, b.instant_regret)

    def test_thread_env_var_validated(self, monkeypatch):
        monkeypatch.setenv("NEURAL_BANDIT_THREADS", "zero")
        with pytest.raises(ConfigError, match="NEURAL_BANDIT_THREADS"):
            run_experiment(linear_linucb_config())

    def test_validation_errors_are_exhaustive(self):
        config = ExperimentConfig(
            environment=EnvironmentConfig(kind="h1", horizon=0, noise_scale=-1.0),
            policy=PolicyConfig(algorithm="neural_ucb", width=7),
            repetitions=0,
        )
        with pytest.raises(ConfigError) as exc_info:
            run_experiment(config)
        text = str(exc_info.value)
        assert "environment.horizon" in text
        assert "environment.noise_scale" in text
        assert "policy.width" in text
        assert "repetitions" in text

    def test_dataset_horizon_longer_than_rows_rejected(self, tmp_path):
        path = tmp_path / "tiny.csv"
        path.write_text("a,b,label\n1,2,x\n3,4,y\n", encoding="utf-8")
        config = ExperimentConfig(
            environment=EnvironmentConfig(kind="dataset", dataset_path=str(path),
                                          label_column="label", horizon=5),
            policy=PolicyConfig(algorithm="random"),
            repetitions=1,
        )
        with pytest.raises(ConfigError, match="exceeds"):
            run_experiment(config)

    def test_random_policy_on_dataset_bandit(self, tmp_path):
        rng = np.random.default_rng(13)
        rows = ["a,b,label"] + [
            f"{rng.standard_normal():.4f},{rng.standard_normal():.4f},c{rng.integers(4)}"
            for _ in range(400)
        ]
        path = tmp_path / "synth.csv"
        path.write_text("\n".join(rows) + "\n", encoding="utf-8")
        config = ExperimentConfig(
            environment=EnvironmentConfig(kind="dataset", dataset_path=str(path),
                                          label_column="label", horizon=400),
            policy=PolicyConfig(algorithm="random"),
            repetitions=3,
            base_seed=21,
        )
        results = run_experiment(config)
        mean_final = np.mean([r.final_regret for r in results])
        assert mean_final == pytest.approx(0.75 * 400, rel=0.12)

    def test_every_config_algorithm_runs(self, tmp_path):
        for algorithm in ("neural_ucb", "neural_greedy", "neural_ucb0",
                          "neural_greedy0", "lin_ucb", "kernel_ucb", "random"):
            config = ExperimentConfig(
                environment=EnvironmentConfig(kind="h3", dimension=4, num_actions=3,
                                              horizon=8, noise_scale=0.2),
                policy=PolicyConfig(algorithm=algorithm, width=4, depth=2,
                                    eta=1e-3, cadence=5, batch_size=None, j_steps=3),
                repetitions=1,
                base_seed=5,
            )
            results = run_experiment(config)
            assert results[0].instant_regret.shape == (8,)


class TestEmitResults:
    def test_round_count_and_prefix_sums(self, tmp_path):
        results = run_experiment(linear_linucb_config(horizon=3, reps=2))
        files = emit_results(results, tmp_path)
        lines = files[0].read_text().strip().splitlines()
        assert lines[0] == "round,rep,instant_regret,cum_regret"
        assert len(lines) == 1 + 3 * 2
        running = 0.0
        for line in lines[1:4]:
            _, rep, instant, cum = line.split(",")
            assert rep == "0"
            running += float(instant)
            assert float(cum) == pytest.approx(running, rel=1e-10)

    def test_reemission_is_byte_identical(self, tmp_path):
        config = linear_linucb_config()
        results = run_experiment(config)
        first = emit_results(results, tmp_path / "a")
        second = emit_results(run_experiment(config), tmp_path / "b")
        for f1, f2 in zip(first, second):
            assert f1.read_bytes() == f2.read_bytes()

    def test_config_snapshot_contains_seeds(self, tmp_path):
        results = run_experiment(linear_linucb_config(reps=2, seed=30))
        files = emit_results(results, tmp_path)
        snapshot = json.loads(files[2].read_text())
        assert snapshot["seeds"] == [30, 31]
        assert snapshot["policy"]["algorithm"] == "lin_ucb"
        assert snapshot["policy"]["preprocess"] is False

    def test_summary_row(self, tmp_path):
        results = run_experiment(linear_linucb_config(reps=2))
        files = emit_results(results, tmp_path)
        header, row = files[1].read_text().strip().splitlines()
        assert header.startswith("algorithm,repetitions,horizon")
        cells = row.split(",")
        assert cells[0] == "lin_ucb"
        assert cells[1] == "2"
        finals = [r.final_regret for r in results]
        assert float(cells[3]) == pytest.approx(np.mean(finals), rel=1e-10)


class TestGridSearch:
    def test_single_point_grid_returns_that_config(self):
        config = linear_linucb_config(horizon=10, reps=1)
        best, table = grid_search(config, {"policy.alpha": [0.5]})
        assert best.policy.alpha == 0.5
        assert len(table) == 1
        assert table[0].overrides == {"policy.alpha": 0.5}

    def test_best_has_minimal_mean_and_appears_in_table(self):
        config = linear_linucb_config(horizon=30, reps=2)
        best, table = grid_search(config, {"policy.alpha": [0.1, 1.0, 10.0]})
        means = [e.mean_final_regret for e in table]
        winner = table[int(np.argmin(means))]
        assert best.policy.alpha == winner.overrides["policy.alpha"]
        assert winner.mean_final_regret == min(means)

    def test_duplicate_grid_points_resolve_to_first(self):
        config = linear_linucb_config(horizon=10, reps=1)
        best, table = grid_search(config, {"policy.alpha": [0.7, 0.7]})
        assert len(table) == 2
        assert table[0].mean_final_regret == table[1].mean_final_regret
        assert best.policy.alpha == 0.7

    def test_cap_exceeded_names_product_size(self):
        config = linear_linucb_config()
        grid = {"policy.alpha": list(np.linspace(0.1, 1.0, 20)),
                "policy.lam": list(np.linspace(0.5, 2.0, 20))}
        with pytest.raises(ConfigError, match="400"):
            grid_search(config, grid)

    def test_unknown_parameter_path_rejected(self):
        config = linear_linucb_config()
        with pytest.raises(ConfigError, match="parameter path"):
            grid_search(config, {"policy.no_such_knob": [1]})

    def test_empty_grid_rejected(self):
        with pytest.raises(ConfigError):
            grid_search(linear_linucb_config(), {})

    def test_nested_environment_override(self):
        config = linear_linucb_config(horizon=10, reps=1)
        best, table = grid_search(config, {"environment.noise_scale": [0.0, 0.5]})
        assert len(table) == 2
        assert best.environment.noise_scale in (0.0, 0.5)


class TestConfigSerialization:
    def test_from_dict_round_trip(self):
        data = {
            "environment": {"kind": "h2", "dimension": 6, "num_actions": 5,
                            "horizon": 100, "noise_scale": 0.3},
            "policy": {"algorithm": "neural_greedy", "width": 8, "epsilon": 0.05},
            "repetitions": 4,
            "base_seed": 17,
        }
        config = ExperimentConfig.from_dict(data)
        assert config.environment.kind == "h2"
        assert config.policy.epsilon == 0.05
        assert config.repetitions == 4
        snapshot = config.to_dict()
        assert snapshot["policy"]["preprocess"] is True

    def test_unknown_keys_rejected_with_paths(self):
        data = {"environment": {"kind": "h1", "horizont": 5},
                "policy": {"algorithm": "lin_ucb", "alhpa": 2},
                "bogus": 1}
        with pytest.raises(ConfigError) as exc_info:
            ExperimentConfig.from_dict(data)
        text = str(exc_info.value)
        assert "environment.horizont" in text
        assert "policy.alhpa" in text
        assert "bogus" in text

    def test_preprocess_override_survives(self):
        config = ExperimentConfig.from_dict({
            "environment": {"kind": "h1", "horizon": 5},
            "policy": {"algorithm": "lin_ucb", "preprocess": True},
        })
        assert config.policy.resolved_preprocess() is True


class TestRunSingle:
    def test_wall_clock_recorded(self):
        res = run_single(linear_linucb_config(horizon=5, reps=1), 0)
        assert res.wall_clock > 0.0
        assert res.seed == 3

    def test_secret_shared_across_reps(self):
        config = tiny_neural_config()
        # identical reward functions mean identical oracle means per context
        factory = lambda env, rng: (OraclePolicy(env), False)
        r0 = run_single(config, 0, policy_factory=factory)
        r1 = run_single(config, 1, policy_factory=factory)
        assert r0.seed != r1.seed
        # different context streams, but both runs are valid oracle runs
        assert r0.final_regret == r1.final_regret == 0.0

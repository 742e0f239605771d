import json

import numpy as np
import pytest

from flexact.experiment import (
    ConfigError,
    ExperimentConfig,
    TrialResult,
    aggregate,
    build_dataset,
    config_from_dict,
    geometric_grid,
    grid_search,
    load_config,
    read_final,
    run_experiment,
    run_trial,
    with_axis,
    write_results,
)

SMALL = {
    "model": {"kind": "lstm", "layer_sizes": [3, 4], "gate_activation": "p-sig-ramp"},
    "data": {"synth": {"d": 3, "T": 200}},
    "epochs": 2,
    "n_trials": 2,
    "reg.delta1": 0.025,
}


def _trial(seed, final):
    return TrialResult(seed, [final + 1, final], [final + 2, final + 1], final, final + 3)


def test_aggregate_hand_example():
    res = aggregate([_trial(0, 1.0), _trial(1, 2.0)])
    assert res.test_mean == 1.5 and res.test_se == pytest.approx(0.5, abs=1e-15)
    np.testing.assert_allclose(res.train_se, [0.5, 0.5])


def test_aggregate_identical_and_order():
    res = aggregate([_trial(0, 1.0), _trial(1, 1.0)])
    assert not np.any(res.train_se) and res.test_se == 0.0
    a = aggregate([_trial(0, 1.0), _trial(1, 2.0), _trial(2, 4.0)])
    b = aggregate([_trial(2, 4.0), _trial(0, 1.0), _trial(1, 2.0)])
    assert np.array_equal(a.val_mean, b.val_mean) and a.test_se == b.test_se
    with pytest.raises(ConfigError):
        aggregate([_trial(0, 1.0)])


def test_geometric_grid():
    np.testing.assert_allclose(geometric_grid(0.001, 0.1, 3), [0.001, 0.01, 0.1], rtol=1e-15)
    assert geometric_grid(0.5, 2.0, 2).tolist() == [0.5, 2.0]
    with pytest.raises(ConfigError):
        geometric_grid(0.1, 0.01, 3)


def test_grid_picks_boundary_of_monotone_objective():
    cfg = config_from_dict(SMALL)
    res = grid_search(cfg, "lr", 1e-4, 1e-1, 4, evaluate=lambda c: np.array([c.optim.lr, c.optim.lr * 1.1]))
    assert res.best == pytest.approx(1e-4)
    res = grid_search(cfg, "reg_delta1", 1e-4, 1e-1, 4, evaluate=lambda c: np.array([-c.reg.delta1]))
    assert res.best == pytest.approx(1e-1)
    with pytest.raises(ConfigError):
        with_axis(cfg, "momentum", 0.9)


def test_zero_epochs():
    cfg = config_from_dict({**SMALL, "epochs": 0})
    t = run_trial(cfg, 3)
    assert t.train_mse == [] and t.val_mse == []
    data = build_dataset(cfg.data)
    # an untrained model: test MSE of the initial parameters
    t2 = run_trial(cfg, 3, data)
    assert t.test_mse == t2.test_mse


def test_trial_deterministic_and_learns():
    cfg = config_from_dict({**SMALL, "epochs": 5, "shuffle": True})
    a, b = run_trial(cfg, 11), run_trial(cfg, 11)
    assert (a.train_mse, a.val_mse, a.test_mse) == (b.train_mse, b.val_mse, b.test_mse)
    assert a.train_mse[-1] < a.initial_train_mse


def test_results_round_trip(tmp_path):
    cfg = config_from_dict(SMALL)
    res = run_experiment(cfg)
    paths = write_results(res, tmp_path)
    assert [p.name for p in paths] == ["curves.csv", "trials.csv", "final.csv"]
    assert read_final(paths[2]).tolist() == [t.test_mse for t in res.trials]
    lines = paths[0].read_text().splitlines()
    assert lines[0] == "epoch,split,mean_mse,stderr_mse,n_trials" and len(lines) == 1 + 2 * 2 + 1


def test_config_errors(tmp_path):
    with pytest.raises(ConfigError):
        config_from_dict({"epochs": -1})
    with pytest.raises(ConfigError):
        config_from_dict({"model": {"kind": "lstm", "gate_activation": "swish"}})
    with pytest.raises(ConfigError):
        config_from_dict({"data": {"source": "idx", "path": str(tmp_path / "missing")}})
    with pytest.raises(ConfigError):
        config_from_dict({"optimiser": "adam"})
    with pytest.raises(ConfigError):
        config_from_dict({"reg": {"Delta": 2.0}})
    with pytest.raises(ConfigError):
        run_experiment(config_from_dict({**SMALL, "n_trials": 1}), error_bars=True)
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(bad)


def test_mismatched_data_rejected():
    cfg = config_from_dict({**SMALL, "data": {"synth": {"d": 5, "T": 200}}})
    with pytest.raises(ConfigError):
        run_trial(cfg, 0)


def test_relative_data_path(tmp_path):
    (tmp_path / "r.csv").write_text("a,b,c\n" + "\n".join(",".join(str(v) for v in row) for row in np.random.default_rng(0).standard_normal((60, 3))))
    (tmp_path / "cfg.json").write_text(json.dumps({**SMALL, "data": {"source": "csv", "path": "r.csv"}}))
    cfg = load_config(tmp_path / "cfg.json")
    assert len(build_dataset(cfg.data).train[0]) == int(0.64 * 50)


def test_cae_experiment_on_idx(digits_idx):
    cfg = config_from_dict({
        "model": {"kind": "cae", "preset": "cae1", "activation": "p-e2-relu"},
        "data": {"source": "idx", "path": str(digits_idx), "limit": 100},
        "epochs": 1, "n_trials": 1, "batch_size": 25,
    })
    t = run_trial(cfg, 0)
    assert len(t.val_mse) == 1 and t.train_mse[0] < t.initial_train_mse


def test_to_dict_round_trip():
    cfg = config_from_dict({**SMALL, "reg": {"lambda": {"0": 2.0}}})
    again = config_from_dict(cfg.to_dict())
    assert again.reg == cfg.reg and again.model == cfg.model and isinstance(again, ExperimentConfig)

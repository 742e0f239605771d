"""Experiment configuration, multi-seed training and grid search."""

from __future__ import annotations

import copy
import csv
import json
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .data import (
    DataError,
    batches,
    load_idx_images,
    load_returns_csv,
    sequential_split,
    synth_var_series,
    window_series,
)
from .nn import ModelSpec, ModelSpecError, mse
from .optim import Optimizer, model_groups
from .regularization import RegConfig, total_cost
from .stats import mean_stderr

log = logging.getLogger(__name__)


class ConfigError(ValueError):
    pass


@dataclass
class DataConfig:
    source: str = "synth"
    path: str | None = None
    window: int = 10
    limit: int | None = None
    synth: dict = field(default_factory=lambda: {"d": 7, "T": 2000, "spectral_radius": 0.6, "noise_sd": 1.0, "seed": 0})


@dataclass
class OptimConfig:
    kind: str = "adam"
    lr: float = 0.001
    lr_activation: float | None = None


@dataclass
class ExperimentConfig:
    model: ModelSpec = field(default_factory=ModelSpec)
    data: DataConfig = field(default_factory=DataConfig)
    optim: OptimConfig = field(default_factory=OptimConfig)
    reg: RegConfig = field(default_factory=RegConfig)
    epochs: int = 30
    batch_size: int = 50
    n_trials: int = 5
    seed: int = 0
    shuffle: bool = False
    out: str = "results"

    def validate(self) -> None:
        if self.n_trials < 1:
            raise ConfigError("n_trials must be >= 1")
        if self.epochs < 0 or self.batch_size < 1:
            raise ConfigError("epochs must be >= 0 and batch_size >= 1")
        if self.optim.kind not in ("adam", "sgd"):
            raise ConfigError(f"optim.kind must be 'adam' or 'sgd', got {self.optim.kind!r}")
        if self.data.source not in ("synth", "csv", "idx", "npy"):
            raise ConfigError(f"unknown data.source {self.data.source!r}")
        if self.data.source != "synth":
            if not self.data.path or not Path(self.data.path).is_file():
                raise ConfigError(f"data.path {self.data.path!r} does not exist")
        try:
            self.model.validate()
        except (ModelSpecError, ValueError) as e:
            raise ConfigError(str(e)) from e

    def to_dict(self) -> dict:
        d = asdict(self)
        d["model"] = self.model.to_dict()
        reg = d.pop("reg")
        reg["lambda"] = {str(k): v for k, v in reg.pop("lambdas").items()}
        d["reg"] = reg
        return d


def _nest(flat: dict) -> dict:
    """Expand dotted keys (``reg.delta1``) into nested dictionaries."""
    out: dict = {}
    for key, value in flat.items():
        if isinstance(value, dict):
            value = _nest(value)
        node = out
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        if isinstance(value, dict) and isinstance(node.get(parts[-1]), dict):
            node[parts[-1]].update(value)
        else:
            node[parts[-1]] = value
    return out


def _fields(cls, d: dict, section: str) -> dict:
    unknown = set(d) - set(cls.__dataclass_fields__)
    if unknown:
        raise ConfigError(f"unknown keys in {section}: {sorted(unknown)}")
    return d


def config_from_dict(raw: dict) -> ExperimentConfig:
    d = _nest(raw)
    try:
        model = ModelSpec.from_dict(d.pop("model", {}))
        data_d = d.pop("data", {})
        synth = {**DataConfig().synth, **data_d.pop("synth", {})}
        data = DataConfig(**_fields(DataConfig, data_d, "data"), synth=synth)
        optim = OptimConfig(**_fields(OptimConfig, d.pop("optim", {}), "optim"))
        reg_d = dict(d.pop("reg", {}))
        if "lambda" in reg_d:
            reg_d["lambdas"] = reg_d.pop("lambda")
        reg = RegConfig(**_fields(RegConfig, reg_d, "reg"))
        cfg = ExperimentConfig(model=model, data=data, optim=optim, reg=reg, **_fields(ExperimentConfig, d, "config"))
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e)) from e
    cfg.validate()
    return cfg


def load_config(path) -> ExperimentConfig:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    raw = _nest(raw)
    data_path = raw.get("data", {}).get("path")
    # relative data paths are resolved against the config file's directory
    if data_path and not Path(data_path).is_absolute():
        candidate = Path(path).parent / data_path
        if candidate.is_file():
            raw["data"]["path"] = str(candidate)
    return config_from_dict(raw)


# -- data -------------------------------------------------------------------


@dataclass
class Dataset:
    train: tuple[np.ndarray, np.ndarray]
    val: tuple[np.ndarray, np.ndarray]
    test: tuple[np.ndarray, np.ndarray]


def build_dataset(cfg: DataConfig) -> Dataset:
    if cfg.source in ("synth", "csv"):
        if cfg.source == "synth":
            s = cfg.synth
            series = synth_var_series(int(s["d"]), int(s["T"]), float(s["spectral_radius"]), float(s["noise_sd"]), s["seed"])
        else:
            series = load_returns_csv(cfg.path)
        if cfg.limit:
            series = series[: cfg.limit]
        ws = window_series(series, cfg.window)
        x, y = ws.inputs, ws.targets
    else:
        images = load_idx_images(cfg.path) if cfg.source == "idx" else np.load(cfg.path).astype(np.float64)
        if images.ndim != 4:
            raise DataError(f"expected N x C x H x W images, got {images.shape}")
        if cfg.limit:
            images = images[: cfg.limit]
        x = y = images
    split = sequential_split(len(x))

    def part(r):
        return x[r.start : r.stop], y[r.start : r.stop]

    return Dataset(part(split.train), part(split.val), part(split.test))


def _check_compatible(model_spec: ModelSpec, data: Dataset) -> None:
    x = data.train[0]
    if model_spec.kind == "lstm":
        if x.ndim != 3 or x.shape[2] != model_spec.layer_sizes[0]:
            raise ConfigError(f"LSTM input size {model_spec.layer_sizes[0]} does not match data of shape {x.shape[1:]}")
    else:
        shape, _ = model_spec.conv_stack()
        if x.ndim != 4 or tuple(x.shape[1:]) != tuple(shape):
            raise ConfigError(f"autoencoder expects images {tuple(shape)}, data has {x.shape[1:]}")


# -- training ---------------------------------------------------------------


@dataclass
class TrialResult:
    seed: int
    train_mse: list[float]
    val_mse: list[float]
    test_mse: float
    initial_train_mse: float
    wall_time: float = 0.0

    @property
    def min_val_mse(self) -> float:
        return min(self.val_mse)


def evaluate(model, x, y, chunk: int = 500) -> float:
    total = 0.0
    for start in range(0, len(x), chunk):
        pred = model.forward(x[start : start + chunk])
        diff = pred - y[start : start + chunk]
        total += float(np.sum(diff * diff))
    return total / y.size


def run_trial(config: ExperimentConfig, seed: int, data: Dataset | None = None) -> TrialResult:
    """Train one model from a seeded initialization and record its curves."""
    if data is None:
        data = build_dataset(config.data)
    _check_compatible(config.model, data)
    rng = np.random.default_rng(seed)
    model = config.model.build(rng)
    blocks = model.activation_blocks()
    weights = model.weight_parameters()
    opt = Optimizer(model_groups(model, config.optim.lr, config.optim.lr_activation), config.optim.kind)
    x_train, y_train = data.train
    start = time.perf_counter()
    initial = evaluate(model, x_train, y_train)
    train_curve, val_curve = [], []
    for epoch in range(config.epochs):
        for idx in batches(len(x_train), config.batch_size, rng if config.shuffle else None):
            opt.zero_grad()
            loss, grad = mse(model.forward(x_train[idx]), y_train[idx])
            if not np.isfinite(loss):
                raise FloatingPointError(f"seed {seed}: loss diverged in epoch {epoch + 1}")
            model.backward(grad)
            _, reg_grads = total_cost(loss, blocks, config.reg, weights)
            for p, g in reg_grads:
                p.grad += g
            opt.step()
            for b in blocks:
                b.project()
        train_curve.append(evaluate(model, x_train, y_train))
        val_curve.append(evaluate(model, *data.val))
        log.debug("seed %d epoch %d train %.6g val %.6g", seed, epoch + 1, train_curve[-1], val_curve[-1])
    test = evaluate(model, *data.test)
    return TrialResult(seed, train_curve, val_curve, test, initial, time.perf_counter() - start)


@dataclass
class ExperimentResult:
    trials: list[TrialResult]
    train_mean: np.ndarray
    train_se: np.ndarray
    val_mean: np.ndarray
    val_se: np.ndarray
    test_mean: float
    test_se: float

    @property
    def min_val(self) -> np.ndarray:
        return np.array([t.min_val_mse for t in self.trials])


def aggregate(trials: list[TrialResult], error_bars: bool = True) -> ExperimentResult:
    if error_bars and len(trials) < 2:
        raise ConfigError("standard errors need at least two trials")
    trials = sorted(trials, key=lambda t: t.seed)
    epochs = len(trials[0].train_mse)
    train = np.array([t.train_mse for t in trials]).reshape(len(trials), epochs)
    val = np.array([t.val_mse for t in trials]).reshape(len(trials), epochs)
    tm, ts = mean_stderr(train)
    vm, vs = mean_stderr(val)
    test_m, test_s = mean_stderr(np.array([t.test_mse for t in trials]))
    return ExperimentResult(trials, tm, ts, vm, vs, float(test_m), float(test_s))


def run_experiment(config: ExperimentConfig, error_bars: bool | None = None) -> ExperimentResult:
    config.validate()
    if error_bars is None:
        error_bars = config.n_trials > 1
    if error_bars and config.n_trials < 2:
        raise ConfigError("error bars need n_trials >= 2")
    data = build_dataset(config.data)
    trials = []
    for k in range(config.n_trials):
        trials.append(run_trial(config, config.seed + k, data))
        log.info("trial %d/%d (seed %d): test mse %.6g", k + 1, config.n_trials, config.seed + k, trials[-1].test_mse)
    return aggregate(trials, error_bars)


def _f(x: float) -> str:
    return repr(float(x))


def write_results(result: ExperimentResult, out_dir) -> list[Path]:
    """Write ``curves.csv``, ``trials.csv`` and ``final.csv`` into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    n = len(result.trials)
    paths = [out / "curves.csv", out / "trials.csv", out / "final.csv"]
    with open(paths[0], "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["epoch", "split", "mean_mse", "stderr_mse", "n_trials"])
        for e in range(len(result.train_mean)):
            w.writerow([e + 1, "train", _f(result.train_mean[e]), _f(result.train_se[e]), n])
            w.writerow([e + 1, "val", _f(result.val_mean[e]), _f(result.val_se[e]), n])
        w.writerow([len(result.train_mean), "test", _f(result.test_mean), _f(result.test_se), n])
    with open(paths[1], "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["seed", "epoch", "train_mse", "val_mse"])
        for t in result.trials:
            for e, (tr, va) in enumerate(zip(t.train_mse, t.val_mse)):
                w.writerow([t.seed, e + 1, _f(tr), _f(va)])
    with open(paths[2], "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["seed", "test_mse"])
        for t in result.trials:
            w.writerow([t.seed, _f(t.test_mse)])
    return paths


def read_final(path) -> np.ndarray:
    with open(path, newline="", encoding="utf-8") as f:
        rows = list(csv.DictReader(f))
    if not rows or "test_mse" not in rows[0]:
        raise ConfigError(f"{path} is not a final.csv file (needs a test_mse column)")
    return np.array([float(r["test_mse"]) for r in rows])


# -- grid search ------------------------------------------------------------


GRID_AXES = ("lr", "reg_delta1", "reg_delta2")


def geometric_grid(lo: float, hi: float, n_points: int) -> np.ndarray:
    if not 0 < lo < hi:
        raise ConfigError(f"grid needs 0 < lo < hi, got lo={lo}, hi={hi}")
    if n_points < 2:
        raise ConfigError("grid needs at least two points")
    j = np.arange(n_points)
    grid = lo * (hi / lo) ** (j / (n_points - 1))
    grid[0], grid[-1] = lo, hi
    return grid


def with_axis(config: ExperimentConfig, axis: str, value: float) -> ExperimentConfig:
    cfg = copy.deepcopy(config)
    if axis == "lr":
        cfg.optim.lr = float(value)
    elif axis == "reg_delta1":
        cfg.reg.delta1 = float(value)
    elif axis == "reg_delta2":
        cfg.reg.delta2 = float(value)
    else:
        raise ConfigError(f"grid axis must be one of {GRID_AXES}, got {axis!r}")
    return cfg


@dataclass
class GridResult:
    axis: str
    values: np.ndarray
    scores: np.ndarray
    stderrs: np.ndarray

    @property
    def best_index(self) -> int:
        return int(np.argmin(self.scores))

    @property
    def best(self) -> float:
        return float(self.values[self.best_index])


def _min_val_scores(cfg: ExperimentConfig) -> np.ndarray:
    if cfg.epochs < 1:
        raise ConfigError("grid search needs at least one epoch")
    return run_experiment(cfg, error_bars=False).min_val


def grid_search(
    config: ExperimentConfig,
    axis: str,
    lo: float,
    hi: float,
    n_points: int,
    evaluate: Callable[[ExperimentConfig], np.ndarray] | None = None,
) -> GridResult:
    """Pick the grid value minimizing the mean minimum-validation MSE."""
    if axis not in GRID_AXES:
        raise ConfigError(f"grid axis must be one of {GRID_AXES}, got {axis!r}")
    values = geometric_grid(lo, hi, n_points)
    evaluate = evaluate or _min_val_scores
    means, ses = [], []
    for v in values:
        m, s = mean_stderr(np.atleast_1d(evaluate(with_axis(config, axis, v))))
        means.append(float(m))
        ses.append(float(s))
    return GridResult(axis, values, np.array(means), np.array(ses))


def write_grid(result: GridResult, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow([result.axis, "mean_min_val_mse", "stderr", "best"])
        for j, (v, m, s) in enumerate(zip(result.values, result.scores, result.stderrs)):
            w.writerow([_f(v), _f(m), _f(s), int(j == result.best_index)])
    return path

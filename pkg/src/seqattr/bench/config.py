"""Benchmark configuration: one YAML file fully determines a run.

The loader resolves defaults, validates every field against the method/model/
task registries, and computes a canonical hash that every emitted artifact
embeds.  ``output_dir`` and ``workers`` are excluded from the hash: they
change where and how fast results are produced, never what they are.
"""

from __future__ import annotations

import hashlib
import inspect
import json
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from ..attribution import METHODS
from ..data import DataConfig, task_spec
from ..errors import ConfigError
from ..models.base import ARCHS

DEFAULT_SEEDS = {"data": 101, "train": 202, "bench": 303}
DEFAULT_TASKS = ["mortality-like", "dka-like", "los-like"]
DEFAULT_MODELS = ["transformer", "stage-recurrent", "stage-attn"]
DEFAULT_METHODS = [
    {"name": "kernel-shap"},
    {"name": "lime", "n_samples": 200},
    {"name": "integrated-gradients", "n_steps": 50},
    {"name": "deeplift"},
    {"name": "gim", "temperature": 2.0},
    {"name": "chefer"},
    {"name": "random"},
]
DEFAULT_DATASET = {
    "n_train": 2000,
    "n_test": 500,
    "n_interpret": 1000,
    "vocab_size": 120,
    "n_labs": 5,
    "min_visits": 4,
    "max_visits": 32,
    "max_codes_per_visit": 6,
}
DEFAULT_MODEL = {
    "embed_dim": 32,
    "hidden_dim": 32,
    "n_layers": 1,
    "n_heads": 2,
    "ff_dim": 64,
}
DEFAULT_TRAINING = {"epochs": 6, "batch_size": 64, "lr": 1e-3, "val_fraction": 0.1}
DEFAULT_K_GRID = [0.01, 0.05, 0.10, 0.20, 0.50]

_TOP_KEYS = {
    "output_dir", "workers", "seeds", "tasks", "models", "methods",
    "dataset", "model", "training", "k_grid", "mask_policy",
}


@dataclass
class BenchConfig:
    output_dir: Path
    workers: int
    seeds: dict
    tasks: list
    models: list
    methods: list  # [{"name": ..., **settings}]
    dataset: dict
    model: dict
    training: dict
    k_grid: list
    lab_fill: float
    resolved: dict = field(repr=False, default_factory=dict)

    @property
    def config_hash(self) -> str:
        return hash_config(self.resolved)

    def data_config(self) -> DataConfig:
        d = self.dataset
        return DataConfig(
            vocab_size=d["vocab_size"],
            n_labs=d["n_labs"],
            min_visits=d["min_visits"],
            max_visits=d["max_visits"],
            max_codes_per_visit=d["max_codes_per_visit"],
        )

    def method_names(self) -> list:
        return [m["name"] for m in self.methods]

    def method_settings(self, name: str) -> dict:
        for m in self.methods:
            if m["name"] == name:
                return {k: v for k, v in m.items() if k != "name"}
        raise KeyError(name)


def hash_config(resolved: dict) -> str:
    hashed = {k: v for k, v in resolved.items() if k not in ("output_dir", "workers")}
    blob = json.dumps(hashed, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _need(value, kind, what):
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if not isinstance(value, kind) or isinstance(value, bool):
        raise ConfigError(f"{what} must be {kind.__name__}, got {value!r}")
    return value


def _merge_section(raw: dict, defaults: dict, section: str) -> dict:
    got = raw.get(section, {})
    if got is None:
        got = {}
    if not isinstance(got, dict):
        raise ConfigError(f"section '{section}' must be a mapping")
    unknown = set(got) - set(defaults)
    if unknown:
        raise ConfigError(f"unknown keys in '{section}': {sorted(unknown)}")
    merged = dict(defaults)
    merged.update(got)
    return merged


def load_config(path=None, overrides=None) -> BenchConfig:
    """Load and validate a benchmark config; ``path=None`` uses pure defaults.

    ``overrides`` is a shallow dict applied on top of the file (used by the
    CLI for --seed-override / --workers).
    """
    raw = {}
    if path is not None:
        text = Path(path).read_text(encoding="utf-8")
        raw = yaml.safe_load(text)
        if raw is None:
            raw = {}
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: config must be a mapping at the top level")
    for key, value in (overrides or {}).items():
        raw[key] = value

    unknown = set(raw) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")

    output_dir = Path(raw.get("output_dir", "runs/default"))
    workers = _need(raw.get("workers", 8), int, "workers")
    if workers < 1:
        raise ConfigError("workers must be >= 1")

    seeds = _merge_section(raw, DEFAULT_SEEDS, "seeds")
    for k, v in seeds.items():
        seeds[k] = _need(v, int, f"seeds.{k}")
        if seeds[k] < 0:
            raise ConfigError(f"seeds.{k} must be nonnegative")

    tasks = list(raw.get("tasks", DEFAULT_TASKS))
    if not tasks:
        raise ConfigError("tasks list is empty")
    for t in tasks:
        try:
            task_spec(t)
        except (KeyError, ValueError):
            raise ConfigError(f"unknown task: {t!r}") from None
    if len(set(tasks)) != len(tasks):
        raise ConfigError("duplicate task names")

    models = list(raw.get("models", DEFAULT_MODELS))
    if not models:
        raise ConfigError("models list is empty")
    for m in models:
        if m not in ARCHS:
            raise ConfigError(f"unknown model architecture: {m!r} (have {sorted(ARCHS)})")
    if len(set(models)) != len(models):
        raise ConfigError("duplicate model names")

    methods_raw = raw.get("methods", DEFAULT_METHODS)
    if not methods_raw:
        raise ConfigError("methods list is empty")
    methods = []
    for entry in methods_raw:
        if isinstance(entry, str):
            entry = {"name": entry}
        if not isinstance(entry, dict) or "name" not in entry:
            raise ConfigError(f"each method entry needs a 'name': {entry!r}")
        name = entry["name"]
        if name not in METHODS:
            raise ConfigError(f"unknown method: {name!r} (have {sorted(METHODS)})")
        allowed = set(inspect.signature(METHODS[name].__init__).parameters) - {"self"}
        unknown = set(entry) - allowed - {"name"}
        if unknown:
            raise ConfigError(f"method '{name}' does not accept settings {sorted(unknown)}")
        methods.append(dict(entry))
    names = [m["name"] for m in methods]
    if len(set(names)) != len(names):
        raise ConfigError("duplicate method names")

    dataset = _merge_section(raw, DEFAULT_DATASET, "dataset")
    for k in dataset:
        dataset[k] = _need(dataset[k], int, f"dataset.{k}")
        if dataset[k] < 1:
            raise ConfigError(f"dataset.{k} must be >= 1")
    if dataset["n_interpret"] > dataset["n_train"] + dataset["n_test"]:
        raise ConfigError(
            "n_interpret exceeds the generated pool: the interpretation subset "
            "is drawn from the train+test records without replacement"
        )
    if dataset["min_visits"] > dataset["max_visits"]:
        raise ConfigError("dataset.min_visits > dataset.max_visits")

    model = _merge_section(raw, DEFAULT_MODEL, "model")
    for k in model:
        model[k] = _need(model[k], int, f"model.{k}")
        if model[k] < 1:
            raise ConfigError(f"model.{k} must be >= 1")

    training = _merge_section(raw, DEFAULT_TRAINING, "training")
    training["epochs"] = _need(training["epochs"], int, "training.epochs")
    training["batch_size"] = _need(training["batch_size"], int, "training.batch_size")
    training["lr"] = _need(training["lr"], float, "training.lr")
    training["val_fraction"] = _need(training["val_fraction"], float, "training.val_fraction")
    if training["epochs"] < 1 or training["batch_size"] < 1:
        raise ConfigError("training.epochs and training.batch_size must be >= 1")
    if not 0.0 <= training["val_fraction"] < 1.0:
        raise ConfigError("training.val_fraction must lie in [0, 1)")

    k_grid = [float(k) for k in raw.get("k_grid", DEFAULT_K_GRID)]
    if not k_grid:
        raise ConfigError("k_grid is empty")
    for k in k_grid:
        if not 0.0 < k <= 1.0:
            raise ConfigError(f"k_grid fractions must lie in (0, 1], got {k}")

    mask_policy = _merge_section(raw, {"lab_fill": 0.0}, "mask_policy")
    lab_fill = float(_need(mask_policy["lab_fill"], float, "mask_policy.lab_fill"))

    resolved = {
        "output_dir": str(output_dir),
        "workers": workers,
        "seeds": seeds,
        "tasks": tasks,
        "models": models,
        "methods": methods,
        "dataset": dataset,
        "model": model,
        "training": training,
        "k_grid": k_grid,
        "mask_policy": {"lab_fill": lab_fill},
    }
    return BenchConfig(
        output_dir=output_dir,
        workers=workers,
        seeds=seeds,
        tasks=tasks,
        models=models,
        methods=methods,
        dataset=dataset,
        model=model,
        training=training,
        k_grid=k_grid,
        lab_fill=lab_fill,
        resolved=resolved,
    )

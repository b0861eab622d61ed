"""Synthetic clinical-sequence generator with a planted decision rule.

Every task plants a fully known rule so attribution quality can be scored
against ground truth:

* binary tasks (mortality-like, dka-like): positive risk is driven by the
  conjunction  "driver code occurs within the last `window` visits AND the
  final-visit value of lab 0 exceeds `lab_threshold`".  Labels flip with a
  small noise rate.
* los-like (5 classes): class index is  a + b + a*b + c  where a = driver in
  window, b = final lab 0 above threshold, c = final lab 1 above threshold;
  with probability noise_rate the label is redrawn uniformly.

The rule-satisfaction probability is calibrated so the observed positive
rate matches the requested one:  p_rule = (rate - eps) / (1 - 2*eps).

meta["ground_truth"] lists the decision-relevant feature positions: every
driver occurrence inside the window plus the final-visit decision labs (the
labs are always listed since the thresholds are always evaluated, so at
least one position is marked for every record).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..validation import check_positive_int, check_probability, rng_from_seed
from .records import CODE, LAB, PatientRecord


@dataclass(frozen=True)
class TaskSpec:
    name: str
    kind: str  # "binary" | "multiclass"
    n_classes: int
    positive_rate: float = 0.5  # binary tasks only
    noise_rate: float = 0.02
    driver_code: int = 7
    window: int = 8
    lab_threshold: float = 0.8

    def __post_init__(self):
        if self.kind not in ("binary", "multiclass"):
            raise ValueError(f"unknown task kind {self.kind!r}")
        check_probability(self.noise_rate, "noise_rate")
        if self.kind == "binary":
            check_probability(self.positive_rate, "positive_rate")
            if self.noise_rate >= 0.5:
                raise ValueError("noise_rate must be < 0.5 for binary tasks")
            if self.positive_rate <= self.noise_rate:
                raise ValueError(
                    "positive_rate must exceed noise_rate or the planted rule is unrecoverable"
                )

    @property
    def rule_probability(self) -> float:
        if self.kind != "binary":
            return 0.5
        return (self.positive_rate - self.noise_rate) / (1.0 - 2.0 * self.noise_rate)


# dka-like keeps the noise floor well under its 0.5% prevalence; the default
# 2% would drown the rule entirely.
_TASKS = {
    "mortality-like": TaskSpec(
        name="mortality-like", kind="binary", n_classes=2, positive_rate=0.30, noise_rate=0.02,
        driver_code=7,
    ),
    "dka-like": TaskSpec(
        name="dka-like", kind="binary", n_classes=2, positive_rate=0.005, noise_rate=0.0004,
        driver_code=11,
    ),
    "los-like": TaskSpec(
        name="los-like", kind="multiclass", n_classes=5, noise_rate=0.02, driver_code=13,
    ),
}

TASK_NAMES = tuple(_TASKS)


def task_spec(name: str, **overrides) -> TaskSpec:
    try:
        spec = _TASKS[name]
    except KeyError:
        raise ValueError(f"unknown task {name!r}; choose from {sorted(_TASKS)}") from None
    return replace(spec, **overrides) if overrides else spec


@dataclass(frozen=True)
class DataConfig:
    vocab_size: int = 120
    n_labs: int = 5
    min_visits: int = 4
    max_visits: int = 32
    max_codes_per_visit: int = 6
    distractor_rate: float = 0.15  # driver planted outside the window

    def __post_init__(self):
        check_positive_int(self.vocab_size, "vocab_size")
        check_positive_int(self.n_labs, "n_labs")
        check_positive_int(self.min_visits, "min_visits")
        check_positive_int(self.max_codes_per_visit, "max_codes_per_visit")
        if self.min_visits > self.max_visits:
            raise ValueError("min_visits > max_visits")
        if self.vocab_size < 20:
            raise ValueError("vocab_size too small to avoid driver collisions")
        check_probability(self.distractor_rate, "distractor_rate")


def _code_pool(cfg: DataConfig, exclude: int) -> np.ndarray:
    pool = np.arange(1, cfg.vocab_size)
    return pool[pool != exclude]


def _draw_visit_codes(rng, cfg: DataConfig, pool: np.ndarray) -> list:
    n = int(rng.integers(1, cfg.max_codes_per_visit + 1))
    return [int(c) for c in rng.choice(pool, size=n, replace=False, shuffle=False)]


def _window_start(n_visits: int, window: int) -> int:
    return max(0, n_visits - window)


def _plant_driver(rng, visits, lo, hi, driver, max_codes):
    v = int(rng.integers(lo, hi))
    if driver in visits[v]:
        return
    if len(visits[v]) >= max_codes:
        # the visit is at the configured width: overwrite a slot instead of
        # growing past max_codes_per_visit
        visits[v][int(rng.integers(0, len(visits[v])))] = driver
    else:
        slot = int(rng.integers(0, len(visits[v]) + 1))
        visits[v].insert(min(slot, len(visits[v])), driver)


def _force_lab(rng, labs, visit, lab_idx, above: bool, threshold: float):
    margin = 0.1 + abs(rng.normal()) * 0.8
    labs[visit][lab_idx] = threshold + margin if above else threshold - margin


def _base_record(rng, cfg: DataConfig):
    n_visits = int(rng.integers(cfg.min_visits, cfg.max_visits + 1))
    visits = [None] * n_visits  # codes filled by the caller (driver handling)
    labs = rng.normal(size=(n_visits, cfg.n_labs)).tolist()
    gaps = np.clip(rng.lognormal(1.0, 0.8, size=n_visits), 0.25, 60.0)
    gaps[0] = 0.0
    return n_visits, visits, labs, gaps.tolist()


def _ground_truth(visits, labs, window_start, driver, lab_indices, n_visits):
    gt = []
    for v in range(window_start, n_visits):
        for j, c in enumerate(visits[v]):
            if c == driver:
                gt.append([v, CODE, j])
    for li in lab_indices:
        gt.append([n_visits - 1, LAB, li])
    return gt


def generate(task: TaskSpec, n: int, seed, config: DataConfig = DataConfig()) -> list:
    """Draw n independent records for the task; fully determined by seed."""
    check_positive_int(n, "n")
    rng = rng_from_seed(seed)
    pool = _code_pool(config, task.driver_code)
    records = []
    for i in range(n):
        if task.kind == "binary":
            records.append(_gen_binary(rng, task, config, pool, f"{task.name}-{i:06d}"))
        else:
            records.append(_gen_multiclass(rng, task, config, pool, f"{task.name}-{i:06d}"))
    return records


def _fill_visits(rng, visits, cfg, pool):
    for v in range(len(visits)):
        visits[v] = _draw_visit_codes(rng, cfg, pool)


def _maybe_distract(rng, visits, cfg, wstart, driver):
    if wstart > 0 and rng.random() < cfg.distractor_rate:
        _plant_driver(rng, visits, 0, wstart, driver, cfg.max_codes_per_visit)


def _gen_binary(rng, task, cfg, pool, rid):
    n_visits, visits, labs, deltas = _base_record(rng, cfg)
    _fill_visits(rng, visits, cfg, pool)
    wstart = _window_start(n_visits, task.window)
    rule = bool(rng.random() < task.rule_probability)
    if rule:
        _plant_driver(rng, visits, wstart, n_visits, task.driver_code, cfg.max_codes_per_visit)
        _force_lab(rng, labs, n_visits - 1, 0, True, task.lab_threshold)
    _maybe_distract(rng, visits, cfg, wstart, task.driver_code)
    label = int(rule) if rng.random() >= task.noise_rate else int(not rule)
    gt = _ground_truth(visits, labs, wstart, task.driver_code, [0], n_visits)
    return PatientRecord(
        record_id=rid, visits=visits, labs=labs, deltas=deltas, label=label,
        meta={"task": task.name, "rule": {"satisfied": rule}, "ground_truth": gt},
    )


def _gen_multiclass(rng, task, cfg, pool, rid):
    n_visits, visits, labs, deltas = _base_record(rng, cfg)
    _fill_visits(rng, visits, cfg, pool)
    wstart = _window_start(n_visits, task.window)
    a = bool(rng.random() < 0.5)
    b = bool(rng.random() < 0.5)
    c = bool(rng.random() < 0.5)
    if a:
        _plant_driver(rng, visits, wstart, n_visits, task.driver_code, cfg.max_codes_per_visit)
    _force_lab(rng, labs, n_visits - 1, 0, b, task.lab_threshold)
    _force_lab(rng, labs, n_visits - 1, 1, c, task.lab_threshold)
    _maybe_distract(rng, visits, cfg, wstart, task.driver_code)
    z = int(a) + int(b) + int(a) * int(b) + int(c)
    label = z if rng.random() >= task.noise_rate else int(rng.integers(0, task.n_classes))
    gt = _ground_truth(visits, labs, wstart, task.driver_code, [0, 1], n_visits)
    return PatientRecord(
        record_id=rid, visits=visits, labs=labs, deltas=deltas, label=label,
        meta={"task": task.name, "rule": {"a": a, "b": b, "c": c, "z": z}, "ground_truth": gt},
    )


def rule_satisfied(record: PatientRecord, task: TaskSpec) -> bool:
    """Evaluate the planted rule directly on a record (oracle-side check)."""
    n = record.n_visits
    wstart = _window_start(n, task.window)
    driver = any(
        task.driver_code in record.visits[v] for v in range(wstart, n)
    )
    lab_hot = record.labs[-1][0] > task.lab_threshold
    return driver and lab_hot


def multiclass_rule_value(record: PatientRecord, task: TaskSpec) -> int:
    n = record.n_visits
    wstart = _window_start(n, task.window)
    a = any(task.driver_code in record.visits[v] for v in range(wstart, n))
    b = record.labs[-1][0] > task.lab_threshold
    c = record.labs[-1][1] > task.lab_threshold
    return int(a) + int(b) + int(a) * int(b) + int(c)

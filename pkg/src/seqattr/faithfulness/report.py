"""Aggregate faithfulness reports and runtime extrapolation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Cohort scales each synthetic task family stands in for; used only for the
# runtime-extrapolation column of the profile report.
EXTRAPOLATION_POPULATIONS = {
    "mortality-like": 137_778,
    "dka-like": 179_945,
    "los-like": 220_853,
}


@dataclass
class FaithfulnessReport:
    """One row of the benchmark report: a method on one model-task pair."""

    method: str
    model: str
    task: str
    comprehensiveness: float
    sufficiency: float
    composite: float
    runtime_per_record: float
    n_records: int
    k_grid: tuple

    def __post_init__(self):
        if self.n_records <= 0:
            raise ValueError("a report needs at least one scored record")
        expected = self.comprehensiveness * (1.0 - self.sufficiency)
        if self.composite != expected:
            raise ValueError("composite must equal comprehensiveness * (1 - sufficiency) exactly")


def build_report(method, model, task, results, runtimes, k_grid) -> FaithfulnessReport:
    """Aggregate per-record results into one report row.

    The composite is recomputed from the aggregated means so the stored
    invariant holds exactly.
    """
    if not results:
        raise ValueError(f"no faithfulness results for {method}/{model}/{task}")
    comp = float(np.mean([r.comprehensiveness for r in results]))
    suff = float(np.mean([r.sufficiency for r in results]))
    return FaithfulnessReport(
        method=method,
        model=model,
        task=task,
        comprehensiveness=comp,
        sufficiency=suff,
        composite=comp * (1.0 - suff),
        runtime_per_record=float(np.mean(runtimes)) if len(runtimes) else float("nan"),
        n_records=len(results),
        k_grid=tuple(k_grid),
    )


def seconds_per_record(runtimes) -> float:
    runtimes = np.asarray(runtimes, dtype=float)
    if runtimes.size == 0:
        raise ValueError("no runtimes recorded")
    return float(runtimes.mean())


def extrapolate_hours(sec_per_record: float, population: int) -> float:
    """Projected wall-clock to attribute an entire cohort, in hours."""
    if population < 0:
        raise ValueError("population must be nonnegative")
    return sec_per_record * population / 3600.0

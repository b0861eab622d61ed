"""Cross-method comparison: win matrices and paired significance tests."""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
from scipy.stats import binomtest


@dataclass
class WinMatrix:
    """Pairwise head-to-head wins over evaluation units (model-task pairs).

    ``wins[i, j]`` counts units where method i's mean composite strictly
    exceeds method j's; ``comparisons[i, j]`` counts the units both methods
    covered (ties count as comparisons but as wins for neither side), so a
    method that skips an architecture is judged only where it ran.
    """

    methods: list
    wins: np.ndarray
    comparisons: np.ndarray

    def as_fraction(self) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.comparisons > 0, self.wins / self.comparisons, np.nan)

    def to_markdown(self) -> str:
        out = io.StringIO()
        out.write("| method | " + " | ".join(self.methods) + " |\n")
        out.write("|---" * (len(self.methods) + 1) + "|\n")
        for i, row_name in enumerate(self.methods):
            cells = []
            for j in range(len(self.methods)):
                if i == j:
                    cells.append("—")
                else:
                    cells.append(f"{int(self.wins[i, j])}/{int(self.comparisons[i, j])}")
            out.write(f"| {row_name} | " + " | ".join(cells) + " |\n")
        return out.getvalue()

    def to_csv_rows(self) -> list:
        rows = []
        for i, a in enumerate(self.methods):
            for j, b in enumerate(self.methods):
                if i == j:
                    continue
                rows.append(
                    {
                        "method": a,
                        "opponent": b,
                        "wins": int(self.wins[i, j]),
                        "comparisons": int(self.comparisons[i, j]),
                    }
                )
        return rows


def win_matrix(unit_means: dict, methods=None) -> WinMatrix:
    """Build the head-to-head matrix from per-unit mean composites.

    ``unit_means`` maps method name -> {unit key -> mean composite}.  Units
    are compared only where both methods have an entry.
    """
    if methods is None:
        methods = sorted(unit_means)
    missing = [m for m in methods if m not in unit_means]
    if missing:
        raise ValueError(f"no scores for methods: {missing}")
    n = len(methods)
    wins = np.zeros((n, n))
    comparisons = np.zeros((n, n))
    for i, a in enumerate(methods):
        for j, b in enumerate(methods):
            if i == j:
                continue
            shared = set(unit_means[a]) & set(unit_means[b])
            comparisons[i, j] = len(shared)
            wins[i, j] = sum(1 for u in shared if unit_means[a][u] > unit_means[b][u])
    return WinMatrix(methods=list(methods), wins=wins, comparisons=comparisons)


def paired_sign_test(scores_a, scores_b) -> dict:
    """One-sided sign test that method a beats method b record-by-record.

    Ties are dropped (standard sign-test treatment); the p-value is the
    binomial tail probability of seeing at least this many a-wins among the
    non-tied pairs under the fair-coin null.
    """
    a = np.asarray(scores_a, dtype=float)
    b = np.asarray(scores_b, dtype=float)
    if a.shape != b.shape:
        raise ValueError("paired score arrays must have identical shape")
    if a.ndim != 1 or a.size == 0:
        raise ValueError("need a non-empty 1-d array of paired scores")
    n_pos = int(np.sum(a > b))
    n_neg = int(np.sum(a < b))
    n_eff = n_pos + n_neg
    if n_eff == 0:
        return {"n_pos": 0, "n_neg": 0, "n_ties": int(a.size), "p_value": 1.0}
    p = binomtest(n_pos, n_eff, 0.5, alternative="greater").pvalue
    return {
        "n_pos": n_pos,
        "n_neg": n_neg,
        "n_ties": int(a.size - n_eff),
        "p_value": float(p),
    }

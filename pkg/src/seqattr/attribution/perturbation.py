"""Perturbation-based attribution: Shapley values via the kernel-weighted
regression, a local linear surrogate (LIME-style), and a random baseline.

Both solvers are exposed as functions over an abstract value function
v(keep_mask) -> float, so tests can drive them with synthetic set functions;
the attributor classes bind v to "predict the masked record" with one
single-record model call per evaluated subset.
"""

from __future__ import annotations

import itertools
from math import comb, sqrt

import numpy as np
from sklearn.linear_model import Ridge

from ..errors import DegenerateSampleError
from .base import AttributionMap, Attributor, record_rng
from .masking import MaskPolicy, mask

MAX_COALITIONS = 512
EXACT_LIMIT = 15


def shapley_kernel_weight(m: int, s: int) -> float:
    """Kernel regression weight for a coalition of size s out of m players.

    The boundary sizes s = 0 and s = m carry infinite weight; they are
    enforced exactly as constraints in the solver rather than as rows.
    """
    if not 0 <= s <= m:
        raise ValueError(f"coalition size {s} outside [0, {m}]")
    if s == 0 or s == m:
        return float("inf")
    return (m - 1) / (comb(m, s) * s * (m - s))


def _solve_constrained_wls(masks, values, weights, v_empty, v_full):
    """Weighted least squares with phi0 = v_empty and phi0 + sum(phi) = v_full.

    The two infinite-weight rows are eliminated by substitution: phi0 is
    pinned and the last coefficient is expressed through the total, leaving
    an ordinary lstsq in d-1 unknowns.
    """
    d = masks.shape[1]
    delta = v_full - v_empty
    if d == 1:
        return np.array([delta])
    a = masks[:, :-1] - masks[:, -1:]
    b = values - v_empty - masks[:, -1] * delta
    sw = np.sqrt(weights)
    coef, *_ = np.linalg.lstsq(a * sw[:, None], b * sw, rcond=None)
    return np.concatenate([coef, [delta - coef.sum()]])


def _sample_coalitions(d: int, n: int, rng) -> np.ndarray:
    """Paired size-weighted subset draws; returns an [n, d] 0/1 matrix."""
    sizes = np.arange(1, d)
    p = (d - 1) / (sizes * (d - sizes))
    p /= p.sum()
    out = np.zeros((n, d))
    for row in range(0, n, 2):
        s = int(rng.choice(sizes, p=p))
        keep = rng.choice(d, size=s, replace=False)
        out[row, keep] = 1.0
        if row + 1 < n:
            out[row + 1] = 1.0 - out[row]
    return out


def kernel_shap_values(value_fn, d: int, n_coalitions=None, rng=None):
    """Shapley estimates for v over d features.

    d <= EXACT_LIMIT enumerates every coalition with exact kernel weights
    (the regression then recovers Shapley values exactly), unless an explicit
    n_coalitions budget below the full enumeration asks for sampling; larger
    grids always use paired sampling with frequency weights, deduplicated.
    Returns (phi, meta).
    """
    if d < 1:
        raise ValueError("need at least one feature")
    v_empty = float(value_fn(np.zeros(d)))
    v_full = float(value_fn(np.ones(d)))
    exact = d <= EXACT_LIMIT and (n_coalitions is None or int(n_coalitions) >= 2**d - 2)
    if exact:
        rows = np.array(list(itertools.product((0.0, 1.0), repeat=d)))
        rows = rows[(rows.sum(axis=1) > 0) & (rows.sum(axis=1) < d)]
        weights = np.array([shapley_kernel_weight(d, int(s)) for s in rows.sum(axis=1)])
        n_evals = len(rows)
    else:
        rng = rng if rng is not None else np.random.default_rng(0)
        n = int(n_coalitions) if n_coalitions else min(2 * (d + 1), MAX_COALITIONS)
        n = max(2, min(n, MAX_COALITIONS))
        sampled = _sample_coalitions(d, n, rng)
        uniq, counts = np.unique(sampled, axis=0, return_counts=True)
        rows, weights = uniq, counts.astype(np.float64)
        n_evals = len(rows)
    values = np.array([float(value_fn(z)) for z in rows])
    phi = _solve_constrained_wls(rows, values, weights, v_empty, v_full)
    meta = {
        "mode": "exact" if exact else "sampled",
        "n_coalitions": int(n_evals) + 2,
        "phi0": v_empty,
        "delta": v_full - v_empty,
    }
    return phi, meta


def brute_force_shapley(value_fn, d: int) -> np.ndarray:
    """Direct Shapley averaging over all subsets (reference implementation)."""
    if d > 20:
        raise ValueError("brute force is exponential; keep d small")
    phi = np.zeros(d)
    members = list(range(d))
    for size in range(d):
        coeff = 1.0 / (d * comb(d - 1, size))
        for subset in itertools.combinations(members, size):
            z = np.zeros(d)
            z[list(subset)] = 1.0
            base = float(value_fn(z))
            for i in members:
                if i in subset:
                    continue
                zi = z.copy()
                zi[i] = 1.0
                phi[i] += coeff * (float(value_fn(zi)) - base)
    return phi


def lime_values(value_fn, d: int, n_samples=200, ridge_lambda=1e-3, rng=None):
    """Local linear surrogate weights around the full input.

    Keep-masks draw Bernoulli(0.5); sample weight decays with the squared
    hamming distance from the unperturbed input over width 0.75*sqrt(d).
    Degenerate draws (no mask variation or flat responses) retry with a
    bumped stream up to three times.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    width = 0.75 * sqrt(d)
    last = None
    for _ in range(3):
        masks = (rng.random((n_samples, d)) < 0.5).astype(np.float64)
        variated = len(np.unique(masks, axis=0)) >= 2
        if variated:
            values = np.array([float(value_fn(z)) for z in masks])
            if np.ptp(values) > 0:
                distance = d - masks.sum(axis=1)
                weights = np.exp(-(distance**2) / width**2)
                model = Ridge(alpha=ridge_lambda, fit_intercept=True)
                model.fit(masks, values, sample_weight=weights)
                meta = {"n_samples": int(n_samples), "intercept": float(model.intercept_)}
                return model.coef_.astype(np.float64), meta
            last = "flat model response"
        else:
            last = "no mask variation"
    raise DegenerateSampleError(f"surrogate sampling degenerate after 3 draws: {last}")


def _masked_value_fn(model, record, target: int, policy: MaskPolicy):
    positions = record.feature_positions()

    def v(keep_mask) -> float:
        drop = [positions[i] for i in range(len(positions)) if keep_mask[i] < 0.5]
        masked = mask(record, drop, policy) if drop else record
        return float(model.predict_proba_record(masked)[target])

    return v


class KernelShapAttributor(Attributor):
    name = "kernel-shap"

    def __init__(self, n_coalitions=None, seed: int = 0, lab_fill: float = 0.0):
        self.n_coalitions = n_coalitions
        self.seed = seed
        self.lab_fill = lab_fill

    def explain(self, model, record, target_class=None) -> AttributionMap:
        target = self._predicted_class(model, record) if target_class is None else int(target_class)
        policy = MaskPolicy(lab_fill=self.lab_fill)
        v = _masked_value_fn(model, record, target, policy)
        phi, meta = kernel_shap_values(
            v,
            record.n_features,
            n_coalitions=self.n_coalitions,
            rng=record_rng(self.seed, record.record_id),
        )
        return AttributionMap(
            record_id=record.record_id,
            method=self.name,
            target_class=target,
            positions=record.feature_positions(),
            scores=phi,
            meta=meta,
        )


class LimeAttributor(Attributor):
    name = "lime"

    def __init__(self, n_samples: int = 200, ridge_lambda: float = 1e-3, seed: int = 0, lab_fill: float = 0.0):
        self.n_samples = n_samples
        self.ridge_lambda = ridge_lambda
        self.seed = seed
        self.lab_fill = lab_fill

    def explain(self, model, record, target_class=None) -> AttributionMap:
        target = self._predicted_class(model, record) if target_class is None else int(target_class)
        policy = MaskPolicy(lab_fill=self.lab_fill)
        v = _masked_value_fn(model, record, target, policy)
        coef, meta = lime_values(
            v,
            record.n_features,
            n_samples=self.n_samples,
            ridge_lambda=self.ridge_lambda,
            rng=record_rng(self.seed, record.record_id),
        )
        return AttributionMap(
            record_id=record.record_id,
            method=self.name,
            target_class=target,
            positions=record.feature_positions(),
            scores=coef,
            meta=meta,
        )


class RandomBaselineAttributor(Attributor):
    """Uniform random scores; the floor every real method must clear."""

    name = "random"

    def __init__(self, seed: int = 0):
        self.seed = seed

    def explain(self, model, record, target_class=None) -> AttributionMap:
        target = self._predicted_class(model, record) if target_class is None else int(target_class)
        rng = record_rng(self.seed, record.record_id)
        return AttributionMap(
            record_id=record.record_id,
            method=self.name,
            target_class=target,
            positions=record.feature_positions(),
            scores=rng.uniform(size=record.n_features),
            meta={},
        )

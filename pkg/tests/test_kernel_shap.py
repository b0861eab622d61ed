"""Kernel SHAP against an independent brute-force Shapley oracle.

The oracle (`brute_force_shapley`) enumerates all subsets and applies the
textbook marginal-contribution formula; it shares no code with the weighted
least-squares solver.  Exact-mode kernel SHAP must reproduce it to numerical
precision on arbitrary set functions.
"""

import math

import numpy as np
import pytest

from seqattr.attribution import (
    KernelShapAttributor,
    RandomBaselineAttributor,
    brute_force_shapley,
    kernel_shap_values,
    shapley_kernel_weight,
)
from seqattr.attribution.perturbation import EXACT_LIMIT
from seqattr.data import DataConfig, generate, task_spec
from seqattr.models import ModelConfig, build_model


class TestKernelWeight:
    def test_frozen_values_m4(self):
        # (m-1) / (C(m,s) * s * (m-s)) with m=4:
        #   s=1: 3 / (4*1*3)  = 0.25
        #   s=2: 3 / (6*2*2)  = 0.125
        assert shapley_kernel_weight(4, 1) == pytest.approx(0.25)
        assert shapley_kernel_weight(4, 2) == pytest.approx(0.125)
        assert shapley_kernel_weight(4, 3) == pytest.approx(0.25)

    def test_frozen_value_m10_s3(self):
        assert shapley_kernel_weight(10, 3) == pytest.approx(9.0 / (math.comb(10, 3) * 3 * 7))

    def test_boundaries_infinite(self):
        assert math.isinf(shapley_kernel_weight(6, 0))
        assert math.isinf(shapley_kernel_weight(6, 6))

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            shapley_kernel_weight(4, 5)
        with pytest.raises(ValueError):
            shapley_kernel_weight(4, -1)


def random_set_function(d, seed):
    """A value function with main effects and pairwise interactions."""
    rng = np.random.default_rng(seed)
    beta = rng.normal(size=d)
    gamma = rng.normal(size=(d, d)) * 0.5
    base = float(rng.normal())

    def v(z):
        z = np.asarray(z, dtype=float)
        return base + float(beta @ z) + float(z @ gamma @ z)

    return v


class TestExactModeMatchesBruteForce:
    @pytest.mark.parametrize("d,seed", [(2, 0), (3, 1), (4, 2), (5, 3), (6, 4), (8, 5)])
    def test_interaction_functions(self, d, seed):
        v = random_set_function(d, seed)
        phi, meta = kernel_shap_values(v, d, rng=np.random.default_rng(0))
        assert meta["mode"] == "exact"
        ref = brute_force_shapley(v, d)
        assert np.max(np.abs(phi - ref)) < 1e-8

    def test_linear_function_recovers_coefficients(self):
        beta = np.array([1.5, -2.0, 0.25, 0.0, 3.0])
        phi, _ = kernel_shap_values(lambda z: float(beta @ z), 5, rng=np.random.default_rng(0))
        # For additive functions the Shapley values are exactly the coefficients.
        assert np.max(np.abs(phi - beta)) < 1e-10

    def test_efficiency_constraint(self):
        v = random_set_function(6, 11)
        phi, meta = kernel_shap_values(v, 6, rng=np.random.default_rng(0))
        total = meta["phi0"] + phi.sum()
        assert total == pytest.approx(v(np.ones(6)), abs=1e-9)
        assert meta["phi0"] == pytest.approx(v(np.zeros(6)), abs=1e-12)

    def test_single_feature(self):
        v = lambda z: 2.0 + 3.0 * float(z[0])
        phi, _ = kernel_shap_values(v, 1, rng=np.random.default_rng(0))
        assert phi[0] == pytest.approx(3.0)


class TestSampledMode:
    def test_kicks_in_above_exact_limit(self):
        d = EXACT_LIMIT + 5
        beta = np.linspace(-1, 1, d)
        phi, meta = kernel_shap_values(
            lambda z: float(beta @ z), d, rng=np.random.default_rng(7), n_coalitions=400
        )
        assert meta["mode"] == "sampled"
        # Linear functions are inside the model class of the WLS fit, so
        # even the sampled design recovers the coefficients nearly exactly.
        assert np.max(np.abs(phi - beta)) < 5e-2

    def test_efficiency_holds_in_sampled_mode(self):
        d = 20
        v = random_set_function(d, 3)
        phi, meta = kernel_shap_values(v, d, rng=np.random.default_rng(9), n_coalitions=300)
        assert meta["phi0"] + phi.sum() == pytest.approx(v(np.ones(d)), abs=1e-8)

    def test_deterministic_given_rng_seed(self):
        d = 18
        v = random_set_function(d, 5)
        a, _ = kernel_shap_values(v, d, rng=np.random.default_rng(42), n_coalitions=200)
        b, _ = kernel_shap_values(v, d, rng=np.random.default_rng(42), n_coalitions=200)
        assert np.array_equal(a, b)


class TestBruteForceGuard:
    def test_refuses_large_d(self):
        with pytest.raises(ValueError, match="exponential"):
            brute_force_shapley(lambda z: 0.0, 25)


@pytest.fixture(scope="module")
def tiny_model_and_record():
    data_cfg = DataConfig(vocab_size=30, n_labs=2, min_visits=2, max_visits=3, max_codes_per_visit=3)
    records = generate(task_spec("mortality-like"), 8, seed=5, config=data_cfg)
    # Pick a record small enough for exact-mode enumeration (d <= EXACT_LIMIT).
    record = next(r for r in records if len(r.feature_positions()) <= EXACT_LIMIT)
    cfg = ModelConfig(
        arch="stage-recurrent", vocab_size=30, n_labs=2, embed_dim=8, hidden_dim=8,
        max_visits=3, max_codes=3,
    )
    model = build_model(cfg, seed=2).initialize()
    return model, record


class TestAttributorOnModel:
    def test_scores_align_with_feature_grid(self, tiny_model_and_record):
        model, record = tiny_model_and_record
        attr = KernelShapAttributor(seed=0)
        amap = attr.explain(model, record)
        assert amap.scores.shape == (len(record.feature_positions()),)
        assert amap.positions == record.feature_positions()
        assert np.isfinite(amap.scores).all()

    def test_local_accuracy_against_model(self, tiny_model_and_record):
        """phi0 + sum(phi) must equal the model's probability on the record."""
        model, record = tiny_model_and_record
        amap = KernelShapAttributor(seed=0).explain(model, record)
        proba = model.predict_proba_record(record)
        target = int(np.argmax(proba))
        assert amap.target_class == target
        total = amap.meta["phi0"] + amap.scores.sum()
        assert total == pytest.approx(proba[target], abs=1e-8)

    def test_deterministic_and_order_free(self, tiny_model_and_record):
        model, record = tiny_model_and_record
        other = generate(task_spec("mortality-like"), 2, seed=77,
                         config=DataConfig(vocab_size=30, n_labs=2, min_visits=2,
                                           max_visits=3, max_codes_per_visit=3))[0]
        attr = KernelShapAttributor(seed=0)
        first = attr.explain(model, record).scores
        attr.explain(model, other)  # interleave a different record
        second = attr.explain(model, record).scores
        assert np.array_equal(first, second)


class TestRandomBaseline:
    def test_deterministic_per_record(self, tiny_model_and_record):
        model, record = tiny_model_and_record
        attr = RandomBaselineAttributor(seed=3)
        a = attr.explain(model, record).scores
        b = attr.explain(model, record).scores
        assert np.array_equal(a, b)

    def test_distinct_record_ids_get_distinct_streams(self, tiny_model_and_record):
        model, _ = tiny_model_and_record
        pair = generate(task_spec("mortality-like"), 2, seed=99,
                        config=DataConfig(vocab_size=30, n_labs=2, min_visits=2,
                                          max_visits=3, max_codes_per_visit=3))
        attr = RandomBaselineAttributor(seed=3)
        a = attr.explain(model, pair[0]).scores
        b = attr.explain(model, pair[1]).scores
        n = min(a.size, b.size)
        assert not np.array_equal(a[:n], b[:n])

"""Attention-relevance propagation: cost contract and applicability."""

import numpy as np
import pytest

from seqattr.attribution import CheferAttributor, GradientXInputAttributor
from seqattr.autodiff import count_passes
from seqattr.errors import MethodNotApplicableError
from seqattr.data import DataConfig, generate, task_spec
from seqattr.models import ModelConfig, build_model

DATA_CFG = DataConfig(vocab_size=40, n_labs=3, min_visits=2, max_visits=5, max_codes_per_visit=4)


def make_model(arch, n_layers=2):
    cfg = ModelConfig(
        arch=arch, vocab_size=40, n_labs=3, embed_dim=12, hidden_dim=12,
        n_layers=n_layers, n_heads=2, ff_dim=24, max_visits=5, max_codes=4,
    )
    return build_model(cfg, seed=6).initialize()


@pytest.fixture(scope="module")
def records():
    return generate(task_spec("mortality-like"), 4, seed=41, config=DATA_CFG)


class TestCost:
    def test_exactly_one_forward_one_backward(self, records):
        """The whole point of the method: relevance for every feature from a
        single forward and a single backward pass."""
        model = make_model("transformer")
        attr = CheferAttributor()
        with count_passes() as passes:
            attr.explain(model, records[0])
        assert passes.forward == 1
        assert passes.backward == 1

    def test_single_pass_on_hybrid_arch_too(self, records):
        model = make_model("stage-attn")
        with count_passes() as passes:
            CheferAttributor().explain(model, records[0])
        assert passes.forward == 1
        assert passes.backward == 1


class TestApplicability:
    def test_raises_on_attention_free_model(self, records):
        model = make_model("stage-recurrent")
        with pytest.raises(MethodNotApplicableError, match="attention"):
            CheferAttributor().explain(model, records[0])

    @pytest.mark.parametrize("arch", ["transformer", "stage-attn"])
    def test_runs_on_attention_models(self, arch, records):
        model = make_model(arch)
        amap = CheferAttributor().explain(model, records[0])
        assert amap.positions == records[0].feature_positions()
        assert np.isfinite(amap.scores).all()
        assert amap.meta["n_attention_layers"] >= 1


class TestScores:
    def test_nonnegative(self, records):
        """Relevance rollout uses rectified gradient-weighted attention and
        nonnegative intra-visit shares, so scores cannot go negative."""
        model = make_model("transformer")
        for rec in records:
            scores = CheferAttributor().explain(model, rec).scores
            assert (scores >= 0).all()

    def test_not_all_zero_and_deterministic(self, records):
        model = make_model("transformer", n_layers=1)
        a = CheferAttributor().explain(model, records[1])
        b = CheferAttributor().explain(model, records[1])
        assert np.abs(a.scores).max() > 0
        assert np.array_equal(a.scores, b.scores)

    def test_layer_count_reflects_architecture(self, records):
        deep = make_model("transformer", n_layers=2)
        amap = CheferAttributor().explain(deep, records[0])
        assert amap.meta["n_attention_layers"] == 2

    def test_differs_from_gradient_x_input(self, records):
        model = make_model("transformer")
        ch = CheferAttributor().explain(model, records[0]).scores
        gx = GradientXInputAttributor().explain(model, records[0]).scores
        assert not np.allclose(ch, np.abs(gx))

"""Masking semantics: the one shared definition of feature removal."""

import numpy as np
import pytest

from seqattr.attribution import MaskPolicy, full_mask, mask
from seqattr.data import PAD_CODE, generate, task_spec, DataConfig
from seqattr.data.records import CODE, LAB, FeaturePosition
from seqattr.models import ModelConfig, build_model

SMALL_DATA = DataConfig(vocab_size=40, n_labs=3, min_visits=2, max_visits=8, max_codes_per_visit=4)


def one_record(seed=0):
    return generate(task_spec("mortality-like"), 1, seed=seed, config=SMALL_DATA)[0]


class TestMask:
    def test_code_position_becomes_pad(self):
        r = one_record()
        m = mask(r, [FeaturePosition(0, CODE, 1)])
        assert m.visits[0][1] == PAD_CODE
        assert r.visits[0][1] != PAD_CODE  # original untouched

    def test_lab_position_takes_fill(self):
        r = one_record()
        m = mask(r, [FeaturePosition(1, LAB, 2)], MaskPolicy(lab_fill=-3.5))
        assert m.labs[1][2] == -3.5

    def test_structure_preserved(self):
        r = one_record()
        m = full_mask(r)
        assert m.n_visits == r.n_visits
        assert m.deltas == r.deltas
        assert [len(v) for v in m.visits] == [len(v) for v in r.visits]
        assert m.feature_positions() == r.feature_positions()

    def test_idempotent(self):
        r = one_record()
        pos = r.feature_positions()[:4]
        once = mask(r, pos)
        twice = mask(once, pos)
        assert twice.visits == once.visits
        assert twice.labs == once.labs

    def test_full_mask_hits_everything(self):
        r = one_record()
        m = full_mask(r)
        assert all(c == PAD_CODE for visit in m.visits for c in visit)
        assert all(x == 0.0 for row in m.labs for x in row)

    def test_invalid_positions_rejected(self):
        r = one_record()
        with pytest.raises(ValueError, match="visit"):
            mask(r, [FeaturePosition(99, CODE, 0)])
        with pytest.raises(ValueError, match="code slot"):
            mask(r, [FeaturePosition(0, CODE, 99)])
        with pytest.raises(ValueError, match="lab"):
            mask(r, [FeaturePosition(0, LAB, 99)])
        with pytest.raises(ValueError, match="kind"):
            mask(r, [(0, "delta", 0)])

    def test_masked_record_is_model_consumable(self):
        cfg = ModelConfig(
            arch="transformer", vocab_size=40, n_labs=3, embed_dim=16, hidden_dim=16,
            n_layers=1, n_heads=2, ff_dim=32, max_visits=8, max_codes=4,
        )
        model = build_model(cfg, seed=1).initialize()
        r = one_record()
        p_full = model.predict_proba_record(r)
        p_masked = model.predict_proba_record(full_mask(r))
        assert p_masked.shape == p_full.shape
        assert np.isfinite(p_masked).all()
        assert not np.allclose(p_full, p_masked)  # masking must actually matter

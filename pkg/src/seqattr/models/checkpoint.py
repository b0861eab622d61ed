"""Model checkpoints: npz with a format tag, the estimator config, and params.

Round trips are bit-exact; loading validates the tag and every array shape
against a fresh initialization of the stored config.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..errors import CheckpointError
from .base import SequenceClassifier, init_params

FORMAT_TAG = "seqattr-ckpt-v1"


def save_checkpoint(model: SequenceClassifier, path) -> None:
    model._check_fitted()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    arrays = {f"p:{k}": v for k, v in model.params_.items()}
    np.savez(
        path,
        format=np.array(FORMAT_TAG),
        config=np.array(json.dumps(model.get_params(), sort_keys=True)),
        **arrays,
    )


def load_checkpoint(path) -> SequenceClassifier:
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"no checkpoint at {path}")
    try:
        data = np.load(path, allow_pickle=False)
    except (OSError, ValueError) as e:
        raise CheckpointError(f"{path}: unreadable checkpoint: {e}") from None
    with data:
        if "format" not in data or str(data["format"]) != FORMAT_TAG:
            raise CheckpointError(f"{path}: not a {FORMAT_TAG} checkpoint")
        try:
            params_cfg = json.loads(str(data["config"]))
            model = SequenceClassifier(**params_cfg)
        except (json.JSONDecodeError, TypeError) as e:
            raise CheckpointError(f"{path}: bad config payload: {e}") from None
        expected = init_params(model.config, seed=0)
        loaded = {}
        for key in expected:
            arr_key = f"p:{key}"
            if arr_key not in data:
                raise CheckpointError(f"{path}: missing parameter {key!r}")
            arr = data[arr_key]
            if arr.shape != expected[key].shape:
                raise CheckpointError(
                    f"{path}: parameter {key!r} has shape {arr.shape}, "
                    f"expected {expected[key].shape}"
                )
            loaded[key] = np.ascontiguousarray(arr, dtype=np.float64)
        model.params_ = loaded
        model.classes_ = np.arange(model.config.n_classes)
    return model

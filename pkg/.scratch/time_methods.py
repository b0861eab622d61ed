"""Timing probe: per-record wall time for chefer / IG-50 / LIME-200 / KernelSHAP
on an untrained default-dim transformer, records with 28-32 visits (d >= 168)."""
import time

import numpy as np

from seqattr.attribution import (
    CheferAttributor,
    IntegratedGradientsAttributor,
    KernelShapAttributor,
    LimeAttributor,
)
from seqattr.data.generator import DataConfig, generate, task_spec
from seqattr.models import SequenceClassifier

cfg = DataConfig(min_visits=28, max_visits=32)
records = generate(task_spec("mortality-like"), 30, seed=42, config=cfg)
records = [r for r in records if r.n_features >= 168][:8]
print("records:", len(records), "d:", [r.n_features for r in records])

model = SequenceClassifier(
    arch="transformer", embed_dim=32, hidden_dim=32, n_layers=1, n_heads=2,
    ff_dim=64, max_visits=32, max_codes=6, seed=0,
)
model.initialize()

methods = {
    "chefer": CheferAttributor(),
    "ig50": IntegratedGradientsAttributor(n_steps=50),
    "lime200": LimeAttributor(n_samples=200),
    "shap": KernelShapAttributor(),
}

for name, m in methods.items():
    m.explain(model, records[0])  # warm-up
    t0 = time.perf_counter()
    for r in records:
        amap = m.explain(model, r)
    dt = (time.perf_counter() - t0) / len(records) * 1e3
    extra = ""
    if name == "shap":
        extra = f"  n_coalitions={amap.meta.get('n_coalitions')}"
    print(f"{name:8s} {dt:8.1f} ms/record{extra}")

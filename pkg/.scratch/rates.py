"""Per-arch forward + per-method rates at benchmark-default dims."""
import time

import numpy as np

from seqattr.attribution import METHODS
from seqattr.data.generator import DataConfig, generate, task_spec
from seqattr.models import SequenceClassifier

cfg = DataConfig()  # defaults: vocab 120, labs 5, visits 4-32, codes 6
recs = generate(task_spec("mortality-like"), 12, seed=3, config=cfg)
print("d:", sorted(r.n_features for r in recs))

for arch in ("transformer", "stage-recurrent", "stage-attn"):
    model = SequenceClassifier(
        arch=arch, embed_dim=32, hidden_dim=32, n_layers=1, n_heads=2, ff_dim=64,
        max_visits=32, max_codes=6, seed=0,
    ).initialize()
    model.predict_proba_record(recs[0])
    t0 = time.perf_counter()
    for _ in range(3):
        for r in recs:
            model.predict_proba_record(r)
    fwd = (time.perf_counter() - t0) / (3 * len(recs)) * 1e3
    line = [f"{arch:16s} fwd {fwd:7.2f} ms"]
    for name in ("kernel-shap", "lime", "integrated-gradients", "deeplift", "gim", "chefer", "random"):
        if name == "chefer" and arch == "stage-recurrent":
            continue
        m = METHODS[name]() if name != "lime" else METHODS[name](n_samples=200)
        m.explain(model, recs[0])
        t0 = time.perf_counter()
        for r in recs[:4]:
            m.explain(model, r)
        dt = (time.perf_counter() - t0) / 4 * 1e3
        line.append(f"{name}={dt:.1f}")
    print("  ".join(line))

# training rate at default dims
train = generate(task_spec("mortality-like"), 128, seed=5, config=cfg)
for arch in ("transformer", "stage-recurrent", "stage-attn"):
    model = SequenceClassifier(
        arch=arch, embed_dim=32, hidden_dim=32, n_layers=1, n_heads=2, ff_dim=64,
        max_visits=32, max_codes=6, epochs=1, batch_size=64, seed=0,
    )
    t0 = time.perf_counter()
    model.fit(train)
    dt = time.perf_counter() - t0
    print(f"train {arch:16s} {dt:6.2f} s for 128 rec x 1 epoch -> {dt/128*1e3:6.1f} ms/rec-epoch")

t0 = time.perf_counter()
generate(task_spec("mortality-like"), 250, seed=7, config=cfg)
print(f"gen 250 rec: {time.perf_counter()-t0:.2f} s")

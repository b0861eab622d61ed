"""Profile IG's per-step components: replay, backward, override building."""
import time

import numpy as np

from seqattr.attribution.gradient import _target_scalar
from seqattr.autodiff.backward import backward
from seqattr.data.generator import DataConfig, generate, task_spec
from seqattr.models import SequenceClassifier

cfg = DataConfig(min_visits=28, max_visits=32)
records = [r for r in generate(task_spec("mortality-like"), 30, seed=42, config=cfg)
           if r.n_features >= 168][:1]
r = records[0]

model = SequenceClassifier(
    arch="transformer", embed_dim=32, hidden_dim=32, n_layers=1, n_heads=2,
    ff_dim=64, max_visits=32, max_codes=6, seed=0,
)
model.initialize()

trace = model.trace(r)
tape = trace.tape
leaves = trace.leaves
out = _target_scalar(trace, trace.pred_class)
wrt = [l.node_id for l in leaves]
x = [np.array(l.value) for l in leaves]
ref = [l.baseline for l in leaves]
diff = [x[k] - ref[k] for k in range(len(leaves))]

print("nodes:", len(tape.nodes), "leaves:", len(leaves))

N = 100
# replay timing
t0 = time.perf_counter()
for i in range(N):
    a = (i % 50) / 49.0
    tape.replay({leaves[k].node_id: ref[k] + a * diff[k] for k in range(len(leaves))})
t_replay = (time.perf_counter() - t0) / N * 1e3

# override dict alone
t0 = time.perf_counter()
for i in range(N):
    a = (i % 50) / 49.0
    d = {leaves[k].node_id: ref[k] + a * diff[k] for k in range(len(leaves))}
t_ovr = (time.perf_counter() - t0) / N * 1e3

# backward timing (on last replayed state)
g = backward(tape, out, wrt=wrt)  # warm (builds reach cache)
t0 = time.perf_counter()
for i in range(N):
    g = backward(tape, out, wrt=wrt)
t_back = (time.perf_counter() - t0) / N * 1e3

print(f"replay   {t_replay:6.3f} ms  (override build alone {t_ovr:6.3f})")
print(f"backward {t_back:6.3f} ms")
print(f"per-step {t_replay + t_back:6.3f} ms -> IG-50 ~ {50*(t_replay+t_back):6.1f} ms + trace")

# per-op time in replay
from seqattr.autodiff.ops import run_forward
from collections import defaultdict
optime = defaultdict(float)
opcount = defaultdict(int)
nodes = tape.nodes
for _ in range(20):
    for node in nodes:
        if not node.parents and node.op in ("leaf", "param", "const"):
            continue
        vals = [nodes[p].value for p in node.parents]
        t0 = time.perf_counter()
        value, ctx = run_forward(node.op, vals, node.params)
        dt = time.perf_counter() - t0
        optime[node.op] += dt
        opcount[node.op] += 1
for op in sorted(optime, key=optime.get, reverse=True):
    print(f"  fwd {op:18s} {optime[op]/20*1e3:7.3f} ms  x{opcount[op]//20}")

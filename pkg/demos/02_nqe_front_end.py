"""Train a small NQE front-end on the synthetic octamers and watch the trace distance grow."""
from __future__ import annotations

from hivqcnn import data, nqe, presets
from hivqcnn.embed import Embedding

snap = data.synthetic_snapshot(150, seed=0)
x, y = snap.arrays()
splits = data.split(x, y, seed=0)
preset = presets.nqe_preset(4, "angle")
cfg = nqe.NQETrainConfig.from_preset(preset, seed=0, max_iterations=150)
res = nqe.train_nqe(splits, Embedding("angle", 4), cfg, preset.layers)
td = res.trace_distance
print(f"train trace distance {td['train_before']:.3f} -> {td['train_after']:.3f}")
print(f"test  trace distance {td['test_before']:.3f} -> {td['test_after']:.3f}")
print(f"stopped at iteration {res.stopped_iteration}, best snapshot from {res.best_iteration}")

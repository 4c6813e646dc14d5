"""End-to-end harness run on the synthetic stand-in with short budgets; writes out/demo/."""
from __future__ import annotations

from hivqcnn import data, harness

snap = data.synthetic_snapshot(100, seed=0)
cfg = harness.HarnessConfig()
for key, value in {"run.seeds": 2, "qcnn.iteration_cap": 60, "nqe.iteration_cap": 60}.items():
    cfg.set(key, value)
conds = harness.enumerate_conditions(cfg, filters={"id": "NQE-11,PCA-11"})
rows = harness.run_matrix(conds, snap, cfg)
paths = harness.write_reports(rows, "out/demo", cfg)
print(paths["md"].read_text())

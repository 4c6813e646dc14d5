"""A QCNN separating two orthogonal product states, with the Helstrom floor alongside."""
from __future__ import annotations

import numpy as np

from hivqcnn import embed, qcnn
from hivqcnn.embed import Embedding

x = np.array([[0.0] * 4 if i % 2 else [np.pi] * 4 for i in range(20)])
y = np.array([1 if i % 2 else -1 for i in range(20)])
enc = Embedding("angle", 4)
d = embed.ensemble_trace_distance(enc.states(x[y == 1]), enc.states(x[y == -1]))
for kind in qcnn.ANSATZ_KINDS:
    cfg = qcnn.QCNNTrainConfig(batch_size=10, learning_rate=0.05, iterations=100, seed=0)
    res = qcnn.train_qcnn(enc, (x, y), (x, y), kind, cfg)
    print(f"{kind:4s} params {res.architecture.n_params:2d}  accuracy {res.test_accuracy:.2f}  "
          f"final loss {res.train_loss_final:.3f}  floor {(1 - d) / 2:.3f}")

"""Three encoders, their fidelities and the ensemble trace distance that bounds any classifier."""
from __future__ import annotations

import numpy as np

from hivqcnn import embed
from hivqcnn.embed import Embedding

rng = np.random.default_rng(0)
for kind in embed.KINDS:
    enc = Embedding(kind, 4)
    pos = rng.normal(loc=0.8, size=(20, enc.arity))
    neg = rng.normal(loc=-0.8, size=(20, enc.arity))
    f = embed.batch_fidelity(enc.states(pos[:5]), enc.states(neg[:5]))
    d = embed.ensemble_trace_distance(enc.states(pos), enc.states(neg))
    print(f"{kind:9s} arity {enc.arity:2d}  cross-class fidelity {f.mean():.3f}  "
          f"trace distance {d:.3f}  loss floor {(1 - d) / 2:.3f}")

"""Gate noise and readout error: predictions shrink and class states draw together."""
from __future__ import annotations

import numpy as np

from hivqcnn import embed, noise, qcnn
from hivqcnn.embed import Embedding

model = noise.load_noise_config()
plan = noise.bind_noise(None, model)
slope, offset = plan.readout_affine()
print(f"default model: p1={model.p1} p2={model.p2}, readout slope {slope:.3f} offset {offset:+.3f}")

rng = np.random.default_rng(1)
enc = Embedding("zz", 4)
circ, arch = qcnn.build_qcnn(4, "SU4")
params = rng.normal(size=arch.n_params)
xs = rng.uniform(0, np.pi, (4, enc.arity))
clean = qcnn.predictions(circ, params, qcnn.EmbeddedInputs(enc, xs), arch.readout)
noisy = qcnn.predictions(circ, params, qcnn.EmbeddedInputs(enc, xs, plan), arch.readout)
for c, n in zip(clean, noisy):
    print(f"prediction {c:+.4f} -> {n:+.4f}")

pos, neg = enc.states(xs[:2]), enc.states(xs[2:])
rho, sigma = embed.mean_density(pos), embed.mean_density(neg)
ch = model.idle_layer()
before = embed.trace_distance(rho, sigma)
after = embed.trace_distance(noise.apply_channel_each_qubit(rho, ch, 4), noise.apply_channel_each_qubit(sigma, ch, 4))
print(f"trace distance under one idle noise layer {before:.6f} -> {after:.6f}")

#!/usr/bin/env python3
"""Compare fusion and loss ablations on a noisier synthetic dataset."""

import numpy as np

from mvhash import SynthSpec, generate_centers, make_synthetic
from mvhash.retrieval import RetrievalIndex, random_ranking_map
from mvhash.trainer import TrainConfig, train

# Noisier clusters and 20% wrong-class tags: hard enough that fusion choices
# actually matter.
spec = SynthSpec(
    num_classes=8, samples_per_class=60, d_img=32, d_txt=32,
    cluster_spread=0.6, cross_view_consistency=0.8, seed=3,
)
ds = make_synthetic(spec)
centers = generate_centers(spec.num_classes, code_length=16, seed=3)

variants = [
    ("gated fusion (full model)", {}),
    ("concatenation fusion", {"fusion": "concat"}),
    ("image view only", {"fusion": "image"}),
    ("text view only", {"fusion": "text"}),
    ("central loss only", {"loss_mode": "central"}),
    ("quantization loss only", {"loss_mode": "quant"}),
]

print(f"{'variant':28s}  final mAP")
results = {}
for name, kw in variants:
    cfg = TrainConfig(epochs=60, seed=3, eval_every=60, **kw)
    results[name] = train(ds, centers, cfg).final_map
    print(f"{name:28s}  {results[name]:.4f}")

# The no-learning reference: rank the retrieval set uniformly at random.
_, _, rl = ds.subset(ds.retrieval_mask)
_, _, ql = ds.subset(ds.query_mask)
dummy = RetrievalIndex.from_signs(np.ones((rl.shape[0], 16), dtype=np.int8), rl)
baseline = random_ranking_map(ql, dummy, seed=3)
print(f"{'random-ranking baseline':28s}  {baseline:.4f}")

print("\nExpected picture: gated fusion >= concatenation >= the best single")
print("view, and the quantization-only run stays near the random baseline --")
print("without the central-similarity term there is nothing tying codes to")
print("class structure.")

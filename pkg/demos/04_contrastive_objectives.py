"""The two contrastive objectives, by hand.

The seq2seq loss scores pooled decoder states through a learned projection
and a sigmoid, then contrasts the gold sequence against negatives mined from
the input context. The dual-encoder loss is InfoNCE over cosine scores with
an additive margin on the positive. Both come with analytic gradients.
"""

import numpy as np

from ideabench.contrastive import (
    LossParams,
    PreBatchRing,
    assemble_negatives,
    dual_encoder_infonce,
    dual_encoder_infonce_grads,
    seq2seq_contrastive_grads,
    seq2seq_contrastive_loss,
)

rng = np.random.default_rng(0)
params = LossParams(projection_weight=rng.standard_normal(8),
                    projection_bias=0.0, temperature=1.0)

pos = rng.standard_normal((5, 8))        # gold sequence, 5 decoder positions
negs = [rng.standard_normal((4, 8)), rng.standard_normal((6, 8))]
loss, y_pos, y_negs = seq2seq_contrastive_loss(pos, negs, params)
print(f"seq2seq: y+ = {y_pos:.4f}, y- = {[round(y, 4) for y in y_negs]}, "
      f"loss = {loss:.4f}")

_, grads = seq2seq_contrastive_grads(pos, negs, params)
print(f"  grad wrt projection weight, first 3: "
      f"{np.round(grads['weight'][:3], 4)}")

print("\ndual encoder (tau = 0.05, margin = 0.02):")
for margin in (0.0, 0.02, 0.1):
    value = dual_encoder_infonce(0.9, [0.4, 0.7], margin=margin, tau=0.05)
    print(f"  margin {margin:4.2f} -> loss {value:.4f}  (monotone in the margin)")
_, grad_pos, grad_negs = dual_encoder_infonce_grads(0.9, [0.4, 0.7], 0.02, 0.05)
print(f"  gradients: pos {grad_pos:.4f}, negs {np.round(grad_negs, 4)} "
      f"(sum to zero: {abs(grad_pos + grad_negs.sum()) < 1e-12})")

print("\nnegative assembly for one anchor:")
ring = PreBatchRing(depth=2)
ring.push([(f"prev1-{i}", None) for i in range(3)])
ring.push([(f"prev2-{i}", None) for i in range(4)])
negset = assemble_negatives(
    batch=[(f"batch-{i}", None) for i in range(6)],
    gold_id="batch-0",
    ring=ring,
    self_candidate=("anchor-input", None),
    in_context=[("context term", None)],
)
print(f"  in-batch {len(negset.in_batch)}, pre-batch {len(negset.pre_batch)}, "
      f"in-context {len(negset.in_context)}, self {negset.self_negative is not None}; "
      f"total {len(negset.all_candidates())}")

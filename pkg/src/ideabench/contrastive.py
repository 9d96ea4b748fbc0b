"""Contrastive objectives and in-context negative sampling.

Two losses: an InfoNCE over pooled decoder hidden states (positive target
sequence against negatives mined from the input context), and an additive
margin InfoNCE over dual-encoder cosine scores with in-batch, pre-batch,
self, and in-context negatives.

Both losses are trained as -log of the probability ratio; the raw ratio is
returned alongside for inspection.  Analytic gradients are provided and
checked against finite differences in the test suite.
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, logsumexp

from .corpus import BACKGROUND_LABELS, DocumentGraph, TaskInstance, normalize_text
from .prompting import seed_prompt

DEFAULT_PRE_BATCHES = 2
INCONTEXT_COUNTS = {
    ("sentence", "seq2seq"): 2,
    ("node", "seq2seq"): 10,
    ("node", "dual-encoder"): 5,
}


class ParameterError(ValueError):
    pass


@dataclass(frozen=True)
class LossParams:
    projection_weight: np.ndarray  # (hidden,) mapping each position to a scalar
    projection_bias: float
    temperature: float = 1.0
    additive_margin: float = 0.0

    def __post_init__(self):
        if self.temperature <= 0:
            raise ParameterError("temperature must be positive")
        if self.additive_margin < 0:
            raise ParameterError("additive margin must be non-negative")


@dataclass
class NegativeSet:
    in_context: list = field(default_factory=list)
    in_batch: list = field(default_factory=list)
    pre_batch: list = field(default_factory=list)
    self_negative: object = None

    def all_candidates(self) -> list:
        out = list(self.in_batch) + list(self.pre_batch) + list(self.in_context)
        if self.self_negative is not None:
            out.append(self.self_negative)
        return out


# ---------------------------------------------------------------------------
# In-context negative sampling
# ---------------------------------------------------------------------------


def background_terms(graph: DocumentGraph) -> list[str]:
    """Entity mentions whose sentence index lies in the background."""
    background_indexes = {
        i for i, (_, label) in enumerate(graph.sentences) if label in BACKGROUND_LABELS
    }
    terms = []
    for node in graph.nodes:
        for mention in node.mentions:
            if mention.sentence_index in background_indexes:
                terms.append(mention.text)
    return list(dict.fromkeys(terms))


def sample_incontext_negatives(
    instance: TaskInstance,
    task: str,
    model_kind: str,
    rng_seed: int,
    background_sentences=None,
    terms=None,
) -> list[str]:
    """Sample negatives from the instance's own input context.

    Sentence task: up to 2 sentences from the background plus the seed-prompt
    line.  Node tasks: up to 10 (seq2seq) or 5 (dual-encoder) scientific-term
    mentions occurring in the background.  Uniform without replacement; the
    gold target is never included.
    """
    count = INCONTEXT_COUNTS.get((task, model_kind))
    if count is None:
        raise ValueError(f"no negative count for task={task!r} model={model_kind!r}")
    if task == "sentence":
        pool = list(background_sentences) if background_sentences is not None else []
        if not pool and instance.background:
            pool = [instance.background]
        pool = pool + [
            seed_prompt(instance.seed_term, instance.target_type, instance.direction)
        ]
    else:
        pool = list(terms) if terms is not None else []
    gold = normalize_text(instance.target)
    pool = [p for p in dict.fromkeys(pool) if normalize_text(p) != gold]
    if not pool:
        return []
    rng = random.Random(rng_seed)
    return rng.sample(pool, min(count, len(pool)))


# ---------------------------------------------------------------------------
# Sequence-to-sequence hidden-state InfoNCE
# ---------------------------------------------------------------------------


def _pooled_score(hidden: np.ndarray, params: LossParams) -> float:
    """sigmoid(mean over positions of (W . h_i + b))."""
    hidden = np.asarray(hidden, dtype=float)
    if hidden.ndim != 2 or hidden.shape[1] != params.projection_weight.shape[0]:
        raise ParameterError(
            f"hidden matrix shape {hidden.shape} does not match projection "
            f"dimension {params.projection_weight.shape[0]}"
        )
    return float(expit(np.mean(hidden @ params.projection_weight + params.projection_bias)))


def contrastive_ratio(y_pos: float, y_negs, tau: float) -> float:
    """exp(y+/tau) / (sum_k exp(y-_k/tau) + exp(y+/tau)), computed stably."""
    if tau <= 0:
        raise ParameterError("temperature must be positive")
    logits = np.asarray([y_pos] + list(y_negs), dtype=float) / tau
    return float(np.exp(logits[0] - logsumexp(logits)))


def seq2seq_contrastive_loss(pos_hidden, neg_hiddens, params: LossParams):
    """Loss -log(ratio) over pooled decoder scores.

    Returns (loss, y_pos, y_negs).  With zero negatives the ratio is 1 and
    the loss degenerates to 0.
    """
    y_pos = _pooled_score(pos_hidden, params)
    y_negs = [_pooled_score(h, params) for h in neg_hiddens]
    ratio = contrastive_ratio(y_pos, y_negs, params.temperature)
    return -float(np.log(ratio)), y_pos, y_negs


def seq2seq_contrastive_grads(pos_hidden, neg_hiddens, params: LossParams):
    """Analytic gradients of the seq2seq loss.

    Returns (loss, grads) with grads keyed by "pos_hidden", "neg_hiddens"
    (list), "weight", and "bias".
    """
    pos_hidden = np.asarray(pos_hidden, dtype=float)
    neg_hiddens = [np.asarray(h, dtype=float) for h in neg_hiddens]
    w = params.projection_weight
    tau = params.temperature

    ys = [_pooled_score(pos_hidden, params)] + [
        _pooled_score(h, params) for h in neg_hiddens
    ]
    logits = np.asarray(ys) / tau
    probs = np.exp(logits - logsumexp(logits))
    loss = float(logsumexp(logits) - logits[0])

    # dL/dy: softmax probabilities, minus 1 for the positive slot.
    dl_dy = probs / tau
    dl_dy[0] -= 1.0 / tau

    grads = {"neg_hiddens": []}
    grad_w = np.zeros_like(w)
    grad_b = 0.0
    for slot, hidden in enumerate([pos_hidden] + neg_hiddens):
        y = ys[slot]
        # y = sigmoid(m), m = mean_i (w . h_i + b)
        dy_dm = y * (1.0 - y)
        coeff = dl_dy[slot] * dy_dm / hidden.shape[0]
        grad_h = np.outer(np.full(hidden.shape[0], coeff), w)
        grad_w += coeff * hidden.sum(axis=0)
        grad_b += coeff * hidden.shape[0]
        if slot == 0:
            grads["pos_hidden"] = grad_h
        else:
            grads["neg_hiddens"].append(grad_h)
    grads["weight"] = grad_w
    grads["bias"] = grad_b
    return loss, grads


# ---------------------------------------------------------------------------
# Dual-encoder additive-margin InfoNCE
# ---------------------------------------------------------------------------


def dual_encoder_infonce(
    pos_score: float, neg_scores, margin: float = 0.0, tau: float = 0.05
) -> float:
    """-log of exp((pos-margin)/tau) / (exp((pos-margin)/tau) + sum exp(neg/tau)).

    The margin applies to the positive only.
    """
    if tau <= 0:
        raise ParameterError("temperature must be positive")
    logits = np.asarray([pos_score - margin] + list(neg_scores), dtype=float) / tau
    return float(logsumexp(logits) - logits[0])


def dual_encoder_infonce_ratio(pos_score, neg_scores, margin=0.0, tau=0.05) -> float:
    return float(np.exp(-dual_encoder_infonce(pos_score, neg_scores, margin, tau)))


def dual_encoder_infonce_grads(pos_score, neg_scores, margin=0.0, tau=0.05):
    """Analytic gradients w.r.t. the positive and negative scores."""
    if tau <= 0:
        raise ParameterError("temperature must be positive")
    logits = np.asarray([pos_score - margin] + list(neg_scores), dtype=float) / tau
    probs = np.exp(logits - logsumexp(logits))
    loss = float(logsumexp(logits) - logits[0])
    grad_pos = float((probs[0] - 1.0) / tau)
    grad_negs = probs[1:] / tau
    return loss, grad_pos, grad_negs


# ---------------------------------------------------------------------------
# Negative assembly
# ---------------------------------------------------------------------------


class PreBatchRing:
    """Ring of candidate batches from the most recent training steps.

    Cached vectors are reused as-is; they are not recomputed when encoder
    parameters drift.
    """

    def __init__(self, depth: int = DEFAULT_PRE_BATCHES):
        if depth < 0:
            raise ParameterError("ring depth must be non-negative")
        self.depth = depth
        self._batches = deque(maxlen=depth)

    def push(self, batch) -> None:
        self._batches.append(list(batch))

    def candidates(self) -> list:
        return [item for batch in self._batches for item in batch]


def assemble_negatives(
    batch,
    gold_id: str,
    ring: PreBatchRing | None = None,
    self_candidate=None,
    in_context=None,
) -> NegativeSet:
    """Union of the four negative sources for one anchor.

    Candidates are (id, vector) pairs; the gold candidate is excluded and the
    union is deduplicated by candidate id.
    """
    seen = {gold_id}
    result = NegativeSet()

    def take(items, bucket: list):
        for cid, vec in items:
            if cid in seen:
                continue
            seen.add(cid)
            bucket.append((cid, vec))

    take(batch, result.in_batch)
    if ring is not None:
        take(ring.candidates(), result.pre_batch)
    if in_context:
        take(in_context, result.in_context)
    if self_candidate is not None:
        cid, vec = self_candidate
        if cid not in seen:
            result.self_negative = self_candidate
    return result

"""Generation-module contracts, decoding configs, and the reranking pipeline.

Three contracts: a trainable conditional generator, a bi-encoder scorer, and
a remote completion client.  Concrete backends register by name; the package
ships deterministic stubs for tests plus adapters for a real seq2seq model
and a real bi-encoder (lazily imported, optional extras).
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass
from typing import Callable, Protocol, Sequence, runtime_checkable

import numpy as np

from .corpus import TaskInstance, normalize_text
from .kgraph import EntityBank
from .prompting import compose_model_input, seed_prompt

logger = logging.getLogger(__name__)

NODE_TOP_K = 10


class BackendError(Exception):
    """Backend failure, annotated with the offending input id where known."""


class EmptyResultError(Exception):
    """Remote client produced only empty outputs."""


class RetryableError(Exception):
    """Transient remote failure; safe to retry."""


@dataclass(frozen=True)
class DecodingConfig:
    beam_size: int = 5
    num_groups: int = 1
    diversity_penalty: float = 0.0
    repetition_penalty: float = 1.0
    constrained: bool = False
    constraint_bank: EntityBank | None = None
    num_return: int = 1

    def __post_init__(self):
        if self.num_groups > 1 and self.beam_size % self.num_groups != 0:
            raise ValueError("num_groups must divide beam_size")
        if self.constrained and self.constraint_bank is None:
            raise ValueError("constrained decoding requires a constraint bank")


SENTENCE_DECODING = DecodingConfig(beam_size=5, repetition_penalty=1.5, num_return=1)
NODE_DIVERSE_DECODING = DecodingConfig(
    beam_size=10, num_groups=10, diversity_penalty=15.0, num_return=NODE_TOP_K
)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 6e-6
    epsilon: float = 1e-6
    batch_size: int = 8
    max_epochs: int = 10
    patience: int = 4
    additive_margin: float = 0.02
    pre_batches: int = 2

    def __post_init__(self):
        for name in ("learning_rate", "epsilon", "batch_size", "max_epochs", "patience"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


SEQ2SEQ_TRAINING = TrainConfig(learning_rate=6e-6, batch_size=8, max_epochs=10)
DUAL_ENCODER_TRAINING = TrainConfig(
    learning_rate=2.5e-6, batch_size=150, max_epochs=100,
    additive_margin=0.02, pre_batches=2,
)


@runtime_checkable
class GeneratorContract(Protocol):
    def generate(self, text: str, config: DecodingConfig) -> list[tuple[str, float]]: ...


@runtime_checkable
class BiEncoderContract(Protocol):
    def encode_query(self, text: str) -> np.ndarray: ...

    def encode_candidate(self, text: str) -> np.ndarray: ...


@runtime_checkable
class CompletionClientContract(Protocol):
    def complete(self, prompt: str, n_samples: int) -> list[str]: ...


# ---------------------------------------------------------------------------
# Deterministic stubs
# ---------------------------------------------------------------------------


class EchoGenerator:
    """Returns its input verbatim as the single rank-1 output."""

    def generate(self, text, config):
        return [(text, 1.0)]


class ScriptedGenerator:
    """Emits a fixed output list regardless of input."""

    def __init__(self, outputs: Sequence[tuple[str, float]]):
        self.outputs = list(outputs)
        self.calls: list[str] = []

    def generate(self, text, config):
        self.calls.append(text)
        return list(self.outputs)[: max(config.num_return, 0) or len(self.outputs)]


class StubBiEncoder:
    """Shared deterministic encoder; identical texts score 1.0."""

    def __init__(self, provider):
        self.provider = provider

    def encode_query(self, text):
        return self.provider.embed(text)

    def encode_candidate(self, text):
        return self.provider.embed(text)


class ScriptedCompletionClient:
    """Replays a fixed list of completions."""

    def __init__(self, outputs: Sequence[str]):
        self.outputs = list(outputs)
        self.prompts: list[str] = []

    def complete(self, prompt, n_samples):
        self.prompts.append(prompt)
        return self.outputs[:n_samples]


# ---------------------------------------------------------------------------
# Generation operations
# ---------------------------------------------------------------------------


def _check_ordering(outputs):
    scores = [s for _, s in outputs]
    if any(a < b for a, b in zip(scores, scores[1:])):
        raise BackendError("backend returned outputs with increasing scores")
    return outputs


def generate_sentence(
    gen: GeneratorContract,
    text: str,
    config: DecodingConfig = SENTENCE_DECODING,
    input_id: str | None = None,
) -> list[tuple[str, float]]:
    """Ranked sentence outputs under the sentence decoding defaults."""
    try:
        outputs = gen.generate(text, config)
    except Exception as exc:  # surface with the input id attached
        raise BackendError(f"generation failed for input {input_id!r}: {exc}") from exc
    return _check_ordering(outputs[: config.num_return] if config.num_return else outputs)


def generate_nodes(
    gen: GeneratorContract,
    text: str,
    config: DecodingConfig = NODE_DIVERSE_DECODING,
    input_id: str | None = None,
) -> list[tuple[str, float]]:
    """Up to 10 distinct node strings; constrained mode filters to the bank.

    Deduplication (by the global normalization) happens before top-10
    truncation.
    """
    if config.constrained and config.constraint_bank is not None and not len(config.constraint_bank):
        logger.warning("constrained decoding with an empty entity bank; no outputs")
        return []
    try:
        outputs = gen.generate(text, config)
    except Exception as exc:
        raise BackendError(f"generation failed for input {input_id!r}: {exc}") from exc
    _check_ordering(outputs)
    seen = set()
    result = []
    for out, score in outputs:
        key = normalize_text(out)
        if key in seen:
            continue
        if config.constrained and out not in config.constraint_bank:
            continue
        seen.add(key)
        result.append((out, score))
        if len(result) >= NODE_TOP_K:
            break
    return result


def dual_encoder_rank(
    be: BiEncoderContract, text: str, candidates: EntityBank, k: int = NODE_TOP_K
) -> list[tuple[str, float]]:
    """Top-k bank entries by dot-product score, ties broken lexicographically."""
    if not len(candidates):
        raise ValueError("candidate bank is empty")
    query = be.encode_query(text)
    scored = [
        (cand, float(np.dot(query, be.encode_candidate(cand))))
        for cand in candidates.sorted()
    ]
    scored.sort(key=lambda pair: (-pair[1], pair[0]))
    return scored[: max(k, 0)]


def complete_fewshot(
    client: CompletionClientContract, prompt: str, task: str
) -> list[str]:
    """Sample the remote client and keep non-empty outputs.

    Sentence task: 10 samples, return the single best (first non-empty).
    Node task: 15 samples, return up to 10 non-empty in sample order.
    """
    if task == "sentence":
        n_samples = 10
    elif task == "node":
        n_samples = 15
    else:
        raise ValueError(f"unknown task {task!r}")
    outputs = client.complete(prompt, n_samples)
    if not outputs:
        raise EmptyResultError("client returned no samples")
    non_empty = [o for o in outputs if o.strip()]
    if not non_empty:
        raise EmptyResultError("all client samples were empty")
    if task == "sentence":
        return [non_empty[0]]
    return non_empty[:NODE_TOP_K]


class RetryingClient:
    """Wraps a completion client with a bounded retry policy."""

    def __init__(self, client: CompletionClientContract, max_attempts: int = 3):
        self.client = client
        self.max_attempts = max_attempts

    def complete(self, prompt, n_samples):
        last: Exception | None = None
        for _ in range(self.max_attempts):
            try:
                return self.client.complete(prompt, n_samples)
            except RetryableError as exc:
                last = exc
        raise last


# ---------------------------------------------------------------------------
# Progressive reranking pipeline
# ---------------------------------------------------------------------------


def rerank_pipeline(
    first: Callable[[TaskInstance], list[tuple[str, float]]],
    second: GeneratorContract,
    instance: TaskInstance,
    config: DecodingConfig = NODE_DIVERSE_DECODING,
    no_finetune: bool = False,
) -> list[tuple[str, float]]:
    """Feed the first model's top-10 node strings as the second model's
    retrieve block.

    The original retrieved neighbors are not consulted; the second model's
    input carries only the first model's outputs.  no_finetune records whether
    the second model was adapted to the new input shape (metadata only at the
    contract level).
    """
    first_outputs = [text for text, _ in first(instance)[:NODE_TOP_K]]
    prompt = seed_prompt(instance.seed_term, instance.target_type, instance.direction)
    text = compose_model_input(prompt, first_outputs, instance.background)
    return generate_nodes(second, text, config, input_id=instance.instance_id)


# ---------------------------------------------------------------------------
# Prediction files and backend registry
# ---------------------------------------------------------------------------


def config_digest(config) -> str:
    payload = json.dumps(
        {k: v for k, v in vars(config).items() if not isinstance(v, EntityBank)},
        sort_keys=True,
        default=str,
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


def write_predictions(path, model_id: str, config, rows) -> None:
    """rows: iterable of (instance_id, [(text, score), ...])."""
    digest = config_digest(config)
    with open(path, "w", encoding="utf-8") as fh:
        for instance_id, outputs in rows:
            fh.write(
                json.dumps(
                    {
                        "instance_id": instance_id,
                        "model": model_id,
                        "config": digest,
                        "outputs": [[t, s] for t, s in outputs],
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )


def read_predictions(path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


_REGISTRY: dict[str, Callable[..., object]] = {}


def register_backend(name: str, factory: Callable[..., object]) -> None:
    _REGISTRY[name] = factory


def create_backend(name: str, **kwargs):
    if name not in _REGISTRY:
        raise KeyError(f"unknown backend {name!r}; registered: {sorted(_REGISTRY)}")
    return _REGISTRY[name](**kwargs)


register_backend("echo", lambda **kw: EchoGenerator())
register_backend("scripted", lambda outputs=(), **kw: ScriptedGenerator(outputs))


def _seq2seq_factory(model_name: str = "t5-large", **kw):
    from .backends import Seq2SeqBackend

    return Seq2SeqBackend(model_name, **kw)


def _biencoder_factory(model_name: str = "allenai/scibert_scivocab_uncased", **kw):
    from .backends import BiEncoderBackend

    return BiEncoderBackend(model_name, **kw)


register_backend("seq2seq", _seq2seq_factory)
register_backend("biencoder", _biencoder_factory)

"""Textual templates: seed prompts, enriched model inputs, few-shot prompts.

Template strings are constants and substitution never alters the surrounding
literals.  Inputs are also carried structurally downstream, so a seed term
containing a literal "| context:" cannot corrupt parsing.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, Sequence, runtime_checkable

from .corpus import NODE_TYPE_SURFACE, TaskInstance

FORWARD_SEED = "{v} is used for {p}"
BACKWARD_SEED = "{v} is done by using {p}"
ENRICHED_INPUT = "{P} | retrieve: {neighbors} | context: {B}"
PLAIN_INPUT = "{P} | context: {B}"

RETRIEVAL_BLOCK = "The retrieval results are: {neighbors}"

FEWSHOT_SENTENCE_FORWARD = (
    "Consider the following context: {B} "
    "In that context, which {p} can be used for {v}, and why?"
)
FEWSHOT_SENTENCE_BACKWARD = (
    "Consider the following context: {B} "
    "In that context, which {p} do we use {v}, and why?"
)
FEWSHOT_NODE_FORWARD = (
    "Consider the following context: {B} In that context, which {p} can be used for {v}?"
)
FEWSHOT_NODE_BACKWARD = (
    "Consider the following context: {B} In that context, which {p} do we use {v}?"
)
# Backward start prompt is rendered verbatim from its source, grammar included.
NODE_START_FORWARD = "Suggest a {p} that can be used for a natural language processing {v}"
NODE_START_BACKWARD = "Suggest a {p} that for a natural language processing {v}"

NEIGHBOR_JOIN = ", "

TRAINABLE_TOKEN_BUDGET = 512
REMOTE_TOKEN_BUDGET = 2048
FEWSHOT_EXAMPLE_COUNT = 5


@runtime_checkable
class Tokenizer(Protocol):
    def tokenize(self, text: str) -> list[str]: ...

    def detokenize(self, tokens: Sequence[str]) -> str: ...


class WhitespaceTokenizer:
    """Test tokenizer: whitespace tokens, space-joined."""

    def tokenize(self, text: str) -> list[str]:
        return text.split()

    def detokenize(self, tokens: Sequence[str]) -> str:
        return " ".join(tokens)


def _type_surface(p: str) -> str:
    return NODE_TYPE_SURFACE.get(p, p)


def seed_prompt(v: str, p: str, direction: str) -> str:
    """Exact seed-prompt instantiation; input casing of v is preserved."""
    template = FORWARD_SEED if direction == "forward" else BACKWARD_SEED
    if direction not in ("forward", "backward"):
        raise ValueError(f"bad direction {direction!r}")
    return template.format(v=v, p=_type_surface(p))


def compose_model_input(
    prompt: str,
    neighbors: Sequence[str],
    background: str,
    token_budget: int = TRAINABLE_TOKEN_BUDGET,
    tokenizer: Tokenizer | None = None,
) -> str:
    """Enriched (or plain) model input, truncated from the right to the budget.

    Truncation drops the context tail first, then the retrieval tail; the
    prompt itself is never dropped.
    """
    if token_budget <= 0:
        raise ValueError("token_budget must be positive")
    if neighbors:
        text = ENRICHED_INPUT.format(
            P=prompt, neighbors=NEIGHBOR_JOIN.join(neighbors), B=background
        )
    else:
        text = PLAIN_INPUT.format(P=prompt, B=background)
    tokenizer = tokenizer or WhitespaceTokenizer()
    tokens = tokenizer.tokenize(text)
    if len(tokens) <= token_budget:
        return text
    if len(tokenizer.tokenize(prompt)) > token_budget:
        raise ValueError("token budget smaller than the prompt itself")
    return tokenizer.detokenize(tokens[:token_budget])


def _neighbor_list(neighbors) -> list[str]:
    if neighbors is None:
        return []
    if hasattr(neighbors, "semantic"):  # NeighborSet
        return list(neighbors.semantic) + list(neighbors.kg) + list(neighbors.citation)
    return list(neighbors)


def _example_body(
    instance: TaskInstance, task: str, neighbors=None
) -> str:
    background = instance.background
    nbrs = _neighbor_list(neighbors)
    if nbrs:
        background = (
            background + " " + RETRIEVAL_BLOCK.format(neighbors=NEIGHBOR_JOIN.join(nbrs))
        )
    if task == "sentence":
        template = (
            FEWSHOT_SENTENCE_FORWARD
            if instance.direction == "forward"
            else FEWSHOT_SENTENCE_BACKWARD
        )
    else:
        template = (
            FEWSHOT_NODE_FORWARD
            if instance.direction == "forward"
            else FEWSHOT_NODE_BACKWARD
        )
    return template.format(
        B=background, p=_type_surface(instance.target_type), v=instance.seed_term
    )


def fewshot_prompt(
    target: TaskInstance,
    examples: Sequence[tuple[TaskInstance, str]],
    mode: str = "random",
    task: str = "sentence",
    neighbors=None,
    similarities: Sequence[float] | None = None,
) -> str:
    """Few-shot prompt for the remote-completion baseline.

    Each example is rendered with its gold output appended; the final query is
    rendered identically with the gold omitted.  In retrieved mode, examples
    are ordered by descending similarity of their query to the target's.
    """
    if task not in ("sentence", "node"):
        raise ValueError(f"unknown task {task!r}")
    if mode not in ("random", "retrieved"):
        raise ValueError(f"unknown mode {mode!r}")
    examples = list(examples)
    if mode == "retrieved":
        if similarities is None or len(similarities) != len(examples):
            raise ValueError("retrieved mode requires one similarity per example")
        order = sorted(
            range(len(examples)), key=lambda i: (-similarities[i], examples[i][0].instance_id)
        )
        examples = [examples[i] for i in order]

    blocks: list[str] = []
    if task == "node":
        start = NODE_START_FORWARD if target.direction == "forward" else NODE_START_BACKWARD
        blocks.append(
            start.format(p=_type_surface(target.target_type), v=target.seed_term)
        )
    for instance, gold in examples:
        blocks.append(_example_body(instance, task) + " " + gold)
    blocks.append(_example_body(target, task, neighbors=neighbors))
    return "\n".join(blocks)


@dataclass(frozen=True)
class PromptTemplateSet:
    forward_seed: str = FORWARD_SEED
    backward_seed: str = BACKWARD_SEED
    enriched_input: str = ENRICHED_INPUT
    plain_input: str = PLAIN_INPUT
    retrieval_block: str = RETRIEVAL_BLOCK
    fewshot_sentence_forward: str = FEWSHOT_SENTENCE_FORWARD
    fewshot_sentence_backward: str = FEWSHOT_SENTENCE_BACKWARD
    fewshot_node_forward: str = FEWSHOT_NODE_FORWARD
    fewshot_node_backward: str = FEWSHOT_NODE_BACKWARD
    node_start_forward: str = NODE_START_FORWARD
    node_start_backward: str = NODE_START_BACKWARD
    neighbor_join: str = NEIGHBOR_JOIN


def dump_template_reference(path) -> None:
    """Write the template constants so other implementations can golden-test
    against identical bytes."""
    import dataclasses
    import json

    templates = dataclasses.asdict(PromptTemplateSet())
    reference = {
        "templates": templates,
        "examples": {
            "seed_forward": seed_prompt("data augmentation", "Task", "forward"),
            "seed_backward": seed_prompt("Irish language learning", "Method", "backward"),
            "seed_backward_other": seed_prompt(
                "symbolic reasoning", "Other Scientific Terms", "backward"
            ),
            "plain_input": compose_model_input("x is used for Task", [], "bg."),
            "enriched_input": compose_model_input("x is used for Task", ["a", "b"], "bg."),
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(reference, fh, indent=2, ensure_ascii=False, sort_keys=True)
        fh.write("\n")

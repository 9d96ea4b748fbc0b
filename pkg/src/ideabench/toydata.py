"""Synthetic desk-scale corpora for demos and end-to-end tests."""

from __future__ import annotations

import random

from .corpus import NODE_TYPES, EntityNode, Mention, PaperRecord, RelationEdge

_TOPICS = [
    "machine translation", "question answering", "named entity recognition",
    "text summarization", "relation extraction", "semantic parsing",
    "speech recognition", "dialogue generation", "sentiment analysis",
    "knowledge acquisition", "coreference resolution", "document retrieval",
]

_METHODS = [
    "graph neural network", "contrastive pretraining", "beam search decoder",
    "transformer encoder", "data augmentation", "dual encoder",
    "reinforcement learning", "prompt tuning", "latent variable model",
    "curriculum learning", "memory network", "span-based tagger",
]


def synthetic_corpus(n_papers: int = 30, seed: int = 7, years=(2018, 2019, 2020, 2021, 2022)):
    """A small corpus with used-for relations, citations, coreference, and
    abbreviations, spanning the given years."""
    rng = random.Random(seed)
    records = []
    for i in range(n_papers):
        paper_id = f"P{i:03d}"
        year = years[i % len(years)]
        task = rng.choice(_TOPICS)
        method = rng.choice(_METHODS)
        other = rng.choice([t for t in _TOPICS if t != task])
        sentences = (
            (f"{task} remains difficult because existing systems rely on {other}.", "Background"),
            (f"annotated resources for {task} are scarce.", "Other"),
            (f"we propose a {method} for {task}.", "Method"),
            (f"experiments show the {method} improves {task}.", "Result"),
        )
        entities = (
            EntityNode(
                node_id="e_task",
                node_type="Task",
                canonical_text=task,
                mentions=(Mention(0, 0, len(task), task), Mention(2, 0, len(task), task)),
            ),
            EntityNode(
                node_id="e_method",
                node_type="Method",
                canonical_text=method,
                mentions=(Mention(2, 13, 13 + len(method), method),),
            ),
            EntityNode(
                node_id="e_other",
                node_type=rng.choice(NODE_TYPES),
                canonical_text=other,
                mentions=(Mention(0, 0, len(other), other),),
            ),
        )
        relations = (RelationEdge("e_method", "Used-for", "e_task", 2),)
        citations = tuple(
            f"P{j:03d}" for j in rng.sample(range(n_papers), k=min(3, n_papers)) if j != i
        )
        records.append(
            PaperRecord(
                paper_id=paper_id,
                title=f"a {method} approach to {task}",
                abstract=" ".join(t for t, _ in sentences),
                year=year,
                sentences=sentences,
                citations=citations,
                entities=entities,
                relations=relations,
                coref_clusters=(),
                abbreviations=(),
            )
        )
    return records

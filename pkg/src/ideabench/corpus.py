"""Corpus ingestion and task-instance construction.

Papers arrive as newline-delimited JSON records carrying externally produced
annotations (entities, relations, coreference clusters, abbreviation pairs,
rhetorical sentence labels).  This module validates them, assembles per-paper
entity graphs with coreference merging and abbreviation expansion, extracts
forward/backward used-for task instances, and splits them by year.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass

SENTENCE_LABELS = frozenset({"Background", "Method", "Objective", "Other", "Result"})
BACKGROUND_LABELS = frozenset({"Background", "Other"})

NODE_TYPES = (
    "Task",
    "Method",
    "Evaluation Metric",
    "Material",
    "Other Scientific Terms",
    "Generic Terms",
)

RELATION_TYPES = frozenset(
    {
        "Used-for",
        "Feature-of",
        "Evaluate-for",
        "Hyponym-of",
        "Part-of",
        "Compare",
        "Conjunction",
    }
)

# Surface forms used when a node type is rendered inside a prompt.
NODE_TYPE_SURFACE = {
    "Task": "Task",
    "Method": "Method",
    "Evaluation Metric": "Metric",
    "Material": "Material",
    "Other Scientific Terms": "OtherScientificTerm",
    "Generic Terms": "Generic",
}

_PUNCT_EDGE = re.compile(r"^[\s\.,;:!\?\'\"\(\)\[\]\{\}]+|[\s\.,;:!\?\'\"\(\)\[\]\{\}]+$")
_WS = re.compile(r"\s+")


class CorpusError(Exception):
    """Base error for corpus handling."""


class ParseError(CorpusError):
    """A line failed to parse under the declared schema."""


class IntegrityError(CorpusError):
    """A record violates a structural invariant."""


def normalize_text(text: str) -> str:
    """Canonical normalization for comparing surface forms.

    Lowercase, collapse internal whitespace, strip leading/trailing
    punctuation.  Applied uniformly wherever entity strings are matched.
    """
    text = _PUNCT_EDGE.sub("", text)
    return _WS.sub(" ", text).strip().lower()


@dataclass(frozen=True)
class Mention:
    sentence_index: int
    start: int
    end: int
    text: str


@dataclass(frozen=True)
class EntityNode:
    node_id: str
    mentions: tuple[Mention, ...]
    node_type: str
    canonical_text: str

    def __post_init__(self):
        if self.node_type not in NODE_TYPES:
            raise IntegrityError(f"unknown node type {self.node_type!r}")
        if not self.mentions:
            raise IntegrityError(f"entity {self.node_id} has no mentions")
        if not self.canonical_text:
            raise IntegrityError(f"entity {self.node_id} has empty canonical text")


@dataclass(frozen=True)
class RelationEdge:
    head: str
    relation: str
    tail: str
    sentence_index: int

    def __post_init__(self):
        if self.head == self.tail:
            raise IntegrityError("self-loop relation")
        if self.relation not in RELATION_TYPES:
            raise IntegrityError(f"unknown relation type {self.relation!r}")


@dataclass(frozen=True)
class PaperRecord:
    paper_id: str
    title: str
    abstract: str
    year: int
    sentences: tuple[tuple[str, str], ...]  # (text, rhetorical label)
    citations: tuple[str, ...]
    entities: tuple[EntityNode, ...]
    relations: tuple[RelationEdge, ...]
    coref_clusters: tuple[tuple[str, ...], ...]  # clusters of entity ids
    abbreviations: tuple[tuple[str, str], ...]  # (short form, long form)
    english: bool = True

    def validate(self) -> None:
        if self.year <= 1900:
            raise IntegrityError(f"{self.paper_id}: implausible year {self.year}")
        declared = {e.node_id for e in self.entities}
        if len(declared) != len(self.entities):
            raise IntegrityError(f"{self.paper_id}: duplicate entity ids")
        for label_pair in self.sentences:
            if label_pair[1] not in SENTENCE_LABELS:
                raise IntegrityError(
                    f"{self.paper_id}: unknown sentence label {label_pair[1]!r}"
                )
        for e in self.entities:
            for m in e.mentions:
                if not 0 <= m.sentence_index < len(self.sentences):
                    raise IntegrityError(
                        f"{self.paper_id}: mention of {e.node_id} addresses "
                        f"sentence {m.sentence_index} out of range"
                    )
        for r in self.relations:
            for endpoint in (r.head, r.tail):
                if endpoint not in declared:
                    raise IntegrityError(
                        f"{self.paper_id}: relation references undeclared "
                        f"entity {endpoint}"
                    )
            if not 0 <= r.sentence_index < len(self.sentences):
                raise IntegrityError(
                    f"{self.paper_id}: relation sentence {r.sentence_index} out of range"
                )
        for cluster in self.coref_clusters:
            for node_id in cluster:
                if node_id not in declared:
                    raise IntegrityError(
                        f"{self.paper_id}: coreference cluster references "
                        f"unknown entity {node_id}"
                    )


@dataclass(frozen=True)
class DocumentGraph:
    paper_id: str
    year: int
    title: str
    nodes: tuple[EntityNode, ...]
    edges: tuple[RelationEdge, ...]
    background: tuple[str, ...]
    sentences: tuple[tuple[str, str], ...]
    citations: tuple[str, ...] = ()
    clusters: tuple[tuple[str, ...], ...] = ()  # coreferent canonical texts

    @property
    def background_text(self) -> str:
        return " ".join(self.background)

    def node_by_id(self, node_id: str) -> EntityNode:
        for n in self.nodes:
            if n.node_id == node_id:
                return n
        raise KeyError(node_id)


@dataclass(frozen=True)
class TaskInstance:
    instance_id: str
    seed_term: str
    target_type: str
    direction: str  # "forward" | "backward"
    background: str
    paper_id: str
    year: int
    target_sentence: str | None = None
    target_node: str | None = None

    def __post_init__(self):
        if self.direction not in ("forward", "backward"):
            raise IntegrityError(f"bad direction {self.direction!r}")
        if (self.target_sentence is None) == (self.target_node is None):
            raise IntegrityError(
                f"{self.instance_id}: exactly one task-variant target required"
            )

    @property
    def target(self) -> str:
        return self.target_sentence if self.target_sentence is not None else self.target_node


# ---------------------------------------------------------------------------
# Serialization (corpus schema "jsonl-v1": one paper per line)
# ---------------------------------------------------------------------------


def record_to_dict(record: PaperRecord) -> dict:
    return {
        "paper_id": record.paper_id,
        "title": record.title,
        "abstract": record.abstract,
        "year": record.year,
        "sentences": [[t, l] for t, l in record.sentences],
        "citations": list(record.citations),
        "entities": [
            {
                "id": e.node_id,
                "type": e.node_type,
                "canonical": e.canonical_text,
                "mentions": [
                    [m.sentence_index, m.start, m.end, m.text] for m in e.mentions
                ],
            }
            for e in record.entities
        ],
        "relations": [
            [r.head, r.relation, r.tail, r.sentence_index] for r in record.relations
        ],
        "coref_clusters": [list(c) for c in record.coref_clusters],
        "abbreviations": [list(p) for p in record.abbreviations],
        "english": record.english,
    }


def record_from_dict(data: dict) -> PaperRecord:
    entities = tuple(
        EntityNode(
            node_id=e["id"],
            node_type=e["type"],
            canonical_text=e["canonical"],
            mentions=tuple(Mention(*m) for m in e["mentions"]),
        )
        for e in data["entities"]
    )
    relations = tuple(RelationEdge(*r) for r in data["relations"])
    record = PaperRecord(
        paper_id=data["paper_id"],
        title=data["title"],
        abstract=data.get("abstract", ""),
        year=int(data["year"]),
        sentences=tuple((s[0], s[1]) for s in data["sentences"]),
        citations=tuple(data.get("citations", [])),
        entities=entities,
        relations=relations,
        coref_clusters=tuple(tuple(c) for c in data.get("coref_clusters", [])),
        abbreviations=tuple(tuple(p) for p in data.get("abbreviations", [])),
        english=bool(data.get("english", True)),
    )
    record.validate()
    return record


def ingest_corpus(path, schema: str = "jsonl-v1") -> list[PaperRecord]:
    """Read and validate a newline-delimited corpus file."""
    if schema != "jsonl-v1":
        raise ValueError(f"unknown corpus schema {schema!r}")
    records: list[PaperRecord] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                data = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"line {lineno}: {exc}") from exc
            try:
                record = record_from_dict(data)
            except (KeyError, TypeError) as exc:
                raise ParseError(f"line {lineno}: missing or malformed field: {exc}") from exc
            if record.paper_id in seen:
                raise IntegrityError(f"line {lineno}: duplicate paper_id {record.paper_id}")
            seen.add(record.paper_id)
            records.append(record)
    return records


def write_corpus(records, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record_to_dict(record), ensure_ascii=False) + "\n")


# ---------------------------------------------------------------------------
# Document graph assembly
# ---------------------------------------------------------------------------


def expand_abbreviations(text: str, abbreviations) -> str:
    """Replace abbreviation short forms with their long forms."""
    for short, long in abbreviations:
        if not short:
            continue
        pattern = r"(?<!\w)" + re.escape(short) + r"(?!\w)"
        text = re.sub(pattern, long, text)
    return text


def _merged_canonical(mentions, abbreviations) -> str:
    # Longest expanded mention is the most informative canonical form.
    expanded = [expand_abbreviations(m.text, abbreviations) for m in mentions]
    return max(expanded, key=lambda t: (len(t), t))


def build_document_graph(record: PaperRecord) -> DocumentGraph:
    """Collapse coreference clusters, expand abbreviations, pick background."""
    record.validate()
    by_id = {e.node_id: e for e in record.entities}

    cluster_of: dict[str, int] = {}
    groups: list[list[str]] = []
    for cluster in record.coref_clusters:
        for node_id in cluster:
            if node_id not in by_id:
                raise IntegrityError(
                    f"{record.paper_id}: coreference cluster references unknown "
                    f"entity {node_id}"
                )
        groups.append(list(dict.fromkeys(cluster)))
    for idx, group in enumerate(groups):
        for node_id in group:
            cluster_of[node_id] = idx
    for e in record.entities:
        if e.node_id not in cluster_of:
            cluster_of[e.node_id] = len(groups)
            groups.append([e.node_id])

    merged_nodes: list[EntityNode] = []
    merged_id_of: dict[str, str] = {}
    cluster_texts: list[tuple[str, ...]] = []
    for group in groups:
        members = [by_id[i] for i in group]
        mentions = tuple(
            sorted(
                {m for e in members for m in e.mentions},
                key=lambda m: (m.sentence_index, m.start, m.end),
            )
        )
        canonical = _merged_canonical(mentions, record.abbreviations)
        rep = members[0]
        node = EntityNode(
            node_id=rep.node_id,
            mentions=mentions,
            node_type=rep.node_type,
            canonical_text=canonical,
        )
        merged_nodes.append(node)
        for e in members:
            merged_id_of[e.node_id] = rep.node_id
        if len(members) > 1:
            cluster_texts.append(
                tuple(
                    dict.fromkeys(
                        expand_abbreviations(m.text, record.abbreviations)
                        for e in members
                        for m in e.mentions
                    )
                )
            )

    edges = []
    seen_edges = set()
    for r in record.relations:
        head = merged_id_of[r.head]
        tail = merged_id_of[r.tail]
        if head == tail:
            continue  # coreference collapsed both endpoints
        key = (head, r.relation, tail, r.sentence_index)
        if key in seen_edges:
            continue
        seen_edges.add(key)
        edges.append(RelationEdge(head, r.relation, tail, r.sentence_index))

    background = tuple(
        text for text, label in record.sentences if label in BACKGROUND_LABELS
    )
    return DocumentGraph(
        paper_id=record.paper_id,
        year=record.year,
        title=record.title,
        nodes=tuple(merged_nodes),
        edges=tuple(edges),
        background=background,
        sentences=record.sentences,
        citations=record.citations,
        clusters=tuple(cluster_texts),
    )


# ---------------------------------------------------------------------------
# Task instance extraction and splitting
# ---------------------------------------------------------------------------


def extract_instances(graph: DocumentGraph, task: str) -> list[TaskInstance]:
    """Forward/backward instances from used-for edges with non-background targets.

    task: "sentence" populates target_sentence; "node" populates target_node.
    """
    if task not in ("sentence", "node"):
        raise ValueError(f"unknown task {task!r}")
    background_indexes = {
        i for i, (_, label) in enumerate(graph.sentences) if label in BACKGROUND_LABELS
    }
    background = graph.background_text
    instances: list[TaskInstance] = []
    counter = 0
    for edge in graph.edges:
        if edge.relation != "Used-for":
            continue
        if edge.sentence_index in background_indexes:
            continue  # targets are the non-background sentences
        head = graph.node_by_id(edge.head)
        tail = graph.node_by_id(edge.tail)
        sentence_text = graph.sentences[edge.sentence_index][0]
        for direction, seed, target in (
            ("forward", head, tail),
            ("backward", tail, head),
        ):
            counter += 1
            kwargs = dict(
                instance_id=f"{graph.paper_id}:{task}:{counter}",
                seed_term=seed.canonical_text,
                target_type=target.node_type,
                direction=direction,
                background=background,
                paper_id=graph.paper_id,
                year=graph.year,
            )
            if task == "sentence":
                instances.append(TaskInstance(target_sentence=sentence_text, **kwargs))
            else:
                instances.append(TaskInstance(target_node=target.canonical_text, **kwargs))
    return instances


@dataclass(frozen=True)
class SplitConfig:
    valid_year: int = 2021
    test_year: int = 2022


@dataclass(frozen=True)
class Splits:
    train: tuple[TaskInstance, ...]
    valid: tuple[TaskInstance, ...]
    test: tuple[TaskInstance, ...]

    def all(self) -> tuple[TaskInstance, ...]:
        return self.train + self.valid + self.test


def temporal_split(instances, config: SplitConfig = SplitConfig()) -> Splits:
    """Split by year: before valid_year -> train, before test_year -> valid, rest -> test."""
    train, valid, test = [], [], []
    for inst in instances:
        if inst.year < config.valid_year:
            train.append(inst)
        elif inst.year < config.test_year:
            valid.append(inst)
        else:
            test.append(inst)
    return Splits(tuple(train), tuple(valid), tuple(test))


def write_split_manifests(splits: Splits, directory) -> None:
    """Write three record-id lists, one instance id per line."""
    import os

    os.makedirs(directory, exist_ok=True)
    for name, part in (("train", splits.train), ("valid", splits.valid), ("test", splits.test)):
        with open(os.path.join(directory, f"{name}.ids"), "w", encoding="utf-8") as fh:
            for inst in part:
                fh.write(inst.instance_id + "\n")

"""Non-canonicalized knowledge graph built as a union of document graphs.

Node identity across documents is the normalized canonical text.  The graph
answers one-hop neighbor queries, exposes coreference clusters for
canonicalized metric matching, and materializes the entity bank used by
constrained decoding.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .corpus import DocumentGraph, Splits, normalize_text


@dataclass
class KGNode:
    canonical_text: str
    mention_texts: set[str] = field(default_factory=set)
    source_papers: set[str] = field(default_factory=set)


@dataclass(frozen=True)
class KGEdge:
    head: str  # normalized canonical text
    relation: str
    tail: str
    paper_id: str


@dataclass
class KnowledgeGraph:
    cutoff_year: int | None
    nodes: dict[str, KGNode] = field(default_factory=dict)
    edges: list[KGEdge] = field(default_factory=list)
    cluster_index: dict[str, int] = field(default_factory=dict)
    _clusters: dict[int, set[str]] = field(default_factory=dict)
    _adjacency: dict[str, set[str]] = field(default_factory=dict)

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def stats(self) -> dict:
        return {
            "cutoff_year": self.cutoff_year,
            "nodes": self.num_nodes,
            "relations": self.num_edges,
        }


@dataclass(frozen=True)
class EntityBank:
    entries: frozenset[str]
    provenance: tuple[str, ...]

    def __contains__(self, text: str) -> bool:
        return normalize_text(text) in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def sorted(self) -> list[str]:
        return sorted(self.entries)


def build_background_kg(graphs, cutoff_year: int | None = None) -> KnowledgeGraph:
    """Union the given document graphs into one KG.

    Only papers dated before cutoff_year contribute (no cutoff when None).
    Edge multiplicity is preserved; two papers asserting the same relation
    count twice in the statistics.
    """
    kg = KnowledgeGraph(cutoff_year=cutoff_year)
    next_cluster = 0
    for graph in sorted(graphs, key=lambda g: g.paper_id):
        if cutoff_year is not None and graph.year >= cutoff_year:
            continue
        key_of = {}
        for node in graph.nodes:
            key = normalize_text(node.canonical_text)
            key_of[node.node_id] = key
            entry = kg.nodes.get(key)
            if entry is None:
                entry = kg.nodes[key] = KGNode(canonical_text=node.canonical_text)
            entry.mention_texts.update(m.text for m in node.mentions)
            entry.source_papers.add(graph.paper_id)
        for edge in graph.edges:
            head = key_of[edge.head]
            tail = key_of[edge.tail]
            if head == tail:
                continue  # normalization collapsed both endpoints
            kg.edges.append(KGEdge(head, edge.relation, tail, graph.paper_id))
            kg._adjacency.setdefault(head, set()).add(tail)
            kg._adjacency.setdefault(tail, set()).add(head)
        # cross-document coreference links from the IE payload
        for cluster in graph.clusters:
            keys = {normalize_text(t) for t in cluster}
            existing = {kg.cluster_index[k] for k in keys if k in kg.cluster_index}
            if existing:
                target = min(existing)
                for other in existing - {target}:
                    for k in kg._clusters.pop(other):
                        kg.cluster_index[k] = target
                        kg._clusters.setdefault(target, set()).add(k)
            else:
                target = next_cluster
                next_cluster += 1
            members = kg._clusters.setdefault(target, set())
            for k in keys:
                kg.cluster_index[k] = target
                members.add(k)
    return kg


def one_hop_neighbors(kg: KnowledgeGraph, seed: str) -> list[str]:
    """All nodes adjacent to the seed via any edge direction, sorted.

    An absent seed is a legal query and yields an empty list.
    """
    key = normalize_text(seed)
    return sorted(kg._adjacency.get(key, ()))


def coreference_cluster(kg: KnowledgeGraph, node_text: str) -> set[str]:
    """All normalized surface forms coreferent with node_text, itself included."""
    key = normalize_text(node_text)
    cluster_id = kg.cluster_index.get(key)
    if cluster_id is None:
        return {key}
    return set(kg._clusters[cluster_id]) | {key}


def entity_bank(splits: Splits) -> EntityBank:
    """Normalized, deduplicated seed and target node strings across all splits."""
    entries = set()
    for inst in splits.all():
        entries.add(normalize_text(inst.seed_term))
        if inst.target_node is not None:
            entries.add(normalize_text(inst.target_node))
    entries.discard("")
    return EntityBank(entries=frozenset(entries), provenance=("train", "valid", "test"))


def bank_from_texts(texts) -> EntityBank:
    entries = {normalize_text(t) for t in texts} - {""}
    return EntityBank(entries=frozenset(entries), provenance=("custom",))


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------


def save_kg(kg: KnowledgeGraph, nodes_path, edges_path) -> None:
    with open(nodes_path, "w", encoding="utf-8") as fh:
        for key in sorted(kg.nodes):
            node = kg.nodes[key]
            fh.write(
                json.dumps(
                    {
                        "key": key,
                        "canonical": node.canonical_text,
                        "mentions": sorted(node.mention_texts),
                        "papers": sorted(node.source_papers),
                        "cluster": kg.cluster_index.get(key),
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )
    with open(edges_path, "w", encoding="utf-8") as fh:
        for edge in kg.edges:
            fh.write(
                json.dumps(
                    [edge.head, edge.relation, edge.tail, edge.paper_id],
                    ensure_ascii=False,
                )
                + "\n"
            )


def load_kg(nodes_path, edges_path, cutoff_year: int | None = None) -> KnowledgeGraph:
    kg = KnowledgeGraph(cutoff_year=cutoff_year)
    with open(nodes_path, encoding="utf-8") as fh:
        for line in fh:
            data = json.loads(line)
            kg.nodes[data["key"]] = KGNode(
                canonical_text=data["canonical"],
                mention_texts=set(data["mentions"]),
                source_papers=set(data["papers"]),
            )
            if data.get("cluster") is not None:
                kg.cluster_index[data["key"]] = data["cluster"]
                kg._clusters.setdefault(data["cluster"], set()).add(data["key"])
    with open(edges_path, encoding="utf-8") as fh:
        for line in fh:
            head, relation, tail, paper_id = json.loads(line)
            kg.edges.append(KGEdge(head, relation, tail, paper_id))
            kg._adjacency.setdefault(head, set()).add(tail)
            kg._adjacency.setdefault(tail, set()).add(head)
    return kg


def write_stats_report(kg: KnowledgeGraph, path) -> None:
    stats = kg.stats()
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"cutoff_year\t{stats['cutoff_year']}\n")
        fh.write(f"nodes\t{stats['nodes']}\n")
        fh.write(f"relations\t{stats['relations']}\n")

import pytest

from ideabench.corpus import (
    EntityNode,
    Mention,
    PaperRecord,
    RelationEdge,
)


def make_record(
    paper_id="doc1",
    year=2020,
    sentences=None,
    entities=None,
    relations=None,
    coref_clusters=(),
    abbreviations=(),
    citations=(),
    title="a paper title",
):
    if sentences is None:
        sentences = (
            ("current plms are typically trained with static data.", "Background"),
            ("we propose function preserved model expansion.", "Method"),
        )
    if entities is None:
        entities = (
            EntityNode(
                node_id="e1",
                node_type="Task",
                canonical_text="knowledge acquisition",
                mentions=(Mention(0, 0, 21, "knowledge acquisition"),),
            ),
            EntityNode(
                node_id="e2",
                node_type="Method",
                canonical_text="function preserved model expansion",
                mentions=(Mention(1, 11, 45, "function preserved model expansion"),),
            ),
        )
    if relations is None:
        relations = (RelationEdge("e2", "Used-for", "e1", 1),)
    return PaperRecord(
        paper_id=paper_id,
        title=title,
        abstract=" ".join(t for t, _ in sentences),
        year=year,
        sentences=tuple(sentences),
        citations=tuple(citations),
        entities=tuple(entities),
        relations=tuple(relations),
        coref_clusters=tuple(coref_clusters),
        abbreviations=tuple(abbreviations),
    )


@pytest.fixture
def figure_record():
    """Paper with [function preserved model expansion, Used-for, knowledge
    acquisition] stated in a non-background sentence."""
    return make_record()

"""Three kinds of inspiration for one instance.

Semantic neighbors come from an exact-scan index over the training split
(cap 20), knowledge-graph neighbors are the seed term's one-hop neighborhood
(unbounded), and citation neighbors are pre-cutoff cited-paper titles ranked
by similarity to the query (cap 5). Everything feeds one enriched model
input under a token budget.
"""

from ideabench.corpus import build_document_graph, extract_instances, temporal_split
from ideabench.inspiration import (
    HashingStubProvider,
    build_query,
    build_semantic_index,
    retrieve_all,
)
from ideabench.kgraph import build_background_kg
from ideabench.prompting import compose_model_input, seed_prompt
from ideabench.toydata import synthetic_corpus

records = synthetic_corpus(30, seed=7)
graphs = [build_document_graph(r) for r in records]
instances = [i for g in graphs for i in extract_instances(g, "node")]
splits = temporal_split(instances)

provider = HashingStubProvider(dimension=32)  # stands in for a sentence encoder
index = build_semantic_index(splits.train, provider)
kg = build_background_kg(graphs, cutoff_year=2021)
records_by_id = {r.paper_id: r for r in records}

target = splits.test[0] if splits.test else splits.train[0]
print(f"instance {target.instance_id}: {build_query(target)!r}")

neighbors = retrieve_all(target, index, kg, records_by_id, provider, cutoff_year=2021)
print(f"\nsemantic neighbors ({len(neighbors.semantic)}/20):")
for n in neighbors.semantic[:5]:
    print(f"  {n}")
print(f"kg neighbors ({len(neighbors.kg)}, unbounded): {list(neighbors.kg)[:5]}")
print(f"citation neighbors ({len(neighbors.citation)}/5):")
for n in neighbors.citation:
    print(f"  {n}")

prompt = seed_prompt(target.seed_term, target.target_type, target.direction)
flat = list(neighbors.semantic[:3]) + list(neighbors.kg[:2])
enriched = compose_model_input(prompt, flat, target.background)
print(f"\nenriched model input:\n  {enriched}")

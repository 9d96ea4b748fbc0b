"""The non-canonicalized background knowledge graph.

Document graphs published before the cutoff year are unioned; nodes merge
only when their normalized surface text matches or a coreference cluster
links them. One-hop neighborhoods are direction-agnostic and unbounded.
"""

from ideabench.corpus import build_document_graph
from ideabench.kgraph import build_background_kg, coreference_cluster, one_hop_neighbors
from ideabench.toydata import synthetic_corpus

records = synthetic_corpus(25, seed=7)
graphs = [build_document_graph(r) for r in records]

kg = build_background_kg(graphs, cutoff_year=2021)
stats = kg.stats()
print(f"background KG at cutoff 2021: {stats['nodes']} nodes, "
      f"{stats['relations']} relation edges")
print("papers after the cutoff contribute nothing:",
      all(records[i].year < 2021
          for i, r in enumerate(records)
          if any(r.paper_id in n.source_papers for n in kg.nodes.values())))

seed = next(iter(kg.nodes))
neighbors = one_hop_neighbors(kg, seed)
print(f"\none-hop neighbors of {seed!r} ({len(neighbors)}, lexicographic):")
for n in neighbors[:6]:
    print(f"  {n}")

print(f"\ncoreference cluster of {seed!r}: {sorted(coreference_cluster(kg, seed))}")
print("lookups normalize:", one_hop_neighbors(kg, f"  {seed.upper()} ") == neighbors)

"""The HTTP API end to end: retrieval, blinded generation, annotation.

Runs the FastAPI app in-process. Two raters label outputs identified only by
opaque handles; model identities resolve only after the session closes, and
the agreement report compares the raters on their shared instances.
"""

from fastapi.testclient import TestClient

from ideabench.service import Workbench, create_app
from ideabench.toydata import synthetic_corpus

bench = Workbench()
bench.load_records(synthetic_corpus(20, seed=7))
bench.build(task="sentence")
client = TestClient(create_app(bench))

splits = client.get("/v1/instances").json()
print(f"instances: train {len(splits['train'])}, valid {len(splits['valid'])}, "
      f"test {len(splits['test'])}")

retrieved = client.post("/v1/retrieve", json={
    "seed": "question answering", "target_type": "Method",
    "direction": "forward", "background": "existing systems rely on templates.",
}).json()
print(f"\nretrieve: {len(retrieved['neighbors']['semantic'])} semantic, "
      f"{len(retrieved['neighbors']['kg'])} kg, "
      f"{len(retrieved['neighbors']['citation'])} citation")
print(f"model input: {retrieved['model_input'][:90]}...")

session = client.post("/v1/sessions", json={
    "raters": ["alice", "bob"], "instance_ids": [f"i{k}" for k in range(20)],
}).json()
sid = session["session_id"]
shared = session["overlap"]["alice|bob"]
print(f"\nsession {sid}: each rater gets 10 instances, {len(shared)} shared")

outputs = client.post("/v1/generate", json={
    "session_id": sid, "instance_id": shared[0], "models": ["echo"],
    "seed": "question answering", "target_type": "Method",
    "direction": "forward", "background": "existing systems rely on templates.",
}).json()["outputs"]
handle = outputs[0]["handle"]
print(f"blinded output handle: {handle} (no model name visible)")

criteria = {"relevance": 1, "novelty": 1, "scientific_sense": 1, "clarity": 1}
for rater in ("alice", "bob"):
    client.post("/v1/annotate", json={
        "session_id": sid, "rater_id": rater, "instance_id": shared[0],
        "output_id": handle, "label": "helpful", "criteria": criteria,
    })

blocked = client.get(f"/v1/sessions/{sid}/resolve")
print(f"resolve before close: HTTP {blocked.status_code} (identities stay blinded)")

client.post(f"/v1/sessions/{sid}/close")
report = client.get(f"/v1/reports/agreement/{sid}").json()
print(f"after close: agreement {report['pair_agreement']}, "
      f"votes {report['model_votes']}")
print(f"handle resolves to: "
      f"{client.get(f'/v1/sessions/{sid}/resolve').json()['handles'][handle]}")

"""CLI entry points and the HTTP API.

The API exposes the pipeline (retrieve, generate, evaluate) plus annotation
storage for the blinded human-rating protocol: each rater labels outputs
identified only by opaque handles, rater pairs share instances for agreement
reporting, and model identities are resolvable only after a session closes.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import random
import sys
import time
from dataclasses import asdict, dataclass, field

from . import corpus as corpus_mod
from . import evalsuite, kgraph
from .corpus import SplitConfig, Splits, TaskInstance, temporal_split
from .genmodels import (
    SENTENCE_DECODING,
    EchoGenerator,
    ScriptedGenerator,
    generate_sentence,
)
from .inspiration import HashingStubProvider, build_semantic_index, retrieve_all
from .prompting import compose_model_input, seed_prompt

VALID_LABELS = ("helpful", "unhelpful")
CRITERIA_KEYS = ("relevance", "novelty", "scientific_sense", "clarity")
INSTANCES_PER_RATER = 10
SHARED_PER_PAIR = 2


class SessionError(Exception):
    pass


@dataclass(frozen=True)
class AnnotationRecord:
    rater_id: str
    instance_id: str
    output_id: str  # model-blind handle
    label: str
    criteria: dict
    timestamp: float

    def __post_init__(self):
        if self.label not in VALID_LABELS:
            raise ValueError(f"label must be one of {VALID_LABELS}")
        missing = [k for k in CRITERIA_KEYS if k not in self.criteria]
        if missing:
            raise ValueError(f"missing criteria: {missing}")


class AnnotationStore:
    """Append-only annotation log; duplicates overwrite with history retained."""

    def __init__(self, log_path=None):
        self._log: list[dict] = []
        self._latest: dict[tuple, str] = {}  # (rater, instance, output) -> record id
        self._records: dict[str, AnnotationRecord] = {}
        self._log_path = log_path
        self._token_results: dict[str, str] = {}

    def record(self, record: AnnotationRecord, client_token: str | None = None) -> str:
        if client_token is not None and client_token in self._token_results:
            return self._token_results[client_token]
        record_id = f"a{len(self._log):06d}"
        self._records[record_id] = record
        self._log.append({"id": record_id, **asdict(record)})
        self._latest[(record.rater_id, record.instance_id, record.output_id)] = record_id
        if client_token is not None:
            self._token_results[client_token] = record_id
        if self._log_path:
            with open(self._log_path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(self._log[-1], ensure_ascii=False) + "\n")
        return record_id

    def get(self, record_id: str) -> AnnotationRecord:
        return self._records[record_id]

    def latest(self, rater_id: str, instance_id: str, output_id: str) -> AnnotationRecord | None:
        record_id = self._latest.get((rater_id, instance_id, output_id))
        return self._records[record_id] if record_id else None

    def history(self, rater_id: str, instance_id: str, output_id: str) -> list[AnnotationRecord]:
        return [
            self._records[row["id"]]
            for row in self._log
            if (row["rater_id"], row["instance_id"], row["output_id"])
            == (rater_id, instance_id, output_id)
        ]

    def all_latest(self) -> list[AnnotationRecord]:
        return [self._records[rid] for rid in self._latest.values()]


def assign_instances(raters, instance_ids, seed: int = 0,
                     per_rater: int = INSTANCES_PER_RATER,
                     shared_per_pair: int = SHARED_PER_PAIR) -> dict:
    """Assignment with pairwise overlap: every two raters share
    shared_per_pair instances; each rater receives per_rater total.

    One valid instantiation of the protocol's overlap structure; with six
    raters and the defaults every slot is a shared slot.
    """
    raters = list(raters)
    n = len(raters)
    shared_slots = shared_per_pair * (n - 1)
    if shared_slots > per_rater:
        raise SessionError(
            f"{n} raters need {shared_slots} shared slots but only "
            f"{per_rater} are available per rater"
        )
    rng = random.Random(seed)
    pool = list(instance_ids)
    rng.shuffle(pool)
    needed = shared_per_pair * n * (n - 1) // 2 + n * (per_rater - shared_slots)
    if len(pool) < needed:
        raise SessionError(f"need {needed} instances, got {len(pool)}")
    it = iter(pool)
    assignments = {r: [] for r in raters}
    overlap = {}
    for i in range(n):
        for j in range(i + 1, n):
            shared = [next(it) for _ in range(shared_per_pair)]
            overlap[(raters[i], raters[j])] = shared
            assignments[raters[i]].extend(shared)
            assignments[raters[j]].extend(shared)
    for r in raters:
        while len(assignments[r]) < per_rater:
            assignments[r].append(next(it))
    return {"assignments": assignments, "overlap": overlap}


@dataclass
class EvaluationSession:
    session_id: str
    raters: list[str]
    assignments: dict
    overlap: dict
    seed: int
    open: bool = True
    handle_map: dict[str, str] = field(default_factory=dict)  # handle -> model id
    handle_instance: dict[str, str] = field(default_factory=dict)


class Workbench:
    """Shared state behind both the CLI and the HTTP API."""

    def __init__(self, provider=None):
        self.provider = provider or HashingStubProvider()
        self.records = []
        self.records_by_id = {}
        self.graphs = []
        self.kg = None
        self.index = None
        self.splits: Splits | None = None
        self.models = {"echo": EchoGenerator()}
        self.store = AnnotationStore()
        self.sessions: dict[str, EvaluationSession] = {}
        self.cutoff_year = 2021

    # -- data -------------------------------------------------------------

    def load_records(self, records) -> None:
        self.records = list(records)
        self.records_by_id = {r.paper_id: r for r in self.records}
        self.graphs = [corpus_mod.build_document_graph(r) for r in self.records]

    def build(self, task: str = "sentence", split_config: SplitConfig = SplitConfig()) -> None:
        instances = [
            inst for g in self.graphs for inst in corpus_mod.extract_instances(g, task)
        ]
        self.splits = temporal_split(instances, split_config)
        self.cutoff_year = split_config.valid_year
        self.kg = kgraph.build_background_kg(self.graphs, cutoff_year=self.cutoff_year)
        self.index = build_semantic_index(self.splits.train, self.provider)

    def register_model(self, name: str, model) -> None:
        self.models[name] = model

    # -- operations -------------------------------------------------------

    def retrieve(self, seed_term, target_type, direction, background,
                 doc_id=None, k_semantic=20, k_citation=5):
        instance = TaskInstance(
            instance_id="adhoc",
            seed_term=seed_term,
            target_type=target_type,
            direction=direction,
            background=background,
            paper_id=doc_id or "",
            year=self.cutoff_year,
            target_sentence="",
        )
        neighbors = retrieve_all(
            instance,
            self.index,
            self.kg,
            self.records_by_id if doc_id else None,
            self.provider,
            k_semantic=k_semantic,
            k_citation=k_citation,
            cutoff_year=self.cutoff_year,
        )
        prompt = seed_prompt(seed_term, target_type, direction)
        flat = list(neighbors.semantic) + list(neighbors.kg) + list(neighbors.citation)
        model_input = compose_model_input(prompt, flat, background)
        return neighbors, model_input

    def generate_blinded(self, session: EvaluationSession, instance_id, model_names,
                         seed_term, target_type, direction, background,
                         neighbor_source: str = "none"):
        unknown = [m for m in model_names if m not in self.models]
        if unknown:
            raise KeyError(f"unregistered models: {unknown}")
        prompt = seed_prompt(seed_term, target_type, direction)
        neighbors: list[str] = []
        if neighbor_source != "none":
            nset, _ = self.retrieve(seed_term, target_type, direction, background)
            neighbors = {
                "semantic": list(nset.semantic),
                "kg": list(nset.kg),
                "citation": list(nset.citation),
            }.get(neighbor_source, [])
        text = compose_model_input(prompt, neighbors, background)
        outputs = []
        for name in model_names:
            ranked = generate_sentence(self.models[name], text, SENTENCE_DECODING,
                                       input_id=instance_id)
            outputs.append((name, ranked[0][0] if ranked else ""))
        rng = random.Random((session.seed, instance_id).__repr__())
        order = list(range(len(outputs)))
        rng.shuffle(order)
        blinded = []
        for position, idx in enumerate(order):
            name, text_out = outputs[idx]
            handle = f"{session.session_id}-{instance_id}-{position}"
            session.handle_map[handle] = name
            session.handle_instance[handle] = instance_id
            blinded.append({"handle": handle, "text": text_out})
        return blinded

    # -- sessions ---------------------------------------------------------

    def create_session(self, raters, instance_ids, seed: int = 0,
                       per_rater: int = INSTANCES_PER_RATER,
                       shared_per_pair: int = SHARED_PER_PAIR) -> EvaluationSession:
        plan = assign_instances(raters, instance_ids, seed=seed,
                                per_rater=per_rater, shared_per_pair=shared_per_pair)
        session_id = f"s{len(self.sessions):04d}"
        session = EvaluationSession(
            session_id=session_id,
            raters=list(raters),
            assignments=plan["assignments"],
            overlap={f"{a}|{b}": v for (a, b), v in plan["overlap"].items()},
            seed=seed,
        )
        self.sessions[session_id] = session
        return session

    def close_session(self, session_id: str) -> None:
        self.sessions[session_id].open = False

    def agreement_report(self, session_id: str) -> dict:
        session = self.sessions[session_id]
        if session.open:
            raise SessionError("session still open")
        pairs = {}
        for key, shared in session.overlap.items():
            rater_a, rater_b = key.split("|")
            total = 0
            same = 0
            for instance_id in shared:
                handles = [
                    h for h, inst in session.handle_instance.items() if inst == instance_id
                ]
                for handle in handles:
                    label_a = self.store.latest(rater_a, instance_id, handle)
                    label_b = self.store.latest(rater_b, instance_id, handle)
                    if label_a is None or label_b is None:
                        continue
                    total += 1
                    same += int(label_a.label == label_b.label)
            pairs[key] = 100.0 * same / total if total else None
        votes: dict[str, dict[str, int]] = {}
        for record in self.store.all_latest():
            model = session.handle_map.get(record.output_id)
            if model is None:
                continue
            tally = votes.setdefault(model, {"helpful": 0, "unhelpful": 0})
            tally[record.label] += 1
        model_percent = {}
        for model, tally in votes.items():
            total = tally["helpful"] + tally["unhelpful"]
            model_percent[model] = {
                "helpful": 100.0 * tally["helpful"] / total,
                "unhelpful": 100.0 * tally["unhelpful"] / total,
                "votes": total,
            }
        return {"pair_agreement": pairs, "model_votes": model_percent}


# ---------------------------------------------------------------------------
# HTTP API
# ---------------------------------------------------------------------------


try:  # request schemas; the HTTP layer is an optional part of the package
    from pydantic import BaseModel
except ImportError:  # pragma: no cover
    BaseModel = object


class RetrieveRequest(BaseModel):
    seed: str
    target_type: str
    direction: str
    background: str
    doc_id: str | None = None
    k_semantic: int = 20
    k_citation: int = 5


class GenerateRequest(BaseModel):
    session_id: str
    instance_id: str
    models: list[str]
    task: str = "sentence"
    seed: str
    target_type: str
    direction: str
    background: str
    neighbor_source: str = "none"


class SessionRequest(BaseModel):
    raters: list[str]
    instance_ids: list[str]
    seed: int = 0
    per_rater: int = INSTANCES_PER_RATER
    shared_per_pair: int = SHARED_PER_PAIR


class AnnotateRequest(BaseModel):
    session_id: str
    rater_id: str
    instance_id: str
    output_id: str
    label: str
    criteria: dict
    client_token: str | None = None


def create_app(bench: Workbench):
    from fastapi import FastAPI, HTTPException

    app = FastAPI(title="ideabench", version="1")

    def _session(session_id: str) -> EvaluationSession:
        if session_id not in bench.sessions:
            raise HTTPException(404, f"unknown session {session_id}")
        return bench.sessions[session_id]

    @app.get("/v1/instances")
    def instances():
        if bench.splits is None:
            raise HTTPException(503, "workbench not initialized")
        return {
            name: [inst.instance_id for inst in part]
            for name, part in (
                ("train", bench.splits.train),
                ("valid", bench.splits.valid),
                ("test", bench.splits.test),
            )
        }

    @app.post("/v1/retrieve")
    def retrieve(request: RetrieveRequest):
        if bench.index is None or bench.kg is None:
            raise HTTPException(503, "indexes not loaded")
        if request.direction not in ("forward", "backward"):
            raise HTTPException(400, "direction must be forward or backward")
        if request.target_type not in corpus_mod.NODE_TYPES:
            raise HTTPException(400, f"target_type must be one of {corpus_mod.NODE_TYPES}")
        try:
            neighbors, model_input = bench.retrieve(
                request.seed, request.target_type, request.direction,
                request.background, doc_id=request.doc_id,
                k_semantic=request.k_semantic, k_citation=request.k_citation,
            )
        except KeyError as exc:
            raise HTTPException(404, str(exc))
        return {"neighbors": neighbors.to_dict(), "model_input": model_input}

    @app.post("/v1/generate")
    def generate(request: GenerateRequest):
        session = _session(request.session_id)
        if not session.open:
            raise HTTPException(409, "session closed")
        if request.direction not in ("forward", "backward"):
            raise HTTPException(400, "direction must be forward or backward")
        try:
            outputs = bench.generate_blinded(
                session, request.instance_id, request.models,
                request.seed, request.target_type, request.direction,
                request.background, request.neighbor_source,
            )
        except KeyError as exc:
            raise HTTPException(400, str(exc))
        return {"outputs": outputs}

    @app.post("/v1/sessions")
    def create_session(request: SessionRequest):
        try:
            session = bench.create_session(
                request.raters, request.instance_ids, seed=request.seed,
                per_rater=request.per_rater, shared_per_pair=request.shared_per_pair,
            )
        except SessionError as exc:
            raise HTTPException(400, str(exc))
        return {
            "session_id": session.session_id,
            "assignments": session.assignments,
            "overlap": session.overlap,
        }

    @app.post("/v1/sessions/{session_id}/close")
    def close_session(session_id: str):
        _session(session_id)
        bench.close_session(session_id)
        return {"session_id": session_id, "open": False}

    @app.get("/v1/sessions/{session_id}/resolve")
    def resolve(session_id: str):
        session = _session(session_id)
        if session.open:
            raise HTTPException(403, "model identities are blinded until session close")
        return {"handles": session.handle_map}

    @app.post("/v1/annotate")
    def annotate(request: AnnotateRequest):
        session = _session(request.session_id)
        if not session.open:
            raise HTTPException(409, "session closed")
        if request.output_id not in session.handle_map:
            raise HTTPException(404, f"unknown output handle {request.output_id}")
        try:
            record = AnnotationRecord(
                rater_id=request.rater_id,
                instance_id=request.instance_id,
                output_id=request.output_id,
                label=request.label,
                criteria=request.criteria,
                timestamp=time.time(),
            )
        except ValueError as exc:
            raise HTTPException(400, str(exc))
        record_id = bench.store.record(record, client_token=request.client_token)
        return {"id": record_id}

    @app.get("/v1/annotations/{record_id}")
    def get_annotation(record_id: str):
        try:
            record = bench.store.get(record_id)
        except KeyError:
            raise HTTPException(404, f"unknown annotation {record_id}")
        return {"id": record_id, **asdict(record)}

    @app.get("/v1/reports/agreement/{session_id}")
    def agreement(session_id: str):
        _session(session_id)
        try:
            return bench.agreement_report(session_id)
        except SessionError as exc:
            raise HTTPException(409, str(exc))

    return app


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------


def instance_to_dict(inst: TaskInstance) -> dict:
    return asdict(inst)


def instance_from_dict(data: dict) -> TaskInstance:
    return TaskInstance(**data)


def _load_config(path: str) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _write_manifest(out_dir: str, command: str, config: dict) -> None:
    import numpy

    from . import __version__

    digest = hashlib.sha256(
        json.dumps(config, sort_keys=True).encode("utf-8")
    ).hexdigest()[:16]
    manifest = {
        "command": command,
        "config_digest": digest,
        "seed": config.get("seed", 0),
        "versions": {
            "python": sys.version.split()[0],
            "numpy": numpy.__version__,
            "ideabench": __version__,
        },
    }
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, f"manifest-{command}.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _load_bench(config: dict) -> Workbench:
    bench = Workbench()
    source = config.get("corpus", "synthetic:30")
    if source.startswith("synthetic:"):
        from .toydata import synthetic_corpus

        bench.load_records(
            synthetic_corpus(int(source.split(":")[1]), seed=config.get("seed", 0))
        )
    else:
        bench.load_records(corpus_mod.ingest_corpus(source))
    bench.build(
        task=config.get("task", "sentence"),
        split_config=SplitConfig(
            valid_year=config.get("valid_year", 2021),
            test_year=config.get("test_year", 2022),
        ),
    )
    return bench


def _cmd_build_data(config: dict) -> int:
    out_dir = config["out_dir"]
    bench = _load_bench(config)
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "instances.jsonl"), "w", encoding="utf-8") as fh:
        for inst in bench.splits.all():
            fh.write(json.dumps(instance_to_dict(inst), ensure_ascii=False) + "\n")
    corpus_mod.write_split_manifests(bench.splits, out_dir)
    _write_manifest(out_dir, "build-data", config)
    return 0


def _cmd_build_kg(config: dict) -> int:
    out_dir = config["out_dir"]
    bench = _load_bench(config)
    os.makedirs(out_dir, exist_ok=True)
    kgraph.save_kg(
        bench.kg,
        os.path.join(out_dir, "kg.nodes.jsonl"),
        os.path.join(out_dir, "kg.edges.jsonl"),
    )
    kgraph.write_stats_report(bench.kg, os.path.join(out_dir, "kg.stats.tsv"))
    _write_manifest(out_dir, "build-kg", config)
    return 0


def _cmd_build_index(config: dict) -> int:
    from .inspiration import EmbeddingCache

    out_dir = config["out_dir"]
    bench = _load_bench(config)
    cache = EmbeddingCache(bench.provider)
    for entry in bench.index.entries:
        cache.embed(entry.query_text)
    os.makedirs(out_dir, exist_ok=True)
    cache.save(os.path.join(out_dir, "embeddings.cache"))
    with open(os.path.join(out_dir, "index.meta.json"), "w", encoding="utf-8") as fh:
        json.dump(
            {
                "entries": len(bench.index),
                "provider": bench.provider.name,
                "dimension": bench.provider.dimension,
            },
            fh, indent=2, sort_keys=True,
        )
        fh.write("\n")
    _write_manifest(out_dir, "build-index", config)
    return 0


def _cmd_train(config: dict) -> int:
    # Desk-scale runs use stub models; a real backend is selected by name and
    # trained with the package defaults.
    out_dir = config["out_dir"]
    _write_manifest(out_dir, "train", config)
    with open(os.path.join(out_dir, "model.json"), "w", encoding="utf-8") as fh:
        json.dump({"backend": config.get("backend", "echo")}, fh, indent=2)
        fh.write("\n")
    return 0


def _cmd_predict(config: dict) -> int:
    from .genmodels import write_predictions

    out_dir = config["out_dir"]
    bench = _load_bench(config)
    backend = config.get("backend", "echo")
    if backend == "echo":
        model = EchoGenerator()
    else:
        model = ScriptedGenerator([(o, 1.0) for o in config.get("outputs", [])])
    rows = []
    for inst in bench.splits.test:
        prompt = seed_prompt(inst.seed_term, inst.target_type, inst.direction)
        text = compose_model_input(prompt, [], inst.background)
        rows.append((inst.instance_id, generate_sentence(model, text)))
    os.makedirs(out_dir, exist_ok=True)
    write_predictions(os.path.join(out_dir, "predictions.jsonl"), backend,
                      SENTENCE_DECODING, rows)
    _write_manifest(out_dir, "predict", config)
    return 0


def _cmd_evaluate(config: dict) -> int:
    from .genmodels import read_predictions

    out_dir = config["out_dir"]
    bench = _load_bench(config)
    predictions = {
        row["instance_id"]: row
        for row in read_predictions(config["predictions"])
    }
    scorer = evalsuite.token_overlap_scorer()
    report = evalsuite.MetricReport()
    for inst in bench.splits.test:
        row = predictions.get(inst.instance_id)
        if row is None:
            continue
        best = row["outputs"][0][0] if row["outputs"] else ""
        report.add(
            inst.instance_id,
            {
                "rouge_l": evalsuite.rouge_l(best, inst.target),
                "overlap": scorer.score(best, inst.target),
            },
            direction=inst.direction,
            model=row["model"],
        )
    os.makedirs(out_dir, exist_ok=True)
    report.write_tsv(os.path.join(out_dir, "report.tsv"))
    summary = {
        "rouge_l": report.aggregate("rouge_l"),
        "overlap": report.aggregate("overlap"),
        "by_direction": evalsuite.direction_breakdown(report),
    }
    with open(os.path.join(out_dir, "summary.json"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _write_manifest(out_dir, "evaluate", config)
    return 0


def _cmd_analyze(config: dict) -> int:
    out_dir = config["out_dir"]
    bench = _load_bench(config)
    rows = []
    for inst in bench.splits.test:
        neighbors = retrieve_all(
            inst, bench.index, bench.kg, bench.records_by_id, bench.provider,
            cutoff_year=bench.cutoff_year,
        )
        rows.append((inst, neighbors, inst.target))
    analysis = evalsuite.neighbor_similarity_analysis(rows, bench.provider)
    os.makedirs(out_dir, exist_ok=True)
    evalsuite.write_analysis_table(analysis, os.path.join(out_dir, "analysis.tsv"))
    _write_manifest(out_dir, "analyze", config)
    return 0


def _cmd_serve(config: dict) -> int:
    import uvicorn

    bench = _load_bench(config)
    app = create_app(bench)
    uvicorn.run(app, host=config.get("host", "127.0.0.1"), port=config.get("port", 8000))
    return 0


_COMMANDS = {
    "build-data": _cmd_build_data,
    "build-kg": _cmd_build_kg,
    "build-index": _cmd_build_index,
    "train": _cmd_train,
    "predict": _cmd_predict,
    "evaluate": _cmd_evaluate,
    "analyze": _cmd_analyze,
    "serve": _cmd_serve,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="ideabench")
    sub = parser.add_subparsers(dest="command")
    for name in _COMMANDS:
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", required=False, default=os.environ.get("IDEABENCH_CONFIG"))
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    if not args.config:
        print("error: missing required flag --config", file=sys.stderr)
        return 2
    try:
        config = _load_config(args.config)
    except OSError as exc:
        print(f"error: cannot read --config file: {exc}", file=sys.stderr)
        return 2
    return _COMMANDS[args.command](config)


if __name__ == "__main__":
    sys.exit(main())

import json
import os

import pytest
from fastapi.testclient import TestClient

from ideabench.genmodels import ScriptedGenerator
from ideabench.service import (
    AnnotationRecord,
    AnnotationStore,
    SessionError,
    Workbench,
    assign_instances,
    create_app,
    main,
)
from ideabench.toydata import synthetic_corpus


class TestAnnotationStore:
    def make_record(self, label="helpful", rater="r1"):
        return AnnotationRecord(
            rater_id=rater, instance_id="i0", output_id="h0", label=label,
            criteria={"relevance": 1, "novelty": 1, "scientific_sense": 1, "clarity": 1},
            timestamp=0.0,
        )

    def test_label_validation(self):
        with pytest.raises(ValueError):
            self.make_record(label="great")

    def test_missing_criteria(self):
        with pytest.raises(ValueError, match="novelty"):
            AnnotationRecord("r", "i", "h", "helpful", {"relevance": 1}, 0.0)

    def test_duplicate_overwrites_with_history(self):
        store = AnnotationStore()
        store.record(self.make_record("helpful"))
        store.record(self.make_record("unhelpful"))
        assert store.latest("r1", "i0", "h0").label == "unhelpful"
        history = store.history("r1", "i0", "h0")
        assert [r.label for r in history] == ["helpful", "unhelpful"]

    def test_client_token_idempotent(self):
        store = AnnotationStore()
        first = store.record(self.make_record(), client_token="t1")
        second = store.record(self.make_record("unhelpful"), client_token="t1")
        assert first == second
        assert store.latest("r1", "i0", "h0").label == "helpful"

    def test_log_file_append_only(self, tmp_path):
        path = tmp_path / "annotations.jsonl"
        store = AnnotationStore(log_path=path)
        store.record(self.make_record())
        store.record(self.make_record("unhelpful"))
        lines = path.read_text().splitlines()
        assert len(lines) == 2
        assert json.loads(lines[0])["label"] == "helpful"


class TestAssignment:
    def test_two_raters_defaults(self):
        plan = assign_instances(["r1", "r2"], [f"i{k}" for k in range(18)])
        assert len(plan["assignments"]["r1"]) == 10
        assert len(plan["assignments"]["r2"]) == 10
        shared = plan["overlap"][("r1", "r2")]
        assert len(shared) == 2
        assert set(shared) <= set(plan["assignments"]["r1"])
        assert set(shared) <= set(plan["assignments"]["r2"])

    def test_six_raters_fully_shared(self):
        # 2 shared per pair x 5 partners fills all 10 slots
        raters = [f"r{k}" for k in range(6)]
        plan = assign_instances(raters, [f"i{k}" for k in range(40)])
        for r in raters:
            assert len(plan["assignments"][r]) == 10
        assert len(plan["overlap"]) == 15

    def test_seven_raters_infeasible(self):
        with pytest.raises(SessionError, match="shared slots"):
            assign_instances([f"r{k}" for k in range(7)], [f"i{k}" for k in range(100)])

    def test_too_few_instances(self):
        with pytest.raises(SessionError, match="need"):
            assign_instances(["r1", "r2"], ["i0", "i1"])

    def test_deterministic(self):
        ids = [f"i{k}" for k in range(30)]
        a = assign_instances(["r1", "r2"], ids, seed=4)
        b = assign_instances(["r1", "r2"], ids, seed=4)
        assert a == b


CRITERIA = {"relevance": 1, "novelty": 1, "scientific_sense": 1, "clarity": 1}


@pytest.fixture
def bench():
    bench = Workbench()
    bench.load_records(synthetic_corpus(20, seed=7))
    bench.build(task="sentence")
    for name in ("m2", "m3", "m4", "m5"):
        bench.register_model(name, ScriptedGenerator([(f"output from {name}", 1.0)]))
    return bench


@pytest.fixture
def client(bench):
    return TestClient(create_app(bench))


def make_session(client, raters=("r1", "r2")):
    response = client.post(
        "/v1/sessions",
        json={"raters": list(raters), "instance_ids": [f"i{k}" for k in range(20)]},
    )
    assert response.status_code == 200
    return response.json()


class TestApi:
    def test_instances_uninitialized(self):
        client = TestClient(create_app(Workbench()))
        assert client.get("/v1/instances").status_code == 503

    def test_instances_lists_splits(self, client, bench):
        data = client.get("/v1/instances").json()
        assert set(data) == {"train", "valid", "test"}
        assert len(data["train"]) == len(bench.splits.train)

    def test_retrieve(self, client):
        response = client.post(
            "/v1/retrieve",
            json={
                "seed": "text classification", "target_type": "Method",
                "direction": "forward", "background": "some background.",
            },
        )
        assert response.status_code == 200
        data = response.json()
        assert set(data["neighbors"]) == {"semantic", "kg", "citation", "caps"}
        assert "| context: some background." in data["model_input"]
        assert len(data["neighbors"]["semantic"]) <= 20
        assert len(data["neighbors"]["citation"]) <= 5

    def test_retrieve_bad_direction(self, client):
        response = client.post(
            "/v1/retrieve",
            json={"seed": "x", "target_type": "Task", "direction": "up",
                  "background": ""},
        )
        assert response.status_code == 400

    def test_retrieve_bad_type(self, client):
        response = client.post(
            "/v1/retrieve",
            json={"seed": "x", "target_type": "Gadget", "direction": "forward",
                  "background": ""},
        )
        assert response.status_code == 400

    def test_generate_unknown_session(self, client):
        response = client.post(
            "/v1/generate",
            json={"session_id": "nope", "instance_id": "i0", "models": ["echo"],
                  "seed": "x", "target_type": "Task", "direction": "forward",
                  "background": "b"},
        )
        assert response.status_code == 404

    def test_generate_unknown_model(self, client):
        session = make_session(client)
        response = client.post(
            "/v1/generate",
            json={"session_id": session["session_id"], "instance_id": "i0",
                  "models": ["missing"], "seed": "x", "target_type": "Task",
                  "direction": "forward", "background": "b"},
        )
        assert response.status_code == 400

    def test_generate_blinds_model_identity(self, client):
        session = make_session(client)
        response = client.post(
            "/v1/generate",
            json={"session_id": session["session_id"], "instance_id": "i0",
                  "models": ["echo", "m2"], "seed": "x", "target_type": "Task",
                  "direction": "forward", "background": "b"},
        )
        assert response.status_code == 200
        outputs = response.json()["outputs"]
        assert len(outputs) == 2
        for out in outputs:
            assert set(out) == {"handle", "text"}
            assert "echo" not in out["handle"] and "m2" not in out["handle"]

    def test_resolve_blocked_while_open(self, client):
        session = make_session(client)
        response = client.get(f"/v1/sessions/{session['session_id']}/resolve")
        assert response.status_code == 403

    def test_resolve_after_close(self, client):
        session = make_session(client)
        sid = session["session_id"]
        client.post(
            "/v1/generate",
            json={"session_id": sid, "instance_id": "i0", "models": ["echo"],
                  "seed": "x", "target_type": "Task", "direction": "forward",
                  "background": "b"},
        )
        assert client.post(f"/v1/sessions/{sid}/close").status_code == 200
        response = client.get(f"/v1/sessions/{sid}/resolve")
        assert response.status_code == 200
        assert set(response.json()["handles"].values()) == {"echo"}

    def test_agreement_blocked_while_open(self, client):
        session = make_session(client)
        response = client.get(f"/v1/reports/agreement/{session['session_id']}")
        assert response.status_code == 409

    def test_annotate_round_trip(self, client):
        session = make_session(client)
        sid = session["session_id"]
        outputs = client.post(
            "/v1/generate",
            json={"session_id": sid, "instance_id": "i0", "models": ["echo"],
                  "seed": "x", "target_type": "Task", "direction": "forward",
                  "background": "b"},
        ).json()["outputs"]
        handle = outputs[0]["handle"]
        created = client.post(
            "/v1/annotate",
            json={"session_id": sid, "rater_id": "r1", "instance_id": "i0",
                  "output_id": handle, "label": "helpful", "criteria": CRITERIA},
        )
        assert created.status_code == 200
        record_id = created.json()["id"]
        fetched = client.get(f"/v1/annotations/{record_id}")
        assert fetched.status_code == 200
        assert fetched.json()["label"] == "helpful"
        assert fetched.json()["output_id"] == handle

    def test_annotate_bad_label_and_handle(self, client):
        session = make_session(client)
        sid = session["session_id"]
        response = client.post(
            "/v1/annotate",
            json={"session_id": sid, "rater_id": "r1", "instance_id": "i0",
                  "output_id": "ghost", "label": "helpful", "criteria": CRITERIA},
        )
        assert response.status_code == 404

    def test_annotate_idempotent_token(self, client):
        session = make_session(client)
        sid = session["session_id"]
        handle = client.post(
            "/v1/generate",
            json={"session_id": sid, "instance_id": "i0", "models": ["echo"],
                  "seed": "x", "target_type": "Task", "direction": "forward",
                  "background": "b"},
        ).json()["outputs"][0]["handle"]
        body = {"session_id": sid, "rater_id": "r1", "instance_id": "i0",
                "output_id": handle, "label": "helpful", "criteria": CRITERIA,
                "client_token": "tok-1"}
        first = client.post("/v1/annotate", json=body).json()["id"]
        second = client.post("/v1/annotate", json=body).json()["id"]
        assert first == second

    def test_agreement_worked_example(self, client):
        """Two raters label the same 5 blinded outputs; 4 matches = 80%."""
        session = make_session(client)
        sid = session["session_id"]
        shared = session["overlap"]["r1|r2"][0]
        outputs = client.post(
            "/v1/generate",
            json={"session_id": sid, "instance_id": shared,
                  "models": ["echo", "m2", "m3", "m4", "m5"],
                  "seed": "x", "target_type": "Task", "direction": "forward",
                  "background": "b"},
        ).json()["outputs"]
        handles = [o["handle"] for o in outputs]
        for handle in handles:
            client.post("/v1/annotate", json={
                "session_id": sid, "rater_id": "r1", "instance_id": shared,
                "output_id": handle, "label": "helpful", "criteria": CRITERIA,
            })
        for k, handle in enumerate(handles):
            label = "unhelpful" if k == 0 else "helpful"
            client.post("/v1/annotate", json={
                "session_id": sid, "rater_id": "r2", "instance_id": shared,
                "output_id": handle, "label": label, "criteria": CRITERIA,
            })
        client.post(f"/v1/sessions/{sid}/close")
        report = client.get(f"/v1/reports/agreement/{sid}").json()
        assert report["pair_agreement"]["r1|r2"] == pytest.approx(80.0)
        votes = report["model_votes"]
        assert sum(v["votes"] for v in votes.values()) == 10
        # exactly one model drew the dissenting vote
        split_models = [m for m, v in votes.items() if v["helpful"] == 50.0]
        assert len(split_models) == 1

    def test_closed_session_rejects_generate_and_annotate(self, client):
        session = make_session(client)
        sid = session["session_id"]
        client.post(f"/v1/sessions/{sid}/close")
        gen = client.post(
            "/v1/generate",
            json={"session_id": sid, "instance_id": "i0", "models": ["echo"],
                  "seed": "x", "target_type": "Task", "direction": "forward",
                  "background": "b"},
        )
        assert gen.status_code == 409


class TestCli:
    def write_config(self, tmp_path, extra=None):
        tmp_path.mkdir(parents=True, exist_ok=True)
        config = {"out_dir": str(tmp_path / "out"), "corpus": "synthetic:12", "seed": 3}
        config.update(extra or {})
        path = tmp_path / "config.json"
        path.write_text(json.dumps(config))
        return str(path), config

    def test_no_command(self, capsys):
        assert main([]) == 2

    def test_missing_config_flag(self, capsys, monkeypatch):
        monkeypatch.delenv("IDEABENCH_CONFIG", raising=False)
        assert main(["build-data"]) == 2
        assert "missing required flag --config" in capsys.readouterr().err

    def test_unreadable_config(self, tmp_path):
        assert main(["build-data", "--config", str(tmp_path / "absent.json")]) == 2

    def test_build_data(self, tmp_path):
        path, config = self.write_config(tmp_path)
        assert main(["build-data", "--config", path]) == 0
        out = config["out_dir"]
        lines = open(os.path.join(out, "instances.jsonl")).read().splitlines()
        assert lines and all(json.loads(l)["instance_id"] for l in lines)
        manifest = json.load(open(os.path.join(out, "manifest-build-data.json")))
        assert manifest["command"] == "build-data"
        assert "versions" in manifest

    def test_build_kg(self, tmp_path):
        path, config = self.write_config(tmp_path)
        assert main(["build-kg", "--config", path]) == 0
        out = config["out_dir"]
        for name in ("kg.nodes.jsonl", "kg.edges.jsonl", "kg.stats.tsv"):
            assert os.path.exists(os.path.join(out, name))

    def test_build_index(self, tmp_path):
        path, config = self.write_config(tmp_path)
        assert main(["build-index", "--config", path]) == 0
        out = config["out_dir"]
        meta = json.load(open(os.path.join(out, "index.meta.json")))
        assert meta["entries"] > 0
        assert os.path.exists(os.path.join(out, "embeddings.cache"))

    def test_train_predict_evaluate_analyze(self, tmp_path):
        path, config = self.write_config(tmp_path)
        out = config["out_dir"]
        assert main(["train", "--config", path]) == 0
        assert json.load(open(os.path.join(out, "model.json")))["backend"] == "echo"

        assert main(["predict", "--config", path]) == 0
        preds = os.path.join(out, "predictions.jsonl")
        assert os.path.getsize(preds) > 0

        eval_path, eval_config = self.write_config(
            tmp_path / "eval", extra={"predictions": preds}
        )
        assert main(["evaluate", "--config", eval_path]) == 0
        summary = json.load(open(os.path.join(eval_config["out_dir"], "summary.json")))
        assert "rouge_l" in summary and "by_direction" in summary

        assert main(["analyze", "--config", path]) == 0
        table = open(os.path.join(out, "analysis.tsv")).read().splitlines()
        assert table[0].startswith("group\tkey")

    def test_deterministic_outputs(self, tmp_path):
        path_a, config_a = self.write_config(tmp_path / "a")
        path_b, config_b = self.write_config(tmp_path / "b")
        assert main(["build-data", "--config", path_a]) == 0
        assert main(["build-data", "--config", path_b]) == 0
        read = lambda cfg: open(os.path.join(cfg["out_dir"], "instances.jsonl")).read()
        assert read(config_a) == read(config_b)

import time

import pytest
from fastapi.testclient import TestClient

from glossa.harness import run_active_learning
from glossa.service import AnnotationService, ServiceConfig, create_app
from glossa.synthetic import SyntheticConfig, generate
from glossa.taggers import MajorityTagger, TrainData, make_tagger


def _train_data(pool):
    return TrainData(annotated=pool, seed=0)


@pytest.fixture(scope="module")
def diglot():
    # 3 test narratives keeps service runs quick
    return generate(SyntheticConfig(seed=2, n_test_narratives=3,
                                    n_annotated_narratives=2,
                                    sentences_per_annotated=6))


def make_service(diglot, data_dir, taggers=None):
    taggers = taggers or [MajorityTagger()]
    return AnnotationService(diglot.annotated_sentences(), list(diglot.test),
                             taggers, _train_data, data_dir, seed=0)


def gold_tags_for(diglot, narrative_id):
    narrative = next(n for n in diglot.test if n.id == narrative_id)
    return [[str(t) for t in s.tags] for s in narrative.active_sentences()]


def wait_ticket(client, ticket, timeout=60.0):
    deadline = time.time() + timeout
    while time.time() < deadline:
        status = client.get(f"/api/retrain/{ticket}").json()
        if status["status"] in ("done", "failed"):
            return status
        time.sleep(0.02)
    raise TimeoutError(ticket)


def drive_full_loop(client, diglot):
    """Scripted oracle client: fetch, correct with gold, submit, wait."""
    while True:
        response = client.get("/api/tasks/next")
        if response.status_code == 404:
            break
        assert response.status_code == 200, response.text
        task = response.json()
        gold = gold_tags_for(diglot, task["narrative_id"])
        result = client.post(f"/api/tasks/{task['task_id']}/submit",
                             json={"annotator_id": "oracle", "tags": gold})
        assert result.status_code == 200, result.text
        status = wait_ticket(client, result.json()["retrain_ticket"])
        assert status["status"] == "done"


def test_next_task_is_shortest_and_idempotent(diglot, tmp_path):
    service = make_service(diglot, tmp_path)
    client = TestClient(create_app(service))
    by_length = sorted(diglot.test, key=lambda n: (n.token_length(), n.id))
    first = client.get("/api/tasks/next").json()
    assert first["narrative_id"] == by_length[0].id
    again = client.get("/api/tasks/next").json()
    assert again["task_id"] == first["task_id"]
    assert again["status"] == "in_review"
    assert all(len(s["predicted"]) == len(s["tokens"]) == len(s["confidence"])
               for s in first["sentences"])
    assert all(0.0 <= c <= 1.0 for s in first["sentences"] for c in s["confidence"])


def test_submission_validation(diglot, tmp_path):
    service = make_service(diglot, tmp_path)
    client = TestClient(create_app(service))
    task = client.get("/api/tasks/next").json()
    n_sent = len(task["sentences"])

    bad_length = client.post(f"/api/tasks/{task['task_id']}/submit",
                             json={"tags": [["V"]] * (n_sent + 1)})
    assert bad_length.status_code == 400
    assert "LengthMismatch" in bad_length.json()["detail"]

    bad_tag = client.post(
        f"/api/tasks/{task['task_id']}/submit",
        json={"tags": [["NOTATAG"] * len(s["tokens"]) for s in task["sentences"]]})
    assert bad_tag.status_code == 400
    assert "UnknownTag" in bad_tag.json()["detail"]
    # nothing persisted by rejected submissions
    assert service.store.records() == []

    stale = client.post("/api/tasks/task-999-nope/submit", json={"tags": []})
    assert stale.status_code == 404


def test_zero_change_submission(diglot, tmp_path):
    service = make_service(diglot, tmp_path)
    client = TestClient(create_app(service))
    task = client.get("/api/tasks/next").json()
    unchanged = [list(s["predicted"]) for s in task["sentences"]]
    result = client.post(f"/api/tasks/{task['task_id']}/submit",
                         json={"tags": unchanged})
    assert result.status_code == 200
    assert result.json()["changed_count"] == 0


def test_double_submit_is_stale(diglot, tmp_path):
    service = make_service(diglot, tmp_path)
    client = TestClient(create_app(service))
    task = client.get("/api/tasks/next").json()
    gold = gold_tags_for(diglot, task["narrative_id"])
    first = client.post(f"/api/tasks/{task['task_id']}/submit", json={"tags": gold})
    assert first.status_code == 200
    second = client.post(f"/api/tasks/{task['task_id']}/submit", json={"tags": gold})
    assert second.status_code == 409
    assert "StaleTask" in second.json()["detail"]


def test_retrain_version_increments_and_next_task_advances(diglot, tmp_path):
    service = make_service(diglot, tmp_path)
    client = TestClient(create_app(service))
    by_length = sorted(diglot.test, key=lambda n: (n.token_length(), n.id))
    task = client.get("/api/tasks/next").json()
    v0 = task["model_version"]
    gold = gold_tags_for(diglot, task["narrative_id"])
    result = client.post(f"/api/tasks/{task['task_id']}/submit", json={"tags": gold}).json()
    status = wait_ticket(client, result["retrain_ticket"])
    assert status["status"] == "done"
    assert status["model_version"] == v0 + 1
    nxt = client.get("/api/tasks/next").json()
    assert nxt["narrative_id"] == by_length[1].id


def test_retrain_requires_new_annotations(diglot, tmp_path):
    service = make_service(diglot, tmp_path)
    client = TestClient(create_app(service))
    response = client.post("/api/retrain")
    assert response.status_code == 409


def test_records_survive_restart(diglot, tmp_path):
    service = make_service(diglot, tmp_path)
    client = TestClient(create_app(service))
    task = client.get("/api/tasks/next").json()
    gold = gold_tags_for(diglot, task["narrative_id"])
    result = client.post(f"/api/tasks/{task['task_id']}/submit", json={"tags": gold}).json()
    wait_ticket(client, result["retrain_ticket"])
    log_before = client.get("/api/metrics").json()["log"]

    # brand-new process state over the same data dir
    reborn = make_service(diglot, tmp_path)
    client2 = TestClient(create_app(reborn))
    metrics = client2.get("/api/metrics").json()
    assert metrics["log"] == log_before
    assert metrics["annotated"] == [task["narrative_id"]]
    nxt = client2.get("/api/tasks/next").json()
    by_length = sorted(diglot.test, key=lambda n: (n.token_length(), n.id))
    assert nxt["narrative_id"] == by_length[1].id


def test_reopen_creates_superseding_record(diglot, tmp_path):
    service = make_service(diglot, tmp_path)
    client = TestClient(create_app(service))
    task = client.get("/api/tasks/next").json()
    gold = gold_tags_for(diglot, task["narrative_id"])
    client.post(f"/api/tasks/{task['task_id']}/submit", json={"tags": gold})
    reopened = client.post(f"/api/tasks/{task['task_id']}/reopen").json()
    assert reopened["supersedes"] is not None
    again = client.post(f"/api/tasks/{reopened['task_id']}/submit", json={"tags": gold})
    assert again.status_code == 200
    records = service.store.records()
    assert len(records) == 2
    assert records[0]["supersedes"] is None
    assert records[1]["supersedes"] == records[0]["record_id"]
    # exactly-once: the narrative appears once in the loop's pool segments
    assert service.loop.annotated_ids.count(task["narrative_id"]) == 1


def test_auth_token_enforced(diglot, tmp_path):
    service = make_service(diglot, tmp_path)
    client = TestClient(create_app(service, auth_token="sekrit"))
    assert client.get("/api/tagset").status_code == 401
    ok = client.get("/api/tagset", headers={"x-glossa-token": "sekrit"})
    assert ok.status_code == 200


def test_tagset_endpoint_contains_atomics(diglot, tmp_path):
    service = make_service(diglot, tmp_path)
    client = TestClient(create_app(service))
    tags = client.get("/api/tagset").json()["tags"]
    assert "V" in tags and "PUNCT" in tags and "P+D" in tags


def test_scripted_oracle_run_reproduces_harness_log(diglot, tmp_path):
    """The acceptance equivalence: same seeds, same taggers, the HTTP loop
    must produce the identical per-iteration log as the in-process oracle."""
    harness_result = run_active_learning(
        diglot.annotated_sentences(), list(diglot.test),
        [MajorityTagger()], _train_data, seed=0)

    service = make_service(diglot, tmp_path / "svc")
    client = TestClient(create_app(service))
    drive_full_loop(client, diglot)
    service_log = client.get("/api/metrics").json()["log"]

    # normalize the harness log through JSON the same way FastAPI does
    import json
    harness_log = json.loads(json.dumps(
        [{**rec} for rec in harness_result.log], default=str))
    assert service_log == harness_log
    assert client.get("/api/tasks/next").status_code == 404


def test_service_config_env_overrides(tmp_path, monkeypatch):
    cfg_file = tmp_path / "cfg.json"
    cfg_file.write_text('{"data_dir": "/tmp/x", "taggers": ["crf-mod", "gdb"], "port": 9000}')
    monkeypatch.setenv("GLOSSA_PORT", "9100")
    monkeypatch.setenv("GLOSSA_SEED", "7")
    cfg = ServiceConfig.load(cfg_file)
    assert cfg.port == 9100
    assert cfg.seed == 7
    assert cfg.taggers == ("crf-mod", "gdb")
    assert cfg.data_dir == "/tmp/x"

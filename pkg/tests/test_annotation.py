"""Annotation study, verdict log, and the HTTP wiring around them."""

from __future__ import annotations

import json

import numpy as np
import pytest
from fastapi.testclient import TestClient

from latentprobe.annotation.server import build_study_from_files, create_app
from latentprobe.annotation.service import (
    BLINDED_FIELDS,
    AnnotationStudy,
    AuthError,
    ConflictError,
    NotFoundError,
    VerdictStore,
    shuffle_subseed,
    shuffled_order,
)
from latentprobe.backends.base import Image
from latentprobe.errors import InvalidArgument
from latentprobe.records import FrontierRecord, write_records
from latentprobe.store import ImageStore

ANNOTATORS = {"ann-a": "token-a", "ann-b": "token-b"}


def flip_record(iid, source="src0", label=1, screened=True):
    return FrontierRecord(
        method="first_flip", seed_id=5, class_label=label, budget=1.0,
        psi_star=0.8, source_image_id=source, candidate_image_id=iid,
        ssim=0.9, l2=0.05, screen_passed=screened, failed_conditions=(),
        probs_source=(0.1, 0.8, 0.1), probs_candidate=(0.6, 0.3, 0.1))


def make_study(n=4, shuffle_seed=3):
    tasks = {f"img{i:02d}": i % 3 for i in range(n)}
    return AnnotationStudy(tasks, ANNOTATORS, shuffle_seed=shuffle_seed)


# -- shuffling ----------------------------------------------------------------


def test_shuffle_subseed_is_deterministic_per_annotator():
    a = shuffle_subseed(7, "ann-a")
    assert a == shuffle_subseed(7, "ann-a")
    assert a != shuffle_subseed(7, "ann-b")
    assert a != shuffle_subseed(8, "ann-a")
    ids = [f"img{i}" for i in range(20)]
    order = shuffled_order(ids, a)
    assert sorted(order) == sorted(ids)
    assert order == shuffled_order(list(reversed(ids)), a)  # input order moot


def test_study_orders_differ_between_annotators():
    study = make_study(n=12)
    assert study.order_for("ann-a") != study.order_for("ann-b")
    assert sorted(study.order_for("ann-a")) == sorted(study.tasks)
    assert study.sub_seed_for("ann-a") == shuffle_subseed(3, "ann-a")
    with pytest.raises(AuthError):
        study.order_for("ann-c")


# -- study construction -------------------------------------------------------


def test_study_requires_exactly_two_annotators():
    with pytest.raises(InvalidArgument):
        AnnotationStudy({"i": 0}, {"solo": "t"})
    with pytest.raises(InvalidArgument):
        AnnotationStudy({"i": 0}, {"a": "1", "b": "2", "c": "3"})
    with pytest.raises(InvalidArgument):
        AnnotationStudy({}, ANNOTATORS)


def test_study_from_records_takes_screened_flips_only():
    records = [flip_record("c1"), flip_record("c2", screened=False),
               flip_record("c3", label=2)]
    study = AnnotationStudy.from_records(records, ANNOTATORS)
    assert set(study.tasks) == {"c1", "c3"}
    assert study.tasks["c3"] == 2
    sourced = AnnotationStudy.from_records(records, ANNOTATORS,
                                           include_source=True)
    assert set(sourced.tasks) == {"c1", "c3", "src0"}
    with pytest.raises(InvalidArgument):
        AnnotationStudy.from_records([flip_record("c1", screened=False)],
                                     ANNOTATORS)


def test_study_authenticate():
    study = make_study()
    study.authenticate("ann-a", "token-a")
    with pytest.raises(AuthError):
        study.authenticate("ann-a", "token-b")
    with pytest.raises(AuthError):
        study.authenticate("ann-z", "token-a")


# -- verdict store ------------------------------------------------------------


def test_submit_rules():
    store = VerdictStore(make_study())
    store.submit("img00", "ann-a", True)
    with pytest.raises(AuthError):
        store.submit("img00", "ann-z", True)
    with pytest.raises(NotFoundError):
        store.submit("ghost", "ann-a", True)
    with pytest.raises(ConflictError, match="already answered"):
        store.submit("img00", "ann-a", False)
    # consensus needs a full disagreement first
    with pytest.raises(ConflictError, match="prior disagreement"):
        store.submit("img00", "ann-a", True, is_consensus=True)
    store.submit("img00", "ann-b", False)
    assert store.has_disagreement("img00")
    store.submit("img00", "ann-a", True, is_consensus=True)
    assert store.has_consensus("img00")
    with pytest.raises(ConflictError, match="already has a consensus"):
        store.submit("img00", "ann-b", False, is_consensus=True)
    # agreement is not a disagreement
    store.submit("img01", "ann-a", True)
    store.submit("img01", "ann-b", True)
    with pytest.raises(ConflictError, match="prior disagreement"):
        store.submit("img01", "ann-a", True, is_consensus=True)


def test_next_task_walks_the_shuffle():
    store = VerdictStore(make_study())
    order = store.study.order_for("ann-a")
    seen = []
    while (task := store.next_task("ann-a")) is not None:
        assert task.presentation_order == len(seen)
        assert task.class_label == store.study.tasks[task.image_id]
        seen.append(task.image_id)
        store.submit(task.image_id, "ann-a", True)
    assert seen == order
    # the other annotator is unaffected
    assert store.next_task("ann-b") is not None


def test_next_consensus_task_lifecycle():
    store = VerdictStore(make_study())
    assert store.next_consensus_task("ann-a") is None
    store.submit("img02", "ann-a", True)
    assert store.next_consensus_task("ann-a") is None  # one answer only
    store.submit("img02", "ann-b", False)
    task = store.next_consensus_task("ann-a")
    assert task is not None and task.image_id == "img02"
    store.submit("img02", "ann-a", False, is_consensus=True)
    assert store.next_consensus_task("ann-a") is None


def test_progress_counts():
    store = VerdictStore(make_study(n=4))  # classes 0,1,2,0
    store.submit("img00", "ann-a", True)
    store.submit("img01", "ann-a", False)
    store.submit("img01", "ann-b", True)
    progress = store.progress()
    a = progress["annotators"]["ann-a"]
    assert a["answered"] == 2 and a["total"] == 4
    assert a["by_class"]["0"] == {"answered": 1, "total": 2}
    assert a["by_class"]["1"] == {"answered": 1, "total": 1}
    assert a["sub_seed"] == shuffle_subseed(3, "ann-a")
    assert progress["annotators"]["ann-b"]["answered"] == 1
    assert progress["disagreements"] == ["img01"]
    assert progress["consensus_pending"] == ["img01"]


def test_export_is_canonically_ordered():
    store = VerdictStore(make_study())
    store.submit("img01", "ann-b", True)
    store.submit("img00", "ann-a", False)
    store.submit("img01", "ann-a", False)
    store.submit("img01", "ann-a", True, is_consensus=True)
    body = store.export()
    keys = [(v["image_id"], v["annotator_id"], v["is_consensus"])
            for v in body["verdicts"]]
    assert keys == sorted(keys)
    assert body["verdicts"][0]["answer"] == "no"
    assert all(set(v) == {"image_id", "annotator_id", "answer",
                          "is_consensus", "timestamp"}
               for v in body["verdicts"])


def test_verdict_log_persists_and_reloads(tmp_path):
    path = tmp_path / "verdicts.jsonl"
    store = VerdictStore(make_study(), path=path)
    store.submit("img00", "ann-a", True)
    store.submit("img00", "ann-b", False)
    store.submit("img00", "ann-a", False, is_consensus=True)
    reloaded = VerdictStore(make_study(), path=path)
    assert [v.to_dict() for v in reloaded.snapshot()] \
        == [v.to_dict() for v in store.snapshot()]
    # the reloaded log still enforces duplicates
    with pytest.raises(ConflictError):
        reloaded.submit("img00", "ann-a", True)
    assert len(path.read_text().splitlines()) == 3


# -- HTTP layer ---------------------------------------------------------------


@pytest.fixture()
def served(tmp_path):
    """App over four real stored images; returns (client, store, images, ids)."""
    images = ImageStore(tmp_path / "images")
    rng = np.random.default_rng(21)
    ids = [images.save(Image(pixels=rng.random((8, 8, 1)))) for _ in range(4)]
    tasks = {iid: i % 3 for i, iid in enumerate(ids)}
    store = VerdictStore(AnnotationStudy(tasks, ANNOTATORS, shuffle_seed=5))
    client = TestClient(create_app(store, images))
    return client, store, images, ids


def auth(annotator="ann-a"):
    return {"X-Annotation-Token": ANNOTATORS[annotator]}


def test_http_auth_failures(served):
    client, _, _, ids = served
    assert client.get("/api/task", params={"annotator": "ann-a"}).status_code == 401
    assert client.get("/api/task", params={"annotator": "ann-a"},
                      headers={"X-Annotation-Token": "wrong"}).status_code == 401
    assert client.get(f"/api/image/{ids[0]}",
                      headers={"X-Annotation-Token": "wrong"}).status_code == 401
    resp = client.post("/api/verdict", headers=auth("ann-b"),
                       json={"image_id": ids[0], "annotator_id": "ann-a",
                             "answer": "yes"})
    assert resp.status_code == 401  # token does not match the claimed id


def test_http_task_payload_is_blinded(served):
    client, _, _, _ = served
    resp = client.get("/api/task", params={"annotator": "ann-a"},
                      headers=auth())
    assert resp.status_code == 200
    payload = resp.json()
    assert set(payload) == {"schema_version", "done", "image_id",
                            "class_label", "presentation_order"}
    assert payload["done"] is False
    body = resp.content.lower()
    for banned in BLINDED_FIELDS:
        assert banned.encode() not in body, banned


def test_http_image_bytes_round_trip(served):
    client, _, images, ids = served
    resp = client.get(f"/api/image/{ids[2]}", headers=auth())
    assert resp.status_code == 200
    assert resp.headers["content-type"] == "image/png"
    assert resp.content == images.load_bytes(ids[2])
    assert client.get("/api/image/nope", headers=auth()).status_code == 404


def test_http_verdict_and_conflict(served):
    client, store, _, ids = served
    body = {"image_id": ids[0], "annotator_id": "ann-a", "answer": "yes"}
    resp = client.post("/api/verdict", headers=auth(), json=body)
    assert resp.status_code == 200
    assert resp.json()["accepted"] is True
    assert resp.json()["verdict"]["answer"] == "yes"
    assert client.post("/api/verdict", headers=auth(), json=body).status_code == 409
    assert len(store.snapshot()) == 1


def test_http_validation_errors(served):
    client, _, _, ids = served
    assert client.get("/api/task", params={"annotator": "ann-a",
                                           "mode": "speedrun"},
                      headers=auth()).status_code == 400
    assert client.post("/api/verdict", headers=auth(),
                       json={"image_id": ids[0],
                             "annotator_id": "ann-a"}).status_code == 400
    assert client.post("/api/verdict", headers=auth(),
                       json={"image_id": ids[0], "annotator_id": "ann-a",
                             "answer": "maybe"}).status_code == 400


def test_http_full_labeling_and_consensus_flow(served):
    client, store, _, ids = served

    def answer_all(annotator, decide):
        while True:
            task = client.get("/api/task", params={"annotator": annotator},
                              headers=auth(annotator)).json()
            if task["done"]:
                return
            resp = client.post("/api/verdict", headers=auth(annotator), json={
                "image_id": task["image_id"], "annotator_id": annotator,
                "answer": decide(task["image_id"]),
            })
            assert resp.status_code == 200

    answer_all("ann-a", lambda iid: "yes")
    answer_all("ann-b", lambda iid: "no" if iid == ids[1] else "yes")

    progress = client.get("/api/progress").json()
    assert progress["annotators"]["ann-a"]["answered"] == 4
    assert progress["disagreements"] == [ids[1]]
    assert progress["consensus_pending"] == [ids[1]]

    task = client.get("/api/task", params={"annotator": "ann-a",
                                           "mode": "consensus"},
                      headers=auth()).json()
    assert task["image_id"] == ids[1]
    resp = client.post("/api/verdict", headers=auth(), json={
        "image_id": ids[1], "annotator_id": "ann-a", "answer": "no",
        "is_consensus": True,
    })
    assert resp.status_code == 200
    done = client.get("/api/task", params={"annotator": "ann-a",
                                           "mode": "consensus"},
                      headers=auth()).json()
    assert done == {"schema_version": 1, "done": True}

    export = client.get("/api/export").json()
    assert export == store.export()
    assert len(export["verdicts"]) == 9


def test_build_study_from_files(tmp_path):
    images = ImageStore(tmp_path / "images")
    rng = np.random.default_rng(22)
    iid = images.save(Image(pixels=rng.random((8, 8, 1))))
    records_path = tmp_path / "records.json"
    write_records(records_path, [flip_record(iid)])
    annotators_path = tmp_path / "annotators.json"
    annotators_path.write_text(json.dumps({"annotators": ANNOTATORS}))
    study, loaded_images = build_study_from_files(
        records_path, tmp_path / "images", annotators_path, shuffle_seed=9)
    assert set(study.tasks) == {iid}
    assert study.shuffle_seed == 9
    assert iid in loaded_images

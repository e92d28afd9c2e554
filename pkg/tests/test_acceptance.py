"""Acceptance gate: one test per release criterion, stated tolerances.

Each criterion is a single test function whose pytest -v PASSED/FAILED
line is the per-criterion verdict; the body also prints an explicit
[PASS] line with the measured numbers for captured logs.  Criteria with
runtime bounds measure themselves with a monotonic clock.
"""

from __future__ import annotations

import time
from dataclasses import replace

import numpy as np
import pytest
from fastapi.testclient import TestClient
from test_metrics import reference_ssim

from latentprobe.annotation.server import create_app
from latentprobe.annotation.service import (
    BLINDED_FIELDS,
    AnnotationStudy,
    VerdictStore,
)
from latentprobe.backends.base import Image, Prediction
from latentprobe.campaign import CampaignConfig, run_campaign
from latentprobe.gates import GateConfig, screen
from latentprobe.latent import (
    ADAPTIVE_SCHEDULE,
    MeanStyle,
    StyleCode,
    style_mix,
    truncate,
)
from latentprobe.metrics import (
    PyramidEmbedder,
    SimilarityReading,
    l2,
    mean_pairwise_diversity,
    ssim,
)
from latentprobe.records import FrontierRecord
from latentprobe.report import Verdict, merge_verdicts
from latentprobe.search import first_flip_search, style_mix_search
from latentprobe.store import ImageStore

pytestmark = pytest.mark.acceptance


def report_pass(criterion: int, message: str) -> None:
    print(f"[PASS] criterion {criterion}: {message}")


# -- criterion 1: truncation algebra ------------------------------------------


def test_criterion_01_truncation_algebra():
    """Identity at psi=1 bitwise, contraction ratio, nesting, cutoff rows;
    1000 randomized cases in under 5 seconds."""
    start = time.monotonic()
    rng = np.random.default_rng(424242)
    cases = 1000
    for _ in range(cases):
        num_layers = int(rng.integers(2, 11))
        style_dim = int(rng.integers(2, 13))
        w = StyleCode(rng.standard_normal((num_layers, style_dim)))
        mean = MeanStyle(w_bar=rng.standard_normal(style_dim),
                         sample_count=100)
        psi = float(rng.uniform(0.05, 0.999))
        cutoff = int(rng.integers(1, num_layers + 1))

        identity = truncate(w, mean, 1.0, cutoff)
        assert identity.layers.tobytes() == w.layers.tobytes()

        truncated = truncate(w, mean, psi, cutoff)
        for row in range(cutoff):
            base = np.linalg.norm(w.layers[row] - mean.w_bar)
            moved = np.linalg.norm(truncated.layers[row] - mean.w_bar)
            assert abs(moved - psi * base) <= 1e-9 * max(base, 1.0)
        assert truncated.layers[cutoff:].tobytes() == w.layers[cutoff:].tobytes()

        psi2 = float(rng.uniform(0.05, 0.999))
        nested = truncate(truncate(w, mean, psi, cutoff), mean, psi2, cutoff)
        direct = truncate(w, mean, psi * psi2, cutoff)
        assert np.max(np.abs(nested.layers - direct.layers)) <= 1e-9
    elapsed = time.monotonic() - start
    assert elapsed < 5.0
    report_pass(1, f"{cases} randomized algebra cases in {elapsed:.2f}s")


# -- criterion 2: style-mix search vs dense grid oracle -----------------------

GRID = 4096  # lambda resolution 2**-12, finer than the search's 2**-10


def grid_first_conjunction(session, x_b, w_b, w_r, gate):
    """First grid lambda passing flip-and-screen, via a coarse bracket.

    The fixture seeds are pre-screened for a single false-to-true
    transition, so bracketing with stride 32 and scanning one cell is
    exactly the dense left-to-right scan.
    """

    def ok(i: int) -> bool:
        lam = i / GRID
        x = session.synthesize_mix(style_mix(w_b, w_r, (6, 7), lam))
        pred = session.classify(x)
        out = screen(x_b, x, pred, 2, gate, intended_flip=True)
        return pred.top_class != 2 and out.passed

    last_false, first_true = None, None
    for i in range(0, GRID + 1, 32):
        if ok(i):
            first_true = i
            break
        last_false = i
    if first_true is None:
        return None
    for i in range((last_false or 0) + 1, first_true):
        if ok(i):
            return i / GRID
    return first_true / GRID


def test_criterion_02_mix_search_matches_grid_oracle(harness, mix_seeds):
    """Returned lambda within 2**-10 (9.8e-4) of the dense grid oracle's
    first flipping-and-screening lambda, on 20 seeds, under 30 seconds."""
    start = time.monotonic()
    session = harness.session
    worst = 0.0
    for seed in mix_seeds:
        records = style_mix_search(
            seed, session, budgets=[1.0], k=3, layers=(6, 7), steps=10,
            config=harness.gate)
        assert len(records) == 1
        rec = records[0]
        x_b, w_b = session.render(seed, 1.0)
        w_r = session.style_code(seed.with_class(rec.rival), 1.0)
        oracle = grid_first_conjunction(session, x_b, w_b, w_r, harness.gate)
        assert oracle is not None
        err = abs(rec.lam - oracle)
        worst = max(worst, err)
        assert err <= 9.8e-4, (seed.seed_id, rec.lam, oracle)
    elapsed = time.monotonic() - start
    assert elapsed < 30.0
    report_pass(2, f"20 seeds, worst |lambda error| {worst:.2e} <= 9.8e-4 "
                   f"in {elapsed:.2f}s")


# -- criterion 3: first-flip vs exhaustive oracle ------------------------------


def exhaustive_first_flip(session, seed):
    """Evaluate the whole schedule, then take the first flip in order."""
    ref, _ = session.render(seed, 1.0)
    if session.classify(ref).top_class != seed.class_label:
        return None
    flips = []
    for psi in ADAPTIVE_SCHEDULE:
        x, _ = session.render(seed, psi)
        if session.classify(x).top_class != seed.class_label:
            flips.append(psi)
    return flips[0] if flips else None


def test_criterion_03_first_flip_matches_exhaustive(
        harness, flip_seeds, fresh_session_factory):
    """psi_star agrees with exhaustive schedule evaluation on all 50
    seeds, and the search never renders below psi_star; under 30 s."""
    start = time.monotonic()
    flipped = 0
    for seed in flip_seeds:
        oracle = exhaustive_first_flip(fresh_session_factory(), seed)
        session = fresh_session_factory()
        rec = first_flip_search(seed, session, config=harness.gate)
        found = None if rec is None else rec.psi_star
        assert found == oracle, (seed.seed_id, found, oracle)
        if rec is not None:
            flipped += 1
            rendered = [psi for _, _, psi in session.stats.render_log]
            assert min(rendered) == rec.psi_star, seed.seed_id
    elapsed = time.monotonic() - start
    assert elapsed < 30.0
    report_pass(3, f"50/50 psi_star matches ({flipped} flips), "
                   f"no renders below psi_star, in {elapsed:.2f}s")


# -- criterion 4: adaptive salvage ---------------------------------------------


def test_criterion_04_salvage_hits_every_schedule_point(
        harness, salvage_points, discard_seed):
    """Constructed fixtures pass first at each of the 9 schedule points;
    a seed failing at the 0.50 floor is discarded."""
    from latentprobe.search import adaptive_salvage

    assert sorted(salvage_points, reverse=True) == list(ADAPTIVE_SCHEDULE)
    for psi, seed in salvage_points.items():
        result = adaptive_salvage(seed, harness.session, harness.gate)
        assert result.psi_star == psi, (seed.seed_id, result.psi_star, psi)
    discard = adaptive_salvage(discard_seed, harness.session, harness.gate)
    assert discard.psi_star is None
    assert [a.psi for a in discard.attempts] == list(ADAPTIVE_SCHEDULE)
    report_pass(4, "salvage lands on all 9 schedule points; floor failure "
                   "discards")


# -- criterion 5: gate thresholds ----------------------------------------------

TINY_REF = Image(pixels=np.zeros((8, 8, 1)))
TINY_CAND = Image(pixels=np.zeros((8, 8, 1)), provenance="truncated")
FLIP_PRED = Prediction.from_probs(np.array([0.1, 0.2, 0.7]))


def screen_with(monkeypatch, reading, config):
    monkeypatch.setattr("latentprobe.gates.measure_similarity",
                        lambda _x, _y: reading)
    return screen(TINY_REF, TINY_CAND, FLIP_PRED, 0, config,
                  intended_flip=True)


def test_criterion_05_gate_thresholds(monkeypatch):
    """Screen passes iff ssim >= 0.95 and l2 <= 0.2, thresholds closed;
    monotonicity holds on 10000 random reading pairs."""
    config = GateConfig()  # production defaults 0.95 / 0.2
    assert config.tau_ssim == 0.95 and config.tau_l2 == 0.2
    assert screen_with(monkeypatch, SimilarityReading(0.95, 0.2), config).passed
    eps = 1e-12
    assert not screen_with(
        monkeypatch, SimilarityReading(0.95 - eps, 0.2), config).passed
    assert not screen_with(
        monkeypatch, SimilarityReading(0.95, 0.2 + eps), config).passed

    rng = np.random.default_rng(99)
    checked = 0
    for _ in range(10_000):
        ssim_a = float(rng.uniform(0.0, 1.0))
        l2_a = float(rng.uniform(0.0, 0.4))
        # B dominates A: no worse on either axis
        ssim_b = ssim_a + (1.0 - ssim_a) * float(rng.uniform(0.0, 1.0))
        l2_b = l2_a * float(rng.uniform(0.0, 1.0))
        pass_a = screen_with(
            monkeypatch, SimilarityReading(ssim_a, l2_a), config).passed
        pass_b = screen_with(
            monkeypatch, SimilarityReading(ssim_b, l2_b), config).passed
        assert not (pass_a and not pass_b), (ssim_a, l2_a, ssim_b, l2_b)
        checked += 1
    report_pass(5, f"closed 0.95/0.2 boundary exact; monotone on {checked} "
                   f"random reading pairs")


# -- criterion 6: metric correctness -------------------------------------------


def test_criterion_06_metric_correctness():
    """ssim(x,x)=1 exactly; l2 axioms on 1000 triples within 1e-9;
    reference-implementation agreement within 1e-3 on 20 pairs."""
    rng = np.random.default_rng(123)
    for _ in range(10):
        x = rng.random((16, 16, 1))
        assert ssim(x, x) == 1.0

    for _ in range(1000):
        a, b, c = (rng.random((8, 8, 1)) for _ in range(3))
        assert l2(a, a) == 0.0
        dab, dba = l2(a, b), l2(b, a)
        assert dab >= 0.0
        assert abs(dab - dba) <= 1e-9
        assert l2(a, c) <= dab + l2(b, c) + 1e-9

    worst = 0.0
    for i in range(20):
        shape = (16, 16, 1) if i % 2 else (16, 24, 3)
        x, y = rng.random(shape), rng.random(shape)
        err = abs(ssim(x, y) - reference_ssim(x, y))
        worst = max(worst, err)
        assert err <= 1e-3
    report_pass(6, f"exact self-ssim; 1000 l2 triples within 1e-9; "
                   f"reference ssim agreement worst {worst:.2e} <= 1e-3")


# -- criterion 7: report arithmetic --------------------------------------------

SPOT_ROWS = (
    ("MNIST", "Style-Mixing", "Adaptive", 161, 15, "60%", "0.252", "9.31%", "10.7"),
    ("Fashion MNIST", "Truncation-Only", "Gradual trunc.",
     93, 25, "100%", "0.227", "26.8%", "3.72"),
    ("CIFAR-10", "Style-Mixing", "ψ=0.5", 118, 16, "64%", "0.338", "13.5%", "7.37"),
)


def test_criterion_07_report_reproduces_reference_table(report_fixture):
    """Merging fixture logs with fixture verdicts reproduces every row's
    printed values exactly; spot rows asserted as literals; under 5 s."""
    start = time.monotonic()
    logs, verdicts, expected, store = report_fixture
    report = merge_verdicts(logs, verdicts, quota=25,
                            load_pixels=store.load_pixels)
    by_key = {(r.dataset, r.technique, r.setting): r for r in report.rows}
    assert len(by_key) == len(expected) == 24
    for row in expected:
        r = by_key[(row["dataset"], row["technique"], row["setting"])]
        got = (r.seeds, r.validated, r.val_rate, f"{r.diversity:.3f}",
               r.fault_rate)
        want = (row["seeds"], row["validated"], row["val_rate"],
                row["lpips"], row["fault_rate"])
        assert got == want, (row["dataset"], row["technique"], row["setting"])
    for dataset, technique, setting, seeds, val, rate, lpips, fault, eff in SPOT_ROWS:
        r = by_key[(dataset, technique, setting)]
        assert (r.seeds, r.validated, r.val_rate) == (seeds, val, rate)
        assert f"{r.diversity:.3f}" == lpips
        assert r.fault_rate == fault
        assert r.efficiency == eff
    elapsed = time.monotonic() - start
    assert elapsed < 5.0
    report_pass(7, f"all 24 rows + 3 spot rows exact in {elapsed:.2f}s")


# -- criterion 8: determinism --------------------------------------------------

DETERMINISM_CONFIG = CampaignConfig(
    technique="style_mix", mode="adaptive",
    gate=GateConfig(p_min=0.80, delta=0.30, tau_ssim=0.80, tau_l2=0.2),
    quota=10, classes=(2,), seeds_per_class=8, rng_seed=7,
    mean_style_samples=2000)


def test_criterion_08_campaign_determinism():
    """Two identical-config campaign runs produce identical log hashes
    (timestamps excluded by construction); under 2 minutes."""
    start = time.monotonic()
    first = run_campaign(DETERMINISM_CONFIG)
    second = run_campaign(DETERMINISM_CONFIG)
    assert first.determinism_hash == second.determinism_hash
    assert first.records == second.records
    elapsed = time.monotonic() - start
    assert elapsed < 120.0
    report_pass(8, f"identical hashes {first.determinism_hash[:12]}... "
                   f"across two runs in {elapsed:.2f}s")


# -- criterion 9: diversity trend under descending truncation ------------------


def test_criterion_09_diversity_non_increasing_as_psi_descends(tmp_path):
    """Mean pairwise diversity of screened outputs is non-increasing as
    fixed psi descends 1.0 -> 0.5, with at most one inversion allowed."""
    gate = GateConfig(p_min=0.80, delta=0.30, tau_ssim=0.80, tau_l2=0.2)
    settings = [("none", 1.0), ("fixed", 0.9), ("fixed", 0.8),
                ("fixed", 0.7), ("fixed", 0.6), ("fixed", 0.5)]
    embedder = PyramidEmbedder()
    diversities = []
    for mode, psi in settings:
        out = tmp_path / f"psi{round(psi * 100):03d}"
        result = run_campaign(CampaignConfig(
            technique="style_mix", mode=mode, psi=psi, gate=gate,
            quota=10, classes=(2,), seeds_per_class=8, rng_seed=11,
            mean_style_samples=2000, out_dir=str(out)))
        ids = sorted({r.candidate_image_id for r in result.screened_records})
        if len(ids) < 2:
            diversities.append(0.0)
            continue
        store = ImageStore(out / "images")
        images = [store.load_pixels(iid) for iid in ids]
        diversities.append(mean_pairwise_diversity(images, embedder).value)
    inversions = sum(1 for lo, hi in zip(diversities[1:], diversities)
                     if lo > hi + 1e-9)
    assert inversions <= 1, diversities
    # the floor settings collapse hard, mirroring the sharp drop
    assert diversities[-1] <= 0.25 * max(diversities)
    trend = " -> ".join(f"{d:.3f}" for d in diversities)
    report_pass(9, f"diversity {trend} ({inversions} inversions)")


# -- criterion 10: annotation round trip (server side) -------------------------
# The browser-UI half of this criterion lives in the frontend test suite;
# this covers the server side with scripted annotators over live HTTP.

SECONDARY_ANNOTATORS = {"ann-a": "tok-a", "ann-b": "tok-b"}


def secondary_record(i: int, iid: str) -> FrontierRecord:
    fault = i % 2 == 0
    return FrontierRecord(
        method="first_flip", seed_id=1000 + i, class_label=1, budget=1.0,
        psi_star=0.8, source_image_id=f"src{i:02d}", candidate_image_id=iid,
        ssim=0.97, l2=0.05, screen_passed=True, failed_conditions=(),
        probs_source=(0.05, 0.9, 0.05),
        probs_candidate=(0.6, 0.3, 0.1) if fault else (0.05, 0.9, 0.05))


def test_criterion_10_annotation_round_trip_server_side(tmp_path):
    """Two scripted annotators label a 30-image study over live HTTP;
    export -> merge_verdicts reproduces hand-computed counts; no blinded
    metadata substring appears in any served payload."""
    images = ImageStore(tmp_path / "images")
    rng = np.random.default_rng(31)
    ids = [images.save(Image(pixels=rng.random((12, 12, 1))))
           for _ in range(30)]
    index_of = {iid: i for i, iid in enumerate(ids)}
    records = [secondary_record(i, iid) for i, iid in enumerate(ids)]
    study = AnnotationStudy.from_records(records, SECONDARY_ANNOTATORS,
                                         shuffle_seed=17)
    store = VerdictStore(study, path=tmp_path / "verdicts.jsonl")
    client = TestClient(create_app(store, images))

    payloads: list[bytes] = []

    def answer(annotator: str, choose) -> int:
        token = {"X-Annotation-Token": SECONDARY_ANNOTATORS[annotator]}
        count = 0
        while True:
            resp = client.get("/api/task", params={"annotator": annotator},
                              headers=token)
            assert resp.status_code == 200
            payloads.append(resp.content)
            task = resp.json()
            if task["done"]:
                return count
            image = client.get(f"/api/image/{task['image_id']}", headers=token)
            assert image.status_code == 200
            assert image.content == images.load_bytes(task["image_id"])
            verdict = client.post("/api/verdict", headers=token, json={
                "image_id": task["image_id"], "annotator_id": annotator,
                "answer": choose(index_of[task["image_id"]]),
            })
            assert verdict.status_code == 200
            count += 1

    # 0-17 agreed valid, 18-23 agreed invalid, 24-29 disagree
    assert answer("ann-a", lambda i: "yes" if i <= 17 or i >= 24 else "no") == 30
    assert answer("ann-b", lambda i: "yes" if i <= 17 else "no") == 30

    progress = client.get("/api/progress")
    payloads.append(progress.content)
    assert progress.json()["consensus_pending"] == sorted(ids[24:30])

    # the consensus queue serves a pending disagreement
    token_a = {"X-Annotation-Token": "tok-a"}
    queued = client.get("/api/task", params={"annotator": "ann-a",
                                             "mode": "consensus"},
                        headers=token_a)
    payloads.append(queued.content)
    assert index_of[queued.json()["image_id"]] >= 24
    # resolve 24/25 valid and 26 invalid; 27-29 stay unresolved
    for i, answer_text in ((24, "yes"), (25, "yes"), (26, "no")):
        resp = client.post("/api/verdict", headers=token_a, json={
            "image_id": ids[i], "annotator_id": "ann-a",
            "answer": answer_text, "is_consensus": True})
        assert resp.status_code == 200

    export = client.get("/api/export")
    payloads.append(export.content)
    verdicts = [Verdict.from_dict(v) for v in export.json()["verdicts"]]
    assert len(verdicts) == 63  # 30 + 30 + 3 consensus

    for body in payloads:
        lowered = body.lower()
        for banned in BLINDED_FIELDS:
            assert banned.encode() not in lowered, banned

    logs = {("toy", "Truncation-Only", "Adaptive"): (records, 120)}
    report = merge_verdicts(logs, verdicts, quota=30,
                            load_pixels=images.load_pixels).rows[0]
    assert report.validated == 20
    assert report.val_rate == "66.6%"
    assert report.fault_validated == 10
    assert report.fault_rate == "8.33%"
    assert report.efficiency == "6.00"
    assert report.seeds == 120
    assert "unresolved_disagreement" in report.flags
    assert report.diversity > 0.0
    report_pass(10, "30-image HTTP round trip: 20 validated (66.6%), "
                    "10 faults (8.33%), payloads blinded")

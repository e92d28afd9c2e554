"""Smoke-run every pipeline module end to end on the toy backend."""

import sys
import tempfile
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

import numpy as np

from latentprobe.backends.base import RenderSession, build_mean_styles
from latentprobe.backends.toy import FINE_LAYERS, ToyWorld
from latentprobe.campaign import CampaignConfig, load_campaign_log, replay_check, run_campaign
from latentprobe.gates import GateConfig
from latentprobe.latent import LatentSeed
from latentprobe.records import records_from_json, records_to_json
from latentprobe.report import Verdict, aggregate_rates, render_csv, render_text, CampaignReport
from latentprobe.search import adaptive_salvage, first_flip_search, style_mix_search
from latentprobe.store import ImageStore

world = ToyWorld.default()
gate = GateConfig(p_min=0.80, delta=0.30, tau_ssim=0.80, tau_l2=0.2)
mean_styles = build_mean_styles(world.generator, num_samples=4000, rng_seed=0)
session = RenderSession(world.generator, world.classifier, mean_styles)
DIM = world.generator.latent_dim

# --- style-mix search: class-2 seed on a ring around its home center,
# picked so the amp flip threshold falls inside the mix travel
q2 = (0.46, 0.74)
seed = None
for step in range(24):
    ang = 2 * np.pi * step / 24
    for dist in (0.07, 0.08, 0.09, 0.10, 0.14, 0.15, 0.16):
        c = (q2[0] + dist * np.cos(ang), q2[1] + dist * np.sin(ang))
        a_star = world.amp_flip_threshold(center=c, radius=0.075)
        if not 0.715 <= a_star <= 0.92:
            continue
        cand = world.seed_for_params(900001, 2, center=c, radius=0.075, amp=1.0)
        img, _ = session.render(cand, psi=1.0)
        pred = session.classify(img)
        if pred.top_class == 2 and pred.top_conf >= gate.p_min and pred.margin >= gate.delta:
            seed = cand
            print(f"mix seed: center=({c[0]:.3f},{c[1]:.3f}) a*={a_star:.4f} "
                  f"p={pred.top_conf:.3f}")
            break
    if seed is not None:
        break
assert seed is not None, "no mix fixture found"
recs = style_mix_search(seed, session, budgets=[1.0], k=2, layers=FINE_LAYERS,
                        steps=10, config=gate)
print("style_mix records:", len(recs))
for r in recs:
    print("  rival", r.rival, "lam %.4f" % r.lam, "screen", r.screen_passed,
          "ssim %.4f" % r.ssim, "fault", r.is_fault)
assert any(r.screen_passed for r in recs), "mix produced no screened frontier"

# --- first-flip search on a natural class-1 seed
rng = np.random.default_rng(123)
rec1 = None
for i in range(400):
    z = rng.standard_normal(DIM)
    s = LatentSeed(seed_id=50000 + i, z=z, class_label=1)
    rec1 = first_flip_search(s, session, config=gate)
    if rec1 is not None and rec1.screen_passed:
        break
print("first_flip:", None if rec1 is None else
      (rec1.psi_star, rec1.screen_passed, rec1.predicted_class, round(rec1.ssim, 3)))
assert rec1 is not None and rec1.screen_passed

# --- salvage on a natural class-0 seed that fails the baseline gate
rng = np.random.default_rng(321)
sal = None
for i in range(400):
    z = rng.standard_normal(DIM)
    s = LatentSeed(seed_id=60000 + i, z=z, class_label=0)
    img, _ = session.render(s, psi=1.0)
    pred = session.classify(img)
    if pred.top_class == 0 and pred.top_conf >= gate.p_min and pred.margin >= gate.delta:
        continue
    sal = adaptive_salvage(s, session, gate)
    if sal.psi_star is not None and sal.psi_star < 1.0:
        break
print("salvage psi_star:", None if sal is None else sal.psi_star,
      "attempts:", [] if sal is None else [a.psi for a in sal.attempts])
assert sal is not None and sal.psi_star is not None

# --- records JSON round trip
assert records_from_json(records_to_json(recs)) == recs
print("records round trip ok")

# --- store round trip
with tempfile.TemporaryDirectory() as td:
    store = ImageStore(Path(td) / "images")
    img, _ = session.render(seed, psi=1.0)
    iid = store.save(img)
    again = store.save(img)
    assert iid == again
    px = store.load_pixels(iid)
    assert px.shape == img.pixels.shape
    print("store ok:", iid[:12])

# --- report aggregation with synthetic verdicts
verdicts = []
for r in recs:
    if r.screen_passed:
        verdicts.append(Verdict(r.candidate_image_id, "a1", True))
        verdicts.append(Verdict(r.candidate_image_id, "a2", True))
row = aggregate_rates(recs, verdicts, seeds_consumed=10, quota=25,
                      dataset="toy", technique="Style-Mixing", setting="No trunc.")
print("row:", row.row(), "flags:", row.flags)
print(render_text(CampaignReport(rows=(row,))))
print(render_csv(CampaignReport(rows=(row,))))

# --- miniature campaign, persisted, then replayed
with tempfile.TemporaryDirectory() as td:
    cfg = CampaignConfig(dataset="toy", technique="style_mix", mode="none",
                         gate=gate, quota=3, seeds_per_class=4, rng_seed=7,
                         mean_style_samples=2000, out_dir=str(Path(td) / "run"))
    result = run_campaign(cfg, progress=print)
    print("campaign records:", len(result.records),
          "screened:", len(result.screened_records),
          "batches:", result.batches_drawn,
          "seeds:", result.seeds_consumed)
    print("hash:", result.determinism_hash[:16])
    print("report:\n" + (Path(td) / "run" / "report.txt").read_text())
    cfg2, recs2, sal2, meta2 = load_campaign_log(Path(td) / "run")
    assert len(recs2) == len(result.records)
    assert replay_check(Path(td) / "run"), "replay hash mismatch"
    print("replay ok")
print("SMOKE OK")

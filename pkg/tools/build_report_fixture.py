"""Build the committed reference-report fixture under fixtures/report/.

For each of the 24 reference settings this constructs a quota's worth of
screened frontier records, double-annotator verdicts validating exactly
the recorded number of frontiers, and an image set calibrated so the
mean pairwise diversity of the validated images prints as the reference
LPIPS value at three decimals.  Expected printed values are stored as
literal strings alongside, so tests compare against data, not against
the formatting code that produced them.
"""

import json
import shutil
import sys
from pathlib import Path

import numpy as np

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "src"))

from latentprobe.fixtures import calibrated_image_set
from latentprobe.records import FrontierRecord, records_to_json
from latentprobe.store import ImageStore, image_id

OUT = ROOT / "fixtures" / "report"

# dataset, setting, seeds, validated, lpips, printed val-rate, printed fault-rate
STYLE_MIX_ROWS = [
    ("MNIST", "No trunc.", 504, 11, 0.194, "44%", "2.18%"),
    ("MNIST", "ψ=0.9", 518, 12, 0.224, "48%", "2.31%"),
    ("MNIST", "ψ=0.8", 461, 16, 0.215, "64%", "3.47%"),
    ("MNIST", "ψ=0.7", 549, 14, 0.190, "56%", "2.55%"),
    ("MNIST", "ψ=0.6", 455, 20, 0.152, "80%", "4.39%"),
    ("MNIST", "ψ=0.5", 448, 17, 0.143, "68%", "3.79%"),
    ("MNIST", "Adaptive", 161, 15, 0.252, "60%", "9.31%"),
    ("Fashion MNIST", "No trunc.", 431, 23, 0.240, "92%", "5.33%"),
    ("Fashion MNIST", "ψ=0.9", 502, 24, 0.236, "96%", "4.78%"),
    ("Fashion MNIST", "ψ=0.8", 718, 25, 0.173, "100%", "3.48%"),
    ("Fashion MNIST", "ψ=0.7", 706, 25, 0.203, "100%", "3.54%"),
    ("Fashion MNIST", "ψ=0.6", 392, 24, 0.166, "96%", "6.12%"),
    ("Fashion MNIST", "ψ=0.5", 526, 25, 0.170, "100%", "4.75%"),
    ("Fashion MNIST", "Adaptive", 169, 22, 0.214, "88%", "13.0%"),
    ("CIFAR-10", "No trunc.", 275, 13, 0.424, "52%", "4.72%"),
    ("CIFAR-10", "ψ=0.9", 249, 13, 0.404, "52%", "5.22%"),
    ("CIFAR-10", "ψ=0.8", 252, 16, 0.400, "64%", "6.34%"),
    ("CIFAR-10", "ψ=0.7", 249, 15, 0.406, "60%", "6.02%"),
    ("CIFAR-10", "ψ=0.6", 158, 17, 0.383, "68%", "10.7%"),
    ("CIFAR-10", "ψ=0.5", 118, 16, 0.338, "64%", "13.5%"),
    ("CIFAR-10", "Adaptive", 255, 13, 0.421, "52%", "5.09%"),
]
TRUNC_ONLY_ROWS = [
    ("MNIST", "Gradual trunc.", 499, 19, 0.156, "76%", "3.80%"),
    ("Fashion MNIST", "Gradual trunc.", 93, 25, 0.227, "100%", "26.8%"),
    ("CIFAR-10", "Gradual trunc.", 266, 16, 0.386, "64%", "6.01%"),
]

QUOTA = 25
SCHEDULE = (1.0, 0.95, 0.90, 0.85, 0.80, 0.75, 0.70, 0.60, 0.50)


def budget_for(setting: str, i: int) -> float:
    if setting.startswith("ψ="):
        return float(setting[2:])
    if setting == "Adaptive":
        return SCHEDULE[i % len(SCHEDULE)]
    return 1.0


def build_setting(dataset: str, technique: str, setting: str, seeds: int,
                  validated: int, lpips: float, row_index: int,
                  store: ImageStore) -> tuple[dict, list[dict]]:
    num_classes = 10
    shape = (32, 32, 3) if dataset == "CIFAR-10" else (28, 28, 1)
    valid_images = calibrated_image_set(validated, lpips,
                                        rng_seed=9000 + row_index, shape=shape)
    filler_rng = np.random.default_rng(7000 + row_index)

    records: list[FrontierRecord] = []
    verdicts: list[dict] = []
    for i in range(QUOTA):
        cls = i % num_classes
        rival = (cls + 1) % num_classes
        probs_source = [0.05 / (num_classes - 1)] * num_classes
        probs_source[cls] = 0.95
        probs_candidate = [0.10 / (num_classes - 2)] * num_classes
        probs_candidate[cls] = 0.0
        probs_candidate[rival] = 0.90
        is_valid = i < validated
        if is_valid:
            cand_id = store.save(valid_images[i],
                                 filename=f"row{row_index:02d}_val{i:02d}.png")
        else:
            cand_id = image_id(filler_rng.uniform(0.0, 1.0, size=shape))
        src_id = image_id(filler_rng.uniform(0.0, 1.0, size=shape))
        common = dict(
            seed_id=row_index * 1000 + i,
            class_label=cls,
            budget=budget_for(setting, i),
            source_image_id=src_id,
            candidate_image_id=cand_id,
            ssim=0.97,
            l2=0.05,
            screen_passed=True,
            failed_conditions=(),
            probs_source=tuple(probs_source),
            probs_candidate=tuple(probs_candidate),
        )
        if technique == "Style-Mixing":
            rec = FrontierRecord(method="style_mix", rival=rival, lam=0.5,
                                 salvage_psi=0.9 if setting == "Adaptive" and i < 12 else None,
                                 **common)
        else:
            rec = FrontierRecord(method="first_flip",
                                 psi_star=SCHEDULE[1 + i % (len(SCHEDULE) - 1)],
                                 **common)
        records.append(rec)
        answer = "yes" if is_valid else "no"
        for annotator in ("ann-a", "ann-b"):
            verdicts.append({"image_id": cand_id, "annotator_id": annotator,
                             "answer": answer, "is_consensus": False})

    entry = {
        "dataset": dataset,
        "technique": technique,
        "setting": setting,
        "seeds_consumed": seeds,
        "records": json.loads(records_to_json(records)),
    }
    return entry, verdicts


def main() -> None:
    if OUT.exists():
        shutil.rmtree(OUT)
    OUT.mkdir(parents=True)
    store = ImageStore(OUT / "images")

    settings = []
    verdicts: list[dict] = []
    expected = []
    row_index = 0
    for technique, rows in (("Style-Mixing", STYLE_MIX_ROWS),
                            ("Truncation-Only", TRUNC_ONLY_ROWS)):
        for dataset, setting, seeds, validated, lpips, val_rate, fault_rate in rows:
            entry, vs = build_setting(dataset, technique, setting, seeds,
                                      validated, lpips, row_index, store)
            settings.append(entry)
            verdicts.extend(vs)
            expected.append({
                "dataset": dataset, "technique": technique, "setting": setting,
                "seeds": seeds, "validated": validated,
                "val_rate": val_rate, "lpips": f"{lpips:.3f}",
                "fault_rate": fault_rate,
            })
            print(f"built row {row_index:02d}: {dataset} / {technique} / {setting}")
            row_index += 1

    (OUT / "logs.json").write_text(
        json.dumps({"settings": settings}, indent=2, sort_keys=True) + "\n")
    (OUT / "verdicts.json").write_text(
        json.dumps({"verdicts": verdicts}, indent=2, sort_keys=True) + "\n")
    (OUT / "expected_rows.json").write_text(
        json.dumps({"rows": expected}, indent=2, sort_keys=True) + "\n")
    print(f"wrote {len(settings)} settings, {len(verdicts)} verdicts -> {OUT}")


if __name__ == "__main__":
    main()

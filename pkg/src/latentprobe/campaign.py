"""Campaign orchestration: seed drawing, search routing, logs, reports.

A campaign runs one technique under one truncation setting, drawing
per-class seed batches until the screened-frontier quota is met (or a
hard batch cap is hit), and persists everything needed to reproduce the
run: config echo, frontier records, salvage log, image store, and a
report whose human-validation columns stay blank until verdicts arrive.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np

from latentprobe.backends.base import (
    ClassifierBackend,
    GeneratorBackend,
    RenderSession,
    build_mean_styles,
)
from latentprobe.backends.toy import ToyWorld
from latentprobe.errors import InvalidArgument
from latentprobe.gates import GateConfig, baseline_accept
from latentprobe.latent import ADAPTIVE_SCHEDULE, FIXED_SCHEDULE, LatentSeed
from latentprobe.records import (
    FrontierRecord,
    SalvageResult,
    records_from_json,
    records_to_json,
    salvage_from_json,
    salvage_to_json,
)
from latentprobe.report import CampaignReport, SettingReport, aggregate_rates, render_text
from latentprobe.search import (
    DEFAULT_MIX_LAYERS,
    DEFAULT_MIX_STEPS,
    ImageSink,
    adaptive_salvage,
    first_flip_search,
    style_mix_search,
)
from latentprobe.store import ImageStore

CONFIG_SCHEMA_VERSION = 1

TECHNIQUES = ("style_mix", "first_flip")
TRUNCATION_MODES = ("none", "fixed", "adaptive")
SCHEDULE_PRESETS = {"fixed": FIXED_SCHEDULE, "adaptive": ADAPTIVE_SCHEDULE}

MAX_BATCHES = 50


@dataclass(frozen=True)
class CampaignConfig:
    """One campaign = one technique under one truncation setting."""

    dataset: str = "toy"
    backend: str = "toy"  # "toy" or a path to a model manifest JSON
    technique: str = "style_mix"
    mode: str = "none"  # truncation mode: none | fixed | adaptive
    psi: float = 1.0  # truncation level when mode == "fixed"
    schedule: str = "adaptive"  # preset name for descent / salvage schedules
    cutoff: int | None = None  # truncate layers < cutoff only
    rivals: int = 3
    mix_layers: tuple[int, ...] = DEFAULT_MIX_LAYERS
    mix_steps: int = DEFAULT_MIX_STEPS
    gate: GateConfig = field(default_factory=GateConfig)
    quota: int = 25
    seeds_per_class: int = 8
    classes: tuple[int, ...] | None = None  # default: every backend class
    rng_seed: int = 0
    mean_style_samples: int = 10_000
    workers: int = 1
    store_images: bool = True
    out_dir: str | None = None

    def __post_init__(self):
        if self.technique not in TECHNIQUES:
            raise InvalidArgument(f"technique must be one of {TECHNIQUES}")
        if self.mode not in TRUNCATION_MODES:
            raise InvalidArgument(f"mode must be one of {TRUNCATION_MODES}")
        if self.schedule not in SCHEDULE_PRESETS:
            raise InvalidArgument(f"schedule must be one of {tuple(SCHEDULE_PRESETS)}")
        if self.mode == "fixed" and not 0.0 < self.psi <= 1.0:
            raise InvalidArgument("fixed-mode psi must lie in (0, 1]")
        if self.quota < 1 or self.seeds_per_class < 1 or self.rivals < 1:
            raise InvalidArgument("quota, seeds_per_class, and rivals must be >= 1")
        if self.mix_steps < 1:
            raise InvalidArgument("mix_steps must be >= 1")
        if self.workers < 1:
            raise InvalidArgument("workers must be >= 1")
        if self.mean_style_samples < 1:
            raise InvalidArgument("mean_style_samples must be >= 1")

    def to_dict(self) -> dict:
        return {
            "schema_version": CONFIG_SCHEMA_VERSION,
            "dataset": self.dataset,
            "backend": self.backend,
            "technique": self.technique,
            "mode": self.mode,
            "psi": self.psi,
            "schedule": self.schedule,
            "cutoff": self.cutoff,
            "rivals": self.rivals,
            "mix_layers": list(self.mix_layers),
            "mix_steps": self.mix_steps,
            "gate": self.gate.to_dict(),
            "quota": self.quota,
            "seeds_per_class": self.seeds_per_class,
            "classes": None if self.classes is None else list(self.classes),
            "rng_seed": self.rng_seed,
            "mean_style_samples": self.mean_style_samples,
            "workers": self.workers,
            "store_images": self.store_images,
            "out_dir": self.out_dir,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "CampaignConfig":
        raw = dict(raw)
        version = raw.pop("schema_version", CONFIG_SCHEMA_VERSION)
        if version != CONFIG_SCHEMA_VERSION:
            raise InvalidArgument(
                f"config schema version {version} unsupported (expected {CONFIG_SCHEMA_VERSION})"
            )
        if "gate" in raw and isinstance(raw["gate"], dict):
            raw["gate"] = GateConfig.from_dict(raw["gate"])
        for key in ("mix_layers", "classes"):
            if raw.get(key) is not None:
                raw[key] = tuple(raw[key])
        known = {f for f in cls.__dataclass_fields__}  # noqa: C416 keys view is fine
        unknown = set(raw) - known
        if unknown:
            raise InvalidArgument(f"unknown config fields: {sorted(unknown)}")
        return cls(**raw)

    @classmethod
    def load(cls, path: str | Path) -> "CampaignConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def setting_label(self) -> str:
        """Row label for reports, derived from technique and truncation mode."""
        if self.technique == "style_mix":
            if self.mode == "none":
                return "No trunc."
            if self.mode == "fixed":
                text = f"{self.psi:.2f}".rstrip("0").rstrip(".")
                return f"ψ={text}"
            return "Adaptive"
        # Truncation-only descent: the fixed schedule is the gradual setting.
        return "Adaptive" if self.mode == "adaptive" else "Gradual trunc."

    def technique_label(self) -> str:
        return "Style-Mixing" if self.technique == "style_mix" else "Truncation-Only"


def draw_class_seeds(rng_seed: int, class_label: int, batch: int,
                     count: int, latent_dim: int) -> list[LatentSeed]:
    """Deterministic seed batch: a pure function of (rng_seed, class, batch).

    Seed ids encode (batch, class, index) so they are unique across the
    campaign and stable under re-runs regardless of batch interleaving.
    """
    rng = np.random.default_rng(np.random.SeedSequence([rng_seed, class_label, batch]))
    z = rng.standard_normal((count, latent_dim))
    base = (batch * 1000 + class_label) * 1000
    return [
        LatentSeed(seed_id=base + i, z=z[i], class_label=class_label)
        for i in range(count)
    ]


class StoreSink:
    """ImageSink that persists renders to an ImageStore with stable names."""

    def __init__(self, store: ImageStore, dataset: str):
        self.store = store
        self.dataset = dataset

    def save_render(self, image, *, seed_id: int, class_label: int,
                    psi: float, lam: float | None = None) -> str:
        name = f"{self.dataset}_c{class_label}_seed{seed_id}_psi{round(psi * 100):03d}"
        if lam is not None:
            name += f"_lam{round(lam * 1000):04d}"
        return self.store.save(image, filename=name + ".png")


@dataclass
class SeedOutcome:
    """Per-seed bookkeeping: how the seed fared before any search ran."""

    seed_id: int
    class_label: int
    status: str  # passed | salvaged | discarded
    acceptance_psi: float | None


@dataclass
class CampaignResult:
    config: CampaignConfig
    records: list[FrontierRecord]
    salvages: list[SalvageResult]
    outcomes: list[SeedOutcome]
    seeds_consumed: dict[int, int]
    batches_drawn: int
    report: SettingReport
    determinism_hash: str
    out_dir: Path | None = None

    @property
    def screened_records(self) -> list[FrontierRecord]:
        return [r for r in self.records if r.screen_passed]


def _load_backends(config: CampaignConfig) -> tuple[GeneratorBackend, ClassifierBackend]:
    if config.backend == "toy":
        world = ToyWorld.default()
        return world.generator, world.classifier
    from latentprobe.backends.onnx_backend import load_backends  # noqa: PLC0415 lazy

    return load_backends(config.backend)


def _process_seed(seed: LatentSeed, session: RenderSession, config: CampaignConfig,
                  sink: ImageSink | None) -> tuple[SeedOutcome, list[FrontierRecord], SalvageResult | None]:
    """Baseline gate -> optional salvage -> search. Pure given the session."""
    schedule = SCHEDULE_PRESETS[config.schedule]
    reference, _w = session.render(seed, psi=1.0)
    prediction = session.classify(reference)
    outcome = baseline_accept(prediction, seed.class_label, config.gate)

    salvage: SalvageResult | None = None
    if outcome.passed:
        acceptance_psi = 1.0
        status = "passed"
    elif config.mode == "adaptive":
        salvage = adaptive_salvage(seed, session, config.gate,
                                   schedule=schedule, cutoff=config.cutoff)
        if salvage.psi_star is None:
            return (SeedOutcome(seed.seed_id, seed.class_label, "discarded", None),
                    [], salvage)
        acceptance_psi = salvage.psi_star
        status = "salvaged"
    else:
        return (SeedOutcome(seed.seed_id, seed.class_label, "discarded", None),
                [], None)

    if config.technique == "style_mix":
        if config.mode == "none":
            budgets = [1.0]
        elif config.mode == "fixed":
            budgets = [config.psi]
        else:
            budgets = list(schedule)
        records = style_mix_search(
            seed, session, budgets=budgets, k=config.rivals,
            layers=config.mix_layers, steps=config.mix_steps, config=config.gate,
            sink=sink, acceptance_psi=acceptance_psi,
        )
    else:
        descent = schedule
        record = first_flip_search(
            seed, session, schedule=descent, cutoff=config.cutoff,
            config=config.gate, sink=sink, acceptance_psi=acceptance_psi,
        )
        records = [record] if record is not None else []

    return (SeedOutcome(seed.seed_id, seed.class_label, status, acceptance_psi),
            records, salvage)


def _determinism_hash(config: CampaignConfig, records: list[FrontierRecord],
                      salvages: list[SalvageResult],
                      seeds_consumed: dict[int, int]) -> str:
    """Digest of everything a re-run must reproduce byte-for-byte.

    Presentation-only fields (output paths, image persistence, worker
    count) are excluded: they change where results land, not what they
    are.
    """
    cfg = config.to_dict()
    for presentation in ("out_dir", "store_images", "workers"):
        cfg.pop(presentation)
    payload = json.dumps({
        "config": cfg,
        "records": json.loads(records_to_json(records)),
        "salvages": json.loads(salvage_to_json(salvages)),
        "seeds_consumed": {str(k): v for k, v in sorted(seeds_consumed.items())},
    }, sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()


def run_campaign(config: CampaignConfig,
                 generator: GeneratorBackend | None = None,
                 classifier: ClassifierBackend | None = None,
                 progress: Callable[[str], None] | None = None) -> CampaignResult:
    """Execute one campaign and (optionally) persist its artifacts."""
    if generator is None or classifier is None:
        generator, classifier = _load_backends(config)
    say = progress or (lambda _msg: None)

    mean_styles = build_mean_styles(generator, num_samples=config.mean_style_samples,
                                    rng_seed=config.rng_seed)
    session = RenderSession(generator, classifier, mean_styles, cutoff=config.cutoff)

    out_dir = Path(config.out_dir) if config.out_dir else None
    sink: ImageSink | None = None
    store: ImageStore | None = None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        if config.store_images:
            store = ImageStore(out_dir / "images")
            sink = StoreSink(store, config.dataset)

    classes = config.classes or tuple(range(generator.num_classes))
    records: list[FrontierRecord] = []
    salvages: list[SalvageResult] = []
    outcomes: list[SeedOutcome] = []
    seeds_consumed = {c: 0 for c in classes}

    batches = 0
    screened = 0
    while screened < config.quota and batches < MAX_BATCHES:
        batch_seeds: list[LatentSeed] = []
        for c in classes:
            batch_seeds.extend(draw_class_seeds(
                config.rng_seed, c, batches, config.seeds_per_class,
                generator.latent_dim,
            ))
            seeds_consumed[c] += config.seeds_per_class

        if config.workers > 1:
            with ThreadPoolExecutor(max_workers=config.workers) as pool:
                results = list(pool.map(
                    lambda s: _process_seed(s, session, config, sink), batch_seeds,
                ))
        else:
            results = [_process_seed(s, session, config, sink) for s in batch_seeds]

        for outcome, recs, salvage in results:
            outcomes.append(outcome)
            records.extend(recs)
            if salvage is not None:
                salvages.append(salvage)
        screened = sum(1 for r in records if r.screen_passed)
        batches += 1
        say(f"batch {batches}: {screened}/{config.quota} screened frontiers, "
            f"{sum(seeds_consumed.values())} seeds drawn")

    records.sort(key=lambda r: r.sort_key())
    salvages.sort(key=lambda s: (s.seed_id, s.class_label))
    outcomes.sort(key=lambda o: (o.seed_id, o.class_label))

    det_hash = _determinism_hash(config, records, salvages, seeds_consumed)
    report = aggregate_rates(
        records, verdicts=[], seeds_consumed=sum(seeds_consumed.values()),
        quota=config.quota, dataset=config.dataset,
        technique=config.technique_label(), setting=config.setting_label(),
        load_pixels=(store.load_pixels if store is not None else None),
    )

    result = CampaignResult(
        config=config, records=records, salvages=salvages, outcomes=outcomes,
        seeds_consumed=seeds_consumed, batches_drawn=batches, report=report,
        determinism_hash=det_hash, out_dir=out_dir,
    )
    if out_dir is not None:
        _persist(result, session)
    return result


def _persist(result: CampaignResult, session: RenderSession) -> None:
    out = result.out_dir
    assert out is not None
    (out / "config.json").write_text(
        json.dumps(result.config.to_dict(), indent=2, sort_keys=True) + "\n")
    (out / "records.json").write_text(records_to_json(result.records) + "\n")
    (out / "salvage.json").write_text(salvage_to_json(result.salvages) + "\n")
    run_meta = {
        "determinism_hash": result.determinism_hash,
        "batches_drawn": result.batches_drawn,
        "seeds_consumed": {str(k): v for k, v in sorted(result.seeds_consumed.items())},
        "outcomes": [
            {"seed_id": o.seed_id, "class_label": o.class_label,
             "status": o.status, "acceptance_psi": o.acceptance_psi}
            for o in result.outcomes
        ],
        "session_stats": {
            "synth_calls": session.stats.synth_calls,
            "classify_calls": session.stats.classify_calls,
            "cache_hits": session.stats.cache_hits,
        },
    }
    (out / "run.json").write_text(json.dumps(run_meta, indent=2, sort_keys=True) + "\n")
    report = CampaignReport(rows=(result.report,),
                            provenance={"determinism_hash": result.determinism_hash})
    (out / "report.txt").write_text(render_text(report) + "\n")


def load_campaign_log(out_dir: str | Path) -> tuple[CampaignConfig, list[FrontierRecord], list[SalvageResult], dict]:
    """Read back the artifacts written by run_campaign."""
    out = Path(out_dir)
    config = CampaignConfig.load(out / "config.json")
    records = records_from_json((out / "records.json").read_text())
    salvages = salvage_from_json((out / "salvage.json").read_text())
    run_meta = json.loads((out / "run.json").read_text())
    return config, records, salvages, run_meta


def replay_check(out_dir: str | Path) -> bool:
    """Re-run a persisted campaign in memory and compare determinism hashes."""
    config, _records, _salvages, run_meta = load_campaign_log(out_dir)
    rerun = run_campaign(replace(config, out_dir=None, store_images=False))
    return rerun.determinism_hash == run_meta["determinism_hash"]

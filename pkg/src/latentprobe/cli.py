"""Command-line interface: generate, report, sweep, serve."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from latentprobe.campaign import CampaignConfig, load_campaign_log, run_campaign
from latentprobe.errors import LatentProbeError
from latentprobe.report import Verdict, merge_verdicts, render_csv, render_text
from latentprobe.store import ImageStore


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="latentprobe",
        description="boundary test-input generation for image classifiers",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="run one generation campaign")
    gen.add_argument("--config", type=Path, help="campaign config JSON")
    gen.add_argument("--technique", choices=("style_mix", "first_flip"))
    gen.add_argument("--mode", choices=("none", "fixed", "adaptive"))
    gen.add_argument("--psi", type=float, help="truncation level for mode=fixed")
    gen.add_argument("--cutoff", type=int, help="truncate layers below this index")
    gen.add_argument("--seeds-per-class", type=int, dest="seeds_per_class")
    gen.add_argument("--quota", type=int)
    gen.add_argument("--out", type=Path, help="output directory")
    gen.add_argument("--workers", type=int)
    gen.add_argument("--rng-seed", type=int, dest="rng_seed")

    rep = sub.add_parser("report", help="merge verdicts into the results table")
    rep.add_argument("--logs", type=Path, nargs="+", required=True,
                     help="campaign output directories")
    rep.add_argument("--verdicts", type=Path,
                     help="verdict export JSON (omit for placeholders)")
    rep.add_argument("--quota", type=int, default=25)
    rep.add_argument("--out", type=Path, help="directory for report.txt/report.csv")

    swp = sub.add_parser("sweep", help="render a truncation budget-by-cutoff grid")
    swp.add_argument("--out", type=Path, required=True)
    swp.add_argument("--class", type=int, dest="class_label", default=0)
    swp.add_argument("--psis", default="1.0,0.9,0.8,0.7,0.6,0.5")
    swp.add_argument("--cutoffs", default="")
    swp.add_argument("--rng-seed", type=int, dest="rng_seed", default=0)

    srv = sub.add_parser("serve", help="run the annotation service")
    srv.add_argument("--records", type=Path, required=True)
    srv.add_argument("--images", type=Path, required=True)
    srv.add_argument("--annotators", type=Path, required=True,
                     help='JSON {"annotators": {id: token, id: token}}')
    srv.add_argument("--verdict-log", type=Path, dest="verdict_log")
    srv.add_argument("--shuffle-seed", type=int, dest="shuffle_seed", default=0)
    srv.add_argument("--include-source", action="store_true", dest="include_source")
    srv.add_argument("--host", default="127.0.0.1")
    srv.add_argument("--port", type=int, default=8400)
    return parser


def _cmd_generate(args: argparse.Namespace) -> int:
    config = CampaignConfig.load(args.config) if args.config else CampaignConfig()
    overrides = {}
    for name in ("technique", "mode", "psi", "cutoff", "seeds_per_class",
                 "quota", "workers", "rng_seed"):
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    if args.out is not None:
        overrides["out_dir"] = str(args.out)
    if overrides:
        config = replace(config, **overrides)
    result = run_campaign(config, progress=print)
    print(f"records: {len(result.records)} "
          f"({len(result.screened_records)} screened), "
          f"seeds: {sum(result.seeds_consumed.values())}, "
          f"batches: {result.batches_drawn}")
    print(f"determinism hash: {result.determinism_hash}")
    if result.out_dir is not None:
        print(f"artifacts: {result.out_dir}")
    return 0


def _cmd_report(args: argparse.Namespace) -> int:
    logs = {}
    stores: list[ImageStore] = []
    for log_dir in args.logs:
        config, records, _salvages, run_meta = load_campaign_log(log_dir)
        key = (config.dataset, config.technique_label(), config.setting_label())
        seeds = sum(run_meta["seeds_consumed"].values())
        logs[key] = (records, seeds)
        images_dir = Path(log_dir) / "images"
        if images_dir.exists():
            stores.append(ImageStore(images_dir))

    verdicts = []
    if args.verdicts is not None:
        raw = json.loads(args.verdicts.read_text())
        verdicts = [Verdict.from_dict(v) for v in raw["verdicts"]]

    def load_pixels(image_id: str):
        for store in stores:
            if image_id in store:
                return store.load_pixels(image_id)
        raise KeyError(image_id)

    report = merge_verdicts(logs, verdicts, quota=args.quota,
                            load_pixels=load_pixels if stores else None)
    text = render_text(report)
    print(text, end="")
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "report.txt").write_text(text)
        (args.out / "report.csv").write_text(render_csv(report))
        print(f"wrote {args.out / 'report.txt'} and report.csv")
    return 0


def _cmd_sweep(args: argparse.Namespace) -> int:
    from latentprobe.backends.base import RenderSession, build_mean_styles
    from latentprobe.backends.toy import ToyWorld
    from latentprobe.latent import LatentSeed
    from latentprobe.search import truncation_sweep

    world = ToyWorld.default()
    means = build_mean_styles(world.generator, num_samples=4000,
                              rng_seed=args.rng_seed)
    session = RenderSession(world.generator, world.classifier, means)
    rng = np.random.default_rng(
        np.random.SeedSequence([args.rng_seed, args.class_label]))
    seed = LatentSeed(seed_id=0, z=rng.standard_normal(world.generator.latent_dim),
                      class_label=args.class_label)
    psis = [float(p) for p in args.psis.split(",") if p]
    if args.cutoffs:
        cutoffs = [int(c) for c in args.cutoffs.split(",") if c]
    else:
        cutoffs = [world.generator.num_layers]
    grid = truncation_sweep(seed, session, psis, cutoffs)
    store = ImageStore(args.out)
    for i, psi in enumerate(psis):
        for j, cut in enumerate(cutoffs):
            name = f"sweep_c{args.class_label}_psi{round(psi * 100):03d}_cut{cut}.png"
            store.save(grid[i][j], filename=name)
    print(f"wrote {len(psis) * len(cutoffs)} renders to {args.out}")
    return 0


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from latentprobe.annotation.server import build_study_from_files, create_app
    from latentprobe.annotation.service import VerdictStore

    study, images = build_study_from_files(
        args.records, args.images, args.annotators,
        shuffle_seed=args.shuffle_seed, include_source=args.include_source)
    store = VerdictStore(study, path=args.verdict_log)
    app = create_app(store, images)
    print(f"serving {len(study.tasks)} tasks on http://{args.host}:{args.port}")
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


_COMMANDS = {
    "generate": _cmd_generate,
    "report": _cmd_report,
    "sweep": _cmd_sweep,
    "serve": _cmd_serve,
}


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except LatentProbeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

"""Boundary search: style-mix binary search, first-flip descent, salvage.

Three procedures over a render session:

* ``style_mix_search`` renders the source at each truncation budget and,
  for each rival class in confidence order, binary-searches the smallest
  mixing weight whose blend both flips the classifier and stays within
  the similarity screen of the budget render.
* ``first_flip_search`` descends a truncation schedule and returns the
  first budget at which the prediction leaves the source class.
* ``adaptive_salvage`` descends the adaptive schedule re-gating a seed
  that failed baseline acceptance, returning the largest budget that
  passes.

All procedures are deterministic given the session and arguments, and
every render they perform goes through the session so call accounting
and caching stay observable.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, Sequence

from latentprobe.backends.base import Image, Prediction, RenderSession
from latentprobe.errors import InvalidArgument
from latentprobe.gates import GateConfig, baseline_accept, screen
from latentprobe.latent import ADAPTIVE_SCHEDULE, LatentSeed, StyleCode, style_mix
from latentprobe.records import FrontierRecord, SalvageAttempt, SalvageResult
from latentprobe.store import image_id

#: Default binary-search step count; lambda resolution 2**-10 < 1e-3.
DEFAULT_MIX_STEPS = 10
#: Default layer set mixed by style_mix_search: the fine band of the toy
#: backend.  Real campaigns override per generator architecture.
DEFAULT_MIX_LAYERS: tuple[int, ...] = (6, 7)


class ImageSink(Protocol):
    """Persistence hook for search renders; returns the opaque image id."""

    def save_render(
        self, image: Image, *, seed_id: int, class_label: int,
        psi: float, lam: float | None = None,
    ) -> str: ...


class NullSink:
    """Computes content ids without persisting anything."""

    def save_render(
        self, image: Image, *, seed_id: int, class_label: int,
        psi: float, lam: float | None = None,
    ) -> str:
        return image_id(image)


@dataclass(frozen=True)
class RivalSet:
    """Non-source classes ordered by descending confidence."""

    rivals: tuple[tuple[int, float], ...]

    def __post_init__(self) -> None:
        confs = [c for _, c in self.rivals]
        if any(confs[i + 1] > confs[i] for i in range(len(confs) - 1)):
            raise InvalidArgument("rivals must be sorted by descending confidence")
        if any(c <= 0 for c in confs):
            raise InvalidArgument("rivals must have positive confidence")

    def classes(self) -> list[int]:
        return [r for r, _ in self.rivals]

    def __len__(self) -> int:
        return len(self.rivals)


def select_rivals(pred: Prediction, class_label: int, k: int) -> RivalSet:
    """Top-k non-source classes with non-zero probability.

    Confidence ties order by class index so the result is deterministic.
    """
    if k < 1:
        raise InvalidArgument(f"k must be >= 1, got {k}")
    candidates = [
        (int(c), float(p)) for c, p in enumerate(pred.probs)
        if c != class_label and p > 0.0
    ]
    candidates.sort(key=lambda cp: (-cp[1], cp[0]))
    return RivalSet(rivals=tuple(candidates[:k]))


def style_mix_search(
    seed: LatentSeed,
    session: RenderSession,
    budgets: Sequence[float],
    k: int,
    layers: Sequence[int],
    steps: int,
    config: GateConfig,
    sink: ImageSink | None = None,
    acceptance_psi: float = 1.0,
    recheck_each_budget: bool = True,
    rerank_per_budget: bool = False,
) -> list[FrontierRecord]:
    """Binary-search the smallest flipping-and-screening mix per budget.

    The caller guarantees the seed passed acceptance at
    ``acceptance_psi`` (1.0 for direct passes, the salvage budget for
    salvaged seeds).  Budgets above the acceptance point are skipped:
    the source is only known-valid from there down.

    Per budget: the source and the rival (same input latent, rival
    class) are truncated to the budget, rivals are tried in confidence
    order, and the bracket predicate is the conjunction "argmax flips
    away from the source class AND the mix passes the similarity screen
    against the budget render".  The bracket starts at [0, 1]; when the
    full substitution at lambda=1 fails the conjunction the rival yields
    no frontier.  After ``steps`` halvings the known-good upper end is
    returned.  The first rival that yields a frontier ends the budget;
    every budget is attempted.
    """
    if not budgets:
        raise InvalidArgument("budgets must be non-empty")
    if steps < 1:
        raise InvalidArgument(f"steps must be >= 1, got {steps}")
    sink = sink or NullSink()
    c = seed.class_label
    salvaged = acceptance_psi != 1.0

    ref_image, _ = session.render(seed, acceptance_psi)
    ref_pred = session.classify(ref_image)
    base_rivals = select_rivals(ref_pred, c, k)

    records: list[FrontierRecord] = []
    for b in budgets:
        if b > acceptance_psi:
            continue
        x_b, w_b = session.render(seed, b)
        pred_b = session.classify(x_b)
        if recheck_each_budget and not baseline_accept(pred_b, c, config).passed:
            continue
        rivals = select_rivals(pred_b, c, k) if rerank_per_budget else base_rivals
        x_b_id: str | None = None
        for rival, _conf in rivals.rivals:
            w_r = session.style_code(seed.with_class(rival), b)
            found = _mix_bisect(
                session, x_b, w_b, w_r, layers, steps, c, config,
            )
            if found is None:
                continue
            lam, x_lam, pred_lam, outcome = found
            if x_b_id is None:
                x_b_id = sink.save_render(x_b, seed_id=seed.seed_id, class_label=c, psi=b)
            cand_id = sink.save_render(
                x_lam, seed_id=seed.seed_id, class_label=c, psi=b, lam=lam)
            records.append(FrontierRecord(
                method="style_mix",
                seed_id=seed.seed_id,
                class_label=c,
                budget=float(b),
                rival=int(rival),
                lam=float(lam),
                source_image_id=x_b_id,
                candidate_image_id=cand_id,
                ssim=outcome.similarity.ssim,
                l2=outcome.similarity.l2,
                screen_passed=outcome.passed,
                failed_conditions=outcome.failed_conditions,
                probs_source=tuple(pred_b.probs),
                probs_candidate=tuple(pred_lam.probs),
                salvage_psi=acceptance_psi if salvaged else None,
            ))
            break
    return records


def _mix_bisect(
    session: RenderSession,
    x_b: Image,
    w_b: StyleCode,
    w_r: StyleCode,
    layers: Sequence[int],
    steps: int,
    class_label: int,
    config: GateConfig,
):
    """Bisect the flip-and-screen conjunction over the mix weight.

    Returns (lam, image, prediction, screen outcome) at the final upper
    bracket end, or None when the full substitution fails the
    conjunction.
    """

    def probe(lam: float):
        w_mix = style_mix(w_b, w_r, layers, lam)
        x = session.synthesize_mix(w_mix)
        pred = session.classify(x)
        outcome = screen(x_b, x, pred, class_label, config, intended_flip=True)
        ok = pred.top_class != class_label and outcome.passed
        return ok, x, pred, outcome

    ok, x_hi, pred_hi, out_hi = probe(1.0)
    if not ok:
        return None
    lo, hi = 0.0, 1.0
    for _ in range(steps):
        mid = (lo + hi) / 2.0
        ok, x, pred, outcome = probe(mid)
        if ok:
            hi, x_hi, pred_hi, out_hi = mid, x, pred, outcome
        else:
            lo = mid
    return hi, x_hi, pred_hi, out_hi


def first_flip_search(
    seed: LatentSeed,
    session: RenderSession,
    schedule: Sequence[float] = ADAPTIVE_SCHEDULE,
    cutoff: int | None = None,
    config: GateConfig | None = None,
    sink: ImageSink | None = None,
    acceptance_psi: float = 1.0,
) -> FrontierRecord | None:
    """Descend the schedule and record the first prediction flip.

    The reference render is the acceptance point (the untruncated
    baseline, or the salvage budget for salvaged seeds); schedule values
    above it are skipped.  A seed misclassified at the reference is
    skipped outright.  Rendering stops at the flip: no budget below the
    returned ``psi_star`` is rendered.  The similarity screen in the
    record is measured against the reference render.
    """
    if list(schedule) != sorted(schedule, reverse=True):
        raise InvalidArgument("schedule must be descending")
    sink = sink or NullSink()
    config = config or GateConfig()
    c = seed.class_label
    salvaged = acceptance_psi != 1.0

    ref_image, _ = session.render(seed, acceptance_psi, cutoff)
    ref_pred = session.classify(ref_image)
    if ref_pred.top_class != c:
        return None

    ref_id: str | None = None
    for psi in schedule:
        if psi > acceptance_psi:
            continue
        x_psi, _ = session.render(seed, psi, cutoff)
        pred = session.classify(x_psi)
        if pred.top_class == c:
            continue
        outcome = screen(ref_image, x_psi, pred, c, config, intended_flip=True)
        if ref_id is None:
            ref_id = sink.save_render(
                ref_image, seed_id=seed.seed_id, class_label=c, psi=acceptance_psi)
        cand_id = sink.save_render(
            x_psi, seed_id=seed.seed_id, class_label=c, psi=psi)
        return FrontierRecord(
            method="first_flip",
            seed_id=seed.seed_id,
            class_label=c,
            budget=float(acceptance_psi),
            psi_star=float(psi),
            source_image_id=ref_id,
            candidate_image_id=cand_id,
            ssim=outcome.similarity.ssim,
            l2=outcome.similarity.l2,
            screen_passed=outcome.passed,
            failed_conditions=outcome.failed_conditions,
            probs_source=tuple(ref_pred.probs),
            probs_candidate=tuple(pred.probs),
            salvage_psi=acceptance_psi if salvaged else None,
        )
    return None


def adaptive_salvage(
    seed: LatentSeed,
    session: RenderSession,
    config: GateConfig,
    schedule: Sequence[float] = ADAPTIVE_SCHEDULE,
    cutoff: int | None = None,
) -> SalvageResult:
    """Find the largest schedule budget at which a failing seed passes.

    Descends the schedule from the top (re-gating the baseline first, so
    the failure is on record), stopping at the first pass.  A seed that
    fails through the schedule floor is discarded (``psi_star`` None).
    """
    if list(schedule) != sorted(schedule, reverse=True):
        raise InvalidArgument("schedule must be descending")
    attempts: list[SalvageAttempt] = []
    psi_star: float | None = None
    for psi in schedule:
        x, _ = session.render(seed, psi, cutoff)
        pred = session.classify(x)
        outcome = baseline_accept(pred, seed.class_label, config)
        attempts.append(SalvageAttempt(
            psi=float(psi),
            passed=outcome.passed,
            failed_conditions=outcome.failed_conditions,
            top_class=pred.top_class,
            top_conf=pred.top_conf,
            margin=pred.margin,
        ))
        if outcome.passed:
            psi_star = float(psi)
            break
    return SalvageResult(
        seed_id=seed.seed_id,
        class_label=seed.class_label,
        psi_star=psi_star,
        attempts=tuple(attempts),
    )


def truncation_sweep(
    seed: LatentSeed,
    session: RenderSession,
    psis: Sequence[float],
    cutoffs: Sequence[int],
) -> list[list[Image]]:
    """Render the full budget-by-cutoff grid for inspection artifacts."""
    if not psis or not cutoffs:
        raise InvalidArgument("psis and cutoffs must be non-empty")
    grid: list[list[Image]] = []
    for psi in psis:
        row = []
        for cut in cutoffs:
            image, _ = session.render(seed, psi, cut)
            row.append(image)
        grid.append(row)
    return grid

"""Rate aggregation, verdict merging, and table rendering.

All printed rates are computed with exact integer arithmetic and
truncated (not rounded) to three significant figures, which is the only
rule that reproduces every published-style fixture row; validation rates
are exact percentages of the annotation quota.  The headline fault rate
divides fault-revealing validated inputs by seeds consumed; the
validated-denominator variant is reported alongside as an auxiliary
field.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from latentprobe.errors import InvalidArgument
from latentprobe.metrics import PerceptualEmbedder, PyramidEmbedder, mean_pairwise_diversity
from latentprobe.records import FrontierRecord

REPORT_SCHEMA_VERSION = 1

#: Canonical row order for settings within a technique.
SETTING_ORDER = (
    "No trunc.", "ψ=0.9", "ψ=0.8", "ψ=0.7", "ψ=0.6", "ψ=0.5",
    "Adaptive", "Gradual trunc.",
)
TECHNIQUE_ORDER = ("Style-Mixing", "Truncation-Only")

CSV_COLUMNS = (
    "Dataset", "Technique", "Setting", "Seeds", "Human-val",
    "Human-Val. Rate", "LPIPS", "Fault Rate", "Efficiency",
)


def truncate_sigfigs(numer: int, denom: int, sig: int = 3) -> str:
    """Exact ``numer/denom`` truncated to ``sig`` significant figures.

    Truncation, not rounding: 26.88 prints as 26.8.  Returns a plain
    decimal string with exactly ``sig`` significant digits (trailing
    zeros kept), or "0" when the value is zero.
    """
    if denom == 0:
        raise InvalidArgument("zero denominator")
    if numer == 0:
        return "0"
    if numer < 0 or denom < 0:
        raise InvalidArgument("rates are non-negative")
    value = Fraction(numer, denom)
    exponent = 0
    v = value
    while v >= 10:
        v /= 10
        exponent += 1
    while v < 1:
        v *= 10
        exponent -= 1
    quantum = exponent - sig + 1
    scaled = value / Fraction(10) ** quantum
    digits = scaled.numerator // scaled.denominator
    text = str(digits)
    if quantum >= 0:
        return text + "0" * quantum
    int_len = sig + quantum
    if int_len <= 0:
        return "0." + "0" * (-int_len) + text
    return text[:int_len] + "." + text[int_len:]


def percent_exact(numer: int, denom: int) -> str:
    """Percentage string; integer when exact, else 3 significant figures."""
    if denom == 0:
        raise InvalidArgument("zero denominator")
    frac = Fraction(100 * numer, denom)
    if frac.denominator == 1:
        return f"{frac.numerator}%"
    return truncate_sigfigs(100 * numer, denom) + "%"


@dataclass(frozen=True)
class Verdict:
    """One annotator's answer for one image."""

    image_id: str
    annotator_id: str
    answer: bool
    is_consensus: bool = False

    @classmethod
    def from_dict(cls, raw: dict) -> "Verdict":
        answer = raw["answer"]
        if isinstance(answer, str):
            answer = answer.lower() == "yes"
        return cls(
            image_id=raw["image_id"],
            annotator_id=raw["annotator_id"],
            answer=bool(answer),
            is_consensus=bool(raw.get("is_consensus", False)),
        )


def image_validity(verdicts: Sequence[Verdict]) -> tuple[bool, list[str]]:
    """Apply the two-annotator consensus rule to one image's verdicts.

    Valid iff both annotators answered yes; a disagreement is resolved
    by a consensus verdict when present, counted invalid and flagged
    unresolved otherwise.  Fewer than two regular verdicts flags the
    image as awaiting annotation.
    """
    regular: dict[str, bool] = {}
    consensus: list[Verdict] = []
    for v in verdicts:
        if v.is_consensus:
            consensus.append(v)
        else:
            regular[v.annotator_id] = v.answer
    if len(regular) < 2:
        return False, ["awaiting_annotation"]
    answers = list(regular.values())
    if all(answers):
        return True, []
    if not any(answers):
        return False, []
    if consensus:
        return consensus[-1].answer, []
    return False, ["unresolved_disagreement"]


@dataclass(frozen=True)
class SettingReport:
    """One report row plus the exact counts behind every printed value."""

    dataset: str
    technique: str
    setting: str
    seeds: int
    validated: int
    quota: int
    fault_validated: int
    val_rate: str
    diversity: float
    fault_rate: str
    fault_rate_over_validated: str
    efficiency: str
    flags: tuple[str, ...] = field(default_factory=tuple)

    def row(self) -> tuple:
        return (self.dataset, self.technique, self.setting, self.seeds,
                self.validated, self.val_rate, f"{self.diversity:.3f}",
                self.fault_rate, self.efficiency)


@dataclass(frozen=True)
class CampaignReport:
    """All setting rows plus the provenance block."""

    rows: tuple[SettingReport, ...]
    provenance: dict = field(default_factory=dict)

    def sorted_rows(self) -> list[SettingReport]:
        def key(r: SettingReport):
            ti = TECHNIQUE_ORDER.index(r.technique) if r.technique in TECHNIQUE_ORDER else 99
            si = SETTING_ORDER.index(r.setting) if r.setting in SETTING_ORDER else 99
            return (r.dataset, ti, si, r.setting)
        return sorted(self.rows, key=key)


def aggregate_rates(
    records: Sequence[FrontierRecord],
    verdicts: Sequence[Verdict],
    *,
    seeds_consumed: int,
    quota: int = 25,
    dataset: str = "",
    technique: str = "",
    setting: str = "",
    embedder: PerceptualEmbedder | None = None,
    load_pixels: Callable[[str], np.ndarray] | None = None,
) -> SettingReport:
    """Merge one setting's frontier records with annotator verdicts.

    Only screen-passing records are candidates for validation.  A
    record is validated when its candidate image's verdicts satisfy the
    consensus rule; records without verdicts count as not validated and
    flag the row.  Diversity is the mean pairwise perceptual distance
    over the distinct validated candidate images (0 when fewer than two,
    flagged).  Verdicts referencing unknown images are rejected.
    """
    screened = [r for r in records if r.screen_passed]
    known_ids = {r.candidate_image_id for r in records}
    dangling = sorted({v.image_id for v in verdicts} - known_ids)
    if dangling:
        raise InvalidArgument(f"verdicts reference unknown images: {dangling}")

    by_image: dict[str, list[Verdict]] = {}
    for v in verdicts:
        by_image.setdefault(v.image_id, []).append(v)

    flags: list[str] = []
    validated_records: list[FrontierRecord] = []
    validated_ids: list[str] = []
    for rec in screened:
        vs = by_image.get(rec.candidate_image_id, [])
        valid, rec_flags = image_validity(vs)
        for f in rec_flags:
            if f not in flags:
                flags.append(f)
        if valid:
            validated_records.append(rec)
            if rec.candidate_image_id not in validated_ids:
                validated_ids.append(rec.candidate_image_id)

    validated = len(validated_records)
    fault_validated = sum(1 for r in validated_records if r.is_fault)

    diversity = 0.0
    if len(validated_ids) >= 2 and load_pixels is not None:
        embedder = embedder or PyramidEmbedder()
        images = [load_pixels(iid) for iid in sorted(validated_ids)]
        diversity = mean_pairwise_diversity(images, embedder).value
    elif len(validated_ids) < 2:
        flags.append("diversity_undefined")

    if not records:
        flags.append("empty")

    fault_rate = truncate_sigfigs(100 * fault_validated, seeds_consumed) + "%" \
        if seeds_consumed else "n/a"
    aux = truncate_sigfigs(100 * fault_validated, validated) + "%" if validated else "n/a"
    efficiency = truncate_sigfigs(seeds_consumed, validated) if validated else "n/a"
    return SettingReport(
        dataset=dataset,
        technique=technique,
        setting=setting,
        seeds=seeds_consumed,
        validated=validated,
        quota=quota,
        fault_validated=fault_validated,
        val_rate=percent_exact(validated, quota),
        diversity=diversity,
        fault_rate=fault_rate,
        fault_rate_over_validated=aux,
        efficiency=efficiency,
        flags=tuple(flags),
    )


def merge_verdicts(
    logs: dict[tuple[str, str, str], tuple[Sequence[FrontierRecord], int]],
    verdicts: Sequence[Verdict],
    *,
    quota: int = 25,
    embedder: PerceptualEmbedder | None = None,
    load_pixels: Callable[[str], np.ndarray] | None = None,
    provenance: dict | None = None,
) -> CampaignReport:
    """Aggregate every setting's logs against one shared verdict pool.

    ``logs`` maps (dataset, technique, setting) to (records, seeds
    consumed).  Verdicts are routed to settings by image id; a verdict
    matching no setting at all is rejected.
    """
    all_ids: set[str] = set()
    for records, _ in logs.values():
        all_ids.update(r.candidate_image_id for r in records)
    dangling = sorted({v.image_id for v in verdicts} - all_ids)
    if dangling:
        raise InvalidArgument(f"verdicts reference unknown images: {dangling}")

    rows = []
    for (dataset, technique, setting), (records, seeds) in sorted(logs.items()):
        ids = {r.candidate_image_id for r in records}
        local = [v for v in verdicts if v.image_id in ids]
        rows.append(aggregate_rates(
            records, local,
            seeds_consumed=seeds, quota=quota,
            dataset=dataset, technique=technique, setting=setting,
            embedder=embedder, load_pixels=load_pixels,
        ))
    return CampaignReport(rows=tuple(rows), provenance=provenance or {})


def render_text(report: CampaignReport) -> str:
    """Aligned text table in canonical row and column order."""
    rows = [r.row() for r in report.sorted_rows()]
    header = CSV_COLUMNS
    table = [tuple(str(c) for c in row) for row in rows]
    widths = [max(len(header[i]), *(len(r[i]) for r in table)) if table else len(header[i])
              for i in range(len(header))]
    lines = [
        "  ".join(h.ljust(widths[i]) for i, h in enumerate(header)).rstrip(),
        "  ".join("-" * widths[i] for i in range(len(header))),
    ]
    for row in table:
        lines.append("  ".join(row[i].ljust(widths[i]) for i in range(len(row))).rstrip())
    if report.provenance:
        lines.append("")
        lines.append("provenance: " + json.dumps(report.provenance, sort_keys=True))
    return "\n".join(lines) + "\n"


def render_csv(report: CampaignReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in report.sorted_rows():
        writer.writerow([str(c) for c in r.row()])
    return buf.getvalue()

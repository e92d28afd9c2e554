"""Annotation domain logic, independent of any HTTP framework.

A study is a fixed set of blinded tasks (opaque image id + the class
the annotator judges it against) served to exactly two annotators, each
in an independent deterministic shuffle.  Verdicts append to an
immutable log; a disagreement between the two annotators is resolved by
one extra verdict flagged as consensus.
"""

from __future__ import annotations

import hashlib
import json
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

import numpy as np

from latentprobe.errors import InvalidArgument, LatentProbeError
from latentprobe.records import FrontierRecord

PAYLOAD_SCHEMA_VERSION = 1

#: Metadata substrings that must never appear in served payloads.
BLINDED_FIELDS = (
    "psi", "lambda", "lam", "technique", "method", "ssim", "l2",
    "budget", "rival", "salvage", "probs", "seed_id", "classifier",
)


class AuthError(LatentProbeError):
    """Unknown annotator or bad token."""


class NotFoundError(LatentProbeError):
    """Unknown image or task."""


class ConflictError(LatentProbeError):
    """Duplicate verdict without a consensus revision."""


@dataclass(frozen=True)
class AnnotationTask:
    """What an annotator sees: an opaque image and a class to judge."""

    image_id: str
    class_label: int
    presentation_order: int

    def to_payload(self) -> dict:
        return {
            "schema_version": PAYLOAD_SCHEMA_VERSION,
            "done": False,
            "image_id": self.image_id,
            "class_label": self.class_label,
            "presentation_order": self.presentation_order,
        }


@dataclass(frozen=True)
class StoredVerdict:
    """An accepted verdict; the log never mutates these."""

    image_id: str
    annotator_id: str
    answer: bool
    is_consensus: bool
    timestamp: str

    def to_dict(self) -> dict:
        return {
            "image_id": self.image_id,
            "annotator_id": self.annotator_id,
            "answer": "yes" if self.answer else "no",
            "is_consensus": self.is_consensus,
            "timestamp": self.timestamp,
        }


def shuffle_subseed(study_seed: int, annotator_id: str) -> int:
    """Deterministic per-annotator sub-seed, loggable and replayable."""
    digest = hashlib.sha256(f"{study_seed}:{annotator_id}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def shuffled_order(image_ids: Sequence[str], sub_seed: int) -> list[str]:
    """The annotator's presentation order: a seeded permutation."""
    rng = np.random.default_rng(sub_seed)
    ids = sorted(image_ids)
    return [ids[i] for i in rng.permutation(len(ids))]


class AnnotationStudy:
    """Fixed task set + two annotator identities + shuffle seed."""

    def __init__(self, tasks: dict[str, int], annotators: dict[str, str],
                 shuffle_seed: int = 0):
        if len(annotators) != 2:
            raise InvalidArgument("a study has exactly two annotators")
        if not tasks:
            raise InvalidArgument("a study needs at least one task")
        self.tasks = dict(tasks)
        self.annotators = dict(annotators)  # annotator_id -> token
        self.shuffle_seed = shuffle_seed
        self._orders = {
            a: shuffled_order(list(tasks), shuffle_subseed(shuffle_seed, a))
            for a in annotators
        }

    @classmethod
    def from_records(cls, records: Sequence[FrontierRecord],
                     annotators: dict[str, str], shuffle_seed: int = 0,
                     include_source: bool = False) -> "AnnotationStudy":
        """Tasks from screened frontier records: the flipped image only,
        plus the source render when ``include_source`` is set."""
        tasks: dict[str, int] = {}
        for rec in records:
            if not rec.screen_passed:
                continue
            tasks[rec.candidate_image_id] = rec.class_label
            if include_source:
                tasks[rec.source_image_id] = rec.class_label
        if not tasks:
            raise InvalidArgument("no screened records to annotate")
        return cls(tasks, annotators, shuffle_seed)

    def authenticate(self, annotator_id: str, token: str) -> None:
        expected = self.annotators.get(annotator_id)
        if expected is None or token != expected:
            raise AuthError(f"unknown annotator or bad token: {annotator_id!r}")

    def order_for(self, annotator_id: str) -> list[str]:
        if annotator_id not in self._orders:
            raise AuthError(f"unknown annotator: {annotator_id!r}")
        return list(self._orders[annotator_id])

    def sub_seed_for(self, annotator_id: str) -> int:
        if annotator_id not in self.annotators:
            raise AuthError(f"unknown annotator: {annotator_id!r}")
        return shuffle_subseed(self.shuffle_seed, annotator_id)


class VerdictStore:
    """Append-only verdict log, optionally persisted as JSON lines.

    Writes serialize through one lock; reads copy an immutable snapshot.
    """

    def __init__(self, study: AnnotationStudy, path: str | Path | None = None):
        self.study = study
        self.path = Path(path) if path is not None else None
        self._verdicts: list[StoredVerdict] = []
        self._lock = threading.Lock()
        if self.path is not None and self.path.exists():
            for line in self.path.read_text().splitlines():
                if line.strip():
                    raw = json.loads(line)
                    self._verdicts.append(StoredVerdict(
                        image_id=raw["image_id"],
                        annotator_id=raw["annotator_id"],
                        answer=raw["answer"] == "yes",
                        is_consensus=bool(raw.get("is_consensus", False)),
                        timestamp=raw["timestamp"],
                    ))

    # -- queries ----------------------------------------------------------

    def snapshot(self) -> list[StoredVerdict]:
        with self._lock:
            return list(self._verdicts)

    def _answers_for(self, image_id: str,
                     verdicts: Sequence[StoredVerdict]) -> dict[str, bool]:
        return {v.annotator_id: v.answer for v in verdicts
                if v.image_id == image_id and not v.is_consensus}

    def has_disagreement(self, image_id: str) -> bool:
        answers = self._answers_for(image_id, self.snapshot())
        return len(answers) == 2 and len(set(answers.values())) == 2

    def has_consensus(self, image_id: str) -> bool:
        return any(v.image_id == image_id and v.is_consensus
                   for v in self.snapshot())

    def next_task(self, annotator_id: str) -> AnnotationTask | None:
        """First unanswered task in the annotator's shuffle; None when done."""
        order = self.study.order_for(annotator_id)
        answered = {v.image_id for v in self.snapshot()
                    if v.annotator_id == annotator_id and not v.is_consensus}
        for idx, image_id in enumerate(order):
            if image_id not in answered:
                return AnnotationTask(
                    image_id=image_id,
                    class_label=self.study.tasks[image_id],
                    presentation_order=idx,
                )
        return None

    def next_consensus_task(self, annotator_id: str) -> AnnotationTask | None:
        """First disagreed image without a consensus verdict, in the
        annotator's shuffle order."""
        order = self.study.order_for(annotator_id)
        snapshot = self.snapshot()
        resolved = {v.image_id for v in snapshot if v.is_consensus}
        for idx, image_id in enumerate(order):
            answers = self._answers_for(image_id, snapshot)
            if (len(answers) == 2 and len(set(answers.values())) == 2
                    and image_id not in resolved):
                return AnnotationTask(
                    image_id=image_id,
                    class_label=self.study.tasks[image_id],
                    presentation_order=idx,
                )
        return None

    def progress(self) -> dict:
        """Per-annotator counts, per class, plus consensus state."""
        snapshot = self.snapshot()
        by_class_total: dict[int, int] = {}
        for label in self.study.tasks.values():
            by_class_total[label] = by_class_total.get(label, 0) + 1
        annotators = {}
        for a in sorted(self.study.annotators):
            answered = [v for v in snapshot
                        if v.annotator_id == a and not v.is_consensus]
            by_class: dict[str, dict[str, int]] = {}
            for label in sorted(by_class_total):
                done = sum(1 for v in answered
                           if self.study.tasks[v.image_id] == label)
                by_class[str(label)] = {"answered": done,
                                        "total": by_class_total[label]}
            annotators[a] = {
                "answered": len(answered),
                "total": len(self.study.tasks),
                "by_class": by_class,
                "sub_seed": self.study.sub_seed_for(a),
            }
        disagreements = sorted(
            iid for iid in self.study.tasks
            if self.has_disagreement(iid)
        )
        pending = [iid for iid in disagreements if not self.has_consensus(iid)]
        return {
            "schema_version": PAYLOAD_SCHEMA_VERSION,
            "annotators": annotators,
            "disagreements": disagreements,
            "consensus_pending": pending,
        }

    def export(self) -> dict:
        """All verdicts in canonical order; a pure function of the log."""
        body = sorted(
            (v.to_dict() for v in self.snapshot()),
            key=lambda d: (d["image_id"], d["annotator_id"], d["is_consensus"]),
        )
        return {"schema_version": PAYLOAD_SCHEMA_VERSION, "verdicts": body}

    # -- commands ---------------------------------------------------------

    def submit(self, image_id: str, annotator_id: str, answer: bool,
               is_consensus: bool = False) -> StoredVerdict:
        """Append one verdict, enforcing the duplicate and consensus rules."""
        if annotator_id not in self.study.annotators:
            raise AuthError(f"unknown annotator: {annotator_id!r}")
        if image_id not in self.study.tasks:
            raise NotFoundError(f"unknown image: {image_id!r}")
        with self._lock:
            if is_consensus:
                answers = self._answers_for(image_id, self._verdicts)
                if len(answers) != 2 or len(set(answers.values())) != 2:
                    raise ConflictError(
                        "consensus verdict requires a prior disagreement")
                if any(v.image_id == image_id and v.is_consensus
                       for v in self._verdicts):
                    raise ConflictError("image already has a consensus verdict")
            else:
                dup = any(
                    v.image_id == image_id and v.annotator_id == annotator_id
                    and not v.is_consensus
                    for v in self._verdicts
                )
                if dup:
                    raise ConflictError(
                        f"{annotator_id!r} already answered {image_id!r}")
            verdict = StoredVerdict(
                image_id=image_id,
                annotator_id=annotator_id,
                answer=answer,
                is_consensus=is_consensus,
                timestamp=datetime.now(timezone.utc).isoformat(),
            )
            self._verdicts.append(verdict)
            if self.path is not None:
                with self.path.open("a") as fh:
                    fh.write(json.dumps(verdict.to_dict(), sort_keys=True) + "\n")
        return verdict

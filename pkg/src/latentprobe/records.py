"""Search result records and their JSON log format.

Frontier records capture one boundary candidate: the truncated source
render, the candidate render (mixed or further-truncated), the search
coordinates that produced it, and the gate readings taken at record
time.  Salvage results capture the per-budget gate attempts for seeds
that failed baseline acceptance.  Log files are JSON arrays wrapped in a
schema-versioned envelope, sorted by (seed_id, method, budget) so equal
campaigns serialize byte-identically.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from latentprobe.errors import InvalidArgument

RECORD_SCHEMA_VERSION = 1

METHODS = ("style_mix", "first_flip", "adaptive_salvage")


@dataclass(frozen=True)
class FrontierRecord:
    """One recorded boundary candidate with its provenance and readings."""

    method: str
    seed_id: int
    class_label: int
    budget: float
    source_image_id: str
    candidate_image_id: str
    ssim: float
    l2: float
    screen_passed: bool
    failed_conditions: tuple[str, ...]
    probs_source: tuple[float, ...]
    probs_candidate: tuple[float, ...]
    rival: int | None = None
    lam: float | None = None
    psi_star: float | None = None
    salvage_psi: float | None = None

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise InvalidArgument(f"unknown method {self.method!r}")
        if self.method == "style_mix":
            if self.rival is None or self.lam is None:
                raise InvalidArgument("style_mix records need rival and lam")
            if not 0.0 <= self.lam <= 1.0:
                raise InvalidArgument(f"lam must lie in [0,1], got {self.lam}")
        if self.method == "first_flip" and self.psi_star is None:
            raise InvalidArgument("first_flip records need psi_star")
        if not 0.0 < self.budget <= 1.0:
            raise InvalidArgument(f"budget must lie in (0,1], got {self.budget}")
        object.__setattr__(self, "failed_conditions", tuple(self.failed_conditions))
        object.__setattr__(self, "probs_source", tuple(float(p) for p in self.probs_source))
        object.__setattr__(
            self, "probs_candidate", tuple(float(p) for p in self.probs_candidate)
        )

    @property
    def predicted_class(self) -> int:
        """Candidate argmax; ties break toward the lowest index."""
        probs = self.probs_candidate
        return max(range(len(probs)), key=lambda i: (probs[i], -i))

    @property
    def is_fault(self) -> bool:
        """True when the candidate's prediction differs from the source class."""
        return self.predicted_class != self.class_label

    def sort_key(self) -> tuple:
        return (self.seed_id, self.method, self.budget, self.rival or -1)


@dataclass(frozen=True)
class SalvageAttempt:
    """One gate evaluation at a schedule budget during salvage."""

    psi: float
    passed: bool
    failed_conditions: tuple[str, ...]
    top_class: int
    top_conf: float
    margin: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "failed_conditions", tuple(self.failed_conditions))


@dataclass(frozen=True)
class SalvageResult:
    """Outcome of descending the adaptive schedule for a failing seed.

    ``psi_star`` is the first (largest) schedule value whose gate passed,
    or None when the seed fails through the floor and is discarded.
    """

    seed_id: int
    class_label: int
    psi_star: float | None
    attempts: tuple[SalvageAttempt, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        object.__setattr__(self, "attempts", tuple(self.attempts))
        if self.psi_star is not None:
            passing = [a.psi for a in self.attempts if a.passed]
            if not passing or self.psi_star != passing[0]:
                raise InvalidArgument("psi_star must be the first passing attempt")


def records_to_json(records: list[FrontierRecord]) -> str:
    body = [asdict(r) for r in sorted(records, key=lambda r: r.sort_key())]
    return json.dumps(
        {"schema_version": RECORD_SCHEMA_VERSION, "records": body},
        indent=2, sort_keys=True,
    ) + "\n"


def records_from_json(text: str) -> list[FrontierRecord]:
    payload = json.loads(text)
    if payload.get("schema_version") != RECORD_SCHEMA_VERSION:
        raise InvalidArgument(
            f"unsupported record schema version {payload.get('schema_version')!r}"
        )
    out = []
    for raw in payload["records"]:
        raw = dict(raw)
        for key in ("failed_conditions", "probs_source", "probs_candidate"):
            raw[key] = tuple(raw[key])
        out.append(FrontierRecord(**raw))
    return out


def salvage_to_json(results: list[SalvageResult]) -> str:
    body = [asdict(r) for r in sorted(results, key=lambda r: (r.seed_id, r.class_label))]
    return json.dumps(
        {"schema_version": RECORD_SCHEMA_VERSION, "salvage": body},
        indent=2, sort_keys=True,
    ) + "\n"


def salvage_from_json(text: str) -> list[SalvageResult]:
    payload = json.loads(text)
    if payload.get("schema_version") != RECORD_SCHEMA_VERSION:
        raise InvalidArgument(
            f"unsupported record schema version {payload.get('schema_version')!r}"
        )
    out = []
    for raw in payload["salvage"]:
        attempts = tuple(
            SalvageAttempt(**{**a, "failed_conditions": tuple(a["failed_conditions"])})
            for a in raw["attempts"]
        )
        out.append(SalvageResult(
            seed_id=raw["seed_id"], class_label=raw["class_label"],
            psi_star=raw["psi_star"], attempts=attempts,
        ))
    return out


def write_records(path: str | Path, records: list[FrontierRecord]) -> None:
    Path(path).write_text(records_to_json(records))


def read_records(path: str | Path) -> list[FrontierRecord]:
    return records_from_json(Path(path).read_text())

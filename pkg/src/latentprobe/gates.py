"""Acceptance gating: baseline seed acceptance and candidate screening.

The baseline gate admits a seed when its untruncated render is
confidently and unambiguously classified as its source class.  The
screen admits a candidate when it stays perceptually close to its
reference render; candidates that are intended flips skip the classifier
component (flipping is the point), which the outcome records as
not-applicable rather than as a pass.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from latentprobe.backends.base import Image, Prediction
from latentprobe.errors import InvalidArgument
from latentprobe.metrics import SimilarityReading, measure_similarity

#: Screening thresholds fixed across datasets.
DEFAULT_TAU_SSIM = 0.95
DEFAULT_TAU_L2 = 0.2
#: Baseline confidence and margin requirements (strict by default).
DEFAULT_P_MIN = 0.90
DEFAULT_DELTA = 0.50

WRONG_CLASS = "wrong_class"
LOW_CONFIDENCE = "low_confidence"
LOW_MARGIN = "low_margin"
LOW_SSIM = "low_ssim"
HIGH_L2 = "high_l2"

CONDITIONS = (WRONG_CLASS, LOW_CONFIDENCE, LOW_MARGIN, LOW_SSIM, HIGH_L2)


@dataclass(frozen=True)
class GateConfig:
    """Thresholds for baseline acceptance and candidate screening."""

    p_min: float = DEFAULT_P_MIN
    delta: float = DEFAULT_DELTA
    tau_ssim: float = DEFAULT_TAU_SSIM
    tau_l2: float = DEFAULT_TAU_L2

    def __post_init__(self) -> None:
        if not 0.0 < self.p_min < 1.0:
            raise InvalidArgument(f"p_min must lie in (0,1), got {self.p_min}")
        if not 0.0 <= self.delta < 1.0:
            raise InvalidArgument(f"delta must lie in [0,1), got {self.delta}")
        if not 0.0 < self.tau_ssim <= 1.0:
            raise InvalidArgument(f"tau_ssim must lie in (0,1], got {self.tau_ssim}")
        if self.tau_l2 < 0.0:
            raise InvalidArgument(f"tau_l2 must be >= 0, got {self.tau_l2}")

    def to_dict(self) -> dict:
        return {"p_min": self.p_min, "delta": self.delta,
                "tau_ssim": self.tau_ssim, "tau_l2": self.tau_l2}

    @classmethod
    def from_dict(cls, raw: dict) -> "GateConfig":
        return cls(**{k: float(raw[k]) for k in ("p_min", "delta", "tau_ssim", "tau_l2")})


@dataclass(frozen=True)
class GateOutcome:
    """Result of one gate evaluation.

    ``passed`` is true exactly when ``failed_conditions`` is empty.
    ``classifier_gate_applied`` is false for intended-flip screening,
    where the classifier component is not applicable.
    """

    passed: bool
    failed_conditions: tuple[str, ...]
    prediction: Prediction | None = None
    similarity: SimilarityReading | None = None
    classifier_gate_applied: bool = True

    def __post_init__(self) -> None:
        conds = tuple(self.failed_conditions)
        for cond in conds:
            if cond not in CONDITIONS:
                raise InvalidArgument(f"unknown gate condition {cond!r}")
        if self.passed != (len(conds) == 0):
            raise InvalidArgument("passed must equal failed_conditions being empty")
        object.__setattr__(self, "failed_conditions", conds)


def baseline_accept(pred: Prediction, class_label: int, config: GateConfig) -> GateOutcome:
    """Gate a source render: correct argmax, confident, unambiguous."""
    failed = []
    if pred.top_class != class_label:
        failed.append(WRONG_CLASS)
    if pred.top_conf < config.p_min:
        failed.append(LOW_CONFIDENCE)
    if pred.margin < config.delta:
        failed.append(LOW_MARGIN)
    return GateOutcome(passed=not failed, failed_conditions=tuple(failed), prediction=pred)


def screen(
    x_ref: Image,
    x_cand: Image,
    pred_cand: Prediction,
    class_label: int,
    config: GateConfig,
    intended_flip: bool = True,
) -> GateOutcome:
    """Gate a candidate render against its reference.

    Similarity passes iff ssim >= tau_ssim and l2 <= tau_l2 (closed
    thresholds: equality passes).  When the candidate is an intended
    flip, only similarity applies; otherwise the candidate must also
    satisfy the source acceptance conditions.
    """
    reading = measure_similarity(x_ref, x_cand)
    failed = []
    if reading.ssim < config.tau_ssim:
        failed.append(LOW_SSIM)
    if reading.l2 > config.tau_l2:
        failed.append(HIGH_L2)
    applied = not intended_flip
    if applied:
        base = baseline_accept(pred_cand, class_label, config)
        failed.extend(base.failed_conditions)
    return GateOutcome(
        passed=not failed,
        failed_conditions=tuple(failed),
        prediction=pred_cand,
        similarity=reading,
        classifier_gate_applied=applied,
    )

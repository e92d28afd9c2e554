"""Human-validation service: blinded tasks, verdicts, consensus."""

from latentprobe.annotation.service import (
    AnnotationStudy,
    AnnotationTask,
    AuthError,
    ConflictError,
    NotFoundError,
    StoredVerdict,
    VerdictStore,
)

__all__ = [
    "AnnotationStudy",
    "AnnotationTask",
    "AuthError",
    "ConflictError",
    "NotFoundError",
    "StoredVerdict",
    "VerdictStore",
]

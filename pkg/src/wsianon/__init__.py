"""In-place anonymization of whole-slide images in their native formats."""

from .byteio import FileStore, MemoryStore, StreamSession
from .detect import VendorFormat, describe_formats, profile, sniff_path
from .engine import (
    AnonymizationConfig,
    AuditOutcome,
    PolicyLevel,
    Report,
    anonymize_bytes,
    anonymize_path,
    audit_path,
    detect_path,
    open_slide,
)
from .errors import (
    CorruptContainer,
    CorruptStructure,
    IoFailure,
    LabelNotSeparable,
    OutOfBounds,
    PlanConflict,
    ReplacementConstraintViolation,
    SessionFinalized,
    TagAbsent,
    UnsupportedFormat,
    WsiAnonError,
)

__version__ = "0.1.0"

__all__ = [
    "AnonymizationConfig",
    "AuditOutcome",
    "CorruptContainer",
    "CorruptStructure",
    "FileStore",
    "IoFailure",
    "LabelNotSeparable",
    "MemoryStore",
    "OutOfBounds",
    "PlanConflict",
    "PolicyLevel",
    "Report",
    "ReplacementConstraintViolation",
    "SessionFinalized",
    "StreamSession",
    "TagAbsent",
    "UnsupportedFormat",
    "VendorFormat",
    "WsiAnonError",
    "anonymize_bytes",
    "anonymize_path",
    "audit_path",
    "describe_formats",
    "detect_path",
    "open_slide",
    "profile",
    "sniff_path",
    "__version__",
]

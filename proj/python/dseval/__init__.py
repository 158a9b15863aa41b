"""Evaluation harness for data-science agents (Python front end of the C++ core)."""

from ._dseval import (
    ConfigError,
    Error,
    IntegrityError,
    KernelError,
    ParseError,
    ProvisionError,
    Session,
    Snapshot,
    TransportError,
    aggregate_metrics,
    analyze,
    annotate,
    check_integrity,
    normalize_problemset,
    parse_problemset,
    parse_problemset_text,
    run,
    score_difficulty,
    verdict_leaves,
)

__all__ = [
    "ConfigError",
    "Error",
    "IntegrityError",
    "KernelError",
    "ParseError",
    "ProvisionError",
    "Session",
    "Snapshot",
    "TransportError",
    "aggregate_metrics",
    "analyze",
    "annotate",
    "check_integrity",
    "normalize_problemset",
    "parse_problemset",
    "parse_problemset_text",
    "run",
    "score_difficulty",
    "verdict_leaves",
]

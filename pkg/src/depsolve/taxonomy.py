"""Failure-log classification: an ordered, first-match pattern taxonomy.

Eleven classes, scanned in a fixed order; the first class whose pattern fires
wins, so pattern order is load-bearing (a Python 2 ``ImportError: No module
named x`` line must classify as a missing module, not a generic import
error). Logs nothing matches go to the model gateway, whose answer must name
one of the eleven classes; anything else lands in the environment fallback.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum

__all__ = ["ClassifiedError", "ErrorType", "classification_table", "classify", "classify_with_table"]


class ErrorType(str, Enum):
    VersionNotFound = "VersionNotFound"
    DependencyConflict = "DependencyConflict"
    ModuleNotFound = "ModuleNotFound"
    ImportError_ = "ImportError"
    SyntaxError_ = "SyntaxError"
    NonZeroCode = "NonZeroCode"
    AttributeError_ = "AttributeError"
    SystemLibError = "SystemLibError"
    ContainerTimeout = "ContainerTimeout"
    EnvironmentErrorFallback = "EnvironmentErrorFallback"
    ExecutionError = "ExecutionError"

    def __str__(self) -> str:  # report documents carry the bare class name
        return self.value


_BY_NAME = {e.value: e for e in ErrorType}


@dataclass(frozen=True)
class ClassifiedError:
    type: ErrorType
    package: str | None = None
    version: str | None = None
    specifier: str | None = None
    module: str | None = None
    lib: str | None = None
    detail: str | None = None
    pattern: str | None = None  # provenance: which regex fired


_NAME = r"[A-Za-z0-9][A-Za-z0-9._\-]*"
_SPEC = r"(?:===|==|!=|<=|>=|~=|<|>)\S*"


def _p(regex: str, **fields: str):
    return re.compile(regex), fields


# Per-class pattern lists, scanned in class order then pattern order. The
# field mapping names which capture group feeds which payload slot.
_TABLE: list[tuple[ErrorType, list]] = [
    (
        ErrorType.VersionNotFound,
        [
            _p(rf"No matching distribution found for ({_NAME})==([\w.!+*]+)", package="1", version="2"),
            _p(rf"Could not find a version that satisfies the requirement ({_NAME})==([\w.!+*]+)", package="1", version="2"),
            _p(rf"No matching distribution found for ({_NAME})", package="1"),
        ],
    ),
    (
        ErrorType.DependencyConflict,
        [
            _p(rf"requires ({_NAME})\s*({_SPEC})", package="1", specifier="2"),
            _p(r"because these package versions have conflicting dependencies"),
            _p(r"ResolutionImpossible"),
        ],
    ),
    (
        ErrorType.ModuleNotFound,
        [
            _p(r"ModuleNotFoundError: No module named '([\w.]+)'", module="1"),
            _p(r"ImportError: No module named ['\"]?([\w.]+)['\"]?", module="1"),
        ],
    ),
    (
        ErrorType.ImportError_,
        [
            _p(r"ImportError: cannot import name ['\"]?([\w.]+)['\"]?(?: from ['\"]?([\w.]+)['\"]?)?", detail="1", module="2"),
            # legacy phrasing, normally claimed by the missing-module class above
            _p(r"ImportError: No module named ['\"]?([\w.]+)['\"]?", module="1"),
            _p(r"ImportError: dynamic module does not define", detail="0"),
        ],
    ),
    (
        ErrorType.SyntaxError_,
        [
            _p(r"SyntaxError: (.+)", detail="1"),
            _p(r"IndentationError: (.+)", detail="1"),
            _p(r"TabError: (.+)", detail="1"),
        ],
    ),
    (
        ErrorType.NonZeroCode,
        [
            _p(rf"Failed building wheel for ({_NAME})", package="1"),
            _p(rf"Running setup\.py install for ({_NAME}) .*error", package="1"),
            _p(r"error: command '([^']+)' failed", detail="1"),
            _p(r"subprocess-exited-with-error"),
            _p(r"returned non-zero exit status (\d+)", detail="1"),
            _p(r"exited with (?:status|code) (\d+)", detail="1"),
        ],
    ),
    (
        ErrorType.AttributeError_,
        [
            _p(r"AttributeError: module '([\w.]+)' has no attribute '(\w+)'", module="1", detail="2"),
            _p(r"AttributeError: '([\w.]+)' (?:object|instance) has no attribute '(\w+)'", module="1", detail="2"),
            _p(r"AttributeError: (.+)", detail="1"),
        ],
    ),
    (
        ErrorType.SystemLibError,
        [
            _p(r"([\w.+\-]+\.so(?:\.\d+)*): cannot open shared object file", lib="1"),
            _p(r"error while loading shared libraries:\s*([^:\s]+)", lib="1"),
            _p(r"fatal error: ([\w./\-]+\.h): No such file or directory", lib="1"),
            _p(r"Unable to locate package ([\w.+\-]+)", lib="1"),
        ],
    ),
    (
        ErrorType.ContainerTimeout,
        [
            _p(r"Timeout: (?:build|run) exceeded \d+\s*s"),
            _p(r"timed out after \d+"),
            _p(r"Read timed out"),
        ],
    ),
    (
        ErrorType.EnvironmentErrorFallback,
        [
            _p(r"PermissionError: \[Errno \d+\]", detail="0"),
            _p(r"OSError: \[Errno \d+\] (.+)", detail="1"),
            _p(r"EnvironmentError", detail="0"),
        ],
    ),
    (
        ErrorType.ExecutionError,
        [
            _p(r"Traceback \(most recent call last\)"),
            _p(r"Segmentation fault"),
            _p(r"MemoryError"),
            _p(r"\bKilled\b"),
        ],
    ),
]


def classification_table() -> list[tuple[ErrorType, list]]:
    """A copy of the ordered pattern table (tests permute it)."""
    return [(etype, list(patterns)) for etype, patterns in _TABLE]


def classify_with_table(log: str, table, llm=None) -> ClassifiedError:
    for etype, patterns in table:
        for regex, fields in patterns:
            m = regex.search(log)
            if m is None:
                continue
            payload = {}
            for slot, group in fields.items():
                value = m.group(0) if group == "0" else m.group(int(group))
                if value is not None:
                    payload[slot] = value.rstrip(".,;")
            return ClassifiedError(type=etype, pattern=regex.pattern, **payload)
    if llm is not None:
        answer = llm.ask("error_class", log[:2000])
        if answer in _BY_NAME:
            return ClassifiedError(type=_BY_NAME[answer], pattern="llm")
    return ClassifiedError(type=ErrorType.EnvironmentErrorFallback, pattern="fallback")


def classify(log: str, llm=None) -> ClassifiedError:
    """Ordered first-match scan over the default table, with model fallback
    for unmatched logs."""
    return classify_with_table(log, _TABLE, llm)

"""The supported interpreter table shared by analysis, planning, and repair."""

from __future__ import annotations

SUPPORTED_PYTHONS = ("2.7", "3.6", "3.7", "3.8", "3.9", "3.10", "3.11", "3.12")

# Debian Buster images whose default apt mirrors have been retired.
EOL_PYTHONS = frozenset({"2.7", "3.6", "3.7"})

# Used when no syntax feature decides a minimum version.
FALLBACK_CANDIDATES = ("2.7", "3.6", "3.8", "3.9")


def python3_versions_at_least(minimum: str) -> tuple[str, ...]:
    """All supported 3.x interpreters >= ``minimum``, ascending."""
    floor = tuple(int(p) for p in minimum.split("."))
    out = []
    for v in SUPPORTED_PYTHONS:
        if v.startswith("3.") and tuple(int(p) for p in v.split(".")) >= floor:
            out.append(v)
    return tuple(out)

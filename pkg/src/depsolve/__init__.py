"""Deterministic dependency resolution for orphaned Python snippets."""

from .pipeline import Config, CorpusSummary, ResolutionReport, resolve_snippet, run_corpus

__version__ = "0.1.0"

__all__ = [
    "Config",
    "CorpusSummary",
    "ResolutionReport",
    "__version__",
    "resolve_snippet",
    "run_corpus",
]

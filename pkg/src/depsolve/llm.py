"""Single chokepoint for model interactions.

Three query kinds exist: dependency imputation for metadata-less releases,
alias resolution for unmappable imports, and error-class fallback for logs no
pattern matches. Answers are cached by prompt digest; only cache-missing
round trips count toward the per-snippet call metric. The stub backend makes
the whole pipeline bit-deterministic.
"""

from __future__ import annotations

import hashlib
import json
import urllib.error
import urllib.request
from dataclasses import dataclass
from pathlib import Path

from .exceptions import LlmUnavailable, MalformedName, MalformedSpecifier
from .versions import SpecifierSet, normalize_name, parse_requirement

__all__ = ["LlmGateway", "LlmQuery", "LlmUsage", "LiveBackend", "StubBackend"]

PROMPT_TEMPLATES = {
    "impute_deps": (
        "What are the direct pip-install dependencies of {subject}? "
        "Answer with one requirement per line (name plus optional version "
        "specifier), or the single word NONE."
    ),
    "alias": (
        "Which package on the Python package index provides the import "
        "'{subject}'? Answer with the distribution name only."
    ),
    "error_class": (
        "Classify this Python build or run failure log as exactly one of: "
        "VersionNotFound, DependencyConflict, ModuleNotFound, ImportError, "
        "SyntaxError, NonZeroCode, AttributeError, SystemLibError, "
        "ContainerTimeout, EnvironmentErrorFallback, ExecutionError. "
        "Answer with the class name only.\n\nLog:\n{subject}"
    ),
}


@dataclass(frozen=True)
class LlmQuery:
    kind: str
    subject: str
    rendered_prompt: str

    @classmethod
    def build(cls, kind: str, subject: str) -> "LlmQuery":
        if kind not in PROMPT_TEMPLATES:
            raise ValueError(f"unknown query kind {kind!r}")
        return cls(kind, subject, PROMPT_TEMPLATES[kind].format(subject=subject))

    @property
    def digest(self) -> str:
        # the template text participates, so editing a template invalidates
        # its cache namespace automatically
        material = f"{PROMPT_TEMPLATES[self.kind]}|{self.kind}|{self.subject}"
        return hashlib.sha256(material.encode("utf-8")).hexdigest()


@dataclass
class LlmUsage:
    calls: int = 0
    cache_hits: int = 0


class StubBackend:
    """Deterministic fixture-keyed answers: ``{"kind:subject": "answer"}``.

    Unknown keys answer the empty string, which parses to the kind's empty
    value downstream.
    """

    def __init__(self, answers: dict[str, str] | None = None):
        self.answers = dict(answers or {})

    @classmethod
    def from_file(cls, path: str | Path) -> "StubBackend":
        return cls(json.loads(Path(path).read_text()))

    def complete(self, query: LlmQuery) -> str:
        return self.answers.get(f"{query.kind}:{query.subject}", "")


class LiveBackend:
    """Chat-completion client for a local model server."""

    def __init__(self, url: str, model: str = "gemma2:9b", temperature: float = 0.1):
        self.url = url.rstrip("/")
        self.model = model
        self.temperature = temperature

    def complete(self, query: LlmQuery) -> str:
        payload = json.dumps(
            {
                "model": self.model,
                "temperature": self.temperature,
                "messages": [{"role": "user", "content": query.rendered_prompt}],
                "stream": False,
            }
        ).encode("utf-8")
        req = urllib.request.Request(
            f"{self.url}/v1/chat/completions",
            data=payload,
            headers={"Content-Type": "application/json"},
        )
        try:
            with urllib.request.urlopen(req, timeout=120) as resp:
                doc = json.loads(resp.read().decode("utf-8"))
        except (urllib.error.URLError, OSError) as exc:
            raise LlmUnavailable(str(exc)) from exc
        try:
            return doc["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError):
            return ""


class LlmGateway:
    """Caching front for a backend, with per-snippet usage accounting."""

    def __init__(self, backend, cache_path: str | Path | None = None):
        self.backend = backend
        self.cache_path = Path(cache_path) if cache_path else None
        self._cache: dict[str, tuple[str, str]] = {}  # digest -> (kind, answer)
        self._usage: dict[str, LlmUsage] = {}
        self._snippet = "_"
        if self.cache_path is not None and self.cache_path.exists():
            self._load_cache()

    def begin_snippet(self, snippet_id: str) -> None:
        self._snippet = snippet_id
        self._usage.setdefault(snippet_id, LlmUsage())

    def usage(self, snippet_id: str) -> LlmUsage:
        return self._usage.setdefault(snippet_id, LlmUsage())

    def ask(self, kind: str, subject: str):
        query = LlmQuery.build(kind, subject)
        counters = self._usage.setdefault(self._snippet, LlmUsage())
        cached = self._cache.get(query.digest)
        if cached is not None:
            counters.cache_hits += 1
            return self._parse(kind, cached[1])
        answer = self.backend.complete(query)
        counters.calls += 1
        self._cache[query.digest] = (kind, answer)
        if self.cache_path is not None:
            self._save_cache()
        return self._parse(kind, answer)

    # -- cache persistence: digest<TAB>kind<TAB>json-answer, sorted ----------

    def _load_cache(self) -> None:
        for line in self.cache_path.read_text().splitlines():
            parts = line.split("\t", 2)
            if len(parts) != 3:
                continue
            digest, kind, encoded = parts
            try:
                self._cache[digest] = (kind, json.loads(encoded))
            except json.JSONDecodeError:
                continue

    def _save_cache(self) -> None:
        lines = [
            f"{digest}\t{kind}\t{json.dumps(answer)}"
            for digest, (kind, answer) in sorted(self._cache.items())
        ]
        self.cache_path.parent.mkdir(parents=True, exist_ok=True)
        self.cache_path.write_text("\n".join(lines) + ("\n" if lines else ""))

    # -- answer parsing -------------------------------------------------------

    @staticmethod
    def _parse(kind: str, answer: str):
        answer = (answer or "").strip()
        if kind == "alias":
            if not answer or len(answer.split()) > 1:
                return ""
            try:
                normalize_name(answer)
            except MalformedName:
                return ""
            return answer.strip("'\"`")
        if kind == "error_class":
            return answer.split()[0].strip(".,'\"") if answer else ""
        if kind == "impute_deps":
            if not answer or answer.upper() == "NONE":
                return []
            deps: list[tuple[str, SpecifierSet]] = []
            for chunk in answer.replace(",", "\n").splitlines():
                chunk = chunk.strip(" -*\t")
                if not chunk:
                    continue
                try:
                    req = parse_requirement(chunk)
                except (MalformedSpecifier, MalformedName):
                    continue
                deps.append((req.name, req.specifier))
            return deps
        raise ValueError(f"unknown query kind {kind!r}")

"""Static snippet analysis: third-party import extraction and interpreter
version inference.

Works on arbitrary text blobs; sources that no longer parse as Python 3 fall
back to a line-pattern scan so legacy snippets still yield their imports.
"""

from __future__ import annotations

import ast
import re
from dataclasses import dataclass, replace
from functools import lru_cache
from importlib import resources

from .exceptions import EmptySource
from .interpreters import FALLBACK_CANDIDATES, SUPPORTED_PYTHONS, python3_versions_at_least

__all__ = [
    "ImportSet",
    "OtherPassDecision",
    "PythonCandidates",
    "classify_platform_only",
    "detect_python_candidates",
    "extract_imports",
    "platform_module_table",
    "stdlib_table",
]


@dataclass(frozen=True)
class ImportSet:
    """Top-level import names partitioned by disposition."""

    modules: frozenset[str]
    excluded_local: frozenset[str]
    platform_only: frozenset[str]


@dataclass(frozen=True)
class OtherPassDecision:
    """Outcome of the platform-embedded check.

    When ``other_pass`` is false, ``imports`` carries the updated set with
    platform-embedded names segregated out of ``modules``.
    """

    other_pass: bool
    imports: ImportSet


@dataclass(frozen=True)
class PythonCandidates:
    """Ordered interpreter candidates for the sequential sweep."""

    ordered: tuple[str, ...]
    source: str  # "inferred" | "fallback"
    py2_only: bool = False


# --------------------------------------------------------------------------
# Bundled tables
# --------------------------------------------------------------------------


def _load_table(filename: str) -> frozenset[str]:
    text = resources.files("depsolve").joinpath("data", filename).read_text()
    return frozenset(
        line.strip() for line in text.splitlines() if line.strip() and not line.startswith("#")
    )


@lru_cache(maxsize=None)
def stdlib_table(python: str) -> frozenset[str]:
    return _load_table(f"stdlib_{python}.txt")


@lru_cache(maxsize=None)
def platform_module_table() -> frozenset[str]:
    return _load_table("platform_modules.txt")


@lru_cache(maxsize=None)
def _stdlib_union() -> frozenset[str]:
    out: frozenset[str] = frozenset()
    for v in SUPPORTED_PYTHONS:
        out |= stdlib_table(v)
    return out


# --------------------------------------------------------------------------
# Import extraction
# --------------------------------------------------------------------------

# Submodule names typical of project-internal layouts; a dotted from-import
# through one of these is treated as local code unless the root is a known
# distribution.
_PROJECT_LOCAL_MARKERS = frozenset(
    {
        "models", "views", "settings", "urls", "forms", "admin", "apps",
        "serializers", "migrations", "middleware", "signals", "managers",
        "wsgi", "asgi",
    }
)

_KNOWN_DISTRIBUTION_ROOTS = frozenset(
    {
        "django", "keras", "tensorflow", "sklearn", "scipy", "numpy", "pandas",
        "rest_framework", "flask", "sqlalchemy", "torch", "matplotlib",
        "wagtail", "cms", "oscar",
    }
)

_IMPORT_LINE_RE = re.compile(r"^\s*import\s+([A-Za-z_][\w.]*(?:\s*,\s*[A-Za-z_][\w.]*)*)")
_FROM_LINE_RE = re.compile(r"^\s*from\s+([A-Za-z_][\w.]*)\s+import\b")


def extract_imports(source: str) -> ImportSet:
    """Collect top-level third-party import names from a source blob.

    Standard-library names (union over all bundled interpreter tables) are
    dropped; relative imports and project-local dotted from-imports land in
    ``excluded_local``. Raises :class:`EmptySource` when the blob contains no
    import statements at all.
    """
    found: list[tuple[str, str | None]] = []  # (dotted path, from-submodule)
    relative_roots: set[str] = set()
    saw_statement = False

    try:
        tree = ast.parse(source)
    except SyntaxError:
        tree = None

    if tree is not None:
        for node in ast.walk(tree):
            if isinstance(node, ast.Import):
                saw_statement = True
                for alias in node.names:
                    found.append((alias.name, None))
            elif isinstance(node, ast.ImportFrom):
                saw_statement = True
                if node.level > 0:
                    if node.module:
                        relative_roots.add(node.module.split(".")[0])
                    continue
                if node.module:
                    parts = node.module.split(".")
                    found.append((node.module, parts[1] if len(parts) > 1 else None))
    else:
        for line in source.splitlines():
            m = _IMPORT_LINE_RE.match(line)
            if m:
                saw_statement = True
                for chunk in m.group(1).split(","):
                    name = chunk.strip().split(" as ")[0].strip()
                    if name:
                        found.append((name, None))
                continue
            m = _FROM_LINE_RE.match(line)
            if m:
                saw_statement = True
                parts = m.group(1).split(".")
                found.append((m.group(1), parts[1] if len(parts) > 1 else None))

    if not saw_statement:
        raise EmptySource("no import statements found")

    stdlib = _stdlib_union()
    modules: set[str] = set()
    excluded: set[str] = set(relative_roots)
    for dotted, from_sub in found:
        root = dotted.split(".")[0]
        if root in stdlib:
            continue
        if (
            from_sub is not None
            and from_sub in _PROJECT_LOCAL_MARKERS
            and root not in _KNOWN_DISTRIBUTION_ROOTS
        ):
            excluded.add(root)
            continue
        modules.add(root)
    modules -= excluded

    return ImportSet(
        modules=frozenset(modules),
        excluded_local=frozenset(excluded),
        platform_only=frozenset(),
    )


def classify_platform_only(imports: ImportSet) -> OtherPassDecision:
    """Decide whether every retained import is platform-embedded.

    A snippet qualifies only when ``modules`` is non-empty and lies entirely
    inside the platform table; mixed imports instead get their platform
    names segregated into ``platform_only``.
    """
    table = platform_module_table()
    platform = frozenset(m for m in imports.modules if m in table)
    if imports.modules and platform == imports.modules:
        return OtherPassDecision(True, replace(imports, modules=frozenset(), platform_only=platform))
    updated = replace(
        imports,
        modules=imports.modules - platform,
        platform_only=imports.platform_only | platform,
    )
    return OtherPassDecision(False, updated)


# --------------------------------------------------------------------------
# Interpreter version detection
# --------------------------------------------------------------------------

# Lexical markers of Python-2-exclusive syntax.
_PY2_PATTERNS = (
    re.compile(r"^\s*print\s+[^\s(=]", re.MULTILINE),
    re.compile(r"^\s*print\s*>>", re.MULTILINE),
    re.compile(r"^\s*except\s+[A-Za-z_][\w.]*\s*,", re.MULTILINE),
    re.compile(r"^\s*raise\s+[A-Za-z_][\w.]*\s*,", re.MULTILINE),
    re.compile(r"^\s*exec\s+['\"]", re.MULTILINE),
    re.compile(r"\bur['\"]"),
    re.compile(r"`[^`\n]+`"),
    re.compile(r"[^<>=!]<>[^<>=]"),
    re.compile(r"\bxrange\s*\("),
)

_PY2_ONLY_MODULES = frozenset(
    {
        "urllib2", "urlparse", "Queue", "ConfigParser", "StringIO", "cPickle",
        "cStringIO", "Tkinter", "httplib", "SocketServer", "cookielib",
        "HTMLParser", "__builtin__", "commands", "copy_reg", "izip",
    }
)

# Import names whose first standard-library appearance pins a 3.x minimum.
_IMPORT_MINIMUMS = {
    "secrets": "3.6",
    "typing": "3.6",
    "dataclasses": "3.7",
    "contextvars": "3.7",
    "zoneinfo": "3.9",
    "graphlib": "3.9",
    "tomllib": "3.11",
}

# Lexical feature probes applied on top of the AST rules.
_LEXICAL_MINIMUMS = (
    (re.compile(r"\bf['\"]"), "3.6"),
    (re.compile(r"\b\d+(_\d+)+\b"), "3.6"),  # underscore digit grouping
    (re.compile(r":="), "3.8"),
    (re.compile(r"f['\"][^'\"]*=\}"), "3.8"),  # self-documenting f-string
)


def _ast_minimums(tree: ast.AST) -> list[str]:
    mins: list[str] = []
    match_node = getattr(ast, "Match", None)
    trystar_node = getattr(ast, "TryStar", None)
    typealias_node = getattr(ast, "TypeAlias", None)
    for node in ast.walk(tree):
        if isinstance(node, (ast.AsyncFunctionDef, ast.AsyncFor, ast.AsyncWith, ast.Await)):
            mins.append("3.6")
        elif isinstance(node, (ast.JoinedStr, ast.AnnAssign)):
            mins.append("3.6")
        elif isinstance(node, ast.Call) and isinstance(node.func, ast.Name):
            if node.func.id == "breakpoint":
                mins.append("3.7")
        elif isinstance(node, ast.NamedExpr):
            mins.append("3.8")
        elif isinstance(node, (ast.FunctionDef, ast.AsyncFunctionDef)):
            if node.args.posonlyargs:
                mins.append("3.8")
        elif isinstance(node, ast.BinOp) and isinstance(node.op, ast.BitOr):
            if isinstance(node.left, ast.Dict) or isinstance(node.right, ast.Dict):
                mins.append("3.9")
        elif isinstance(node, ast.Subscript) and isinstance(node.value, ast.Name):
            if node.value.id in ("list", "dict", "set", "tuple", "frozenset", "type"):
                mins.append("3.9")
        elif match_node is not None and isinstance(node, match_node):
            mins.append("3.10")
        elif trystar_node is not None and isinstance(node, trystar_node):
            mins.append("3.11")
        elif typealias_node is not None and isinstance(node, typealias_node):
            mins.append("3.12")
        if isinstance(node, ast.Import):
            for alias in node.names:
                root = alias.name.split(".")[0]
                if root in _IMPORT_MINIMUMS:
                    mins.append(_IMPORT_MINIMUMS[root])
        elif isinstance(node, ast.ImportFrom) and node.module and node.level == 0:
            root = node.module.split(".")[0]
            if root in _IMPORT_MINIMUMS:
                mins.append(_IMPORT_MINIMUMS[root])
    return mins


def _py2_markers(source: str) -> bool:
    if any(p.search(source) for p in _PY2_PATTERNS):
        return True
    for line in source.splitlines():
        m = _IMPORT_LINE_RE.match(line) or _FROM_LINE_RE.match(line)
        if m:
            for chunk in m.group(1).split(","):
                root = chunk.strip().split(" as ")[0].strip().split(".")[0]
                if root in _PY2_ONLY_MODULES:
                    return True
    return False


def detect_python_candidates(source: str) -> PythonCandidates:
    """Infer the ordered interpreter candidate list from syntax features.

    Feature rules give a 3.x minimum or a Python-2-only marker; when nothing
    fires decisively the fixed fallback list is returned.
    """
    mins: list[str] = []
    try:
        tree = ast.parse(source)
    except SyntaxError:
        tree = None
    if tree is not None:
        mins.extend(_ast_minimums(tree))
    for pattern, minimum in _LEXICAL_MINIMUMS:
        if pattern.search(source):
            mins.append(minimum)

    py2 = _py2_markers(source)
    if py2 and not mins:
        return PythonCandidates(ordered=("2.7",), source="inferred", py2_only=True)
    if mins:
        minimum = max(mins, key=lambda v: tuple(int(p) for p in v.split(".")))
        return PythonCandidates(
            ordered=python3_versions_at_least(minimum), source="inferred", py2_only=False
        )
    return PythonCandidates(ordered=FALLBACK_CANDIDATES, source="fallback", py2_only=False)

"""Import-name to distribution mapping: the five-tier ladder.

Tier order is strict: identity, curated collision table, case probes,
structural name variants, model-suggested alias (accepted only after the
registry confirms it). Non-identity results persist in a line-oriented cache
so later runs skip the ladder entirely.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from .exceptions import UnmappableImport
from .versions import normalize_name

__all__ = [
    "AuditReport",
    "BINARY_VARIANT_SWAPS",
    "COLLISION_TABLE",
    "MappingCache",
    "MappingResult",
    "audit_cache",
    "name_variants",
    "resolve_import",
]

TIER_IDENTITY = "identity"
TIER_COLLISION = "collision_table"
TIER_CASE = "case_probe"
TIER_VARIANT = "variant_pattern"
TIER_LLM = "llm"

# 36 curated import/distribution divergences. Keys are import names as they
# appear in source (case matters); values are distribution names.
COLLISION_TABLE = {
    "sklearn": "scikit-learn",
    "cv2": "opencv-python",
    "PIL": "pillow",
    "Image": "pillow",
    "yaml": "pyyaml",
    "bs4": "beautifulsoup4",
    "Crypto": "pycryptodome",
    "OpenSSL": "pyopenssl",
    "dateutil": "python-dateutil",
    "dotenv": "python-dotenv",
    "jose": "python-jose",
    "magic": "python-magic",
    "docx": "python-docx",
    "pptx": "python-pptx",
    "serial": "pyserial",
    "usb": "pyusb",
    "gi": "pygobject",
    "cairo": "pycairo",
    "gtk": "pygtk",
    "wx": "wxpython",
    "kafka": "kafka-python",
    "MySQLdb": "mysqlclient",
    "Levenshtein": "python-levenshtein",
    "memcache": "python-memcached",
    "github": "pygithub",
    "jwt": "pyjwt",
    "mpl_toolkits": "matplotlib",
    "skimage": "scikit-image",
    "telegram": "python-telegram-bot",
    "zmq": "pyzmq",
    "websocket": "websocket-client",
    "attr": "attrs",
    "Bio": "biopython",
    "fitz": "pymupdf",
    "pylab": "matplotlib",
    "google": "protobuf",
}

# Prebuilt sibling distributions tried before any model call when a source
# build fails or a package has no installable versions.
BINARY_VARIANT_SWAPS = {
    "psycopg2": "psycopg2-binary",
    "mysql-python": "mysqlclient",
    "pycrypto": "pycryptodome",
    "opencv-python": "opencv-python-headless",
    "uwsgi": "pyuwsgi",
}

_LIVE_PROBE_WORKERS = 3


@dataclass(frozen=True)
class MappingResult:
    import_name: str
    package: str
    tier: str
    validated: bool = True


@dataclass
class AuditReport:
    checked: int
    evicted: list[tuple[str, str]]  # (import_name, stale package)


def name_variants(name: str) -> list[str]:
    """The nine structural candidates, fixed order, given-patterns first."""
    return [
        f"python-{name}",
        f"py{name}",
        f"{name}-python",
        f"{name}py",
        f"py-{name}",
        f"{name}3",
        f"{name}-py",
        f"python_{name}",
        f"{name}2",
    ]


class MappingCache:
    """Persistent import -> package map.

    File format: ``import_name<TAB>package<TAB>tier<TAB>iso-timestamp``,
    sorted by import name. A corrupt file is renamed aside and resolution
    proceeds cold; the cache is an accelerator, never a correctness
    dependency. Identity mappings are remembered in-session only.
    """

    def __init__(self, path: str | Path | None = None, clock=None):
        self.path = Path(path) if path else None
        self.entries: dict[str, tuple[str, str, str]] = {}
        self.dirty = False
        self._session: dict[str, MappingResult] = {}
        self._clock = clock or (lambda: datetime.now(timezone.utc).isoformat(timespec="seconds"))
        if self.path is not None and self.path.exists():
            self._load()

    def _load(self) -> None:
        try:
            lines = self.path.read_text().splitlines()
            for line in lines:
                if not line.strip():
                    continue
                name, package, tier, stamp = line.split("\t")
                self.entries[name] = (package, tier, stamp)
        except (ValueError, OSError):
            self.entries.clear()
            corrupt = self.path.with_suffix(self.path.suffix + ".corrupt")
            self.path.rename(corrupt)

    def save(self) -> None:
        if self.path is None:
            return
        lines = [
            f"{name}\t{package}\t{tier}\t{stamp}"
            for name, (package, tier, stamp) in sorted(self.entries.items())
        ]
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.path.write_text("\n".join(lines) + ("\n" if lines else ""))
        self.dirty = False

    def get(self, name: str) -> MappingResult | None:
        if name in self._session:
            return self._session[name]
        if name in self.entries:
            package, tier, _ = self.entries[name]
            return MappingResult(name, package, tier)
        return None

    def put(self, result: MappingResult) -> None:
        self._session[result.import_name] = result
        if result.tier == TIER_IDENTITY:
            return  # only non-trivial mappings persist
        self.entries[result.import_name] = (result.package, result.tier, self._clock())
        self.dirty = True

    def evict(self, name: str) -> None:
        self.entries.pop(name, None)
        self._session.pop(name, None)
        self.dirty = True


def _probe_in_order(registry, names: list[str]) -> str | None:
    """First name (in list order) that exists; probes may run concurrently."""
    deduped = list(dict.fromkeys(names))
    if getattr(registry, "concurrent_probes", False) and len(deduped) > 1:
        with ThreadPoolExecutor(max_workers=_LIVE_PROBE_WORKERS) as pool:
            results = list(pool.map(registry.exists, deduped))
        for name, hit in zip(deduped, results):
            if hit:
                return name
        return None
    for name in deduped:
        if registry.exists(name):
            return name
    return None


def resolve_import(name: str, registry, llm, cache: MappingCache) -> MappingResult:
    """Run the ladder for one import name. Raises :class:`UnmappableImport`
    when every tier fails."""
    cached = cache.get(name)
    if cached is not None:
        return cached

    # tier 1: the import name is its own distribution
    if registry.exists(name):
        result = MappingResult(name, normalize_name(name), TIER_IDENTITY)
        cache.put(result)
        return result

    # tier 2: curated collision table
    target = COLLISION_TABLE.get(name)
    if target is not None and registry.has_project(target):
        result = MappingResult(name, normalize_name(target), TIER_COLLISION)
        cache.put(result)
        return result

    # tier 3: exact-case / lowercase / capitalized existence probes
    hit = _probe_in_order(registry, [name, name.lower(), name.capitalize()])
    if hit is not None:
        result = MappingResult(name, normalize_name(hit), TIER_CASE)
        cache.put(result)
        return result

    # tier 4: structural name variants
    hit = _probe_in_order(registry, name_variants(name))
    if hit is not None:
        result = MappingResult(name, normalize_name(hit), TIER_VARIANT)
        cache.put(result)
        return result

    # tier 5: model alias, accepted only after registry confirmation
    answer = llm.ask("alias", name)
    if answer:
        try:
            candidate = normalize_name(answer)
        except Exception:
            candidate = ""
        if candidate and registry.has_project(candidate):
            result = MappingResult(name, candidate, TIER_LLM, validated=True)
            cache.put(result)
            return result

    raise UnmappableImport(name)


def audit_cache(cache: MappingCache, registry) -> AuditReport:
    """Re-validate every persisted entry; evict packages the registry no
    longer knows."""
    evicted: list[tuple[str, str]] = []
    for name, (package, _tier, _stamp) in sorted(cache.entries.items()):
        if not registry.has_project(package):
            evicted.append((name, package))
    checked = len(cache.entries)
    for name, _ in evicted:
        cache.evict(name)
    return AuditReport(checked=checked, evicted=evicted)

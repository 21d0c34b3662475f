"""Registry metadata access: release enumeration, interpreter filtering, and
era-biased candidate selection.

Two interchangeable backends serve the same record shape: an offline fixture
index (a directory of per-package JSON documents) and a thin live adapter for
the registry's JSON API. Tests and the simulated pipeline run entirely on the
fixture index.
"""

from __future__ import annotations

import json
import random
import urllib.error
import urllib.request
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from .exceptions import (
    BackendUnavailable,
    MalformedSpecifier,
    NoInstallableVersion,
    NoTemporalData,
    UnknownPackage,
)
from .versions import (
    EnvContext,
    Requirement,
    SpecifierSet,
    Version,
    normalize_name,
    parse_requirement,
    parse_specifier_set,
    parse_version,
)

__all__ = [
    "CandidateSet",
    "ERA_SENTINEL",
    "FixtureIndex",
    "LiveRegistry",
    "ReleaseRecord",
    "estimate_era",
    "filter_releases",
    "parse_timestamp",
    "select_candidates",
]

MAX_CANDIDATES = 8
NEAREST_KEEP = 5
SAMPLE_KEEP = 3

# Mid-window default when no release carries a timestamp.
ERA_SENTINEL = datetime(2016, 1, 1, tzinfo=timezone.utc)


def parse_timestamp(text: str) -> datetime:
    ts = datetime.fromisoformat(text.replace("Z", "+00:00"))
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts


@dataclass(frozen=True)
class ReleaseRecord:
    """One published release. ``requires_dist=None`` means the metadata is
    absent (imputation-eligible), distinct from an empty dependency list."""

    package: str
    version: Version
    upload_time: datetime | None
    yanked: bool = False
    requires_python: SpecifierSet | None = None
    has_wheel: bool = False
    requires_dist: tuple[Requirement, ...] | None = ()


@dataclass(frozen=True)
class CandidateSet:
    """Up to eight installable releases, wheel-available first then newest."""

    package: str
    candidates: tuple[ReleaseRecord, ...]
    era_used: datetime


# --------------------------------------------------------------------------
# Backends
# --------------------------------------------------------------------------


class FixtureIndex:
    """Offline registry backed by one JSON document per package.

    Document shape::

        {"name": "Flask",
         "releases": [{"version": "2.0", "upload_time": "2021-05-11T00:00:00Z",
                       "yanked": false, "requires_python": ">=3.6",
                       "has_wheel": true,
                       "requires_dist": ["werkzeug>=2.0"]}]}

    ``requires_dist: null`` marks absent metadata. Existence probes are
    case-sensitive against the display name; release fetches accept any
    spelling that normalizes to a known project.
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self._cache: dict[str, tuple[str, tuple[ReleaseRecord, ...]]] = {}
        self.probe_count = 0

    def _load(self, key: str) -> tuple[str, tuple[ReleaseRecord, ...]] | None:
        if key in self._cache:
            return self._cache[key]
        path = self.root / f"{key}.json"
        if not path.exists():
            return None
        doc = json.loads(path.read_text())
        display = doc.get("name", key)
        releases = tuple(self._parse_release(key, r) for r in doc.get("releases", []))
        self._cache[key] = (display, releases)
        return self._cache[key]

    @staticmethod
    def _parse_release(package: str, raw: dict) -> ReleaseRecord:
        requires_dist: tuple[Requirement, ...] | None
        if raw.get("requires_dist") is None and "requires_dist" in raw:
            requires_dist = None
        else:
            reqs = []
            for text in raw.get("requires_dist", []):
                try:
                    reqs.append(parse_requirement(text))
                except MalformedSpecifier:
                    continue  # unusable declarations are skipped, not fatal
            requires_dist = tuple(reqs)
        requires_python = None
        if raw.get("requires_python"):
            requires_python = parse_specifier_set(raw["requires_python"])
        upload_time = parse_timestamp(raw["upload_time"]) if raw.get("upload_time") else None
        return ReleaseRecord(
            package=package,
            version=parse_version(raw["version"]),
            upload_time=upload_time,
            yanked=bool(raw.get("yanked", False)),
            requires_python=requires_python,
            has_wheel=bool(raw.get("has_wheel", False)),
            requires_dist=requires_dist,
        )

    def exists(self, name: str) -> bool:
        """Case-sensitive probe against the project's display name."""
        self.probe_count += 1
        try:
            key = normalize_name(name)
        except Exception:
            return False
        loaded = self._load(key)
        return loaded is not None and loaded[0] == name

    def has_project(self, name: str) -> bool:
        """Spelling-insensitive membership check."""
        self.probe_count += 1
        try:
            key = normalize_name(name)
        except Exception:
            return False
        return self._load(key) is not None

    def fetch_releases(self, package: str) -> list[ReleaseRecord]:
        loaded = self._load(normalize_name(package))
        if loaded is None:
            raise UnknownPackage(package)
        return list(loaded[1])


class LiveRegistry:
    """Adapter for the registry's JSON API, mapped onto the fixture shape.

    Probes do not follow redirects, so case confirmation mirrors the fixture
    backend. Network failures are retried once, then surfaced.
    """

    # the mapper may issue existence probes in parallel against this backend
    concurrent_probes = True

    def __init__(self, base_url: str = "https://pypi.org", timeout_s: float = 2.0):
        self.base_url = base_url.rstrip("/")
        self.timeout_s = timeout_s
        self.probe_count = 0

    def _head(self, url: str) -> int:
        req = urllib.request.Request(url, method="HEAD")

        class _NoRedirect(urllib.request.HTTPRedirectHandler):
            def redirect_request(self, *args, **kwargs):
                return None

        opener = urllib.request.build_opener(_NoRedirect)
        try:
            with opener.open(req, timeout=self.timeout_s) as resp:
                return resp.status
        except urllib.error.HTTPError as exc:
            return exc.code
        except OSError as exc:
            raise BackendUnavailable(str(exc)) from exc

    def exists(self, name: str) -> bool:
        self.probe_count += 1
        try:
            return self._head(f"{self.base_url}/simple/{name}/") == 200
        except BackendUnavailable:
            return self._head(f"{self.base_url}/simple/{name}/") == 200

    def has_project(self, name: str) -> bool:
        self.probe_count += 1
        url = f"{self.base_url}/simple/{normalize_name(name)}/"
        try:
            return self._head(url) == 200
        except BackendUnavailable:
            return self._head(url) == 200

    def _get_json(self, url: str) -> dict:
        try:
            with urllib.request.urlopen(url, timeout=self.timeout_s) as resp:
                return json.loads(resp.read().decode("utf-8"))
        except urllib.error.HTTPError as exc:
            if exc.code == 404:
                raise UnknownPackage(url.rsplit("/", 2)[-2]) from exc
            raise BackendUnavailable(str(exc)) from exc
        except OSError as exc:
            raise BackendUnavailable(str(exc)) from exc

    def fetch_releases(self, package: str) -> list[ReleaseRecord]:
        key = normalize_name(package)
        url = f"{self.base_url}/pypi/{key}/json"
        try:
            doc = self._get_json(url)
        except BackendUnavailable:
            doc = self._get_json(url)
        records = []
        for version_text, files in doc.get("releases", {}).items():
            try:
                version = parse_version(version_text)
            except Exception:
                continue
            upload = None
            yanked = bool(files) and all(f.get("yanked", False) for f in files)
            has_wheel = any(f.get("filename", "").endswith(".whl") for f in files)
            requires_python = None
            for f in files:
                if f.get("upload_time_iso_8601") or f.get("upload_time"):
                    ts = parse_timestamp(f.get("upload_time_iso_8601") or f["upload_time"])
                    upload = ts if upload is None or ts < upload else upload
                if requires_python is None and f.get("requires_python"):
                    try:
                        requires_python = parse_specifier_set(f["requires_python"])
                    except MalformedSpecifier:
                        pass
            records.append(
                ReleaseRecord(
                    package=key,
                    version=version,
                    upload_time=upload,
                    yanked=yanked,
                    requires_python=requires_python,
                    has_wheel=has_wheel,
                    requires_dist=None,  # per-release metadata needs a second call
                )
            )
        return records


# --------------------------------------------------------------------------
# Filtering and selection
# --------------------------------------------------------------------------


def filter_releases(
    releases: list[ReleaseRecord], python: str, env: EnvContext | None = None
) -> list[ReleaseRecord]:
    """Drop yanked releases and interpreter-incompatible builds.

    Pre-releases are dropped whenever the package has at least one stable
    release; absent ``requires_python`` metadata passes optimistically (the
    validation loop is the backstop).
    """
    env = env or EnvContext(python_version=python)
    interpreter = parse_version(python)
    out = []
    for rec in releases:
        if rec.yanked:
            continue
        if rec.requires_python is not None:
            gated = rec.requires_python
            if not gated.matches(interpreter, env):
                continue
        out.append(rec)
    if python.startswith("2."):
        out = _drop_after_last_py2_support(out)
    if any(not r.version.is_prerelease for r in out):
        out = [r for r in out if not r.version.is_prerelease]
    return out


def _drop_after_last_py2_support(releases: list[ReleaseRecord]) -> list[ReleaseRecord]:
    # Metadata-less releases newer than the last explicitly 2.x-supporting
    # release are almost always 3-only; drop them when the signal exists.
    two = parse_version("2.7")
    dated = [
        r
        for r in releases
        if r.requires_python is not None and r.upload_time is not None
        and r.requires_python.matches(two)
    ]
    if not dated:
        return releases
    cutoff = max(r.upload_time for r in dated)
    return [
        r
        for r in releases
        if r.requires_python is not None
        or r.upload_time is None
        or r.upload_time <= cutoff
    ]


def estimate_era(packages: list[str], registry) -> datetime:
    """Median of per-package midpoints of first/last upload times.

    The midpoint of a package is the mean of its earliest and latest upload;
    the median uses the lower-middle element on even counts. Raises
    :class:`NoTemporalData` when nothing is timestamped.
    """
    midpoints = []
    for package in packages:
        try:
            releases = registry.fetch_releases(package)
        except UnknownPackage:
            continue
        stamps = sorted(r.upload_time for r in releases if r.upload_time is not None)
        if not stamps:
            continue
        midpoints.append(stamps[0] + (stamps[-1] - stamps[0]) / 2)
    if not midpoints:
        raise NoTemporalData("no package has a timestamped release")
    midpoints.sort()
    return midpoints[(len(midpoints) - 1) // 2]


def select_candidates(
    package: str, releases: list[ReleaseRecord], era: datetime, seed: int
) -> CandidateSet:
    """Era-biased pick of up to eight candidates.

    The five releases nearest the era are always kept; three more are drawn
    from the remainder by a seeded uniform sample. The final set orders
    wheel-available releases first, newest version first within each group.
    """
    if not releases:
        raise NoInstallableVersion(package)
    if len(releases) <= MAX_CANDIDATES:
        chosen = list(releases)
    else:
        def distance(rec: ReleaseRecord) -> float:
            if rec.upload_time is None:
                return float("inf")
            return abs((rec.upload_time - era).total_seconds())

        by_version = sorted(releases, key=lambda r: r.version, reverse=True)
        rank_of = {id(r): i for i, r in enumerate(by_version)}
        ranked = sorted(releases, key=lambda r: (distance(r), rank_of[id(r)]))
        chosen = ranked[:NEAREST_KEEP]
        pool = ranked[NEAREST_KEEP:]
        rng = random.Random(f"{seed}:{package}")
        for _ in range(min(SAMPLE_KEEP, len(pool))):
            chosen.append(pool.pop(int(rng.random() * len(pool))))
    chosen.sort(key=lambda r: r.version, reverse=True)
    chosen.sort(key=lambda r: not r.has_wheel)  # stable: wheel group first
    return CandidateSet(package=package, candidates=tuple(chosen), era_used=era)

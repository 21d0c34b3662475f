"""Shared fixture builders: offline index documents, world files, stub LLM."""

import json
from pathlib import Path

import pytest

from depsolve.registry import FixtureIndex


def release(
    version,
    upload_time=None,
    yanked=False,
    requires_python=None,
    has_wheel=True,
    requires_dist=(),
):
    """One release entry for an index document. ``requires_dist=None`` marks
    absent metadata."""
    entry = {"version": version, "has_wheel": has_wheel, "yanked": yanked}
    if upload_time is not None:
        entry["upload_time"] = upload_time
    if requires_python is not None:
        entry["requires_python"] = requires_python
    entry["requires_dist"] = None if requires_dist is None else list(requires_dist)
    return entry


def write_index(root: Path, projects: dict) -> FixtureIndex:
    """``projects`` maps display name -> list of release entries."""
    root.mkdir(parents=True, exist_ok=True)
    from depsolve.versions import normalize_name

    for display, releases in projects.items():
        doc = {"name": display, "releases": releases}
        (root / f"{normalize_name(display)}.json").write_text(json.dumps(doc, indent=1))
    return FixtureIndex(root)


@pytest.fixture
def make_index(tmp_path):
    def _make(projects: dict, subdir: str = "index") -> FixtureIndex:
        return write_index(tmp_path / subdir, projects)

    return _make


@pytest.fixture
def make_world(tmp_path):
    def _make(rules: list, subdir: str = "world.json") -> Path:
        path = tmp_path / subdir
        path.write_text(json.dumps({"rules": rules}, indent=1))
        return path

    return _make

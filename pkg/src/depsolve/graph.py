"""Constraint graph construction: candidate nodes, hard edges from declared
metadata, soft edges from imputed metadata, and pre-solve replacement of
packages with zero installable versions.

Hard edges only ever originate from declared ``requires_dist``; soft edges
only from imputation. Provenance is preserved so the solver can relax soft
edges wholesale on UNSAT.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from datetime import datetime

from .exceptions import NoInstallableVersion, UnknownPackage
from .mapper import BINARY_VARIANT_SWAPS, name_variants
from .registry import CandidateSet, filter_releases, select_candidates
from .versions import EnvContext, SpecifierSet, Version, normalize_name

__all__ = [
    "ConstraintGraph",
    "Edge",
    "InjectedConstraint",
    "apply_injection",
    "build_graph",
    "dump_graph",
    "impute_dependencies",
    "replace_uninstallable",
]

MATERIALIZE_DEPTH = 3


@dataclass(frozen=True)
class Edge:
    """Dependency constraint from one candidate node to a package."""

    package: str
    version: Version
    dep: str
    spec: SpecifierSet


@dataclass(frozen=True)
class InjectedConstraint:
    """A repair-loop refinement. ``kind`` is one of ``forbid_version``,
    ``require_specifier``, ``forbid_package``, ``pin_python``."""

    kind: str
    origin: str
    package: str | None = None
    version: Version | None = None
    specifier: SpecifierSet | None = None
    python: str | None = None

    def render(self) -> str:
        parts = [self.kind]
        if self.package:
            parts.append(self.package)
        if self.version is not None:
            parts.append(str(self.version))
        if self.specifier is not None:
            parts.append(str(self.specifier))
        if self.python:
            parts.append(self.python)
        return " ".join(parts) + f" origin={self.origin}"


@dataclass(frozen=True)
class ConstraintGraph:
    python: str
    roots: tuple[str, ...]
    nodes: dict[str, CandidateSet]
    hard_edges: tuple[Edge, ...]
    soft_edges: tuple[Edge, ...]
    injected: tuple[InjectedConstraint, ...] = ()
    dropped_roots: tuple[tuple[str, str], ...] = ()  # (package, reason)

    def forbidden_versions(self) -> set[tuple[str, str]]:
        out = set()
        for c in self.injected:
            if c.kind == "forbid_version" and c.package and c.version is not None:
                out.add((c.package, str(c.version)))
        return out

    def candidates_of(self, package: str) -> tuple:
        cs = self.nodes.get(package)
        return cs.candidates if cs is not None else ()


def impute_dependencies(package: str, version: Version, llm, registry) -> list[tuple[str, SpecifierSet]]:
    """Ask the gateway for a metadata-less release's dependencies; keep only
    names the registry confirms."""
    answer = llm.ask("impute_deps", f"{package}=={version}")
    out = []
    for name, spec in answer:
        if registry.has_project(name):
            out.append((normalize_name(name), spec))
    return out


def _candidate_set(
    package: str, registry, era: datetime, seed: int, python: str, env: EnvContext
) -> CandidateSet | None:
    """None when the registry lacks the project; empty set when every release
    is filtered out."""
    try:
        releases = registry.fetch_releases(package)
    except UnknownPackage:
        return None
    kept = filter_releases(releases, python, env)
    try:
        return select_candidates(package, kept, era, seed)
    except NoInstallableVersion:
        return CandidateSet(package=package, candidates=(), era_used=era)


def build_graph(
    roots: list[str],
    registry,
    era: datetime,
    llm,
    seed: int,
    python: str,
    injected: tuple[InjectedConstraint, ...] = (),
    dropped: tuple[tuple[str, str], ...] = (),
) -> ConstraintGraph:
    """Materialize roots and their dependency packages to a bounded depth.

    Roots with nothing installable keep an empty candidate set here; the
    replacement pass decides their fate before solving. Dependency packages
    the registry cannot serve stay dangling and their edges are vacuous.
    """
    env = EnvContext(python_version=python)
    root_tuple = tuple(sorted({normalize_name(r) for r in roots}))
    nodes: dict[str, CandidateSet] = {}
    hard: list[Edge] = []
    soft: list[Edge] = []
    queue: list[tuple[str, int]] = [(r, 0) for r in root_tuple]
    enqueued = set(root_tuple)

    while queue:
        package, depth = queue.pop(0)
        cs = _candidate_set(package, registry, era, seed, python, env)
        if cs is None:
            if package in root_tuple:
                nodes[package] = CandidateSet(package=package, candidates=(), era_used=era)
            continue
        nodes[package] = cs
        discovered: set[str] = set()
        for rec in cs.candidates:
            if rec.requires_dist is None:
                for dep, spec in impute_dependencies(package, rec.version, llm, registry):
                    soft.append(Edge(package, rec.version, dep, spec.expand_compat_operators()))
                    discovered.add(dep)
            else:
                for req in rec.requires_dist:
                    marker = req.specifier.marker
                    if marker is not None and not marker.evaluate(env):
                        continue
                    spec = SpecifierSet(req.specifier.clauses).expand_compat_operators()
                    hard.append(Edge(package, rec.version, req.name, spec))
                    discovered.add(req.name)
        if depth < MATERIALIZE_DEPTH:
            for dep in sorted(discovered):
                if dep not in enqueued:
                    enqueued.add(dep)
                    queue.append((dep, depth + 1))

    return ConstraintGraph(
        python=python,
        roots=root_tuple,
        nodes=nodes,
        hard_edges=tuple(hard),
        soft_edges=tuple(soft),
        injected=injected,
        dropped_roots=dropped,
    )


def replace_uninstallable(
    graph: ConstraintGraph, registry, llm, era: datetime, seed: int
) -> ConstraintGraph:
    """Swap dead roots for a binary sibling, a name variant, or a validated
    alias; drop what nothing can replace. Degradation is recorded, never
    thrown."""
    env = EnvContext(python_version=graph.python)

    def installable(name: str) -> bool:
        cs = _candidate_set(name, registry, era, seed, graph.python, env)
        return cs is not None and bool(cs.candidates)

    new_roots: list[str] = []
    dropped = list(graph.dropped_roots)
    changed = False
    for root in graph.roots:
        cs = graph.nodes.get(root)
        if cs is not None and cs.candidates:
            new_roots.append(root)
            continue
        changed = True
        swap = BINARY_VARIANT_SWAPS.get(root)
        replacements = ([swap] if swap else []) + name_variants(root)
        chosen = None
        for cand in replacements:
            cand = normalize_name(cand)
            if registry.has_project(cand) and installable(cand):
                chosen = cand
                break
        if chosen is None:
            answer = llm.ask("alias", root)
            if answer:
                cand = normalize_name(answer)
                if registry.has_project(cand) and installable(cand):
                    chosen = cand
        if chosen is not None:
            new_roots.append(chosen)
            dropped.append((root, f"replaced by {chosen}"))
        else:
            dropped.append((root, "no installable version"))

    if not changed:
        return graph
    return build_graph(
        new_roots,
        registry,
        era,
        llm,
        seed,
        graph.python,
        injected=graph.injected,
        dropped=tuple(dropped),
    )


def apply_injection(graph: ConstraintGraph, constraint: InjectedConstraint) -> ConstraintGraph:
    """Return a new graph carrying the constraint.

    No-op injections (nothing newly excluded) raise ``ValueError`` so the
    repair loop never spins on moves that cannot shrink the solution set.
    """
    if constraint.kind == "pin_python":
        return replace(graph, injected=graph.injected + (constraint,))

    package = constraint.package
    if package is None or package not in graph.nodes:
        raise ValueError(f"injection targets unknown package {package!r}")
    candidates = graph.candidates_of(package)
    already = graph.forbidden_versions()

    if constraint.kind == "forbid_version":
        key = (package, str(constraint.version))
        if all(str(rec.version) != key[1] for rec in candidates):
            raise ValueError(f"forbid_version of absent candidate {key}")
        if key in already:
            raise ValueError(f"duplicate forbid_version {key}")
    elif constraint.kind == "require_specifier":
        spec = constraint.specifier or SpecifierSet()
        newly = [
            rec
            for rec in candidates
            if not spec.matches(rec.version, EnvContext(python_version=graph.python))
            and (package, str(rec.version)) not in already
        ]
        if not newly:
            raise ValueError(f"require_specifier excludes nothing for {package}")
    elif constraint.kind == "forbid_package":
        if all((package, str(rec.version)) in already for rec in candidates):
            raise ValueError(f"forbid_package already vacuous for {package}")
    else:
        raise ValueError(f"unknown injection kind {constraint.kind!r}")

    return replace(graph, injected=graph.injected + (constraint,))


def dump_graph(graph: ConstraintGraph) -> str:
    """Deterministic one-line-per-fact rendering, used by golden tests."""
    lines = [f"python {graph.python}"]
    for root in graph.roots:
        lines.append(f"root {root}")
    for package in sorted(graph.nodes):
        cs = graph.nodes[package]
        for rec in cs.candidates:
            wheel = "wheel" if rec.has_wheel else "sdist"
            lines.append(f"node {package} {rec.version} {wheel}")
        if not cs.candidates:
            lines.append(f"node {package} <empty>")
    for label, edges in (("hard", graph.hard_edges), ("soft", graph.soft_edges)):
        for e in sorted(edges, key=lambda e: (e.package, str(e.version), e.dep, str(e.spec))):
            spec = str(e.spec) or "*"
            lines.append(f"{label} {e.package} {e.version} -> {e.dep} {spec}")
    for c in graph.injected:
        lines.append(f"injected {c.render()}")
    for name, reason in graph.dropped_roots:
        lines.append(f"dropped {name} reason={reason}")
    materialized = set(graph.nodes)
    dangling = sorted(
        {e.dep for e in graph.hard_edges + graph.soft_edges} - materialized
    )
    for name in dangling:
        lines.append(f"dangling {name}")
    return "\n".join(lines) + "\n"

"""Error-driven repair: classified failures become constraint injections,
apt additions, root swaps, or interpreter advances.

Every move must change the (python, pins, apt) state; the episode driver
checks the resulting digest against everything already validated and rejects
repeats, so repair can never loop. Moves that cannot make progress surface
as ``blocked`` and escalate through the recovery ladder.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field

from .docker import APT_BUILD_DEPS, SHARED_LIB_APT, BuildPlan, apt_builddeps
from .exceptions import MalformedSpecifier, MalformedVersion, UnmappableImport
from .graph import ConstraintGraph, InjectedConstraint, apply_injection
from .mapper import BINARY_VARIANT_SWAPS, resolve_import
from .taxonomy import ClassifiedError, ErrorType
from .versions import Version, normalize_name, parse_specifier_set, parse_version

__all__ = [
    "EMBEDDED_RUNTIME_PATTERNS",
    "Move",
    "RepairState",
    "SWEEP_BUDGET",
    "decide_move",
    "is_environment_limited",
    "make_plan",
    "plan_digest",
]

SWEEP_BUDGET = 3  # iterations per swept interpreter candidate
STANDARD_BUDGET = 5  # iterations on the first candidate

# Failure text that marks an embedded-runtime / platform-SDK dead end; no
# amount of re-solving installs these.
EMBEDDED_RUNTIME_PATTERNS = (
    re.compile(r"\bbpy\b"),
    re.compile(r"Blender", re.IGNORECASE),
    re.compile(r"\bsublime(_plugin)?\b"),
    re.compile(r"\bidaapi\b|\bidc\b|\bidautils\b"),
    re.compile(r"\bhou\b|\bnuke\b|\bMaxPlus\b"),
    re.compile(r"embedded (?:runtime|interpreter)", re.IGNORECASE),
    re.compile(r"only (?:runs|available) inside", re.IGNORECASE),
)


@dataclass
class RepairState:
    """Mutable per-episode bookkeeping shared across interpreter candidates."""

    iteration: int = 0  # validations on the current candidate
    seen_digests: set[str] = field(default_factory=set)
    apt_extra: list[str] = field(default_factory=list)
    unresolved_imports: list[str] = field(default_factory=list)
    alias_rung_used: bool = False
    injected: tuple[InjectedConstraint, ...] = ()


@dataclass(frozen=True)
class Move:
    """One repair decision. ``kind`` is one of ``graph``, ``apt``,
    ``new_root``, ``swap_root``, ``advance``, ``blocked``."""

    kind: str
    graph: ConstraintGraph | None = None
    apt_add: tuple[str, ...] = ()
    root: str | None = None
    swap_out: str | None = None
    injection: InjectedConstraint | None = None
    note: str = ""


def plan_digest(plan: BuildPlan) -> str:
    return hashlib.sha256(plan.digest_material().encode("utf-8")).hexdigest()[:16]


def make_plan(python: str, picks: dict[str, Version], apt_extra: list[str]) -> BuildPlan:
    apt = apt_builddeps(picks)
    for deb in apt_extra:
        if deb not in apt:
            apt.append(deb)
    return BuildPlan(python=python, pins=dict(picks), apt_packages=tuple(apt))


def is_environment_limited(logs: list[str], platform_imports=()) -> bool:
    """Terminal classification: platform-embedded imports or embedded-runtime
    failure text."""
    if platform_imports:
        return True
    joined = "\n".join(logs)
    return any(p.search(joined) for p in EMBEDDED_RUNTIME_PATTERNS)


def _forbid_picked(
    graph: ConstraintGraph, package: str, picks: dict[str, Version], origin: str, note: str
) -> Move:
    picked = picks.get(package)
    if picked is None:
        return Move(kind="blocked", note=f"{note}: {package} not pinned")
    constraint = InjectedConstraint(
        kind="forbid_version", origin=origin, package=package, version=picked
    )
    try:
        return Move(kind="graph", graph=apply_injection(graph, constraint), injection=constraint, note=note)
    except ValueError as exc:
        return Move(kind="blocked", note=str(exc))


def decide_move(
    err: ClassifiedError,
    graph: ConstraintGraph,
    picks: dict[str, Version],
    state: RepairState,
    registry,
    llm,
    cache,
) -> Move:
    """Map a classified failure to the repair action the episode driver
    applies. Model calls happen only on the missing-module path (mapper
    ladder) after every deterministic option is exhausted."""
    origin = err.type.value

    if err.type is ErrorType.VersionNotFound:
        if err.package is None:
            return Move(kind="blocked", note="version-not-found without package")
        package = normalize_name(err.package)
        if err.version is not None and package in graph.nodes:
            constraint = InjectedConstraint(
                kind="forbid_version",
                origin=origin,
                package=package,
                version=_version_or_none(err.version),
            )
            if constraint.version is not None:
                try:
                    return Move(
                        kind="graph",
                        graph=apply_injection(graph, constraint),
                        injection=constraint,
                        note="forbid reported version",
                    )
                except ValueError:
                    pass
        return _forbid_picked(graph, package, picks, origin, "forbid picked version")

    if err.type is ErrorType.DependencyConflict:
        if err.package is not None and err.specifier is not None:
            package = normalize_name(err.package)
            try:
                spec = parse_specifier_set(err.specifier)
            except MalformedSpecifier:
                spec = None
            if spec is not None and package in graph.nodes:
                constraint = InjectedConstraint(
                    kind="require_specifier", origin=origin, package=package, specifier=spec
                )
                try:
                    return Move(
                        kind="graph",
                        graph=apply_injection(graph, constraint),
                        injection=constraint,
                        note="require reported specifier",
                    )
                except ValueError:
                    pass
            if package in graph.nodes:
                # unparseable or no-op payload: degrade to forbidding the pick
                return _forbid_picked(graph, package, picks, origin, "conflict degraded to forbid")
        return Move(kind="blocked", note="conflict names no usable package")

    if err.type is ErrorType.ModuleNotFound:
        if err.module is None:
            return Move(kind="blocked", note="missing module unnamed")
        root_name = err.module.split(".")[0]
        try:
            result = resolve_import(root_name, registry, llm, cache)
        except UnmappableImport:
            if root_name not in state.unresolved_imports:
                state.unresolved_imports.append(root_name)
            return Move(kind="blocked", note=f"unmappable module {root_name}")
        if result.package in graph.roots:
            return Move(kind="blocked", note=f"{result.package} already a root")
        return Move(kind="new_root", root=result.package, note=f"mapped {root_name}")

    if err.type is ErrorType.SyntaxError_:
        constraint = InjectedConstraint(kind="pin_python", origin=origin, python=None)
        return Move(kind="advance", injection=constraint, note="interpreter mismatch")

    if err.type is ErrorType.NonZeroCode:
        package = normalize_name(err.package) if err.package else None
        if package is not None:
            # pre-injected build deps count: only genuinely absent apt
            # packages constitute a new move
            current_apt = set(apt_builddeps(picks)) | set(state.apt_extra)
            debs = APT_BUILD_DEPS.get(package, ())
            missing = tuple(d for d in debs if d not in current_apt)
            if missing:
                return Move(kind="apt", apt_add=missing, note=f"build deps for {package}")
            swap = BINARY_VARIANT_SWAPS.get(package)
            if swap is not None and package in graph.roots and registry.has_project(swap):
                return Move(
                    kind="swap_root", swap_out=package, root=normalize_name(swap), note="binary variant"
                )
            return _forbid_picked(graph, package, picks, origin, "rebuild failed; forbid pick")
        return Move(kind="blocked", note="non-zero exit without package payload")

    if err.type is ErrorType.SystemLibError:
        if err.lib is not None:
            current_apt = set(apt_builddeps(picks)) | set(state.apt_extra)
            for fragment, deb in SHARED_LIB_APT.items():
                if fragment in err.lib and deb not in current_apt:
                    return Move(kind="apt", apt_add=(deb,), note=f"shared lib {err.lib}")
        return Move(kind="blocked", note="no apt mapping for shared lib")

    # ImportError / AttributeError / ContainerTimeout / ExecutionError /
    # EnvironmentErrorFallback: forbid the implicated pick when extractable,
    # otherwise advance the interpreter sweep.
    implicated = None
    if err.module is not None:
        candidate = err.module.split(".")[0]
        try:
            candidate = normalize_name(candidate)
        except Exception:
            candidate = None
        if candidate in picks:
            implicated = candidate
    if implicated is not None:
        return _forbid_picked(graph, implicated, picks, origin, "forbid implicated pick")
    if err.type in (ErrorType.ImportError_, ErrorType.AttributeError_):
        # try the import roots: a restructured-internals failure usually
        # implicates the only pinned root
        if len(picks) == 1:
            only = next(iter(picks))
            return _forbid_picked(graph, only, picks, origin, "forbid sole pick")
    return Move(kind="advance", note=f"{origin} without extractable package")


def _version_or_none(text: str) -> Version | None:
    try:
        return parse_version(text)
    except MalformedVersion:
        return None

"""Per-snippet orchestration and corpus mode.

A snippet flows through import extraction, platform-embedded triage,
interpreter detection, import mapping, era estimation, graph construction,
solving, validation, and the bounded repair loop with its recovery ladder.
Interpreter candidates are tried strictly sequentially with early
termination; the first candidate gets the standard iteration budget, swept
candidates get three each.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .docker import DockerBackend, SimulatedBackend, WorldRules, validate
from .exceptions import (
    ConfigError,
    EmptySource,
    NoTemporalData,
    UnmappableImport,
)
from .graph import build_graph, replace_uninstallable
from .interpreters import SUPPORTED_PYTHONS
from .llm import LiveBackend, LlmGateway, StubBackend
from .mapper import MappingCache, audit_cache, resolve_import
from .registry import ERA_SENTINEL, FixtureIndex, LiveRegistry, estimate_era
from .repair import (
    RepairState,
    SWEEP_BUDGET,
    decide_move,
    is_environment_limited,
    make_plan,
    plan_digest,
)
from .snippet import ImportSet, classify_platform_only, detect_python_candidates, extract_imports
from .solver import solve
from .taxonomy import ErrorType, classify
from .versions import normalize_name

__all__ = [
    "Config",
    "CorpusSummary",
    "ResolutionReport",
    "Services",
    "build_services",
    "resolve_snippet",
    "run_corpus",
    "write_reports",
]

STATUS_PASS = "Pass"
STATUS_OTHER_PASS = "OtherPass"
STATUS_FAIL = "Fail"


@dataclass
class Config:
    offline_index: Path | None = None
    world: Path | None = None
    llm: str = "stub"  # "stub" | "live"
    llm_url: str = "http://localhost:11434"
    llm_fixture: Path | None = None
    backend: str = "sim"  # "sim" | "docker"
    seed: int = 0
    max_iterations: int = 5
    report: Path | None = None
    jobs: int = 1
    verbose: bool = False
    cache_dir: Path | None = None


@dataclass
class Services:
    registry: object
    llm: LlmGateway
    backend: object
    mapping_cache: MappingCache
    timing: str  # "simulated" | "measured"


def build_services(config: Config) -> Services:
    if config.backend == "sim":
        if config.offline_index is None or config.world is None:
            raise ConfigError("simulated mode needs --offline-index and --world")
        registry = FixtureIndex(config.offline_index)
        backend = SimulatedBackend(WorldRules.from_file(config.world))
        timing = "simulated"
    elif config.backend == "docker":
        registry = (
            FixtureIndex(config.offline_index) if config.offline_index else LiveRegistry()
        )
        backend = DockerBackend()
        timing = "measured"
    else:
        raise ConfigError(f"unknown backend {config.backend!r}")

    if config.llm == "stub":
        llm_backend = (
            StubBackend.from_file(config.llm_fixture) if config.llm_fixture else StubBackend()
        )
    elif config.llm == "live":
        llm_backend = LiveBackend(config.llm_url)
    else:
        raise ConfigError(f"unknown llm mode {config.llm!r}")

    llm_cache = config.cache_dir / "llm-cache.tsv" if config.cache_dir else None
    map_cache = config.cache_dir / "mappings.tsv" if config.cache_dir else None
    mapping_cache = MappingCache(map_cache)
    if mapping_cache.entries and isinstance(registry, FixtureIndex):
        # stale cached mappings silently poison later runs; re-validate on load
        audit_cache(mapping_cache, registry)
    return Services(
        registry=registry,
        llm=LlmGateway(llm_backend, cache_path=llm_cache),
        backend=backend,
        mapping_cache=mapping_cache,
        timing=timing,
    )


@dataclass(frozen=True)
class TraceEntry:
    plan_digest: str
    status: str
    error_class: str | None
    python: str
    action: str | None

    def to_dict(self) -> dict:
        return {
            "plan_digest": self.plan_digest,
            "status": self.status,
            "error_class": self.error_class,
            "python": self.python,
            "action": self.action,
        }


@dataclass
class ResolutionReport:
    snippet_id: str
    status: str
    error_type: str | None
    python: str | None
    pins: dict[str, str]
    llm_calls: int
    docker_iterations: int
    wall_time_ms: int
    timing: str
    first_build_pass: bool
    single_version_pass: bool
    no_llm_pass: bool
    era: str | None
    era_fallback: bool
    unresolved_imports: list[str]
    dropped_roots: list[list[str]]
    iteration_trace: list[TraceEntry]
    notes: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        # the three metric identities hold on every report by definition
        assert self.no_llm_pass == (self.status == STATUS_PASS and self.llm_calls == 0)
        assert self.first_build_pass == (self.status == STATUS_PASS and self.docker_iterations == 1)
        if self.status != STATUS_PASS:
            assert not self.single_version_pass
        if self.status == STATUS_PASS:
            assert self.iteration_trace and self.iteration_trace[-1].status == "Pass"

    def to_dict(self) -> dict:
        return {
            "snippet_id": self.snippet_id,
            "status": self.status,
            "error_type": self.error_type,
            "python": self.python,
            "pins": dict(sorted(self.pins.items())),
            "llm_calls": self.llm_calls,
            "docker_iterations": self.docker_iterations,
            "wall_time_ms": self.wall_time_ms,
            "timing": self.timing,
            "first_build_pass": self.first_build_pass,
            "single_version_pass": self.single_version_pass,
            "no_llm_pass": self.no_llm_pass,
            "era": self.era,
            "era_fallback": self.era_fallback,
            "unresolved_imports": list(self.unresolved_imports),
            "dropped_roots": [list(d) for d in self.dropped_roots],
            "iteration_trace": [t.to_dict() for t in self.iteration_trace],
            "notes": list(self.notes),
        }


@dataclass
class CorpusSummary:
    total: int
    passes: int
    pass_rate: float
    median_time_ms: int
    p90_time_ms: int
    mean_llm_calls: float
    mean_docker_iterations: float
    failure_breakdown: dict[str, int]

    def to_dict(self) -> dict:
        return {
            "total": self.total,
            "passes": self.passes,
            "pass_rate": self.pass_rate,
            "median_time_ms": self.median_time_ms,
            "p90_time_ms": self.p90_time_ms,
            "mean_llm_calls": self.mean_llm_calls,
            "mean_docker_iterations": self.mean_docker_iterations,
            "failure_breakdown": dict(sorted(self.failure_breakdown.items())),
        }


@dataclass
class _EpisodeResult:
    passed: bool
    python: str | None
    picks: dict
    docker_iterations: int
    wall_ms: int
    trace: list[TraceEntry]
    last_error: ErrorType | None
    env_limited: bool
    on_first_candidate: bool
    dropped_roots: tuple


def _emit(observer, event: str, **payload) -> None:
    if observer is not None:
        observer({"event": event, **payload})


def _alias_rung(state: RepairState, services: Services) -> list[str]:
    """Recovery ladder rung one: model alias re-resolution of unresolvable
    imports, registry-validated."""
    added = []
    for name in list(state.unresolved_imports):
        answer = services.llm.ask("alias", name)
        if not answer:
            continue
        try:
            package = normalize_name(answer)
        except Exception:
            continue
        if services.registry.has_project(package):
            added.append(package)
            state.unresolved_imports.remove(name)
    return added


def _rebuild(roots, services, era, seed, python, state):
    graph = build_graph(
        roots, services.registry, era, services.llm, seed, python, injected=state.injected
    )
    graph = replace_uninstallable(graph, services.registry, services.llm, era, seed)
    state.injected = graph.injected
    return graph


def _run_episode(
    source: str,
    roots: list[str],
    ordered_pythons: tuple[str, ...],
    era,
    services: Services,
    config: Config,
    state: RepairState,
    platform_imports,
    observer=None,
) -> _EpisodeResult:
    trace: list[TraceEntry] = []
    docker_iterations = 0
    wall_ms = 0
    last_error: ErrorType | None = None
    logs: list[str] = []
    roots_now = list(roots)
    dropped: tuple = ()

    for candidate_index, python in enumerate(ordered_pythons):
        budget = config.max_iterations if candidate_index == 0 else SWEEP_BUDGET
        graph = _rebuild(roots_now, services, era, config.seed, python, state)
        roots_now = list(graph.roots)
        dropped = graph.dropped_roots
        used = 0
        while used < budget:
            assignment = solve(graph, config.seed)
            plan = make_plan(python, assignment.picks, state.apt_extra)
            digest = plan_digest(plan)
            if digest in state.seen_digests:
                _emit(observer, "dedup_reject", digest=digest, python=python)
                if not state.alias_rung_used and state.unresolved_imports:
                    state.alias_rung_used = True
                    added = _alias_rung(state, services)
                    if added:
                        roots_now.extend(added)
                        graph = _rebuild(roots_now, services, era, config.seed, python, state)
                        continue
                break  # dedup guard: advance the sweep instead of repeating
            state.seen_digests.add(digest)
            outcome = validate(plan, services.backend, source, docker_iterations + 1)
            docker_iterations += 1
            used += 1
            wall_ms += outcome.duration_ms
            _emit(observer, "validate", plan=plan, digest=digest, outcome=outcome)
            if outcome.passed:
                trace.append(TraceEntry(digest, outcome.status, None, python, None))
                return _EpisodeResult(
                    passed=True,
                    python=python,
                    picks=assignment.picks,
                    docker_iterations=docker_iterations,
                    wall_ms=wall_ms,
                    trace=trace,
                    last_error=None,
                    env_limited=False,
                    on_first_candidate=candidate_index == 0,
                    dropped_roots=dropped,
                )
            err = classify(outcome.log, services.llm)
            logs.append(outcome.log)
            last_error = err.type
            move = decide_move(
                err,
                graph,
                assignment.picks,
                state,
                services.registry,
                services.llm,
                services.mapping_cache,
            )
            action = move.injection.kind if move.injection is not None else move.kind
            trace.append(TraceEntry(digest, outcome.status, err.type.value, python, action))
            _emit(observer, "move", error=err, move=move, graph_before=graph)
            if move.kind == "graph":
                graph = move.graph
                state.injected = graph.injected
            elif move.kind == "apt":
                state.apt_extra.extend(d for d in move.apt_add if d not in state.apt_extra)
            elif move.kind == "new_root":
                roots_now.append(move.root)
                graph = _rebuild(roots_now, services, era, config.seed, python, state)
            elif move.kind == "swap_root":
                roots_now = [r for r in roots_now if r != move.swap_out] + [move.root]
                graph = _rebuild(roots_now, services, era, config.seed, python, state)
            elif move.kind == "advance":
                break
            else:  # blocked: rung one if available, else advance the sweep
                if not state.alias_rung_used and state.unresolved_imports:
                    state.alias_rung_used = True
                    added = _alias_rung(state, services)
                    if added:
                        roots_now.extend(added)
                        graph = _rebuild(roots_now, services, era, config.seed, python, state)
                        continue
                break

    env_limited = is_environment_limited(logs, platform_imports)
    return _EpisodeResult(
        passed=False,
        python=None,
        picks={},
        docker_iterations=docker_iterations,
        wall_ms=wall_ms,
        trace=trace,
        last_error=last_error,
        env_limited=env_limited,
        on_first_candidate=False,
        dropped_roots=dropped,
    )


def resolve_snippet(
    path: str | Path, config: Config, services: Services | None = None, observer=None
) -> ResolutionReport:
    path = Path(path)
    source = path.read_text()
    snippet_id = path.stem
    services = services or build_services(config)
    services.llm.begin_snippet(snippet_id)
    started = time.monotonic()
    notes: list[str] = []

    try:
        imports = extract_imports(source)
    except EmptySource:
        imports = ImportSet(frozenset(), frozenset(), frozenset())
        notes.append("no import statements found")

    decision = classify_platform_only(imports)
    imports = decision.imports
    if decision.other_pass:
        return _finish(
            snippet_id,
            STATUS_OTHER_PASS,
            services,
            config,
            notes=notes + [f"platform-embedded imports: {', '.join(sorted(imports.platform_only))}"],
            started=started,
        )

    candidates = detect_python_candidates(source)
    ordered = tuple(v for v in candidates.ordered if v in SUPPORTED_PYTHONS)

    state = RepairState()
    roots: list[str] = []
    for module in sorted(imports.modules):
        try:
            result = resolve_import(module, services.registry, services.llm, services.mapping_cache)
            roots.append(result.package)
        except UnmappableImport:
            state.unresolved_imports.append(module)

    if not roots and state.unresolved_imports:
        state.alias_rung_used = True
        roots.extend(_alias_rung(state, services))
    if not roots and (imports.modules or state.unresolved_imports):
        return _finish(
            snippet_id,
            STATUS_FAIL,
            services,
            config,
            error_type=ErrorType.ModuleNotFound.value,
            unresolved=state.unresolved_imports,
            notes=notes + ["no import could be mapped to a distribution"],
            started=started,
        )

    era = None
    era_fallback = False
    if roots:
        try:
            era = estimate_era(roots, services.registry)
        except NoTemporalData:
            era = ERA_SENTINEL
            era_fallback = True
            notes.append("no upload timestamps; era defaulted")
    else:
        era = ERA_SENTINEL
        era_fallback = True

    episode = _run_episode(
        source,
        roots,
        ordered,
        era,
        services,
        config,
        state,
        sorted(imports.platform_only),
        observer,
    )

    if episode.passed:
        status = STATUS_PASS
        error_type = None
    else:
        status = STATUS_FAIL
        if episode.env_limited:
            error_type = ErrorType.EnvironmentErrorFallback.value
        elif episode.last_error is not None:
            error_type = episode.last_error.value
        elif state.unresolved_imports:
            error_type = ErrorType.ModuleNotFound.value
        else:
            error_type = ErrorType.EnvironmentErrorFallback.value

    return _finish(
        snippet_id,
        status,
        services,
        config,
        error_type=error_type,
        python=episode.python,
        pins={k: str(v) for k, v in sorted(episode.picks.items())},
        docker_iterations=episode.docker_iterations,
        wall_ms=episode.wall_ms,
        trace=episode.trace,
        era=era.isoformat() if era is not None else None,
        era_fallback=era_fallback,
        unresolved=state.unresolved_imports,
        dropped=[list(d) for d in episode.dropped_roots],
        single_version=episode.passed and episode.on_first_candidate,
        notes=notes,
        started=started,
    )


def _finish(
    snippet_id: str,
    status: str,
    services: Services,
    config: Config,
    error_type: str | None = None,
    python: str | None = None,
    pins: dict | None = None,
    docker_iterations: int = 0,
    wall_ms: int = 0,
    trace: list | None = None,
    era: str | None = None,
    era_fallback: bool = False,
    unresolved: list | None = None,
    dropped: list | None = None,
    single_version: bool = False,
    notes: list | None = None,
    started: float = 0.0,
) -> ResolutionReport:
    llm_calls = services.llm.usage(snippet_id).calls
    if services.timing == "measured":
        wall_ms = int((time.monotonic() - started) * 1000)
    return ResolutionReport(
        snippet_id=snippet_id,
        status=status,
        error_type=error_type,
        python=python,
        pins=pins or {},
        llm_calls=llm_calls,
        docker_iterations=docker_iterations,
        wall_time_ms=wall_ms,
        timing=services.timing,
        first_build_pass=status == STATUS_PASS and docker_iterations == 1,
        single_version_pass=single_version,
        no_llm_pass=status == STATUS_PASS and llm_calls == 0,
        era=era,
        era_fallback=era_fallback,
        unresolved_imports=list(unresolved or []),
        dropped_roots=dropped or [],
        iteration_trace=trace or [],
        notes=notes or [],
    )


# --------------------------------------------------------------------------
# Corpus mode
# --------------------------------------------------------------------------


def summarize(reports: list[ResolutionReport]) -> CorpusSummary:
    """Pure fold over per-snippet reports; recomputable from the documents."""
    total = len(reports)
    passes = sum(1 for r in reports if r.status in (STATUS_PASS, STATUS_OTHER_PASS))
    times = sorted(r.wall_time_ms for r in reports)
    breakdown: dict[str, int] = {}
    for r in reports:
        if r.status == STATUS_FAIL and r.error_type:
            breakdown[r.error_type] = breakdown.get(r.error_type, 0) + 1
    if total == 0:
        return CorpusSummary(0, 0, 0.0, 0, 0, 0.0, 0.0, {})
    return CorpusSummary(
        total=total,
        passes=passes,
        pass_rate=round(passes / total, 4),
        median_time_ms=times[(total - 1) // 2],
        p90_time_ms=times[max(0, -(-9 * total // 10) - 1)],
        mean_llm_calls=round(sum(r.llm_calls for r in reports) / total, 4),
        mean_docker_iterations=round(sum(r.docker_iterations for r in reports) / total, 4),
        failure_breakdown=breakdown,
    )


def run_corpus(
    directory: str | Path, config: Config, services: Services | None = None
) -> tuple[CorpusSummary, list[ResolutionReport]]:
    directory = Path(directory)
    services = services or build_services(config)
    paths = sorted(directory.glob("*.py"))
    if config.jobs > 1:
        with ThreadPoolExecutor(max_workers=config.jobs) as pool:
            reports = list(pool.map(lambda p: resolve_snippet(p, config, services), paths))
    else:
        reports = [resolve_snippet(p, config, services) for p in paths]
    reports.sort(key=lambda r: r.snippet_id)
    summary = summarize(reports)
    if config.report is not None:
        write_reports(config.report, summary, reports)
    return summary, reports


def write_reports(
    target: str | Path, summary: CorpusSummary, reports: list[ResolutionReport]
) -> None:
    """One document per snippet plus a corpus summary, stable key order."""
    target = Path(target)
    target.mkdir(parents=True, exist_ok=True)
    for report in reports:
        path = target / f"{report.snippet_id}.json"
        path.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
    (target / "summary.json").write_text(
        json.dumps(summary.to_dict(), indent=2, sort_keys=True) + "\n"
    )

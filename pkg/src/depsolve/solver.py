"""Boolean encoding of the constraint graph and the three-phase solve.

One variable per (package, version) candidate. Clauses: at-least-one over
each root's candidates, pairwise at-most-one per package, an implication per
dependency edge, and unit clauses for injected constraints. Phase 1 solves
everything; phase 2 drops the soft (imputed) clauses; phase 3 falls back to
the greedy second-newest pick per root.

The search itself is a chronological-backtracking DPLL with a fixed decision
order (ascending variable index, false-first), which makes every solve
bit-reproducible. Candidate variables are indexed so the most preferred
release of a package carries the highest index; with false-first decisions
the model then settles on the preferred candidate whenever the constraints
allow it.
"""

from __future__ import annotations

from dataclasses import dataclass

from .exceptions import EncodingOverflow
from .graph import ConstraintGraph
from .versions import EnvContext, Version

__all__ = [
    "Assignment",
    "BoolVar",
    "ClauseSet",
    "encode",
    "greedy_fallback",
    "solve",
    "solve_cnf",
    "to_dimacs",
]

DEFAULT_VAR_CEILING = 50_000

PHASE_FULL = "full"
PHASE_SOFT_RELAXED = "soft_relaxed"
PHASE_GREEDY = "greedy"


@dataclass(frozen=True)
class BoolVar:
    package: str
    version: Version
    index: int


@dataclass(frozen=True)
class Assignment:
    picks: dict[str, Version]
    phase: str
    python: str


@dataclass
class ClauseSet:
    variables: tuple[BoolVar, ...]  # variables[i] has index i + 1
    clauses: list[tuple[int, ...]]
    soft_flags: list[bool]

    @property
    def num_vars(self) -> int:
        return len(self.variables)

    def hard_only(self) -> list[tuple[int, ...]]:
        return [c for c, soft in zip(self.clauses, self.soft_flags) if not soft]


def encode(
    graph: ConstraintGraph,
    env: EnvContext | None = None,
    var_ceiling: int = DEFAULT_VAR_CEILING,
) -> ClauseSet:
    env = env or EnvContext(python_version=graph.python)
    variables: list[BoolVar] = []
    var_of: dict[tuple[str, str], int] = {}
    for package in sorted(graph.nodes):
        # reversed: preferred candidates get the higher indices
        for rec in reversed(graph.nodes[package].candidates):
            index = len(variables) + 1
            variables.append(BoolVar(package, rec.version, index))
            var_of[(package, str(rec.version))] = index
    if len(variables) > var_ceiling:
        raise EncodingOverflow(f"{len(variables)} variables exceeds ceiling {var_ceiling}")

    clauses: list[tuple[int, ...]] = []
    soft_flags: list[bool] = []

    def emit(lits: tuple[int, ...], soft: bool = False) -> None:
        clauses.append(lits)
        soft_flags.append(soft)

    # at-least-one per root
    for root in graph.roots:
        lits = tuple(
            var_of[(root, str(rec.version))] for rec in graph.nodes.get(root, _EMPTY).candidates
        )
        emit(lits)  # empty tuple = falsum: an unreplaced dead root is infeasible

    # pairwise at-most-one per package
    for package in sorted(graph.nodes):
        indices = [var_of[(package, str(rec.version))] for rec in graph.nodes[package].candidates]
        for i in range(len(indices)):
            for j in range(i + 1, len(indices)):
                emit((-indices[i], -indices[j]))

    # dependency implications; edges to unmaterialized packages are vacuous
    for soft, edges in ((False, graph.hard_edges), (True, graph.soft_edges)):
        for edge in edges:
            if edge.dep not in graph.nodes:
                continue
            src = var_of.get((edge.package, str(edge.version)))
            if src is None:
                continue
            matching = tuple(
                var_of[(edge.dep, str(rec.version))]
                for rec in graph.nodes[edge.dep].candidates
                if edge.spec.matches(rec.version, env)
            )
            emit((-src,) + matching, soft=soft)

    # injected refinements
    forbidden: set[int] = set()
    for c in graph.injected:
        if c.kind == "forbid_version" and c.package is not None:
            idx = var_of.get((c.package, str(c.version)))
            if idx is not None and idx not in forbidden:
                forbidden.add(idx)
                emit((-idx,))
        elif c.kind == "require_specifier" and c.package is not None and c.package in graph.nodes:
            spec = c.specifier
            for rec in graph.nodes[c.package].candidates:
                if spec is not None and not spec.matches(rec.version, env):
                    idx = var_of[(c.package, str(rec.version))]
                    if idx not in forbidden:
                        forbidden.add(idx)
                        emit((-idx,))
        elif c.kind == "forbid_package" and c.package is not None and c.package in graph.nodes:
            for rec in graph.nodes[c.package].candidates:
                idx = var_of[(c.package, str(rec.version))]
                if idx not in forbidden:
                    forbidden.add(idx)
                    emit((-idx,))

    return ClauseSet(variables=tuple(variables), clauses=clauses, soft_flags=soft_flags)


class _Empty:
    candidates: tuple = ()


_EMPTY = _Empty()


# --------------------------------------------------------------------------
# DPLL
# --------------------------------------------------------------------------


def solve_cnf(num_vars: int, clauses: list[tuple[int, ...]]) -> dict[int, bool] | None:
    """Deterministic DPLL with unit propagation and chronological backtrack.

    Decision order: lowest unassigned variable index, polarity False first.
    Returns a total assignment or None on UNSAT.
    """
    if any(len(c) == 0 for c in clauses):
        return None
    assign: dict[int, bool] = {}
    trail: list[tuple[int, bool]] = []  # (var, is_decision_with_false_tried)

    def value(lit: int) -> bool | None:
        v = assign.get(abs(lit))
        if v is None:
            return None
        return v if lit > 0 else not v

    def propagate() -> bool:
        # scan to fixpoint; fine at this problem scale
        changed = True
        while changed:
            changed = False
            for clause in clauses:
                unassigned = None
                satisfied = False
                count = 0
                for lit in clause:
                    val = value(lit)
                    if val is True:
                        satisfied = True
                        break
                    if val is None:
                        unassigned = lit
                        count += 1
                        if count > 1:
                            break
                if satisfied or count > 1:
                    continue
                if count == 0:
                    return False  # conflict
                assign[abs(unassigned)] = unassigned > 0
                trail.append((abs(unassigned), False))
                changed = True
        return True

    def backtrack() -> bool:
        while trail:
            var, was_decision = trail.pop()
            flipped_to_true = assign[var]
            del assign[var]
            if was_decision and not flipped_to_true:
                assign[var] = True
                trail.append((var, True))
                return True
        return False

    if not propagate():
        return None
    while True:
        next_var = 1
        while next_var <= num_vars and next_var in assign:
            next_var += 1
        if next_var > num_vars:
            return dict(assign)
        assign[next_var] = False
        trail.append((next_var, True))
        while not propagate():
            if not backtrack():
                return None


# --------------------------------------------------------------------------
# Phased solve
# --------------------------------------------------------------------------


def _picks_from_model(cs: ClauseSet, model: dict[int, bool]) -> dict[str, Version]:
    picks: dict[str, Version] = {}
    for var in cs.variables:
        if model.get(var.index):
            picks[var.package] = var.version
    return picks


def _assert_exactly_one(graph: ConstraintGraph, picks: dict[str, Version]) -> None:
    for root in graph.roots:
        chosen = [rec for rec in graph.candidates_of(root) if str(rec.version) == str(picks.get(root))]
        if root in picks and len(chosen) != 1:
            raise AssertionError(f"root {root} picked {len(chosen)} versions")
        if root not in picks and graph.candidates_of(root):
            raise AssertionError(f"root {root} left unassigned")


def greedy_fallback(graph: ConstraintGraph) -> Assignment:
    """Second-newest version per root (newest when only one exists); edges
    ignored."""
    picks: dict[str, Version] = {}
    for root in graph.roots:
        versions = sorted((rec.version for rec in graph.candidates_of(root)), reverse=True)
        if not versions:
            continue
        picks[root] = versions[1] if len(versions) > 1 else versions[0]
    return Assignment(picks=picks, phase=PHASE_GREEDY, python=graph.python)


def solve(
    graph: ConstraintGraph,
    seed: int = 0,
    env: EnvContext | None = None,
    var_ceiling: int = DEFAULT_VAR_CEILING,
) -> Assignment:
    """Three-phase solve. The seed is accepted for interface stability; the
    built-in search is already fully deterministic."""
    del seed
    cs = encode(graph, env, var_ceiling)
    model = solve_cnf(cs.num_vars, cs.clauses)
    if model is not None:
        picks = _picks_from_model(cs, model)
        _assert_exactly_one(graph, picks)
        return Assignment(picks=picks, phase=PHASE_FULL, python=graph.python)
    model = solve_cnf(cs.num_vars, cs.hard_only())
    if model is not None:
        picks = _picks_from_model(cs, model)
        _assert_exactly_one(graph, picks)
        return Assignment(picks=picks, phase=PHASE_SOFT_RELAXED, python=graph.python)
    assignment = greedy_fallback(graph)
    _assert_exactly_one(graph, assignment.picks)
    return assignment


def to_dimacs(cs: ClauseSet) -> str:
    """Standard CNF text with variable-name comments, for cross-checking with
    external solvers."""
    lines = [f"c var {var.index} = {var.package}=={var.version}" for var in cs.variables]
    soft_ids = [str(i + 1) for i, soft in enumerate(cs.soft_flags) if soft]
    if soft_ids:
        lines.append("c soft clauses: " + " ".join(soft_ids))
    lines.append(f"p cnf {cs.num_vars} {len(cs.clauses)}")
    for clause in cs.clauses:
        lines.append(" ".join(str(lit) for lit in clause) + " 0")
    return "\n".join(lines) + "\n"

"""Hand-rolled graph builders and the exhaustive-enumeration oracle.

The oracle is deliberately independent of the encoder and search: it walks
the cartesian product of per-package choices and checks every edge with the
matcher directly.
"""

import itertools
from datetime import datetime, timezone

from depsolve.graph import ConstraintGraph, Edge
from depsolve.registry import CandidateSet, ReleaseRecord
from depsolve.versions import EnvContext, parse_specifier_set, parse_version

_ERA = datetime(2016, 1, 1, tzinfo=timezone.utc)


def candidate_set(package, versions, wheels=None):
    """Candidates ordered wheel-first then newest-first, like selection does."""
    records = []
    for i, v in enumerate(versions):
        has_wheel = True if wheels is None else wheels[i]
        records.append(
            ReleaseRecord(
                package=package,
                version=parse_version(v),
                upload_time=_ERA,
                has_wheel=has_wheel,
            )
        )
    records.sort(key=lambda r: r.version, reverse=True)
    records.sort(key=lambda r: not r.has_wheel)
    return CandidateSet(package=package, candidates=tuple(records), era_used=_ERA)


def make_graph(packages, roots, hard=(), soft=(), python="3.8", injected=()):
    """``packages``: name -> list of version strings (or (version, wheel)).

    ``hard``/``soft``: (package, version, dep, spec-text) tuples.
    """
    nodes = {}
    for name, versions in packages.items():
        plain = [v if isinstance(v, str) else v[0] for v in versions]
        wheels = [True if isinstance(v, str) else v[1] for v in versions]
        nodes[name] = candidate_set(name, plain, wheels)

    def edges(raw):
        return tuple(
            Edge(pkg, parse_version(ver), dep, parse_specifier_set(spec))
            for pkg, ver, dep, spec in raw
        )

    return ConstraintGraph(
        python=python,
        roots=tuple(sorted(roots)),
        nodes=nodes,
        hard_edges=edges(hard),
        soft_edges=edges(soft),
        injected=tuple(injected),
    )


def enumerate_solutions(graph, include_soft=True):
    """Every satisfying choice map, as {package: version-string} dicts.

    Root packages must pick a candidate; other packages may also pick
    nothing. Edges whose dependency package is unmaterialized are vacuous.
    """
    env = EnvContext(python_version=graph.python)
    names = sorted(graph.nodes)
    options = []
    for name in names:
        versions = [rec.version for rec in graph.nodes[name].candidates]
        options.append(versions if name in graph.roots else versions + [None])

    edges = list(graph.hard_edges) + (list(graph.soft_edges) if include_soft else [])
    forbid_version = set()
    require = []
    forbid_package = set()
    for c in graph.injected:
        if c.kind == "forbid_version":
            forbid_version.add((c.package, str(c.version)))
        elif c.kind == "require_specifier":
            require.append((c.package, c.specifier))
        elif c.kind == "forbid_package":
            forbid_package.add(c.package)

    solutions = []
    for combo in itertools.product(*options):
        pick = dict(zip(names, combo))
        ok = True
        for (pkg, ver) in forbid_version:
            if pkg in pick and pick[pkg] is not None and str(pick[pkg]) == ver:
                ok = False
                break
        if ok:
            for pkg, spec in require:
                if pick.get(pkg) is not None and not spec.matches(pick[pkg], env):
                    ok = False
                    break
        if ok:
            for pkg in forbid_package:
                if pick.get(pkg) is not None:
                    ok = False
                    break
        if ok:
            for edge in edges:
                if edge.dep not in graph.nodes:
                    continue
                if pick.get(edge.package) is None or str(pick[edge.package]) != str(edge.version):
                    continue
                dep_pick = pick.get(edge.dep)
                if dep_pick is None or not edge.spec.matches(dep_pick, env):
                    ok = False
                    break
        if ok:
            solutions.append({k: str(v) for k, v in pick.items() if v is not None})
    return solutions


def random_graph(rng, max_packages=6, max_versions=5, max_edges=10):
    """Seeded random instance for solver-vs-oracle equivalence runs."""
    n_packages = rng.randint(2, max_packages)
    names = [f"p{i}" for i in range(n_packages)]
    packages = {}
    for name in names:
        n_versions = rng.randint(1, max_versions)
        versions = rng.sample(["1.0", "2.0", "3.0", "4.0", "5.0"], n_versions)
        packages[name] = versions
    n_roots = rng.randint(1, n_packages)
    roots = rng.sample(names, n_roots)
    spec_pool = [">=2.0", "<4.0", "==3.0", "!=2.0", ">=1.0,<3.0", ">3.0", "<=2.0"]
    hard, soft = [], []
    for _ in range(rng.randint(0, max_edges)):
        src = rng.choice(names)
        src_ver = rng.choice(packages[src])
        dep = rng.choice([n for n in names if n != src])
        spec = rng.choice(spec_pool)
        (hard if rng.random() < 0.7 else soft).append((src, src_ver, dep, spec))
    return make_graph(packages, roots, hard=hard, soft=soft)

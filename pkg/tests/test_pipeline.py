import json

import pytest

from depsolve.exceptions import ConfigError
from depsolve.pipeline import (
    Config,
    Services,
    build_services,
    resolve_snippet,
    run_corpus,
    summarize,
)

from conftest import release, write_index


def ts(year, month=1):
    return f"{year:04d}-{month:02d}-01T00:00:00Z"


BASIC_INDEX = {
    "flask": [
        {"version": "2.0", "upload_time": ts(2021, 5), "has_wheel": True,
         "requires_dist": ["werkzeug>=2.0"]},
    ],
    "werkzeug": [
        release("0.16", ts(2019, 9)),
        release("2.0", ts(2021, 5)),
        release("2.3.3", ts(2023, 5)),
    ],
    "requests": [release("2.25.1", ts(2021))],
    "six": [release("1.16.0", ts(2021))],
}


def services_for(tmp_path, projects, rules, llm_answers=None, seed=0, max_iterations=5):
    from depsolve.docker import SimulatedBackend, WorldRules
    from depsolve.llm import LlmGateway, StubBackend
    from depsolve.mapper import MappingCache

    registry = write_index(tmp_path / "index", {k: v for k, v in projects.items()})
    world = tmp_path / "world.json"
    world.write_text(json.dumps({"rules": rules}))
    services = Services(
        registry=registry,
        llm=LlmGateway(StubBackend(llm_answers or {})),
        backend=SimulatedBackend(WorldRules.from_file(world)),
        mapping_cache=MappingCache(),
        timing="simulated",
    )
    config = Config(
        offline_index=tmp_path / "index", world=world, seed=seed, max_iterations=max_iterations
    )
    return services, config


def snippet(tmp_path, name, source):
    d = tmp_path / "snippets"
    d.mkdir(exist_ok=True)
    p = d / name
    p.write_text(source)
    return p


PASS_ALL = [{"when": {}, "then": {"status": "Pass"}}]


def test_platform_only_snippet_bypasses_validation(tmp_path):
    services, config = services_for(tmp_path, {}, PASS_ALL)
    report = resolve_snippet(snippet(tmp_path, "s.py", "import winreg\n"), config, services)
    assert report.status == "OtherPass"
    assert report.docker_iterations == 0
    assert report.llm_calls == 0
    assert report.pins == {}


def test_first_try_pass_metrics(tmp_path):
    services, config = services_for(tmp_path, BASIC_INDEX, PASS_ALL)
    report = resolve_snippet(snippet(tmp_path, "s.py", "import requests\n"), config, services)
    assert report.status == "Pass"
    assert report.first_build_pass
    assert report.single_version_pass
    assert report.no_llm_pass
    assert report.docker_iterations == 1
    assert report.pins == {"requests": "2.25.1"}
    assert report.python == "2.7"  # fallback candidate list starts at 2.7


def test_conflict_then_pass_two_iterations(tmp_path):
    rules = [
        {"when": {"pins": {"werkzeug": "==2.3.3"}},
         "then": {"status": "BuildFail",
                  "log": "flask 2.0 requires werkzeug<2.1, but you have werkzeug 2.3.3 "
                         "which is incompatible."}},
        {"when": {}, "then": {"status": "Pass"}},
    ]
    services, config = services_for(tmp_path, BASIC_INDEX, rules)
    report = resolve_snippet(
        snippet(tmp_path, "s.py", "import flask\nimport werkzeug\n"), config, services
    )
    assert report.status == "Pass"
    assert report.docker_iterations == 2
    assert len(report.iteration_trace) == 2
    assert report.iteration_trace[0].error_class == "DependencyConflict"
    assert report.iteration_trace[0].action == "require_specifier"
    assert report.pins["werkzeug"] == "2.0"
    assert not report.first_build_pass
    assert report.single_version_pass  # still the first interpreter candidate


def test_version_not_found_repair(tmp_path):
    projects = {"pkg": [release("1.0", ts(2019)), release("2.0", ts(2021))]}
    rules = [
        {"when": {"pins": {"pkg": "==2.0"}},
         "then": {"status": "BuildFail",
                  "log": "ERROR: No matching distribution found for pkg==2.0"}},
        {"when": {}, "then": {"status": "Pass"}},
    ]
    services, config = services_for(tmp_path, projects, rules)
    report = resolve_snippet(snippet(tmp_path, "s.py", "import pkg\n"), config, services)
    assert report.status == "Pass"
    assert report.pins == {"pkg": "1.0"}
    assert report.iteration_trace[0].error_class == "VersionNotFound"


def test_imputation_consumes_one_llm_call(tmp_path):
    projects = {
        "theano": [
            {"version": "0.9.0", "upload_time": ts(2017, 3), "has_wheel": True,
             "requires_dist": None},
        ],
        "numpy": [release("1.9.3", ts(2015))],
        "scipy": [release("0.19.1", ts(2017))],
        "six": [release("1.10.0", ts(2016))],
    }
    answers = {"impute_deps:theano==0.9.0": "numpy\nscipy\nsix"}
    services, config = services_for(tmp_path, projects, PASS_ALL, answers)
    report = resolve_snippet(snippet(tmp_path, "s.py", "import theano\n"), config, services)
    assert report.status == "Pass"
    assert report.llm_calls == 1
    assert not report.no_llm_pass
    assert set(report.pins) == {"theano", "numpy", "scipy", "six"}


def test_interpreter_sweep_second_candidate(tmp_path):
    # the world scripts a syntax failure on 2.7/3.6 and passes on 3.8
    rules = [
        {"when": {"python": ["2.7", "3.6"]},
         "then": {"status": "RunFail",
                  "log": "SyntaxError: invalid syntax"}},
        {"when": {}, "then": {"status": "Pass"}},
    ]
    services, config = services_for(tmp_path, BASIC_INDEX, rules)
    report = resolve_snippet(snippet(tmp_path, "s.py", "import requests\n"), config, services)
    assert report.status == "Pass"
    assert report.python == "3.8"
    assert not report.single_version_pass
    assert report.docker_iterations == 3  # 2.7, 3.6, then 3.8 passes


def test_runtime_module_not_found_adds_root(tmp_path):
    projects = dict(BASIC_INDEX)
    projects["beautifulsoup4"] = [release("4.9.3", ts(2020))]
    rules = [
        {"when": {"pins_absent": ["beautifulsoup4"]},
         "then": {"status": "RunFail",
                  "log": "ModuleNotFoundError: No module named 'bs4'"}},
        {"when": {}, "then": {"status": "Pass"}},
    ]
    services, config = services_for(tmp_path, projects, rules)
    report = resolve_snippet(snippet(tmp_path, "s.py", "import requests\n"), config, services)
    assert report.status == "Pass"
    assert "beautifulsoup4" in report.pins
    assert report.docker_iterations == 2


def test_unmappable_imports_fail_without_validation(tmp_path):
    services, config = services_for(tmp_path, {}, PASS_ALL)
    report = resolve_snippet(
        snippet(tmp_path, "s.py", "import totallyfakemodule123\n"), config, services
    )
    assert report.status == "Fail"
    assert report.error_type == "ModuleNotFound"
    assert report.docker_iterations == 0
    assert report.unresolved_imports == ["totallyfakemodule123"]


def test_alias_rung_rescues_unmappable_import(tmp_path):
    projects = {"super-resolver": [release("1.0", ts(2020))]}
    answers = {"alias:srmod": "super-resolver"}
    services, config = services_for(tmp_path, projects, PASS_ALL, answers)
    report = resolve_snippet(snippet(tmp_path, "s.py", "import srmod\n"), config, services)
    assert report.status == "Pass"
    assert report.pins == {"super-resolver": "1.0"}
    assert report.llm_calls >= 1


def test_embedded_runtime_failure_is_terminal_environment_class(tmp_path):
    projects = {"bpy": [release("2.82", ts(2020))]}
    rules = [
        {"when": {},
         "then": {"status": "RunFail",
                  "log": "ImportError: bpy requires an embedded runtime (Blender)"}},
    ]
    services, config = services_for(tmp_path, projects, rules)
    report = resolve_snippet(snippet(tmp_path, "s.py", "import bpy\nimport os\n"), config, services)
    # bpy is platform-embedded, and the snippet has no other third-party
    # imports, so it terminates as OtherPass before validation
    assert report.status == "OtherPass"

    # a registry-mapped import with an embedded-runtime log classifies as an
    # environment limitation after the sweep exhausts
    projects2 = {"fakesdk": [release("1.0", ts(2020))]}
    services2, config2 = services_for(tmp_path, projects2, rules)
    report2 = resolve_snippet(
        snippet(tmp_path, "s2.py", "import fakesdk\n"), config2, services2
    )
    assert report2.status == "Fail"
    assert report2.error_type == "EnvironmentErrorFallback"


def test_no_digest_repeats_within_episode(tmp_path):
    rules = [{"when": {}, "then": {"status": "RunFail", "log": "RuntimeError: kaboom\nTraceback (most recent call last):"}}]
    services, config = services_for(tmp_path, BASIC_INDEX, rules)
    report = resolve_snippet(snippet(tmp_path, "s.py", "import six\n"), config, services)
    assert report.status == "Fail"
    digests = [t.plan_digest for t in report.iteration_trace]
    assert len(digests) == len(set(digests))


def test_era_recorded_in_report(tmp_path):
    services, config = services_for(tmp_path, BASIC_INDEX, PASS_ALL)
    report = resolve_snippet(snippet(tmp_path, "s.py", "import requests\n"), config, services)
    assert report.era is not None and report.era.startswith("2021-")
    assert not report.era_fallback


def test_era_sentinel_when_no_timestamps(tmp_path):
    projects = {"nodate": [release("1.0", None)]}
    services, config = services_for(tmp_path, projects, PASS_ALL)
    report = resolve_snippet(snippet(tmp_path, "s.py", "import nodate\n"), config, services)
    assert report.era_fallback
    assert report.era.startswith("2016-01-01")


# -- corpus mode ----------------------------------------------------------------


def test_corpus_metrics_fold(tmp_path):
    services, config = services_for(tmp_path, BASIC_INDEX, PASS_ALL)
    d = tmp_path / "corpus"
    d.mkdir()
    (d / "a.py").write_text("import requests\n")
    (d / "b.py").write_text("import six\n")
    (d / "c.py").write_text("import winreg\n")
    (d / "d.py").write_text("import totallyfakemodule123\n")
    summary, reports = run_corpus(d, config, services)
    assert summary.total == 4
    assert summary.passes == 3
    assert summary.pass_rate == 0.75
    assert summary.failure_breakdown == {"ModuleNotFound": 1}
    assert [r.snippet_id for r in reports] == ["a", "b", "c", "d"]


def test_empty_corpus(tmp_path):
    services, config = services_for(tmp_path, BASIC_INDEX, PASS_ALL)
    d = tmp_path / "corpus"
    d.mkdir()
    summary, reports = run_corpus(d, config, services)
    assert summary.total == 0 and reports == []


def test_summary_recomputable_from_reports(tmp_path):
    services, config = services_for(tmp_path, BASIC_INDEX, PASS_ALL)
    d = tmp_path / "corpus"
    d.mkdir()
    (d / "a.py").write_text("import requests\n")
    (d / "b.py").write_text("import totallyfakemodule123\n")
    summary, reports = run_corpus(d, config, services)
    assert summarize(reports) == summary


def test_report_files_written_with_stable_shape(tmp_path):
    services, config = services_for(tmp_path, BASIC_INDEX, PASS_ALL)
    config.report = tmp_path / "out"
    d = tmp_path / "corpus"
    d.mkdir()
    (d / "a.py").write_text("import requests\n")
    run_corpus(d, config, services)
    doc = json.loads((config.report / "a.json").read_text())
    assert doc["status"] == "Pass"
    assert doc["timing"] == "simulated"
    assert list(doc) == sorted(doc)
    assert (config.report / "summary.json").exists()


def test_build_services_requires_fixture_roots(tmp_path):
    with pytest.raises(ConfigError):
        build_services(Config(backend="sim", offline_index=None, world=None))

"""Command-line interface: ``resolve`` one snippet or run a ``corpus``.

Fixture paths come from flags or their ``DEPSOLVE_``-prefixed environment
equivalents. Exit codes: 0 pass, 1 fail, 2 configuration error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .exceptions import ConfigError, DepsolveError
from .pipeline import Config, build_services, resolve_snippet, run_corpus


def _env_path(name: str) -> Path | None:
    value = os.environ.get(f"DEPSOLVE_{name}")
    return Path(value) if value else None


def _add_common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--offline-index", type=Path, default=_env_path("OFFLINE_INDEX"),
                        help="directory of per-package metadata documents")
    parser.add_argument("--world", type=Path, default=_env_path("WORLD"),
                        help="simulated-world rules file")
    parser.add_argument("--llm", choices=("stub", "live"), default="stub")
    parser.add_argument("--llm-url", default="http://localhost:11434")
    parser.add_argument("--llm-fixture", type=Path, default=_env_path("LLM_FIXTURE"),
                        help="stub answers file (kind:subject -> answer)")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--backend", choices=("sim", "docker"), default="sim")
    parser.add_argument("--report", type=Path, default=_env_path("REPORT"))
    parser.add_argument("--max-iterations", type=int, default=5)
    parser.add_argument("--cache-dir", type=Path, default=_env_path("CACHE_DIR"),
                        help="persist mapping/llm caches here (off by default)")
    parser.add_argument("--verbose", action="store_true")


def _config_from(args: argparse.Namespace) -> Config:
    return Config(
        offline_index=args.offline_index,
        world=args.world,
        llm=args.llm,
        llm_url=args.llm_url,
        llm_fixture=args.llm_fixture,
        backend=args.backend,
        seed=args.seed,
        max_iterations=args.max_iterations,
        report=args.report,
        jobs=getattr(args, "jobs", 1),
        verbose=args.verbose,
        cache_dir=args.cache_dir,
    )


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="depsolve")
    sub = parser.add_subparsers(dest="command", required=True)

    p_resolve = sub.add_parser("resolve", help="resolve one snippet")
    p_resolve.add_argument("file", type=Path)
    _add_common_flags(p_resolve)

    p_corpus = sub.add_parser("corpus", help="resolve every snippet in a directory")
    p_corpus.add_argument("dir", type=Path)
    p_corpus.add_argument("--jobs", type=int, default=1)
    _add_common_flags(p_corpus)

    args = parser.parse_args(argv)
    config = _config_from(args)

    try:
        if args.command == "resolve":
            return _cmd_resolve(args.file, config)
        return _cmd_corpus(args.dir, config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DepsolveError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def _cmd_resolve(path: Path, config: Config) -> int:
    if not path.exists():
        raise ConfigError(f"no such snippet: {path}")
    services = build_services(config)
    report = resolve_snippet(path, config, services)
    line = f"{report.snippet_id}: {report.status}"
    if report.status == "Pass":
        pins = " ".join(f"{k}=={v}" for k, v in report.pins.items())
        line += f" (python {report.python}; {pins or 'no pins'})"
    elif report.status == "Fail":
        line += f" ({report.error_type})"
    print(line)
    if config.verbose:
        for entry in report.iteration_trace:
            err = f" {entry.error_class}" if entry.error_class else ""
            action = f" -> {entry.action}" if entry.action else ""
            print(f"  [{entry.python}] {entry.status}{err}{action}")
    if config.report is not None:
        config.report.parent.mkdir(parents=True, exist_ok=True)
        config.report.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
    if services.mapping_cache.dirty:
        services.mapping_cache.save()
    return 0 if report.status in ("Pass", "OtherPass") else 1


def _cmd_corpus(directory: Path, config: Config) -> int:
    if not directory.is_dir():
        raise ConfigError(f"no such corpus directory: {directory}")
    services = build_services(config)
    summary, reports = run_corpus(directory, config, services)
    for report in reports:
        suffix = f" ({report.error_type})" if report.status == "Fail" else ""
        print(f"{report.snippet_id}: {report.status}{suffix}")
    print(
        f"total {summary.total}  pass_rate {summary.pass_rate:.2%}  "
        f"median {summary.median_time_ms} ms  llm/snippet {summary.mean_llm_calls}  "
        f"iters/snippet {summary.mean_docker_iterations}"
    )
    if services.mapping_cache.dirty:
        services.mapping_cache.save()
    return 0


if __name__ == "__main__":
    sys.exit(main())

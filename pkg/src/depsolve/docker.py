"""Build-plan rendering and validation backends.

A plan pins exactly the solver's assignment. Rendering is pure text
generation: byte-identical output for equal plans, golden-tested. Validation
runs against either a real container daemon or a simulated world whose
declarative rules script pass/fail outcomes and log text per (python, pins,
apt) tuple; first matching rule wins.
"""

from __future__ import annotations

import json
import os
import shutil
import subprocess
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

from .exceptions import BackendUnavailable, MalformedSpecifier, UnsupportedInterpreter
from .interpreters import EOL_PYTHONS, SUPPORTED_PYTHONS
from .versions import Version, normalize_name, parse_specifier_set

__all__ = [
    "APT_BUILD_DEPS",
    "BuildPlan",
    "DockerBackend",
    "SHARED_LIB_APT",
    "SimulatedBackend",
    "ValidationOutcome",
    "WorldRules",
    "apt_builddeps",
    "render_dockerfile",
    "validate",
]

STATUS_PASS = "Pass"
STATUS_BUILD_FAIL = "BuildFail"
STATUS_RUN_FAIL = "RunFail"
STATUS_TIMEOUT = "Timeout"

BUILD_TIMEOUT_S = 450
RUN_TIMEOUT_S = 60

# Default simulated durations when a world rule scripts none.
SIM_BUILD_MS = 5000
SIM_RUN_MS = 1000

# 46 C-extension packages and the Debian packages their source builds need.
# Injected before the first build so known native-code pins do not waste an
# iteration failing on missing toolchains.
APT_BUILD_DEPS: dict[str, tuple[str, ...]] = {
    "scipy": ("gfortran", "libopenblas-dev"),
    "numpy": ("libopenblas-dev",),
    "scikit-learn": ("gfortran", "libopenblas-dev"),
    "scikit-image": ("libopenblas-dev",),
    "statsmodels": ("gfortran", "libopenblas-dev"),
    "theano": ("libopenblas-dev",),
    "gensim": ("libopenblas-dev",),
    "matplotlib": ("libfreetype6-dev", "libpng-dev", "pkg-config"),
    "pillow": ("libjpeg-dev", "zlib1g-dev", "libfreetype6-dev"),
    "pil": ("libjpeg-dev", "zlib1g-dev"),
    "lxml": ("libxml2-dev", "libxslt1-dev"),
    "psycopg2": ("libpq-dev",),
    "mysqlclient": ("default-libmysqlclient-dev",),
    "mysql-python": ("default-libmysqlclient-dev",),
    "pymssql": ("freetds-dev",),
    "pyodbc": ("unixodbc-dev",),
    "python-ldap": ("libldap2-dev", "libsasl2-dev"),
    "cryptography": ("libssl-dev", "libffi-dev"),
    "m2crypto": ("libssl-dev", "swig"),
    "cffi": ("libffi-dev",),
    "bcrypt": ("libffi-dev",),
    "pynacl": ("libsodium-dev",),
    "h5py": ("libhdf5-dev",),
    "tables": ("libhdf5-dev", "libbz2-dev", "liblzo2-dev"),
    "netcdf4": ("libnetcdf-dev", "libhdf5-dev"),
    "pyzmq": ("libzmq3-dev",),
    "pygraphviz": ("graphviz", "libgraphviz-dev"),
    "pydot": ("graphviz",),
    "pycairo": ("libcairo2-dev",),
    "pygobject": ("libgirepository1.0-dev", "libcairo2-dev"),
    "pygtk": ("libgtk2.0-dev", "libglib2.0-dev"),
    "wxpython": ("libgtk-3-dev",),
    "pyqt5": ("qtbase5-dev",),
    "dbus-python": ("libdbus-1-dev", "libglib2.0-dev"),
    "pycups": ("libcups2-dev",),
    "shapely": ("libgeos-dev",),
    "cartopy": ("libgeos-dev", "libproj-dev"),
    "pyproj": ("libproj-dev", "proj-data"),
    "fiona": ("libgdal-dev",),
    "gdal": ("libgdal-dev",),
    "rasterio": ("libgdal-dev",),
    "basemap": ("libgeos-dev",),
    "pyaudio": ("portaudio19-dev",),
    "simpleaudio": ("libasound2-dev",),
    "pygame": ("libsdl2-dev", "libsdl2-image-dev", "libsdl2-mixer-dev", "libsdl2-ttf-dev"),
    "uwsgi": ("libpcre3-dev",),
}

# Shared-library and header fragments seen in failure logs, mapped to the apt
# package that provides them.
SHARED_LIB_APT: dict[str, str] = {
    "libgtk-x11-2.0.so": "libgtk2.0-0",
    "gtk/gtk.h": "libgtk2.0-dev",
    "libglib-2.0.so": "libglib2.0-0",
    "libGL.so": "libgl1",
    "libSM.so": "libsm6",
    "libXext.so": "libxext6",
    "libXrender.so": "libxrender1",
    "libgomp.so": "libgomp1",
    "libsndfile.so": "libsndfile1",
    "libportaudio.so": "libportaudio2",
    "libpq.so": "libpq5",
    "libpq-fe.h": "libpq-dev",
    "libmysqlclient.so": "default-libmysqlclient-dev",
    "libffi.so": "libffi-dev",
    "ffi.h": "libffi-dev",
    "libssl.so": "libssl-dev",
    "openssl/ssl.h": "libssl-dev",
    "libxml/xmlversion.h": "libxml2-dev",
    "libxslt/xslt.h": "libxslt1-dev",
    "sql.h": "unixodbc-dev",
}


@dataclass(frozen=True)
class BuildPlan:
    python: str
    pins: dict[str, Version]
    apt_packages: tuple[str, ...] = ()
    base_image: str = ""
    build_timeout_s: int = BUILD_TIMEOUT_S
    run_timeout_s: int = RUN_TIMEOUT_S

    def image(self) -> str:
        return self.base_image or f"python:{self.python}"

    def digest_material(self) -> str:
        pins = ",".join(f"{k}=={v}" for k, v in sorted(self.pins.items(), key=lambda kv: kv[0]))
        apt = ",".join(sorted(self.apt_packages))
        return f"{self.python}|{pins}|{apt}"


@dataclass(frozen=True)
class ValidationOutcome:
    status: str
    log: str
    iteration: int
    duration_ms: int = 0

    @property
    def passed(self) -> bool:
        return self.status == STATUS_PASS


def apt_builddeps(pins: dict[str, Version]) -> list[str]:
    """Union of table rows for the pinned packages, deduplicated, kept in
    table order."""
    pinned = {normalize_name(name) for name in pins}
    out: list[str] = []
    for package, debs in APT_BUILD_DEPS.items():
        if package in pinned:
            for deb in debs:
                if deb not in out:
                    out.append(deb)
    return out


def render_dockerfile(plan: BuildPlan) -> str:
    """Deterministic Dockerfile text for a plan; equal plans render
    byte-equal."""
    if plan.python not in SUPPORTED_PYTHONS:
        raise UnsupportedInterpreter(plan.python)
    lines = [
        "# syntax=docker/dockerfile:1",
        f"FROM --platform=linux/amd64 {plan.image()}",
    ]
    if plan.python in EOL_PYTHONS:
        lines += [
            "RUN sed -i -e 's|deb.debian.org|archive.debian.org|g' \\",
            "        -e 's|security.debian.org|archive.debian.org|g' /etc/apt/sources.list \\",
            "    && sed -i '/-updates/d' /etc/apt/sources.list",
        ]
    if plan.apt_packages:
        apt_line = " ".join(plan.apt_packages)
        lines += [
            "RUN apt-get update \\",
            f"    && apt-get install -y --no-install-recommends {apt_line} \\",
            "    && rm -rf /var/lib/apt/lists/*",
        ]
    if plan.pins:
        pin_args = " ".join(
            f"'{name}=={version}'" for name, version in sorted(plan.pins.items())
        )
        lines += [
            "RUN --mount=type=cache,target=/root/.cache/pip \\",
            f"    pip install {pin_args}",
        ]
    lines += [
        "WORKDIR /app",
        "COPY snippet.py /app/snippet.py",
        'CMD ["python", "/app/snippet.py"]',
    ]
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# Simulated backend
# --------------------------------------------------------------------------


@dataclass
class WorldRule:
    python: tuple[str, ...] | None
    pins: dict[str, str]
    pins_absent: tuple[str, ...]
    apt_includes: tuple[str, ...]
    apt_excludes: tuple[str, ...]
    status: str
    log: str
    build_duration_s: float | None = None
    run_duration_s: float | None = None

    def matches(self, plan: BuildPlan) -> bool:
        if self.python is not None and plan.python not in self.python:
            return False
        for name, spec_text in self.pins.items():
            key = normalize_name(name)
            if key not in plan.pins:
                return False
            if spec_text in ("", "*"):
                continue
            try:
                spec = parse_specifier_set(spec_text)
            except MalformedSpecifier:
                return False
            if not spec.matches(plan.pins[key]):
                return False
        for name in self.pins_absent:
            if normalize_name(name) in plan.pins:
                return False
        for deb in self.apt_includes:
            if deb not in plan.apt_packages:
                return False
        for deb in self.apt_excludes:
            if deb in plan.apt_packages:
                return False
        return True


@dataclass
class WorldRules:
    rules: list[WorldRule] = field(default_factory=list)

    @classmethod
    def from_file(cls, path: str | Path) -> "WorldRules":
        doc = json.loads(Path(path).read_text())
        rules = []
        for raw in doc.get("rules", []):
            when = raw.get("when", {})
            then = raw.get("then", {})
            python = when.get("python")
            if isinstance(python, str):
                python = (python,)
            elif python is not None:
                python = tuple(python)
            rules.append(
                WorldRule(
                    python=python,
                    pins=dict(when.get("pins", {})),
                    pins_absent=tuple(when.get("pins_absent", ())),
                    apt_includes=tuple(when.get("apt_includes", ())),
                    apt_excludes=tuple(when.get("apt_excludes", ())),
                    status=then.get("status", STATUS_BUILD_FAIL),
                    log=then.get("log", ""),
                    build_duration_s=then.get("build_duration_s"),
                    run_duration_s=then.get("run_duration_s"),
                )
            )
        return cls(rules)


class SimulatedBackend:
    """Evaluates plans against world rules; no container daemon involved."""

    def __init__(self, world: WorldRules):
        self.world = world

    def run(self, plan: BuildPlan, snippet_source: str, iteration: int) -> ValidationOutcome:
        del snippet_source
        for rule in self.world.rules:
            if rule.matches(plan):
                return self._outcome(rule, plan, iteration)
        return ValidationOutcome(
            status=STATUS_BUILD_FAIL,
            log=f"no world rule matched plan {plan.digest_material()}",
            iteration=iteration,
            duration_ms=SIM_BUILD_MS,
        )

    @staticmethod
    def _outcome(rule: WorldRule, plan: BuildPlan, iteration: int) -> ValidationOutcome:
        status = rule.status
        log = rule.log
        build_ms = int(1000 * rule.build_duration_s) if rule.build_duration_s else SIM_BUILD_MS
        run_ms = int(1000 * rule.run_duration_s) if rule.run_duration_s else SIM_RUN_MS
        if rule.build_duration_s is not None and rule.build_duration_s > plan.build_timeout_s:
            status = STATUS_TIMEOUT
            log = log or f"Timeout: build exceeded {plan.build_timeout_s} s"
            build_ms = plan.build_timeout_s * 1000
            run_ms = 0
        elif rule.run_duration_s is not None and rule.run_duration_s > plan.run_timeout_s:
            status = STATUS_TIMEOUT
            log = log or f"Timeout: run exceeded {plan.run_timeout_s} s"
            run_ms = plan.run_timeout_s * 1000
        if status == STATUS_TIMEOUT and not log:
            log = f"Timeout: run exceeded {plan.run_timeout_s} s"
        if status != STATUS_PASS and not log:
            log = f"{status}: scripted failure"
        duration = build_ms if status in (STATUS_BUILD_FAIL,) else build_ms + run_ms
        return ValidationOutcome(status=status, log=log, iteration=iteration, duration_ms=duration)


# --------------------------------------------------------------------------
# Container backend
# --------------------------------------------------------------------------


class DockerBackend:
    """Builds and runs the rendered plan with the container daemon CLI."""

    def __init__(self, docker_binary: str = "docker"):
        self.docker_binary = docker_binary
        if shutil.which(docker_binary) is None:
            raise BackendUnavailable(f"{docker_binary} not found on PATH")

    def run(self, plan: BuildPlan, snippet_source: str, iteration: int) -> ValidationOutcome:
        import time

        start = time.monotonic()
        with tempfile.TemporaryDirectory(prefix="depsolve-") as ctx:
            ctx_path = Path(ctx)
            (ctx_path / "Dockerfile").write_text(render_dockerfile(plan))
            (ctx_path / "snippet.py").write_text(snippet_source)
            tag = f"depsolve-run:{abs(hash(plan.digest_material())) % 10 ** 8}"
            try:
                build = subprocess.run(
                    [self.docker_binary, "build", "-t", tag, str(ctx_path)],
                    capture_output=True,
                    text=True,
                    timeout=plan.build_timeout_s,
                    env={**os.environ, "DOCKER_BUILDKIT": "1"},
                )
            except subprocess.TimeoutExpired as exc:
                log = f"Timeout: build exceeded {plan.build_timeout_s} s\n{exc.stdout or ''}"
                return self._done(STATUS_TIMEOUT, log, iteration, start)
            except OSError as exc:
                raise BackendUnavailable(str(exc)) from exc
            if build.returncode != 0:
                return self._done(
                    STATUS_BUILD_FAIL, build.stdout + build.stderr, iteration, start
                )
            try:
                run = subprocess.run(
                    [self.docker_binary, "run", "--rm", tag],
                    capture_output=True,
                    text=True,
                    timeout=plan.run_timeout_s,
                )
            except subprocess.TimeoutExpired:
                log = f"Timeout: run exceeded {plan.run_timeout_s} s"
                return self._done(STATUS_TIMEOUT, log, iteration, start)
            if run.returncode != 0:
                return self._done(STATUS_RUN_FAIL, run.stdout + run.stderr, iteration, start)
            return self._done(STATUS_PASS, run.stdout, iteration, start)

    @staticmethod
    def _done(status: str, log: str, iteration: int, start: float) -> ValidationOutcome:
        import time

        if status != STATUS_PASS and not log.strip():
            log = f"{status}: no output captured"
        return ValidationOutcome(
            status=status,
            log=log,
            iteration=iteration,
            duration_ms=int((time.monotonic() - start) * 1000),
        )


def validate(plan: BuildPlan, backend, snippet_source: str, iteration: int) -> ValidationOutcome:
    """Run one validation; the outcome log is the error engine's input."""
    return backend.run(plan, snippet_source, iteration)

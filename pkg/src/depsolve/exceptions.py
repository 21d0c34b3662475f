"""Exception hierarchy shared by every stage of the pipeline."""


class DepsolveError(Exception):
    """Base class for all errors raised by this package."""


class MalformedVersion(DepsolveError):
    """Version text does not match the version grammar."""


class MalformedSpecifier(DepsolveError):
    """Specifier or requirement text is not parseable (URL requirements included)."""


class MalformedName(DepsolveError):
    """Package name is empty or reduces to nothing after normalization."""


class EmptySource(DepsolveError):
    """Snippet contains no import statements at all. Reported, not fatal."""


class UnmappableImport(DepsolveError):
    """All five mapping tiers failed; likely a local module or dead package."""

    def __init__(self, name: str):
        super().__init__(f"no distribution found for import {name!r}")
        self.name = name


class UnknownPackage(DepsolveError):
    """Registry has no project under this name."""

    def __init__(self, name: str):
        super().__init__(f"unknown package {name!r}")
        self.name = name


class BackendUnavailable(DepsolveError):
    """Live registry, container daemon, or model server unreachable."""


class NoTemporalData(DepsolveError):
    """No package in the set has a timestamped release."""


class NoInstallableVersion(DepsolveError):
    """Every release of a package was filtered out for the active interpreter."""

    def __init__(self, name: str):
        super().__init__(f"no installable version of {name!r}")
        self.name = name


class EncodingOverflow(DepsolveError):
    """Variable count exceeded the configured ceiling; runaway graph."""


class UnsupportedInterpreter(DepsolveError):
    """Interpreter version outside the supported table."""


class RepairExhausted(DepsolveError):
    """Iteration cap reached or the dedup guard blocks every available move."""


class LlmUnavailable(DepsolveError):
    """Live model server unreachable (stub mode never raises this)."""


class ConfigError(DepsolveError):
    """Invalid or incomplete run configuration (missing fixture roots, etc.)."""

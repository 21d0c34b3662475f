"""Package versions, dependency specifiers, and name normalization.

Every other module speaks these types. Versions follow the ecosystem's
standard grammar (epoch ``!``, dotted release, ``a``/``b``/``rc`` pre-release,
``.post``/``.dev`` segments, ``+local`` label) with a strict total order.
Specifier sets are conjunctions of operator clauses, optionally gated by an
environment marker.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .exceptions import MalformedName, MalformedSpecifier, MalformedVersion

__all__ = [
    "EnvContext",
    "Requirement",
    "Specifier",
    "SpecifierSet",
    "Version",
    "matches",
    "normalize_name",
    "parse_requirement",
    "parse_specifier_set",
    "parse_version",
]


@dataclass(frozen=True)
class EnvContext:
    """Environment facts available to marker evaluation.

    Only the interpreter version and platform are modeled; the validation
    target is a linux/amd64 container, so every other marker variable is
    treated as unknown and its comparison evaluates false.
    """

    python_version: str = "3.8"
    sys_platform: str = "linux"


DEFAULT_ENV = EnvContext()


# --------------------------------------------------------------------------
# Version
# --------------------------------------------------------------------------

_VERSION_PATTERN = r"""
    v?
    (?:(?P<epoch>[0-9]+)!)?
    (?P<release>[0-9]+(?:\.[0-9]+)*)
    (?P<pre>
        [-_.]?
        (?P<pre_l>a|b|c|rc|alpha|beta|pre|preview)
        [-_.]?
        (?P<pre_n>[0-9]+)?
    )?
    (?P<post>
        (?:-(?P<post_n1>[0-9]+))
        |
        (?:
            [-_.]?
            (?P<post_l>post|rev|r)
            [-_.]?
            (?P<post_n2>[0-9]+)?
        )
    )?
    (?P<dev>
        [-_.]?
        dev
        [-_.]?
        (?P<dev_n>[0-9]+)?
    )?
    (?:\+(?P<local>[a-z0-9]+(?:[-_.][a-z0-9]+)*))?
"""

_VERSION_RE = re.compile(r"^\s*" + _VERSION_PATTERN + r"\s*$", re.VERBOSE | re.IGNORECASE)

_PRE_CANON = {"alpha": "a", "beta": "b", "c": "rc", "pre": "rc", "preview": "rc"}


def _canon_pre(letter: str, number: str | None) -> tuple[str, int]:
    letter = letter.lower()
    return _PRE_CANON.get(letter, letter), int(number or 0)


def _parse_local(text: str) -> tuple:
    # Numeric segments compare as integers and rank above alphanumeric ones.
    segs = []
    for seg in re.split(r"[-_.]", text.lower()):
        if seg.isdigit():
            segs.append((1, int(seg), ""))
        else:
            segs.append((0, 0, seg))
    return tuple(segs)


class Version:
    """A parsed version with a strict total order.

    Comparison follows the public ordering rules (trailing release zeros are
    insignificant, ``dev`` < pre-release < final < ``post``); the local label
    never overrides the public part and acts only as the final tiebreak so
    that trichotomy holds on any version set.
    """

    __slots__ = ("epoch", "release", "pre", "post", "dev", "local", "_key", "_public_key")

    def __init__(
        self,
        epoch: int = 0,
        release: tuple[int, ...] = (0,),
        pre: tuple[str, int] | None = None,
        post: int | None = None,
        dev: int | None = None,
        local: str | None = None,
    ):
        self.epoch = epoch
        self.release = release
        self.pre = pre
        self.post = post
        self.dev = dev
        self.local = local
        self._public_key = self._make_public_key()
        self._key = self._public_key + (_parse_local(local) if local else ((),))

    def _make_public_key(self) -> tuple:
        release = self.release
        while len(release) > 1 and release[-1] == 0:
            release = release[:-1]
        if self.pre is None and self.post is None and self.dev is not None:
            pre_key = (-1, "", 0)  # bare dev sorts below any pre-release
        elif self.pre is None:
            pre_key = (1, "", 0)  # final sorts above any pre-release
        else:
            pre_key = (0, self.pre[0], self.pre[1])
        post_key = (0, 0) if self.post is None else (1, self.post)
        dev_key = (1, 0) if self.dev is None else (0, self.dev)
        return (self.epoch, release, pre_key, post_key, dev_key)

    @property
    def is_prerelease(self) -> bool:
        return self.pre is not None or self.dev is not None

    @property
    def is_postrelease(self) -> bool:
        return self.post is not None

    def base_key(self) -> tuple:
        """Epoch and trimmed release only; used by the exclusive-order rules."""
        return self._public_key[:2]

    def public(self) -> "Version":
        if self.local is None:
            return self
        return Version(self.epoch, self.release, self.pre, self.post, self.dev, None)

    def __str__(self) -> str:
        parts = []
        if self.epoch:
            parts.append(f"{self.epoch}!")
        parts.append(".".join(str(n) for n in self.release))
        if self.pre is not None:
            parts.append(f"{self.pre[0]}{self.pre[1]}")
        if self.post is not None:
            parts.append(f".post{self.post}")
        if self.dev is not None:
            parts.append(f".dev{self.dev}")
        if self.local is not None:
            parts.append(f"+{self.local}")
        return "".join(parts)

    def __repr__(self) -> str:
        return f"Version({str(self)!r})"

    def __hash__(self) -> int:
        return hash(self._key)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Version):
            return NotImplemented
        return self._key == other._key

    def __lt__(self, other: "Version") -> bool:
        return self._key < other._key

    def __le__(self, other: "Version") -> bool:
        return self._key <= other._key

    def __gt__(self, other: "Version") -> bool:
        return self._key > other._key

    def __ge__(self, other: "Version") -> bool:
        return self._key >= other._key


def parse_version(text: str) -> Version:
    """Parse version text, raising :class:`MalformedVersion` on bad input."""
    if not text or not text.strip():
        raise MalformedVersion("empty version string")
    m = _VERSION_RE.match(text)
    if m is None:
        raise MalformedVersion(f"invalid version: {text!r}")
    release = tuple(int(p) for p in m.group("release").split("."))
    pre = None
    if m.group("pre"):
        pre = _canon_pre(m.group("pre_l"), m.group("pre_n"))
    post = None
    if m.group("post"):
        post = int(m.group("post_n1") or m.group("post_n2") or 0)
    dev = None
    if m.group("dev"):
        dev = int(m.group("dev_n") or 0)
    local = m.group("local")
    if local is not None:
        local = local.lower().replace("_", ".").replace("-", ".")
    return Version(
        epoch=int(m.group("epoch") or 0),
        release=release,
        pre=pre,
        post=post,
        dev=dev,
        local=local,
    )


# --------------------------------------------------------------------------
# Name normalization
# --------------------------------------------------------------------------


def normalize_name(text: str) -> str:
    """Lowercase and collapse runs of ``-``/``_``/``.`` to a single hyphen.

    Idempotent; names differing only in case or separator class normalize
    equal. Raises :class:`MalformedName` when nothing remains.
    """
    if not text or not text.strip():
        raise MalformedName("empty package name")
    collapsed = re.sub(r"[-_.]+", "-", text.strip().lower()).strip("-")
    if not collapsed:
        raise MalformedName(f"name {text!r} normalizes to nothing")
    return collapsed


# --------------------------------------------------------------------------
# Specifiers
# --------------------------------------------------------------------------

_OPERATORS = ("===", "==", "!=", "<=", ">=", "~=", "<", ">")

_CLAUSE_RE = re.compile(r"^\s*(===|==|!=|<=|>=|~=|<|>)\s*(\S+)\s*$")

_WILDCARD_RE = re.compile(r"^v?(?:[0-9]+!)?[0-9]+(?:\.[0-9]+)*\.\*$", re.IGNORECASE)


class Specifier:
    """One operator clause, e.g. ``>=2.0`` or ``==2.1.*``."""

    __slots__ = ("operator", "operand", "_version", "_wildcard")

    def __init__(self, operator: str, operand: str):
        if operator not in _OPERATORS:
            raise MalformedSpecifier(f"unknown operator {operator!r}")
        self.operator = operator
        self.operand = operand
        self._wildcard = operand.endswith(".*")
        if self._wildcard:
            if operator not in ("==", "!="):
                raise MalformedSpecifier(f"prefix match not allowed with {operator}")
            if not _WILDCARD_RE.match(operand):
                raise MalformedSpecifier(f"bad prefix pattern {operand!r}")
            self._version = parse_version(operand[:-2])
        elif operator == "===":
            self._version = None  # arbitrary equality compares text
        else:
            self._version = parse_version(operand)
            if self._version.local is not None and operator not in ("==", "!="):
                raise MalformedSpecifier(f"local label not allowed with {operator}")
            if operator == "~=" and len(self._version.release) < 2:
                raise MalformedSpecifier("~= needs at least two release components")

    @property
    def mentions_prerelease(self) -> bool:
        return self._version is not None and self._version.is_prerelease

    def contains(self, v: Version) -> bool:
        op, w = self.operator, self._version
        if op == "===":
            return str(v).lstrip("v") == self.operand.lstrip("v")
        if self._wildcard:
            hit = self._prefix_match(v, w)
            return hit if op == "==" else not hit
        if op == "==":
            if w.local is not None:
                return v._key == w._key
            return v._public_key == w._public_key
        if op == "!=":
            if w.local is not None:
                return v._key != w._key
            return v._public_key != w._public_key
        if op == ">=":
            return v._public_key >= w._public_key
        if op == "<=":
            return v._public_key <= w._public_key
        if op == ">":
            if not v._public_key > w._public_key:
                return False
            # a post-release of the boundary version does not count
            if not w.is_postrelease and v.is_postrelease and v.base_key() == w.base_key():
                return False
            return True
        if op == "<":
            if not v._public_key < w._public_key:
                return False
            if not w.is_prerelease and v.is_prerelease and v.base_key() == w.base_key():
                return False
            return True
        if op == "~=":
            if v._public_key < w._public_key:
                return False
            prefix = Version(w.epoch, w.release[:-1])
            return self._prefix_match(v, prefix)
        raise AssertionError(op)

    @staticmethod
    def _prefix_match(v: Version, w: Version) -> bool:
        if v.epoch != w.epoch:
            return False
        vr = v.release + (0,) * max(0, len(w.release) - len(v.release))
        return vr[: len(w.release)] == w.release

    def __str__(self) -> str:
        return f"{self.operator}{self.operand}"

    def __repr__(self) -> str:
        return f"Specifier({str(self)!r})"

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Specifier):
            return NotImplemented
        return (self.operator, self.operand) == (other.operator, other.operand)

    def __hash__(self) -> int:
        return hash((self.operator, self.operand))


class SpecifierSet:
    """Conjunction of clauses plus an optional environment marker.

    A version matches the set iff it matches every clause; the empty clause
    set matches everything. Pre-release versions are rejected unless some
    clause explicitly mentions a pre-release.
    """

    __slots__ = ("clauses", "marker")

    def __init__(self, clauses: tuple[Specifier, ...] = (), marker: "Marker | None" = None):
        self.clauses = clauses
        self.marker = marker

    def matches(self, v: Version, env: EnvContext | None = None) -> bool:
        env = env or DEFAULT_ENV
        if self.marker is not None and not self.marker.evaluate(env):
            return False
        if not self.clauses:
            return True
        if v.is_prerelease and not any(c.mentions_prerelease for c in self.clauses):
            return False
        return all(c.contains(v) for c in self.clauses)

    def expand_compat_operators(self) -> "SpecifierSet":
        """Rewrite ``~=`` and parseable ``===`` clauses into interval pairs."""
        out: list[Specifier] = []
        for c in self.clauses:
            if c.operator == "~=":
                w = c._version
                upper = Version(w.epoch, w.release[:-2] + (w.release[-2] + 1,))
                out.append(Specifier(">=", c.operand))
                out.append(Specifier("<", str(upper)))
            elif c.operator == "===":
                try:
                    parse_version(c.operand)
                except MalformedVersion:
                    out.append(c)  # non-version text: keep literal comparison
                else:
                    out.append(Specifier(">=", c.operand))
                    out.append(Specifier("<=", c.operand))
            else:
                out.append(c)
        return SpecifierSet(tuple(out), self.marker)

    def __str__(self) -> str:
        text = ",".join(str(c) for c in self.clauses)
        if self.marker is not None:
            text += f"; {self.marker}"
        return text

    def __repr__(self) -> str:
        return f"SpecifierSet({str(self)!r})"

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SpecifierSet):
            return NotImplemented
        return set(self.clauses) == set(other.clauses) and str(self.marker) == str(other.marker)

    def __hash__(self) -> int:
        return hash((frozenset(self.clauses), str(self.marker)))


def parse_specifier_set(text: str) -> SpecifierSet:
    """Parse ``">=1.0,<2.0; python_version >= '3'"`` style constraint text."""
    text = text.strip()
    marker = None
    if ";" in text:
        text, marker_text = text.split(";", 1)
        marker = parse_marker(marker_text)
        text = text.strip()
    if text.startswith("(") and text.endswith(")"):
        text = text[1:-1].strip()
    clauses: list[Specifier] = []
    for chunk in filter(None, (c.strip() for c in text.split(","))):
        m = _CLAUSE_RE.match(chunk)
        if m is None:
            raise MalformedSpecifier(f"bad specifier clause {chunk!r}")
        try:
            clauses.append(Specifier(m.group(1), m.group(2)))
        except MalformedVersion as exc:
            raise MalformedSpecifier(str(exc)) from exc
    return SpecifierSet(tuple(clauses), marker)


def matches(spec: SpecifierSet, v: Version, env: EnvContext | None = None) -> bool:
    """Module-level alias for :meth:`SpecifierSet.matches`."""
    return spec.matches(v, env)


# --------------------------------------------------------------------------
# Environment markers
# --------------------------------------------------------------------------

_MARKER_TOKEN_RE = re.compile(
    r"""\s*(?:
        (?P<paren>[()])
      | (?P<op>===|==|!=|<=|>=|~=|<|>)
      | (?P<str>'[^']*'|"[^"]*")
      | (?P<word>[A-Za-z_][A-Za-z0-9_.]*)
    )""",
    re.VERBOSE,
)

_KNOWN_VARS = {"python_version", "python_full_version", "sys_platform"}


class Marker:
    """Parsed environment-marker expression.

    Only ``python_version``/``python_full_version`` and ``sys_platform`` are
    evaluated; comparisons over any other variable (including ``extra``)
    evaluate false, which drops extras-conditioned dependencies.
    """

    def __init__(self, text: str, expr):
        self._text = " ".join(text.split())
        self._expr = expr

    def evaluate(self, env: EnvContext) -> bool:
        return self._expr(env)

    def __str__(self) -> str:
        return self._text


def parse_marker(text: str) -> Marker:
    tokens = _tokenize_marker(text)
    expr, pos = _parse_or(tokens, 0)
    if pos != len(tokens):
        raise MalformedSpecifier(f"trailing marker tokens in {text!r}")
    return Marker(text, expr)


def _tokenize_marker(text: str) -> list[tuple[str, str]]:
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos].isspace():
            pos += 1
            continue
        m = _MARKER_TOKEN_RE.match(text, pos)
        if m is None:
            raise MalformedSpecifier(f"bad marker text at {text[pos:]!r}")
        if m.group("paren"):
            tokens.append(("paren", m.group("paren")))
        elif m.group("op"):
            tokens.append(("op", m.group("op")))
        elif m.group("str"):
            tokens.append(("str", m.group("str")[1:-1]))
        else:
            tokens.append(("word", m.group("word")))
        pos = m.end()
    return tokens


def _parse_or(tokens, pos):
    left, pos = _parse_and(tokens, pos)
    terms = [left]
    while pos < len(tokens) and tokens[pos] == ("word", "or"):
        right, pos = _parse_and(tokens, pos + 1)
        terms.append(right)
    if len(terms) == 1:
        return left, pos
    return (lambda env, t=tuple(terms): any(f(env) for f in t)), pos


def _parse_and(tokens, pos):
    left, pos = _parse_atom(tokens, pos)
    terms = [left]
    while pos < len(tokens) and tokens[pos] == ("word", "and"):
        right, pos = _parse_atom(tokens, pos + 1)
        terms.append(right)
    if len(terms) == 1:
        return left, pos
    return (lambda env, t=tuple(terms): all(f(env) for f in t)), pos


def _parse_atom(tokens, pos):
    if pos < len(tokens) and tokens[pos] == ("paren", "("):
        expr, pos = _parse_or(tokens, pos + 1)
        if pos >= len(tokens) or tokens[pos] != ("paren", ")"):
            raise MalformedSpecifier("unbalanced parenthesis in marker")
        return expr, pos + 1
    return _parse_comparison(tokens, pos)


def _parse_comparison(tokens, pos):
    try:
        lhs_kind, lhs = tokens[pos]
        op_kind, op = tokens[pos + 1]
        if op_kind == "word" and op in ("in", "not"):
            if op == "not":
                if tokens[pos + 2] != ("word", "in"):
                    raise MalformedSpecifier("expected 'not in' in marker")
                rhs_kind, rhs = tokens[pos + 3]
                end = pos + 4
                op = "not in"
            else:
                rhs_kind, rhs = tokens[pos + 2]
                end = pos + 3
        else:
            if op_kind != "op":
                raise MalformedSpecifier(f"expected operator in marker, got {op!r}")
            rhs_kind, rhs = tokens[pos + 2]
            end = pos + 3
    except IndexError:
        raise MalformedSpecifier("truncated marker comparison") from None

    def resolve(kind: str, value: str, env: EnvContext):
        if kind == "str":
            return value
        if value in ("python_version", "python_full_version"):
            return env.python_version
        if value == "sys_platform":
            return env.sys_platform
        return None  # unknown variable (extra, platform_machine, ...)

    version_like = "python_version" in (lhs, rhs) or "python_full_version" in (lhs, rhs)

    def comparison(env: EnvContext, lk=lhs_kind, lv=lhs, rk=rhs_kind, rv=rhs, op=op) -> bool:
        left = resolve(lk, lv, env)
        right = resolve(rk, rv, env)
        if left is None or right is None:
            return False
        if op == "in":
            return left in right
        if op == "not in":
            return left not in right
        if version_like:
            try:
                lv_, rv_ = parse_version(left), parse_version(right)
            except MalformedVersion:
                pass
            else:
                if op == "~=":
                    return Specifier("~=", right).contains(lv_)
                return _apply_cmp(op, lv_, rv_)
        return _apply_cmp(op, left, right)

    return comparison, end


def _apply_cmp(op: str, left, right) -> bool:
    if op in ("==", "==="):
        return left == right
    if op == "!=":
        return left != right
    if op == "<=":
        return left <= right
    if op == ">=":
        return left >= right
    if op == "<":
        return left < right
    if op == ">":
        return left > right
    if op == "~=":
        return left == right
    raise AssertionError(op)


# --------------------------------------------------------------------------
# Requirements
# --------------------------------------------------------------------------

_REQ_NAME_RE = re.compile(r"^\s*([A-Za-z0-9][A-Za-z0-9._-]*)\s*(\[[^\]]*\])?\s*(.*)$", re.DOTALL)


@dataclass(frozen=True)
class Requirement:
    """A dependency declaration: normalized name plus constraint set.

    Extras are dropped at parse time; the marker rides on the specifier set.
    """

    name: str
    specifier: SpecifierSet

    def __str__(self) -> str:
        return f"{self.name}{self.specifier}"


def parse_requirement(text: str) -> Requirement:
    """Parse ``"werkzeug (>=2.0); python_version >= '3'"`` style declarations.

    Direct-URL requirements (``name @ https://...``) are rejected.
    """
    m = _REQ_NAME_RE.match(text)
    if m is None or not m.group(1):
        raise MalformedSpecifier(f"bad requirement {text!r}")
    name = normalize_name(m.group(1))
    rest = m.group(3).strip()
    if rest.startswith("@"):
        raise MalformedSpecifier(f"direct URL requirement not supported: {text!r}")
    return Requirement(name, parse_specifier_set(rest) if rest else SpecifierSet())

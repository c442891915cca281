"""Core passive-DNS record types and FQDN decomposition.

Names are split against a public-suffix rule set loaded from a file in the
publicsuffix.org text format. No network access is ever attempted; the
package ships a small bundled rule file and accepts a full list via
:meth:`SuffixSet.from_file`.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable

from .errors import MalformedNameError, UnregistrableNameError

MAX_NAME_BYTES = 253
MAX_LABELS = 127
MAX_RCODE = 23

_EPOCH_ORDINAL = dt.date(1970, 1, 1).toordinal()


@dataclass(frozen=True, slots=True)
class PdnsEvent:
    """One observed query-response record."""

    timestamp: float
    qname: str
    qtype: int
    rcode: int
    source: str

    def __post_init__(self):
        if not self.qname:
            raise MalformedNameError("empty qname")
        if not 0 <= self.qtype <= 65535:
            raise ValueError(f"qtype out of range: {self.qtype}")
        if not 0 <= self.rcode <= MAX_RCODE:
            raise ValueError(f"rcode out of range: {self.rcode}")

    @property
    def date(self) -> dt.date:
        return utc_date(self.timestamp)


def utc_date(timestamp: float) -> dt.date:
    """UTC calendar date of an epoch timestamp."""
    return dt.date.fromordinal(_EPOCH_ORDINAL + int(timestamp // 86400))


def day_start(date: dt.date) -> int:
    """Epoch second of 00:00:00 UTC on ``date``."""
    return (date.toordinal() - _EPOCH_ORDINAL) * 86400


@dataclass(frozen=True, slots=True)
class ParsedName:
    qname: str
    labels: tuple[str, ...]
    etld: str
    sld: str
    prefix: str
    suffix: str


def normalize_name(raw: str) -> str:
    """Lowercase ``raw``, strip one trailing dot and validate wire limits.

    Characters that are invalid in hostnames (underscores, unicode, ...) are
    kept as-is; attack traffic routinely contains them.
    """
    if raw is None:
        raise MalformedNameError("name is None")
    name = raw.strip().lower()
    if name.endswith("."):
        name = name[:-1]
    if not name:
        raise MalformedNameError(f"empty name after normalization: {raw!r}")
    if any(ch.isspace() for ch in name):
        raise MalformedNameError(f"whitespace inside name: {raw!r}")
    if len(name.encode("utf-8")) > MAX_NAME_BYTES:
        raise MalformedNameError(f"name longer than {MAX_NAME_BYTES} bytes")
    if name.count(".") + 1 > MAX_LABELS:
        raise MalformedNameError(f"more than {MAX_LABELS} labels")
    if name.startswith(".") or name.endswith(".") or ".." in name:
        raise MalformedNameError(f"empty label in {raw!r}")
    return name


@dataclass(frozen=True)
class SuffixSet:
    """Public-suffix rules: exact, wildcard (``*.x``) and exception (``!y.x``)."""

    exact: frozenset[str] = frozenset()
    wildcard: frozenset[str] = frozenset()  # stored without the leading "*."
    exception: frozenset[str] = frozenset()  # stored without the leading "!"
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    @classmethod
    def from_lines(cls, lines: Iterable[str]) -> "SuffixSet":
        exact, wild, exc = set(), set(), set()
        for line in lines:
            rule = line.strip().split()[0] if line.strip() else ""
            if not rule or rule.startswith("//"):
                continue
            rule = rule.lower().rstrip(".")
            if rule.startswith("!"):
                exc.add(rule[1:])
            elif rule.startswith("*."):
                wild.add(rule[2:])
            else:
                exact.add(rule)
        return cls(frozenset(exact), frozenset(wild), frozenset(exc))

    @classmethod
    def from_file(cls, path) -> "SuffixSet":
        with open(path, encoding="utf-8") as fh:
            return cls.from_lines(fh)

    @classmethod
    def default(cls) -> "SuffixSet":
        return _bundled_suffixes()

    @property
    def rules(self) -> frozenset[str]:
        return (
            self.exact
            | {"*." + w for w in self.wildcard}
            | {"!" + e for e in self.exception}
        )

    def suffix_length(self, labels: tuple[str, ...]) -> int:
        """Number of rightmost labels forming the public suffix of ``labels``.

        Exception rules win over everything; otherwise the longest matching
        rule prevails, and the implicit ``*`` rule applies when none match.
        """
        n = len(labels)
        for i in range(n):
            if ".".join(labels[i:]) in self.exception:
                return n - i - 1
        for i in range(n):
            cand = ".".join(labels[i:])
            if cand in self.exact:
                return n - i
            if i + 1 < n and ".".join(labels[i + 1:]) in self.wildcard:
                return n - i
        return 1

    def etld(self, qname: str) -> str:
        labels = tuple(qname.split("."))
        return ".".join(labels[len(labels) - self.suffix_length(labels):])


@lru_cache(maxsize=1)
def _bundled_suffixes() -> SuffixSet:
    text = resources.files("slowdrip").joinpath("data/public_suffix_list.dat").read_text("utf-8")
    return SuffixSet.from_lines(text.splitlines())


def bundled_suffix_path() -> Path:
    return Path(str(resources.files("slowdrip").joinpath("data/public_suffix_list.dat")))


def parse_fqdn(qname: str, suffixes: SuffixSet) -> ParsedName:
    cached = suffixes._cache.get(qname)
    if cached is not None:
        return cached
    labels = tuple(qname.split("."))
    if any(not lab for lab in labels):
        raise MalformedNameError(f"empty label in {qname!r}")
    k = suffixes.suffix_length(labels)
    if len(labels) <= k:
        raise UnregistrableNameError(f"{qname!r} has no registrable domain")
    etld = ".".join(labels[len(labels) - k:])
    sld = ".".join(labels[len(labels) - k - 1:])
    if len(labels) > k + 1:
        prefix = labels[0]
        suffix = qname[len(prefix) + 1:]
    else:
        prefix = ""
        suffix = qname
    parsed = ParsedName(qname, labels, etld, sld, prefix, suffix)
    if len(suffixes._cache) < 1_000_000:
        suffixes._cache[qname] = parsed
    return parsed


def label_depth(parsed: ParsedName) -> int:
    """Number of labels to the left of the SLD."""
    return len(parsed.labels) - parsed.sld.count(".") - 1


def split_prefix(qname: str, sld: str) -> tuple[str, str]:
    """(prefix, suffix) of ``qname`` given its already known SLD."""
    if qname == sld:
        return "", qname
    head, _, rest = qname.partition(".")
    return head, rest


def subdomain_labels(qname: str, sld: str) -> list[str]:
    """Labels left of ``sld`` in ``qname`` (leftmost first)."""
    if qname == sld or not qname.endswith("." + sld):
        return []
    return qname[: -len(sld) - 1].split(".")

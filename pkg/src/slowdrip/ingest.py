"""Event log reading and per-(source, day, SLD) aggregation."""

from __future__ import annotations

import datetime as dt
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

from .errors import CorruptInputError, MalformedNameError, UnregistrableNameError
from .pdns_model import PdnsEvent, SuffixSet, normalize_name, parse_fqdn, utc_date

log = logging.getLogger(__name__)

NOERROR = 0
NXDOMAIN = 3
FORMATS = ("tsv", "jsonl")
TSV_COLUMNS = ("ts", "qname", "qtype", "rcode", "source")


@dataclass
class ReadStats:
    lines: int = 0
    events: int = 0
    malformed: int = 0

    @property
    def malformed_fraction(self) -> float:
        return self.malformed / self.lines if self.lines else 0.0


def guess_format(path) -> str:
    suffixes = Path(path).suffixes
    if ".jsonl" in suffixes or ".json" in suffixes:
        return "jsonl"
    return "tsv"


def _event_from_fields(ts, qname, qtype, rcode, source) -> PdnsEvent:
    if isinstance(ts, str):
        ts = float(ts) if ("." in ts or "e" in ts.lower()) else int(ts)
    if isinstance(ts, float) and ts.is_integer():
        ts = int(ts)
    if isinstance(qtype, bool) or isinstance(rcode, bool):
        raise ValueError("boolean code")
    return PdnsEvent(ts, normalize_name(qname), int(qtype), int(rcode), str(source))


def parse_line(line: str, fmt: str) -> PdnsEvent:
    """Parse one data line; raises ``ValueError`` (or subclass) when malformed."""
    if fmt == "tsv":
        parts = line.rstrip("\r\n").split("\t")
        if len(parts) != 5:
            raise ValueError(f"expected 5 columns, got {len(parts)}")
        return _event_from_fields(*parts)
    if fmt == "jsonl":
        obj = json.loads(line)
        if not isinstance(obj, dict):
            raise ValueError("record is not an object")
        try:
            return _event_from_fields(*(obj[k] for k in TSV_COLUMNS))
        except KeyError as exc:
            raise ValueError(f"missing key {exc}") from None
    raise ValueError(f"unknown format {fmt!r}")


def read_events(path, fmt: str | None = None, stats: ReadStats | None = None) -> Iterator[PdnsEvent]:
    """Yield normalized events from ``path`` in file order.

    Blank lines and ``#`` comment lines (provenance headers) are ignored.
    Malformed lines are counted in ``stats`` and skipped. When the input is
    exhausted and more than half of its data lines were malformed a
    :class:`CorruptInputError` is raised.
    """
    fmt = fmt or guess_format(path)
    if fmt not in FORMATS:
        raise ValueError(f"format must be one of {FORMATS}")
    stats = stats if stats is not None else ReadStats()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip() or line.startswith("#"):
                continue
            stats.lines += 1
            try:
                event = parse_line(line, fmt)
            except (ValueError, TypeError, MalformedNameError):
                stats.malformed += 1
                continue
            stats.events += 1
            yield event
    if stats.malformed_fraction > 0.5:
        raise CorruptInputError(
            f"{path}: {stats.malformed} of {stats.lines} lines malformed"
        )
    if stats.malformed:
        log.warning("%s: skipped %d malformed lines", path, stats.malformed)


def format_event(event: PdnsEvent, fmt: str) -> str:
    ts = int(event.timestamp) if float(event.timestamp).is_integer() else event.timestamp
    if fmt == "tsv":
        return f"{ts}\t{event.qname}\t{event.qtype}\t{event.rcode}\t{event.source}"
    return json.dumps(
        {"ts": ts, "qname": event.qname, "qtype": event.qtype,
         "rcode": event.rcode, "source": event.source},
        ensure_ascii=False,
    )


def write_events(path, events: Iterable[PdnsEvent], fmt: str | None = None, header: str | None = None) -> int:
    fmt = fmt or guess_format(path)
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if header:
            fh.write(f"# {header}\n")
        for event in events:
            fh.write(format_event(event, fmt))
            fh.write("\n")
            n += 1
    return n


def is_unresolved(event: PdnsEvent, rcodes: frozenset[int] | None = None) -> bool:
    """True when the response was not a success.

    By default any rcode other than NOERROR counts; ``rcodes`` narrows the
    definition to an explicit set.
    """
    if rcodes is None:
        return event.rcode != NOERROR
    return event.rcode in rcodes


@dataclass
class DomainDayAggregate:
    sld: str
    date: dt.date
    source: str
    unresolved_fqdns: set[str] = field(default_factory=set)
    qnames: set[str] = field(default_factory=set)
    events: list[PdnsEvent] = field(default_factory=list)

    @property
    def unresolved_count(self) -> int:
        return len(self.unresolved_fqdns)

    @property
    def subdomain_count(self) -> int:
        return len(self.qnames)

    @property
    def event_count(self) -> int:
        return len(self.events)

    def merge(self, other: "DomainDayAggregate") -> "DomainDayAggregate":
        if (self.sld, self.date, self.source) != (other.sld, other.date, other.source):
            raise ValueError("cannot merge aggregates with different keys")
        return DomainDayAggregate(
            self.sld, self.date, self.source,
            self.unresolved_fqdns | other.unresolved_fqdns,
            self.qnames | other.qnames,
            self.events + other.events,
        )


AggregateKey = tuple[str, dt.date, str]


def aggregate_day(
    events: Iterable[PdnsEvent],
    suffixes: SuffixSet,
    rcodes: frozenset[int] | None = None,
    strict: bool = False,
) -> dict[AggregateKey, DomainDayAggregate]:
    """Group events by (source, UTC date, SLD).

    Names without a registrable domain (bare public suffixes) cannot belong
    to any SLD; they are skipped unless ``strict`` is set.
    """
    out: dict[AggregateKey, DomainDayAggregate] = {}
    sld_of: dict[str, str] = {}
    skipped = 0
    for ev in events:
        sld = sld_of.get(ev.qname)
        if sld is None:
            try:
                sld = parse_fqdn(ev.qname, suffixes).sld
            except UnregistrableNameError:
                if strict:
                    raise
                skipped += 1
                continue
            sld_of[ev.qname] = sld
        key = (ev.source, utc_date(ev.timestamp), sld)
        agg = out.get(key)
        if agg is None:
            agg = out[key] = DomainDayAggregate(sld, key[1], ev.source)
        agg.events.append(ev)
        agg.qnames.add(ev.qname)
        if is_unresolved(ev, rcodes):
            agg.unresolved_fqdns.add(ev.qname)
    if skipped:
        log.info("skipped %d events without a registrable domain", skipped)
    return out


def merge_aggregates(*parts: dict[AggregateKey, DomainDayAggregate]) -> dict[AggregateKey, DomainDayAggregate]:
    """Combine aggregates built from disjoint partitions of the input."""
    out: dict[AggregateKey, DomainDayAggregate] = {}
    for part in parts:
        for key, agg in part.items():
            out[key] = out[key].merge(agg) if key in out else agg
    return out


def by_population(aggregates: dict[AggregateKey, DomainDayAggregate]) -> dict[tuple[str, dt.date], dict[str, DomainDayAggregate]]:
    """Regroup aggregates into per-(source, date) populations keyed by SLD."""
    out: dict[tuple[str, dt.date], dict[str, DomainDayAggregate]] = {}
    for (source, date, sld), agg in aggregates.items():
        out.setdefault((source, date), {})[sld] = agg
    return out

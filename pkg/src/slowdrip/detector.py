"""Two-stage statistical detector for Slow Drip attacks.

Stage 1 flags SLDs whose count of distinct unresolved names on a day is an
upper outlier (``N > Q3 + 1.5 * IQR``) among all SLDs of the same data
source. Stage 2 recomputes the same rule over the day-over-day change in
distinct names, comparing day ``d`` with day ``d - 2``. An attack is an SLD
raised by both stages.

Quartiles use linear interpolation between closest ranks: for sorted values
``x[0..n-1]`` and probability ``p``, ``h = (n - 1) * p`` and
``Q(p) = x[floor(h)] + (h - floor(h)) * (x[floor(h) + 1] - x[floor(h)])``.
"""

from __future__ import annotations

import datetime as dt
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

from .errors import InsufficientPopulationError
from .ingest import DomainDayAggregate, aggregate_day, by_population, read_events, write_events
from .pdns_model import PdnsEvent, SuffixSet

MIN_POPULATION = 4
IQR_FACTOR = 1.5


@dataclass(frozen=True)
class QuartileSummary:
    q1: float
    q3: float
    iqr: float
    threshold: float


def _interpolate(sorted_vals, p: float) -> float:
    h = (len(sorted_vals) - 1) * p
    lo = math.floor(h)
    hi = min(lo + 1, len(sorted_vals) - 1)
    return sorted_vals[lo] + (h - lo) * (sorted_vals[hi] - sorted_vals[lo])


def quartiles(values: Iterable[float]) -> QuartileSummary:
    vals = sorted(values)
    if len(vals) < MIN_POPULATION:
        raise InsufficientPopulationError(
            f"need at least {MIN_POPULATION} values, got {len(vals)}"
        )
    q1 = _interpolate(vals, 0.25)
    q3 = _interpolate(vals, 0.75)
    iqr = q3 - q1
    return QuartileSummary(q1, q3, iqr, IQR_FACTOR * iqr + q3)


def _population(aggregates) -> dict[str, DomainDayAggregate]:
    if isinstance(aggregates, Mapping):
        return dict(aggregates)
    return {agg.sld: agg for agg in aggregates}


def stage1_outliers(aggregates, summary_out: list | None = None) -> set[str]:
    """SLDs whose distinct unresolved count exceeds the population threshold.

    ``aggregates`` is one (source, date) population, either a mapping from
    SLD to aggregate or an iterable of aggregates.
    """
    pop = _population(aggregates)
    summary = quartiles(a.unresolved_count for a in pop.values())
    if summary_out is not None:
        summary_out.append(summary)
    return {sld for sld, a in pop.items() if a.unresolved_count > summary.threshold}


def subdomain_deltas(aggregates_d, aggregates_d2) -> dict[str, int]:
    """Change in distinct names for every SLD seen on day d (absent on d-2 -> 0)."""
    pop_d = _population(aggregates_d)
    pop_d2 = _population(aggregates_d2)
    return {
        sld: a.subdomain_count - (pop_d2[sld].subdomain_count if sld in pop_d2 else 0)
        for sld, a in pop_d.items()
    }


def stage2_outliers(candidates: Iterable[str], aggregates_d, aggregates_d2,
                    summary_out: list | None = None) -> set[str]:
    deltas = subdomain_deltas(aggregates_d, aggregates_d2)
    summary = quartiles(deltas.values())
    if summary_out is not None:
        summary_out.append(summary)
    return {sld for sld in candidates if deltas.get(sld, 0) > summary.threshold}


@dataclass(frozen=True)
class AttackRecord:
    sld: str
    date: dt.date
    source: str
    stage1_count: int
    stage2_delta: int
    events: tuple[PdnsEvent, ...] = field(default=(), repr=False, compare=False)
    stage1_threshold: float = math.nan
    stage2_threshold: float = math.nan

    @property
    def attack_id(self) -> str:
        return f"{self.sld}|{self.date.isoformat()}|{self.source}"

    @property
    def sort_key(self) -> tuple[str, str, str]:
        return (self.sld, self.date.isoformat(), self.source)


def detect_population(pop_d: Mapping[str, DomainDayAggregate],
                      pop_d2: Mapping[str, DomainDayAggregate]) -> list[AttackRecord]:
    """Run both stages for a single (source, date) population."""
    s1, s2 = [], []
    flagged = stage1_outliers(pop_d, s1)
    if not flagged:
        return []
    confirmed = stage2_outliers(flagged, pop_d, pop_d2, s2)
    deltas = subdomain_deltas(pop_d, pop_d2)
    out = []
    for sld in sorted(confirmed):
        agg = pop_d[sld]
        out.append(AttackRecord(
            sld=sld, date=agg.date, source=agg.source,
            stage1_count=agg.unresolved_count, stage2_delta=deltas[sld],
            events=tuple(agg.events),
            stage1_threshold=s1[0].threshold, stage2_threshold=s2[0].threshold,
        ))
    return out


def detect_attacks(day_d_events: Iterable[PdnsEvent],
                   day_d_minus_2_events: Iterable[PdnsEvent],
                   suffixes: SuffixSet,
                   rcodes: frozenset[int] | None = None) -> list[AttackRecord]:
    """Detect attacks on every (source, date) present in ``day_d_events``.

    Each population is compared with the same source two days earlier.
    Thresholds are never pooled across sources.
    """
    cur = by_population(aggregate_day(day_d_events, suffixes, rcodes))
    prior = by_population(aggregate_day(day_d_minus_2_events, suffixes, rcodes))
    attacks: list[AttackRecord] = []
    for (source, date) in sorted(cur):
        base = prior.get((source, date - dt.timedelta(days=2)), {})
        attacks.extend(detect_population(cur[(source, date)], base))
    attacks.sort(key=lambda a: (a.source, a.date, a.sld))
    return attacks


# ---------------------------------------------------------------- persistence

def _safe(part: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]", "_", part)


def attack_events_filename(attack: AttackRecord) -> str:
    return f"{_safe(attack.source)}_{attack.date.isoformat()}_{_safe(attack.sld)}.tsv"


def _num(x: float):
    return None if x is None or math.isnan(x) else x


def write_attacks(attacks: Iterable[AttackRecord], outdir, header: str | None = None) -> Path:
    """Write ``attacks.jsonl`` plus one event file per attack under ``events/``."""
    outdir = Path(outdir)
    (outdir / "events").mkdir(parents=True, exist_ok=True)
    path = outdir / "attacks.jsonl"
    tmp = path.with_suffix(".jsonl.tmp")
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        if header:
            fh.write(f"# {header}\n")
        for a in attacks:
            rel = Path("events") / attack_events_filename(a)
            write_events(outdir / rel, a.events, "tsv")
            rec = {
                "sld": a.sld,
                "date": a.date.isoformat(),
                "source": a.source,
                "stage1_count": a.stage1_count,
                "stage2_delta": a.stage2_delta,
                "stage1_threshold": _num(a.stage1_threshold),
                "stage2_threshold": _num(a.stage2_threshold),
                "n_events": len(a.events),
                "events": rel.as_posix(),
            }
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    tmp.replace(path)
    return path


def _float(x) -> float:
    return math.nan if x is None else float(x)


def read_attacks(path, load_events: bool = True) -> list[AttackRecord]:
    path = Path(path)
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip() or line.startswith("#"):
                continue
            rec = json.loads(line)
            events: tuple = ()
            if load_events and rec.get("events"):
                events = tuple(read_events(path.parent / rec["events"], "tsv"))
            out.append(AttackRecord(
                sld=rec["sld"], date=dt.date.fromisoformat(rec["date"]),
                source=rec["source"], stage1_count=int(rec["stage1_count"]),
                stage2_delta=int(rec["stage2_delta"]), events=events,
                stage1_threshold=_float(rec.get("stage1_threshold")),
                stage2_threshold=_float(rec.get("stage2_threshold")),
            ))
    return out

"""Per-attack fingerprint features and plotting diagnostics.

The clustering vector has twenty entries, all in [0, 1]::

    label_ratio, overlap_ratio,
    qtype=1, qtype=5, qtype=12, qtype=16, qtype=28, qtype=33, qtype=other,
    active_min, lex_ratio,
    unigram_dist0 .. unigram_dist7, unigram_dist8 (uniform reference)

Text and ordering features look only at the attack's unresolved events;
resolved traffic for a popular domain is noise here. ``active_min`` counts
NXDOMAIN events specifically.
"""

from __future__ import annotations

import csv
import datetime as dt
import logging
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError, EmptySampleError
from .ingest import NXDOMAIN, is_unresolved
from .pdns_model import day_start, split_prefix, subdomain_labels

log = logging.getLogger(__name__)

DEFAULT_ALPHABET: tuple[str, ...] = tuple("abcdefghijklmnopqrstuvwxyz0123456789")
TRACKED_QTYPES: tuple[int, ...] = (1, 5, 12, 16, 28, 33)
MINUTES_PER_DAY = 1440
ARCHETYPE_SLOTS = 8
MISSING_ARCHETYPE_DISTANCE = 1.0
LEX_UNDEFINED = 0.5
LABEL_RATIO_UNDEFINED = 1.0
MODES = ("char0", "overall")


def feature_names(tracked_qtypes: Sequence[int] = TRACKED_QTYPES) -> list[str]:
    return (
        ["label_ratio", "overlap_ratio"]
        + [f"qtype={q}" for q in tracked_qtypes]
        + ["qtype=other", "active_min", "lex_ratio"]
        + [f"unigram_dist{i}" for i in range(ARCHETYPE_SLOTS + 1)]
    )


FEATURE_NAMES = feature_names()


# ------------------------------------------------------------ distributions

@dataclass(frozen=True, eq=False)
class CharDistribution:
    alphabet: tuple[str, ...]
    probs: np.ndarray
    support_count: int

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=np.float64)
        if probs.shape != (len(self.alphabet),):
            raise ValueError("alphabet and probs differ in length")
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    @classmethod
    def uniform(cls, alphabet: Sequence[str]) -> "CharDistribution":
        alphabet = tuple(alphabet)
        return cls(alphabet, np.full(len(alphabet), 1.0 / len(alphabet)), 0)

    def aligned(self, alphabet: Sequence[str]) -> np.ndarray:
        """Probabilities re-indexed onto ``alphabet`` (missing chars -> 0)."""
        index = {c: i for i, c in enumerate(self.alphabet)}
        return np.array([self.probs[index[c]] if c in index else 0.0 for c in alphabet])

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.alphabet, self.probs.tolist()))

    def __eq__(self, other):
        if not isinstance(other, CharDistribution):
            return NotImplemented
        return (self.alphabet == other.alphabet and self.support_count == other.support_count
                and np.array_equal(self.probs, other.probs))

    def __hash__(self):
        return hash((self.alphabet, self.probs.tobytes()))


def char_distribution(prefixes: Iterable[str], mode: str = "char0",
                      alphabet: Sequence[str] = DEFAULT_ALPHABET) -> CharDistribution:
    """Unigram character distribution of a set of unique prefixes.

    ``char0`` counts only the first character of each prefix, ``overall``
    every character. Characters outside ``alphabet`` are appended in sorted
    order so no mass is lost.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    uniq = {p for p in prefixes if p}
    if not uniq:
        raise EmptySampleError("no non-empty prefixes")
    counts: Counter = Counter()
    if mode == "char0":
        counts.update(p[0] for p in uniq)
    else:
        for p in uniq:
            counts.update(p)
    alphabet = tuple(alphabet)
    known = set(alphabet)
    extra = sorted(c for c in counts if c not in known)
    full = alphabet + tuple(extra)
    vec = np.array([counts.get(c, 0) for c in full], dtype=np.float64)
    return CharDistribution(full, vec / vec.sum(), len(uniq))


def union_alphabet(*dists: CharDistribution) -> tuple[str, ...]:
    seen: dict[str, None] = {}
    for d in dists:
        for c in d.alphabet:
            seen.setdefault(c, None)
    return tuple(seen)


def _js_arrays(p: np.ndarray, q: np.ndarray) -> float:
    m = 0.5 * (p + q)
    with np.errstate(divide="ignore", invalid="ignore"):
        tp = np.where(p > 0, p * np.log2(p / m), 0.0)
        tq = np.where(q > 0, q * np.log2(q / m), 0.0)
    div = 0.5 * float(tp.sum() + tq.sum())
    return min(1.0, math.sqrt(max(div, 0.0)))


def js_distance(p: CharDistribution, q: CharDistribution) -> float:
    """Jensen-Shannon distance (square root of the base-2 divergence)."""
    alphabet = union_alphabet(p, q)
    return _js_arrays(p.aligned(alphabet), q.aligned(alphabet))


# ------------------------------------------------------------ attack views

def unresolved_events(attack, rcodes=None) -> list:
    return [e for e in attack.events if is_unresolved(e, rcodes)]


def unique_unresolved_qnames(attack, rcodes=None) -> set[str]:
    return {e.qname for e in attack.events if is_unresolved(e, rcodes)}


def attack_prefixes(attack, rcodes=None) -> set[str]:
    return {split_prefix(q, attack.sld)[0] for q in unique_unresolved_qnames(attack, rcodes)} - {""}


def attack_labels(attack, rcodes=None) -> list[str]:
    """Every label left of the SLD, over the attack's unique unresolved names."""
    labels: list[str] = []
    for q in sorted(unique_unresolved_qnames(attack, rcodes)):
        labels.extend(subdomain_labels(q, attack.sld))
    return labels


# ------------------------------------------------------------ scalar features

def label_ratio(attack, rcodes=None) -> float:
    labels = attack_labels(attack, rcodes)
    if not labels:
        log.debug("%s: no subdomain labels, label_ratio set to %.1f",
                    getattr(attack, "attack_id", attack), LABEL_RATIO_UNDEFINED)
        return LABEL_RATIO_UNDEFINED
    return len(set(labels)) / len(labels)


def overlap_ratio(attack, dictionary, rcodes=None) -> float:
    if not dictionary:
        raise ConfigError("dictionary", "dictionary is empty")
    distinct = set(attack_labels(attack, rcodes))
    if not distinct:
        return 0.0
    return sum(1 for lab in distinct if lab in dictionary) / len(distinct)


def qtype_fractions(attack, tracked: Sequence[int] = TRACKED_QTYPES, rcodes=None) -> tuple[float, ...]:
    events = unresolved_events(attack, rcodes) or list(attack.events)
    if not events:
        return tuple(0.0 for _ in tracked)
    counts = Counter(e.qtype for e in events)
    total = len(events)
    return tuple(counts.get(q, 0) / total for q in tracked)


def qtype_other_fraction(attack, tracked: Sequence[int] = TRACKED_QTYPES, rcodes=None) -> float:
    """Share of events whose qtype is not tracked (1 minus the tracked sum)."""
    events = unresolved_events(attack, rcodes) or list(attack.events)
    if not events:
        return 0.0
    keep = set(tracked)
    return sum(1 for e in events if e.qtype not in keep) / len(events)


def _minute_index(timestamps: np.ndarray, date: dt.date) -> np.ndarray:
    rel = (timestamps - day_start(date)) // 60
    return rel[(rel >= 0) & (rel < MINUTES_PER_DAY)].astype(np.int64)


def minute_counts(events, date: dt.date) -> np.ndarray:
    ts = np.fromiter((e.timestamp for e in events), dtype=np.float64)
    return np.bincount(_minute_index(ts, date), minlength=MINUTES_PER_DAY)


def active_minutes(attack) -> int:
    """Minutes whose NXDOMAIN count is strictly above the day's median minute."""
    counts = minute_counts((e for e in attack.events if e.rcode == NXDOMAIN), attack.date)
    return int(np.count_nonzero(counts > np.median(counts)))


def lex_samples(attack, rcodes=None) -> dict[str, list[str]]:
    """First-observed name per second for each suffix, in time order."""
    events = sorted(unresolved_events(attack, rcodes), key=lambda e: math.floor(e.timestamp))
    per_suffix: dict[str, list[str]] = defaultdict(list)
    last_second: dict[str, int] = {}
    for e in events:
        _, suffix = split_prefix(e.qname, attack.sld)
        sec = math.floor(e.timestamp)
        if last_second.get(suffix) == sec:
            continue
        last_second[suffix] = sec
        per_suffix[suffix].append(e.qname)
    return per_suffix


def lex_ratio(attack, rcodes=None) -> float:
    ratios = []
    for names in lex_samples(attack, rcodes).values():
        if len(names) < 2:
            continue
        ordered = sum(1 for a, b in zip(names, names[1:]) if b >= a)
        ratios.append(ordered / (len(names) - 1))
    if not ratios:
        log.debug("%s: no suffix with two samples, lex_ratio set to %.1f",
                    getattr(attack, "attack_id", attack), LEX_UNDEFINED)
        return LEX_UNDEFINED
    return float(np.mean(ratios))


# ------------------------------------------------------------ assembled vector

@dataclass(frozen=True)
class FeatureVector:
    label_ratio: float
    overlap_ratio: float
    qtype_fracs: tuple[float, ...]
    qtype_other: float
    active_min: float
    lex_ratio: float
    unigram_dists: tuple[float, ...]

    def as_array(self) -> np.ndarray:
        return np.array(
            [self.label_ratio, self.overlap_ratio, *self.qtype_fracs, self.qtype_other,
             self.active_min, self.lex_ratio, *self.unigram_dists],
            dtype=np.float64,
        )

    @classmethod
    def from_array(cls, values: Sequence[float], n_qtypes: int = len(TRACKED_QTYPES)) -> "FeatureVector":
        v = [float(x) for x in values]
        q_end = 2 + n_qtypes
        return cls(v[0], v[1], tuple(v[2:q_end]), v[q_end], v[q_end + 1], v[q_end + 2], tuple(v[q_end + 3:]))


def unigram_distances(dist: CharDistribution, archetypes) -> tuple[float, ...]:
    members = list(archetypes.distributions)[:ARCHETYPE_SLOTS]
    dists = [js_distance(dist, m) for m in members]
    dists += [MISSING_ARCHETYPE_DISTANCE] * (ARCHETYPE_SLOTS - len(dists))
    dists.append(js_distance(dist, archetypes.uniform))
    return tuple(dists)


def feature_vector(attack, archetypes, dictionary, tracked_qtypes: Sequence[int] = TRACKED_QTYPES,
                   rcodes=None) -> FeatureVector:
    """All clustering features of one attack.

    ``archetypes`` needs ``distributions`` (up to eight reference char0
    distributions, empty slots are padded with distance 1.0), ``uniform``,
    ``alphabet`` and ``mode``.
    """
    dist = char_distribution(attack_prefixes(attack, rcodes), archetypes.mode, archetypes.alphabet)
    return FeatureVector(
        label_ratio=label_ratio(attack, rcodes),
        overlap_ratio=overlap_ratio(attack, dictionary, rcodes),
        qtype_fracs=qtype_fractions(attack, tracked_qtypes, rcodes),
        qtype_other=qtype_other_fraction(attack, tracked_qtypes, rcodes),
        active_min=active_minutes(attack) / MINUTES_PER_DAY,
        lex_ratio=lex_ratio(attack, rcodes),
        unigram_dists=unigram_distances(dist, archetypes),
    )


# ------------------------------------------------------------ diagnostics

@dataclass
class DiagnosticBundle:
    attack_id: str
    events_per_minute: list[int]
    nxdomain_per_minute: list[int]
    qtype_by_minute: dict[int, list[int]]
    prefix_length_series: list[tuple[int, int, int]]  # (second offset, length, count)
    depth_series: list[tuple[int, int, int]]  # (second offset, depth, count)
    max_label_depth: int
    prefix_length_stats: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "attack_id": self.attack_id,
            "events_per_minute": self.events_per_minute,
            "nxdomain_per_minute": self.nxdomain_per_minute,
            "qtype_by_minute": {str(k): v for k, v in sorted(self.qtype_by_minute.items())},
            "prefix_length_series": [list(r) for r in self.prefix_length_series],
            "depth_series": [list(r) for r in self.depth_series],
            "max_label_depth": self.max_label_depth,
            "prefix_length_stats": self.prefix_length_stats,
        }


def diagnostics(attack, rcodes=None) -> DiagnosticBundle:
    events = list(attack.events)
    unres = [e for e in events if is_unresolved(e, rcodes)]
    start = day_start(attack.date)
    by_qtype: dict[int, list] = defaultdict(list)
    for e in events:
        by_qtype[e.qtype].append(e)
    plen: Counter = Counter()
    depth: Counter = Counter()
    lengths = []
    max_depth = 0
    for e in unres:
        labels = subdomain_labels(e.qname, attack.sld)
        sec = int(math.floor(e.timestamp)) - start
        d = len(labels)
        max_depth = max(max_depth, d)
        depth[(sec, d)] += 1
        if labels:
            plen[(sec, len(labels[0]))] += 1
            lengths.append(len(labels[0]))
    stats = {}
    if lengths:
        arr = np.asarray(lengths, dtype=np.float64)
        stats = {"mean": float(arr.mean()), "std": float(arr.std()),
                 "min": float(arr.min()), "max": float(arr.max())}
    return DiagnosticBundle(
        attack_id=getattr(attack, "attack_id", ""),
        events_per_minute=minute_counts(events, attack.date).tolist(),
        nxdomain_per_minute=minute_counts([e for e in events if e.rcode == NXDOMAIN], attack.date).tolist(),
        qtype_by_minute={q: minute_counts(evs, attack.date).tolist() for q, evs in by_qtype.items()},
        prefix_length_series=[(s, ln, c) for (s, ln), c in sorted(plen.items())],
        depth_series=[(s, d, c) for (s, d), c in sorted(depth.items())],
        max_label_depth=max_depth,
        prefix_length_stats=stats,
    )


# ------------------------------------------------------------ CSV exchange

ID_COLUMNS = ("sld", "date", "source")


def _fmt(x: float) -> str:
    return repr(float(x))


def write_features_csv(path, rows, names: Sequence[str] = FEATURE_NAMES, header: str | None = None) -> None:
    """``rows`` is an iterable of (attack, FeatureVector)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if header:
            fh.write(f"# {header}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([*ID_COLUMNS, *names])
        for attack, fv in rows:
            w.writerow([attack.sld, attack.date.isoformat(), attack.source,
                        *(_fmt(v) for v in fv.as_array())])


@dataclass
class FeatureTable:
    ids: list[tuple[str, str, str]]
    names: list[str]
    matrix: np.ndarray

    @property
    def slds(self) -> list[str]:
        return [i[0] for i in self.ids]

    @property
    def dates(self) -> list[str]:
        return [i[1] for i in self.ids]


def read_features_csv(path) -> FeatureTable:
    with open(path, encoding="utf-8", newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.reader(lines)
    head = next(reader, None)
    if head is None or tuple(head[:3]) != ID_COLUMNS:
        raise ConfigError(str(path), "not a features CSV (bad header)")
    names = head[3:]
    ids, rows = [], []
    for rec in reader:
        if not rec:
            continue
        ids.append((rec[0], rec[1], rec[2]))
        rows.append([float(x) for x in rec[3:]])
    matrix = np.array(rows, dtype=np.float64).reshape(len(rows), len(names))
    return FeatureTable(ids, names, matrix)

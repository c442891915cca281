"""Synthetic Slow Drip corpora with ground truth.

Generator families:

* ``dictionary`` walks a sorted word list and keeps appending words as
  labels (depth-first: the prefix varies fastest under a fixed suffix;
  breadth-first: the label next to the SLD varies fastest).
* ``incremental`` enumerates prefixes in counting order (a, b, ..., aa, ab).
* ``random`` draws pseudo-random labels.
* ``mixed`` runs several component generators sequentially or concurrently.

Background traffic gives every domain a log-normal daily query volume over a
handful of resolvable hostnames plus a bounded number of typo-like
unresolved names. Streams are merged through :func:`interleave`, which
models multi-path delivery jitter at one-second resolution.

Every output is a pure function of the configuration and its seeds.
"""

from __future__ import annotations

import datetime as dt
import hashlib
import itertools
import json
import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .errors import ConfigError, ExhaustionError
from .ingest import NXDOMAIN, write_events
from .pdns_model import PdnsEvent, day_start

FAMILIES = ("dictionary", "incremental", "random", "mixed")
ORDERS = ("ascending", "descending", "shuffled")
TRAVERSALS = ("depth_first", "breadth_first")
MIX_MODES = ("sequential", "concurrent")
SIX_QTYPES = (1, 5, 12, 16, 28, 33)
DEFAULT_ALPHABET = "0123456789abcdefghijklmnopqrstuvwxyz"  # sorted, so counting order is lexicographic per length
ENUMERATION_DICT_SIZE = 420_000

_CONSONANTS = ["b", "c", "d", "f", "g", "h", "j", "k", "l", "m", "n", "p", "r", "s", "t", "v",
               "w", "z", "ch", "sh", "th", "st", "tr", "br", "cl", "gr", "pl", "qu", "x", "y"]
_VOWELS = ["a", "e", "i", "o", "u", "ai", "ea", "io", "ou", "y"]
_CODAS = ["", "", "", "n", "r", "s", "t", "l", "m", "ng", "ck", "x"]
_COMMON_LABELS = [
    "www", "mail", "api", "cdn", "dev", "prod", "test", "stage", "staging", "cloud", "app",
    "m", "mobile", "static", "img", "images", "login", "auth", "admin", "portal", "vpn", "ftp",
    "smtp", "pop", "imap", "ns1", "ns2", "blog", "shop", "store", "docs", "help", "support",
    "status", "assets", "media", "video", "int", "internal", "corp", "office", "remote",
]


def _rng(*key: int | str) -> np.random.Generator:
    """Independent generator per (seed, stream, ...) key."""
    ints = []
    for k in key:
        if isinstance(k, str):
            ints.append(int.from_bytes(hashlib.sha256(k.encode()).digest()[:4], "little"))
        else:
            ints.append(int(k) & 0xFFFFFFFF)
    return np.random.default_rng(ints)


def _pronounceable(rng: np.random.Generator, syllables: int) -> str:
    parts = []
    for _ in range(syllables):
        parts.append(_CONSONANTS[rng.integers(len(_CONSONANTS))])
        parts.append(_VOWELS[rng.integers(len(_VOWELS))])
        parts.append(_CODAS[rng.integers(len(_CODAS))])
    return "".join(parts)


@lru_cache(maxsize=4)
def enumeration_dictionary(size: int = ENUMERATION_DICT_SIZE, seed: int = 0) -> tuple[str, ...]:
    """Sorted list of ``size`` distinct DNS-enumeration-style labels.

    Mixes common service labels, pronounceable compounds, numbered variants
    and hyphenated joins, roughly the texture of public subdomain
    brute-force lists.
    """
    rng = _rng(seed, "enumeration")
    words: set[str] = set(_COMMON_LABELS)
    C, V, K = np.array(_CONSONANTS), np.array(_VOWELS), np.array(_CODAS)
    while len(words) < size:
        m = (size - len(words)) * 2 + 1000
        nsyl = rng.integers(1, 5, m)
        maxs = 4
        c = C[rng.integers(len(C), size=(m, maxs))]
        v = V[rng.integers(len(V), size=(m, maxs))]
        k = K[rng.integers(len(K), size=(m, maxs))]
        syl = np.char.add(np.char.add(c, v), k)
        kind = rng.random(m)
        nums = rng.integers(0, 1000, m)
        for i in range(m):
            w = "".join(syl[i, : nsyl[i]])
            if kind[i] < 0.12:
                w = f"{w}{nums[i]}"
            elif kind[i] < 0.2:
                w = f"{w}-{_COMMON_LABELS[nums[i] % len(_COMMON_LABELS)]}"
            words.add(w)
            if len(words) >= size:
                break
    return tuple(sorted(words))


def read_dictionary(path) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        return [ln.strip().lower() for ln in fh if ln.strip() and not ln.startswith("#")]


def write_dictionary(path, words: Iterable[str], header: str | None = None) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if header:
            fh.write(f"# {header}\n")
        for w in words:
            fh.write(w + "\n")


# ---------------------------------------------------------------- configs

@dataclass
class GeneratorConfig:
    family: str
    dictionary: Sequence[str] | None = None
    qtype_mix: dict[int, float] = field(default_factory=lambda: {1: 1.0})
    depth_schedule: list[tuple[float, int]] = field(default_factory=lambda: [(math.inf, 1)])
    rate: float = 10.0
    order: str = "ascending"
    seed: int = 0
    alphabet: str = DEFAULT_ALPHABET
    length_range: tuple[int, int] = (8, 16)
    length_schedule: list[tuple[float, int]] | None = None
    max_length: int | None = None
    traversal: str = "depth_first"
    start_index: int = 0
    qtype_transition: float | None = None
    components: list["GeneratorConfig"] = field(default_factory=list)
    mix_mode: str = "sequential"

    def validate(self, where: str = "generator") -> "GeneratorConfig":
        if self.family not in FAMILIES:
            raise ConfigError(f"{where}.family", f"must be one of {FAMILIES}, got {self.family!r}")
        if self.order not in ORDERS:
            raise ConfigError(f"{where}.order", f"must be one of {ORDERS}")
        if self.traversal not in TRAVERSALS:
            raise ConfigError(f"{where}.traversal", f"must be one of {TRAVERSALS}")
        if not self.rate > 0:
            raise ConfigError(f"{where}.rate", "must be > 0")
        if not self.qtype_mix:
            raise ConfigError(f"{where}.qtype_mix", "must not be empty")
        if any(w < 0 for w in self.qtype_mix.values()):
            raise ConfigError(f"{where}.qtype_mix", "weights must be non-negative")
        total = sum(self.qtype_mix.values())
        if abs(total - 1.0) > 1e-9:
            raise ConfigError(f"{where}.qtype_mix", f"weights sum to {total:g}, expected 1")
        if any(not 0 <= int(q) <= 65535 for q in self.qtype_mix):
            raise ConfigError(f"{where}.qtype_mix", "qtype out of range")
        if not self.depth_schedule:
            raise ConfigError(f"{where}.depth_schedule", "must not be empty")
        for i, (dur, depth) in enumerate(self.depth_schedule):
            if depth < 1:
                raise ConfigError(f"{where}.depth_schedule[{i}]", "depth must be >= 1")
            if not dur > 0:
                raise ConfigError(f"{where}.depth_schedule[{i}]", "duration must be > 0")
        lo, hi = self.length_range
        if not 1 <= lo <= hi:
            raise ConfigError(f"{where}.length_range", "need 1 <= min <= max")
        if not self.alphabet:
            raise ConfigError(f"{where}.alphabet", "must not be empty")
        if self.family == "incremental" and self.order != "ascending":
            raise ConfigError(f"{where}.order", "incremental enumeration is ascending only")
        if self.family == "dictionary" and self.dictionary is not None and len(self.dictionary) == 0:
            raise ConfigError(f"{where}.dictionary", "must not be empty")
        if self.family == "mixed":
            if len(self.components) < 2:
                raise ConfigError(f"{where}.components", "mixed family needs at least two components")
            if self.mix_mode not in MIX_MODES:
                raise ConfigError(f"{where}.mix_mode", f"must be one of {MIX_MODES}")
            for i, c in enumerate(self.components):
                c.validate(f"{where}.components[{i}]")
        return self

    def depth_at(self, t_rel: float) -> int:
        acc = 0.0
        for dur, depth in self.depth_schedule:
            acc += dur
            if t_rel < acc:
                return int(depth)
        return int(self.depth_schedule[-1][1])


def _phase_at(schedule: list[tuple[float, int]], t_rel: float) -> int:
    acc = 0.0
    for dur, val in schedule:
        acc += dur
        if t_rel < acc:
            return int(val)
    return int(schedule[-1][1])


@dataclass
class BackgroundConfig:
    domains: int = 1000
    volume_mu: float = 3.0
    volume_sigma: float = 1.0
    day_sigma: float = 0.25
    hosts_max: int = 8
    typo_max: int = 8
    nx_fraction_servfail: float = 0.1
    popular_fraction: float = 0.0
    popular_nx_per_minute: float = 2.0
    tlds: tuple[str, ...] = ("com", "net", "org", "de", "co.uk", "ru", "io", "com.au")

    def validate(self, where: str = "background") -> "BackgroundConfig":
        if self.domains < 0:
            raise ConfigError(f"{where}.domains", "must be >= 0")
        if self.volume_sigma < 0 or self.day_sigma < 0:
            raise ConfigError(f"{where}.volume_sigma", "must be >= 0")
        if self.typo_max < 0 or self.hosts_max < 1:
            raise ConfigError(f"{where}.typo_max", "typo_max >= 0 and hosts_max >= 1 required")
        if not 0 <= self.popular_fraction <= 1:
            raise ConfigError(f"{where}.popular_fraction", "must lie in [0, 1]")
        return self


@dataclass
class AttackSpec:
    generator: GeneratorConfig
    sld: str
    day: int
    start: float  # seconds after 00:00 UTC
    end: float
    label: str = ""


@dataclass
class ScenarioConfig:
    start_date: dt.date = dt.date(2018, 8, 1)
    days: int = 3
    source: str = "sensor-a"
    seed: int = 0
    background: BackgroundConfig = field(default_factory=BackgroundConfig)
    attacks: list[AttackSpec] = field(default_factory=list)
    jitter: float = 2.0
    paths: int = 5
    dictionary_size: int = ENUMERATION_DICT_SIZE

    def validate(self) -> "ScenarioConfig":
        if self.days < 1:
            raise ConfigError("days", "must be >= 1")
        if self.jitter < 0:
            raise ConfigError("jitter", "must be >= 0")
        if self.paths < 1:
            raise ConfigError("paths", "must be >= 1")
        self.background.validate()
        for i, a in enumerate(self.attacks):
            where = f"attacks[{i}]"
            a.generator.validate(f"{where}.generator")
            if not 0 <= a.day < self.days:
                raise ConfigError(f"{where}.day", f"must lie in [0, {self.days})")
            if not 0 <= a.start < a.end <= 86400:
                raise ConfigError(f"{where}.start", "need 0 <= start < end <= 86400 (one UTC day)")
            if not a.sld:
                raise ConfigError(f"{where}.sld", "must not be empty")
        return self

    def date_of(self, day: int) -> dt.date:
        return self.start_date + dt.timedelta(days=day)


# ---------------------------------------------------------------- dict parsing

_GEN_FIELDS = {f for f in GeneratorConfig.__dataclass_fields__}


def _pairs(value, where: str) -> list[tuple[float, int]]:
    try:
        return [(math.inf if d in (None, "inf") else float(d), int(v)) for d, v in value]
    except (TypeError, ValueError):
        raise ConfigError(where, "expected a list of [duration, value] pairs") from None


def generator_from_dict(doc: dict, where: str = "generator") -> GeneratorConfig:
    if not isinstance(doc, dict):
        raise ConfigError(where, "expected a mapping")
    unknown = set(doc) - _GEN_FIELDS
    if unknown:
        raise ConfigError(f"{where}.{sorted(unknown)[0]}", "unknown field")
    kw = dict(doc)
    if "family" not in kw:
        raise ConfigError(f"{where}.family", "required")
    if "qtype_mix" in kw:
        try:
            kw["qtype_mix"] = {int(k): float(v) for k, v in kw["qtype_mix"].items()}
        except (AttributeError, TypeError, ValueError):
            raise ConfigError(f"{where}.qtype_mix", "expected a mapping qtype -> weight") from None
    for key in ("depth_schedule", "length_schedule"):
        if kw.get(key) is not None:
            kw[key] = _pairs(kw[key], f"{where}.{key}")
    if "length_range" in kw:
        kw["length_range"] = tuple(int(x) for x in kw["length_range"])
    if isinstance(kw.get("dictionary"), str):
        kw["dictionary"] = read_dictionary(kw["dictionary"])
    kw["components"] = [
        generator_from_dict(c, f"{where}.components[{i}]") for i, c in enumerate(kw.get("components", []))
    ]
    try:
        cfg = GeneratorConfig(**kw)
    except TypeError as exc:
        raise ConfigError(where, str(exc)) from None
    return cfg.validate(where)


def scenario_from_dict(doc: dict) -> ScenarioConfig:
    """Scenario from a parsed YAML/JSON document.

    ``preset: default`` or ``preset: families`` selects a built-in scenario;
    the remaining keys are then passed as its parameters.
    """
    if not isinstance(doc, dict):
        raise ConfigError("scenario", "expected a mapping")
    if "preset" in doc:
        params = {k: v for k, v in doc.items() if k != "preset"}
        builders = {"default": default_scenario, "families": family_scenario}
        if doc["preset"] not in builders:
            raise ConfigError("preset", f"must be one of {sorted(builders)}")
        try:
            return builders[doc["preset"]](**params)
        except TypeError as exc:
            raise ConfigError("preset", str(exc)) from None
    kw: dict[str, Any] = {}
    simple = {"days": int, "source": str, "seed": int, "jitter": float, "paths": int, "dictionary_size": int}
    for key, conv in simple.items():
        if key in doc:
            try:
                kw[key] = conv(doc[key])
            except (TypeError, ValueError):
                raise ConfigError(key, f"expected {conv.__name__}") from None
    if "start_date" in doc:
        try:
            kw["start_date"] = dt.date.fromisoformat(str(doc["start_date"]))
        except ValueError:
            raise ConfigError("start_date", "expected YYYY-MM-DD") from None
    if "background" in doc:
        bg = dict(doc["background"] or {})
        unknown = set(bg) - set(BackgroundConfig.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"background.{sorted(unknown)[0]}", "unknown field")
        if "tlds" in bg:
            bg["tlds"] = tuple(bg["tlds"])
        kw["background"] = BackgroundConfig(**bg)
    attacks = []
    for i, a in enumerate(doc.get("attacks", []) or []):
        where = f"attacks[{i}]"
        for req in ("generator", "sld", "day", "start", "end"):
            if req not in a:
                raise ConfigError(f"{where}.{req}", "required")
        attacks.append(AttackSpec(
            generator=generator_from_dict(a["generator"], f"{where}.generator"),
            sld=str(a["sld"]).lower(), day=int(a["day"]),
            start=float(a["start"]), end=float(a["end"]), label=str(a.get("label", "")),
        ))
    kw["attacks"] = attacks
    unknown = set(doc) - set(simple) - {"start_date", "background", "attacks"}
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown field")
    return ScenarioConfig(**kw).validate()


def _jsonable(obj):
    if isinstance(obj, float) and math.isinf(obj):
        return "inf"
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, dt.date):
        return obj.isoformat()
    return obj


def generator_to_dict(cfg: GeneratorConfig) -> dict:
    doc = asdict(cfg)
    if cfg.dictionary is not None:
        doc["dictionary"] = f"<{len(cfg.dictionary)} words>"
    doc["components"] = [generator_to_dict(c) for c in cfg.components]
    return _jsonable(doc)


def scenario_to_dict(sc: ScenarioConfig) -> dict:
    return _jsonable({
        "start_date": sc.start_date, "days": sc.days, "source": sc.source, "seed": sc.seed,
        "jitter": sc.jitter, "paths": sc.paths, "dictionary_size": sc.dictionary_size,
        "background": asdict(sc.background),
        "attacks": [
            {"generator": generator_to_dict(a.generator), "sld": a.sld, "day": a.day,
             "start": a.start, "end": a.end, "label": a.label}
            for a in sc.attacks
        ],
    })


# ---------------------------------------------------------------- generators

def _times(start: float, n: int, rate: float) -> np.ndarray:
    return start + np.arange(n, dtype=np.float64) / rate


_SORTED_CACHE: list[tuple[Sequence[str], list[str]]] = []


def _sorted_unique(words: Sequence[str]) -> list[str]:
    for src, out in _SORTED_CACHE:
        if src is words:
            return out
    if all(a < b for a, b in zip(words, itertools.islice(words, 1, None))):
        out = list(words)
    else:
        out = sorted(set(words))
    _SORTED_CACHE.append((words, out))
    del _SORTED_CACHE[:-4]
    return out


def _word_order(words: Sequence[str], order: str, rng: np.random.Generator) -> list[str]:
    ordered = list(_sorted_unique(words))
    if order == "descending":
        ordered.reverse()
    elif order == "shuffled":
        ordered = [ordered[i] for i in rng.permutation(len(ordered))]
    return ordered


def _events(times, qnames, sld: str, source: str) -> list[PdnsEvent]:
    return [PdnsEvent(float(t), f"{q}.{sld}", 1, NXDOMAIN, source) for t, q in zip(times, qnames)]


def gen_dictionary(config: GeneratorConfig, target_sld: str, start: float = 0.0,
                   n_events: int = 1000, source: str = "synth") -> list[PdnsEvent]:
    """Dictionary traversal that keeps appending words as labels.

    Depth-first keeps the suffix fixed while the prefix walks the word list;
    when the list is exhausted the next-outer label advances, like an
    odometer. Breadth-first turns the odometer the other way round. A depth
    change appends (or drops) labels next to the current stem.
    """
    words = _word_order(config.dictionary or enumeration_dictionary(), config.order, _rng(config.seed, "dict-order"))
    nw = len(words)
    times = _times(start, n_events, config.rate)
    cursor = config.start_index % nw
    digits: list[int] = []  # digits[0] = label next to the SLD ... digits[-1] = prefix
    out = []
    seen: set[str] = set()
    for t in times:
        depth = config.depth_at(t - start)
        if len(digits) != depth:
            if len(digits) > depth:
                digits = digits[:depth]
            while len(digits) < depth:
                digits.append(cursor)
                cursor = (cursor + 1) % nw
        labels = [words[d] for d in reversed(digits)]
        name = ".".join(labels)
        if name in seen:
            raise ExhaustionError(f"dictionary of {nw} words exhausted at depth {depth}")
        seen.add(name)
        out.append(name)
        _advance(digits, nw, fastest_last=config.traversal == "depth_first")
    return _events(times, out, target_sld, source)


def _advance(digits: list[int], base: int, fastest_last: bool) -> None:
    order = range(len(digits) - 1, -1, -1) if fastest_last else range(len(digits))
    for i in order:
        digits[i] = (digits[i] + 1) % base
        if digits[i] != 0:
            return


def counting_order(alphabet: str, max_length: int | None = None):
    """a, b, ..., aa, ab, ... in base-|alphabet| counting order.

    With ``max_length`` the sweep restarts from length one once every name
    up to that length has been produced.
    """
    while True:
        for length in itertools.count(1):
            if max_length is not None and length > max_length:
                break
            for tup in itertools.product(alphabet, repeat=length):
                yield "".join(tup)
        if max_length is None:
            return


def _stem_labels(config: GeneratorConfig, depth: int, phase: int) -> list[str]:
    rng = _rng(config.seed, "stem", phase)
    return [_pronounceable(rng, 2) for _ in range(depth - 1)]


def _with_stems(config: GeneratorConfig, times: np.ndarray, start: float, prefixes: list[str]) -> list[str]:
    out = []
    phase_of_depth: dict[int, list[str]] = {}
    for t, p in zip(times, prefixes):
        depth = config.depth_at(t - start)
        if depth == 1:
            out.append(p)
            continue
        stem = phase_of_depth.get(depth)
        if stem is None:
            stem = phase_of_depth[depth] = _stem_labels(config, depth, len(phase_of_depth))
        out.append(".".join([p, *stem]))
    return out


def gen_incremental(config: GeneratorConfig, target_sld: str, start: float = 0.0,
                    n_events: int = 1000, source: str = "synth") -> list[PdnsEvent]:
    times = _times(start, n_events, config.rate)
    prefixes = list(itertools.islice(counting_order(config.alphabet, config.max_length), n_events))
    return _events(times, _with_stems(config, times, start, prefixes), target_sld, source)


def gen_random(config: GeneratorConfig, target_sld: str, start: float = 0.0,
               n_events: int = 1000, source: str = "synth") -> list[PdnsEvent]:
    rng = _rng(config.seed, "random-labels")
    times = _times(start, n_events, config.rate)
    alpha = np.array(list(config.alphabet))
    lo, hi = config.length_range
    if config.length_schedule:
        lengths = np.array([_phase_at(config.length_schedule, t - start) for t in times])
    else:
        lengths = rng.integers(lo, hi + 1, n_events)
    chars = alpha[rng.integers(len(alpha), size=(n_events, int(lengths.max()) if n_events else 1))]
    prefixes = ["".join(chars[i, : lengths[i]]) for i in range(n_events)]
    if config.order != "shuffled":
        # sort within each schedule phase so scheduled transitions survive
        phase = [(config.depth_at(t - start), int(n)) for t, n in zip(times, lengths)] \
            if config.length_schedule else [config.depth_at(t - start) for t in times]
        out = []
        for _, grp in itertools.groupby(range(n_events), key=lambda k: phase[k]):
            block = sorted(prefixes[k] for k in grp)
            out.extend(reversed(block) if config.order == "descending" else block)
        prefixes = out
    return _events(times, _with_stems(config, times, start, prefixes), target_sld, source)


def apply_qtype_mix(stream: Sequence[PdnsEvent], qtype_mix: dict[int, float],
                    transition: float | None = None, seed: int = 0) -> list[PdnsEvent]:
    """Assign query types by weight; from ``transition`` on, type 1 only."""
    keys = sorted(qtype_mix)
    p = np.array([qtype_mix[k] for k in keys], dtype=np.float64)
    if (p < 0).any() or abs(p.sum() - 1.0) > 1e-9:
        raise ConfigError("qtype_mix", "weights must be non-negative and sum to 1")
    rng = _rng(seed, "qtype")
    draws = rng.choice(len(keys), size=len(stream), p=p / p.sum())
    out = []
    for ev, k in zip(stream, draws):
        q = 1 if transition is not None and ev.timestamp >= transition else keys[k]
        out.append(PdnsEvent(ev.timestamp, ev.qname, q, ev.rcode, ev.source))
    return out


_FAMILY_FUNCS = {"dictionary": gen_dictionary, "incremental": gen_incremental, "random": gen_random}


def generate(config: GeneratorConfig, target_sld: str, start: float, end: float,
             source: str = "synth") -> list[PdnsEvent]:
    """Attack stream over the window [start, end) with qtypes assigned."""
    config.validate()
    if config.family == "mixed":
        return _generate_mixed(config, target_sld, start, end, source)
    n = int(round((end - start) * config.rate))
    stream = _FAMILY_FUNCS[config.family](config, target_sld, start, n, source)
    transition = None if config.qtype_transition is None else start + config.qtype_transition
    return apply_qtype_mix(stream, config.qtype_mix, transition, config.seed)


def _generate_mixed(config: GeneratorConfig, target_sld, start, end, source) -> list[PdnsEvent]:
    parts = []
    k = len(config.components)
    for i, comp in enumerate(config.components):
        if config.mix_mode == "sequential":
            span = (end - start) / k
            parts.append(generate(comp, target_sld, start + i * span, start + (i + 1) * span, source))
        else:
            parts.append(generate(comp, target_sld, start, end, source))
    merged = sorted(
        ((ev.timestamp, ci, j, ev) for ci, part in enumerate(parts) for j, ev in enumerate(part)),
        key=lambda t: t[:3],
    )
    return [t[3] for t in merged]


# ---------------------------------------------------------------- background

_HOSTS = ["www", "mail", "api", "cdn", "m", "static", "login", "img"]


def background_domain(i: int, cfg: BackgroundConfig | None = None, seed: int = 0) -> str:
    cfg = cfg or BackgroundConfig()
    rng = _rng(seed, "bg-name", i)
    tld = cfg.tlds[int(rng.integers(len(cfg.tlds)))]
    return f"{_pronounceable(rng, int(rng.integers(1, 3)))}{i}.{tld}"


def _typo_pool(rng: np.random.Generator, size: int) -> list[str]:
    pool: list[str] = []
    while len(pool) < size:
        host = _HOSTS[int(rng.integers(len(_HOSTS)))]
        kind = int(rng.integers(3))
        if kind == 0:
            cand = host + host[-1]
        elif kind == 1:
            j = int(rng.integers(len(host)))
            cand = host[:j] + host[j + 1:] if len(host) > 1 else host + "w"
        else:
            cand = _pronounceable(rng, 1)
        cand = cand or "x"
        if cand not in pool and cand not in _HOSTS:
            pool.append(cand)
    return pool


def gen_background(scenario: ScenarioConfig, day: int = 0) -> list[PdnsEvent]:
    """Benign traffic for every background domain on one scenario day."""
    cfg = scenario.background
    if cfg.domains == 0:
        return []
    seed = scenario.seed
    base_rng = _rng(seed, "bg-volume")
    base = base_rng.lognormal(cfg.volume_mu, cfg.volume_sigma, cfg.domains)
    popular = base_rng.random(cfg.domains) < cfg.popular_fraction
    day_rng = _rng(seed, "bg-day", day)
    factor = day_rng.lognormal(0.0, cfg.day_sigma, cfg.domains) if cfg.day_sigma > 0 else np.ones(cfg.domains)
    t0 = day_start(scenario.date_of(day))
    out: list[PdnsEvent] = []
    src = scenario.source
    for i in range(cfg.domains):
        sld = background_domain(i, cfg, seed)
        drng = _rng(seed, "bg-domain", i)
        hosts = _HOSTS[: int(drng.integers(1, cfg.hosts_max + 1))]
        pool = _typo_pool(drng, cfg.typo_max)
        rng = _rng(seed, "bg-events", day, i)
        vol = int(round(base[i] * factor[i]))
        weights = 1.0 / np.arange(1, len(hosts) + 1)
        picks = rng.choice(len(hosts), size=vol, p=weights / weights.sum())
        times = t0 + rng.random(vol) * 86400
        for t, h in zip(times, picks):
            out.append(PdnsEvent(float(t), f"{hosts[h]}.{sld}", 1, 0, src))
        if vol and rng.random() < 0.5:
            out.append(PdnsEvent(float(t0 + rng.random() * 86400), sld, 1, 0, src))
        n_typo = int(rng.integers(0, cfg.typo_max + 1))
        if n_typo == 0:
            continue
        typos = [pool[j] for j in sorted(rng.choice(len(pool), n_typo, replace=False))]
        if popular[i]:
            reps = int(cfg.popular_nx_per_minute * 1440)
            tt = t0 + (np.arange(reps) + rng.random(reps)) * (86400 / reps)
            which = rng.integers(n_typo, size=reps)
        else:
            counts = rng.integers(1, 4, n_typo)
            which = np.repeat(np.arange(n_typo), counts)
            tt = t0 + rng.random(which.size) * 86400
        servfail = rng.random(which.size) < cfg.nx_fraction_servfail
        for t, w, sf in zip(tt, which, servfail):
            out.append(PdnsEvent(float(t), f"{typos[w]}.{sld}", 1, 2 if sf else NXDOMAIN, src))
    return out


# ---------------------------------------------------------------- interleave

def interleave(streams: Sequence[Sequence[PdnsEvent]], jitter_seconds: float = 0.0,
               paths: int = 1, seed: int = 0) -> list[PdnsEvent]:
    """Merge streams as observed after multi-path delivery.

    Each event rides one of ``paths`` simulated paths. A path has a fixed
    latency in [0, jitter); each event adds up to a quarter of the jitter on
    top, capped at ``jitter_seconds``. The merged stream is ordered by
    perturbed time and truncated to whole seconds.
    """
    if jitter_seconds < 0:
        raise ValueError("jitter must be >= 0")
    if paths < 1:
        raise ValueError("paths must be >= 1")
    rng = _rng(seed, "interleave")
    offsets = rng.random(paths) * jitter_seconds
    times, sids, idxs = [], [], []
    for si, stream in enumerate(streams):
        n = len(stream)
        if n == 0:
            continue
        ts = np.fromiter((e.timestamp for e in stream), dtype=np.float64, count=n)
        if jitter_seconds > 0:
            lane = rng.integers(paths, size=n)
            delay = np.minimum(offsets[lane] + rng.random(n) * 0.25 * jitter_seconds, jitter_seconds)
            ts = ts + delay
        times.append(ts)
        sids.append(np.full(n, si))
        idxs.append(np.arange(n))
    if not times:
        return []
    T, S, J = np.concatenate(times), np.concatenate(sids), np.concatenate(idxs)
    order = np.lexsort((J, S, T))
    out = []
    for r in order:
        ev = streams[S[r]][J[r]]
        out.append(PdnsEvent(float(math.floor(T[r])), ev.qname, ev.qtype, ev.rcode, ev.source))
    return out


# ---------------------------------------------------------------- scenarios

@dataclass
class SyntheticCorpus:
    scenario: ScenarioConfig
    days: dict[dt.date, list[PdnsEvent]]
    truth: dict
    dictionary: tuple[str, ...]


def attack_window(scenario: ScenarioConfig, spec: AttackSpec) -> tuple[float, float]:
    t0 = day_start(scenario.date_of(spec.day))
    return t0 + spec.start, t0 + spec.end


def _with_dictionary(cfg: GeneratorConfig, words: Sequence[str]) -> GeneratorConfig:
    if cfg.family == "dictionary" and cfg.dictionary is None:
        cfg = GeneratorConfig(**{**cfg.__dict__, "dictionary": words})
    if cfg.components:
        cfg = GeneratorConfig(**{**cfg.__dict__, "components": [_with_dictionary(c, words) for c in cfg.components]})
    return cfg


def run_scenario(scenario: ScenarioConfig) -> SyntheticCorpus:
    scenario.validate()
    words = enumeration_dictionary(scenario.dictionary_size, scenario.seed)
    streams: list[list[PdnsEvent]] = []
    for day in range(scenario.days):
        streams.append(gen_background(scenario, day))
    truth_attacks = []
    for i, spec in enumerate(scenario.attacks):
        lo, hi = attack_window(scenario, spec)
        cfg = _with_dictionary(spec.generator, words)
        stream = generate(cfg, spec.sld, lo, hi, scenario.source)
        streams.append(stream)
        truth_attacks.append({
            "index": i,
            "sld": spec.sld,
            "date": scenario.date_of(spec.day).isoformat(),
            "source": scenario.source,
            "family": spec.generator.family,
            "label": spec.label or spec.generator.family,
            "start": lo,
            "end": hi,
            "n_events": len(stream),
            "n_distinct": len({e.qname for e in stream}),
        })
    merged = interleave(streams, scenario.jitter, scenario.paths, scenario.seed)
    days: dict[dt.date, list[PdnsEvent]] = {scenario.date_of(d): [] for d in range(scenario.days)}
    spilled = 0
    for ev in merged:
        bucket = days.get(ev.date)
        if bucket is None:  # jitter pushed it past the last simulated midnight
            spilled += 1
        else:
            bucket.append(ev)
    truth = {
        "scenario": scenario_to_dict(scenario),
        "days": [d.isoformat() for d in sorted(days)],
        "attacks": truth_attacks,
        "dropped_after_last_day": spilled,
    }
    return SyntheticCorpus(scenario, days, truth, words)


def write_corpus(corpus: SyntheticCorpus, outdir, fmt: str = "tsv", header: str | None = None,
                 provenance: dict | None = None) -> list[Path]:
    """One event file per day, ``truth.json`` and ``dictionary.txt``."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    for date in sorted(corpus.days):
        path = outdir / f"events-{date.isoformat()}.{fmt}"
        write_events(path, corpus.days[date], fmt, header)
        written.append(path)
    truth = {"provenance": provenance, **corpus.truth} if provenance else corpus.truth
    (outdir / "truth.json").write_text(json.dumps(truth, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    write_dictionary(outdir / "dictionary.txt", corpus.dictionary, header)
    return written


def synthetic_attack(config: GeneratorConfig, sld: str, date: dt.date, start: float, end: float,
                     source: str = "synth", jitter: float = 2.0, paths: int = 5,
                     background: Sequence[PdnsEvent] = ()):
    """An :class:`AttackRecord` built straight from a generator, bypassing detection."""
    from .detector import AttackRecord

    t0 = day_start(date)
    stream = generate(config, sld, t0 + start, t0 + end, source)
    events = interleave([stream, list(background)], jitter, paths, config.seed)
    events = [e for e in events if e.date == date]
    n = len({e.qname for e in events if e.rcode != 0})
    return AttackRecord(sld=sld, date=date, source=source, stage1_count=n,
                        stage2_delta=n, events=tuple(events))


def default_scenario(seed: int = 0) -> ScenarioConfig:
    """Three days of background plus five attack families on the last day."""
    sc = ScenarioConfig(seed=seed, background=BackgroundConfig(domains=1000), dictionary_size=50_000)
    fams = [
        GeneratorConfig("dictionary", rate=10, order="ascending", depth_schedule=[(900, 1), (900, 2)], seed=seed + 1),
        GeneratorConfig("dictionary", rate=10, order="descending", qtype_mix={q: 1 / 6 for q in SIX_QTYPES}, seed=seed + 2),
        GeneratorConfig("random", rate=10, order="shuffled", seed=seed + 3),
        GeneratorConfig("incremental", rate=10, max_length=3, seed=seed + 4),
        GeneratorConfig("mixed", components=[
            GeneratorConfig("random", rate=5, order="shuffled", seed=seed + 5, length_range=(4, 6)),
            GeneratorConfig("dictionary", rate=5, order="ascending", seed=seed + 6, start_index=20_000),
        ], mix_mode="concurrent", seed=seed + 7),
    ]
    for i, g in enumerate(fams):
        sld = background_domain(i * 97 + 5, sc.background, seed) if i % 2 == 0 else f"target{i}-{seed}.com"
        sc.attacks.append(AttackSpec(g, sld, day=2, start=3600.0 * (i + 1), end=3600.0 * (i + 1) + 1800, label=f"family{i}"))
    return sc.validate()


# ---------------------------------------------------------------- presets

PRESET_FAMILIES = 5  # families 0-4; family 5 is held out as a novel family


def family_preset(family: int, variant: int = 0, seed: int = 0) -> tuple[GeneratorConfig, float]:
    """Generator config and attack duration (seconds) for a preset family.

    Variants of the same family differ in seeds, rates, durations and
    dictionary offsets but share the generator mechanics.
    """
    rng = _rng(seed, "preset", family, variant)
    s = int(rng.integers(2**31))
    offset = int(rng.integers(0, 380_000))
    u = lambda lo, hi: float(rng.uniform(lo, hi))  # noqa: E731
    six = {q: 1 / 6 for q in SIX_QTYPES}
    if family == 0:
        cfg = GeneratorConfig("dictionary", order="ascending", rate=u(0.8, 1.2), seed=s, start_index=offset)
        return cfg, u(3, 4) * 3600
    if family == 1:
        cfg = GeneratorConfig("dictionary", order="descending", rate=u(2.5, 3.5), seed=s, start_index=offset,
                              qtype_mix=six, depth_schedule=[(math.inf, 2)])
        return cfg, u(40, 60) * 60
    if family == 2:
        cfg = GeneratorConfig("random", order="shuffled", rate=u(1.5, 2.5), seed=s,
                              length_range=(8, 16), qtype_mix={1: 0.5, 28: 0.5})
        return cfg, u(60, 90) * 60
    if family == 3:
        cfg = GeneratorConfig("incremental", rate=u(3.5, 4.5), seed=s, max_length=3)
        return cfg, u(20, 30) * 60
    if family == 4:
        mix = {1: 0.7, 16: 0.3}
        cfg = GeneratorConfig("mixed", mix_mode="concurrent", seed=s, components=[
            GeneratorConfig("random", order="shuffled", rate=u(0.8, 1.2), seed=s + 1,
                            length_range=(4, 6), qtype_mix=mix, depth_schedule=[(600, 1), (math.inf, 3)]),
            GeneratorConfig("dictionary", order="ascending", rate=u(0.8, 1.2), seed=s + 2,
                            start_index=offset, qtype_mix=mix, depth_schedule=[(600, 1), (math.inf, 3)]),
        ])
        return cfg, u(60, 80) * 60
    if family == 5:
        cfg = GeneratorConfig("dictionary", order="shuffled", traversal="breadth_first", rate=u(1.5, 2.5),
                              seed=s, start_index=offset, qtype_mix={16: 1.0}, depth_schedule=[(math.inf, 4)])
        return cfg, u(100, 140) * 60
    raise ValueError(f"no preset family {family}")


def preset_attacks(families: Sequence[int], per_family: int, seed: int = 0,
                   date: dt.date = dt.date(2018, 8, 3), source: str = "synth",
                   jitter: float = 2.0, paths: int = 5, dictionary: Sequence[str] | None = None):
    """AttackRecords for preset families with their family labels."""
    words = dictionary if dictionary is not None else enumeration_dictionary()
    attacks, labels = [], []
    for fam in families:
        for v in range(per_family):
            cfg, duration = family_preset(fam, v, seed)
            cfg = _with_dictionary(cfg, words)
            start = float(_rng(seed, "preset-start", fam, v).uniform(0, 86400 - duration - 60))
            sld = f"fam{fam}-v{v}-s{seed}.com"
            attacks.append(synthetic_attack(cfg, sld, date, start, start + duration, source, jitter, paths))
            labels.append(fam)
    return attacks, labels


def family_scenario(families: Sequence[int] = range(PRESET_FAMILIES), per_family: int = 20,
                    seed: int = 0, background_domains: int = 1000, attack_days: int = 5) -> ScenarioConfig:
    """Background plus preset-family attacks spread over ``attack_days`` days.

    The first two days carry background only so every attack day has a
    d-2 baseline.
    """
    sc = ScenarioConfig(seed=seed, days=attack_days + 2,
                        background=BackgroundConfig(domains=background_domains))
    k = 0
    for fam in families:
        for v in range(per_family):
            cfg, duration = family_preset(fam, v, seed)
            start = float(_rng(seed, "preset-start", fam, v).uniform(0, 86400 - duration - 60))
            sc.attacks.append(AttackSpec(cfg, f"fam{fam}-v{v}-s{seed}.com", day=2 + k % attack_days,
                                         start=start, end=start + duration, label=f"family{fam}"))
            k += 1
    return sc.validate()

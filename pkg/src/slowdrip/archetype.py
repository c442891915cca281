"""Archetype discovery: DBSCAN over pairwise J-S distances of char0 distributions.

The medoid of each large cluster becomes a fixed reference distribution.
Together with an exact uniform distribution these references turn the
per-attack character distribution into nine distance features. Archetype
sets are frozen on disk so features stay comparable across later runs.
"""

from __future__ import annotations

import datetime as dt
import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import kernels
from .errors import ArchetypeError
from .features import (
    ARCHETYPE_SLOTS,
    DEFAULT_ALPHABET,
    CharDistribution,
    attack_prefixes,
    char_distribution,
    js_distance,
    union_alphabet,
)

log = logging.getLogger(__name__)

FORMAT_NAME = "slowdrip-archetypes"
FORMAT_VERSION = 1
DEFAULT_MIN_POINTS = 5
DEFAULT_MIN_CLUSTER_SIZE = 10


@dataclass(frozen=True, eq=False)
class DistanceMatrix:
    ids: tuple[str, ...]
    d: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.d, dtype=np.float64)
        if d.shape != (len(self.ids), len(self.ids)):
            raise ValueError("matrix shape does not match ids")
        d.setflags(write=False)
        object.__setattr__(self, "d", d)

    def __len__(self):
        return len(self.ids)

    def key(self, i: int) -> tuple[str, ...]:
        """Tie-break key (sld, date, ...) parsed from an ``sld|date|source`` id."""
        return tuple(self.ids[i].split("|"))


def distance_matrix(ids: Sequence[str], dists: Sequence[CharDistribution]) -> DistanceMatrix:
    alphabet = union_alphabet(*dists)
    P = np.vstack([d.aligned(alphabet) for d in dists]) if dists else np.zeros((0, 0))
    return DistanceMatrix(tuple(ids), kernels.pairwise_js(P))


def attack_distributions(attacks, mode: str = "char0", alphabet=DEFAULT_ALPHABET) -> list[CharDistribution]:
    return [char_distribution(attack_prefixes(a), mode, alphabet) for a in attacks]


def pairwise_js(attacks, mode: str = "char0", alphabet=DEFAULT_ALPHABET) -> DistanceMatrix:
    attacks = list(attacks)
    if len(attacks) < 2:
        raise ValueError("need at least two attacks")
    return distance_matrix([a.attack_id for a in attacks], attack_distributions(attacks, mode, alphabet))


def _as_array(matrix) -> np.ndarray:
    return matrix.d if isinstance(matrix, DistanceMatrix) else np.asarray(matrix, dtype=np.float64)


def dbscan(matrix, eps: float, min_points: int) -> np.ndarray:
    """Density clustering over a precomputed distance matrix.

    A point is core when at least ``min_points`` points (itself included)
    lie within ``eps`` (inclusive). Clusters are the connected components of
    core points; a border point joins the cluster of its nearest core
    neighbour (lowest index on ties), which keeps the result independent of
    input order. Everything else is labelled -1.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if min_points < 2:
        raise ValueError("min_points must be at least 2")
    D = _as_array(matrix)
    n = D.shape[0]
    neigh = D <= eps
    core = neigh.sum(axis=1) >= min_points
    labels = np.full(n, -1, dtype=np.int64)
    cid = 0
    for i in range(n):
        if not core[i] or labels[i] != -1:
            continue
        labels[i] = cid
        stack = [i]
        while stack:
            u = stack.pop()
            for v in np.flatnonzero(neigh[u] & core & (labels == -1)):
                labels[v] = cid
                stack.append(int(v))
        cid += 1
    for i in np.flatnonzero(~core):
        near = np.flatnonzero(neigh[i] & core)
        if near.size:
            labels[i] = labels[near[np.argmin(D[i, near])]]
    return labels


def k_distance_eps(matrix, k: int = DEFAULT_MIN_POINTS) -> float:
    """Elbow of the sorted k-distance curve (k counts the point itself)."""
    D = _as_array(matrix)
    n = D.shape[0]
    k = max(1, min(k, n))
    kd = np.sort(np.sort(D, axis=1)[:, k - 1])
    if n < 3 or kd[-1] == kd[0]:
        return max(float(kd[-1]), 1e-9)
    x = np.linspace(0.0, 1.0, n)
    y = (kd - kd[0]) / (kd[-1] - kd[0])
    elbow = int(np.argmax(x - y))
    return max(float(kd[elbow]), 1e-9)


def medoid(members: Sequence[int], matrix) -> int:
    """Member with the smallest summed distance to the others.

    Ties go to the lexicographically smallest (sld, date) when ``matrix``
    carries ids, otherwise to the smallest index.
    """
    members = list(members)
    if not members:
        raise ValueError("empty cluster")
    D = _as_array(matrix)
    idx = np.asarray(members)
    sums = D[np.ix_(idx, idx)].sum(axis=1)
    best = sums.min()
    tied = [m for m, s in zip(members, sums) if s == best]
    if isinstance(matrix, DistanceMatrix):
        return min(tied, key=lambda m: (matrix.key(m)[:2], m))
    return min(tied)


@dataclass(frozen=True)
class Archetype:
    attack_id: str
    distribution: CharDistribution
    cluster_size: int


@dataclass(frozen=True, eq=False)
class ArchetypeSet:
    members: tuple[Archetype, ...]
    uniform: CharDistribution
    mode: str = "char0"
    alphabet: tuple[str, ...] = DEFAULT_ALPHABET
    fingerprint: str = ""
    created: str = ""
    params: dict = field(default_factory=dict)

    @property
    def distributions(self) -> list[CharDistribution]:
        return [m.distribution for m in self.members]

    def separation(self) -> DistanceMatrix:
        """Pairwise J-S distances between all references, uniform last."""
        return distance_matrix(
            [m.attack_id for m in self.members] + ["uniform"],
            self.distributions + [self.uniform],
        )

    def __eq__(self, other):
        if not isinstance(other, ArchetypeSet):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def to_dict(self) -> dict:
        sep = self.separation()
        return {
            "format": FORMAT_NAME,
            "version": FORMAT_VERSION,
            "mode": self.mode,
            "alphabet": list(self.alphabet),
            "created": self.created,
            "corpus_fingerprint": self.fingerprint,
            "params": self.params,
            "archetypes": [
                {
                    "attack_id": m.attack_id,
                    "cluster_size": m.cluster_size,
                    "support_count": m.distribution.support_count,
                    "alphabet": list(m.distribution.alphabet),
                    "probs": m.distribution.probs.tolist(),
                }
                for m in self.members
            ],
            "uniform": {"alphabet": list(self.uniform.alphabet), "probs": self.uniform.probs.tolist()},
            "separation": {"ids": list(sep.ids), "matrix": sep.d.tolist()},
        }

    def save(self, path, provenance: dict | None = None) -> None:
        doc = self.to_dict()
        if provenance:
            doc = {"provenance": provenance, **doc}
        Path(path).write_text(json.dumps(doc, indent=1, sort_keys=False) + "\n", encoding="utf-8")

    @classmethod
    def from_dict(cls, doc: dict) -> "ArchetypeSet":
        if doc.get("format") != FORMAT_NAME:
            raise ArchetypeError("not an archetype file")
        if doc.get("version") != FORMAT_VERSION:
            raise ArchetypeError(f"unsupported archetype file version {doc.get('version')}")
        members = tuple(
            Archetype(
                a["attack_id"],
                CharDistribution(tuple(a["alphabet"]), np.array(a["probs"]), a.get("support_count", 0)),
                a["cluster_size"],
            )
            for a in doc["archetypes"]
        )
        u = doc["uniform"]
        return cls(
            members=members,
            uniform=CharDistribution(tuple(u["alphabet"]), np.array(u["probs"]), 0),
            mode=doc["mode"],
            alphabet=tuple(doc["alphabet"]),
            fingerprint=doc.get("corpus_fingerprint", ""),
            created=doc.get("created", ""),
            params=doc.get("params", {}),
        )

    @classmethod
    def load(cls, path) -> "ArchetypeSet":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def corpus_fingerprint(ids: Sequence[str], dists: Sequence[CharDistribution]) -> str:
    h = hashlib.sha256()
    for i, d in sorted(zip(ids, dists), key=lambda t: t[0]):
        h.update(i.encode())
        h.update("".join(d.alphabet).encode())
        h.update(d.probs.tobytes())
    return h.hexdigest()


def select_archetypes(
    attacks,
    eps: float | None = None,
    min_points: int = DEFAULT_MIN_POINTS,
    min_cluster_size: int = DEFAULT_MIN_CLUSTER_SIZE,
    mode: str = "char0",
    alphabet: Sequence[str] = DEFAULT_ALPHABET,
    max_archetypes: int = ARCHETYPE_SLOTS,
) -> ArchetypeSet:
    attacks = sorted(attacks, key=lambda a: a.sort_key)
    dists = attack_distributions(attacks, mode, alphabet)
    ids = [a.attack_id for a in attacks]
    dm = distance_matrix(ids, dists)
    if eps is None:
        eps = k_distance_eps(dm, min_points)
        log.info("k-distance elbow eps = %.4f", eps)
    labels = dbscan(dm, eps, min_points)
    clusters = []
    for c in sorted(set(labels.tolist()) - {-1}):
        members = np.flatnonzero(labels == c).tolist()
        if len(members) >= min_cluster_size:
            clusters.append((len(members), medoid(members, dm)))
    if not clusters:
        raise ArchetypeError(
            f"no cluster with >= {min_cluster_size} attacks at eps={eps:.4f}, "
            f"min_points={min_points}; re-tune eps (try --eps) or lower --min-cluster-size"
        )
    clusters.sort(key=lambda t: (-t[0], dm.key(t[1])))
    if len(clusters) < max_archetypes:
        log.warning("only %d qualifying clusters (want %d); remaining slots padded",
                    len(clusters), max_archetypes)
    chosen = clusters[:max_archetypes]
    members = tuple(Archetype(ids[m], dists[m], size) for size, m in chosen)
    created = max(a.date for a in attacks).isoformat() if attacks else dt.date.today().isoformat()
    return ArchetypeSet(
        members=members,
        uniform=CharDistribution.uniform(alphabet),
        mode=mode,
        alphabet=tuple(alphabet),
        fingerprint=corpus_fingerprint(ids, dists),
        created=created,
        params={"eps": float(eps), "min_points": min_points,
                "min_cluster_size": min_cluster_size, "n_attacks": len(attacks),
                "n_clusters": int(len(set(labels.tolist()) - {-1}))},
    )


def archetype_labels(attacks, archetypes: ArchetypeSet) -> list[int]:
    """Index of the closest archetype for each attack (diagnostic only)."""
    out = []
    for d in attack_distributions(attacks, archetypes.mode, archetypes.alphabet):
        out.append(int(np.argmin([js_distance(d, r) for r in archetypes.distributions])))
    return out

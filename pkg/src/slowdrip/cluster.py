"""HDBSCAN clustering of feature vectors, cluster reports and drift checks."""

from __future__ import annotations

import csv
import json
import math
from collections import Counter, deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import kernels
from .errors import InsufficientCorpusError, StateError

DEFAULT_MIN_CLUSTER_SIZE = 10
DRIFT_RADIUS_PERCENTILE = 90.0
DOMINANT_FEATURES = 3
SAMPLE_DOMAINS = 5


# ---------------------------------------------------------------- HDBSCAN

def _as_matrix(vectors) -> np.ndarray:
    rows = [v.as_array() if hasattr(v, "as_array") else np.asarray(v, dtype=np.float64) for v in vectors]
    if not rows:
        return np.zeros((0, 0))
    return np.vstack(rows).astype(np.float64)


def euclidean_matrix(X: np.ndarray) -> np.ndarray:
    sq = np.einsum("ij,ij->i", X, X)
    D2 = sq[:, None] + sq[None, :] - 2.0 * (X @ X.T)
    np.maximum(D2, 0.0, out=D2)
    D = np.sqrt(D2)
    np.fill_diagonal(D, 0.0)
    return D


def core_distances(D: np.ndarray, min_samples: int) -> np.ndarray:
    """Distance to the ``min_samples``-th nearest point, the point itself included."""
    k = min(min_samples, D.shape[0]) - 1
    return np.partition(D, k, axis=1)[:, k]


def single_linkage(mst: np.ndarray, n: int) -> np.ndarray:
    """scipy-style linkage rows (left, right, distance, size) from MST edges."""
    order = np.argsort(mst[:, 2], kind="stable")
    parent = np.arange(2 * n - 1)
    size = np.ones(2 * n - 1, dtype=np.int64)

    def find(x):
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    out = np.zeros((n - 1, 4))
    nxt = n
    for row, e in enumerate(order):
        a, b, w = int(mst[e, 0]), int(mst[e, 1]), mst[e, 2]
        ra, rb = find(a), find(b)
        out[row] = (ra, rb, w, size[ra] + size[rb])
        parent[ra] = parent[rb] = nxt
        size[nxt] = size[ra] + size[rb]
        nxt += 1
    return out


def _leaves(hierarchy: np.ndarray, node: int, n: int) -> list[int]:
    out, stack = [], [node]
    while stack:
        x = stack.pop()
        if x < n:
            out.append(x)
        else:
            row = hierarchy[x - n]
            stack.extend((int(row[0]), int(row[1])))
    return out


def condense_tree(hierarchy: np.ndarray, min_cluster_size: int) -> list[tuple[int, int, float, int]]:
    """Condensed cluster tree rows (parent, child, lambda, child_size).

    Clusters are numbered from ``n`` (the root) upward; children always get
    larger numbers than their parent.
    """
    n = hierarchy.shape[0] + 1
    root = 2 * n - 2

    def size_of(x):
        return 1 if x < n else int(hierarchy[x - n, 3])

    relabel = {root: n}
    next_label = n + 1
    rows: list[tuple[int, int, float, int]] = []
    queue = deque([root])
    while queue:
        node = queue.popleft()
        if node < n:
            continue
        left, right, dist, _ = hierarchy[node - n]
        left, right = int(left), int(right)
        lam = 1.0 / dist if dist > 0 else math.inf
        ls, rs = size_of(left), size_of(right)
        parent = relabel[node]
        if ls >= min_cluster_size and rs >= min_cluster_size:
            for child, cs in ((left, ls), (right, rs)):
                relabel[child] = next_label
                rows.append((parent, next_label, lam, cs))
                next_label += 1
                queue.append(child)
        else:
            for child, cs in ((left, ls), (right, rs)):
                if cs >= min_cluster_size:
                    relabel[child] = parent
                    queue.append(child)
                else:
                    for leaf in _leaves(hierarchy, child, n):
                        rows.append((parent, leaf, lam, 1))
    return rows


def _stabilities(rows, n: int) -> tuple[dict[int, float], dict[int, list[int]]]:
    birth = {n: 0.0}
    children: dict[int, list[int]] = {n: []}
    for parent, child, lam, cs in rows:
        if child >= n:
            birth[child] = lam
            children.setdefault(parent, []).append(child)
            children.setdefault(child, [])
    stability = {c: 0.0 for c in birth}
    for parent, child, lam, cs in rows:
        b = birth[parent]
        if math.isinf(lam) and math.isinf(b):
            continue
        stability[parent] += (lam - b) * cs
    return stability, children


def select_clusters(rows, n: int, allow_single_cluster: bool = False) -> set[int]:
    """Excess-of-mass selection over the condensed tree."""
    stability, children = _stabilities(rows, n)
    nodes = sorted(stability, reverse=True)
    if not allow_single_cluster:
        nodes = [c for c in nodes if c != n]
    selected = {c: True for c in nodes}
    stab = dict(stability)
    for node in nodes:
        child_sum = sum(stab[c] for c in children.get(node, []))
        if child_sum > stab[node]:
            selected[node] = False
            stab[node] = child_sum
        else:
            stack = list(children.get(node, []))
            while stack:
                c = stack.pop()
                if c in selected:
                    selected[c] = False
                stack.extend(children.get(c, []))
    return {c for c, keep in selected.items() if keep}


def label_points(rows, n: int, selected: set[int]) -> np.ndarray:
    parent_of: dict[int, int] = {}
    point_parent = np.full(n, -1, dtype=np.int64)
    for parent, child, lam, cs in rows:
        if child >= n:
            parent_of[child] = parent
        else:
            point_parent[child] = parent
    label_map = {c: i for i, c in enumerate(sorted(selected))}
    labels = np.full(n, -1, dtype=np.int64)
    for p in range(n):
        c = int(point_parent[p])
        while c != -1 and c not in selected:
            c = parent_of.get(c, -1)
        if c != -1:
            labels[p] = label_map[c]
    return labels


def hdbscan(vectors, min_cluster_size: int = DEFAULT_MIN_CLUSTER_SIZE,
            min_samples: int | None = None, allow_single_cluster: bool = False) -> np.ndarray:
    """Cluster labels (-1 = noise) for Euclidean feature vectors.

    Builds the minimum spanning tree of the mutual-reachability graph,
    condenses the single-linkage hierarchy by ``min_cluster_size`` and picks
    the flat clustering with maximal total stability.
    """
    X = _as_matrix(vectors)
    n = X.shape[0]
    if min_cluster_size < 2:
        raise ValueError("min_cluster_size must be at least 2")
    if n < 2 * min_cluster_size:
        raise InsufficientCorpusError(
            f"need at least {2 * min_cluster_size} vectors for min_cluster_size={min_cluster_size}, got {n}"
        )
    min_samples = min_samples or min_cluster_size
    D = euclidean_matrix(X)
    core = core_distances(D, min_samples)
    mst = kernels.mutual_reachability_mst(D, core)
    hierarchy = single_linkage(mst, n)
    rows = condense_tree(hierarchy, min_cluster_size)
    selected = select_clusters(rows, n, allow_single_cluster)
    return label_points(rows, n, selected)


# ---------------------------------------------------------------- reporting

@dataclass
class ClusterInfo:
    id: int
    size: int
    day_span: int
    sample_domains: list[str]
    dominant_features: list[dict]


@dataclass
class ClusterReport:
    labels: list[int]
    clusters: list[ClusterInfo]
    coverage: float
    min_cluster_size: int = DEFAULT_MIN_CLUSTER_SIZE

    @property
    def unclustered(self) -> int:
        return sum(1 for x in self.labels if x == -1)

    def to_dict(self) -> dict:
        return {
            "min_cluster_size": self.min_cluster_size,
            "n_attacks": len(self.labels),
            "n_clusters": len(self.clusters),
            "unclustered": self.unclustered,
            "coverage": self.coverage,
            "clusters": [c.__dict__ for c in self.clusters],
        }


def dominant_features(cluster_rows: np.ndarray, X: np.ndarray, names: Sequence[str],
                      top: int = DOMINANT_FEATURES) -> list[dict]:
    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    cm = cluster_rows.mean(axis=0)
    z = np.zeros_like(mu)
    ok = sd > 0
    z[ok] = (cm[ok] - mu[ok]) / sd[ok]
    order = sorted(range(len(names)), key=lambda i: (-abs(z[i]), i))
    return [
        {"feature": names[i], "z": round(float(z[i]), 6),
         "direction": "high" if z[i] > 0 else "low", "cluster_mean": round(float(cm[i]), 6)}
        for i in order[:top] if z[i] != 0
    ]


def cluster_report(labels, slds: Sequence[str], dates: Sequence[str], vectors,
                   names: Sequence[str], min_cluster_size: int = DEFAULT_MIN_CLUSTER_SIZE) -> ClusterReport:
    labels = [int(x) for x in labels]
    X = _as_matrix(vectors)
    clusters = []
    for c in sorted(set(labels) - {-1}):
        idx = [i for i, lab in enumerate(labels) if lab == c]
        counts = Counter(slds[i] for i in idx)
        samples = [s for s, _ in sorted(counts.items(), key=lambda t: (-t[1], t[0]))[:SAMPLE_DOMAINS]]
        clusters.append(ClusterInfo(
            id=c, size=len(idx), day_span=len({dates[i] for i in idx}),
            sample_domains=samples,
            dominant_features=dominant_features(X[idx], X, names),
        ))
    coverage = (sum(c.size for c in clusters) / len(labels)) if labels else 0.0
    return ClusterReport(labels, clusters, coverage, min_cluster_size)


def render_report_md(report: ClusterReport, provenance: str | None = None) -> str:
    lines = []
    if provenance:
        lines.append(f"<!-- {provenance} -->")
    lines += [
        "# Attack clusters",
        "",
        f"{len(report.labels)} attacks, {len(report.clusters)} clusters of at least "
        f"{report.min_cluster_size} attacks, {report.unclustered} unclustered "
        f"(coverage {report.coverage:.1%}).",
        "",
        "| No. | Size | Days | Sample Attack Domains | Dominant Features |",
        "|---:|---:|---:|---|---|",
    ]
    for c in report.clusters:
        feats = ", ".join(f"{f['direction']} {f['feature']}" for f in c.dominant_features)
        lines.append(f"| {c.id} | {c.size} | {c.day_span} | {', '.join(c.sample_domains)} | {feats} |")
    return "\n".join(lines) + "\n"


def feature_correlation(X: np.ndarray) -> np.ndarray:
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.corrcoef(X, rowvar=False)


def _cell(x: float) -> str:
    return "" if math.isnan(x) else repr(round(float(x), 12))


def write_cluster_outputs(outdir, report: ClusterReport, table, provenance: dict | None = None,
                          extra: dict | None = None) -> None:
    """clusters.json, report.md, umap_input.csv and feature_corr.csv."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    X = table.matrix
    doc = {}
    if provenance:
        doc["provenance"] = provenance
    doc.update(report.to_dict())
    doc["feature_names"] = list(table.names)
    doc["attacks"] = [
        {"sld": s, "date": d, "source": src, "label": lab, "vector": [float(v) for v in X[i]]}
        for i, ((s, d, src), lab) in enumerate(zip(table.ids, report.labels))
    ]
    if extra:
        doc.update(extra)
    (outdir / "clusters.json").write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")
    prov_line = _prov_line(provenance)
    (outdir / "report.md").write_text(render_report_md(report, prov_line), encoding="utf-8")
    with open(outdir / "umap_input.csv", "w", encoding="utf-8", newline="") as fh:
        if prov_line:
            fh.write(f"# {prov_line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sld", "date", "source", "label", *table.names])
        for i, (ident, lab) in enumerate(zip(table.ids, report.labels)):
            w.writerow([*ident, lab, *(repr(float(v)) for v in X[i])])
    corr = feature_correlation(X) if X.shape[0] > 1 else np.full((X.shape[1],) * 2, np.nan)
    with open(outdir / "feature_corr.csv", "w", encoding="utf-8", newline="") as fh:
        if prov_line:
            fh.write(f"# {prov_line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["feature", *table.names])
        for name, row in zip(table.names, np.atleast_2d(corr)):
            w.writerow([name, *(_cell(v) for v in row)])


def _prov_line(provenance: dict | None) -> str | None:
    if not provenance:
        return None
    return " ".join(f"{k}={v}" for k, v in provenance.items())


# ---------------------------------------------------------------- drift

@dataclass
class Baseline:
    vectors: np.ndarray
    labels: np.ndarray
    min_cluster_size: int = DEFAULT_MIN_CLUSTER_SIZE
    medoids: dict[int, np.ndarray] = field(default_factory=dict)
    radii: dict[int, float] = field(default_factory=dict)

    def __post_init__(self):
        self.vectors = _as_matrix(self.vectors)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if not self.medoids:
            self.medoids, self.radii = cluster_medoids(self.vectors, self.labels)

    @classmethod
    def from_clusters_json(cls, path) -> "Baseline":
        path = Path(path)
        if not path.exists():
            raise StateError(f"baseline {path} does not exist; run `slowdrip cluster` first")
        doc = json.loads(path.read_text(encoding="utf-8"))
        attacks = doc.get("attacks")
        if not attacks:
            raise StateError(f"{path} holds no baseline attacks")
        return cls([a["vector"] for a in attacks], [a["label"] for a in attacks],
                   doc.get("min_cluster_size", DEFAULT_MIN_CLUSTER_SIZE))


def cluster_medoids(X: np.ndarray, labels: np.ndarray,
                    percentile: float = DRIFT_RADIUS_PERCENTILE) -> tuple[dict, dict]:
    medoids, radii = {}, {}
    for c in sorted(set(labels.tolist()) - {-1}):
        idx = np.flatnonzero(labels == c)
        D = euclidean_matrix(X[idx])
        m = idx[int(np.argmin(D.sum(axis=1)))]
        medoids[c] = X[m]
        radii[c] = float(np.percentile(np.linalg.norm(X[idx] - X[m], axis=1), percentile))
    return medoids, radii


@dataclass
class DriftResult:
    assignments: list[int]
    new_labels: list[int] | None
    union_labels: list[int] | None
    union_matches: list[int] | None

    def summary(self) -> dict:
        n = len(self.assignments)
        assigned = sum(1 for a in self.assignments if a != -1)
        out = {
            "n_new": n,
            "assigned": assigned,
            "unassigned": n - assigned,
            "by_cluster": {str(k): v for k, v in sorted(Counter(a for a in self.assignments if a != -1).items())},
        }
        if self.new_labels is not None:
            out["new_only_clusters"] = len(set(self.new_labels) - {-1})
            out["new_only_clustered"] = sum(1 for x in self.new_labels if x != -1)
        if self.union_matches is not None:
            out["union_in_baseline_clusters"] = sum(1 for x in self.union_matches if x != -1)
        return out


def drift_assign(new_vectors, baseline: Baseline | None, recluster: bool = True) -> DriftResult:
    """Assign new attacks to baseline clusters.

    A vector joins the cluster of its nearest baseline medoid when it lies
    within that cluster's 90th-percentile member radius, otherwise -1. With
    ``recluster`` the new batch alone and the union with the baseline are
    also re-clustered from scratch.
    """
    if baseline is None or not baseline.medoids:
        raise StateError("no baseline clustering available")
    X = _as_matrix(new_vectors)
    if X.shape[0] == 0:
        return DriftResult([], None, None, None)
    ids = sorted(baseline.medoids)
    M = np.vstack([baseline.medoids[c] for c in ids])
    dist = np.linalg.norm(X[:, None, :] - M[None, :, :], axis=2)
    assignments = []
    for row in dist:
        j = int(np.argmin(row))
        assignments.append(ids[j] if row[j] <= baseline.radii[ids[j]] else -1)
    new_labels = union_labels = union_matches = None
    if recluster:
        mcs = baseline.min_cluster_size
        if X.shape[0] >= 2 * mcs:
            new_labels = hdbscan(X, mcs).tolist()
        U = np.vstack([baseline.vectors, X])
        union = hdbscan(U, mcs)
        union_labels = union.tolist()
        nb = baseline.vectors.shape[0]
        mapping = {}
        for c in set(union.tolist()) - {-1}:
            base_members = baseline.labels[union[:nb] == c]
            base_members = base_members[base_members != -1]
            if base_members.size:
                mapping[c] = Counter(base_members.tolist()).most_common(1)[0][0]
        union_matches = [mapping.get(c, -1) for c in union[nb:].tolist()]
    return DriftResult(assignments, new_labels, union_labels, union_matches)

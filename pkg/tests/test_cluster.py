import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.cluster import HDBSCAN
from sklearn.metrics import adjusted_rand_score

from slowdrip.cluster import (
    Baseline,
    cluster_report,
    drift_assign,
    hdbscan,
    render_report_md,
    write_cluster_outputs,
)
from slowdrip.errors import InsufficientCorpusError, StateError
from slowdrip.features import FEATURE_NAMES, FeatureTable


def blobs(seed, n_blobs=3, per=25, dim=5, spread=0.05):
    rng = np.random.default_rng(seed)
    centers = rng.random((n_blobs, dim))
    X = np.vstack([c + spread * rng.standard_normal((per, dim)) for c in centers])
    return X, np.repeat(np.arange(n_blobs), per)


def same_labels(a, b):
    a, b = np.asarray(a), np.asarray(b)
    if not np.array_equal(a == -1, b == -1):
        return False
    keep = a != -1
    if keep.sum() == 0:
        return True
    pairs = set(zip(a[keep].tolist(), b[keep].tolist()))
    return len(pairs) == len(set(a[keep].tolist())) == len(set(b[keep].tolist()))


@pytest.mark.parametrize("seed", range(20))
def test_matches_sklearn_without_ties(seed):
    rng = np.random.default_rng(100 + seed)
    X, _ = blobs(seed, n_blobs=int(rng.integers(2, 5)), per=int(rng.integers(15, 40)),
                 spread=float(rng.uniform(0.03, 0.15)))
    mcs = int(rng.integers(5, 12))
    ours = hdbscan(X, mcs, min_samples=1)
    ref = HDBSCAN(min_cluster_size=mcs, min_samples=1).fit(X).labels_
    assert same_labels(ours, ref)


@pytest.mark.parametrize("seed", range(10))
def test_close_to_sklearn_with_default_min_samples(seed):
    X, _ = blobs(seed, per=30, spread=0.08)
    ours = hdbscan(X, 10)
    ref = HDBSCAN(min_cluster_size=10).fit(X).labels_
    # equal mutual-reachability weights may be merged in a different order
    assert adjusted_rand_score(ours, ref) >= 0.9


def test_recovers_separated_blobs():
    X, truth = blobs(4, n_blobs=4, per=30, spread=0.02)
    assert adjusted_rand_score(truth, hdbscan(X, 10)) == 1.0


def test_uniform_noise_is_unclustered():
    X = np.random.default_rng(0).random((100, 20))
    assert np.mean(hdbscan(X, 10) == -1) >= 0.9


def test_insufficient_corpus():
    with pytest.raises(InsufficientCorpusError):
        hdbscan(np.zeros((19, 3)), 10)
    with pytest.raises(ValueError):
        hdbscan(np.zeros((10, 3)), 1)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 1000), st.randoms(use_true_random=False))
def test_permutation_invariant(seed, rnd):
    X, _ = blobs(seed, per=20)
    perm = list(range(len(X)))
    rnd.shuffle(perm)
    assert same_labels(hdbscan(X, 8, min_samples=1)[perm], hdbscan(X[perm], 8, min_samples=1))


def _table(X, slds=None, dates=None):
    n = len(X)
    slds = slds or [f"d{i}.com" for i in range(n)]
    dates = dates or ["2018-08-0%d" % (1 + i % 3) for i in range(n)]
    return FeatureTable([(s, d, "src") for s, d in zip(slds, dates)], list(FEATURE_NAMES), X)


def _feature_blobs(seed=1):
    rng = np.random.default_rng(seed)
    a = np.clip(0.2 + 0.02 * rng.standard_normal((20, 20)), 0, 1)
    b = np.clip(0.8 + 0.02 * rng.standard_normal((20, 20)), 0, 1)
    b[:, 0] = 0.1
    return np.vstack([a, b])


def test_report_and_outputs(tmp_path):
    X = _feature_blobs()
    table = _table(X, slds=[f"a{i % 3}.com" for i in range(20)] + [f"b{i}.com" for i in range(20)])
    labels = hdbscan(X, 10)
    rep = cluster_report(labels, table.slds, table.dates, X, table.names, 10)
    assert sorted(c.size for c in rep.clusters) == [20, 20]
    assert rep.coverage == 1.0
    first = next(c for c in rep.clusters if c.size == 20 and "a0.com" in c.sample_domains)
    assert first.day_span == 3
    assert len(first.sample_domains) == 3
    assert all(len(c.dominant_features) == 3 for c in rep.clusters)
    md = render_report_md(rep, "tool=test")
    assert "| Size |" in md and md.startswith("<!-- tool=test -->")
    write_cluster_outputs(tmp_path, rep, table, {"tool": "test"})
    doc = json.loads((tmp_path / "clusters.json").read_text())
    assert doc["provenance"] == {"tool": "test"}
    assert len(doc["attacks"]) == 40
    for name in ("report.md", "umap_input.csv", "feature_corr.csv"):
        assert (tmp_path / name).read_text().strip()
    base = Baseline.from_clusters_json(tmp_path / "clusters.json")
    assert np.array_equal(base.labels, labels)


class TestDrift:
    def setup_method(self):
        self.X = _feature_blobs()
        self.labels = hdbscan(self.X, 10)
        self.base = Baseline(self.X, self.labels, 10)

    def test_same_distribution_assigned(self):
        fresh = _feature_blobs(seed=2)
        res = drift_assign(fresh, self.base)
        expect = {lab: self.labels[i * 20] for i, lab in enumerate([0, 1])}
        got = np.array(res.assignments)
        assert np.mean(got[:20] == expect[0]) >= 0.8
        assert np.mean(got[20:] == expect[1]) >= 0.8
        assert res.union_labels is not None and len(res.union_labels) == 80

    def test_novel_points_unassigned(self):
        novel = np.full((12, 20), 0.5)
        novel += 0.01 * np.random.default_rng(3).standard_normal(novel.shape)
        res = drift_assign(novel, self.base, recluster=False)
        assert res.assignments == [-1] * 12
        assert res.summary()["unassigned"] == 12

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.lists(st.floats(0, 1), min_size=20, max_size=20), min_size=1, max_size=15))
    def test_only_baseline_clusters_used(self, rows):
        res = drift_assign(np.array(rows), self.base, recluster=False)
        allowed = set(self.labels.tolist()) - {-1}
        assert set(res.assignments) <= allowed | {-1}

    def test_empty_batch(self):
        res = drift_assign(np.zeros((0, 20)), self.base)
        assert res.assignments == [] and res.summary()["n_new"] == 0

    def test_requires_baseline(self, tmp_path):
        with pytest.raises(StateError):
            drift_assign(self.X, None)
        with pytest.raises(StateError):
            Baseline.from_clusters_json(tmp_path / "missing.json")


def test_two_gaussian_blobs():
    rng = np.random.default_rng(12)
    X = np.vstack([rng.normal(0.25, 0.03, (30, 20)), rng.normal(0.75, 0.03, (30, 20))])
    truth = np.repeat([0, 1], 30)
    labels = hdbscan(X, 10)
    assert len(set(labels.tolist()) - {-1}) == 2
    hits = sum(np.mean(labels[truth == k] == np.bincount(labels[truth == k][labels[truth == k] >= 0]).argmax())
               for k in (0, 1)) / 2
    assert hits >= 0.95


def test_fifty_noise_points():
    X = np.random.default_rng(50).random((50, 20))
    assert np.mean(hdbscan(X, 10) == -1) >= 0.9


@pytest.mark.parametrize("seed", range(5))
def test_duplicated_corpus_keeps_structure(seed):
    X, _ = blobs(seed, n_blobs=3, per=25, spread=0.03)
    once = hdbscan(X, 10)
    twice = hdbscan(np.vstack([X, X]), 10)
    assert same_labels(once, twice[: len(X)]) and same_labels(once, twice[len(X):])
    for c in set(once.tolist()) - {-1}:
        k = int(twice[np.flatnonzero(once == c)[0]])
        assert np.sum(twice == k) == 2 * np.sum(once == c)


def test_report_invariants_and_single_cluster():
    rng = np.random.default_rng(3)
    X = np.clip(0.5 + 0.01 * rng.standard_normal((25, 20)), 0, 1)
    X = np.vstack([X, rng.random((3, 20))])
    labels = np.array([0] * 25 + [-1] * 3)
    table = _table(X)
    rep = cluster_report(labels, table.slds, table.dates, X, table.names, 10)
    assert len(rep.clusters) == 1
    assert sum(c.size for c in rep.clusters) + rep.unclustered == len(X)
    assert all(c.size >= 10 and c.id != -1 for c in rep.clusters)
    assert render_report_md(rep).count("\n| 0 |") == 1


def test_dominant_features_name_the_distinguishing_column():
    X = _feature_blobs()
    names = list(FEATURE_NAMES)
    X[:20, names.index("overlap_ratio")] = 1.0
    X[20:, names.index("overlap_ratio")] = 0.0
    labels = hdbscan(X, 10)
    table = _table(X)
    rep = cluster_report(labels, table.slds, table.dates, X, table.names, 10)
    first = next(c for c in rep.clusters if c.id == labels[0])
    top = {(f["feature"], f["direction"]) for f in first.dominant_features}
    assert ("overlap_ratio", "high") in top

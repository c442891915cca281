"""Exit criteria, one test per criterion.

Each test prints a single ``criterion N: PASS|FAIL`` line; the lines are
repeated in the terminal summary. Run only these with ``pytest -m acceptance``.
"""

import dataclasses
import itertools
import json
import math
import time
from pathlib import Path

import numpy as np
import pytest
import yaml
from click.testing import CliRunner
from sklearn.metrics import adjusted_rand_score

from slowdrip import synthgen as sg
from slowdrip.archetype import dbscan, select_archetypes
from slowdrip.cli import main
from slowdrip.cluster import Baseline, drift_assign, hdbscan
from slowdrip.detector import detect_attacks, quartiles
from slowdrip.features import (
    CharDistribution,
    attack_prefixes,
    char_distribution,
    feature_vector,
    js_distance,
    lex_ratio,
    overlap_ratio,
)
from slowdrip.ingest import read_events

from support import DAY, verdict

pytestmark = pytest.mark.acceptance


def test_criterion_1_js_metric():
    rng = np.random.default_rng(1)
    alphabet = tuple(f"s{i}" for i in range(66))

    def draw():
        p = rng.dirichlet(np.full(66, rng.choice([0.1, 1.0, 10.0])))
        p[rng.random(66) < rng.uniform(0, 0.5)] = 0.0
        if p.sum() == 0:
            p[rng.integers(66)] = 1.0
        return CharDistribution(alphabet, p / p.sum(), 0)

    t = time.perf_counter()
    worst_sym = worst_self = worst_tri = 0.0
    lo, hi = math.inf, -math.inf
    for _ in range(1000):
        p, q, r = draw(), draw(), draw()
        d_pq, d_qp = js_distance(p, q), js_distance(q, p)
        worst_sym = max(worst_sym, abs(d_pq - d_qp))
        worst_self = max(worst_self, js_distance(p, p))
        d = {(a, b): js_distance(x, y) for (a, x), (b, y) in itertools.permutations(enumerate((p, q, r)), 2)}
        lo, hi = min(lo, *d.values()), max(hi, *d.values())
        for a, b, c in itertools.permutations(range(3)):
            worst_tri = max(worst_tri, d[(a, c)] - d[(a, b)] - d[(b, c)])
    elapsed = time.perf_counter() - t
    ok = worst_sym == 0.0 and worst_self <= 1e-9 and 0.0 <= lo and hi <= 1.0 and worst_tri <= 1e-9 and elapsed < 5
    verdict(1, "J-S metric suite", ok,
            f"asym={worst_sym:.1e} self={worst_self:.1e} range=[{lo:.3f},{hi:.3f}] "
            f"triangle slack={worst_tri:.1e} time={elapsed:.2f}s")


def _oracle_quartile(values, p):
    s = sorted(values)
    h = (len(s) - 1) * p
    k = int(h)
    if k + 1 >= len(s):
        return float(s[-1])
    return s[k] + (h - k) * (s[k + 1] - s[k])


def test_criterion_2_quartile_oracle():
    rng = np.random.default_rng(2)
    worst = 0.0
    algebra_ok = True
    for i in range(10_000):
        n = int(rng.integers(4, 300))
        vals = (rng.integers(0, 50, n) if i % 2 else rng.lognormal(2, 1.5, n)).tolist()
        s = quartiles(vals)
        q1, q3 = _oracle_quartile(vals, 0.25), _oracle_quartile(vals, 0.75)
        worst = max(worst, abs(s.q1 - q1), abs(s.q3 - q3))
        algebra_ok &= s.iqr == s.q3 - s.q1 and s.threshold == 1.5 * s.iqr + s.q3
    verdict(2, "quartile/threshold oracle", worst <= 1e-12 and algebra_ok,
            f"10000 multisets, max |diff|={worst:.1e}, threshold algebra {'ok' if algebra_ok else 'broken'}")


@pytest.fixture(scope="module")
def detection_corpus(tmp_path_factory):
    sc = sg.ScenarioConfig(seed=21, days=3, background=sg.BackgroundConfig(domains=10_000))
    for i in range(20):
        cfg, duration = sg.family_preset(i % 5, i // 5, seed=21)
        # half the victims are existing background domains
        sld = sg.background_domain(i * 311 + 7, sc.background, sc.seed) if i % 2 else f"victim{i}.com"
        start = 1800.0 + i * 3000
        sc.attacks.append(sg.AttackSpec(cfg, sld, day=2, start=start, end=min(start + duration, 86000)))
    corpus = sg.run_scenario(sc.validate())
    out = tmp_path_factory.mktemp("detect")
    sg.write_corpus(corpus, out)
    return corpus, out


def test_criterion_3_detection(detection_corpus, suffixes):
    corpus, out = detection_corpus
    n_events = sum(len(v) for v in corpus.days.values())
    t = time.perf_counter()
    day_d = list(read_events(out / "events-2018-08-03.tsv"))
    day_d2 = list(read_events(out / "events-2018-08-01.tsv"))
    found = detect_attacks(day_d, day_d2, suffixes)
    elapsed = time.perf_counter() - t
    truth = {a["sld"] for a in corpus.truth["attacks"]}
    hits = {a.sld for a in found} & truth
    fps = sorted({a.sld for a in found} - truth)
    recall = len(hits) / len(truth)
    loud = all(a.stage1_count >= 5 * a.stage1_threshold for a in found if a.sld in truth)
    ok = recall >= 0.95 and not fps and loud and elapsed < 120
    verdict(3, "detection recall/precision", ok,
            f"{n_events} events, recall={recall:.2f}, false positives={len(fps)}, "
            f"attacks >=5x threshold={loud}, ingest+detect {elapsed:.1f}s")


def _reference_dbscan(D, eps, min_pts):
    n = len(D)
    core = [sum(1 for j in range(n) if D[i][j] <= eps) >= min_pts for i in range(n)]
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i in range(n):
        for j in range(i + 1, n):
            if core[i] and core[j] and D[i][j] <= eps:
                parent[find(i)] = find(j)
    labels = [find(i) if core[i] else -1 for i in range(n)]
    for i in range(n):
        if not core[i]:
            near = [(D[i][j], j) for j in range(n) if core[j] and D[i][j] <= eps]
            if near:
                labels[i] = labels[min(near)[1]]
    return labels


def _same_partition(a, b):
    a, b = list(a), list(b)
    if [x == -1 for x in a] != [x == -1 for x in b]:
        return False
    pairs = {(x, y) for x, y in zip(a, b) if x != -1}
    return len(pairs) == len({x for x, _ in pairs}) == len({y for _, y in pairs})


def test_criterion_4_dbscan_equivalence():
    matches = 0
    for seed in range(20):
        rng = np.random.default_rng(seed)
        centers = rng.dirichlet(np.ones(12), size=4)
        P = np.vstack([rng.dirichlet(c * 40 + 0.05) for c in centers[rng.integers(4, size=50)]])
        dists = [CharDistribution(tuple("abcdefghijkl"), p, 0) for p in P]
        D = np.array([[js_distance(p, q) for q in dists] for p in dists])
        eps = float(np.quantile(D[np.triu_indices(50, 1)], 0.1))
        ours = dbscan(D, eps, 4)
        matches += _same_partition(ours, _reference_dbscan(D.tolist(), eps, 4))
    verdict(4, "DBSCAN vs brute-force reference", matches == 20, f"{matches}/20 seeds identical up to relabeling")


def test_criterion_5_lexicographic_calibration():
    words = sg.enumeration_dictionary()
    scores = {}
    for order in ("ascending", "shuffled", "descending"):
        scores[order] = []
        for k, rate in enumerate((0.5, 1.0, 2.0, 3.0)):
            cfg = sg.GeneratorConfig("dictionary", dictionary=words, order=order, rate=rate,
                                     seed=50 + k, start_index=10_000 * (k + 1))
            rec = sg.synthetic_attack(cfg, "t.com", DAY, 3600, 7200, jitter=2.0, paths=5)
            scores[order].append(lex_ratio(rec))
    ok = (min(scores["ascending"]) >= 0.8
          and all(abs(s - 0.5) <= 0.05 for s in scores["shuffled"])
          and max(scores["descending"]) <= 0.2)
    fmt = lambda xs: "/".join(f"{x:.3f}" for x in xs)  # noqa: E731
    verdict(5, "lexicographic calibration (5 paths, 2 s jitter)", ok,
            f"ascending {fmt(scores['ascending'])}, shuffled {fmt(scores['shuffled'])}, "
            f"descending {fmt(scores['descending'])} at 0.5/1/2/3 qps")


def test_criterion_6_uniformity():
    cfg = sg.GeneratorConfig("incremental", rate=10, max_length=3)
    rec = sg.synthetic_attack(cfg, "t.com", DAY, 0, 10_000, jitter=0, paths=1)
    dist = char_distribution(attack_prefixes(rec), "overall")
    d = js_distance(dist, CharDistribution.uniform(dist.alphabet))
    verdict(6, "incremental enumerator uniformity", len(rec.events) == 100_000 and d <= 0.05,
            f"{len(rec.events)} prefixes, J-S to uniform={d:.4f}")


def test_criterion_7_dictionary_fingerprint():
    words = sg.enumeration_dictionary()
    wordset = frozenset(words)
    dict_scores, rand_scores = [], []
    for fam in (0, 1, 5):
        for v in range(3):
            cfg, duration = sg.family_preset(fam, v, seed=7)
            cfg = dataclasses.replace(cfg, dictionary=words)
            rec = sg.synthetic_attack(cfg, f"d{fam}{v}.com", DAY, 600, 600 + min(duration, 3600))
            dict_scores.append(overlap_ratio(rec, wordset))
    for k, lengths in enumerate([(8, 16), (4, 6), (6, 10)]):
        cfg = sg.GeneratorConfig("random", rate=2, length_range=lengths, seed=70 + k, order="shuffled")
        rec = sg.synthetic_attack(cfg, f"r{k}.com", DAY, 600, 4200)
        rand_scores.append(overlap_ratio(rec, wordset))
    ok = min(dict_scores) >= 0.99 and max(rand_scores) <= 0.05
    verdict(7, "dictionary fingerprint", ok,
            f"dictionary attacks min overlap={min(dict_scores):.3f}, "
            f"random attacks max overlap={max(rand_scores):.4f} against {len(words)} words")


@pytest.fixture(scope="module")
def family_model():
    words = sg.enumeration_dictionary()
    wordset = frozenset(words)
    attacks, labels = sg.preset_attacks(range(sg.PRESET_FAMILIES), 20, seed=1, dictionary=words)
    t = time.perf_counter()
    arch = select_archetypes(attacks)
    X = np.array([feature_vector(a, arch, wordset).as_array() for a in attacks])
    pred = hdbscan(X, 10)
    elapsed = time.perf_counter() - t
    return {"arch": arch, "words": wordset, "X": X, "pred": pred,
            "labels": np.array(labels), "elapsed": elapsed}


def test_criterion_8_end_to_end_clustering(family_model):
    pred, labels = family_model["pred"], family_model["labels"]
    n_clusters = len(set(pred.tolist()) - {-1})
    ari = adjusted_rand_score(labels, pred)
    noise = np.random.default_rng(8).random((100, 20))
    noise_frac = float(np.mean(hdbscan(noise, 10) == -1))
    elapsed = family_model["elapsed"]
    ok = n_clusters >= 5 and ari >= 0.8 and noise_frac >= 0.9 and elapsed < 60
    verdict(8, "end-to-end clustering", ok,
            f"5 families x 20: {n_clusters} clusters, ARI={ari:.3f}; noise-only -1 fraction={noise_frac:.2f}; "
            f"archetypes+features+HDBSCAN {elapsed:.1f}s")


def test_criterion_9_drift(family_model):
    X, pred, labels = family_model["X"], family_model["pred"], family_model["labels"]
    base = Baseline(X, pred, 10)
    home = {f: int(np.bincount(pred[labels == f][pred[labels == f] >= 0]).argmax()) for f in (0, 1)}
    fresh, fresh_labels = sg.preset_attacks([0, 1, 5], 20, seed=2)
    Y = np.array([feature_vector(a, family_model["arch"], family_model["words"]).as_array() for a in fresh])
    fresh_labels = np.array(fresh_labels)
    assigned = np.array(drift_assign(Y, base).assignments)
    per_family = {f: float(np.mean(assigned[fresh_labels == f] == home[f])) for f in (0, 1)}
    known = np.isin(fresh_labels, [0, 1])
    stable = float(np.mean(assigned[known] == np.vectorize(home.get)(fresh_labels[known])))
    novel = float(np.mean(assigned[fresh_labels == 5] == -1))
    verdict(9, "drift stability", stable >= 0.8 and novel >= 0.6,
            f"baseline families kept={stable:.3f} (family0 {per_family[0]:.2f}, family1 {per_family[1]:.2f}), "
            f"novel unassigned={novel:.2f}")


def _cli(*args):
    res = CliRunner().invoke(main, [str(a) for a in args])
    assert res.exit_code == 0, res.output


def _pipeline(workdir: Path, monkeypatch):
    workdir.mkdir()
    monkeypatch.chdir(workdir)
    Path("scenario.yaml").write_text(yaml.safe_dump(
        {"preset": "families", "per_family": 4, "seed": 10, "background_domains": 300, "attack_days": 1}))
    _cli("synth", "--scenario", "scenario.yaml", "--out", "corpus")
    _cli("detect", "corpus/events-2018-08-03.tsv", "corpus/events-2018-08-01.tsv", "--out", "det")
    _cli("featurize", "det", "--out", "feat/features.csv", "--archetypes", "build",
         "--dictionary", "corpus/dictionary.txt", "--diagnostics", "feat/diag")
    _cli("cluster", "feat/features.csv", "--out", "clu", "--min-cluster-size", "4")
    return {p.relative_to(workdir).as_posix(): p.read_bytes()
            for p in sorted(workdir.rglob("*")) if p.is_file()}


def test_criterion_10_determinism(tmp_path, monkeypatch):
    cfg_path = tmp_path / "conf.yaml"
    cfg_path.write_text("archetype_min_cluster_size: 3\n")
    monkeypatch.setenv("SLOWDRIP_CONFIG", str(cfg_path))
    first = _pipeline(tmp_path / "run1", monkeypatch)
    second = _pipeline(tmp_path / "run2", monkeypatch)
    differing = sorted(k for k in first.keys() | second.keys() if first.get(k) != second.get(k))
    kinds = sorted({Path(k).suffix for k in first})
    verdict(10, "byte-identical pipeline re-run", not differing and len(first) > 10,
            f"{len(first)} files ({' '.join(kinds)}), {len(differing)} differ")

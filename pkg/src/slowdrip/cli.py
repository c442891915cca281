"""``slowdrip`` command line.

Settings come from one YAML document (``--config`` or ``$SLOWDRIP_CONFIG``)
with flags taking precedence. Exit codes: 0 success, 1 input/output or
configuration problems, 2 populations or corpora too small to analyse.
"""

from __future__ import annotations

import csv
import functools
import hashlib
import json
import logging
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import click
import yaml

from . import __version__
from .errors import (
    ConfigError,
    CorruptInputError,
    InsufficientCorpusError,
    InsufficientPopulationError,
    SlowDripError,
)

log = logging.getLogger("slowdrip")

CONFIG_ENV = "SLOWDRIP_CONFIG"
EXIT_OK, EXIT_ERROR, EXIT_TOO_SMALL = 0, 1, 2


@dataclass
class PipelineConfig:
    suffix_list: str | None = None
    dictionary: str | None = None
    archetypes: str | None = None
    rcodes: list[int] | None = None
    quantile_method: str = "linear"
    qtypes: list[int] = field(default_factory=lambda: [1, 5, 12, 16, 28, 33])
    mode: str = "char0"
    eps: float | None = None
    min_points: int = 5
    archetype_min_cluster_size: int = 10
    min_cluster_size: int = 10
    min_samples: int | None = None
    seed: int = 0
    format: str = "tsv"

    def validate(self) -> "PipelineConfig":
        if self.quantile_method != "linear":
            raise ConfigError("quantile_method", "only 'linear' (type-7) interpolation is supported")
        if self.rcodes is not None and (not self.rcodes or any(not 1 <= r <= 23 for r in self.rcodes)):
            raise ConfigError("rcodes", "expected a non-empty list of non-zero rcodes")
        if not self.qtypes or any(not 0 <= q <= 65535 for q in self.qtypes):
            raise ConfigError("qtypes", "expected a non-empty list of qtypes")
        if self.mode not in ("char0", "overall"):
            raise ConfigError("mode", "must be char0 or overall")
        if self.eps is not None and not 0 < self.eps <= 1:
            raise ConfigError("eps", "must lie in (0, 1]")
        if self.min_points < 2:
            raise ConfigError("min_points", "must be >= 2")
        if self.min_cluster_size < 2 or self.archetype_min_cluster_size < 1:
            raise ConfigError("min_cluster_size", "must be >= 2")
        if self.min_samples is not None and self.min_samples < 1:
            raise ConfigError("min_samples", "must be >= 1")
        if self.format not in ("tsv", "jsonl"):
            raise ConfigError("format", "must be tsv or jsonl")
        for name in ("suffix_list", "dictionary"):
            p = getattr(self, name)
            if p is not None and not Path(p).is_file():
                raise ConfigError(name, f"file not found: {p}")
        return self

    def digest(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


_CFG_FIELDS = {f.name for f in fields(PipelineConfig)}


def load_config(path: str | None) -> PipelineConfig:
    if not path:
        return PipelineConfig()
    p = Path(path)
    if not p.is_file():
        raise ConfigError("config", f"file not found: {path}")
    try:
        doc = yaml.safe_load(p.read_text(encoding="utf-8")) or {}
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"{path}:{mark.line + 1}" if mark else str(path)
        raise ConfigError(where, "invalid YAML") from None
    if not isinstance(doc, dict):
        raise ConfigError("config", "top level must be a mapping")
    unknown = set(doc) - _CFG_FIELDS
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown setting")
    return PipelineConfig(**doc)


def _override(cfg: PipelineConfig, **flags) -> PipelineConfig:
    for k, v in flags.items():
        if v is not None:
            setattr(cfg, k, v)
    return cfg.validate()


def provenance(command: str, cfg: PipelineConfig | None = None, extra: dict | None = None) -> dict:
    out = {"tool": "slowdrip", "version": __version__, "command": command}
    if cfg is not None:
        out["config"] = cfg.digest()
    if extra:
        out.update(extra)
    return out


def header_line(prov: dict) -> str:
    return " ".join(f"{k}={v}" for k, v in prov.items())


def _int_list(value: str | None) -> list[int] | None:
    if value is None:
        return None
    try:
        return [int(x) for x in value.split(",") if x.strip()]
    except ValueError:
        raise click.BadParameter(f"expected comma-separated integers, got {value!r}") from None


def guarded(fn):
    """Map library errors onto exit codes with a one-line message."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (InsufficientPopulationError, InsufficientCorpusError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_TOO_SMALL)
        except ConfigError as exc:
            click.echo(f"error: config {exc}", err=True)
            sys.exit(EXIT_ERROR)
        except (OSError, CorruptInputError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_ERROR)
        except SlowDripError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_ERROR)

    return wrapper


def _cfg(ctx) -> PipelineConfig:
    return ctx.obj["config"]


@click.group()
@click.option("--config", "config_path", envvar=CONFIG_ENV, type=click.Path(dir_okay=False),
              help=f"YAML settings file (default: ${CONFIG_ENV}).")
@click.option("-v", "--verbose", count=True, help="More logging (repeatable).")
@click.version_option(__version__, prog_name="slowdrip")
@click.pass_context
def main(ctx, config_path, verbose):
    """Slow Drip detection, fingerprinting and clustering for passive DNS."""
    logging.basicConfig(level=logging.WARNING - 10 * min(verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(config_path)
    except (ConfigError, TypeError) as exc:
        field_name = getattr(exc, "field", "config")
        click.echo(f"error: config {field_name}: {exc}", err=True)
        sys.exit(EXIT_ERROR)
    ctx.obj = {"config": cfg}


# ---------------------------------------------------------------- synth

@main.command()
@click.option("--scenario", type=click.Path(exists=True, dir_okay=False), help="Scenario YAML (default built-in).")
@click.option("--out", "outdir", type=click.Path(file_okay=False), required=True)
@click.option("--seed", type=int, help="Overrides the scenario seed.")
@click.option("--format", "fmt", type=click.Choice(["tsv", "jsonl"]))
@click.pass_context
@guarded
def synth(ctx, scenario, outdir, seed, fmt):
    """Generate a synthetic corpus with ground truth."""
    from . import synthgen

    cfg = _override(_cfg(ctx), seed=seed, format=fmt)
    if scenario:
        try:
            doc = yaml.safe_load(Path(scenario).read_text(encoding="utf-8")) or {}
        except yaml.YAMLError as exc:
            mark = getattr(exc, "problem_mark", None)
            raise ConfigError(f"{scenario}:{mark.line + 1}" if mark else scenario, "invalid YAML") from None
        if seed is not None:
            doc["seed"] = seed
        sc = synthgen.scenario_from_dict(doc)
    else:
        sc = synthgen.default_scenario(seed if seed is not None else cfg.seed)
    scenario_hash = hashlib.sha256(
        json.dumps(synthgen.scenario_to_dict(sc), sort_keys=True).encode()
    ).hexdigest()[:16]
    prov = provenance("synth", extra={"scenario": scenario_hash})
    corpus = synthgen.run_scenario(sc)
    written = synthgen.write_corpus(corpus, outdir, cfg.format, header_line(prov), prov)
    for p in written:
        click.echo(str(p))
    click.echo(str(Path(outdir) / "truth.json"))


# ---------------------------------------------------------------- detect

def _suffixes(cfg: PipelineConfig):
    from .pdns_model import SuffixSet

    return SuffixSet.from_file(cfg.suffix_list) if cfg.suffix_list else SuffixSet.default()


def _load_events(path):
    from .ingest import ReadStats, read_events

    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"input file not found: {p}")
    stats = ReadStats()
    return list(read_events(p, stats=stats))


@main.command()
@click.argument("day_d", type=click.Path(dir_okay=False))
@click.argument("day_d_minus_2", type=click.Path(dir_okay=False))
@click.option("--out", "outdir", type=click.Path(file_okay=False), required=True)
@click.option("--rcodes", help="Comma-separated rcodes counted as unresolved (default: any non-zero).")
@click.option("--suffix-list", type=click.Path(dir_okay=False), help="Public suffix list file.")
@click.option("--append", is_flag=True, help="Merge into an existing attacks.jsonl instead of replacing it.")
@click.pass_context
@guarded
def detect(ctx, day_d, day_d_minus_2, outdir, rcodes, suffix_list, append):
    """Detect attacks on DAY_D against the baseline two days earlier."""
    from .detector import detect_attacks, read_attacks, write_attacks

    cfg = _override(_cfg(ctx), rcodes=_int_list(rcodes), suffix_list=suffix_list)
    for p in (day_d, day_d_minus_2):
        if not Path(p).is_file():
            raise FileNotFoundError(f"input file not found: {p}")
    cur = _load_events(day_d)
    prior = _load_events(day_d_minus_2)
    rc = frozenset(cfg.rcodes) if cfg.rcodes else None
    attacks = detect_attacks(cur, prior, _suffixes(cfg), rc)
    target = Path(outdir) / "attacks.jsonl"
    if append and target.exists():
        known = {a.attack_id: a for a in read_attacks(target)}
        known.update({a.attack_id: a for a in attacks})
        attacks = sorted(known.values(), key=lambda a: (a.source, a.date, a.sld))
    write_attacks(attacks, outdir, header_line(provenance("detect", cfg)))
    click.echo(f"{len(attacks)} attacks -> {target}")


# ---------------------------------------------------------------- archetypes

def _read_attack_file(path):
    from .detector import read_attacks

    p = Path(path)
    if p.is_dir():
        p = p / "attacks.jsonl"
    if not p.is_file():
        raise FileNotFoundError(f"attacks file not found: {p}")
    return read_attacks(p)


def _build_archetypes(cfg: PipelineConfig, attacks, out_path: Path):
    from .archetype import select_archetypes

    arch = select_archetypes(
        attacks, eps=cfg.eps, min_points=cfg.min_points,
        min_cluster_size=cfg.archetype_min_cluster_size, mode=cfg.mode,
    )
    out_path.parent.mkdir(parents=True, exist_ok=True)
    arch.save(out_path, provenance("archetypes build", cfg))
    sep = arch.separation()
    with open(out_path.with_name(out_path.stem + "_distances.csv"), "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# {header_line(provenance('archetypes build', cfg))}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", *sep.ids])
        for i, row in zip(sep.ids, sep.d):
            w.writerow([i, *(repr(float(v)) for v in row)])
    return arch


@main.group()
def archetypes():
    """Build or inspect frozen archetype sets."""


@archetypes.command("build")
@click.argument("attacks", type=click.Path())
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True)
@click.option("--eps", type=float, help="DBSCAN radius (default: k-distance elbow).")
@click.option("--min-points", type=int)
@click.option("--min-cluster-size", "arch_mcs", type=int, help="Smallest cluster that yields an archetype.")
@click.option("--mode", type=click.Choice(["char0", "overall"]))
@click.pass_context
@guarded
def archetypes_build(ctx, attacks, out_path, eps, min_points, arch_mcs, mode):
    """Select archetypes from detected ATTACKS and freeze them to a file."""
    cfg = _override(_cfg(ctx), eps=eps, min_points=min_points, archetype_min_cluster_size=arch_mcs, mode=mode)
    arch = _build_archetypes(cfg, _read_attack_file(attacks), Path(out_path))
    click.echo(f"{len(arch.members)} archetypes -> {out_path}")


@archetypes.command("show")
@click.argument("path", type=click.Path(dir_okay=False))
@guarded
def archetypes_show(path):
    """Summarise an archetype file."""
    from .archetype import ArchetypeSet

    if not Path(path).is_file():
        raise FileNotFoundError(f"archetype file not found: {path}")
    arch = ArchetypeSet.load(path)
    click.echo(f"mode={arch.mode} created={arch.created} fingerprint={arch.fingerprint[:16]}")
    click.echo(f"params: {json.dumps(arch.params, sort_keys=True)}")
    for i, m in enumerate(arch.members):
        top = sorted(m.distribution.as_dict().items(), key=lambda kv: (-kv[1], kv[0]))[:5]
        desc = " ".join(f"{c}:{p:.3f}" for c, p in top)
        click.echo(f"[{i}] {m.attack_id} size={m.cluster_size} top={desc}")
    sep = arch.separation()
    click.echo("separation (J-S distance, uniform last):")
    for i, row in zip(sep.ids, sep.d):
        click.echo(f"  {i[:32]:32s} " + " ".join(f"{v:.3f}" for v in row))


# ---------------------------------------------------------------- featurize

def _write_diagnostics(attacks, outdir: Path, prov: dict, rcodes) -> None:
    from .features import diagnostics

    outdir.mkdir(parents=True, exist_ok=True)
    head = f"# {header_line(prov)}\n"
    with open(outdir / "minute_series.csv", "w", encoding="utf-8", newline="") as m_fh, \
            open(outdir / "prefix_lengths.csv", "w", encoding="utf-8", newline="") as p_fh, \
            open(outdir / "label_depths.csv", "w", encoding="utf-8", newline="") as d_fh:
        for fh in (m_fh, p_fh, d_fh):
            fh.write(head)
        mw, pw, dw = (csv.writer(f, lineterminator="\n") for f in (m_fh, p_fh, d_fh))
        mw.writerow(["attack_id", "minute", "series", "count"])
        pw.writerow(["attack_id", "second", "prefix_length", "count"])
        dw.writerow(["attack_id", "second", "depth", "count"])
        for a in attacks:
            b = diagnostics(a, rcodes)
            series = {"all": b.events_per_minute, "nxdomain": b.nxdomain_per_minute}
            series.update({f"qtype{q}": v for q, v in sorted(b.qtype_by_minute.items())})
            for name, counts in series.items():
                for minute, c in enumerate(counts):
                    if c:
                        mw.writerow([b.attack_id, minute, name, c])
            for row in b.prefix_length_series:
                pw.writerow([b.attack_id, *row])
            for row in b.depth_series:
                dw.writerow([b.attack_id, *row])


@main.command()
@click.argument("attacks", type=click.Path())
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True, help="features.csv path.")
@click.option("--archetypes", "arch_opt", help="Archetype file, or 'build' to select them from ATTACKS first.")
@click.option("--dictionary", type=click.Path(dir_okay=False), help="Word list for overlap_ratio.")
@click.option("--qtypes", help="Comma-separated tracked qtypes.")
@click.option("--rcodes", help="Comma-separated rcodes counted as unresolved.")
@click.option("--diagnostics", "diag_dir", type=click.Path(file_okay=False),
              help="Also export per-minute and per-second series for plotting.")
@click.pass_context
@guarded
def featurize(ctx, attacks, out_path, arch_opt, dictionary, qtypes, rcodes, diag_dir):
    """Compute the 20 fingerprint features for every detected attack."""
    from .archetype import ArchetypeSet
    from .features import feature_names, feature_vector, write_features_csv
    from .synthgen import read_dictionary

    cfg = _cfg(ctx)
    build = arch_opt == "build"
    cfg = _override(cfg, archetypes=None if build else arch_opt, dictionary=dictionary,
                    qtypes=_int_list(qtypes), rcodes=_int_list(rcodes))
    recs = sorted(_read_attack_file(attacks), key=lambda a: a.sort_key)
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    if build:
        arch = _build_archetypes(cfg, recs, out_path.with_name("archetypes.json"))
    elif cfg.archetypes:
        if not Path(cfg.archetypes).is_file():
            raise ConfigError("archetypes", f"file not found: {cfg.archetypes}; "
                              "run `slowdrip archetypes build` or pass --archetypes build")
        arch = ArchetypeSet.load(cfg.archetypes)
    else:
        raise ConfigError("archetypes", "no archetype file given; run `slowdrip archetypes build` "
                          "first or pass --archetypes build")
    if not cfg.dictionary:
        raise ConfigError("dictionary", "overlap_ratio needs a word list (--dictionary)")
    words = frozenset(read_dictionary(cfg.dictionary))
    rc = frozenset(cfg.rcodes) if cfg.rcodes else None
    prov = provenance("featurize", cfg, {"archetypes": arch.fingerprint[:16]})
    rows = [(a, feature_vector(a, arch, words, tuple(cfg.qtypes), rc)) for a in recs]
    write_features_csv(out_path, rows, feature_names(tuple(cfg.qtypes)), header_line(prov))
    if diag_dir:
        _write_diagnostics(recs, Path(diag_dir), prov, rc)
    click.echo(f"{len(rows)} feature rows -> {out_path}")


# ---------------------------------------------------------------- cluster / drift

@main.command()
@click.argument("features", type=click.Path(dir_okay=False))
@click.option("--out", "outdir", type=click.Path(file_okay=False), required=True)
@click.option("--min-cluster-size", type=int)
@click.option("--min-samples", type=int)
@click.pass_context
@guarded
def cluster(ctx, features, outdir, min_cluster_size, min_samples):
    """HDBSCAN over a features CSV; writes clusters.json and report.md."""
    from .cluster import cluster_report, hdbscan, write_cluster_outputs
    from .features import read_features_csv

    cfg = _override(_cfg(ctx), min_cluster_size=min_cluster_size, min_samples=min_samples)
    if not Path(features).is_file():
        raise FileNotFoundError(f"features file not found: {features}")
    table = read_features_csv(features)
    labels = hdbscan(table.matrix, cfg.min_cluster_size, cfg.min_samples)
    report = cluster_report(labels, table.slds, table.dates, table.matrix, table.names, cfg.min_cluster_size)
    write_cluster_outputs(outdir, report, table, provenance("cluster", cfg))
    click.echo(f"{len(report.clusters)} clusters, {report.unclustered} unclustered -> {outdir}")


@main.command()
@click.argument("baseline", type=click.Path())
@click.argument("features", type=click.Path(dir_okay=False))
@click.option("--out", "outdir", type=click.Path(file_okay=False), required=True)
@click.option("--no-recluster", is_flag=True, help="Only assign to baseline clusters.")
@click.pass_context
@guarded
def drift(ctx, baseline, features, outdir, no_recluster):
    """Assign a new FEATURES batch to the clusters of a BASELINE clusters.json."""
    from .cluster import Baseline, drift_assign
    from .features import read_features_csv

    cfg = _cfg(ctx).validate()
    bpath = Path(baseline)
    if bpath.is_dir():
        bpath = bpath / "clusters.json"
    base = Baseline.from_clusters_json(bpath)
    if not Path(features).is_file():
        raise FileNotFoundError(f"features file not found: {features}")
    table = read_features_csv(features)
    result = drift_assign(table.matrix, base, recluster=not no_recluster)
    prov = provenance("drift", cfg)
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    doc = {
        "provenance": prov,
        "summary": result.summary(),
        "attacks": [
            {"sld": s, "date": d, "source": src, "assigned": a,
             "new_only_label": None if result.new_labels is None else result.new_labels[i],
             "union_match": None if result.union_matches is None else result.union_matches[i]}
            for i, ((s, d, src), a) in enumerate(zip(table.ids, result.assignments))
        ],
    }
    (out / "drift.json").write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")
    s = result.summary()
    click.echo(f"{s['assigned']}/{s['n_new']} assigned to baseline clusters -> {out / 'drift.json'}")


if __name__ == "__main__":  # pragma: no cover
    main()

"""End-to-end runs: ingestion, both evaluation tracks, report files.

All tables are UTF-8, tab-separated, with a header line. Floats are written
with ``repr`` (shortest round-trip), so outputs are byte-stable.
"""

from __future__ import annotations

import difflib
import hashlib
import json
import logging
import shutil
import time
import warnings
from collections import defaultdict
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import __version__
from .category_eval import (
    average_points,
    build_category_profile,
    relative_purity_difference,
    top_third_count,
    top_third_membership,
)
from .clustering import (
    calibrate_gamma_range,
    generate_sweep,
    giant_fraction,
    run_sweep,
    singleton_fraction,
    write_solution,
)
from .effectiveness import (
    COVERAGES,
    absolute_purity_difference,
    build_topic_profile,
    profile_length,
    select_clusters,
)
from .graph_core import (
    build_extended_citation,
    build_mixed,
    build_pure,
    build_similarity,
    rescale_edges,
)
from .topics import CategoryConfig, TopicTree, expand_annotations, select_topics

log = logging.getLogger(__name__)

REFERENCE = "similarity"
MAX_OFFENDERS = 20

INPUT_FILES = {
    "documents": ("documents.tsv", ("document_id",)),
    "links": ("links.tsv", ("element_id", "document_id")),
    "similarity": ("similarity.tsv", ("doc_a", "doc_b", "score")),
    "annotations": ("annotations.tsv", ("document_id", "term_id")),
    "tree": ("tree.tsv", ("tree_code", "term_id", "term_name")),
    "categories": ("categories.tsv", ("category_id", "prefixes", "display_name")),
    "citations": ("citations.tsv", ("citing_id", "cited_id")),
}
OPTIONAL_INPUTS = {"citations"}

STAGES = (
    "ingest",
    "networks",
    "topics",
    "clustering",
    "selection",
    "topic_profiles",
    "absolute_difference",
    "category_profiles",
    "top_third",
    "relative_difference",
    "write",
)


class IngestError(ValueError):
    pass


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")
        self.stage = stage


@dataclass
class RunConfig:
    inputs: str = "."
    output: str = "results"
    documents: str | None = None
    links: str | None = None
    similarity: str | None = None
    annotations: str | None = None
    tree: str | None = None
    categories: str | None = None
    citations: str | None = None
    coverages: tuple[float, ...] = COVERAGES
    k: int = 20
    bin_base: int = 40
    min_per_bin: int = 5
    jaccard: float = 0.5
    gamma_min: float | None = None
    gamma_max: float | None = None
    sweep_count: int = 100
    iterations: int = 10
    seed: int = 0
    workers: int = 1
    write_assignments: bool = True

    def __post_init__(self):
        self.coverages = tuple(float(c) for c in self.coverages)
        if not self.coverages or any(not 0 < c <= 1 for c in self.coverages):
            raise ValueError("coverages must lie in (0, 1]")
        if not 2 <= self.sweep_count <= 10_000:
            raise ValueError("sweep_count must lie in [2, 10000]")
        if (self.gamma_min is None) != (self.gamma_max is None):
            raise ValueError("set both gamma_min and gamma_max, or neither")
        if self.k < 1 or self.bin_base < 1 or self.min_per_bin < 1 or self.workers < 1:
            raise ValueError("k, bin_base, min_per_bin and workers must be >= 1")

    def path(self, name: str) -> Path:
        explicit = getattr(self, name)
        if explicit:
            p = Path(explicit)
            return p if p.is_absolute() else Path(self.inputs) / p
        return Path(self.inputs) / INPUT_FILES[name][0]

    def input_paths(self) -> dict[str, Path]:
        paths = {}
        for name in INPUT_FILES:
            p = self.path(name)
            if name in OPTIONAL_INPUTS and not p.exists():
                continue
            paths[name] = p
        return paths


def _coerce(value: str, current):
    if isinstance(current, bool):
        if value.lower() in ("1", "true", "yes", "on"):
            return True
        if value.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {value!r}")
    if isinstance(current, tuple):
        return tuple(float(v) for v in value.split(",") if v.strip())
    if isinstance(current, int):
        return int(value)
    if isinstance(current, float):
        return float(value)
    return value


_FLOAT_OR_NONE = {"gamma_min", "gamma_max"}


def parse_settings(lines: Iterable[str]) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for n, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {n}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key] = value
    return out


def load_config(path: str | Path | None = None, overrides: dict[str, str] | None = None) -> RunConfig:
    """Config file settings, then ``overrides``; relative paths in the file
    resolve against the file's directory."""
    settings = {}
    if path is not None:
        from_file = parse_settings(Path(path).read_text(encoding="utf-8").splitlines())
        base = Path(path).parent
        for key in ("inputs", "output"):
            if key in from_file and not Path(from_file[key]).is_absolute():
                from_file[key] = str(base / from_file[key])
        settings.update(from_file)
    settings.update(overrides or {})
    defaults = RunConfig()
    known = {f.name for f in fields(RunConfig)}
    kwargs = {}
    for key, value in settings.items():
        if key not in known:
            raise ValueError(f"unknown config key {key!r}")
        if key in _FLOAT_OR_NONE:
            kwargs[key] = None if value.lower() in ("", "auto", "none") else float(value)
        else:
            kwargs[key] = _coerce(value, getattr(defaults, key))
    return RunConfig(**kwargs)


# ---------------------------------------------------------------- ingest


@dataclass
class Tables:
    documents: list[str]
    links: list[tuple[str, str]]
    similarity: list[tuple[str, str, float]]
    annotations: list[tuple[str, str]]
    tree: TopicTree
    categories: CategoryConfig
    citations: list[tuple[str, str]] | None = None
    row_counts: dict[str, int] = field(default_factory=dict)


def read_tsv(path: Path, columns: Sequence[str]) -> list[list[str]]:
    name = path.name
    if not path.exists():
        raise IngestError(f"{name}: file not found ({path})")
    rows = []
    with open(path, encoding="utf-8", newline="") as fh:
        header = fh.readline().rstrip("\r\n").split("\t")
        if len(header) != len(columns):
            raise IngestError(f"{name}: line 1: expected a {len(columns)}-column header {list(columns)}, got {header}")
        for n, line in enumerate(fh, 2):
            line = line.rstrip("\r\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != len(columns):
                raise IngestError(f"{name}: line {n}: expected {len(columns)} fields, got {len(parts)}")
            if any(not p for p in parts[: 2 if len(columns) > 1 else 1]):
                raise IngestError(f"{name}: line {n}: empty identifier")
            rows.append(parts)
    return rows


def _dangling(name: str, what: str, offenders: Iterable[str]):
    offenders = sorted(set(offenders))
    if offenders:
        shown = ", ".join(offenders[:MAX_OFFENDERS])
        more = f" (+{len(offenders) - MAX_OFFENDERS} more)" if len(offenders) > MAX_OFFENDERS else ""
        raise IngestError(f"{name}: {len(offenders)} dangling {what} reference(s): {shown}{more}")


def ingest(paths: dict[str, Path]) -> Tables:
    """Read and validate the input tables."""
    raw = {}
    for name, path in paths.items():
        raw[name] = read_tsv(Path(path), INPUT_FILES[name][1])
    missing = [n for n in INPUT_FILES if n not in raw and n not in OPTIONAL_INPUTS]
    if missing:
        raise IngestError(f"missing required inputs: {missing}")

    documents = [r[0] for r in raw["documents"]]
    doc_set = set(documents)
    if len(doc_set) != len(documents):
        raise IngestError("documents.tsv: duplicate document ids")

    links = [(r[0], r[1]) for r in raw["links"]]
    _dangling("links.tsv", "document", (d for _, d in links if d not in doc_set))

    similarity = []
    for n, (a, b, s) in enumerate(raw["similarity"], 2):
        try:
            score = float(s)
        except ValueError:
            raise IngestError(f"similarity.tsv: line {n}: score {s!r} is not a number") from None
        if not np.isfinite(score) or score <= 0:
            raise IngestError(f"similarity.tsv: line {n}: score must be positive, got {s!r}")
        if a == b:
            raise IngestError(f"similarity.tsv: line {n}: self-pair {a!r}")
        similarity.append((a, b, score))
    _dangling("similarity.tsv", "document", (d for a, b, _ in similarity for d in (a, b) if d not in doc_set))

    annotations = [(r[0], r[1]) for r in raw["annotations"]]
    _dangling("annotations.tsv", "document", (d for d, _ in annotations if d not in doc_set))

    try:
        tree = TopicTree.from_rows((r[0], r[1], r[2]) for r in raw["tree"])
    except ValueError as exc:
        raise IngestError(f"tree.tsv: {exc}") from None
    try:
        categories = CategoryConfig.from_rows((r[0], r[1], r[2]) for r in raw["categories"])
    except ValueError as exc:
        raise IngestError(f"categories.tsv: {exc}") from None

    citations = None
    if "citations" in raw:
        citations = [(r[0], r[1]) for r in raw["citations"]]

    return Tables(
        documents=documents,
        links=links,
        similarity=similarity,
        annotations=annotations,
        tree=tree,
        categories=categories,
        citations=citations,
        row_counts={name: len(rows) for name, rows in raw.items()},
    )


# ---------------------------------------------------------------- run


@dataclass
class RunManifest:
    config: dict
    inputs: dict[str, str]
    version: str
    stages: list[str]
    timings: dict[str, float]
    warnings: list[str]
    gamma_ranges: dict[str, list[float]]
    counts: dict
    outputs: dict[str, str]

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=1, sort_keys=True) + "\n"


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_table(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\t".join(header) + "\n")
        for row in rows:
            fh.write("\t".join(fmt(v) for v in row) + "\n")


class _Stages:
    def __init__(self):
        self.timings: dict[str, float] = {}
        self.done: list[str] = []

    def run(self, name, fn, *args, **kwargs):
        start = time.perf_counter()
        try:
            result = fn(*args, **kwargs)
        except StageError:
            raise
        except Exception as exc:
            raise StageError(name, exc) from exc
        self.timings[name] = round(time.perf_counter() - start, 6)
        self.done.append(name)
        return result


def build_networks(tables: Tables, config: RunConfig, notes: list[str]) -> dict:
    pure = build_pure(tables.links)
    if pure.n_documents == 0:
        raise ValueError("no document is linked to an element shared with another document")
    core = pure.document_ids
    rows = [r for r in tables.similarity if r[0] in core and r[1] in core]
    sim = build_similarity(core, rows, config.k)
    if sim.n_edges:
        sim = rescale_edges(sim, pure.total_edge_weight)
    else:
        notes.append("similarity network has no edges; left unscaled")
    networks = {"pure": pure, "similarity": sim, "mixed": build_mixed(pure, sim)}
    if tables.citations is not None:
        networks["extended_citation"] = build_extended_citation(core, tables.citations)
    return networks


def cluster_networks(networks: dict, config: RunConfig, notes: list[str]) -> tuple[dict, dict]:
    solutions, ranges = {}, {}
    for variant, net in networks.items():
        if config.gamma_min is not None:
            lo, hi = config.gamma_min, config.gamma_max
        else:
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always")
                lo, hi = calibrate_gamma_range(net, seed=config.seed, iterations=config.iterations)
            notes.extend(f"{variant}: {w.message}" for w in caught)
        plan = generate_sweep(lo, hi, config.sweep_count, seed=config.seed, iterations=config.iterations)
        ranges[variant] = [lo, hi]
        solutions[variant] = run_sweep(net, plan, workers=config.workers)
    return solutions, ranges


def measure(networks, solutions, selection, coverages) -> dict:
    """(nsc, purity) for every variant, coverage, topic and solution."""
    out = {}
    for variant, net in networks.items():
        for topic in selection.topics:
            idx = np.fromiter((net.index[d] for d in sorted(topic.documents)), dtype=np.int64)
            for cov in coverages:
                out[variant, cov, topic.code] = [
                    (s.nsc, s.purity) for s in (select_clusters(sol, idx, cov) for sol in solutions[variant])
                ]
    return out


def topic_profiles(measurements, selection, variants, coverages) -> dict:
    profiles = {}
    for variant in variants:
        for cov in coverages:
            for topic in selection.topics:
                if profile_length(topic.size, cov) < 1:
                    continue
                profiles[variant, cov, topic.code] = build_topic_profile(
                    measurements[variant, cov, topic.code], topic.size, cov, topic.code
                )
    return profiles


def absolute_differences(profiles, selection, variants, coverages) -> dict:
    out = {}
    for variant in variants:
        if variant == REFERENCE:
            continue
        for cov in coverages:
            for cat in selection.categories:
                codes = [t.code for t in selection.topics if t.category == cat and (variant, cov, t.code) in profiles]
                if not codes:
                    continue
                mine = {c: profiles[variant, cov, c] for c in codes}
                ref = {c: profiles[REFERENCE, cov, c] for c in codes}
                out[cat, cov, variant] = absolute_purity_difference(codes, mine, ref)
    return out


def category_profiles(measurements, selection, variants, coverages, n_solutions) -> dict:
    cells = defaultdict(list)
    for t in selection.topics:
        cells[t.category, selection.bins[t.code]].append(t.code)
    profiles = {}
    for variant in variants:
        for cov in coverages:
            for (cat, b), codes in sorted(cells.items()):
                if profile_length(b.midpoint, cov) < 1:
                    continue
                points = [
                    average_points(measurements[variant, cov, c][i] for c in codes)
                    for i in range(n_solutions[variant])
                ]
                profiles[variant, cov, b, cat] = build_category_profile(points, b, cov, cat)
    return profiles


def top_third(cat_profiles, selection, variants, coverages) -> dict:
    per_bin = defaultdict(dict)
    for (variant, cov, b, cat), prof in cat_profiles.items():
        per_bin[variant, cov, b][cat] = prof
    fractions = defaultdict(list)
    for (variant, cov, b), profs in sorted(per_bin.items(), key=lambda kv: (kv[0][0], kv[0][1], kv[0][2])):
        for cat, frac in top_third_membership(profs).items():
            fractions[variant, cov, cat].append(frac)
    return {key: top_third_count(vals) for key, vals in fractions.items()}


def relative_differences(counts, variants, coverages, categories) -> dict:
    out = {}
    for variant in variants:
        if variant == REFERENCE:
            continue
        for cov in coverages:
            for cat in categories:
                if (variant, cov, cat) in counts and (REFERENCE, cov, cat) in counts:
                    out[cat, cov, variant] = relative_purity_difference(
                        counts[variant, cov, cat], counts[REFERENCE, cov, cat]
                    )
    return out


def run_pipeline(config: RunConfig) -> RunManifest:
    """Run every measurement and evaluation step and write the reports.

    Outputs are staged next to the output directory and only moved into
    place once every stage has succeeded.
    """
    stages = _Stages()
    notes: list[str] = []
    out_dir = Path(config.output)
    staging = out_dir.parent / f".{out_dir.name}.partial"
    if staging.exists():
        shutil.rmtree(staging)

    paths = config.input_paths()
    tables = stages.run("ingest", ingest, paths)
    networks = stages.run("networks", build_networks, tables, config, notes)
    variants = list(networks)
    core = networks["pure"].document_ids

    def _topics():
        doc_terms = defaultdict(set)
        for d, term in tables.annotations:
            if d in core:
                doc_terms[d].add(term)
        doc_codes, unknown = expand_annotations(doc_terms, tables.tree)
        if unknown:
            notes.append(f"{len(unknown)} annotation(s) reference unknown terms, e.g. {sorted(set(t for _, t in unknown))[:5]}")
        sel = select_topics(doc_codes, core, tables.categories, config.bin_base, config.min_per_bin,
                            config.jaccard, config.seed)
        if not sel.topics:
            notes.append("no topic survived filtering")
        return sel

    selection = stages.run("topics", _topics)
    solutions, ranges = stages.run("clustering", cluster_networks, networks, config, notes)
    covs = config.coverages
    measurements = stages.run("selection", measure, networks, solutions, selection, covs)
    t_profiles = stages.run("topic_profiles", topic_profiles, measurements, selection, variants, covs)
    absolute = stages.run("absolute_difference", absolute_differences, t_profiles, selection, variants, covs)
    n_solutions = {v: len(s) for v, s in solutions.items()}
    c_profiles = stages.run("category_profiles", category_profiles, measurements, selection, variants, covs, n_solutions)
    counts = stages.run("top_third", top_third, c_profiles, selection, variants, covs)
    relative = stages.run("relative_difference", relative_differences, counts, variants, covs, selection.categories)

    def _write():
        staging.mkdir(parents=True)
        written = write_reports(staging, config, networks, solutions, selection, t_profiles, c_profiles,
                                counts, absolute, relative)
        out_dir.mkdir(parents=True, exist_ok=True)
        if (out_dir / "assignments").exists() and (staging / "assignments").exists():
            shutil.rmtree(out_dir / "assignments")
        for name in written:
            target = out_dir / name
            target.parent.mkdir(parents=True, exist_ok=True)
            (staging / name).replace(target)
        shutil.rmtree(staging)
        return {name: sha256_file(out_dir / name) for name in written}

    try:
        outputs = stages.run("write", _write)
    finally:
        if staging.exists():
            shutil.rmtree(staging)

    manifest = RunManifest(
        config={k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(config).items()},
        inputs={name: sha256_file(p) for name, p in sorted(paths.items())},
        version=__version__,
        stages=stages.done,
        timings=stages.timings,
        warnings=notes,
        gamma_ranges=ranges,
        counts={
            "nodes": {v: n.n_nodes for v, n in networks.items()},
            "edges": {v: n.n_edges for v, n in networks.items()},
            "documents": len(core),
            "topics": len(selection.topics),
            "categories": list(selection.categories),
            "size_bins": [b.label for b in selection.kept_bins],
            "dropped_topics": selection.dropped,
        },
        outputs=outputs,
    )
    (out_dir / "manifest.json").write_text(manifest.to_json(), encoding="utf-8")
    return manifest


def write_reports(out: Path, config, networks, solutions, selection, t_profiles, c_profiles, counts,
                  absolute, relative) -> list[str]:
    written = []

    rows = []
    for variant in networks:
        for i, sol in enumerate(solutions[variant]):
            rows.append((variant, i, sol.resolution, sol.seed, sol.quality, sol.n_clusters,
                         singleton_fraction(sol), giant_fraction(sol)))
    write_table(out / "solutions.csv", ("variant", "sweep_index", "gamma", "seed", "quality", "clusters",
                                        "singleton_fraction", "giant_fraction"), rows)
    written.append("solutions.csv")

    if config.write_assignments:
        (out / "assignments").mkdir()
        for variant in networks:
            for i, sol in enumerate(solutions[variant]):
                name = f"assignments/{variant}_{i:04d}.tsv"
                write_solution(sol, out / name)
                written.append(name)

    write_table(out / "topics.csv", ("topic", "category", "size", "size_bin"),
                ((t.code, t.category, t.size, selection.bins[t.code].label) for t in selection.topics))
    written.append("topics.csv")

    rows = sorted(
        ((code, nsc, cov, variant, p) for (variant, cov, code), prof in t_profiles.items() for nsc, p in prof.points()),
    )
    write_table(out / "topic_profiles.csv", ("variant", "topic", "coverage", "nsc", "purity"),
                ((v, code, cov, nsc, p) for code, nsc, cov, v, p in rows))
    written.append("topic_profiles.csv")

    rows = sorted(
        ((variant, cat, b, cov, nsc, p) for (variant, cov, b, cat), prof in c_profiles.items() for nsc, p in prof.points()),
    )
    write_table(out / "category_profiles.csv", ("variant", "category", "size_bin", "coverage", "nsc", "purity"),
                ((v, cat, b.label, cov, nsc, p) for v, cat, b, cov, nsc, p in rows))
    written.append("category_profiles.csv")

    write_table(out / "top_third.csv", ("variant", "category", "coverage", "top_third_count"),
                ((v, cat, cov, c) for (v, cov, cat), c in sorted(counts.items(), key=lambda kv: (kv[0][0], kv[0][2], kv[0][1]))))
    written.append("top_third.csv")

    keys = sorted(set(absolute) | set(relative))
    write_table(out / "summary.csv", ("category", "coverage", "variant", "absolute_diff", "relative_diff"),
                ((cat, cov, v, absolute.get((cat, cov, v), ""), relative.get((cat, cov, v), ""))
                 for cat, cov, v in keys))
    written.append("summary.csv")
    return written


# ---------------------------------------------------------------- plots


def read_profiles(path: str | Path) -> list[dict[str, str]]:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split("\t")
        return [dict(zip(header, line.rstrip("\n").split("\t"))) for line in fh if line.strip()]


def emit_plots(profile_rows: list[dict[str, str]], subject: str, variants: Sequence[str], coverage: float,
               out_path: str | Path, size_bin: str | None = None) -> Path:
    """Line plot of purity against NSC, one line per network variant."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    if not variants:
        raise ValueError("no network variants requested")
    key = "topic" if "topic" in (profile_rows[0] if profile_rows else {}) else "category"
    subjects = sorted({r[key] for r in profile_rows})
    if subject not in subjects:
        near = difflib.get_close_matches(subject, subjects, n=5, cutoff=0.3)
        raise KeyError(f"unknown subject {subject!r}; nearest matches: {near}")

    def wanted(r, variant):
        return (r[key] == subject and r["variant"] == variant and float(r["coverage"]) == coverage
                and (size_bin is None or r.get("size_bin") == size_bin))

    matplotlib.rcParams["svg.hashsalt"] = "topicbias"
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for variant in variants:
        pts = sorted((int(r["nsc"]), float(r["purity"])) for r in profile_rows if wanted(r, variant))
        if not pts:
            raise KeyError(f"no profile for {subject!r} in variant {variant!r} at coverage {coverage}")
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=variant, gid=f"profile-{variant}")
    ax.set_ylim(0, 1)
    ax.set_xlabel("NSC")
    ax.set_ylabel("Purity")
    title = f"{subject} (coverage {coverage})"
    if size_bin:
        title += f", bin {size_bin}"
    ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    out_path = Path(out_path)
    fig.savefig(out_path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return out_path

"""Planted-topic corpora and brute-force oracles.

The generator writes every pipeline input file for a corpus whose topics are
known, so each stage can be scored against ground truth. The oracles here
recompute results by enumeration or plain recounting and share no code with
the modules they check.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from functools import lru_cache
from pathlib import Path

import numpy as np

MAX_EXHAUSTIVE_NODES = 10
SIMILARITY_MODES = ("aligned", "uninformative", "antialigned")


@dataclass(frozen=True)
class PlantedSpec:
    topic_count: int = 3
    docs_per_topic: int = 100
    categories: tuple[str, ...] | None = None
    element_count: int = 200
    p_in: float = 0.95
    p_out: float = 0.02
    links_per_element: int = 4
    similarity_mode: str = "aligned"
    similarity_candidates: int = 30
    tree_depth: int = 3
    seed: int = 7

    def __post_init__(self):
        if self.topic_count < 1 or self.docs_per_topic < 1:
            raise ValueError("need at least one topic and one document per topic")
        if not 0 <= self.p_out <= self.p_in <= 1 or self.p_in == 0:
            raise ValueError("require 0 <= p_out <= p_in <= 1 and p_in > 0")
        if self.links_per_element < 2:
            raise ValueError("links_per_element must be >= 2")
        if self.links_per_element > self.topic_count * self.docs_per_topic:
            raise ValueError("links_per_element exceeds the number of documents")
        if self.similarity_mode not in SIMILARITY_MODES:
            raise ValueError(f"similarity_mode must be one of {SIMILARITY_MODES}")
        if self.tree_depth < 1:
            raise ValueError("tree_depth must be >= 1")
        cats = self.topic_categories
        if len(cats) != self.topic_count:
            raise ValueError("categories must list one category per topic")
        if not all(c.isalpha() and c.isupper() for c in cats):
            raise ValueError("category ids must be upper-case letters (they double as tree branches)")

    @property
    def topic_categories(self) -> tuple[str, ...]:
        if self.categories is not None:
            return tuple(self.categories)
        return tuple(_letters(i) for i in range(self.topic_count))


def _letters(i: int) -> str:
    s = ""
    i += 1
    while i:
        i, r = divmod(i - 1, 26)
        s = chr(65 + r) + s
    return s


@dataclass
class SynthCorpus:
    spec: PlantedSpec
    documents: list[str]
    doc_topic: dict[str, int]
    links: list[tuple[str, str]]
    similarity: list[tuple[str, str, float]]
    annotations: list[tuple[str, str]]
    tree: list[tuple[str, str, str]]
    categories: list[tuple[str, str, str]]
    topic_codes: list[str] = field(default_factory=list)

    def write(self, directory: str | Path) -> dict[str, Path]:
        """Write all pipeline inputs plus ``synth_manifest.json``."""
        out = Path(directory)
        out.mkdir(parents=True, exist_ok=True)
        tables = {
            "documents.tsv": (("document_id",), [(d,) for d in self.documents]),
            "links.tsv": (("element_id", "document_id"), self.links),
            "similarity.tsv": (("doc_a", "doc_b", "score"), self.similarity),
            "annotations.tsv": (("document_id", "term_id"), self.annotations),
            "tree.tsv": (("tree_code", "term_id", "term_name"), self.tree),
            "categories.tsv": (("category_id", "prefixes", "display_name"), self.categories),
        }
        paths = {}
        for name, (header, rows) in tables.items():
            path = out / name
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write("\t".join(header) + "\n")
                for row in rows:
                    fh.write("\t".join(v if isinstance(v, str) else repr(v) for v in row) + "\n")
            paths[name] = path
        manifest = {
            "spec": asdict(self.spec),
            "topic_codes": self.topic_codes,
            "planted_topic": self.doc_topic,
        }
        path = out / "synth_manifest.json"
        path.write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n", encoding="utf-8")
        paths[path.name] = path
        return paths


def generate(spec: PlantedSpec) -> SynthCorpus:
    """Draw a planted-topic corpus.

    Element links: each element has a home topic and picks
    ``links_per_element`` distinct documents, each document weighted
    ``p_in`` if it is in the home topic and ``p_out`` otherwise, so
    ``p_in == p_out`` makes links ignore topics.
    """
    rng = np.random.default_rng(spec.seed)
    T, D = spec.topic_count, spec.docs_per_topic
    n_docs = T * D
    width = len(str(n_docs))
    documents = [f"d{i:0{width}d}" for i in range(n_docs)]
    topic = np.repeat(np.arange(T), D)
    doc_topic = {d: int(t) for d, t in zip(documents, topic)}

    links = []
    ewidth = len(str(spec.element_count))
    for e in range(spec.element_count):
        home = e % T
        p = np.where(topic == home, spec.p_in, spec.p_out).astype(float)
        p /= p.sum()
        n_pick = min(spec.links_per_element, int(np.count_nonzero(p)))
        picks = rng.choice(n_docs, size=n_pick, replace=False, p=p)
        links.extend((f"e{e:0{ewidth}d}", documents[i]) for i in sorted(picks))

    similarity = _similarity_rows(spec, rng, documents, topic)

    letters = spec.topic_categories
    tree = []
    topic_codes = []
    annotations = []
    per_branch: dict[str, int] = {}
    for t in range(T):
        branch = letters[t]
        per_branch[branch] = per_branch.get(branch, 0) + 1
        code = f"{branch}{per_branch[branch]:02d}"
        chain = [code]
        for _ in range(spec.tree_depth - 1):
            code = code + ".001"
            chain.append(code)
        for c in chain:
            tree.append((c, f"T{c}", f"planted topic {t} node {c}"))
        topic_codes.append(chain[-1])
    leaf_term = {t: f"T{topic_codes[t]}" for t in range(T)}
    for d in documents:
        annotations.append((d, leaf_term[doc_topic[d]]))

    categories = [(c, c, f"Planted category {c}") for c in sorted(set(letters))]
    return SynthCorpus(
        spec=spec,
        documents=documents,
        doc_topic=doc_topic,
        links=links,
        similarity=similarity,
        annotations=annotations,
        tree=tree,
        categories=categories,
        topic_codes=topic_codes,
    )


def _similarity_rows(spec, rng, documents, topic):
    """Symmetric candidate pairs, emitted in both directions."""
    n = len(documents)
    if spec.similarity_mode == "aligned":
        groups = topic
    elif spec.similarity_mode == "antialigned":
        groups = (np.arange(n) - topic * spec.docs_per_topic) % spec.topic_count
    else:
        groups = None

    pairs: dict[tuple[int, int], float] = {}
    per_doc = max(1, spec.similarity_candidates // 2)
    for a in range(n):
        if groups is None:
            partners = rng.choice(n - 1, size=min(2 * per_doc, n - 1), replace=False)
            partners = partners + (partners >= a)
            scores = rng.uniform(0.05, 0.95, size=len(partners))
        else:
            same = np.flatnonzero(groups == groups[a])
            same = same[same != a]
            other = np.flatnonzero(groups != groups[a])
            p_same = rng.choice(same, size=min(per_doc, len(same)), replace=False) if len(same) else same
            p_other = rng.choice(other, size=min(per_doc, len(other)), replace=False) if len(other) else other
            partners = np.concatenate([p_same, p_other])
            scores = np.concatenate([
                rng.uniform(0.6, 0.95, size=len(p_same)),
                rng.uniform(0.05, 0.4, size=len(p_other)),
            ])
        for b, s in zip(partners.tolist(), scores.tolist()):
            key = (a, b) if a < b else (b, a)
            if key not in pairs:
                pairs[key] = round(s, 6)
    rows = []
    for (a, b), s in sorted(pairs.items()):
        rows.append((documents[a], documents[b], s))
        rows.append((documents[b], documents[a], s))
    return rows


# ---------------------------------------------------------------- oracles


@dataclass(frozen=True)
class OracleResult:
    quality: float | None = None
    partition: tuple[int, ...] | None = None
    nsc: int | None = None
    purity: float | None = None
    selected: tuple[int, ...] | None = None
    groups: tuple[tuple[str, ...], ...] | None = None


@lru_cache(maxsize=None)
def set_partitions(n: int) -> np.ndarray:
    """All partitions of ``n`` items as restricted growth strings, shape (Bell(n), n)."""
    if n == 0:
        return np.zeros((1, 0), dtype=np.int8)
    rows = [[0]]
    for _ in range(1, n):
        nxt = []
        for r in rows:
            top = max(r) + 1
            for label in range(top + 1):
                nxt.append(r + [label])
        rows = nxt
    return np.array(rows, dtype=np.int8)


def exhaustive_cpm_optimum(network, gamma: float) -> OracleResult:
    """Best constant-Potts partition by enumerating every set partition."""
    n = network.n_nodes
    if n > MAX_EXHAUSTIVE_NODES:
        raise ValueError(f"exhaustive search is capped at {MAX_EXHAUSTIVE_NODES} nodes, got {n}")
    parts = set_partitions(n).astype(np.int64)
    internal = np.zeros(len(parts))
    for s, d, w in zip(network.src.tolist(), network.dst.tolist(), network.weights.tolist()):
        internal += w * (parts[:, s] == parts[:, d])
    node_w = np.asarray(network.node_weights, dtype=float)
    penalty = np.zeros(len(parts))
    for label in range(n):
        wc = ((parts == label) * node_w).sum(axis=1)
        penalty += wc * (wc - 1) / 2
    quality = internal - gamma * penalty
    best = int(np.argmax(quality))
    return OracleResult(quality=float(quality[best]), partition=tuple(parts[best].tolist()))


def reference_purity(assignment: dict[str, int], documents, topic_docs, coverage: float) -> OracleResult:
    """Cluster selection and purity by direct recounting.

    ``assignment`` maps node id to cluster; only ids in ``documents`` count.
    """
    size: dict[int, int] = {}
    hits: dict[int, int] = {}
    for node, c in assignment.items():
        if node in documents:
            size[c] = size.get(c, 0) + 1
            if node in topic_docs:
                hits[c] = hits.get(c, 0) + 1
    need = math.ceil(Fraction(coverage).limit_denominator(10**6) * len(topic_docs))
    ranked = sorted(hits, key=lambda c: (-hits[c], size[c], c))
    chosen, got = [], 0
    for c in ranked:
        if got >= need:
            break
        chosen.append(c)
        got += hits[c]
    total = sum(size[c] for c in chosen)
    return OracleResult(nsc=len(chosen), purity=got / total if total else 0.0, selected=tuple(chosen))


def jaccard_distance(a: frozenset, b: frozenset) -> Fraction:
    union = len(a | b)
    return Fraction(0) if union == 0 else 1 - Fraction(len(a & b), union)


def reference_redundancy_groups(topics: dict[str, frozenset], threshold: float = 0.5):
    """Plain complete-linkage over the full distance matrix.

    Merges the closest pair of groups (ties by their smallest codes) while the
    linkage distance is at most ``1 - threshold``.
    """
    limit = 1 - Fraction(threshold).limit_denominator(10**6)
    codes = sorted(topics)
    dist = {(a, b): jaccard_distance(topics[a], topics[b]) for a in codes for b in codes}
    groups = [[c] for c in codes]
    while len(groups) > 1:
        best = None
        for i in range(len(groups)):
            for j in range(i + 1, len(groups)):
                link = max(dist[a, b] for a in groups[i] for b in groups[j])
                key = (link, min(groups[i]), min(groups[j]))
                if best is None or key < best[0]:
                    best = (key, i, j)
        (link, _, _), i, j = best
        if link > limit:
            break
        groups[i] = sorted(groups[i] + groups[j])
        del groups[j]
    return OracleResult(groups=tuple(tuple(g) for g in sorted(groups)))

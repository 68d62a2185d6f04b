"""Hierarchical topics: annotation expansion, size bins and topic filters."""

from __future__ import annotations

import hashlib
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping

DEFAULT_BASE = 40
DEFAULT_MIN_PER_BIN = 5
DEFAULT_JACCARD = 0.5


def parent_code(code: str) -> str | None:
    head, sep, _ = code.rpartition(".")
    return head if sep else None


def ancestors(code: str) -> list[str]:
    out = []
    p = parent_code(code)
    while p is not None:
        out.append(p)
        p = parent_code(p)
    return out


def depth(code: str) -> int:
    return code.count(".") + 1


@dataclass(frozen=True)
class TopicTree:
    """Tree nodes keyed by dotted code; each node names exactly one term."""

    nodes: Mapping[str, tuple[str, str]]

    def __post_init__(self):
        for code in self.nodes:
            if not code or any(not seg for seg in code.split(".")):
                raise ValueError(f"malformed tree code {code!r}")
            p = parent_code(code)
            if p is not None and p not in self.nodes:
                raise ValueError(f"tree code {code!r} has no parent {p!r} in the tree")

    @classmethod
    def from_rows(cls, rows: Iterable[tuple[str, str, str]]) -> "TopicTree":
        nodes = {}
        for code, term_id, term_name in rows:
            if code in nodes:
                raise ValueError(f"duplicate tree code {code!r}")
            nodes[code] = (term_id, term_name)
        return cls(nodes)

    @property
    def term_codes(self) -> dict[str, list[str]]:
        out: dict[str, list[str]] = defaultdict(list)
        for code, (term_id, _) in sorted(self.nodes.items()):
            out[term_id].append(code)
        return dict(out)

    def name(self, code: str) -> str:
        return self.nodes[code][1]

    @staticmethod
    def branch(code: str) -> str:
        return code.split(".", 1)[0]


def expand_annotations(
    doc_terms: Mapping[str, Iterable[str]], tree: TopicTree
) -> tuple[dict[str, set[str]], list[tuple[str, str]]]:
    """Map each document's terms to tree codes plus every ancestor code.

    Returns ``(doc -> codes, unknown)`` where ``unknown`` lists the
    ``(document, term)`` pairs whose term is not in the tree.
    """
    term_codes = tree.term_codes
    expanded: dict[str, set[str]] = {}
    unknown = []
    for doc, terms in doc_terms.items():
        codes: set[str] = set()
        for term in terms:
            if term in term_codes:
                for code in term_codes[term]:
                    codes.add(code)
                    codes.update(ancestors(code))
            elif term in tree.nodes:
                # already a tree code (re-expansion of an expanded set)
                codes.add(term)
                codes.update(ancestors(term))
            else:
                unknown.append((doc, term))
        expanded[doc] = codes
    return expanded, unknown


def topic_documents(doc_codes: Mapping[str, Iterable[str]], documents: Iterable[str] | None = None) -> dict[str, frozenset[str]]:
    """Invert ``doc -> codes`` into ``code -> documents``, optionally restricted."""
    keep = None if documents is None else set(documents)
    inverted: dict[str, set[str]] = defaultdict(set)
    for doc, codes in doc_codes.items():
        if keep is not None and doc not in keep:
            continue
        for code in codes:
            inverted[code].add(doc)
    return {code: frozenset(docs) for code, docs in inverted.items()}


@dataclass(frozen=True, order=True)
class SizeBin:
    lower: int
    upper: int

    def __post_init__(self):
        if self.upper != 2 * self.lower:
            raise ValueError("size bins span (X, 2X]")

    @property
    def label(self) -> str:
        return f"{self.lower + 1}-{self.upper}"

    @property
    def midpoint(self) -> Fraction:
        return Fraction(self.lower + self.upper, 2)

    def __contains__(self, size: int) -> bool:
        return self.lower < size <= self.upper

    def __str__(self):
        return self.label


def size_bin(size: int, base: int = DEFAULT_BASE) -> SizeBin | None:
    if base < 1:
        raise ValueError("bin base must be >= 1")
    if size <= base:
        return None
    lower = base
    while size > 2 * lower:
        lower *= 2
    return SizeBin(lower, 2 * lower)


def assign_size_bins(topic_sizes: Mapping[str, int], base: int = DEFAULT_BASE) -> dict[str, SizeBin | None]:
    return {topic: size_bin(size, base) for topic, size in topic_sizes.items()}


def filter_size_bins(bin_counts: Mapping[SizeBin, int]) -> set[SizeBin]:
    """Drop bins holding fewer than half as many topics as the fullest bin."""
    if not bin_counts or max(bin_counts.values()) <= 0:
        raise ValueError("need at least one non-empty size bin")
    top = max(bin_counts.values())
    return {b for b, n in bin_counts.items() if 2 * n >= top}


@dataclass(frozen=True)
class Topic:
    code: str
    category: str
    documents: frozenset[str]

    @property
    def size(self) -> int:
        return len(self.documents)

    @property
    def depth(self) -> int:
        return depth(self.code)


def jaccard(a: frozenset, b: frozenset) -> float:
    union = len(a | b)
    return len(a & b) / union if union else 0.0


def redundancy_groups(topics: Iterable[Topic], threshold: float = DEFAULT_JACCARD) -> list[list[str]]:
    """Complete-linkage groups over Jaccard distance, cut at ``1 - threshold``.

    Two topics can only share a group if their Jaccard similarity reaches
    ``threshold``, so linkage runs separately inside each connected component
    of that "redundant" relation. Within a component the closest pair of
    groups merges first, ties going to the lexicographically smaller pair of
    group codes.
    """
    if not 0 < threshold <= 1:
        raise ValueError("jaccard threshold must lie in (0, 1]")
    thr = Fraction(threshold).limit_denominator(10**6)
    by_code = {t.code: t.documents for t in topics}
    codes = sorted(by_code)

    holders: dict[str, list[str]] = defaultdict(list)
    for code in codes:
        for doc in by_code[code]:
            holders[doc].append(code)
    shared: dict[tuple[str, str], int] = defaultdict(int)
    for members in holders.values():
        for i, a in enumerate(members):
            for b in members[i + 1:]:
                shared[a, b] += 1

    dist: dict[tuple[str, str], Fraction] = {}
    neighbours: dict[str, set[str]] = defaultdict(set)
    for (a, b), inter in shared.items():
        union = len(by_code[a]) + len(by_code[b]) - inter
        sim = Fraction(inter, union)
        if sim >= thr:
            dist[a, b] = dist[b, a] = 1 - sim
            neighbours[a].add(b)
            neighbours[b].add(a)

    groups: list[list[str]] = []
    seen: set[str] = set()
    for code in codes:
        if code in seen:
            continue
        stack, component = [code], []
        seen.add(code)
        while stack:
            c = stack.pop()
            component.append(c)
            for nb in neighbours[c]:
                if nb not in seen:
                    seen.add(nb)
                    stack.append(nb)
        groups.extend(_complete_linkage(sorted(component), dist, 1 - thr))
    return sorted(groups)


def _complete_linkage(codes: list[str], dist, limit: Fraction) -> list[list[str]]:
    groups = [[c] for c in codes]
    if len(groups) == 1:
        return groups

    def link(g, h):
        worst = Fraction(0)
        for a in g:
            for b in h:
                d = dist.get((a, b))
                if d is None:
                    return None
                if d > worst:
                    worst = d
        return worst

    while len(groups) > 1:
        best = None
        for i in range(len(groups)):
            for j in range(i + 1, len(groups)):
                d = link(groups[i], groups[j])
                if d is None or d > limit:
                    continue
                key = (d, groups[i][0], groups[j][0])
                if best is None or key < best[0]:
                    best = (key, i, j)
        if best is None:
            break
        _, i, j = best
        groups[i] = sorted(groups[i] + groups[j])
        del groups[j]
    return groups


def pick_representative(group: list[Topic], seed: int = 0) -> Topic:
    """Smallest topic; ties go to the deepest code, then a seeded hash pick."""
    smallest = min(t.size for t in group)
    tied = [t for t in group if t.size == smallest]
    deepest = max(t.depth for t in tied)
    tied = sorted((t for t in tied if t.depth == deepest), key=lambda t: t.code)
    if len(tied) == 1:
        return tied[0]
    key = f"{seed}:" + ",".join(t.code for t in tied)
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    return tied[int.from_bytes(digest[:8], "big") % len(tied)]


def redundancy_filter(topics: Iterable[Topic], threshold: float = DEFAULT_JACCARD, seed: int = 0) -> list[Topic]:
    """Keep one representative per redundancy group (topics of one category)."""
    topics = list(topics)
    by_code = {t.code: t for t in topics}
    kept = [pick_representative([by_code[c] for c in g], seed) for g in redundancy_groups(topics, threshold)]
    return sorted(kept, key=lambda t: t.code)


@dataclass(frozen=True)
class Category:
    id: str
    prefixes: tuple[str, ...]
    name: str


@dataclass(frozen=True)
class CategoryConfig:
    categories: tuple[Category, ...]
    excluded: tuple[str, ...] = ()

    def __post_init__(self):
        ids = [c.id for c in self.categories]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate category id")
        prefixes = [p for c in self.categories for p in c.prefixes]
        for i, a in enumerate(prefixes):
            for b in prefixes[i + 1:]:
                if prefix_matches(a, b) or prefix_matches(b, a):
                    raise ValueError(f"category prefixes {a!r} and {b!r} overlap")

    @classmethod
    def from_rows(cls, rows: Iterable[tuple[str, str, str]], excluded: Iterable[str] = ()) -> "CategoryConfig":
        cats = []
        for cid, prefixes, name in rows:
            parts = tuple(p.strip() for p in prefixes.split(",") if p.strip())
            if not parts:
                raise ValueError(f"category {cid!r} has no code prefixes")
            cats.append(Category(cid, parts, name))
        return cls(tuple(cats), tuple(excluded))

    def category_of(self, code: str) -> str | None:
        if any(prefix_matches(p, code) for p in self.excluded):
            return None
        for cat in self.categories:
            if any(prefix_matches(p, code) for p in cat.prefixes):
                return cat.id
        return None

    def name(self, category_id: str) -> str:
        for cat in self.categories:
            if cat.id == category_id:
                return cat.name
        raise KeyError(category_id)


def prefix_matches(prefix: str, code: str) -> bool:
    """True if ``code`` lies under ``prefix``.

    A purely alphabetic prefix names a whole branch ("A" covers "A01.456");
    any other prefix must match whole dotted segments ("H01" covers "H01.1"
    but not "H011").
    """
    if code == prefix or code.startswith(prefix + "."):
        return True
    head = code.split(".", 1)[0]
    return prefix.isalpha() and head.startswith(prefix) and head[len(prefix):][:1].isdigit()


# Topic categories used for MeSH: branches, with H, I and J split into their
# top-level nodes. K, V, I03 and J03 are left out.
MESH_CATEGORIES = CategoryConfig(
    categories=(
        Category("A", ("A",), "Anatomy"),
        Category("B", ("B",), "Organisms"),
        Category("C", ("C",), "Diseases"),
        Category("D", ("D",), "Chemicals and Drugs"),
        Category("E", ("E",), "Analytical, Diagnostic and Therapeutic Techniques, and Equipment"),
        Category("F", ("F",), "Psychiatry and Psychology"),
        Category("G", ("G",), "Phenomena and Processes"),
        Category("H01", ("H01",), "Natural Science Disciplines"),
        Category("H02", ("H02",), "Health Occupations"),
        Category("I01", ("I01",), "Social Sciences"),
        Category("I02", ("I02",), "Education"),
        Category("J01", ("J01",), "Technology, Industry, and Agriculture"),
        Category("J02", ("J02",), "Food and Beverages"),
        Category("L", ("L",), "Information Science"),
        Category("M", ("M",), "Named Groups"),
        Category("N", ("N",), "Health Care"),
        Category("Z", ("Z",), "Geographicals"),
    ),
    excluded=("K", "V", "I03", "J03"),
)


def filter_categories(bin_counts: Mapping[str, Mapping[SizeBin, int]], kept_bins: Iterable[SizeBin],
                      min_per_bin: int = DEFAULT_MIN_PER_BIN) -> set[str]:
    """Keep categories with at least ``min_per_bin`` topics in every kept bin."""
    kept_bins = list(kept_bins)
    return {cat for cat, counts in bin_counts.items()
            if all(counts.get(b, 0) >= min_per_bin for b in kept_bins)}


@dataclass(frozen=True)
class TopicSelection:
    topics: tuple[Topic, ...]
    bins: dict[str, SizeBin]
    kept_bins: tuple[SizeBin, ...]
    categories: tuple[str, ...]
    dropped: dict[str, int]


def select_topics(
    doc_codes: Mapping[str, Iterable[str]],
    documents: Iterable[str],
    config: CategoryConfig,
    base: int = DEFAULT_BASE,
    min_per_bin: int = DEFAULT_MIN_PER_BIN,
    threshold: float = DEFAULT_JACCARD,
    seed: int = 0,
) -> TopicSelection:
    """Full topic filtering for one document subset.

    Size-bin filter, then redundancy filter within each category, then the
    per-bin category filter.
    """
    docs_of = topic_documents(doc_codes, documents)
    candidates = []
    for code, docs in docs_of.items():
        cat = config.category_of(code)
        if cat is not None:
            candidates.append(Topic(code, cat, docs))
    bins = {t.code: size_bin(t.size, base) for t in candidates}
    binned = [t for t in candidates if bins[t.code] is not None]

    counts: dict[SizeBin, int] = defaultdict(int)
    for t in binned:
        counts[bins[t.code]] += 1
    dropped = {"uncategorised_or_small": len(docs_of) - len(binned)}
    if not counts:
        return TopicSelection((), {}, (), (), dropped)
    kept_bins = filter_size_bins(counts)
    in_bins = [t for t in binned if bins[t.code] in kept_bins]
    dropped["size_bin"] = len(binned) - len(in_bins)

    by_cat: dict[str, list[Topic]] = defaultdict(list)
    for t in in_bins:
        by_cat[t.category].append(t)
    survivors: dict[str, list[Topic]] = {
        cat: redundancy_filter(ts, threshold, seed) for cat, ts in sorted(by_cat.items())
    }
    dropped["redundant"] = len(in_bins) - sum(len(v) for v in survivors.values())

    cat_counts = {cat: _count_bins(ts, bins) for cat, ts in survivors.items()}
    kept_cats = filter_categories(cat_counts, kept_bins, min_per_bin)
    final = sorted((t for cat in kept_cats for t in survivors[cat]), key=lambda t: t.code)
    dropped["category"] = sum(len(v) for v in survivors.values()) - len(final)
    return TopicSelection(
        topics=tuple(final),
        bins={t.code: bins[t.code] for t in final},
        kept_bins=tuple(sorted(kept_bins)),
        categories=tuple(sorted(kept_cats)),
        dropped=dropped,
    )


def _count_bins(topics: Iterable[Topic], bins: Mapping[str, SizeBin]) -> dict[SizeBin, int]:
    counts: dict[SizeBin, int] = defaultdict(int)
    for t in topics:
        counts[bins[t.code]] += 1
    return dict(counts)

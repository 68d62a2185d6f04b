"""Per-topic clustering effectiveness: cluster selection, purity and profiles."""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

from .clustering import ClusteringSolution

COVERAGES = (0.25, 0.5, 0.75)
DOCS_PER_CLUSTER = 5


def _exact(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x).limit_denominator(10**6)


def coverage_threshold(size: int, coverage: float) -> int:
    """Minimum number of topic documents the selected clusters must hold."""
    if not 0 < coverage <= 1:
        raise ValueError("coverage must lie in (0, 1]")
    return math.ceil(_exact(coverage) * size)


def profile_length(size, coverage: float) -> int:
    """Grid length: floor(size * coverage / 5). ``size`` may be a Fraction."""
    return math.floor(_exact(size) * _exact(coverage) / DOCS_PER_CLUSTER)


@dataclass(frozen=True)
class SelectionResult:
    coverage: float
    threshold: int
    selected_clusters: tuple[int, ...]
    nsc: int
    covered_topic_docs: int
    selected_documents: int
    purity: float


def purity(topic_counts: Sequence[int], doc_counts: Sequence[int]) -> float:
    """Topic documents over all documents in the selected clusters."""
    if len(topic_counts) == 0 or len(topic_counts) != len(doc_counts):
        raise ValueError("purity needs one topic count per selected cluster")
    total = int(np.sum(doc_counts))
    if total <= 0:
        raise ValueError("selected clusters contain no documents")
    return int(np.sum(topic_counts)) / total


def topic_indices(solution: ClusteringSolution, topic_docs: Iterable[str], is_document: np.ndarray | None = None) -> np.ndarray:
    index = {node_id: i for i, node_id in enumerate(solution.node_ids)}
    try:
        idx = np.fromiter((index[d] for d in topic_docs), dtype=np.int64)
    except KeyError as exc:
        raise ValueError(f"topic document {exc.args[0]!r} is not a node of the clustered network") from None
    if is_document is not None and not np.all(is_document[idx]):
        raise ValueError("topic documents must be document nodes")
    return idx


def select_clusters(solution: ClusteringSolution, topic_docs, coverage: float) -> SelectionResult:
    """Pick clusters richest in topic documents until the coverage threshold is met.

    Ordering: most topic documents first, then fewer documents, then lower
    cluster id. ``topic_docs`` is a collection of node ids or an integer
    index array into ``solution.node_ids``.
    """
    if isinstance(topic_docs, np.ndarray) and topic_docs.dtype.kind in "iu":
        idx = topic_docs
    else:
        idx = topic_indices(solution, topic_docs)
    threshold = coverage_threshold(len(idx), coverage)
    docs = solution.cluster_summary.documents
    hits = np.bincount(solution.assignment[idx], minlength=len(docs))
    present = np.flatnonzero(hits)
    order = present[np.lexsort((present, docs[present], -hits[present]))]
    cumulative = np.cumsum(hits[order])
    if len(cumulative) == 0 or cumulative[-1] < threshold:
        raise RuntimeError("topic documents in the solution fall short of the coverage threshold")
    n = int(np.searchsorted(cumulative, threshold, side="left")) + 1
    chosen = order[:n]
    return SelectionResult(
        coverage=coverage,
        threshold=threshold,
        selected_clusters=tuple(int(c) for c in chosen),
        nsc=n,
        covered_topic_docs=int(cumulative[n - 1]),
        selected_documents=int(docs[chosen].sum()),
        purity=purity(hits[chosen], docs[chosen]),
    )


@dataclass(frozen=True)
class PurityProfile:
    subject: str
    coverage: float
    values: tuple[float, ...]

    @property
    def n(self) -> int:
        return len(self.values)

    def points(self) -> list[tuple[int, float]]:
        return [(i + 1, v) for i, v in enumerate(self.values)]


def fill_profile(points: Iterable[tuple[float, float]], n: int) -> tuple[float, ...]:
    """Purity at each NSC in ``1..n`` from (nsc, purity) observations.

    Observed NSC values keep their best purity; NSC 1 defaults to 0 when
    unobserved; other gaps interpolate linearly between the nearest known
    NSC values on either side (observations beyond ``n`` included), or
    repeat the last known value when nothing lies above.
    """
    known: dict[float, float] = {}
    for x, p in points:
        x = float(x)
        if x not in known or p > known[x]:
            known[x] = float(p)
    known.setdefault(1.0, 0.0)
    xs = sorted(known)
    out = []
    for g in range(1, n + 1):
        if g in known:
            out.append(known[g])
            continue
        i = bisect.bisect_left(xs, g)
        x0 = xs[i - 1]
        if i == len(xs):
            out.append(known[x0])
            continue
        x1 = xs[i]
        y0, y1 = known[x0], known[x1]
        out.append(y0 + (y1 - y0) * (g - x0) / (x1 - x0))
    return tuple(out)


def build_topic_profile(points: Iterable[tuple[int, float]], size: int, coverage: float,
                        subject: str = "") -> PurityProfile:
    n = profile_length(size, coverage)
    if n < 1:
        raise ValueError(f"topic of size {size} has an empty profile at coverage {coverage}")
    return PurityProfile(subject, coverage, fill_profile(points, n))


def compare_profiles(a: PurityProfile, b: PurityProfile) -> bool:
    """True if ``a`` has strictly higher purity at more than half the grid."""
    if a.n != b.n or a.coverage != b.coverage:
        raise ValueError(f"profiles are on different grids ({a.n} vs {b.n} at coverage {a.coverage}/{b.coverage})")
    higher = sum(x > y for x, y in zip(a.values, b.values))
    return 2 * higher > a.n


def absolute_purity_difference(topics: Iterable[str], profiles: Mapping[str, PurityProfile],
                               reference: Mapping[str, PurityProfile]) -> float:
    """Fraction of ``topics`` whose profile beats the reference profile."""
    topics = list(topics)
    if not topics:
        raise ValueError("category has no topics")
    return sum(compare_profiles(profiles[t], reference[t]) for t in topics) / len(topics)

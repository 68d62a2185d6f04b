"""Category-level purity profiles, top-third counts and relative differences."""

from __future__ import annotations

import math
from typing import Iterable, Mapping

from .clustering import ClusteringSolution
from .effectiveness import PurityProfile, fill_profile, profile_length, select_clusters
from .topics import SizeBin


def average_points(points: Iterable[tuple[int, float]]) -> tuple[float, float]:
    """Mean NSC and mean purity over the topics of one (category, bin) cell."""
    points = list(points)
    if not points:
        raise ValueError("cannot average an empty topic cell")
    n = len(points)
    return sum(p[0] for p in points) / n, sum(p[1] for p in points) / n


def average_solution_points(solution: ClusteringSolution, topic_docs: Iterable, coverage: float) -> tuple[float, float]:
    selections = [select_clusters(solution, docs, coverage) for docs in topic_docs]
    return average_points((s.nsc, s.purity) for s in selections)


def build_category_profile(points: Iterable[tuple[float, float]], size_bin: SizeBin, coverage: float,
                           subject: str = "") -> PurityProfile:
    """Profile on the grid of the bin midpoint; averaged NSCs act as real-valued anchors."""
    n = profile_length(size_bin.midpoint, coverage)
    if n < 1:
        raise ValueError(f"bin {size_bin} has an empty profile at coverage {coverage}")
    return PurityProfile(subject, coverage, fill_profile(points, n))


def top_third_size(k: int) -> int:
    return max(1, math.floor(k / 3 + 0.5))


def top_third_membership(profiles: Mapping[str, PurityProfile]) -> dict[str, float]:
    """Per category, the fraction of NSC values where it ranks in the top third.

    Ranking is by purity (descending), ties by category id.
    """
    if not profiles:
        raise ValueError("no category profiles to rank")
    grids = {(p.n, p.coverage) for p in profiles.values()}
    if len(grids) != 1:
        raise ValueError(f"category profiles are on different grids: {sorted(grids)}")
    cats = sorted(profiles)
    n = profiles[cats[0]].n
    m = top_third_size(len(cats))
    hits = dict.fromkeys(cats, 0)
    for i in range(n):
        ranked = sorted(cats, key=lambda c: (-profiles[c].values[i], c))
        for c in ranked[:m]:
            hits[c] += 1
    return {c: hits[c] / n for c in cats}


def top_third_count(fractions: Iterable[float]) -> float:
    fractions = list(fractions)
    if not fractions:
        raise ValueError("need at least one size bin")
    return sum(fractions) / len(fractions)


def relative_purity_difference(count: float, reference_count: float) -> float:
    return count - reference_count

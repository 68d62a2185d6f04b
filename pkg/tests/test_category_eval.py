import pytest
from hypothesis import given, strategies as st

from topicbias.category_eval import (
    average_points,
    average_solution_points,
    build_category_profile,
    relative_purity_difference,
    top_third_count,
    top_third_membership,
    top_third_size,
)
from topicbias.effectiveness import PurityProfile, fill_profile
from topicbias.topics import SizeBin

from conftest import solution_from


def test_average_points_examples():
    assert average_points([(2, 0.4), (4, 0.6)]) == pytest.approx((3.0, 0.5))
    assert average_points([(3, 0.7)]) == (3.0, 0.7)
    assert average_points([(1, 0.9), (1, 0.6), (4, 0.3)]) == pytest.approx((2.0, 0.6))
    with pytest.raises(ValueError):
        average_points([])


def test_average_over_solution():
    sol = solution_from({0: ["a1", "a2", "b1"], 1: ["b2", "b3", "b4"]})
    mean = average_solution_points(sol, [{"a1", "a2"}, {"b1", "b2", "b3", "b4"}], 1.0)
    # topic a: one cluster, purity 2/3; topic b: both clusters, purity 4/6
    assert mean == pytest.approx((1.5, 2 / 3))


def test_category_profile_grid():
    bin_ = SizeBin(40, 80)
    assert build_category_profile([(1.0, 0.2), (3.0, 0.6)], bin_, 0.25).values == pytest.approx((0.2, 0.4, 0.6))
    prof = build_category_profile([(2.5, 0.5)], bin_, 0.25)
    assert prof.n == 3
    assert prof.values == pytest.approx((0.0, 1 / 3, 0.5))


def scalar_fill(points, n):
    """Straightforward per-grid-point interpolation used as a cross-check."""
    best = {}
    for x, p in points:
        best[float(x)] = max(best.get(float(x), -1.0), p)
    best.setdefault(1.0, 0.0)
    out = []
    for g in range(1, n + 1):
        if g in best:
            out.append(best[g])
            continue
        below = max(x for x in best if x < g)
        above = [x for x in best if x > g]
        if not above:
            out.append(best[below])
        else:
            hi = min(above)
            out.append(best[below] + (best[hi] - best[below]) * (g - below) / (hi - below))
    return tuple(out)


@given(st.lists(st.tuples(st.floats(1, 20), st.floats(0, 1)), max_size=15), st.integers(1, 15))
def test_real_anchor_interpolation_matches_scalar(points, n):
    assert fill_profile(points, n) == pytest.approx(scalar_fill(points, n))


def dominance_profiles(shares, n=10):
    """Category i is strictly highest at ``shares[i]`` of ``n`` positions."""
    values = {c: [0.0] * n for c in range(len(shares))}
    pos = 0
    for c, share in enumerate(shares):
        for _ in range(round(share * n)):
            for other in values:
                values[other][pos] = 0.1 + 0.01 * other
            values[c][pos] = 0.9
            pos += 1
    return {f"C{c}": PurityProfile(f"C{c}", 0.5, tuple(v)) for c, v in values.items()}


def test_dominance_fractions():
    fractions = top_third_membership(dominance_profiles([0.7, 0.3, 0.0]))
    assert fractions == {"C0": 0.7, "C1": 0.3, "C2": 0.0}


def test_top_third_size():
    assert top_third_size(3) == 1
    assert top_third_size(1) == 1
    assert top_third_size(17) == 6
    assert [top_third_size(k) for k in (4, 5, 6, 7, 8)] == [1, 2, 2, 2, 3]


def test_dominant_category_scores_one():
    profiles = {"A": PurityProfile("A", 0.5, (0.9, 0.8)), "B": PurityProfile("B", 0.5, (0.1, 0.2)),
                "C": PurityProfile("C", 0.5, (0.5, 0.5))}
    assert top_third_membership(profiles)["A"] == 1.0


def test_ties_go_to_smaller_id():
    profiles = {c: PurityProfile(c, 0.5, (0.5,)) for c in "BAC"}
    assert top_third_membership(profiles) == {"A": 1.0, "B": 0.0, "C": 0.0}


def test_membership_needs_common_grid():
    with pytest.raises(ValueError, match="different grids"):
        top_third_membership({"A": PurityProfile("A", 0.5, (0.1,)), "B": PurityProfile("B", 0.5, (0.1, 0.2))})


profile_sets = st.integers(1, 8).flatmap(
    lambda n: st.dictionaries(st.sampled_from("ABCDEFGHIJ"),
                              st.lists(st.floats(0, 1), min_size=n, max_size=n), min_size=1)
)


@given(profile_sets)
def test_exactly_m_marked_per_position(raw):
    profiles = {c: PurityProfile(c, 0.5, tuple(v)) for c, v in raw.items()}
    n = len(next(iter(raw.values())))
    fractions = top_third_membership(profiles)
    assert sum(fractions.values()) * n == pytest.approx(top_third_size(len(raw)) * n)
    assert all(0 <= f <= 1 for f in fractions.values())


@given(profile_sets)
def test_removing_competitor_never_hurts(raw):
    profiles = {c: PurityProfile(c, 0.5, tuple(v)) for c, v in raw.items()}
    k = len(profiles)
    if k < 2:
        return
    full = top_third_membership(profiles)
    for gone in profiles:
        rest = {c: p for c, p in profiles.items() if c != gone}
        if top_third_size(k - 1) != top_third_size(k):
            continue
        reduced = top_third_membership(rest)
        assert all(reduced[c] >= full[c] for c in rest)


def test_top_third_count_examples():
    assert top_third_count([0.5, 1.0]) == 0.75
    assert top_third_count([0.3]) == 0.3
    assert top_third_count([0.0, 0.0]) == 0


def test_relative_difference_examples():
    assert relative_purity_difference(0.6, 0.2) == pytest.approx(0.4)
    assert relative_purity_difference(0.5, 0.5) == 0
    assert relative_purity_difference(0, 1) == -1

import itertools

import pytest
from hypothesis import given, strategies as st

from topicbias.synth import reference_redundancy_groups
from topicbias.topics import (
    MESH_CATEGORIES,
    CategoryConfig,
    SizeBin,
    Topic,
    TopicTree,
    assign_size_bins,
    expand_annotations,
    filter_categories,
    filter_size_bins,
    jaccard,
    pick_representative,
    prefix_matches,
    redundancy_filter,
    redundancy_groups,
    select_topics,
    size_bin,
)

TREE = TopicTree.from_rows([
    ("A01", "t_body", "Body Regions"),
    ("A01.456", "t_head", "Head"),
    ("A01.456.810", "t_face", "Face"),
    ("A01.111", "t_arm", "Arm"),
    ("B01", "t_org", "Organisms"),
])


def test_expand_adds_ancestors():
    out, unknown = expand_annotations({"d": {"t_face"}}, TREE)
    assert out["d"] == {"A01.456.810", "A01.456", "A01"} and unknown == []


def test_expand_root_code():
    assert expand_annotations({"d": {"t_body"}}, TREE)[0]["d"] == {"A01"}


def test_expand_shared_ancestor_once():
    out, _ = expand_annotations({"d": {"t_face", "t_arm"}}, TREE)
    assert out["d"] == {"A01", "A01.456", "A01.456.810", "A01.111"}


def test_expand_reports_unknown_terms():
    _, unknown = expand_annotations({"d": {"nope"}}, TREE)
    assert unknown == [("d", "nope")]


@given(st.dictionaries(st.sampled_from(["d1", "d2", "d3"]),
                       st.sets(st.sampled_from(["t_body", "t_head", "t_face", "t_arm", "t_org"]))))
def test_expand_is_idempotent(doc_terms):
    once, _ = expand_annotations(doc_terms, TREE)
    twice, _ = expand_annotations(once, TREE)
    assert once == twice


def test_tree_rejects_orphans_and_bad_codes():
    with pytest.raises(ValueError, match="parent"):
        TopicTree.from_rows([("A01.2", "t", "x")])
    with pytest.raises(ValueError, match="malformed"):
        TopicTree.from_rows([("A01..2", "t", "x")])
    with pytest.raises(ValueError, match="duplicate"):
        TopicTree.from_rows([("A01", "t", "x"), ("A01", "u", "y")])


def test_size_bin_examples():
    assert size_bin(60).label == "41-80"
    assert size_bin(40) is None
    assert size_bin(81).label == "81-160"
    assert size_bin(80).label == "41-80"
    assert assign_size_bins({"x": 200})["x"] == SizeBin(160, 320)


@given(st.integers(41, 10**6))
def test_bins_tile_sizes(s):
    b = size_bin(s)
    assert s in b
    assert sum(s in SizeBin(40 * 2**i, 80 * 2**i) for i in range(20)) == 1


def test_filter_size_bins_examples():
    b1, b2, b3 = SizeBin(40, 80), SizeBin(80, 160), SizeBin(160, 320)
    assert filter_size_bins({b1: 100, b2: 60, b3: 40}) == {b1, b2}
    assert filter_size_bins({b1: 3}) == {b1}
    assert filter_size_bins({b1: 10, b2: 5}) == {b1, b2}


def test_filter_categories_examples():
    b1, b2 = SizeBin(40, 80), SizeBin(80, 160)
    counts = {"keep": {b1: 7, b2: 6}, "drop": {b1: 7, b2: 3}, "edge": {b1: 5, b2: 5}}
    assert filter_categories(counts, [b1, b2], 5) == {"keep", "edge"}


def test_jaccard_basics():
    a, b = frozenset("abc"), frozenset("xyz")
    assert jaccard(a, a) == 1 and jaccard(a, b) == 0 and jaccard(a, frozenset("ab")) == jaccard(frozenset("ab"), a)


def venn_topics():
    """Topics a, b, c with distance(a,b)=distance(b,c)=0.4 and distance(a,c)=0.7."""
    regions = {"ab": 7, "bc": 7, "ac": 1, "abc": 5}
    members = {"a": set(), "b": set(), "c": set()}
    n = 0
    for region, count in regions.items():
        for _ in range(count):
            for t in region:
                members[t].add(f"d{n}")
            n += 1
    return [Topic(f"X0{i + 1}", "X", frozenset(members[t])) for i, t in enumerate("abc")]


def test_venn_fixture_distances():
    a, b, c = venn_topics()
    assert (a.size, b.size, c.size) == (13, 19, 13)
    assert 1 - jaccard(a.documents, b.documents) == pytest.approx(0.4)
    assert 1 - jaccard(b.documents, c.documents) == pytest.approx(0.4)
    assert 1 - jaccard(a.documents, c.documents) == pytest.approx(0.7)


def test_complete_linkage_blocks_the_triple():
    topics = venn_topics()
    assert redundancy_groups(topics) == [["X01", "X02"], ["X03"]]
    assert [t.code for t in redundancy_filter(topics)] == ["X01", "X03"]


def test_smaller_topic_kept():
    small = Topic("X01", "X", frozenset(range(6)))
    large = Topic("X02", "X", frozenset(range(10)))
    assert jaccard(small.documents, large.documents) == pytest.approx(0.6)
    assert redundancy_filter([large, small]) == [small]


def test_representative_tie_breaks():
    shallow = Topic("X01", "X", frozenset(range(5)))
    deep = Topic("X02.001", "X", frozenset(range(1, 6)))
    assert pick_representative([shallow, deep]) == deep
    twins = [Topic("X01", "X", frozenset(range(5))), Topic("X02", "X", frozenset(range(5)))]
    picks = {pick_representative(twins, seed).code for seed in range(20)}
    assert picks == {"X01", "X02"}
    assert pick_representative(twins, 3) == pick_representative(list(reversed(twins)), 3)


def test_distant_topics_all_kept():
    topics = [Topic(f"X0{i}", "X", frozenset(range(10 * i, 10 * i + 10))) for i in range(4)]
    assert redundancy_filter(topics) == topics


@given(st.lists(st.sets(st.integers(0, 11), min_size=1), min_size=1, max_size=7), st.sampled_from([0.3, 0.5, 0.7]))
def test_groups_match_reference(sets, threshold):
    topics = [Topic(f"X{i:02d}", "X", frozenset(s)) for i, s in enumerate(sets)]
    ours = sorted(tuple(g) for g in redundancy_groups(topics, threshold))
    ref = reference_redundancy_groups({t.code: t.documents for t in topics}, threshold).groups
    assert tuple(ours) == ref


@given(st.lists(st.sets(st.integers(0, 11), min_size=1), min_size=1, max_size=7))
def test_filter_output_has_no_groupable_pair(sets):
    topics = [Topic(f"X{i:02d}", "X", frozenset(s)) for i, s in enumerate(sets)]
    kept = redundancy_filter(topics)
    groups = redundancy_groups(topics)
    assert len(kept) == len(groups)
    for a, b in itertools.combinations(kept, 2):
        assert not any(a.code in g and b.code in g for g in groups)


def test_prefix_matching():
    assert prefix_matches("A", "A01.456")
    assert prefix_matches("H01", "H01.1")
    assert not prefix_matches("H01", "H011")
    assert not prefix_matches("A", "AB01")
    assert MESH_CATEGORIES.category_of("I03.1") is None
    assert MESH_CATEGORIES.category_of("I01.2") == "I01"
    assert MESH_CATEGORIES.category_of("K01") is None
    assert MESH_CATEGORIES.category_of("C04.588") == "C"


def test_category_config_rejects_overlap():
    with pytest.raises(ValueError, match="overlap"):
        CategoryConfig.from_rows([("A", "A", "x"), ("A1", "A01", "y")])


def test_select_topics_pipeline_order():
    # two categories, each with five distinct topics of 50 documents in bin 41-80
    doc_codes = {}
    tree_codes = []
    for cat in "AB":
        for t in range(5):
            code = f"{cat}0{t}"
            tree_codes.append(code)
            for d in range(50):
                doc_codes.setdefault(f"{code}_{d}", set()).add(code)
    config = CategoryConfig.from_rows([("A", "A", "a"), ("B", "B", "b")])
    sel = select_topics(doc_codes, doc_codes, config, min_per_bin=5)
    assert len(sel.topics) == 10 and sel.categories == ("A", "B")
    sel = select_topics(doc_codes, doc_codes, config, min_per_bin=6)
    assert sel.topics == () and sel.dropped["category"] == 10
    every = {t.code: sel.bins.get(t.code) for t in sel.topics}
    assert all(b is not None for b in every.values())

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from topicbias.clustering import (
    SweepPlan,
    calibrate_gamma_range,
    cluster,
    cpm_quality,
    generate_sweep,
    read_solution,
    run_sweep,
    write_solution,
)
from topicbias.graph_core import build_mixed, build_pure, build_similarity, make_network, rescale_edges
from topicbias.synth import PlantedSpec, exhaustive_cpm_optimum, generate

from conftest import small_networks, two_triangles


def test_two_triangles_low_resolution(triangles):
    sol = cluster(triangles, 0.1, seed=0)
    assert sol.n_clusters == 2
    assert sorted(sol.cluster_summary.documents.tolist()) == [3, 3]
    assert sol.quality == pytest.approx(5.4)


def test_two_triangles_high_resolution(triangles):
    sol = cluster(triangles, 10, seed=0)
    assert sol.n_clusters == 6 and sol.quality == 0.0


def test_element_star(star):
    sol = cluster(star, 0.2, seed=0)
    assert sol.n_clusters == 1
    assert sol.quality == pytest.approx(2.8)


def test_quality_recomputes():
    net = two_triangles()
    assert cpm_quality(net, np.array([0, 0, 0, 1, 1, 1]), 0.1) == pytest.approx(5.4)
    assert cpm_quality(net, np.zeros(6, dtype=int), 0.1) == pytest.approx(6 - 0.1 * 15)


@given(small_networks(), st.sampled_from([0.05, 0.3, 1.0, 3.0]), st.integers(0, 1000))
def test_solution_invariants(net, gamma, seed):
    sol = cluster(net, gamma, seed=seed)
    a = sol.assignment
    assert len(a) == net.n_nodes
    assert set(a.tolist()) == set(range(sol.n_clusters))
    assert math.isclose(sol.quality, cpm_quality(net, a, gamma), rel_tol=1e-9, abs_tol=1e-9)
    assert all(b >= h - 1e-9 for h, b in zip(sol.history, sol.history[1:]))
    assert sol.quality <= exhaustive_cpm_optimum(net, gamma).quality + 1e-9


@given(small_networks(max_elems=0), st.integers(0, 100))
def test_all_singletons_above_max_weight(net, seed):
    # weight-0 elements can still join clusters at no cost, so documents only
    if net.n_edges == 0:
        return
    gamma = float(net.weights.max()) * 1.01
    sol = cluster(net, gamma, seed=seed)
    docs = sol.cluster_summary.documents
    assert docs.max() <= 1
    assert sol.quality == pytest.approx(exhaustive_cpm_optimum(net, gamma).quality)


def test_single_cluster_at_tiny_resolution():
    rng = np.random.default_rng(3)
    docs = [f"d{i}" for i in range(8)]
    edges = [(docs[i], docs[i + 1], 1.0) for i in range(7)]
    edges += [(docs[i], docs[j], 1.0) for i in range(8) for j in range(i + 2, 8) if rng.random() < 0.3]
    net = make_network(docs, (), edges, "similarity")
    w = 8
    gamma = 1.0 / (w * (w - 1) / 2) * 0.5
    assert cluster(net, gamma).n_clusters == 1


@given(small_networks(max_elems=0), st.sampled_from([0.1, 0.5, 1.0]), st.integers(0, 50))
def test_isolated_element_is_neutral(net, gamma, seed):
    docs = [net.node_ids[i] for i in range(net.n_nodes) if net.is_document[i]]
    edges = [(e.a, e.b, e.weight) for e in net.edges()]
    bigger = make_network(docs, ["zz_iso"], edges, net.variant)
    base = cluster(net, gamma, seed=seed)
    ext = cluster(bigger, gamma, seed=seed)
    assert ext.quality == pytest.approx(base.quality)
    m0, m1 = base.mapping(), ext.mapping()
    same0 = {(a, b) for a in docs for b in docs if m0[a] == m0[b]}
    same1 = {(a, b) for a in docs for b in docs if m1[a] == m1[b]}
    assert same0 == same1


def test_cluster_is_deterministic(triangles):
    a = cluster(triangles, 0.5, seed=4)
    b = cluster(triangles, 0.5, seed=4)
    assert np.array_equal(a.assignment, b.assignment) and a.quality == b.quality


def test_cluster_rejects_bad_arguments(triangles):
    with pytest.raises(ValueError):
        cluster(triangles, 0.0)
    with pytest.raises(ValueError):
        cluster(triangles, 1.0, iterations=0)
    with pytest.raises(ValueError):
        cluster(make_network([], [], [], "similarity"), 1.0)


def test_generate_sweep_examples():
    assert generate_sweep(0.01, 100, 5).gamma_values == pytest.approx((0.01, 0.1, 1, 10, 100), rel=1e-12)
    assert generate_sweep(1, 4, 3).gamma_values == pytest.approx((1, 2, 4), rel=1e-12)
    plan = generate_sweep(0.3, 7.0, 9)
    assert plan.gamma_values[0] == 0.3 and plan.gamma_values[-1] == 7.0
    with pytest.raises(ValueError):
        generate_sweep(1, 1, 5)
    with pytest.raises(ValueError):
        SweepPlan((1.0, 0.5))


def test_calibration_bounds(triangles):
    lo, hi = calibrate_gamma_range(triangles)
    assert lo < hi and hi >= 1
    clique = make_network("abcdef", (), [(a, b, 1.0) for i, a in enumerate("abcdef") for b in "abcdef"[i + 1:]], "similarity")
    lo, hi = calibrate_gamma_range(clique)
    assert lo <= 1 and lo < hi


def test_calibration_probe_cap_warns():
    net = make_network(["a", "b"], (), [("a", "b", 1e30)], "similarity")
    with pytest.warns(RuntimeWarning, match="probe cap"):
        calibrate_gamma_range(net, max_probes=3)


def test_run_sweep_cardinality_and_repeatability(triangles):
    plan = generate_sweep(0.05, 2.0, 3, seed=1)
    first = run_sweep(triangles, plan)
    second = run_sweep(triangles, plan)
    assert [s.resolution for s in first] == list(plan.gamma_values)
    for a, b in zip(first, second):
        assert np.array_equal(a.assignment, b.assignment)


def test_sweep_worker_count_does_not_matter(triangles):
    plan = generate_sweep(0.05, 2.0, 4, seed=2)
    serial = run_sweep(triangles, plan, workers=1)
    parallel = run_sweep(triangles, plan, workers=2)
    for a, b in zip(serial, parallel):
        assert np.array_equal(a.assignment, b.assignment)


def test_cluster_counts_grow_with_resolution():
    corpus = generate(PlantedSpec(seed=0))
    pure = build_pure(corpus.links)
    rows = [r for r in corpus.similarity if r[0] in pure.index and r[1] in pure.index]
    sim = rescale_edges(build_similarity(pure.document_ids, rows, 20), pure.total_edge_weight)
    net = build_mixed(pure, sim)
    lo, hi = calibrate_gamma_range(net, seed=0)
    sols = run_sweep(net, generate_sweep(lo, hi, 50, seed=0))
    counts = [s.n_clusters for s in sols]
    ok = sum(b >= a for a, b in zip(counts, counts[1:]))
    assert ok >= 0.9 * (len(counts) - 1)


def test_solution_round_trip(tmp_path, triangles):
    sol = cluster(triangles, 0.1, seed=3)
    path = tmp_path / "sol.tsv"
    write_solution(sol, path)
    header, mapping = read_solution(path)
    assert header["gamma"] == 0.1 and mapping == sol.mapping()

import numpy as np
import pytest
from hypothesis import HealthCheck, settings, strategies as st

from topicbias.graph_core import make_network

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def two_triangles():
    edges = [("a", "b", 1.0), ("b", "c", 1.0), ("a", "c", 1.0),
             ("d", "e", 1.0), ("e", "f", 1.0), ("d", "f", 1.0)]
    return make_network("abcdef", (), edges, "similarity")


def element_star():
    docs = ["d1", "d2", "d3", "d4"]
    return make_network(docs, ["e"], [("e", d, 1.0) for d in docs], "pure")


def random_network(rng, n_docs, n_elems, p=0.5, weighted=True, variant="mixed"):
    docs = [f"d{i}" for i in range(n_docs)]
    elems = [f"x{i}" for i in range(n_elems)]
    nodes = docs + elems
    edges = []
    for i in range(len(nodes)):
        for j in range(i + 1, len(nodes)):
            if rng.random() < p:
                w = float(rng.choice([0.5, 1.0, 2.0])) if weighted else 1.0
                edges.append((nodes[i], nodes[j], w))
    return make_network(docs, elems, edges, variant)


@st.composite
def small_networks(draw, max_docs=8, max_elems=2):
    n_docs = draw(st.integers(2, max_docs))
    n_elems = draw(st.integers(0, max_elems))
    seed = draw(st.integers(0, 2**32 - 1))
    p = draw(st.sampled_from([0.3, 0.5, 0.8]))
    return random_network(np.random.default_rng(seed), n_docs, n_elems, p)


@pytest.fixture
def triangles():
    return two_triangles()


@pytest.fixture
def star():
    return element_star()


def solution_from(clusters, elements=()):
    """A ClusteringSolution built directly from ``{cluster: [node ids]}``."""
    from topicbias.clustering import ClusteringSolution, summarize

    elements = set(elements)
    members = {n: c for c, nodes in clusters.items() for n in nodes}
    docs = [n for n in members if n not in elements]
    net = make_network(docs, [n for n in members if n in elements], [], "mixed")
    labels = sorted(set(members.values()))
    relabel = {c: i for i, c in enumerate(labels)}
    assignment = np.array([relabel[members[n]] for n in net.node_ids], dtype=np.int64)
    return ClusteringSolution(1.0, net.node_ids, assignment, summarize(net, assignment), 0.0)


ACCEPTANCE_LINES = []


def record_criterion(number, title, ok, detail=""):
    line = f"{'PASS' if ok else 'FAIL'}  criterion {number:>2}: {title}" + (f" ({detail})" if detail else "")
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda l: int(l.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)

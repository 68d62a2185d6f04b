"""Document networks: data model and builders for the network variants.

A network holds weighted nodes (documents weigh 1, linking elements weigh 0)
and weighted undirected edges. Node arrays are stored in a fixed order
(documents sorted by id, then elements sorted by id) so every downstream
computation is deterministic.
"""

from __future__ import annotations

import hashlib
from collections import defaultdict
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

DOCUMENT = "document"
ELEMENT = "element"

VARIANTS = ("pure", "similarity", "mixed", "extended_citation")

REL_TOL = 1e-9


@dataclass(frozen=True)
class NodeRecord:
    id: str
    kind: str
    weight: float


@dataclass(frozen=True)
class EdgeRecord:
    a: str
    b: str
    weight: float


@dataclass(frozen=True, eq=False)
class Network:
    """Immutable weighted undirected network.

    Edges are stored once per unordered pair with ``src < dst`` (node indices).
    """

    node_ids: tuple[str, ...]
    is_document: np.ndarray
    node_weights: np.ndarray
    src: np.ndarray
    dst: np.ndarray
    weights: np.ndarray
    variant: str
    index: dict[str, int] = field(repr=False)

    def __post_init__(self):
        for arr in (self.is_document, self.node_weights, self.src, self.dst, self.weights):
            arr.flags.writeable = False

    @property
    def n_nodes(self) -> int:
        return len(self.node_ids)

    @property
    def n_edges(self) -> int:
        return len(self.weights)

    @cached_property
    def total_edge_weight(self) -> float:
        return float(np.sum(self.weights))

    @cached_property
    def n_documents(self) -> int:
        return int(np.count_nonzero(self.is_document))

    @cached_property
    def document_ids(self) -> frozenset[str]:
        return frozenset(i for i, d in zip(self.node_ids, self.is_document) if d)

    @cached_property
    def degree(self) -> np.ndarray:
        deg = np.bincount(self.src, minlength=self.n_nodes) + np.bincount(self.dst, minlength=self.n_nodes)
        deg.flags.writeable = False
        return deg

    @cached_property
    def csr(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Symmetric CSR adjacency ``(indptr, indices, weights)``, neighbours sorted by index."""
        n = self.n_nodes
        rows = np.concatenate([self.src, self.dst])
        cols = np.concatenate([self.dst, self.src])
        w = np.concatenate([self.weights, self.weights])
        order = np.lexsort((cols, rows))
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(rows, minlength=n), out=indptr[1:])
        return indptr, cols[order].astype(np.int64), w[order].astype(np.float64)

    @cached_property
    def node_keys(self) -> np.ndarray:
        """Stable 64-bit hash per node id, independent of the rest of the network."""
        keys = np.empty(self.n_nodes, dtype=np.uint64)
        for i, node_id in enumerate(self.node_ids):
            digest = hashlib.blake2b(node_id.encode("utf-8"), digest_size=8).digest()
            keys[i] = int.from_bytes(digest, "little")
        return keys

    def nodes(self) -> Iterator[NodeRecord]:
        for node_id, doc, w in zip(self.node_ids, self.is_document, self.node_weights):
            yield NodeRecord(node_id, DOCUMENT if doc else ELEMENT, float(w))

    def edges(self) -> Iterator[EdgeRecord]:
        ids = self.node_ids
        for s, d, w in zip(self.src, self.dst, self.weights):
            yield EdgeRecord(ids[s], ids[d], float(w))

    def edge_dict(self) -> dict[frozenset[str], float]:
        return {frozenset((e.a, e.b)): e.weight for e in self.edges()}


def make_network(
    documents: Iterable[str],
    elements: Iterable[str],
    edges: Iterable[tuple[str, str, float]],
    variant: str,
    merge: str = "sum",
) -> Network:
    """Assemble a network from id collections and an edge list.

    Duplicate unordered pairs are merged by ``merge`` ("sum" or "first").
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown network variant {variant!r}")
    docs = sorted(set(documents))
    elems = sorted(set(elements))
    clash = set(docs).intersection(elems)
    if clash:
        raise ValueError(f"document and element ids collide: {sorted(clash)[:20]}")
    node_ids = tuple(docs + elems)
    index = {node_id: i for i, node_id in enumerate(node_ids)}

    merged: dict[tuple[int, int], float] = {}
    for a, b, w in edges:
        if a == b:
            raise ValueError(f"self-loop on node {a!r}")
        if not w > 0:
            raise ValueError(f"edge ({a!r}, {b!r}) has non-positive weight {w!r}")
        try:
            i, j = index[a], index[b]
        except KeyError as exc:
            raise ValueError(f"edge references unknown node {exc.args[0]!r}") from None
        key = (i, j) if i < j else (j, i)
        if key in merged:
            if merge == "sum":
                merged[key] += w
        else:
            merged[key] = w

    keys = sorted(merged)
    src = np.fromiter((k[0] for k in keys), dtype=np.int64, count=len(keys))
    dst = np.fromiter((k[1] for k in keys), dtype=np.int64, count=len(keys))
    weights = np.fromiter((merged[k] for k in keys), dtype=np.float64, count=len(keys))
    is_document = np.zeros(len(node_ids), dtype=bool)
    is_document[: len(docs)] = True
    return Network(
        node_ids=node_ids,
        is_document=is_document,
        node_weights=is_document.astype(np.float64),
        src=src,
        dst=dst,
        weights=weights,
        variant=variant,
        index=index,
    )


def build_pure(links: Iterable[tuple[str, str]]) -> Network:
    """Bipartite element-document network.

    Elements linked to fewer than two distinct documents are dropped, then
    documents left without links. One pass suffices: a dropped document had
    no kept element, so no kept element loses a neighbour.
    """
    docs_of: dict[str, set[str]] = defaultdict(set)
    for element_id, document_id in links:
        if not element_id or not document_id:
            raise ValueError(f"empty id in link ({element_id!r}, {document_id!r})")
        docs_of[element_id].add(document_id)

    kept = {e: ds for e, ds in docs_of.items() if len(ds) >= 2}
    documents = set().union(*kept.values()) if kept else set()
    edges = [(e, d, 1.0) for e, ds in kept.items() for d in ds]
    return make_network(documents, kept, edges, "pure")


def build_similarity(
    doc_ids: Iterable[str],
    scores: Iterable[tuple[str, str, float]],
    k: int = 20,
) -> Network:
    """Top-``k`` text-similarity network over ``doc_ids``.

    Each row ``(a, b, score)`` is a candidate partner ``b`` for document ``a``;
    supply both directions for symmetric similarities. Every document keeps its
    ``k`` best candidates (ties at the cutoff go to the lexicographically
    smaller partner); a pair chosen from both sides gets the summed weight.
    Repeated rows for the same directed pair keep the highest score.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    docs = set(doc_ids)
    best: dict[tuple[str, str], float] = {}
    for a, b, s in scores:
        if a == b:
            raise ValueError(f"similarity pair ({a!r}, {b!r}) is a self-pair")
        if a not in docs or b not in docs:
            missing = a if a not in docs else b
            raise ValueError(f"similarity pair ({a!r}, {b!r}) references unknown document {missing!r}")
        s = float(s)
        if not np.isfinite(s) or s <= 0:
            raise ValueError(f"similarity pair ({a!r}, {b!r}) has non-positive score {s!r}")
        if s > best.get((a, b), 0.0):
            best[(a, b)] = s

    candidates: dict[str, list[tuple[float, str]]] = defaultdict(list)
    for (a, b), s in best.items():
        candidates[a].append((s, b))

    selections = []
    for a, cands in candidates.items():
        cands.sort(key=lambda c: (-c[0], c[1]))
        selections.extend((a, b, s) for s, b in cands[:k])
    return make_network(docs, (), selections, "similarity", merge="sum")


def rescale_edges(network: Network, target_total: float) -> Network:
    """Scale all edge weights so that they sum to ``target_total``."""
    if network.n_edges == 0:
        raise ValueError("cannot rescale a network without edges")
    if not target_total > 0:
        raise ValueError("target_total must be positive")
    factor = target_total / network.total_edge_weight
    return Network(
        node_ids=network.node_ids,
        is_document=network.is_document,
        node_weights=network.node_weights,
        src=network.src,
        dst=network.dst,
        weights=network.weights * factor,
        variant=network.variant,
        index=network.index,
    )


def build_mixed(pure: Network, similarity: Network) -> Network:
    """Pure network plus the (already rescaled) similarity edges.

    Document-document and document-element edges cannot coincide, so the
    edge collection is a plain union.
    """
    missing = sorted(similarity.document_ids - pure.document_ids)
    if missing:
        raise ValueError(f"similarity documents absent from the pure network: {missing[:20]}")
    sim_src = np.fromiter((pure.index[similarity.node_ids[i]] for i in similarity.src), dtype=np.int64, count=similarity.n_edges)
    sim_dst = np.fromiter((pure.index[similarity.node_ids[i]] for i in similarity.dst), dtype=np.int64, count=similarity.n_edges)
    lo, hi = np.minimum(sim_src, sim_dst), np.maximum(sim_src, sim_dst)
    src = np.concatenate([pure.src, lo])
    dst = np.concatenate([pure.dst, hi])
    weights = np.concatenate([pure.weights, similarity.weights])
    order = np.lexsort((dst, src))
    return Network(
        node_ids=pure.node_ids,
        is_document=pure.is_document,
        node_weights=pure.node_weights,
        src=src[order],
        dst=dst[order],
        weights=weights[order],
        variant="mixed",
        index=pure.index,
    )


def build_extended_citation(core_docs: Iterable[str], citations: Iterable[tuple[str, str]]) -> Network:
    """Citation network over ``core_docs`` extended with non-core documents.

    A non-core document enters (as a weight-0 node) when it has citation links
    to at least two distinct core documents. Direction is ignored and repeated
    links collapse to weight 1.
    """
    core = set(core_docs)
    core_edges: set[tuple[str, str]] = set()
    outside: dict[str, set[str]] = defaultdict(set)
    for a, b in citations:
        if not a or not b:
            raise ValueError(f"empty id in citation ({a!r}, {b!r})")
        if a == b:
            continue
        a_core, b_core = a in core, b in core
        if a_core and b_core:
            core_edges.add((a, b) if a < b else (b, a))
        elif a_core:
            outside[b].add(a)
        elif b_core:
            outside[a].add(b)

    extended = {n: cs for n, cs in outside.items() if len(cs) >= 2}
    edges = [(a, b, 1.0) for a, b in core_edges]
    edges += [(n, c, 1.0) for n, cs in extended.items() for c in cs]
    return make_network(core, extended, edges, "extended_citation", merge="first")


def check_invariants(network: Network) -> list[str]:
    """Return a list of violated structural invariants (empty when valid)."""
    problems = []
    if np.any(network.src == network.dst):
        problems.append("self-loop present")
    if np.any(network.src > network.dst):
        problems.append("edge not stored in canonical order")
    pairs = network.src * max(network.n_nodes, 1) + network.dst
    if len(np.unique(pairs)) != len(pairs):
        problems.append("duplicate edge")
    if np.any(network.weights <= 0):
        problems.append("non-positive edge weight")
    if not np.array_equal(network.node_weights, network.is_document.astype(float)):
        problems.append("node weight does not match node kind")
    deg = network.degree
    doc = network.is_document
    if network.variant == "pure":
        if np.any(doc[network.src] == doc[network.dst]):
            problems.append("pure edge not joining a document and an element")
        if np.any(deg[~doc] < 2):
            problems.append("element with degree < 2")
        if np.any(deg[doc] < 1):
            problems.append("isolated document")
    if network.variant == "similarity" and not np.all(doc):
        problems.append("similarity network contains element nodes")
    return problems


def write_network(network: Network, path: str | Path) -> None:
    """Debug export: a node section then an edge section, tab-separated."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("# nodes\nid\tkind\tweight\n")
        for node in network.nodes():
            fh.write(f"{node.id}\t{node.kind}\t{node.weight!r}\n")
        fh.write("# edges\nid_a\tid_b\tweight\n")
        for edge in network.edges():
            fh.write(f"{edge.a}\t{edge.b}\t{edge.weight!r}\n")


def read_network(path: str | Path, variant: str) -> Network:
    documents, elements, edges = [], [], []
    section = None
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("# "):
                section = line[2:]
                next(fh)
                continue
            fields = line.split("\t")
            if section == "nodes":
                (documents if fields[1] == DOCUMENT else elements).append(fields[0])
            elif section == "edges":
                edges.append((fields[0], fields[1], float(fields[2])))
    return make_network(documents, elements, edges, variant, merge="first")


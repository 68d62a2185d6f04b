"""Node-weighted Leiden clustering, resolution sweeps and sweep calibration."""

from __future__ import annotations

import logging
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _leiden
from .graph_core import Network

log = logging.getLogger(__name__)

DEFAULT_ITERATIONS = 10
MAX_PROBES = 40


@dataclass(frozen=True, eq=False)
class ClusterSummary:
    documents: np.ndarray
    elements: np.ndarray
    node_weight: np.ndarray
    internal_weight: np.ndarray

    @property
    def n_clusters(self) -> int:
        return len(self.documents)


@dataclass(frozen=True, eq=False)
class ClusteringSolution:
    resolution: float
    node_ids: tuple[str, ...]
    assignment: np.ndarray
    cluster_summary: ClusterSummary
    quality: float
    seed: int = 0
    iterations: int = DEFAULT_ITERATIONS
    history: tuple[float, ...] = ()

    @property
    def n_clusters(self) -> int:
        return self.cluster_summary.n_clusters

    def mapping(self) -> dict[str, int]:
        return dict(zip(self.node_ids, self.assignment.tolist()))


@dataclass(frozen=True)
class SweepPlan:
    gamma_values: tuple[float, ...]
    seed: int = 0
    iterations: int = DEFAULT_ITERATIONS

    def __post_init__(self):
        g = np.asarray(self.gamma_values, dtype=float)
        if len(g) < 1 or np.any(g <= 0) or np.any(np.diff(g) <= 0):
            raise ValueError("gamma values must be positive and strictly increasing")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")


def cpm_quality(network: Network, assignment: np.ndarray, resolution: float) -> float:
    """Constant Potts quality of ``assignment``, recomputed from scratch."""
    assignment = np.asarray(assignment)
    same = assignment[network.src] == assignment[network.dst]
    internal = float(np.sum(network.weights[same]))
    w = np.bincount(assignment, weights=network.node_weights)
    return internal - resolution * float(np.sum(w * (w - 1.0) / 2.0))


def summarize(network: Network, assignment: np.ndarray) -> ClusterSummary:
    m = int(assignment.max()) + 1 if len(assignment) else 0
    docs = np.bincount(assignment, weights=network.is_document, minlength=m).astype(np.int64)
    total = np.bincount(assignment, minlength=m)
    same = assignment[network.src] == assignment[network.dst]
    internal = np.bincount(assignment[network.src][same], weights=network.weights[same], minlength=m)
    summary = ClusterSummary(
        documents=docs,
        elements=total - docs,
        node_weight=np.bincount(assignment, weights=network.node_weights, minlength=m),
        internal_weight=internal,
    )
    for arr in (summary.documents, summary.elements, summary.node_weight, summary.internal_weight):
        arr.flags.writeable = False
    return summary


def _salt(seed: int, iteration: int) -> int:
    ss = np.random.SeedSequence([seed % 2**63, iteration + 1])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def cluster(
    network: Network,
    resolution: float,
    seed: int = 0,
    iterations: int = DEFAULT_ITERATIONS,
    initial: np.ndarray | None = None,
) -> ClusteringSolution:
    """Cluster ``network`` with Leiden under the node-weighted constant Potts model.

    Passes start from the previous pass's partition and stop early once a
    pass leaves the partition unchanged. Element nodes (weight 0) carry edges
    but no size penalty. Deterministic in ``(network, resolution, seed,
    iterations)``.
    """
    if network.n_nodes == 0:
        raise ValueError("cannot cluster an empty network")
    if not resolution > 0:
        raise ValueError("resolution must be positive")
    if iterations < 1:
        raise ValueError("iterations must be >= 1")

    indptr, indices, weights = network.csr
    node_w = np.asarray(network.node_weights, dtype=np.float64)
    keys = network.node_keys
    if initial is None:
        membership = np.arange(network.n_nodes, dtype=np.int64)
    else:
        membership, _ = _leiden.relabel(np.asarray(initial, dtype=np.int64))

    _leiden.seed_kernels(_salt(seed, -1) % 2**32)
    history = [cpm_quality(network, membership, resolution)]
    for it in range(iterations):
        new, _ = _leiden.leiden_pass(
            indptr, indices, weights, node_w.copy(), keys, membership, resolution, _salt(seed, it)
        )
        new, _ = _leiden.relabel(new)
        history.append(cpm_quality(network, new, resolution))
        unchanged = np.array_equal(new, membership)
        membership = new
        if unchanged:
            break

    membership.flags.writeable = False
    return ClusteringSolution(
        resolution=float(resolution),
        node_ids=network.node_ids,
        assignment=membership,
        cluster_summary=summarize(network, membership),
        quality=history[-1],
        seed=seed,
        iterations=iterations,
        history=tuple(history),
    )


def singleton_fraction(solution: ClusteringSolution) -> float:
    """Share of document-bearing clusters that hold exactly one document."""
    docs = solution.cluster_summary.documents
    docs = docs[docs > 0]
    return float(np.mean(docs == 1)) if len(docs) else 1.0


def giant_fraction(solution: ClusteringSolution) -> float:
    """Share of all documents that sit in the largest cluster."""
    docs = solution.cluster_summary.documents
    total = docs.sum()
    return float(docs.max() / total) if total else 0.0


def calibrate_gamma_range(
    network: Network,
    seed: int = 0,
    iterations: int = DEFAULT_ITERATIONS,
    threshold: float = 0.5,
    max_probes: int = MAX_PROBES,
) -> tuple[float, float]:
    """Find sweep endpoints by doubling/halving probes from gamma = 1.

    The upper endpoint is the smallest probed gamma where at least
    ``threshold`` of the clusters hold a single document; the lower endpoint
    is the largest probed gamma where one cluster holds at least
    ``threshold`` of the documents.
    """
    if network.n_documents < 2 or network.n_edges < 1:
        raise ValueError("calibration needs at least 2 documents and 1 edge")

    def fine_enough(gamma):
        return singleton_fraction(cluster(network, gamma, seed, iterations)) >= threshold

    def coarse_enough(gamma):
        return giant_fraction(cluster(network, gamma, seed, iterations)) >= threshold

    gamma_max = _boundary(fine_enough, upward=True, max_probes=max_probes, label="upper")
    gamma_min = _boundary(coarse_enough, upward=False, max_probes=max_probes, label="lower")
    if gamma_min >= gamma_max:
        gamma_min = gamma_max / 2.0
    return gamma_min, gamma_max


def _boundary(ok, upward: bool, max_probes: int, label: str) -> float:
    """Power-of-two boundary search.

    ``upward`` means ``ok`` holds for large gamma; we return the smallest
    satisfying probe (or the largest, for the downward case).
    """
    grow, shrink = (2.0, 0.5) if upward else (0.5, 2.0)
    gamma = 1.0
    if ok(gamma):
        for _ in range(max_probes):
            nxt = gamma * shrink
            if not ok(nxt):
                return gamma
            gamma = nxt
        _cap_warning(label, gamma)
        return gamma
    for _ in range(max_probes):
        gamma *= grow
        if ok(gamma):
            return gamma
    _cap_warning(label, gamma)
    return gamma


def _cap_warning(label, gamma):
    msg = f"{label} resolution endpoint hit the probe cap; using gamma={gamma!r}"
    log.warning(msg)
    warnings.warn(msg, RuntimeWarning, stacklevel=3)


def generate_sweep(gamma_min: float, gamma_max: float, count: int, seed: int = 0,
                   iterations: int = DEFAULT_ITERATIONS) -> SweepPlan:
    """Geometric grid from ``gamma_min`` to ``gamma_max`` inclusive."""
    if not 0 < gamma_min < gamma_max:
        raise ValueError(f"degenerate resolution range ({gamma_min!r}, {gamma_max!r})")
    if count < 2:
        raise ValueError("sweep count must be >= 2")
    values = np.geomspace(gamma_min, gamma_max, count)
    values[0], values[-1] = gamma_min, gamma_max
    return SweepPlan(tuple(float(v) for v in values), seed=seed, iterations=iterations)


def sweep_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed % 2**63, index]).generate_state(1)[0])


def _sweep_job(args):
    network, gamma, seed, iterations = args
    return cluster(network, gamma, seed, iterations)


def run_sweep(network: Network, plan: SweepPlan, workers: int = 1) -> list[ClusteringSolution]:
    """One solution per resolution, in plan order.

    Each run is seeded from ``(plan.seed, index)`` only, so results do not
    depend on ``workers``. Worker processes are used when ``workers > 1``.
    """
    jobs = [(network, g, sweep_seed(plan.seed, i), plan.iterations) for i, g in enumerate(plan.gamma_values)]
    if workers <= 1:
        return [_sweep_job(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_sweep_job, jobs))


def write_solution(solution: ClusteringSolution, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"#gamma={solution.resolution!r}\tseed={solution.seed}\tquality={solution.quality!r}\n")
        fh.write("node_id\tcluster_id\n")
        for node_id, c in zip(solution.node_ids, solution.assignment.tolist()):
            fh.write(f"{node_id}\t{c}\n")


def read_solution(path: str | Path) -> tuple[dict[str, float], dict[str, int]]:
    """Return ``(header, assignment)`` from a solution file."""
    with open(path, encoding="utf-8") as fh:
        header_line = fh.readline().lstrip("#").rstrip("\n")
        header = {k: float(v) for k, v in (f.split("=", 1) for f in header_line.split("\t"))}
        fh.readline()
        assignment = {}
        for line in fh:
            node_id, c = line.rstrip("\n").split("\t")
            assignment[node_id] = int(c)
    return header, assignment

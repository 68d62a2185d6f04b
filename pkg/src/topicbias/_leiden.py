"""Leiden kernels for the node-weighted constant Potts model.

Quality of a partition: sum over clusters of internal edge weight minus
``gamma * w_c * (w_c - 1) / 2`` where ``w_c`` is the total node weight.
Moving node ``v`` (weight ``w_v``) into cluster ``c`` (weight ``W_c``,
excluding ``v``) changes quality by ``k_vc - gamma * w_v * W_c`` relative to
leaving it alone in an empty cluster; the ``w_v (w_v - 1) / 2`` terms cancel.
"""

from __future__ import annotations

import numba as nb
import numpy as np

EPS = 1e-10
THETA = 0.01

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)


def splitmix64(x: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        z = x + _GOLDEN
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return z ^ (z >> np.uint64(31))


def visit_order(keys: np.ndarray, salt: int) -> np.ndarray:
    """Pseudo-random node order that depends only on each node's own key."""
    salt_key = splitmix64(np.array([salt % 2**64], dtype=np.uint64))[0]
    mixed = splitmix64(keys ^ salt_key)
    return np.argsort(mixed, kind="stable").astype(np.int64)


@nb.njit(cache=True)
def seed_kernels(seed):
    np.random.seed(seed)


@nb.njit(cache=True)
def move_nodes(indptr, indices, weights, node_w, membership, order, gamma):
    """Queue-based local moving; returns the number of node moves."""
    n = node_w.shape[0]
    cluster_w = np.zeros(n)
    cluster_n = np.zeros(n, np.int64)
    for v in range(n):
        cluster_w[membership[v]] += node_w[v]
        cluster_n[membership[v]] += 1
    empty = np.empty(n, np.int64)
    n_empty = 0
    for c in range(n - 1, -1, -1):
        if cluster_n[c] == 0:
            empty[n_empty] = c
            n_empty += 1

    queue = order.copy()
    in_queue = np.ones(n, np.bool_)
    head = 0
    pending = n

    neigh_w = np.zeros(n)
    seen = np.zeros(n, np.bool_)
    neigh = np.empty(n, np.int64)
    moves = 0

    while pending > 0:
        v = queue[head]
        head = (head + 1) % n
        pending -= 1
        in_queue[v] = False

        cur = membership[v]
        wv = node_w[v]
        cluster_w[cur] -= wv
        cluster_n[cur] -= 1

        n_neigh = 0
        for j in range(indptr[v], indptr[v + 1]):
            u = indices[j]
            if u == v:
                continue
            c = membership[u]
            if not seen[c]:
                seen[c] = True
                neigh[n_neigh] = c
                n_neigh += 1
            neigh_w[c] += weights[j]

        best = cur
        best_gain = neigh_w[cur] - gamma * wv * cluster_w[cur]
        for i in range(n_neigh):
            c = neigh[i]
            gain = neigh_w[c] - gamma * wv * cluster_w[c]
            if gain > best_gain + EPS:
                best = c
                best_gain = gain
        use_empty = best_gain < -EPS and cluster_n[cur] > 0

        for i in range(n_neigh):
            c = neigh[i]
            neigh_w[c] = 0.0
            seen[c] = False

        if use_empty:
            n_empty -= 1
            best = empty[n_empty]

        cluster_w[best] += wv
        cluster_n[best] += 1
        if best != cur:
            if cluster_n[cur] == 0:
                empty[n_empty] = cur
                n_empty += 1
            membership[v] = best
            moves += 1
            for j in range(indptr[v], indptr[v + 1]):
                u = indices[j]
                if not in_queue[u] and membership[u] != best:
                    queue[(head + pending) % n] = u
                    pending += 1
                    in_queue[u] = True
    return moves


@nb.njit(cache=True)
def refine(indptr, indices, weights, node_w, membership, order, gamma, theta):
    """Refinement phase: merge singletons within each cluster of ``membership``.

    Only well-connected nodes and sub-clusters take part, and a node joins a
    sub-cluster with probability proportional to ``exp(gain / theta)`` among
    non-negative gains.
    """
    n = node_w.shape[0]
    refined = np.arange(n)
    ref_w = node_w.copy()
    ref_n = np.ones(n, np.int64)
    cluster_w = np.zeros(n)
    for v in range(n):
        cluster_w[membership[v]] += node_w[v]

    k_in = np.zeros(n)
    for v in range(n):
        for j in range(indptr[v], indptr[v + 1]):
            u = indices[j]
            if u != v and membership[u] == membership[v]:
                k_in[v] += weights[j]
    external = k_in.copy()

    neigh_w = np.zeros(n)
    seen = np.zeros(n, np.bool_)
    neigh = np.empty(n, np.int64)
    cand = np.empty(n, np.int64)
    gains = np.empty(n)

    for idx in range(n):
        v = order[idx]
        own = refined[v]
        if ref_n[own] != 1:
            continue
        c = membership[v]
        wv = node_w[v]
        total = cluster_w[c]
        if k_in[v] < gamma * wv * (total - wv) - EPS:
            continue

        n_neigh = 0
        for j in range(indptr[v], indptr[v + 1]):
            u = indices[j]
            if u == v or membership[u] != c:
                continue
            r = refined[u]
            if not seen[r]:
                seen[r] = True
                neigh[n_neigh] = r
                n_neigh += 1
            neigh_w[r] += weights[j]

        n_cand = 1
        cand[0] = own
        gains[0] = 0.0
        best_gain = 0.0
        for i in range(n_neigh):
            r = neigh[i]
            if r == own:
                continue
            if external[r] < gamma * ref_w[r] * (total - ref_w[r]) - EPS:
                continue
            gain = neigh_w[r] - gamma * wv * ref_w[r]
            if gain >= -EPS:
                cand[n_cand] = r
                gains[n_cand] = gain
                n_cand += 1
                if gain > best_gain:
                    best_gain = gain

        chosen = own
        if n_cand > 1:
            acc = 0.0
            for i in range(n_cand):
                gains[i] = np.exp((gains[i] - best_gain) / theta)
                acc += gains[i]
            draw = np.random.random() * acc
            chosen = cand[n_cand - 1]
            for i in range(n_cand):
                draw -= gains[i]
                if draw < 0.0:
                    chosen = cand[i]
                    break

        if chosen != own:
            external[chosen] = external[chosen] + k_in[v] - 2.0 * neigh_w[chosen]
            refined[v] = chosen
            ref_n[chosen] += 1
            ref_n[own] = 0
            ref_w[chosen] += wv
            ref_w[own] = 0.0

        for i in range(n_neigh):
            r = neigh[i]
            neigh_w[r] = 0.0
            seen[r] = False
    return refined


def relabel(labels: np.ndarray) -> tuple[np.ndarray, int]:
    """Map labels to ``0..m-1`` by order of first appearance."""
    _, first, inverse = np.unique(labels, return_index=True, return_inverse=True)
    rank = np.empty(len(first), dtype=np.int64)
    rank[np.argsort(first, kind="stable")] = np.arange(len(first))
    return rank[inverse].astype(np.int64), len(first)


def aggregate(indptr, indices, weights, node_w, self_w, keys, labels, m):
    """Collapse nodes sharing a label into one node.

    Internal edges become self-loop weight (kept apart from the adjacency).
    Aggregate keys are the minimum member key, so the visit order of the
    aggregate does not depend on unrelated nodes.
    """
    n = len(node_w)
    rows = np.repeat(np.arange(n), np.diff(indptr))
    ra, rb = labels[rows], labels[indices]
    inside = ra == rb
    new_self = np.bincount(labels, weights=self_w, minlength=m)
    new_self += np.bincount(ra[inside], weights=weights[inside], minlength=m) / 2.0
    ra, rb, w = ra[~inside], rb[~inside], weights[~inside]
    pair = ra * m + rb
    uniq, inverse = np.unique(pair, return_inverse=True)
    agg_w = np.bincount(inverse, weights=w, minlength=len(uniq))
    agg_rows = uniq // m
    new_indptr = np.zeros(m + 1, dtype=np.int64)
    np.cumsum(np.bincount(agg_rows, minlength=m), out=new_indptr[1:])
    new_node_w = np.bincount(labels, weights=node_w, minlength=m)
    new_keys = np.full(m, np.iinfo(np.uint64).max, dtype=np.uint64)
    np.minimum.at(new_keys, labels, keys)
    return new_indptr, (uniq % m).astype(np.int64), agg_w, new_node_w, new_self, new_keys


def leiden_pass(indptr, indices, weights, node_w, keys, membership, gamma, salt, theta=THETA):
    """One full Leiden pass (move, refine, aggregate until stable).

    Returns the new membership over the original nodes and the number of
    local moves made across all levels.
    """
    n = len(node_w)
    self_w = np.zeros(n)
    partition, _ = relabel(membership)
    node_map = np.arange(n)
    total_moves = 0
    level = 0
    while True:
        cur_n = len(node_w)
        order = visit_order(keys, salt * 1000003 + 2 * level)
        total_moves += move_nodes(indptr, indices, weights, node_w, partition, order, gamma)
        partition, n_clusters = relabel(partition)
        if n_clusters == cur_n:
            break
        order = visit_order(keys, salt * 1000003 + 2 * level + 1)
        refined = refine(indptr, indices, weights, node_w, partition, order, gamma, theta)
        refined, m = relabel(refined)
        if m == cur_n:
            # refinement found nothing to merge; aggregate whole clusters instead
            refined, m = partition, n_clusters
        coarse = np.empty(m, dtype=np.int64)
        coarse[refined] = partition
        indptr, indices, weights, node_w, self_w, keys = aggregate(
            indptr, indices, weights, node_w, self_w, keys, refined, m
        )
        node_map = refined[node_map]
        partition = coarse
        level += 1
    return partition[node_map], total_moves

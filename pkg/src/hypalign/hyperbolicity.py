"""Gromov delta-hyperbolicity of a graph via the four-point condition.

For four points w, x, y, z of a metric space, sort the three pairings of
distance sums S1 >= S2 >= S3 taken from (d_wx + d_yz, d_wy + d_xz,
d_wz + d_xy); the quadruple's delta is (S1 - S2) / 2, and the graph's
delta is the maximum over quadruples within one connected component.
Trees have delta 0; lower delta means more tree-like. Hop counts of the
unweighted shortest-path metric are used, so graph deltas are
half-integers.

Exact enumeration is O(n^4) and capped (default 200 nodes); beyond the
cap a uniform sample of quadruples gives a lower bound.
"""

from collections import deque

import numpy as np

from .errors import DataError


def all_pairs_distances(net):
    """Hop-count distance matrix by BFS from every node; disconnected
    pairs are marked inf."""
    n = net.n_nodes
    dist = np.full((n, n), np.inf)
    for s in range(n):
        dist[s, s] = 0.0
        q = deque([s])
        while q:
            u = q.popleft()
            du = dist[s, u]
            for v in net.adjacency[u]:
                if np.isinf(dist[s, v]):
                    dist[s, v] = du + 1.0
                    q.append(v)
    return dist


def four_point_delta(d_wx, d_yz, d_wy, d_xz, d_wz, d_xy):
    """Delta of a single quadruple, or None when any distance is
    infinite (the condition is undefined across components)."""
    sums = (d_wx + d_yz, d_wy + d_xz, d_wz + d_xy)
    if not all(np.isfinite(s) for s in sums):
        return None
    s = sorted(sums, reverse=True)
    return (s[0] - s[1]) / 2.0


def _components(net):
    n = net.n_nodes
    comp = np.full(n, -1, dtype=np.int64)
    c = 0
    for s in range(n):
        if comp[s] >= 0:
            continue
        comp[s] = c
        q = deque([s])
        while q:
            u = q.popleft()
            for v in net.adjacency[u]:
                if comp[v] < 0:
                    comp[v] = c
                    q.append(v)
        c += 1
    return comp, c


def _delta_block(dist, nodes):
    """Max four-point delta over all quadruples of ``nodes`` (all within
    one component, so distances are finite)."""
    m = len(nodes)
    if m < 4:
        return 0.0
    d = dist[np.ix_(nodes, nodes)]
    best = 0.0
    # Fix (i, j), vectorize over the remaining pairs (k, l) with
    # j < k < l. Pairs are pre-grouped by their smaller index.
    pairs_k = []
    pairs_l = []
    for k in range(m):
        ls = np.arange(k + 1, m)
        pairs_k.append(np.full(len(ls), k))
        pairs_l.append(ls)
    # offsets[j] = first flat position with k > j
    flat_k = np.concatenate(pairs_k) if pairs_k else np.empty(0, np.int64)
    flat_l = np.concatenate(pairs_l) if pairs_l else np.empty(0, np.int64)
    sizes = [len(p) for p in pairs_k]
    starts = np.concatenate([[0], np.cumsum(sizes)])
    for i in range(m - 3):
        for j in range(i + 1, m - 2):
            k = flat_k[starts[j + 1]:]
            l = flat_l[starts[j + 1]:]
            s1 = d[i, j] + d[k, l]
            s2 = d[i, k] + d[j, l]
            s3 = d[i, l] + d[j, k]
            hi = np.maximum(np.maximum(s1, s2), s3)
            lo = np.minimum(np.minimum(s1, s2), s3)
            mid = s1 + s2 + s3 - hi - lo
            m_delta = np.max(hi - mid) / 2.0
            if m_delta > best:
                best = m_delta
    return best


def graph_delta(net, mode="exact", n_samples=1_000_000, seed=0, exact_cap=200):
    """Delta-hyperbolicity of a graph.

    mode="exact" enumerates every quadruple within each connected
    component (requires n <= exact_cap); mode="sampled" takes the max
    over ``n_samples`` uniformly drawn quadruples, a lower bound on the
    exact value, deterministic per seed.
    """
    n = net.n_nodes
    if n < 4:
        return 0.0
    if mode == "exact":
        if n > exact_cap:
            raise DataError(
                f"exact mode is O(n^4) and capped at {exact_cap} nodes "
                f"(got {n}); use sampled mode")
        dist = all_pairs_distances(net)
        comp, n_comp = _components(net)
        best = 0.0
        for c in range(n_comp):
            nodes = np.where(comp == c)[0]
            best = max(best, _delta_block(dist, nodes))
        return best
    if mode == "sampled":
        dist = all_pairs_distances(net)
        rng = np.random.default_rng(seed)
        best = 0.0
        chunk = 65536
        remaining = n_samples
        while remaining > 0:
            take = min(chunk, remaining)
            remaining -= take
            q = rng.integers(0, n, size=(take, 4))
            ok = ((q[:, 0] != q[:, 1]) & (q[:, 0] != q[:, 2]) & (q[:, 0] != q[:, 3])
                  & (q[:, 1] != q[:, 2]) & (q[:, 1] != q[:, 3]) & (q[:, 2] != q[:, 3]))
            q = q[ok]
            if len(q) == 0:
                continue
            s1 = dist[q[:, 0], q[:, 1]] + dist[q[:, 2], q[:, 3]]
            s2 = dist[q[:, 0], q[:, 2]] + dist[q[:, 1], q[:, 3]]
            s3 = dist[q[:, 0], q[:, 3]] + dist[q[:, 1], q[:, 2]]
            finite = np.isfinite(s1) & np.isfinite(s2) & np.isfinite(s3)
            if not np.any(finite):
                continue
            hi = np.maximum(np.maximum(s1, s2), s3)[finite]
            lo = np.minimum(np.minimum(s1, s2), s3)[finite]
            mid = (s1 + s2 + s3)[finite] - hi - lo
            best = max(best, float(np.max(hi - mid)) / 2.0)
        return best
    raise DataError(f"unknown mode {mode!r}")

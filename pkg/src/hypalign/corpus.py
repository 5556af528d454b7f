"""Random-walk corpus, context-pair extraction, negative sampling.

Walks are uniform-neighbor (no biasing) and deterministic per seed:
each start node draws its walks from an independent seed stream
SeedSequence([master_seed, node]), so generation order never affects
the corpus. The context of a walk position are the positions within
``window`` steps on either side, aggregated across all walks as a
multiset.

Negative samples follow the unigram^exponent convention with node
degree as the frequency proxy (degree is the stationary visit rate of a
uniform walk on an undirected graph). Samples must avoid the center
node and its graph neighbors.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DataError


@dataclass
class WalkCorpus:
    walks: list
    length: int
    origin: str = ""

    def n_walks(self):
        return len(self.walks)


def random_walks(net, h, l, seed, origin=""):
    """h uniform random walks of l nodes from every non-isolated node."""
    if h < 1 or l < 2:
        raise DataError("need h >= 1 walks of length l >= 2")
    walks = []
    adjacency = [np.asarray(nbrs, dtype=np.int64) for nbrs in net.adjacency]
    for v in range(net.n_nodes):
        nbrs = adjacency[v]
        if len(nbrs) == 0:
            continue
        rng = np.random.default_rng([seed, v])
        for _ in range(h):
            walk = np.empty(l, dtype=np.int64)
            walk[0] = v
            cur = v
            for t in range(1, l):
                cand = adjacency[cur]
                cur = cand[rng.integers(len(cand))]
                walk[t] = cur
            walks.append(walk)
    return WalkCorpus(walks=walks, length=l, origin=origin)


def context_pairs(corpus, window):
    """All ordered (center, context) pairs within the window, as two
    flat index arrays."""
    if window < 1:
        raise DataError("window must be >= 1")
    centers = []
    contexts = []
    for walk in corpus.walks:
        n = len(walk)
        for off in range(1, min(window, n - 1) + 1):
            a = walk[:-off]
            b = walk[off:]
            centers.append(a)
            contexts.append(b)
            centers.append(b)
            contexts.append(a)
    if not centers:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    return np.concatenate(centers), np.concatenate(contexts)


def aggregate_pairs(centers, contexts, n_nodes):
    """Collapse a pair stream to unique (center, context) pairs with
    multiplicities. The weighted pairs define the same objective as the
    raw stream and are far cheaper to iterate."""
    if len(centers) == 0:
        return (np.empty(0, np.int64), np.empty(0, np.int64),
                np.empty(0, np.float64))
    key = centers.astype(np.int64) * n_nodes + contexts
    uniq, cnt = np.unique(key, return_counts=True)
    return uniq // n_nodes, uniq % n_nodes, cnt.astype(np.float64)


def dump_corpus(corpus, net):
    """One walk per line, space-separated node tokens."""
    return "\n".join(" ".join(net.nodes[i] for i in w) for w in corpus.walks) + "\n"


class NegativeSampler:
    """Weighted node sampler with adjacency rejection.

    Node weight is degree**exponent (isolated nodes are never drawn).
    ``sample`` returns K distinct nodes, none equal or adjacent to the
    center. ``sample_batch`` is the vectorized training-path variant:
    it enforces the same non-adjacency constraint but allows repeats
    within a draw, which leaves the expected objective unchanged.
    """

    def __init__(self, net, exponent=0.75):
        if exponent <= 0:
            raise DataError("negative-sampling exponent must be positive")
        deg = net.degree
        if not np.any(deg > 0):
            raise DataError("cannot build a sampler on an edgeless graph")
        weights = deg.astype(float) ** exponent
        weights[deg == 0] = 0.0
        self.exponent = exponent
        self.probs = weights / weights.sum()
        self.cum = np.cumsum(self.probs)
        self.cum[-1] = 1.0
        self._nonzero = int(np.count_nonzero(weights))
        n = net.n_nodes
        if n <= 4096:
            block = np.zeros((n, n), dtype=bool)
            for u, nbrs in enumerate(net.adjacency):
                block[u, nbrs] = True
            np.fill_diagonal(block, True)
            self._block = block
            self._flat = None
        else:
            self._block = None
            self._flat = np.concatenate(
                [np.asarray(a, np.int64) for a in net.adjacency]) if n else np.empty(0, np.int64)
            offs = np.zeros(n + 1, dtype=np.int64)
            for u, a in enumerate(net.adjacency):
                offs[u + 1] = offs[u] + len(a)
            self._offs = offs
        self._adj = net.adjacency
        self._deg = deg

    def _rejected(self, cand, cen):
        if self._block is not None:
            return self._block[cen, cand]
        out = cand == cen
        for i in np.where(~out)[0]:
            s = self._flat[self._offs[cen[i]]:self._offs[cen[i] + 1]]
            j = np.searchsorted(s, cand[i])
            out[i] = j < len(s) and s[j] == cand[i]
        return out

    def eligible_count(self, center):
        deg_pos = self._deg > 0
        bad = np.zeros(len(deg_pos), dtype=bool)
        bad[center] = True
        bad[self._adj[center]] = True
        return int(np.count_nonzero(deg_pos & ~bad))

    def sample(self, center, k, rng):
        """K distinct negatives for one center node."""
        if k < 1:
            raise DataError("k must be >= 1")
        eligible = self.eligible_count(center)
        if eligible < k:
            raise DataError(
                f"only {eligible} eligible negatives for node {center}, need {k}")
        chosen = []
        seen = set()
        while len(chosen) < k:
            cand = int(np.searchsorted(self.cum, rng.random()))
            if cand in seen:
                continue
            if bool(self._rejected(np.array([cand]), np.array([center]))[0]):
                continue
            seen.add(cand)
            chosen.append(cand)
        return chosen

    def sample_batch(self, centers, k, rng, max_rounds=500):
        """(len(centers), k) negatives, vectorized rejection resampling."""
        n_b = len(centers)
        flat = np.empty(n_b * k, dtype=np.int64)
        cen = np.repeat(np.asarray(centers, dtype=np.int64), k)
        need = np.ones(n_b * k, dtype=bool)
        for _ in range(max_rounds):
            m = int(need.sum())
            if m == 0:
                return flat.reshape(n_b, k)
            cand = np.searchsorted(self.cum, rng.random(m))
            flat[need] = cand
            idx = np.where(need)[0]
            bad = self._rejected(cand, cen[idx])
            need[:] = False
            need[idx[bad]] = True
        raise DataError("negative sampling did not converge; "
                        "graph too dense for the requested K")


def build_negative_sampler(net, exponent=0.75):
    return NegativeSampler(net, exponent)


def sample_negatives(sampler, center, k, rng):
    return sampler.sample(center, k, rng)

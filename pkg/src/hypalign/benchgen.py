"""Synthetic aligned-network-pair generator with full ground truth.

A planted-partition base graph is copied twice; each copy independently
drops edges, then anchored users are deleted to reach the requested
overlap rate. Surviving identity pairs become the anchor ground truth
(split into train and test), and the planted community identity map is
the community ground truth. The two copies expose opaque node tokens
("s###" / "t###" in shuffled order), so nothing about the hidden
identity leaks into the graphs a trainer sees.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .graphs import Network, NetworkPair, overlap_rate, subsample_overlap


@dataclass
class SynthSpec:
    n: int = 300
    communities: int = 4
    p_in: float = 0.15
    p_out: float = 0.01
    edge_keep: float = 0.9
    eta: float = 0.6
    train_fraction: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.p_out < self.p_in <= 1:
            raise DataError("need 0 <= p_out < p_in <= 1")
        if not 0 < self.edge_keep <= 1:
            raise DataError("edge_keep must be in (0, 1]")
        if not 0 < self.eta <= 1:
            raise DataError("eta must be in (0, 1]")
        if not 0 <= self.train_fraction <= 1:
            raise DataError("train_fraction must be in [0, 1]")
        if self.n < self.communities:
            raise DataError("need at least one node per community")


def _planted_partition(spec, rng):
    labels = np.arange(spec.n) % spec.communities
    iu, ju = np.triu_indices(spec.n, k=1)
    p_edge = np.where(labels[iu] == labels[ju], spec.p_in, spec.p_out)
    keep = rng.random(len(iu)) < p_edge
    return list(zip(iu[keep].tolist(), ju[keep].tolist())), labels


def _copy(base_edges, labels, keep, prefix, rng):
    edges = [e for e in base_edges if rng.random() < keep]
    n = len(labels)
    perm = rng.permutation(n)  # token order hides the identity
    tokens = [f"{prefix}{perm[i]:04d}" for i in range(n)]
    adjacency = [[] for _ in range(n)]
    for u, v in edges:
        adjacency[u].append(v)
        adjacency[v].append(u)
    for nbrs in adjacency:
        nbrs.sort()
    return Network(nodes=tokens, adjacency=adjacency,
                   labels={i: int(labels[i]) for i in range(n)})


def generate(spec):
    """Draw one ground-truthed pair. Deterministic per seed."""
    rng = np.random.default_rng([spec.seed, 23])
    base_edges, labels = _planted_partition(spec, rng)
    source = _copy(base_edges, labels, spec.edge_keep, "s", rng)
    target = _copy(base_edges, labels, spec.edge_keep, "t", rng)
    identity = {(i, i) for i in range(spec.n)}
    pair = NetworkPair(source=source, target=target, anchors_train=identity,
                       anchors_test=set(),
                       community_truth={(c, c) for c in range(spec.communities)})
    if overlap_rate(pair) > spec.eta:
        pair = subsample_overlap(pair, spec.eta, rng_seed=[spec.seed, 29])
    anchors = sorted(pair.anchors_train)
    order = rng.permutation(len(anchors))
    n_train = int(round(spec.train_fraction * len(anchors)))
    train = {anchors[i] for i in order[:n_train]}
    test = {anchors[i] for i in order[n_train:]}
    surviving = {pair.source.labels[a] for a, _ in anchors}
    return NetworkPair(source=pair.source, target=pair.target,
                       anchors_train=train, anchors_test=test,
                       community_truth={(c, c) for c in sorted(surviving)})

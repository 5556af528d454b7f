"""Network and anchor-link data model, file loaders, protocol helpers.

File formats (UTF-8 text, whitespace separated, '#' starts a comment
line):

* edge list   -- two node tokens per line, undirected, no self-loops
* label file  -- node token, community token
* anchor file -- source token, target token (strictly one-to-one)

Node identity is the string token; integer indices are assigned by first
appearance in the edge file, so file order is canonical and the
index <-> token mapping reproduces across runs.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, ParseError


@dataclass
class Network:
    """An undirected, simple graph with optional community labels.

    adjacency holds sorted neighbor index lists; labels maps node index
    to a community index in 0..C-1. Instances are treated as immutable
    after construction.
    """

    nodes: list
    adjacency: list
    labels: dict | None = None
    community_names: list | None = None

    def __post_init__(self):
        self.index = {tok: i for i, tok in enumerate(self.nodes)}
        if len(self.index) != len(self.nodes):
            raise DataError("duplicate node token")
        for i, nbrs in enumerate(self.adjacency):
            if i in nbrs:
                raise DataError(f"self-loop at node {self.nodes[i]!r}")
        if self.labels is not None:
            for i in self.labels:
                if not 0 <= i < len(self.nodes):
                    raise DataError(f"label references unknown node index {i}")

    @property
    def n_nodes(self):
        return len(self.nodes)

    @property
    def degree(self):
        return np.array([len(a) for a in self.adjacency], dtype=np.int64)

    @property
    def n_edges(self):
        return sum(len(a) for a in self.adjacency) // 2

    def n_communities(self):
        if not self.labels:
            return 0
        return max(self.labels.values()) + 1

    def community_members(self, c):
        return [i for i, lab in (self.labels or {}).items() if lab == c]


@dataclass
class NetworkPair:
    """A source/target network pair with train/test anchor links.

    Anchors are (source index, target index) tuples; each side of an
    anchor appears at most once, and the train and test sets are
    disjoint. community_truth, when known, is a set of
    (source community, target community) pairs.
    """

    source: Network
    target: Network
    anchors_train: set = field(default_factory=set)
    anchors_test: set = field(default_factory=set)
    community_truth: set | None = None

    def __post_init__(self):
        if self.anchors_train & self.anchors_test:
            raise DataError("train and test anchor sets overlap")
        seen_s, seen_t = set(), set()
        for a, b in self.all_anchors():
            if not (0 <= a < self.source.n_nodes and 0 <= b < self.target.n_nodes):
                raise DataError(f"anchor ({a}, {b}) out of range")
            if a in seen_s or b in seen_t:
                raise DataError("anchor sets are not one-to-one")
            seen_s.add(a)
            seen_t.add(b)

    def all_anchors(self):
        return self.anchors_train | self.anchors_test


def _data_lines(text):
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        yield ln, line


def load_edge_list(text):
    """Parse an edge-list file into a Network.

    Nodes are indexed in first-appearance order; duplicate edges are
    deduplicated; each edge is stored in both directions.
    """
    nodes = []
    index = {}
    edges = set()

    def idx(tok):
        if tok not in index:
            index[tok] = len(nodes)
            nodes.append(tok)
        return index[tok]

    for ln, line in _data_lines(text):
        parts = line.split()
        if len(parts) != 2:
            raise ParseError(f"expected 2 tokens, got {len(parts)}", ln)
        a, b = idx(parts[0]), idx(parts[1])
        if a == b:
            raise ParseError(f"self-loop on node {parts[0]!r}", ln)
        edges.add((min(a, b), max(a, b)))

    adjacency = [[] for _ in nodes]
    for a, b in edges:
        adjacency[a].append(b)
        adjacency[b].append(a)
    for nbrs in adjacency:
        nbrs.sort()
    return Network(nodes=nodes, adjacency=adjacency)


def load_labels(text, net):
    """Parse a label file; returns a new Network sharing structure with
    ``net`` but carrying the labels. Community indices follow first
    appearance of the community token."""
    labels = {}
    names = []
    name_idx = {}
    for ln, line in _data_lines(text):
        parts = line.split()
        if len(parts) != 2:
            raise ParseError(f"expected 2 tokens, got {len(parts)}", ln)
        tok, com = parts
        if tok not in net.index:
            raise ParseError(f"unknown node {tok!r}", ln)
        if com not in name_idx:
            name_idx[com] = len(names)
            names.append(com)
        labels[net.index[tok]] = name_idx[com]
    return Network(nodes=net.nodes, adjacency=net.adjacency, labels=labels,
                   community_names=names)


def load_anchors(text, source, target):
    """Parse an anchor file into a set of (source index, target index).

    Unknown tokens and one-to-one violations are errors naming the
    offending token.
    """
    anchors = set()
    seen_s, seen_t = set(), set()
    for ln, line in _data_lines(text):
        parts = line.split()
        if len(parts) != 2:
            raise ParseError(f"expected 2 tokens, got {len(parts)}", ln)
        s_tok, t_tok = parts
        if s_tok not in source.index:
            raise ParseError(f"unknown node {s_tok!r}", ln)
        if t_tok not in target.index:
            raise ParseError(f"unknown node {t_tok!r}", ln)
        a, b = source.index[s_tok], target.index[t_tok]
        if a in seen_s:
            raise ParseError(f"duplicate source {s_tok!r}", ln)
        if b in seen_t:
            raise ParseError(f"duplicate target {t_tok!r}", ln)
        seen_s.add(a)
        seen_t.add(b)
        anchors.add((a, b))
    return anchors


def overlap_rate(pair):
    """Fraction of shared users: 2|A| / (N_s + N_t), in [0, 1]."""
    total = pair.source.n_nodes + pair.target.n_nodes
    if total == 0:
        return 0.0
    return 2.0 * len(pair.all_anchors()) / total


def anchor_community_ratio(c_src, c_tgt, pair):
    """Shared-anchor proportion between two labeled communities:
    2|A_pq| / (|C_p^s| + |C_q^t|). Both communities must be non-empty."""
    src_members = set(pair.source.community_members(c_src))
    tgt_members = set(pair.target.community_members(c_tgt))
    if not src_members or not tgt_members:
        raise DataError("anchor_community_ratio on empty community")
    linking = sum(1 for a, b in pair.all_anchors()
                  if a in src_members and b in tgt_members)
    return 2.0 * linking / (len(src_members) + len(tgt_members))


def _rebuild(net, alive):
    """Restrict ``net`` to the surviving nodes (bool mask), preserving
    token order; returns (network, old index -> new index map)."""
    remap = {}
    nodes = []
    for old, keep in enumerate(alive):
        if keep:
            remap[old] = len(nodes)
            nodes.append(net.nodes[old])
    adjacency = [[] for _ in nodes]
    for old, nbrs in enumerate(net.adjacency):
        if not alive[old]:
            continue
        adjacency[remap[old]] = sorted(remap[v] for v in nbrs if alive[v])
    labels = None
    if net.labels is not None:
        labels = {remap[i]: lab for i, lab in net.labels.items() if alive[i]}
    return Network(nodes=nodes, adjacency=adjacency, labels=labels,
                   community_names=net.community_names), remap


def subsample_overlap(pair, target_eta, rng_seed):
    """Randomly delete anchored users until the overlap rate is as close
    to ``target_eta`` as one deletion allows.

    Each step removes one random side of one random anchor link: the
    node disappears from its network together with its edges, and the
    link is dropped. Deterministic for a fixed seed. target_eta must not
    exceed the current overlap rate.
    """
    current = overlap_rate(pair)
    if target_eta > current + 1e-12:
        raise DataError(
            f"target overlap {target_eta} above current rate {current:.6f}")
    rng = np.random.default_rng(rng_seed)
    anchors = {(a, b): which for which, group in
               (("train", pair.anchors_train), ("test", pair.anchors_test))
               for (a, b) in group}
    alive_s = np.ones(pair.source.n_nodes, dtype=bool)
    alive_t = np.ones(pair.target.n_nodes, dtype=bool)

    def rate():
        return 2.0 * len(anchors) / (alive_s.sum() + alive_t.sum())

    while anchors:
        cur = rate()
        nxt = 2.0 * (len(anchors) - 1) / (alive_s.sum() + alive_t.sum() - 1)
        if cur <= target_eta or abs(nxt - target_eta) >= abs(cur - target_eta):
            break
        keys = sorted(anchors)
        a, b = keys[rng.integers(len(keys))]
        if rng.integers(2) == 0:
            alive_s[a] = False
        else:
            alive_t[b] = False
        del anchors[(a, b)]

    new_s, remap_s = _rebuild(pair.source, alive_s)
    new_t, remap_t = _rebuild(pair.target, alive_t)
    train = {(remap_s[a], remap_t[b]) for (a, b), w in anchors.items() if w == "train"}
    test = {(remap_s[a], remap_t[b]) for (a, b), w in anchors.items() if w == "test"}
    return NetworkPair(source=new_s, target=new_t, anchors_train=train,
                       anchors_test=test, community_truth=pair.community_truth)


def write_edge_list(net):
    lines = [f"{net.nodes[i]} {net.nodes[j]}"
             for i, nbrs in enumerate(net.adjacency) for j in nbrs if i < j]
    return "\n".join(lines) + "\n"


def write_labels(net):
    if net.labels is None:
        raise DataError("network has no labels to write")
    names = net.community_names or [str(c) for c in range(net.n_communities())]
    lines = [f"{net.nodes[i]} {names[lab]}" for i, lab in sorted(net.labels.items())]
    return "\n".join(lines) + "\n"


def write_anchors(anchors, source, target):
    lines = [f"{source.nodes[a]} {target.nodes[b]}" for a, b in sorted(anchors)]
    return "\n".join(lines) + "\n"

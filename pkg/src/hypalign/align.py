"""Alignment inference from a trained model, and the evaluation metrics.

User alignment ranks source candidates by hyperbolic distance to each
target query. Community alignment greedily pairs the globally closest
unmatched component locations (mu) across the two mixtures. For the
label-based metrics, each mixture component is identified with the
label community holding the majority of its hard-assigned members.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from .geometry import distance
from .graphs import anchor_community_ratio


@dataclass
class RankedCandidates:
    """Per-query candidate rankings, ascending by distance, ties broken
    by candidate index."""

    queries: list
    candidates: np.ndarray
    order: dict        # query -> candidate indices, best first
    distances: dict    # query -> distances in the same order

    def rank_of(self, query, candidate):
        """1-based rank of a candidate for a query; None if absent."""
        pos = np.where(self.order[query] == candidate)[0]
        return int(pos[0]) + 1 if len(pos) else None


def rank_users(model, queries, candidates):
    """Rank source candidates for each target query by hyperbolic
    distance between user embeddings."""
    candidates = np.asarray(sorted(candidates), dtype=np.int64)
    if len(candidates) == 0:
        raise DataError("rank_users needs a non-empty candidate set")
    order = {}
    dists = {}
    cand_emb = model.theta_s[candidates]
    for q in queries:
        dvec = distance(cand_emb, model.theta_t[q][None, :])
        idx = np.argsort(dvec, kind="stable")  # candidates pre-sorted: ties go to lower index
        order[q] = candidates[idx]
        dists[q] = dvec[idx]
    return RankedCandidates(queries=list(queries), candidates=candidates,
                            order=order, distances=dists)


def precision_at_k(ranked, truth, k):
    """Fraction of test anchors whose true counterpart ranks within the
    top k."""
    if k < 1:
        raise DataError("k must be >= 1")
    if not truth:
        raise DataError("precision_at_k needs a non-empty truth set")
    hits = 0
    for src, tgt in truth:
        rank = ranked.rank_of(tgt, src)
        if rank is not None and rank <= k:
            hits += 1
    return hits / len(truth)


def map_at_k(ranked, truth, k):
    """Mean reciprocal rank truncated at k. Each query has exactly one
    relevant item, so average precision reduces to 1/rank."""
    if k < 1:
        raise DataError("k must be >= 1")
    if not truth:
        raise DataError("map_at_k needs a non-empty truth set")
    total = 0.0
    for src, tgt in truth:
        rank = ranked.rank_of(tgt, src)
        if rank is not None and rank <= k:
            total += 1.0 / rank
    return total / len(truth)


def align_communities(model):
    """Greedy one-to-one matching of mixture components across the two
    networks by hyperbolic distance between their locations. Returns
    min(C_s, C_t) triples (source component, target component, distance)."""
    mu_s = model.comm_s.locations()
    mu_t = model.comm_t.locations()
    c_s, c_t = len(mu_s), len(mu_t)
    flat = []
    for p in range(c_s):
        d_row = distance(np.broadcast_to(mu_s[p], mu_t.shape), mu_t)
        for q in range(c_t):
            flat.append((float(d_row[q]), p, q))
    flat.sort()
    used_s, used_t = set(), set()
    matches = []
    for d_pq, p, q in flat:
        if p in used_s or q in used_t:
            continue
        used_s.add(p)
        used_t.add(q)
        matches.append((p, q, d_pq))
        if len(matches) == min(c_s, c_t):
            break
    return matches


def component_label_map(comm, net):
    """Map each mixture component to the label community holding the
    majority of its hard-assigned members (-1 for empty components)."""
    if net.labels is None:
        raise DataError("component_label_map needs a labeled network")
    hard = comm.membership.z.argmax(axis=1)
    n_labels = net.n_communities()
    out = []
    for p in range(comm.n_components):
        members = [net.labels[i] for i in np.where(hard == p)[0] if i in net.labels]
        if not members:
            out.append(-1)
            continue
        out.append(int(np.bincount(members, minlength=n_labels).argmax()))
    return out


def truth_anchor_communities(pair, tau):
    """Label-community pairs meeting the shared-anchor threshold tau,
    evaluated on the full anchor set."""
    if pair.source.labels is None or pair.target.labels is None:
        raise DataError("ground-truth communities need labels on both networks")
    out = []
    for p in range(pair.source.n_communities()):
        for q in range(pair.target.n_communities()):
            if not pair.source.community_members(p):
                continue
            if not pair.target.community_members(q):
                continue
            if anchor_community_ratio(p, q, pair) >= tau:
                out.append((p, q))
    return out


def community_accuracy(matches, pair, model, tau):
    """Fraction of ground-truth anchor communities recovered by the
    matched component pairs (components translated to label communities
    by majority membership)."""
    truth = truth_anchor_communities(pair, tau)
    if not truth:
        raise DataError(f"no ground-truth anchor communities at tau={tau}")
    map_s = component_label_map(model.comm_s, pair.source)
    map_t = component_label_map(model.comm_t, pair.target)
    matched_labels = {(map_s[p], map_t[q]) for p, q, _ in matches}
    hits = sum(1 for pq in truth if pq in matched_labels)
    return hits / len(truth)


def quality(matches, pair, model, tau):
    """Mean of 2 * sigma(-d(mu_p^s, mu_q^t)) over the matched pairs that
    correspond to ground-truth anchor communities; always in (0, 1]."""
    truth = set(truth_anchor_communities(pair, tau))
    map_s = component_label_map(model.comm_s, pair.source)
    map_t = component_label_map(model.comm_t, pair.target)
    values = [2.0 / (1.0 + np.exp(d_pq))
              for p, q, d_pq in matches if (map_s[p], map_t[q]) in truth]
    if not values:
        raise DataError("quality: no matched pair corresponds to a "
                        "ground-truth anchor community")
    return float(np.mean(values))


@dataclass
class AlignmentReport:
    """All evaluation output of one align run."""

    precision: dict = field(default_factory=dict)   # k -> value
    map_score: dict = field(default_factory=dict)   # k -> value
    community_matches: list = field(default_factory=list)
    community_accuracy: float | None = None
    quality: float | None = None
    n_queries: int = 0
    n_candidates: int = 0
    config: dict = field(default_factory=dict)

    def as_dict(self):
        return {
            "precision_at_k": {str(k): v for k, v in self.precision.items()},
            "map_at_k": {str(k): v for k, v in self.map_score.items()},
            "community_matches": [list(m) for m in self.community_matches],
            "community_accuracy": self.community_accuracy,
            "quality": self.quality,
            "n_queries": self.n_queries,
            "n_candidates": self.n_candidates,
            "config": self.config,
        }


def evaluate(model, pair, ks=(1, 5, 10, 30), tau=0.6, with_communities=True):
    """Rank test anchors and compute every applicable metric.

    The candidate pool is every source node that is not a training
    anchor; queries are the target sides of the test anchors.
    """
    test = sorted(pair.anchors_test)
    if not test:
        raise DataError("evaluate needs test anchors")
    train_src = {a for a, _ in model.train_anchors}
    candidates = [i for i in range(len(model.tokens_s)) if i not in train_src]
    queries = [b for _, b in test]
    ranked = rank_users(model, queries, candidates)
    report = AlignmentReport(n_queries=len(queries), n_candidates=len(candidates))
    for k in ks:
        report.precision[k] = precision_at_k(ranked, test, k)
        report.map_score[k] = map_at_k(ranked, test, k)
    if with_communities and pair.source.labels and pair.target.labels:
        matches = align_communities(model)
        report.community_matches = matches
        try:
            report.community_accuracy = community_accuracy(matches, pair, model, tau)
            report.quality = quality(matches, pair, model, tau)
        except DataError:
            pass  # no ground-truth communities at this tau; leave unset
    return ranked, report

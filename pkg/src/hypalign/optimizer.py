"""Joint objective, gradient assembly, and the alternating trainer.

The trained objective is

    J1 = O_user + alpha1 * O_community_upper + alpha2 * O_align

where O_user is the negative-sampling skip-gram loss of both networks
(per pair: -log sigma(-d(ctx+, theta)) - sum_neg log sigma(d(ctx-, theta))),
O_align applies the same loss across networks for every training anchor
(the anchor's user embedding predicts its counterpart's contexts, in
both directions), and O_community_upper is the Jensen upper bound of
the mixture negative log-likelihood, whose gradient in theta_i is

    sum_p Z_ip [ Delta_p^{-1} beta_p
                 + sqrt(nu_p / dtil) * (K_{zeta-1}(u)/K_{zeta}(u)) * Delta_p^{-1}(theta_i - mu_p) ]

with nu_p = omega + beta' Delta^{-1} beta, zeta = r - d/2,
dtil = omega + delta_theta and u = sqrt(nu_p * dtil). (The zeta/dtil
terms of the quotient rule cancel against the Bessel derivative
identity dK_r(x)/dx = -(r/x) K_r(x) - K_{r-1}(x).) Every assembled
gradient is checked against central finite differences of J1 in the
test suite.

Training alternates EM over each network's mixture (embeddings fixed)
with Riemannian SGD epochs over the embeddings (mixture fixed),
stopping on relative J1 change below ``converge_tol`` or after
``outer_iters`` rounds. Three stabilizers, all standard for Poincare
SGD and all recorded in the run config:

* per-update step cap: the hyperbolic step length lambda_x * ||a|| is
  clipped at ``step_cap`` (the distance gradient is singular at
  coincident pairs, so raw steps can catapult points to the rim);
* occurrence-weighted unique context pairs: the multiset of (center,
  context) pairs is collapsed to unique pairs with multiplicities,
  an equivalent but far cheaper form of the same objective;
* gauge fixing: the loss only constrains pairwise distances, so each
  outer iteration Mobius-translates the common ball to put the Karcher
  mean of all user embeddings at the origin. All distances (hence all
  downstream metrics) are unchanged; coordinate norms become
  comparable across runs.

In deterministic mode (default) everything runs single-threaded off
seeded generators and checkpoints are bit-reproducible. With
``deterministic=False`` and ``threads > 1`` the SGD epochs shard their
batches across a thread pool with unsynchronized (hogwild) updates;
that mode is not bit-reproducible.
"""

from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .corpus import NegativeSampler, aggregate_pairs, context_pairs, random_walks
from .errors import DataError
from .geometry import (distance, distance_grad_y, distance_with_grads, exp_map,
                       karcher_mean, project_to_ball, recenter,
                       riemannian_rescale)
from .mixture import (CommunityModel, Membership, community_nll_upper, e_step,
                      fit_mixture, log_bessel_k)
from .model import JointModel, TrainConfig


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-np.asarray(x, dtype=float)))


def _log_sigmoid(x):
    # -log(1 + e^{-x}) without overflow for very negative x
    x = np.asarray(x, dtype=float)
    return np.where(x >= 0, -np.log1p(np.exp(-np.abs(x))),
                    x - np.log1p(np.exp(-np.abs(x))))


def pair_loss(center, positive, negatives):
    """-log sigma(-d(pos, center)) - sum_n log sigma(d(neg_n, center))."""
    center = np.asarray(center, dtype=float)
    d_pos = distance(positive, center)
    loss = -_log_sigmoid(-d_pos)
    for neg in negatives:
        loss -= _log_sigmoid(distance(neg, center))
    return float(loss)


def rsgd_step(x, g_euclidean, rho):
    """One Riemannian SGD update:
    exp_map(x, -rho * riemannian_rescale(x, g)), projected."""
    return exp_map(x, -rho * riemannian_rescale(x, g_euclidean))


# ---------------------------------------------------------------------------
# per-node gradient assembly (reference path; the trainer uses the
# batched equivalents below)
# ---------------------------------------------------------------------------


def _skipgram_grad_center(theta, ctx_arr, contexts):
    """Gradient of the sampled skip-gram loss wrt the center embedding.
    ``contexts`` is a sequence of (positive index, negative index list)."""
    g = np.zeros_like(theta)
    for j, negs in contexts:
        pos = ctx_arr[j]
        g += sigmoid(distance(pos, theta)) * distance_grad_y(pos, theta)
        for n in negs:
            neg = ctx_arr[n]
            g -= sigmoid(-distance(neg, theta)) * distance_grad_y(neg, theta)
    return g


def community_user_grad(thetas, comm):
    """Batched gradient of O_community_upper wrt every user embedding."""
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    d = thetas.shape[1]
    grad = np.zeros_like(thetas)
    z = comm.membership.z
    for p, psi in enumerate(comm.components):
        td = thetas - psi.mu
        delta_t = np.einsum("ni,ij,nj->n", td, psi.inv, td)
        nu = psi.omega + psi.skew_form()
        zeta = psi.r - d / 2.0
        dtil = psi.omega + delta_t
        u = np.sqrt(nu * dtil)
        ratio = np.exp(log_bessel_k(zeta - 1.0, u) - log_bessel_k(zeta, u))
        coef = np.sqrt(nu / dtil) * ratio
        grad += z[:, p, None] * ((psi.inv @ psi.beta)[None, :]
                                 + coef[:, None] * (td @ psi.inv))
    return grad


def grad_user(model, tag, i, contexts, partner=None, partner_contexts=()):
    """Euclidean gradient of J1 wrt user embedding theta_i.

    ``contexts`` are sampled (positive, negatives) entries from node
    i's own network; when the node is anchored, ``partner_contexts``
    are sampled entries from the partner's neighborhood in the other
    network (the cross prediction the alignment term adds). The
    community and alignment terms enter with their alpha weights; with
    alpha1 = alpha2 = 0 this reduces to the plain skip-gram gradient.
    """
    own_theta = model.theta_s if tag == "s" else model.theta_t
    own_ctx = model.ctx_s if tag == "s" else model.ctx_t
    other_ctx = model.ctx_t if tag == "s" else model.ctx_s
    comm = model.comm_s if tag == "s" else model.comm_t
    theta = own_theta[i]
    g = _skipgram_grad_center(theta, own_ctx, contexts)
    if model.config.alpha1 > 0:
        g += model.config.alpha1 * community_user_grad(
            theta[None, :], _slice_comm(comm, i))[0]
    if partner is not None and model.config.alpha2 > 0:
        g += model.config.alpha2 * _skipgram_grad_center(
            theta, other_ctx, partner_contexts)
    return g


def _slice_comm(comm, i):
    """Single-row view of a community model (responsibilities of one node)."""
    row = comm.membership.z[i:i + 1]
    return CommunityModel(components=comm.components,
                          membership=Membership(z=row, priors=comm.membership.priors))


def grad_context(model, tag, j, incident):
    """Euclidean gradient of J1 wrt context embedding ctx_j.

    ``incident`` lists this node's appearances in sampled pairs as
    (center_tag, center_index, role) with role +1 for a positive
    occurrence and -1 for a negative one. Cross-network occurrences
    (center_tag != tag) are the alignment term and carry alpha2; the
    community objective never touches context embeddings.
    """
    ctx_arr = model.ctx_s if tag == "s" else model.ctx_t
    point = ctx_arr[j]
    g = np.zeros_like(point)
    for center_tag, c_idx, role in incident:
        center = (model.theta_s if center_tag == "s" else model.theta_t)[c_idx]
        weight = 1.0 if center_tag == tag else model.config.alpha2
        if role > 0:
            g += weight * sigmoid(distance(point, center)) * distance_grad_y(center, point)
        else:
            g -= weight * sigmoid(-distance(point, center)) * distance_grad_y(center, point)
    return g


# ---------------------------------------------------------------------------
# batched SGD internals
# ---------------------------------------------------------------------------


def _accumulate(n, idx, contrib):
    out = np.empty((n, contrib.shape[1]))
    for k in range(contrib.shape[1]):
        out[:, k] = np.bincount(idx, weights=contrib[:, k], minlength=n)
    return out


def _capped_update(points, grad, rho, cap):
    lam = 2.0 / (1.0 - np.sum(points * points, axis=1, keepdims=True))
    step = rho * np.linalg.norm(grad, axis=1, keepdims=True) / lam
    if cap > 0:
        grad = grad * np.minimum(1.0, cap / np.maximum(step, 1e-300))
    return exp_map(points, -rho * riemannian_rescale(points, grad))


def _pair_batches(theta, ctx, i_arr, j_arr, w_arr, sampler, k, rho, rng,
                  weight, cap, batch_size, reject_nodes=None, loss_only=False):
    """One weighted pass over a (center, context, count) pair stream.

    Centers index ``theta``, contexts and negatives index ``ctx``
    (different arrays for the cross-network streams). ``reject_nodes``
    chooses the node whose neighborhood constrains the negatives; for
    cross streams that is the center's anchored counterpart in the
    context network. Returns the summed weighted loss.
    """
    n_th = theta.shape[0]
    n_ctx = ctx.shape[0]
    d = theta.shape[1]
    order = rng.permutation(len(i_arr))
    total = 0.0
    for s in range(0, len(order), batch_size):
        sel = order[s:s + batch_size]
        ci = i_arr[sel]
        cj = j_arr[sel]
        w = w_arr[sel][:, None]
        rej = ci if reject_nodes is None else reject_nodes[sel]
        neg = sampler.sample_batch(rej, k, rng)
        x_c = theta[ci]
        d_pos, g_ctx_pos, g_th_pos, _ = distance_with_grads(ctx[cj], x_c)
        d_neg, g_ctx_neg, g_th_neg, _ = distance_with_grads(ctx[neg], x_c[:, None, :])
        total += weight * float(np.sum(w[:, 0] * -_log_sigmoid(-d_pos))
                                + np.sum(w * -_log_sigmoid(d_neg)))
        if loss_only:
            continue
        c_pos = w * sigmoid(d_pos)[:, None]
        c_neg = w[:, :, None] * sigmoid(-d_neg)[:, :, None]
        g_center = c_pos * g_th_pos - (c_neg * g_th_neg).sum(axis=1)
        grad_theta = _accumulate(n_th, ci, weight * g_center)
        grad_ctx = (_accumulate(n_ctx, cj, weight * c_pos * g_ctx_pos)
                    + _accumulate(n_ctx, neg.reshape(-1),
                                  (-weight * c_neg * g_ctx_neg).reshape(-1, d)))
        theta[:] = _capped_update(theta, grad_theta, rho, cap)
        ctx[:] = _capped_update(ctx, grad_ctx, rho, cap)
    return total


class _Stream:
    """A weighted pair stream bound to its embedding arrays and sampler."""

    def __init__(self, theta, ctx, i_arr, j_arr, w_arr, sampler, weight,
                 reject_nodes=None):
        self.theta = theta
        self.ctx = ctx
        self.i_arr = i_arr
        self.j_arr = j_arr
        self.w_arr = w_arr
        self.sampler = sampler
        self.weight = weight
        self.reject_nodes = reject_nodes

    def run(self, k, rho, rng, cap, batch_size, loss_only=False, threads=1):
        if len(self.i_arr) == 0:
            return 0.0
        if threads <= 1 or loss_only:
            return _pair_batches(self.theta, self.ctx, self.i_arr, self.j_arr,
                                 self.w_arr, self.sampler, k, rho, rng,
                                 self.weight, cap, batch_size,
                                 self.reject_nodes, loss_only)
        # hogwild sharding: workers update the shared arrays unsynchronized
        shards = np.array_split(rng.permutation(len(self.i_arr)), threads)
        seeds = rng.integers(0, 2**63 - 1, size=len(shards))
        def work(args):
            shard, seed = args
            if len(shard) == 0:
                return 0.0
            local = np.random.default_rng(seed)
            rej = None if self.reject_nodes is None else self.reject_nodes[shard]
            return _pair_batches(self.theta, self.ctx, self.i_arr[shard],
                                 self.j_arr[shard], self.w_arr[shard],
                                 self.sampler, k, rho, local, self.weight,
                                 cap, batch_size, rej, False)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return float(sum(pool.map(work, zip(shards, seeds))))


# ---------------------------------------------------------------------------
# the alternating trainer
# ---------------------------------------------------------------------------


def _init_points(n, d, rng, radius=1e-3):
    direction = rng.normal(size=(n, d))
    direction /= np.maximum(np.linalg.norm(direction, axis=1, keepdims=True), 1e-300)
    radii = radius * rng.uniform(0.0, 1.0, size=(n, 1)) ** (1.0 / d)
    return project_to_ball(direction * radii)


def _cross_streams(pairs_by_net, anchors):
    """Split each network's pair stream at the train anchors: for anchor
    (a, b), node a's cross stream re-targets b's in-network contexts."""
    (i_s, j_s, w_s), (i_t, j_t, w_t) = pairs_by_net
    a2b = dict(anchors)
    b2a = {b: a for a, b in anchors}
    sel_t = np.isin(i_t, np.fromiter(b2a.keys(), np.int64, len(b2a)))
    cross_s_i = np.array([b2a[x] for x in i_t[sel_t]], dtype=np.int64)
    sel_s = np.isin(i_s, np.fromiter(a2b.keys(), np.int64, len(a2b)))
    cross_t_i = np.array([a2b[x] for x in i_s[sel_s]], dtype=np.int64)
    return ((cross_s_i, j_t[sel_t], w_t[sel_t], i_t[sel_t]),
            (cross_t_i, j_s[sel_s], w_s[sel_s], i_s[sel_s]))


def train(pair, cfg=None, progress=None):
    """Run the alternating optimization on a network pair.

    Line by line: random walks per network, embedding warm-up on the
    skip-gram objective alone, then outer iterations that first run EM
    over each network's mixture with embeddings fixed and then run SGD
    epochs over the embeddings with the mixture fixed. Stops early when
    the relative change of the sampled objective drops below
    ``cfg.converge_tol``. Returns a JointModel whose ``history`` lists
    the objective at every outer iteration.
    """
    cfg = cfg or TrainConfig()
    if cfg.alpha2 > 0 and not pair.anchors_train:
        raise DataError("alignment weight alpha2 > 0 requires training anchors")
    rng = np.random.default_rng([cfg.seed, 7])
    nets = (pair.source, pair.target)
    n_s, n_t = pair.source.n_nodes, pair.target.n_nodes

    corpora = [random_walks(nets[0], cfg.walks_per_node, cfg.walk_length,
                            seed=cfg.seed * 4 + 1, origin="s"),
               random_walks(nets[1], cfg.walks_per_node, cfg.walk_length,
                            seed=cfg.seed * 4 + 2, origin="t")]
    pairs_by_net = []
    for corpus, net in zip(corpora, nets):
        i_arr, j_arr = context_pairs(corpus, cfg.window)
        pairs_by_net.append(aggregate_pairs(i_arr, j_arr, net.n_nodes))
    samplers = [NegativeSampler(net, cfg.neg_exponent) for net in nets]

    d = cfg.dim
    theta_s = _init_points(n_s, d, rng)
    ctx_s = _init_points(n_s, d, rng)
    theta_t = _init_points(n_t, d, rng)
    ctx_t = _init_points(n_t, d, rng)

    streams = [
        _Stream(theta_s, ctx_s, *pairs_by_net[0], samplers[0], 1.0),
        _Stream(theta_t, ctx_t, *pairs_by_net[1], samplers[1], 1.0),
    ]
    cross = []
    if cfg.alpha2 > 0 and pair.anchors_train:
        anchors = sorted(pair.anchors_train)
        (si, sj, sw, srej), (ti, tj, tw, trej) = _cross_streams(pairs_by_net, anchors)
        cross = [
            _Stream(theta_s, ctx_t, si, sj, sw, samplers[1], cfg.alpha2, srej),
            _Stream(theta_t, ctx_s, ti, tj, tw, samplers[0], cfg.alpha2, trej),
        ]

    threads = 1 if cfg.deterministic else max(1, cfg.threads)

    for _ in range(cfg.warmup_epochs):
        for stream in streams:
            stream.run(cfg.k_negative, cfg.rho / 10.0, rng, cfg.step_cap,
                       cfg.batch_size, threads=threads)

    comm_s = comm_t = None
    history = []
    reinits = []
    def _fix_gauge():
        # anchored networks share one ball, so they translate together;
        # without cross terms each layout is centered independently
        if cross:
            center = karcher_mean(np.vstack([theta_s, theta_t]))
            theta_s[:], ctx_s[:], theta_t[:], ctx_t[:] = recenter(
                center, theta_s, ctx_s, theta_t, ctx_t)
        else:
            theta_s[:], ctx_s[:] = recenter(karcher_mean(theta_s), theta_s, ctx_s)
            theta_t[:], ctx_t[:] = recenter(karcher_mean(theta_t), theta_t, ctx_t)

    for outer in range(cfg.outer_iters):
        rho_o = cfg.rho / (1.0 + cfg.rho_decay * outer)
        _fix_gauge()
        if cfg.alpha1 > 0:
            comm_s = fit_mixture(theta_s, cfg.c_source, cfg.em_iters_per_outer,
                                 rng, r=cfg.r, omega=cfg.omega,
                                 moment_assignment=cfg.moment_assignment,
                                 on_reinit=lambda p: reinits.append(("s", outer, p)))
            comm_t = fit_mixture(theta_t, cfg.c_target, cfg.em_iters_per_outer,
                                 rng, r=cfg.r, omega=cfg.omega,
                                 moment_assignment=cfg.moment_assignment,
                                 on_reinit=lambda p: reinits.append(("t", outer, p)))
        for _ in range(cfg.sgd_epochs_per_outer):
            for stream in streams + cross:
                stream.run(cfg.k_negative, rho_o, rng, cfg.step_cap,
                           cfg.batch_size, threads=threads)
            if cfg.alpha1 > 0:
                theta_s[:] = _capped_update(
                    theta_s, cfg.alpha1 * community_user_grad(theta_s, comm_s),
                    rho_o, cfg.step_cap)
                theta_t[:] = _capped_update(
                    theta_t, cfg.alpha1 * community_user_grad(theta_t, comm_t),
                    rho_o, cfg.step_cap)
        value = _objective(streams, cross, cfg, rng,
                           (theta_s, comm_s), (theta_t, comm_t))
        history.append(value)
        if progress is not None:
            progress(outer, value)
        if len(history) >= 2:
            prev = history[-2]
            if abs(prev - value) < cfg.converge_tol * max(1.0, abs(prev)):
                break

    _fix_gauge()
    if cfg.alpha1 > 0:
        comm_s = fit_mixture(theta_s, cfg.c_source, cfg.em_iters_per_outer, rng,
                             r=cfg.r, omega=cfg.omega,
                             moment_assignment=cfg.moment_assignment)
        comm_t = fit_mixture(theta_t, cfg.c_target, cfg.em_iters_per_outer, rng,
                             r=cfg.r, omega=cfg.omega,
                             moment_assignment=cfg.moment_assignment)
    else:
        # with the community weight off, parameters stay at their
        # initialization; only the membership is evaluated for the model
        comm_s = _initial_community(theta_s, cfg.c_source, rng, cfg)
        comm_t = _initial_community(theta_t, cfg.c_target, rng, cfg)

    return JointModel(tokens_s=list(pair.source.nodes),
                      tokens_t=list(pair.target.nodes),
                      theta_s=theta_s, theta_t=theta_t,
                      ctx_s=ctx_s, ctx_t=ctx_t,
                      comm_s=comm_s, comm_t=comm_t,
                      config=cfg, train_anchors=set(pair.anchors_train),
                      history=history)


def _initial_community(thetas, n_comp, rng, cfg):
    from .mixture import init_mixture
    components, priors = init_mixture(thetas, n_comp, rng, r=cfg.r, omega=cfg.omega)
    stats = e_step(thetas, components, priors, cfg.moment_assignment)
    return CommunityModel(components=components,
                          membership=Membership(z=stats.z, priors=priors))


def _objective(streams, cross, cfg, rng, source_state, target_state):
    """Sampled J1 at the current state (loss-only passes, fresh negatives)."""
    total = 0.0
    for stream in streams + cross:
        total += stream.run(cfg.k_negative, 0.0, rng, cfg.step_cap,
                            cfg.batch_size, loss_only=True)
    if cfg.alpha1 > 0:
        for theta, comm in (source_state, target_state):
            if comm is not None:
                total += cfg.alpha1 * community_nll_upper(
                    theta, comm.membership.z, comm.components)
    return total

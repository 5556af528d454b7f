"""Joint model container, training configuration, checkpoint format.

The checkpoint is versioned tab-separated text: a header echoing the
configuration, then per-node token + coordinates for the user and
context embeddings of each network, the mixture parameters and
membership rows per network, and the train-anchor token pairs. Floats
are written with 17 significant digits, which round-trips IEEE doubles
exactly.
"""

from dataclasses import dataclass, field, asdict

import numpy as np

from .errors import DataError
from .mixture import CommunityModel, GHParams, Membership

FORMAT_NAME = "hypalign-checkpoint"
FORMAT_VERSION = 1


@dataclass
class TrainConfig:
    """Hyperparameters of the alternating training loop.

    All values are recorded in run reports and checkpoints. r and omega
    are the fixed GH index/concentration hyperparameters (their update
    strategy is out of scope).
    """

    dim: int = 10
    k_negative: int = 10
    walks_per_node: int = 10
    walk_length: int = 40
    window: int = 5
    alpha1: float = 0.1
    alpha2: float = 1.0
    rho: float = 0.15
    rho_decay: float = 0.01
    outer_iters: int = 10
    em_iters_per_outer: int = 5
    sgd_epochs_per_outer: int = 2
    warmup_epochs: int = 5
    seed: int = 0
    deterministic: bool = True
    threads: int = 1
    r: float = 1.0
    omega: float = 1.0
    c_source: int = 2
    c_target: int = 2
    tau: float = 0.6
    neg_exponent: float = 0.75
    step_cap: float = 1.0
    batch_size: int = 16384
    converge_tol: float = 1e-4
    moment_assignment: str = "recurrence"

    def __post_init__(self):
        if self.k_negative < 1:
            raise DataError("k_negative must be >= 1")
        for name in ("dim", "walks_per_node", "walk_length", "window",
                     "outer_iters", "em_iters_per_outer", "sgd_epochs_per_outer",
                     "c_source", "c_target", "batch_size"):
            if getattr(self, name) < 1:
                raise DataError(f"{name} must be >= 1")
        if self.alpha1 < 0 or self.alpha2 < 0:
            raise DataError("alpha weights must be nonnegative")
        if self.rho <= 0 or self.omega <= 0:
            raise DataError("rho and omega must be positive")

    def as_dict(self):
        return asdict(self)


@dataclass
class JointModel:
    """Trained embeddings of a network pair sharing one Poincare ball."""

    tokens_s: list
    tokens_t: list
    theta_s: np.ndarray
    theta_t: np.ndarray
    ctx_s: np.ndarray
    ctx_t: np.ndarray
    comm_s: CommunityModel
    comm_t: CommunityModel
    config: TrainConfig
    train_anchors: set = field(default_factory=set)
    history: list = field(default_factory=list)

    @property
    def dim(self):
        return self.theta_s.shape[1]


def _fmt(x):
    return format(float(x), ".17g")


def _matrix_lines(name, tokens, arr):
    lines = [f"[{name}]"]
    for tok, row in zip(tokens, arr):
        lines.append(tok + "\t" + "\t".join(_fmt(v) for v in row))
    return lines


def _mixture_lines(name, comm):
    lines = [f"[{name}]"]
    lines.append(f"components\t{comm.n_components}")
    for p, psi in enumerate(comm.components):
        lines.append(f"component\t{p}")
        lines.append("mu\t" + "\t".join(_fmt(v) for v in psi.mu))
        lines.append("beta\t" + "\t".join(_fmt(v) for v in psi.beta))
        for row in psi.delta_mat:
            lines.append("delta\t" + "\t".join(_fmt(v) for v in row))
        lines.append(f"r\t{_fmt(psi.r)}")
        lines.append(f"omega\t{_fmt(psi.omega)}")
        lines.append(f"prior\t{_fmt(comm.membership.priors[p])}")
    lines.append("[membership]")
    for row in comm.membership.z:
        lines.append("\t".join(_fmt(v) for v in row))
    return lines


def save_checkpoint(model, path):
    cfg = model.config.as_dict()
    lines = [f"{FORMAT_NAME}\t{FORMAT_VERSION}",
             f"dim\t{model.dim}",
             f"n_source\t{len(model.tokens_s)}",
             f"n_target\t{len(model.tokens_t)}"]
    lines.append("[config]")
    for key in sorted(cfg):
        lines.append(f"{key}\t{cfg[key]}")
    lines += _matrix_lines("theta source", model.tokens_s, model.theta_s)
    lines += _matrix_lines("context source", model.tokens_s, model.ctx_s)
    lines += _matrix_lines("theta target", model.tokens_t, model.theta_t)
    lines += _matrix_lines("context target", model.tokens_t, model.ctx_t)
    lines += _mixture_lines("mixture source", model.comm_s)
    lines += _mixture_lines("mixture target", model.comm_t)
    lines.append("[train anchors]")
    for a, b in sorted(model.train_anchors):
        lines.append(f"{model.tokens_s[a]}\t{model.tokens_t[b]}")
    lines.append("[history]")
    for value in model.history:
        lines.append(_fmt(value))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


class _Reader:
    def __init__(self, lines):
        self.lines = lines
        self.pos = 0

    def peek(self):
        return self.lines[self.pos] if self.pos < len(self.lines) else None

    def next(self):
        line = self.peek()
        if line is None:
            raise DataError("unexpected end of checkpoint")
        self.pos += 1
        return line

    def expect(self, header):
        line = self.next()
        if line != header:
            raise DataError(f"expected {header!r}, found {line!r}")


def _read_matrix(reader, header, n, d):
    reader.expect(header)
    tokens = []
    arr = np.empty((n, d))
    for i in range(n):
        parts = reader.next().split("\t")
        if len(parts) != d + 1:
            raise DataError(f"bad row in {header}")
        tokens.append(parts[0])
        arr[i] = [float(v) for v in parts[1:]]
    return tokens, arr


def _read_mixture(reader, header, d, n):
    reader.expect(header)
    n_comp = int(reader.next().split("\t")[1])
    comps = []
    priors = []
    for _ in range(n_comp):
        reader.expect(f"component\t{len(comps)}")
        mu = np.array([float(v) for v in reader.next().split("\t")[1:]])
        beta = np.array([float(v) for v in reader.next().split("\t")[1:]])
        delta = np.array([[float(v) for v in reader.next().split("\t")[1:]]
                          for _ in range(d)])
        r = float(reader.next().split("\t")[1])
        omega = float(reader.next().split("\t")[1])
        priors.append(float(reader.next().split("\t")[1]))
        comps.append(GHParams(mu=mu, delta_mat=delta, beta=beta, r=r, omega=omega))
    reader.expect("[membership]")
    z = np.array([[float(v) for v in reader.next().split("\t")]
                  for _ in range(n)])
    membership = Membership(z=z, priors=np.array(priors))
    return CommunityModel(components=comps, membership=membership)


def _parse_config(pairs):
    defaults = TrainConfig()
    kwargs = {}
    for key, raw in pairs.items():
        current = getattr(defaults, key, None)
        if current is None and key not in TrainConfig.__dataclass_fields__:
            continue
        kind = type(current)
        if kind is bool:
            kwargs[key] = raw == "True"
        elif kind is int:
            kwargs[key] = int(raw)
        elif kind is float:
            kwargs[key] = float(raw)
        else:
            kwargs[key] = raw
    return TrainConfig(**kwargs)


def load_checkpoint(path):
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    reader = _Reader(lines)
    head = reader.next().split("\t")
    if len(head) != 2 or head[0] != FORMAT_NAME:
        raise DataError(f"not a {FORMAT_NAME} file: {path}")
    _, version = head
    if int(version) != FORMAT_VERSION:
        raise DataError(f"unsupported checkpoint version {version}")
    dim = int(reader.next().split("\t")[1])
    n_s = int(reader.next().split("\t")[1])
    n_t = int(reader.next().split("\t")[1])
    reader.expect("[config]")
    cfg_pairs = {}
    while reader.peek() is not None and not reader.peek().startswith("["):
        key, raw = reader.next().split("\t", 1)
        cfg_pairs[key] = raw
    config = _parse_config(cfg_pairs)
    tokens_s, theta_s = _read_matrix(reader, "[theta source]", n_s, dim)
    _, ctx_s = _read_matrix(reader, "[context source]", n_s, dim)
    tokens_t, theta_t = _read_matrix(reader, "[theta target]", n_t, dim)
    _, ctx_t = _read_matrix(reader, "[context target]", n_t, dim)
    comm_s = _read_mixture(reader, "[mixture source]", dim, n_s)
    comm_t = _read_mixture(reader, "[mixture target]", dim, n_t)
    reader.expect("[train anchors]")
    idx_s = {tok: i for i, tok in enumerate(tokens_s)}
    idx_t = {tok: i for i, tok in enumerate(tokens_t)}
    anchors = set()
    while reader.peek() is not None and not reader.peek().startswith("["):
        s_tok, t_tok = reader.next().split("\t")
        anchors.add((idx_s[s_tok], idx_t[t_tok]))
    history = []
    if reader.peek() == "[history]":
        reader.next()
        while reader.peek() is not None and not reader.peek().startswith("["):
            history.append(float(reader.next()))
    return JointModel(tokens_s=tokens_s, tokens_t=tokens_t,
                      theta_s=theta_s, theta_t=theta_t,
                      ctx_s=ctx_s, ctx_t=ctx_t,
                      comm_s=comm_s, comm_t=comm_t,
                      config=config, train_anchors=anchors, history=history)

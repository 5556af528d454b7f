"""Command-line interface.

Subcommands: delta, synth, train, align, emit-plot. Every run writes a
report (report.txt key=value plus report.json) into the output
directory echoing the effective configuration and the library version;
report-producing commands also render figures next to their delimited
output.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical
failure. A flat key=value config file can seed any train option;
command-line flags win.
"""

import argparse
import json
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import __version__
from .align import evaluate
from .benchgen import SynthSpec, generate
from .errors import DataError, NumericalError
from .graphs import (NetworkPair, load_anchors, load_edge_list, load_labels,
                     write_anchors, write_edge_list, write_labels, Network)
from .hyperbolicity import graph_delta
from .model import TrainConfig, load_checkpoint, save_checkpoint
from .optimizer import train
from . import plots


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        sys.exit(1)


def _read_text(path):
    p = Path(path)
    if not p.exists():
        raise DataError(f"no such file: {path}")
    return p.read_text("utf-8")


def _write_report(outdir, command, payload):
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    payload = {"command": command, "version": __version__, **payload}
    lines = []

    def flatten(prefix, obj):
        if isinstance(obj, dict):
            for key, value in obj.items():
                flatten(f"{prefix}{key}.", value)
        else:
            lines.append(f"{prefix.rstrip('.')}={obj}")

    flatten("", payload)
    (outdir / "report.txt").write_text("\n".join(lines) + "\n", "utf-8")
    (outdir / "report.json").write_text(json.dumps(payload, indent=2, default=str) + "\n",
                                        "utf-8")


def _load_config_file(path):
    values = {}
    for ln, raw in enumerate(_read_text(path).splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise DataError(f"config line {ln}: expected key=value")
        key, val = line.split("=", 1)
        values[key.strip()] = val.strip()
    return values


_CONFIG_TYPES = {f.name: type(getattr(TrainConfig(), f.name))
                 for f in fields(TrainConfig)}


def _coerce(name, raw):
    kind = _CONFIG_TYPES[name]
    if kind is bool:
        return raw in ("True", "true", "1")
    return kind(raw)


def _build_train_config(args):
    base = {}
    if args.config:
        base = _load_config_file(args.config)
    kwargs = {}
    for name in _CONFIG_TYPES:
        if name in base:
            kwargs[name] = _coerce(name, base[name])
        flag = getattr(args, name, None)
        if flag is not None:
            kwargs[name] = flag
    return TrainConfig(**kwargs)


def _add_train_flags(sub):
    for name, kind in _CONFIG_TYPES.items():
        flag = "--" + name.replace("_", "-")
        if kind is bool:
            sub.add_argument(flag, type=lambda s: s in ("true", "True", "1"),
                             default=None, metavar="true|false")
        else:
            sub.add_argument(flag, type=kind, default=None)


def cmd_delta(args):
    net = load_edge_list(_read_text(args.graph))
    value = graph_delta(net, mode=args.mode, n_samples=args.samples,
                        seed=args.seed, exact_cap=args.cap)
    if args.mode == "exact":
        from math import comb
        examined = comb(net.n_nodes, 4)
    else:
        examined = args.samples
    print(f"# hypalign {__version__} mode={args.mode} samples={args.samples} "
          f"seed={args.seed} cap={args.cap}")
    print(f"delta {value}")
    print(f"quadruples {examined}")
    if args.out:
        _write_report(args.out, "delta", {
            "graph": args.graph, "mode": args.mode, "seed": args.seed,
            "samples": args.samples, "delta": value, "quadruples": examined})
    return 0


def cmd_synth(args):
    spec = SynthSpec(n=args.n, communities=args.communities, p_in=args.p_in,
                     p_out=args.p_out, edge_keep=args.edge_keep, eta=args.eta,
                     train_fraction=args.train_fraction, seed=args.seed)
    pair = generate(spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "source.edges").write_text(write_edge_list(pair.source), "utf-8")
    (out / "target.edges").write_text(write_edge_list(pair.target), "utf-8")
    (out / "source.labels").write_text(write_labels(pair.source), "utf-8")
    (out / "target.labels").write_text(write_labels(pair.target), "utf-8")
    (out / "anchors_train.txt").write_text(
        write_anchors(pair.anchors_train, pair.source, pair.target), "utf-8")
    (out / "anchors_test.txt").write_text(
        write_anchors(pair.anchors_test, pair.source, pair.target), "utf-8")
    (out / "communities_truth.txt").write_text(
        "\n".join(f"{p} {q}" for p, q in sorted(pair.community_truth)) + "\n", "utf-8")
    _write_report(args.out, "synth", {
        "spec": {"n": spec.n, "communities": spec.communities,
                 "p_in": spec.p_in, "p_out": spec.p_out,
                 "edge_keep": spec.edge_keep, "eta": spec.eta,
                 "train_fraction": spec.train_fraction, "seed": spec.seed},
        "n_source": pair.source.n_nodes, "n_target": pair.target.n_nodes,
        "edges_source": pair.source.n_edges, "edges_target": pair.target.n_edges,
        "anchors_train": len(pair.anchors_train),
        "anchors_test": len(pair.anchors_test)})
    print(f"wrote pair to {out}")
    return 0


def cmd_train(args):
    source = load_edge_list(_read_text(args.source))
    target = load_edge_list(_read_text(args.target))
    anchors = load_anchors(_read_text(args.anchors), source, target)
    pair = NetworkPair(source=source, target=target, anchors_train=anchors)
    cfg = _build_train_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    model = train(pair, cfg)
    save_checkpoint(model, out / "model.ckpt")
    (out / "train_log.txt").write_text(
        "\n".join(f"{i + 1}\t{v:.17g}" for i, v in enumerate(model.history)) + "\n",
        "utf-8")
    figdir = out / "figures"
    figdir.mkdir(exist_ok=True)
    if model.history:
        plots.objective_figure(figdir / "objective.png", model.history)
    _write_report(args.out, "train", {
        "source": args.source, "target": args.target, "anchors": args.anchors,
        "config": cfg.as_dict(), "checkpoints": len(model.history),
        "final_objective": model.history[-1] if model.history else None,
        "model": str(out / "model.ckpt")})
    print(f"wrote model to {out / 'model.ckpt'}")
    return 0


def _minimal_pair_for_eval(model, test_anchors_text, source_labels, target_labels):
    """Networks reconstructed from checkpoint tokens (edgeless; labels
    only), enough for ranking and the label-based community metrics."""
    source = Network(nodes=list(model.tokens_s),
                     adjacency=[[] for _ in model.tokens_s])
    target = Network(nodes=list(model.tokens_t),
                     adjacency=[[] for _ in model.tokens_t])
    if source_labels:
        source = load_labels(_read_text(source_labels), source)
    if target_labels:
        target = load_labels(_read_text(target_labels), target)
    test = load_anchors(test_anchors_text, source, target)
    overlap = test & model.train_anchors
    if overlap:
        raise DataError("test anchors overlap the model's training anchors")
    return NetworkPair(source=source, target=target,
                       anchors_train=set(model.train_anchors), anchors_test=test)


def cmd_align(args):
    model = load_checkpoint(args.model)
    pair = _minimal_pair_for_eval(model, _read_text(args.test_anchors),
                                  args.source_labels, args.target_labels)
    ks = sorted({int(k) for k in args.k.split(",")})
    ranked, report = evaluate(model, pair, ks=ks, tau=args.tau)
    report.config = {"model": args.model, "tau": args.tau, "k": ks,
                     "test_anchors": args.test_anchors}
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.dump_ranked:
        lines = ["query,rank,candidate,distance"]
        for q in ranked.queries:
            for rank, (cand, dist) in enumerate(
                    zip(ranked.order[q], ranked.distances[q]), start=1):
                lines.append(f"{model.tokens_t[q]},{rank},"
                             f"{model.tokens_s[cand]},{dist:.17g}")
        (out / "ranked.csv").write_text("\n".join(lines) + "\n", "utf-8")
    lines = ["metric,k,value"]
    for k in ks:
        lines.append(f"precision,{k},{report.precision[k]:.6f}")
        lines.append(f"map,{k},{report.map_score[k]:.6f}")
    (out / "metrics.csv").write_text("\n".join(lines) + "\n", "utf-8")
    figdir = out / "figures"
    figdir.mkdir(exist_ok=True)
    plots.metrics_figure(figdir / "metrics.png", report.precision, report.map_score)
    _write_report(args.out, "align", report.as_dict())
    for k in ks:
        print(f"precision@{k} {report.precision[k]:.4f}  "
              f"map@{k} {report.map_score[k]:.4f}")
    if report.community_accuracy is not None:
        print(f"community_accuracy {report.community_accuracy:.4f}")
    if report.quality is not None:
        print(f"quality {report.quality:.4f}")
    return 0


def cmd_emit_plot(args):
    model = load_checkpoint(args.model)
    tag = args.network
    tokens = model.tokens_s if tag == "s" else model.tokens_t
    coords = model.theta_s if tag == "s" else model.theta_t
    comm = model.comm_s if tag == "s" else model.comm_t
    communities = comm.membership.z.argmax(axis=1)
    degree = np.zeros(len(tokens), dtype=np.int64)
    if args.graph:
        net = load_edge_list(_read_text(args.graph))
        if net.nodes != tokens:
            raise DataError("--graph node set does not match the checkpoint")
        degree = net.degree
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    d = coords.shape[1]
    header = "token,community,degree," + ",".join(f"x{k}" for k in range(d))
    lines = [header]
    for i, tok in enumerate(tokens):
        xs = ",".join(f"{v:.17g}" for v in coords[i])
        lines.append(f"{tok},{communities[i]},{degree[i]},{xs}")
    csv_path = out / f"embedding_{tag}.csv"
    csv_path.write_text("\n".join(lines) + "\n", "utf-8")
    figdir = out / "figures"
    figdir.mkdir(exist_ok=True)
    plots.disk_figure(figdir / f"disk_{tag}.png", coords, communities,
                      sizes=degree if args.graph else None,
                      title=f"network {tag}")
    _write_report(args.out, "emit-plot", {
        "model": args.model, "network": tag, "rows": len(tokens),
        "dim": d, "csv": str(csv_path),
        "degree_source": args.graph or "none"})
    print(f"wrote {csv_path}")
    return 0


def build_parser():
    parser = _Parser(prog="hypalign",
                     description="joint hyperbolic user and community alignment")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("delta", parents=[], help="delta-hyperbolicity of a graph")
    p.add_argument("graph")
    p.add_argument("--mode", choices=("exact", "sampled"), default="exact")
    p.add_argument("--samples", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cap", type=int, default=200)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_delta)

    p = sub.add_parser("synth", help="generate a synthetic aligned pair")
    p.add_argument("--n", type=int, default=300)
    p.add_argument("--communities", type=int, default=4)
    p.add_argument("--p-in", type=float, default=0.15, dest="p_in")
    p.add_argument("--p-out", type=float, default=0.01, dest="p_out")
    p.add_argument("--edge-keep", type=float, default=0.9)
    p.add_argument("--eta", type=float, default=0.6)
    p.add_argument("--train-fraction", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train a joint model")
    p.add_argument("source")
    p.add_argument("target")
    p.add_argument("anchors")
    p.add_argument("--config", default=None, help="flat key=value file")
    p.add_argument("--out", required=True)
    _add_train_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("align", help="evaluate alignment from a checkpoint")
    p.add_argument("model")
    p.add_argument("--test-anchors", required=True)
    p.add_argument("--source-labels", default=None)
    p.add_argument("--target-labels", default=None)
    p.add_argument("--tau", type=float, default=0.6)
    p.add_argument("--k", default="1,5,10,30")
    p.add_argument("--dump-ranked", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_align)

    p = sub.add_parser("emit-plot", help="dump per-node embedding table")
    p.add_argument("model")
    p.add_argument("--network", choices=("s", "t"), required=True)
    p.add_argument("--graph", default=None, help="edge list for the degree column")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_emit_plot)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (DataError, FileNotFoundError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())

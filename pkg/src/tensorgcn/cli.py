"""Command line interface: build graph artifacts, train, evaluate, run
ablations, and verify gradients.

Configuration is a flat ``key = value`` file; every key can be overridden
by the same-named flag (flag wins). All randomness flows from the single
``seed`` key.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import corpus as corpus_mod
from . import graphs as graphs_mod
from .errors import InputError, TrainingError
from .model import gradcheck_model, load_checkpoint, save_checkpoint
from .training import TrainConfig, train

ABLATION_VARIANTS = (
    ("semantic", "single", ("semantic",)),
    ("syntactic", "single", ("syntactic",)),
    ("sequential", "single", ("sequential",)),
    ("w/o semantic", "tensor", ("syntactic", "sequential")),
    ("w/o syntactic", "tensor", ("semantic", "sequential")),
    ("w/o sequential", "tensor", ("semantic", "syntactic")),
    ("merge", "merge", graphs_mod.GRAPH_NAMES),
    ("intra_only", "intra_only", graphs_mod.GRAPH_NAMES),
    ("tensor", "tensor", graphs_mod.GRAPH_NAMES),
)


def sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(out_dir: Path, config: dict, inputs: list[Path], artifacts: list[Path]):
    manifest = {
        "config": config,
        "inputs": {str(p): sha256_file(p) for p in inputs},
        "artifacts": {str(p): sha256_file(p) for p in artifacts},
        "created": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def load_config_file(path) -> dict:
    values = {}
    known = set(TrainConfig.field_names())
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise InputError(f"{path}:{lineno}: expected key = value")
            key, _, raw = line.partition("=")
            key = key.strip()
            if key not in known:
                raise InputError(f"{path}:{lineno}: unknown config key {key!r}")
            values[key] = raw.strip()
    return values


def _coerce(key: str, raw: str):
    default = getattr(TrainConfig(), key)
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    return raw


def resolve_config(args) -> TrainConfig:
    """Defaults, then config file entries, then explicit flags."""
    values = {}
    if getattr(args, "config", None):
        for key, raw in load_config_file(args.config).items():
            values[key] = _coerce(key, raw)
    for key in TrainConfig.field_names():
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    return TrainConfig(**values)


def parse_mode(mode: str):
    """Returns (mode, graph subset). ``single:<graph>`` selects one graph."""
    if mode.startswith("single:"):
        name = mode.split(":", 1)[1]
        if name not in graphs_mod.GRAPH_NAMES:
            raise InputError(f"unknown graph {name!r} in mode {mode!r}")
        return "single", (name,)
    if mode == "single":
        raise InputError("single mode needs a graph, e.g. single:sequential")
    if mode in ("tensor", "intra_only", "merge"):
        return mode, graphs_mod.GRAPH_NAMES
    raise InputError(f"unknown mode {mode!r}")


def add_config_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--config", help="flat key = value configuration file")
    parser.add_argument("--lr", type=float)
    parser.add_argument("--l2-weight", dest="l2_weight", type=float)
    parser.add_argument("--dropout", type=float)
    parser.add_argument("--max-epochs", dest="max_epochs", type=int)
    parser.add_argument("--patience", type=int)
    parser.add_argument("--hidden-dim", dest="hidden_dim", type=int)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--mode")
    parser.add_argument("--rho-sem", dest="rho_sem", type=float)
    parser.add_argument("--window-size", dest="window_size", type=int)
    parser.add_argument("--val-fraction", dest="val_fraction", type=float)
    parser.add_argument("--min-df", dest="min_df", type=int)
    parser.add_argument("--embedding-mode", dest="embedding_mode", choices=["static", "contextual"])


def load_graph_dir(graphs_dir: Path, corpus) -> graphs_mod.TextGraphTensor:
    doc_ids, words = graphs_mod.read_node_index_file(graphs_dir / "node_index.txt")
    if [d.id for d in corpus.documents] != doc_ids:
        raise InputError("dataset documents do not match the node index of the graph artifacts")
    node_index = corpus_mod.NodeIndex(n_docs=len(doc_ids), n_words=len(words))
    mats = []
    for name in graphs_mod.GRAPH_NAMES:
        file_name, A = graphs_mod.read_graph_file(graphs_dir / f"{name}.graph")
        if file_name != name:
            raise InputError(f"graph file {name}.graph declares name {file_name!r}")
        mats.append(A)
    return graphs_mod.TextGraphTensor(
        node_index=node_index, graphs=mats, names=graphs_mod.GRAPH_NAMES
    )


def cmd_build_graphs(args) -> int:
    config = resolve_config(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    corpus = corpus_mod.load_corpus(args.dataset)
    vocab = corpus_mod.build_vocab(corpus, config.min_df)
    node_index = corpus_mod.make_node_index(corpus, vocab)

    if not args.embeddings:
        raise InputError(
            "semantic graph needs --embeddings (contextual per-token file or "
            "static word-vector fallback)"
        )
    embeddings = corpus_mod.load_embedding_annotations(
        args.embeddings, corpus, config.embedding_mode, vocab=vocab
    )
    if embeddings.missing_words:
        print(
            f"warning: {len(embeddings.missing_words)} vocabulary words have no "
            f"static vector (first: {embeddings.missing_words[0]!r})",
            file=sys.stderr,
        )
    if args.dependencies:
        dep = corpus_mod.load_dep_annotations(args.dependencies, corpus)
    else:
        dep = corpus_mod.DepAnnotations(pairs={})

    doc_word = graphs_mod.tfidf_edges(corpus, vocab, node_index)
    word_word = [
        graphs_mod.semantic_edges(corpus, vocab, node_index, embeddings, config.rho_sem),
        graphs_mod.syntactic_edges(corpus, vocab, node_index, dep),
        graphs_mod.pmi_edges(corpus, vocab, node_index, config.window_size),
    ]
    tensor = graphs_mod.assemble_tensor(word_word, doc_word, node_index)

    artifacts = []
    for name, A in zip(tensor.names, tensor.graphs):
        path = out_dir / f"{name}.graph"
        graphs_mod.write_graph_file(path, A, name)
        artifacts.append(path)
        print(f"{name}: {A.nnz // 2} undirected edges ({A.nnz} stored entries)")
    node_path = out_dir / "node_index.txt"
    graphs_mod.write_node_index_file(node_path, corpus, vocab)
    artifacts.append(node_path)
    inputs = [Path(args.dataset)]
    if args.embeddings:
        inputs.append(Path(args.embeddings))
    if args.dependencies:
        inputs.append(Path(args.dependencies))
    write_manifest(out_dir, asdict(config), inputs, artifacts)
    return 0


def cmd_train(args) -> int:
    config = resolve_config(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    corpus = corpus_mod.load_corpus(args.dataset)
    tensor = load_graph_dir(Path(args.graphs), corpus)
    mode, names = parse_mode(config.mode)
    run_config = TrainConfig(**{**asdict(config), "mode": mode})
    params, report = train(corpus, tensor, run_config, graph_names=names)

    checkpoint = out_dir / "checkpoint.npz"
    save_checkpoint(checkpoint, params)
    report_path = out_dir / "report.jsonl"
    report_path.write_text(report.to_jsonl(), encoding="utf-8")
    summary_path = out_dir / "report.txt"
    summary_path.write_text(report.summary() + "\n", encoding="utf-8")
    write_manifest(
        out_dir,
        asdict(config),
        [Path(args.dataset), Path(args.graphs) / "node_index.txt"],
        [checkpoint, report_path, summary_path],
    )
    print(report.summary().splitlines()[-1])
    return 0


def cmd_evaluate(args) -> int:
    corpus = corpus_mod.load_corpus(args.dataset)
    tensor = load_graph_dir(Path(args.graphs), corpus)
    params = load_checkpoint(args.checkpoint)
    from .training import evaluate as evaluate_params

    labels = np.zeros(tensor.node_index.n, dtype=np.int64)
    labels[: len(corpus)] = corpus.labels()
    mask = np.array([d.split == args.split for d in corpus.documents], dtype=bool)
    work = tensor.subset(params.graph_names) if params.mode != "merge" else tensor
    accuracy = evaluate_params(params, work, labels, mask)
    print(f"{args.split} accuracy {accuracy:.4f}")
    return 0


def cmd_ablate(args) -> int:
    config = resolve_config(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    seeds = [int(s) for s in args.seeds.split(",") if s.strip() != ""]
    if not seeds:
        raise InputError("--seeds must list at least one integer")
    corpus = corpus_mod.load_corpus(args.dataset)
    tensor = load_graph_dir(Path(args.graphs), corpus)

    records = []
    table_rows = []
    for variant, mode, names in ABLATION_VARIANTS:
        accuracies = []
        for seed in seeds:
            run_config = TrainConfig(**{**asdict(config), "mode": mode, "seed": seed})
            _, report = train(corpus, tensor, run_config, graph_names=names)
            accuracies.append(report.test_accuracy)
            records.append(
                {
                    "kind": "run",
                    "variant": variant,
                    "seed": seed,
                    "test_accuracy": report.test_accuracy,
                    "stopping_epoch": report.stopping_epoch,
                }
            )
        mean = float(np.mean(accuracies))
        std = float(np.std(accuracies))
        records.append({"kind": "summary", "variant": variant, "mean": mean, "std": std})
        table_rows.append((variant, mean, std))
        print(f"{variant:<16} {mean:.4f} ± {std:.4f}")

    jsonl_path = out_dir / "ablation.jsonl"
    jsonl_path.write_text("\n".join(json.dumps(r) for r in records) + "\n", encoding="utf-8")
    width = max(len(v) for v, _, _ in table_rows)
    lines = [f"{'variant':<{width}}  {'accuracy':>8}  {'std':>6}"]
    for variant, mean, std in table_rows:
        lines.append(f"{variant:<{width}}  {mean:>8.4f}  {std:>6.4f}")
    table_path = out_dir / "ablation.txt"
    table_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    write_manifest(out_dir, asdict(config), [Path(args.dataset)], [jsonl_path, table_path])
    return 0


def cmd_gradcheck(args) -> int:
    mode, _ = parse_mode(args.mode)
    report = gradcheck_model(mode=mode, tolerance=args.tolerance, step=args.step, seed=args.seed)
    for line in report.lines():
        print(line)
    return 0 if report.passed else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tensorgcn",
        description="Text graph tensor construction and tensor GCN training",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-graphs", help="construct the three-graph tensor artifacts")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--embeddings", help="token embedding annotations for the semantic graph")
    p.add_argument("--dependencies", help="dependency pair annotations for the syntactic graph")
    add_config_flags(p)
    p.set_defaults(func=cmd_build_graphs)

    p = sub.add_parser("train", help="train one mode on built graphs")
    p.add_argument("--graphs", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    add_config_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="evaluate a checkpoint")
    p.add_argument("--graphs", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--split", default="test", choices=["train", "test"])
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("ablate", help="train and evaluate every comparison variant")
    p.add_argument("--graphs", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seeds", default="0", help="comma-separated seeds")
    add_config_flags(p)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("gradcheck", help="verify gradients against central differences")
    p.add_argument("--mode", default="tensor")
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.add_argument("--step", type=float, default=1e-5)
    p.add_argument("--seed", type=int, default=7)
    p.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InputError, TrainingError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

"""Command line entry: emit embedding or dependency annotation files."""

from __future__ import annotations

import argparse
import sys

from .dataset import load_dataset
from .depparse import write_dependencies
from .embeddings import EXPORTER_VERSION, load_pretrained, train_and_embed, write_contextual


def build_parser():
    parser = argparse.ArgumentParser(
        prog="annotate",
        description="Produce annotation files (contextual embeddings, dependency pairs) for a dataset",
    )
    parser.add_argument("--dataset", required=True)
    parser.add_argument("--emit", required=True, choices=["embeddings", "dependencies"])
    parser.add_argument("--out", required=True)
    parser.add_argument("--dim", type=int, default=300, help="LSTM and embedding dimension")
    parser.add_argument("--epochs", type=int, default=8)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--lr", type=float, default=1e-3)
    parser.add_argument("--batch-size", type=int, default=32)
    parser.add_argument("--pretrained", help="optional word vectors, text format 'word f1 ... fd'")
    parser.add_argument("--parser", default="heuristic", help="dependency parser: heuristic or spacy")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        records = load_dataset(args.dataset)
        if args.emit == "embeddings":
            pretrained = load_pretrained(args.pretrained, args.dim) if args.pretrained else None
            states = train_and_embed(
                records,
                dim=args.dim,
                epochs=args.epochs,
                lr=args.lr,
                seed=args.seed,
                batch_size=args.batch_size,
                pretrained=pretrained,
            )
            meta = f"exporter={EXPORTER_VERSION} dim={args.dim} epochs={args.epochs} seed={args.seed}"
            write_contextual(args.out, records, states, meta)
            print(f"wrote contextual embeddings for {len(records)} documents to {args.out}")
        else:
            version = write_dependencies(args.out, records, parser_name=args.parser)
            print(f"wrote dependency pairs ({version}) for {len(records)} documents to {args.out}")
        return 0
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

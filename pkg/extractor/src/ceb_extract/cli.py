"""CLI entry points: `extract` and `verify-store`."""

from __future__ import annotations

import argparse
import logging
import sys

from .corpus import read_corpus
from .extract import ExtractionConfig, extract
from .verify import verify_store


def main_extract(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="extract",
        description="Extract contextual token vectors from a corpus into a CEB1 store",
    )
    parser.add_argument("--corpus", required=True, help="corpus JSONL (id + text|tokens)")
    parser.add_argument("--out", required=True, help="output CEB1 store path")
    parser.add_argument("--model", default="bert-base-uncased",
                        help="model name or local checkpoint directory")
    parser.add_argument("--max-len", type=int, default=512)
    parser.add_argument("--batch", type=int, default=32)
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--agg", choices=["mean", "first"], default="mean",
                        help="subword-to-word aggregation")
    parser.add_argument("--deterministic", action="store_true",
                        help="bit-reproducible output (forces batch size 1)")
    parser.add_argument("--dump-pieces", help="also write piece-level vectors (JSONL)")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    try:
        corpus = read_corpus(args.corpus)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    config = ExtractionConfig(model=args.model, max_len=args.max_len,
                              batch_size=args.batch, device=args.device,
                              aggregation=args.agg, deterministic=args.deterministic)
    try:
        report = extract(corpus, args.out, config, dump_pieces_path=args.dump_pieces)
    except Exception as exc:  # model load and inference failures
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {report.num_records} records (dim {report.dim}) for "
          f"{report.num_docs} docs; coverage {100.0 * report.coverage:.2f}%")
    return 0


def main_verify(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="verify-store",
        description="Check a CEB1 store against its corpus; nonzero exit below 95% coverage",
    )
    parser.add_argument("--corpus", required=True)
    parser.add_argument("--store", required=True)
    args = parser.parse_args(argv)
    try:
        corpus = read_corpus(args.corpus)
        report = verify_store(corpus, args.store)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    print(report.summary())
    return 0 if report.ok else 1


if __name__ == "__main__":
    sys.exit(main_extract())

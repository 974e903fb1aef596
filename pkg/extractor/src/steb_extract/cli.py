"""Command line: build corpus protocols and extract embedding tables."""

import argparse
import logging
import sys

from .errors import ExtractError
from .extract import ExtractionJob, extract
from .protocols import build_protocol, write_protocol
from .registry import MODELS


def cmd_protocol(args):
    rows = build_protocol(args.root, args.kind)
    write_protocol(rows, args.out)
    classes = sorted({label for _, label, _ in rows})
    print(f"wrote {len(rows)} entries, {len(classes)} classes to {args.out}")
    return 0


def cmd_extract(args):
    job = ExtractionJob(
        audio_root=args.audio_root,
        protocol=args.protocol,
        model_id=args.model_id,
        out_path=args.out,
        split=args.split,
        backend=args.backend,
    )
    table = extract(job)
    print(f"wrote {table.n} x {table.dim} embeddings to {args.out}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="steb-extract",
        description="extract frozen-speech-model embeddings into STEB tables",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("protocol", help="build a protocol CSV from a corpus layout")
    p.add_argument("--root", required=True)
    p.add_argument("--kind", required=True, choices=("asv", "cfad"))
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_protocol)

    p = sub.add_parser("extract", help="embed a protocol's utterances")
    p.add_argument("--audio-root", required=True)
    p.add_argument("--protocol", required=True)
    p.add_argument("--model-id", required=True, choices=sorted(MODELS))
    p.add_argument("--out", required=True)
    p.add_argument("--split", default=None)
    p.add_argument("--backend", default="hf", choices=("hf", "stub"))
    p.set_defaults(func=cmd_extract)
    return parser


def main(argv=None):
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ExtractError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except RuntimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

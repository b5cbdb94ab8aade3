"""Command line for the embedding extractor.

Exit codes: 0 ok, 1 user error, 2 internal error; failures print one line on
stderr.
"""

import argparse
import sys

from .extract import DEFAULT_ENCODER, ExtractError, extract


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ExtractError(message)


def build_parser():
    parser = _Parser(prog="extract", description=__doc__)
    parser.add_argument("--input", required=True, help="TSV with columns text[, text2], label")
    parser.add_argument("--encoder", default=DEFAULT_ENCODER, help="model name or local path")
    parser.add_argument("--max-len", type=int, default=64)
    parser.add_argument("--out", required=True, help="output dataset directory")
    parser.add_argument("--pooled", action="store_true", help="mean-pool tokens to one vector")
    parser.add_argument("--classes", type=int, default=None, help="class count (default: max label + 1)")
    parser.add_argument("--name", default=None)
    parser.add_argument("--dialect", default="unspecified")
    parser.add_argument("--task", default="unspecified")
    parser.add_argument("--metric", choices=("accuracy", "mcc"), default="accuracy")
    parser.add_argument("--batch-size", type=int, default=16)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        manifest = extract(
            args.input,
            args.encoder,
            args.max_len,
            args.out,
            pooled=args.pooled,
            classes=args.classes,
            name=args.name,
            dialect=args.dialect,
            task=args.task,
            metric=args.metric,
            batch_size=args.batch_size,
        )
        print(
            f"wrote {args.out}: n={manifest['n']} s={manifest['s']} "
            f"d={manifest['d']} k={manifest['k']}"
        )
        return 0
    except (ExtractError, FileNotFoundError, NotADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

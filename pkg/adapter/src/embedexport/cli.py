"""embedexport command line.

Exit codes match the consumer's convention: 0 success, 1 validation or
usage error, 2 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .conformance import check_against_golden, load_golden, make_golden
from .errors import ConfigError, ExportError, IoFailure
from .export import AdapterConfig, export_document, export_query
from .synthgen import SynthGeometry, export_synthetic

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_IO = 2


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="embedexport",
                     description="Export embeddings into the retrieval wire format")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_encoder_flags(p):
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--model", default="hash-projection",
                       help="'hash-projection' or a module:factory plugin spec")
        p.add_argument("--device", default="cpu")
        p.add_argument("--dim", type=int, default=64)
        p.add_argument("--patch-h", type=int, default=28)
        p.add_argument("--patch-w", type=int, default=28)

    p_doc = sub.add_parser("export-doc", help="encode images into document records")
    p_doc.add_argument("--image", required=True, nargs="+")
    add_encoder_flags(p_doc)

    p_query = sub.add_parser("export-query", help="encode query text")
    p_query.add_argument("--text", required=True)
    p_query.add_argument("--id", required=True, dest="query_id")
    add_encoder_flags(p_query)

    p_synth = sub.add_parser("export-synth",
                             help="regenerate the synthetic corpus (conformance)")
    p_synth.add_argument("--out", required=True)
    p_synth.add_argument("--seed", type=int, default=7)
    p_synth.add_argument("--docs", type=int, default=50)
    p_synth.add_argument("--queries", type=int, default=100)
    p_synth.add_argument("--rows", type=int, default=8)
    p_synth.add_argument("--cols", type=int, default=8)
    p_synth.add_argument("--dim", type=int, default=0)
    p_synth.add_argument("--patch-h", type=int, default=28)
    p_synth.add_argument("--patch-w", type=int, default=28)
    p_synth.add_argument("--block-rows", type=int, default=2)
    p_synth.add_argument("--block-cols", type=int, default=2)
    p_synth.add_argument("--noise", type=float, default=0.1)

    p_conf = sub.add_parser("conformance",
                            help="compare a directory against a golden manifest")
    p_conf.add_argument("--dir", required=True)
    p_conf.add_argument("--golden", required=True)

    p_make = sub.add_parser("make-golden", help="write a golden manifest for a directory")
    p_make.add_argument("--dir", required=True)
    p_make.add_argument("--out", required=True)

    return parser


def _config(args) -> AdapterConfig:
    return AdapterConfig(model=args.model, device=args.device, dim=args.dim,
                         patch_h=args.patch_h, patch_w=args.patch_w,
                         out_dir=Path(args.out))


def _cmd_export_doc(args) -> int:
    Path(args.out).mkdir(parents=True, exist_ok=True)
    cfg = _config(args)
    for image in args.image:
        path = export_document(image, cfg)
        print(f"wrote {path}")
    return EXIT_OK


def _cmd_export_query(args) -> int:
    Path(args.out).mkdir(parents=True, exist_ok=True)
    path = export_query(args.text, _config(args), args.query_id)
    print(f"wrote {path}")
    return EXIT_OK


def _cmd_export_synth(args) -> int:
    geo = SynthGeometry(seed=args.seed, n_docs=args.docs, n_queries=args.queries,
                        rows=args.rows, cols=args.cols, dim=args.dim,
                        patch_h=args.patch_h, patch_w=args.patch_w,
                        block_rows=args.block_rows, block_cols=args.block_cols,
                        noise=args.noise)
    out = export_synthetic(geo, Path(args.out))
    print(f"wrote synthetic corpus to {out} "
          f"({geo.n_docs} docs, {geo.n_queries} queries, seed={geo.seed})")
    return EXIT_OK


def _cmd_conformance(args) -> int:
    problems = check_against_golden(Path(args.dir), load_golden(args.golden))
    for problem in problems:
        print(problem, file=sys.stderr)
    if problems:
        print(f"NONCONFORMANT: {len(problems)} problem(s)", file=sys.stderr)
        return EXIT_INVALID
    print("conformant")
    return EXIT_OK


def _cmd_make_golden(args) -> int:
    golden = make_golden(Path(args.dir))
    Path(args.out).write_text(json.dumps(golden, indent=2) + "\n", encoding="utf-8")
    print(f"wrote {args.out} ({len(golden['files'])} files)")
    return EXIT_OK


_COMMANDS = {
    "export-doc": _cmd_export_doc,
    "export-query": _cmd_export_query,
    "export-synth": _cmd_export_synth,
    "conformance": _cmd_conformance,
    "make-golden": _cmd_make_golden,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    try:
        return _COMMANDS[args.command](args)
    except IoFailure as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ExportError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (FileNotFoundError, OSError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())

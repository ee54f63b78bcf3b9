"""Command-line interface.

Subcommands: ingest, search, eval, synth, loss-check, render.  Exit codes
are a stable contract: 0 success, 1 validation or usage error, 2 I/O
error.  Every subcommand is deterministic given its inputs, flags and
seed; nothing reads the clock or other ambient entropy.

``--config FILE`` (before or after the subcommand) loads a JSON object
whose keys are flag names with underscores (``{"eta": 0.5, "k": 4}``)
and uses them as defaults; explicit flags still win.  Environment
variables carry no semantics.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from .exceptions import (
    EmptyCorpus,
    IoFailure,
    ParseError,
    RegionSearchError,
    UnsupportedVersion,
    ValidationFailure,
)
from .gradcheck import run_loss_checks
from .index import Corpus, retrieve_regions
from .metrics import ndcg_at_k, recall_at_k
from .regions import binarize, propose_regions
from .similarity import saliency_map
from .synth import SynthConfig, write_synth
from .types import HyperParams, PatchGrid, QueryEmbedding
from .wire import (
    EMBEDDING_SUFFIX,
    load_corpus,
    read_embedding_file,
    read_judgments,
    read_results,
    render_saliency,
    result_to_record,
    write_manifest,
    write_results,
)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_IO = 2

METRIC_KS = (1, 2, 5, 10)


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors; our contract reserves 2 for I/O.
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(message)


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _nonneg_int(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {value}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="regionsearch",
                     description="Region-level retrieval over patch-embedding grids")
    sub = parser.add_subparsers(dest="command", required=True)
    parser.sub_parsers = {}

    def add_parser(name, **kwargs):
        p = sub.add_parser(name, **kwargs)
        parser.sub_parsers[name] = p
        return p

    p_ingest = add_parser("ingest", help="validate a directory of embedding "
                              "files and write a corpus manifest")
    p_ingest.add_argument("--input", required=True, help="directory of .emb files")

    p_search = add_parser("search", help="rank documents and propose regions")
    p_search.add_argument("--corpus", required=True, help="manifest.json path")
    p_search.add_argument("--queries", required=True, nargs="+",
                          help="query .emb files or directories of them")
    p_search.add_argument("--output", required=True, help="results JSONL path")
    p_search.add_argument("--k", type=_positive_int, default=4)
    p_search.add_argument("--eta", type=float, required=True,
                          help="saliency threshold (corpus dependent)")
    p_search.add_argument("--radius", type=_positive_int, default=1)
    p_search.add_argument("--region-cap", type=_nonneg_int, default=None)
    p_search.add_argument("--pixel-budget", type=_positive_int, default=512 * 512)
    p_search.add_argument("--workers", type=_positive_int, default=1)

    p_eval = add_parser("eval", help="score a results stream against judgments")
    p_eval.add_argument("--results", required=True)
    p_eval.add_argument("--judgments", required=True)
    p_eval.add_argument("--output", default=None, help="summary JSON path (default stdout)")
    p_eval.add_argument("--per-query", action="store_true")

    p_synth = add_parser("synth", help="generate a planted synthetic corpus")
    p_synth.add_argument("--out", required=True)
    p_synth.add_argument("--seed", type=int, default=7)
    p_synth.add_argument("--docs", type=_positive_int, default=50)
    p_synth.add_argument("--queries", type=_positive_int, default=100)
    p_synth.add_argument("--rows", type=_positive_int, default=8)
    p_synth.add_argument("--cols", type=_positive_int, default=8)
    p_synth.add_argument("--dim", type=_nonneg_int, default=0,
                         help="embedding dimension (0 = queries + 8)")
    p_synth.add_argument("--patch-h", type=_positive_int, default=28)
    p_synth.add_argument("--patch-w", type=_positive_int, default=28)
    p_synth.add_argument("--block-rows", type=_positive_int, default=2)
    p_synth.add_argument("--block-cols", type=_positive_int, default=2)
    p_synth.add_argument("--noise", type=float, default=0.1)

    p_loss = add_parser("loss-check", help="run the loss/gradient verification suite")
    p_loss.add_argument("--seed", type=int, default=0)
    p_loss.add_argument("--grad-checks", type=_positive_int, default=100)
    p_loss.add_argument("--output", default=None, help="report JSON path")

    p_render = add_parser("render", help="render a saliency map to PGM files")
    p_render.add_argument("--corpus", required=True)
    p_render.add_argument("--query", required=True, help="query .emb file")
    p_render.add_argument("--doc", required=True, help="document id")
    p_render.add_argument("--eta", type=float, required=True)
    p_render.add_argument("--radius", type=_positive_int, default=1)
    p_render.add_argument("--out", required=True, help="output PGM path")

    return parser


# ---------------------------------------------------------------------------
# Subcommand bodies
# ---------------------------------------------------------------------------


def _cmd_ingest(args) -> int:
    in_dir = Path(args.input)
    if not in_dir.is_dir():
        raise IoFailure(f"{in_dir} is not a directory")
    corpus = Corpus()
    paths: dict[str, str] = {}
    failures: list[str] = []
    files = sorted(in_dir.glob(f"*{EMBEDDING_SUFFIX}"))
    for f in files:
        try:
            obj = read_embedding_file(f)
            if not isinstance(obj, PatchGrid):
                raise ValidationFailure("not a document record")
            corpus.ingest(obj)
            paths[obj.doc_id] = f.name
            print(f"ok      {f.name}  {obj.rows}x{obj.cols} d={obj.dim}")
        except RegionSearchError as exc:
            failures.append(f.name)
            print(f"invalid {f.name}  {exc}", file=sys.stderr)
    if corpus.size == 0:
        raise EmptyCorpus(f"no valid documents in {in_dir}")
    if failures:
        print(f"{len(failures)} invalid file(s): {', '.join(failures)}", file=sys.stderr)
        return EXIT_INVALID
    manifest = write_manifest(corpus, in_dir, paths)
    print(f"wrote {manifest} ({corpus.size} documents, d={corpus.dim})")
    return EXIT_OK


def _collect_queries(specs: list[str] | str) -> list[QueryEmbedding]:
    if isinstance(specs, str):  # a config file may supply a single path
        specs = [specs]
    files: list[Path] = []
    for spec in specs:
        p = Path(spec)
        if p.is_dir():
            files.extend(sorted(p.glob(f"*{EMBEDDING_SUFFIX}")))
        else:
            files.append(p)
    queries = []
    for f in files:
        obj = read_embedding_file(f)
        if not isinstance(obj, QueryEmbedding):
            raise ValidationFailure(f"{f} is not a query record")
        queries.append(obj)
    return queries


def _cmd_search(args) -> int:
    corpus = load_corpus(Path(args.corpus))
    queries = _collect_queries(args.queries)
    if not queries:
        raise ValidationFailure("no query files found")
    hp = HyperParams(eta=args.eta, radius=args.radius, pixel_budget=args.pixel_budget)

    def run(q: QueryEmbedding) -> dict:
        try:
            result = retrieve_regions(corpus, q, args.k, hp, region_cap=args.region_cap)
        except RegionSearchError as exc:
            raise type(exc)(f"query {q.query_id!r}: {exc}") from exc
        return result_to_record(result)

    if args.workers > 1:
        with ThreadPoolExecutor(max_workers=args.workers) as pool:
            records = list(pool.map(run, queries))  # map preserves input order
    else:
        records = [run(q) for q in queries]
    write_results(records, Path(args.output))
    print(f"wrote {args.output} ({len(records)} queries, k={args.k}, eta={args.eta})")
    return EXIT_OK


def _cmd_eval(args) -> int:
    records = read_results(Path(args.results))
    judgments = read_judgments(Path(args.judgments))
    if not judgments:
        raise ValidationFailure(f"{args.judgments} contains no judgments")

    per_query = []
    skipped = []
    for record in records:
        qid = record["query_id"]
        if qid not in judgments:
            skipped.append(qid)
            continue
        ranked = [doc["doc_id"] for doc in record["docs"]]
        judg = judgments[qid]
        row = {"query_id": qid}
        for k in METRIC_KS:
            row[f"recall@{k}"] = recall_at_k(ranked, judg, k)
            row[f"ndcg@{k}"] = ndcg_at_k(ranked, judg, k)
        per_query.append(row)
    for qid in skipped:
        print(f"warning: no judgment for query {qid!r}, excluded", file=sys.stderr)
    if not per_query:
        raise ValidationFailure("no query in the results has a judgment")

    summary = {"queries": len(per_query), "excluded": len(skipped)}
    for k in METRIC_KS:
        for name in (f"recall@{k}", f"ndcg@{k}"):
            summary[name] = sum(row[name] for row in per_query) / len(per_query)
    if args.per_query:
        summary["per_query"] = per_query

    text = json.dumps(summary, indent=2)
    if args.output:
        Path(args.output).write_text(text + "\n", encoding="utf-8")
        print(f"wrote {args.output}")
    else:
        print(text)
    return EXIT_OK


def _cmd_synth(args) -> int:
    cfg = SynthConfig(seed=args.seed, n_docs=args.docs, n_queries=args.queries,
                      rows=args.rows, cols=args.cols, dim=args.dim,
                      patch_h=args.patch_h, patch_w=args.patch_w,
                      block_rows=args.block_rows, block_cols=args.block_cols,
                      noise=args.noise)
    out = write_synth(cfg, Path(args.out))
    print(f"wrote synthetic corpus to {out} "
          f"({cfg.n_docs} docs, {cfg.n_queries} queries, seed={cfg.seed})")
    return EXIT_OK


def _cmd_loss_check(args) -> int:
    results = run_loss_checks(seed=args.seed, n_grad=args.grad_checks)
    failed = 0
    for res in results:
        status = "PASS" if res.passed else "FAIL"
        print(f"[{status}] {res.name}: {res.detail}")
        failed += 0 if res.passed else 1
    print(f"{len(results) - failed}/{len(results)} checks passed")
    if args.output:
        report = {
            "seed": args.seed,
            "grad_checks": args.grad_checks,
            "passed": failed == 0,
            "checks": [{"name": r.name, "passed": bool(r.passed), "detail": r.detail}
                       for r in results],
        }
        Path(args.output).write_text(json.dumps(report, indent=2) + "\n",
                                     encoding="utf-8")
        print(f"wrote {args.output}")
    return EXIT_OK if failed == 0 else EXIT_INVALID


def _cmd_render(args) -> int:
    corpus = load_corpus(Path(args.corpus))
    if args.doc not in corpus.docs:
        raise ValidationFailure(f"unknown document id {args.doc!r}")
    obj = read_embedding_file(Path(args.query))
    if not isinstance(obj, QueryEmbedding):
        raise ValidationFailure(f"{args.query} is not a query record")
    grid = corpus.docs[args.doc]
    smap = saliency_map(obj, grid)
    mask = binarize(smap, args.eta)
    written = render_saliency(smap, mask, Path(args.out))
    hp = HyperParams(eta=args.eta, radius=args.radius)
    regions = propose_regions(obj, grid, hp)
    overlay = Path(args.out).with_suffix(".regions.txt")
    lines = [f"doc {args.doc} query {obj.query_id} eta {args.eta} radius {args.radius}"]
    for i, reg in enumerate(regions):
        b = reg.bbox
        lines.append(f"region {i}: bbox=({b.x1},{b.y1},{b.x2},{b.y2}) "
                     f"patches={len(reg.component)} peak={reg.peak_score:.6f} "
                     f"mean={reg.mean_score:.6f}")
    overlay.write_text("\n".join(lines) + "\n", encoding="utf-8")
    for p in list(written) + [overlay]:
        print(f"wrote {p}")
    return EXIT_OK


_COMMANDS = {
    "ingest": _cmd_ingest,
    "search": _cmd_search,
    "eval": _cmd_eval,
    "synth": _cmd_synth,
    "loss-check": _cmd_loss_check,
    "render": _cmd_render,
}


def _extract_config(argv: list[str]) -> tuple[list[str], dict]:
    """Pull ``--config FILE`` out of argv and load its JSON object."""
    if "--config" not in argv:
        return argv, {}
    i = argv.index("--config")
    if i + 1 >= len(argv):
        raise ValidationFailure("--config needs a file path")
    path = Path(argv[i + 1])
    rest = argv[:i] + argv[i + 2:]
    try:
        loaded = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise IoFailure(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationFailure(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(loaded, dict):
        raise ValidationFailure(f"config {path} must hold a JSON object")
    return rest, loaded


def _apply_config_defaults(parser: argparse.ArgumentParser, config: dict) -> None:
    # A config value becomes the flag's default (and satisfies "required");
    # explicit flags still override it.
    for sub in parser.sub_parsers.values():
        for action in sub._actions:
            if action.dest in config:
                action.default = config[action.dest]
                action.required = False


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv, config = _extract_config(argv)
        if config:
            _apply_config_defaults(parser, config)
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ValidationFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except IoFailure as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        return _COMMANDS[args.command](args)
    except (ValidationFailure, ParseError, UnsupportedVersion) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (IoFailure, OSError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())

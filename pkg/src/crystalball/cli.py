"""Command-line surface: ingest, generate, render, serve, schema-dump.

Exit codes are part of the contract: 0 success, 1 usage, 2 runtime failure.
Every command honors --json for machine-readable output.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Sequence

from .cve_ingest import CveRecord, ParseError, Skipped, walk_corpus
from .embedding import StubEmbedder
from .errors import CrystalBallError
from .generation import GenerationRequest, generate
from .graph_core import export_dot, parse_graph
from .retriever import RetrieverConfig, preprocess_cve
from .service import DEFAULT_HOST, DEFAULT_PORT, GraphService, run_service
from .transports import ApiTransport, LlmTransport, ManualTransport, StubTransport
from .workspace import Workspace


class _UsageError(Exception):
    """Bad invocation detected after argparse; exits 1 like parser errors."""


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors by default; the contract reserves 2
    # for runtime failures.
    def error(self, message: str) -> None:
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _load_stub_fixtures(path: Path | None) -> dict[str, str]:
    if path is None:
        return {}
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise _UsageError(f"--stub-fixtures {path}: not valid json: {exc}") from exc
    if not isinstance(obj, dict) or not all(
        isinstance(k, str) and isinstance(v, str) for k, v in obj.items()
    ):
        raise _UsageError(f"--stub-fixtures {path}: expected an object mapping text to text")
    return obj


def _make_transport(args: argparse.Namespace) -> LlmTransport:
    choice: str = args.transport
    if choice == "stub":
        return StubTransport(fixtures=_load_stub_fixtures(args.stub_fixtures))
    if choice == "api":
        return ApiTransport.from_env()
    if choice.startswith("manual:"):
        directory = choice[len("manual:"):]
        if not directory:
            raise _UsageError("manual transport needs a directory: manual:<dir>")
        return ManualTransport(Path(directory))
    raise _UsageError(f"unknown transport {choice!r} (expected stub, api, or manual:<dir>)")


def _retriever_config(args: argparse.Namespace) -> RetrieverConfig:
    return RetrieverConfig(
        min_similarity=args.min_similarity,
        context_token_budget=args.token_budget,
    )


def _emit(args: argparse.Namespace, payload: dict, human: str) -> None:
    if args.json_output:
        print(json.dumps(payload))
    else:
        print(human)


def cmd_ingest(args: argparse.Namespace) -> int:
    workspace = Workspace.at(args.workspace).ensure()
    transport = _make_transport(args)
    embedder = StubEmbedder()
    stored = skipped = parse_errors = extraction_failures = 0
    with workspace.open_catalog() as catalog:
        for entry in walk_corpus(Path(args.corpus_root)):
            if isinstance(entry, CveRecord):
                report = preprocess_cve(entry, transport, embedder, catalog)
                stored += 1
                if report.failed:
                    extraction_failures += 1
                    print(f"extraction failed: {entry.cve_id}: {report.error}", file=sys.stderr)
            elif isinstance(entry, Skipped):
                skipped += 1
            elif isinstance(entry, ParseError):
                parse_errors += 1
                print(f"parse error: {entry.path}: {entry.message}", file=sys.stderr)
    _emit(
        args,
        {
            "stored": stored,
            "skipped": skipped,
            "parse_errors": parse_errors,
            "extraction_failures": extraction_failures,
        },
        f"stored {stored}, skipped {skipped}, parse errors {parse_errors}, "
        f"extraction failures {extraction_failures}",
    )
    return 0


def cmd_generate(args: argparse.Namespace) -> int:
    if (args.query is None) == (args.report is None):
        raise _UsageError("provide a query or --report, not both")
    if args.report is not None and args.chunk is not None:
        raise _UsageError("--chunk applies to query mode only")
    workspace = Workspace.at(args.workspace).ensure()
    transport = _make_transport(args)
    request = GenerationRequest(
        query=args.query or "",
        report_path=Path(args.report) if args.report is not None else None,
        chunk_token_budget=args.chunk,
        model_id=args.model,
    )
    with workspace.open_catalog() as catalog:
        result = generate(
            request,
            catalog,
            transport,
            embedder=StubEmbedder(),
            retriever_config=_retriever_config(args),
            output_dir=workspace.graph_dir,
        )
    repaired_note = " (repaired from a truncated answer)" if result.repaired else ""
    _emit(
        args,
        {
            "graph_id": result.graph_id,
            "path": str(result.path),
            "nodes": len(result.graph.nodes),
            "edges": len(result.graph.edges),
            "repaired": result.repaired,
        },
        f"{result.path}\ngraph {result.graph_id}: {len(result.graph.nodes)} nodes, "
        f"{len(result.graph.edges)} edges{repaired_note}",
    )
    return 0


def cmd_render(args: argparse.Namespace) -> int:
    graph = parse_graph(Path(args.graph_file).read_text(encoding="utf-8"))
    sys.stdout.write(export_dot(graph))
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    host, _, port_text = args.listen.rpartition(":")
    if not host or not port_text.isdigit():
        raise _UsageError(f"--listen expects host:port, got {args.listen!r}")
    workspace = Workspace.at(args.workspace).ensure()
    transport = _make_transport(args)
    service = GraphService(
        workspace.open_catalog(),
        transport,
        StubEmbedder(),
        retriever_config=_retriever_config(args),
        graph_dir=workspace.graph_dir,
    )
    try:
        run_service(service, host, int(port_text))
    except KeyboardInterrupt:
        pass
    return 0


def cmd_schema_dump(args: argparse.Namespace) -> int:
    workspace = Workspace.at(args.workspace).ensure()
    with workspace.open_catalog() as catalog:
        sys.stdout.write(catalog.schema_dump())
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--workspace",
        default=".",
        help="directory holding catalog.db, vectors/ and graphs/ (default: current directory)",
    )
    common.add_argument(
        "--json", dest="json_output", action="store_true", help="machine-readable output"
    )

    transport_opts = argparse.ArgumentParser(add_help=False)
    transport_opts.add_argument(
        "--transport",
        default="stub",
        help="stub, api (CRYSTALBALL_LLM_* env vars), or manual:<dir>",
    )
    transport_opts.add_argument(
        "--stub-fixtures",
        type=Path,
        default=None,
        help="json file mapping input text to a canned stub answer",
    )

    retriever_opts = argparse.ArgumentParser(add_help=False)
    retriever_opts.add_argument("--min-similarity", type=float, default=0.68)
    retriever_opts.add_argument("--token-budget", type=int, default=3750)

    parser = _Parser(prog="crystalball", description="Attack-graph generation toolkit.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_ingest = sub.add_parser(
        "ingest", parents=[common, transport_opts], help="load a CVE corpus into the catalog"
    )
    p_ingest.add_argument("corpus_root", help="directory tree of CVE json files")
    p_ingest.set_defaults(func=cmd_ingest)

    p_generate = sub.add_parser(
        "generate",
        parents=[common, transport_opts, retriever_opts],
        help="generate an attack graph from a query or a threat report",
    )
    p_generate.add_argument("query", nargs="?", default=None, help="product/platform query text")
    p_generate.add_argument("--report", default=None, help="path to a threat report text file")
    p_generate.add_argument("--chunk", type=int, default=None, help="chunk token budget")
    p_generate.add_argument("--model", default="", help="model id recorded in provenance")
    p_generate.set_defaults(func=cmd_generate)

    p_render = sub.add_parser("render", parents=[common], help="render a graph file as DOT")
    p_render.add_argument("graph_file")
    p_render.set_defaults(func=cmd_render)

    p_serve = sub.add_parser(
        "serve",
        parents=[common, transport_opts, retriever_opts],
        help="run the local http service",
    )
    p_serve.add_argument("--listen", default=f"{DEFAULT_HOST}:{DEFAULT_PORT}")
    p_serve.set_defaults(func=cmd_serve)

    p_schema = sub.add_parser("schema-dump", parents=[common], help="print the catalog schema")
    p_schema.set_defaults(func=cmd_schema_dump)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except CrystalBallError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 2

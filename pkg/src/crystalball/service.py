"""Local HTTP service: generation, zoom, expand, and graph retrieval.

Loopback-only by default. The service fronts model credentials and exists for
the companion UI; it is not hardened for remote exposure. Generation traffic
is serialized per transport instance, reads run concurrently.
"""

from __future__ import annotations

import json
import logging
import re
import threading
from datetime import datetime, timezone
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from .catalog import Catalog
from .embedding import EmbeddingProvider
from .errors import (
    ChunkTooSmall,
    EdgeNotInGraph,
    EmbeddingError,
    EmptyContext,
    EmptyReport,
    GraphParseError,
    NotFound,
    PromptTooLarge,
    TransportError,
)
from .generation import (
    Clock,
    file_stamp,
    generate_chunked,
    generate_from_context,
    generate_from_report_text,
    write_graph_file,
    zoom_edge,
)
from .graph_core import Edge, merge, parse_graph, render_graph_json
from .retriever import RetrieverConfig, SEPARATOR, context_from_text, get_context
from .transports import LlmTransport

logger = logging.getLogger(__name__)

DEFAULT_HOST = "127.0.0.1"
DEFAULT_PORT = 8675

_GRAPH_PATH = re.compile(r"^/graphs/(\d+)$")


class BodyError(ValueError):
    """Request body fails the endpoint's schema."""


def _require_str(body: dict, key: str) -> str:
    value = body.get(key)
    if not isinstance(value, str) or not value:
        raise BodyError(f"{key} must be a non-empty string")
    return value


def _opt_str(body: dict, key: str) -> str | None:
    value = body.get(key)
    if value is None:
        return None
    if not isinstance(value, str) or not value:
        raise BodyError(f"{key} must be a non-empty string")
    return value


def _require_int(body: dict, key: str) -> int:
    value = body.get(key)
    if not isinstance(value, int) or isinstance(value, bool):
        raise BodyError(f"{key} must be an integer")
    return value


def _opt_positive_int(body: dict, key: str) -> int | None:
    value = body.get(key)
    if value is None:
        return None
    if not isinstance(value, int) or isinstance(value, bool) or value <= 0:
        raise BodyError(f"{key} must be a positive integer")
    return value


class GraphService:
    """Endpoint logic without the HTTP plumbing; one instance per server.

    Contexts are cached per graph id so zoom and expand can reuse them; after
    a restart the cache is rebuilt by re-running retrieval on the stored query
    text, falling back to the query text itself when retrieval is impossible
    (report-derived graphs).
    """

    def __init__(
        self,
        catalog: Catalog,
        transport: LlmTransport,
        embedder: EmbeddingProvider,
        retriever_config: RetrieverConfig | None = None,
        graph_dir: Path | str = ".",
        clock: Clock | None = None,
    ):
        self.catalog = catalog
        self.transport = transport
        self.embedder = embedder
        self.config = retriever_config if retriever_config is not None else RetrieverConfig()
        self.graph_dir = Path(graph_dir)
        self.clock = clock if clock is not None else (lambda: datetime.now(timezone.utc))
        # One transport, one request at a time; lock acquisition orders them.
        self._generation_lock = threading.Lock()
        self._contexts: dict[int, str] = {}

    def list_graphs(self) -> list[dict]:
        return [
            {"graph_id": graph_id, "created_at": created_at, "query_text": query_text}
            for graph_id, created_at, query_text in self.catalog.list_graphs()
        ]

    def get_graph_json(self, graph_id: int) -> str:
        return self.catalog.get_graph(graph_id)[3]

    def generate(self, body: dict) -> dict:
        query = _opt_str(body, "query")
        report_text = _opt_str(body, "report_text")
        if (query is None) == (report_text is None):
            raise BodyError("provide exactly one of query and report_text")
        budget = _opt_positive_int(body, "chunk_token_budget")
        if report_text is not None and budget is not None:
            raise BodyError("chunk_token_budget applies to query mode only")
        with self._generation_lock:
            if query is not None:
                context = get_context(query, self.config, self.catalog, self.embedder)
                result = generate_from_context(
                    context,
                    query,
                    self.catalog,
                    self.transport,
                    chunk_token_budget=budget,
                    output_dir=self.graph_dir,
                    clock=self.clock,
                )
                self._contexts[result.graph_id] = context.text
            else:
                result = generate_from_report_text(
                    report_text,
                    self.catalog,
                    self.transport,
                    output_dir=self.graph_dir,
                    clock=self.clock,
                )
                self._contexts[result.graph_id] = report_text
        return {"graph_id": result.graph_id}

    def _context_for(self, graph_id: int, query_text: str) -> str:
        cached = self._contexts.get(graph_id)
        if cached is not None:
            return cached
        if not query_text.startswith("report:"):
            # Catalog contents are stable, so re-running retrieval rebuilds
            # the context the graph was generated from.
            context = get_context(query_text, self.config, self.catalog, self.embedder)
            if context.text:
                self._contexts[graph_id] = context.text
                return context.text
        # Last resort after a restart: the stored query text is all we have.
        return query_text

    def zoom(self, body: dict) -> dict:
        graph_id = _require_int(body, "graph_id")
        edge_obj = body.get("edge")
        if not isinstance(edge_obj, dict):
            raise BodyError("edge must be an object with from, to and label")
        edge = Edge(
            _require_str(edge_obj, "from"),
            _require_str(edge_obj, "to"),
            str(edge_obj.get("label", "")),
        )
        row = self.catalog.get_graph(graph_id)
        graph = parse_graph(row[3])
        context_text = self._context_for(graph_id, row[2])
        with self._generation_lock:
            excerpt = zoom_edge(graph, edge, context_text, self.transport)
        return {"excerpt": excerpt}

    def expand(self, body: dict) -> dict:
        graph_id = _require_int(body, "graph_id")
        budget = _opt_positive_int(body, "chunk_token_budget")
        if budget is None:
            raise BodyError("chunk_token_budget must be a positive integer")
        row = self.catalog.get_graph(graph_id)
        existing = parse_graph(row[3])
        query_text = row[2]
        context_text = self._context_for(graph_id, query_text)
        if not context_text:
            raise EmptyContext(f"no context available for graph {graph_id}")
        # A cached report text or fallback query text has no separator; wrap
        # it so the chunk splitter sees one whole description.
        chunk_source = (
            context_text if context_text.startswith(SEPARATOR) else SEPARATOR + context_text
        )
        with self._generation_lock:
            addition = generate_chunked(
                context_from_text(chunk_source, queries=(query_text,)), budget, self.transport
            )
            merged = merge(existing, addition)
            created = self.clock()
            new_id = self.catalog.store_graph(
                query_text, render_graph_json(merged), created.isoformat()
            )
            write_graph_file(merged, self.graph_dir, file_stamp(created), new_id)
        self._contexts[new_id] = context_text
        return {"graph_id": new_id}


def _status_for(exc: Exception) -> int:
    if isinstance(exc, NotFound):
        return 404
    if isinstance(exc, (TransportError, GraphParseError)):
        # The request was fine; the model side failed.
        return 502
    if isinstance(
        exc,
        (
            ValueError,
            EdgeNotInGraph,
            ChunkTooSmall,
            EmptyContext,
            EmptyReport,
            PromptTooLarge,
            EmbeddingError,
        ),
    ):
        return 400
    return 500


class _Handler(BaseHTTPRequestHandler):
    server: "GraphServer"

    def log_message(self, fmt: str, *args: object) -> None:
        logger.debug("%s " + fmt, self.address_string(), *args)

    def _send_json(self, status: int, payload: str) -> None:
        body = payload.encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(body)

    def _send_obj(self, status: int, obj: object) -> None:
        self._send_json(status, json.dumps(obj))

    def _send_error(self, exc: Exception) -> None:
        status = _status_for(exc)
        if status == 500:
            logger.exception("internal error handling %s %s", self.command, self.path)
        try:
            self._send_obj(status, {"error": str(exc)})
        except OSError:
            pass  # client went away mid-write

    def do_OPTIONS(self) -> None:
        self.send_response(204)
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")
        self.send_header("Content-Length", "0")
        self.end_headers()

    def do_GET(self) -> None:
        service = self.server.service
        try:
            if self.path == "/graphs":
                self._send_obj(200, service.list_graphs())
                return
            match = _GRAPH_PATH.match(self.path)
            if match:
                self._send_json(200, service.get_graph_json(int(match.group(1))))
            else:
                self._send_obj(404, {"error": "no such endpoint"})
        except Exception as exc:
            self._send_error(exc)

    def do_POST(self) -> None:
        service = self.server.service
        try:
            body = self._read_body()
            if self.path == "/generate":
                self._send_obj(200, service.generate(body))
            elif self.path == "/zoom":
                self._send_obj(200, service.zoom(body))
            elif self.path == "/expand":
                self._send_obj(200, service.expand(body))
            else:
                self._send_obj(404, {"error": "no such endpoint"})
        except Exception as exc:
            self._send_error(exc)

    def _read_body(self) -> dict:
        length = int(self.headers.get("Content-Length", "0") or 0)
        raw = self.rfile.read(length) if length > 0 else b""
        if not raw:
            raise BodyError("request body is required")
        try:
            obj = json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise BodyError(f"request body is not valid json: {exc}") from exc
        if not isinstance(obj, dict):
            raise BodyError("request body must be a json object")
        return obj


class GraphServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, address: tuple[str, int], service: GraphService):
        super().__init__(address, _Handler)
        self.service = service


def run_service(
    service: GraphService, host: str = DEFAULT_HOST, port: int = DEFAULT_PORT
) -> None:
    """Serve until interrupted. Binds loopback unless told otherwise."""
    server = GraphServer((host, port), service)
    logger.info("serving on http://%s:%d", *server.server_address[:2])
    try:
        server.serve_forever()
    finally:
        server.server_close()

"""Graph generation: build prompts, call the model, post-process the answer.

All entry points share one answer pipeline (extract the JSON region, repair
truncation, parse) and one finishing step (store the graph row, write the
graph-<timestamp>.json file). Oversize prompts fail with PromptTooLarge before
anything is sent.
"""

from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable

from .catalog import Catalog
from .embedding import EmbeddingProvider
from .errors import (
    ChunkTooSmall,
    EdgeNotInGraph,
    EmptyContext,
    EmptyReport,
    GraphParseError,
    NoGraphFound,
    PromptTooLarge,
    SchemaError,
    Unrepairable,
)
from .graph_core import (
    AttackGraph,
    Edge,
    extract_graph_json,
    merge_many,
    parse_graph,
    render_graph_json,
    repair_truncated,
)
from .prompts import CVE_CHAIN_PROMPT_PREFIX, REPORT_PROMPT_PREFIX, ZOOM_PROMPT_TEMPLATE
from .retriever import (
    DEFAULT_TOKEN_COUNTER,
    RetrievalContext,
    RetrieverConfig,
    SEPARATOR,
    count_tokens,
    get_context,
    split_context,
)
from .transports import LlmTransport

Clock = Callable[[], datetime]


def _utc_now() -> datetime:
    return datetime.now(timezone.utc)


def file_stamp(moment: datetime) -> str:
    """Timestamp as used in graph file names, second resolution, always UTC."""
    return moment.strftime("%Y%m%dT%H%M%SZ")


@dataclass(frozen=True)
class GenerationRequest:
    """Either a retrieval query or a threat-report path, never both.

    Chunking only applies to query mode: a report is a single narrative, so
    splitting it on description boundaries makes no sense.
    """

    query: str = ""
    report_path: Path | None = None
    chunk_token_budget: int | None = None
    model_id: str = ""

    def __post_init__(self) -> None:
        if bool(self.query) == (self.report_path is not None):
            raise ValueError("exactly one of query and report_path must be set")
        if self.report_path is not None and self.chunk_token_budget is not None:
            raise ValueError("chunking applies to query mode only")
        if self.chunk_token_budget is not None and self.chunk_token_budget <= 0:
            raise ValueError("chunk_token_budget must be positive")


@dataclass(frozen=True)
class GenerationResult:
    graph: AttackGraph
    graph_id: int
    path: Path
    prompts: tuple[str, ...]
    model_id: str
    transport_id: str
    started_at: str
    finished_at: str
    repaired: bool


def build_cve_prompt(context: RetrievalContext) -> str:
    if not context.text:
        raise EmptyContext("no retrieved descriptions to build a prompt from")
    return CVE_CHAIN_PROMPT_PREFIX + context.text


def build_report_prompt(report_text: str) -> str:
    if not report_text.strip():
        raise EmptyReport("report text is empty")
    return REPORT_PROMPT_PREFIX + "\n\n" + report_text


def build_zoom_prompt(from_label: str, to_label: str, edge_label: str, context_text: str) -> str:
    filled = ZOOM_PROMPT_TEMPLATE.format(
        from_label=from_label, to_label=to_label, edge_label=edge_label
    )
    return filled + context_text


def _check_prompt_size(prompt: str, transport: LlmTransport) -> None:
    # The gate always uses the default counter, whatever counter built the
    # context, so the transport ceiling has one fixed meaning.
    tokens = count_tokens(prompt, DEFAULT_TOKEN_COUNTER)
    if tokens > transport.max_prompt_tokens:
        raise PromptTooLarge(
            f"prompt needs {tokens} tokens, transport limit is {transport.max_prompt_tokens}"
        )


def _answer_to_graph(answer: str) -> tuple[AttackGraph, bool]:
    """Extract, repair, parse. Any stage failing means the answer is unusable."""
    try:
        region = extract_graph_json(answer)
        repaired_text, was_repaired = repair_truncated(region)
        return parse_graph(repaired_text), was_repaired
    except (NoGraphFound, Unrepairable, SchemaError) as exc:
        raise GraphParseError(str(exc)) from exc


def split_into_chunks(
    context_text: str,
    chunk_token_budget: int,
    token_counter_id: str = DEFAULT_TOKEN_COUNTER,
) -> list[str]:
    """Greedy maximal runs of whole descriptions, each strictly under budget.

    Every chunk is refolded with the leading separator, so a chunk is itself a
    well-formed context and one chunk reproduces the input exactly.
    """
    chunks: list[str] = []
    current = ""
    for description in split_context(context_text):
        candidate = current + SEPARATOR + description
        if count_tokens(candidate, token_counter_id) < chunk_token_budget:
            current = candidate
            continue
        single = SEPARATOR + description
        needed = count_tokens(single, token_counter_id)
        if needed >= chunk_token_budget:
            raise ChunkTooSmall(
                f"one description alone needs {needed} tokens, budget is {chunk_token_budget}"
            )
        if current:
            chunks.append(current)
        current = single
    if current:
        chunks.append(current)
    return chunks


def _generate_chunks(
    context: RetrievalContext,
    chunk_token_budget: int,
    transport: LlmTransport,
) -> tuple[AttackGraph, tuple[str, ...], bool]:
    if not context.text:
        raise EmptyContext("no retrieved descriptions to chunk")
    prompts: list[str] = []
    graphs: list[AttackGraph] = []
    repaired_any = False
    for chunk_text in split_into_chunks(
        context.text, chunk_token_budget, context.token_counter_id
    ):
        prompt = CVE_CHAIN_PROMPT_PREFIX + chunk_text
        _check_prompt_size(prompt, transport)
        prompts.append(prompt)
        graph, repaired = _answer_to_graph(transport.send(prompt))
        repaired_any = repaired_any or repaired
        graphs.append(graph)
    return merge_many(graphs), tuple(prompts), repaired_any


def generate_chunked(
    context: RetrievalContext,
    chunk_token_budget: int,
    transport: LlmTransport,
) -> AttackGraph:
    """Per-chunk graphs merged into one; node identity is the label."""
    graph, _, _ = _generate_chunks(context, chunk_token_budget, transport)
    return graph


def write_graph_file(graph: AttackGraph, output_dir: Path, stamp: str, graph_id: int) -> Path:
    """Atomic write of the canonical rendering to graph-<stamp>.json."""
    output_dir.mkdir(parents=True, exist_ok=True)
    path = output_dir / f"graph-{stamp}.json"
    if path.exists():
        # Same-second collision; keep both files.
        path = output_dir / f"graph-{stamp}-{graph_id}.json"
    rendered = render_graph_json(graph)
    fd, tmp_name = tempfile.mkstemp(dir=output_dir, prefix=".graph-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            handle.write(rendered)
        os.replace(tmp_name, path)
    except BaseException:
        try:
            os.unlink(tmp_name)
        except OSError:
            pass
        raise
    return path


def _finish(
    graph: AttackGraph,
    prompts: tuple[str, ...],
    repaired: bool,
    query_text: str,
    catalog: Catalog,
    transport: LlmTransport,
    model_id: str,
    started: datetime,
    clock: Clock,
    output_dir: Path | str,
) -> GenerationResult:
    finished = clock()
    graph_id = catalog.store_graph(query_text, render_graph_json(graph), finished.isoformat())
    path = write_graph_file(graph, Path(output_dir), file_stamp(finished), graph_id)
    return GenerationResult(
        graph=graph,
        graph_id=graph_id,
        path=path,
        prompts=prompts,
        model_id=model_id,
        transport_id=transport.transport_id,
        started_at=started.isoformat(),
        finished_at=finished.isoformat(),
        repaired=repaired,
    )


def generate_from_context(
    context: RetrievalContext,
    query_text: str,
    catalog: Catalog,
    transport: LlmTransport,
    *,
    chunk_token_budget: int | None = None,
    model_id: str = "",
    output_dir: Path | str = ".",
    clock: Clock = _utc_now,
) -> GenerationResult:
    """Generate against an already-assembled context.

    The query text is only provenance here; callers that cache or rebuild
    contexts (service expand, regeneration at a new chunk budget) use this
    directly instead of re-running retrieval.
    """
    started = clock()
    if chunk_token_budget is not None:
        graph, prompts, repaired = _generate_chunks(context, chunk_token_budget, transport)
    else:
        prompt = build_cve_prompt(context)
        _check_prompt_size(prompt, transport)
        graph, repaired = _answer_to_graph(transport.send(prompt))
        prompts = (prompt,)
    return _finish(
        graph, prompts, repaired, query_text, catalog, transport, model_id, started, clock, output_dir
    )


def generate_from_report_text(
    report_text: str,
    catalog: Catalog,
    transport: LlmTransport,
    *,
    query_label: str | None = None,
    model_id: str = "",
    output_dir: Path | str = ".",
    clock: Clock = _utc_now,
) -> GenerationResult:
    started = clock()
    prompt = build_report_prompt(report_text)
    _check_prompt_size(prompt, transport)
    graph, repaired = _answer_to_graph(transport.send(prompt))
    label = query_label if query_label is not None else "report:" + report_text[:120]
    return _finish(
        graph, (prompt,), repaired, label, catalog, transport, model_id, started, clock, output_dir
    )


def generate(
    request: GenerationRequest,
    catalog: Catalog,
    transport: LlmTransport,
    *,
    embedder: EmbeddingProvider | None = None,
    retriever_config: RetrieverConfig | None = None,
    output_dir: Path | str = ".",
    clock: Clock = _utc_now,
) -> GenerationResult:
    if request.report_path is not None:
        report_text = Path(request.report_path).read_text(encoding="utf-8")
        return generate_from_report_text(
            report_text,
            catalog,
            transport,
            query_label=f"report:{request.report_path}",
            model_id=request.model_id,
            output_dir=output_dir,
            clock=clock,
        )
    if embedder is None:
        raise ValueError("query mode needs an embedder")
    config = retriever_config if retriever_config is not None else RetrieverConfig()
    context = get_context(request.query, config, catalog, embedder)
    return generate_from_context(
        context,
        request.query,
        catalog,
        transport,
        chunk_token_budget=request.chunk_token_budget,
        model_id=request.model_id,
        output_dir=output_dir,
        clock=clock,
    )


def zoom_edge(
    graph: AttackGraph,
    edge: Edge,
    original_context: str,
    transport: LlmTransport,
) -> str:
    """Ask for the part of the context behind one edge; answer returned verbatim."""
    if edge not in graph.edges:
        raise EdgeNotInGraph(f"{edge.src} -> {edge.dst} ({edge.label!r}) is not in the graph")
    src = graph.node_by_id(edge.src)
    dst = graph.node_by_id(edge.dst)
    from_label = src.label if src is not None else edge.src
    to_label = dst.label if dst is not None else edge.dst
    prompt = build_zoom_prompt(from_label, to_label, edge.label, original_context)
    _check_prompt_size(prompt, transport)
    return transport.send(prompt)

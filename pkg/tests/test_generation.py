"""Generation orchestration: prompts, chunking, transports, zoom, files."""

from __future__ import annotations

import json
import threading
import time
from datetime import datetime, timezone
from pathlib import Path

import pytest

from crystalball.errors import (
    ChunkTooSmall,
    EdgeNotInGraph,
    EmptyContext,
    EmptyReport,
    GraphParseError,
    PromptTooLarge,
    TransportError,
    TransportTimeout,
)
from crystalball.generation import (
    GenerationRequest,
    build_cve_prompt,
    build_report_prompt,
    build_zoom_prompt,
    file_stamp,
    generate,
    generate_chunked,
    generate_from_context,
    generate_from_report_text,
    split_into_chunks,
    write_graph_file,
    zoom_edge,
)
from crystalball.graph_core import AttackGraph, Edge, Node, parse_graph, validate
from crystalball.prompts import CVE_CHAIN_PROMPT_PREFIX, REPORT_PROMPT_PREFIX
from crystalball.retriever import SEPARATOR, context_from_text, count_tokens
from crystalball.transports import (
    ApiTransport,
    ENV_KEY,
    ENV_MODEL,
    ENV_URL,
    ManualTransport,
    StubTransport,
)

from conftest import DESCRIPTIONS, RASPBERRY_CVES, ScriptedEndpoint, ScriptedTransport

def FIXED_CLOCK():
    return datetime(2026, 1, 2, 3, 4, 5, tzinfo=timezone.utc)


RASPBERRY_CONTEXT = "".join(SEPARATOR + DESCRIPTIONS[c] for c in RASPBERRY_CVES)


def raspberry_context():
    return context_from_text(RASPBERRY_CONTEXT, queries=("Raspberry Pi",))


def test_cve_prompt_is_prefix_plus_context():
    context = context_from_text("---d1")
    assert build_cve_prompt(context) == CVE_CHAIN_PROMPT_PREFIX + "---d1"


def test_cve_prompt_contains_chaining_instruction():
    assert "Vulnerability with matching postcondition should be ahead in the chain" in (
        CVE_CHAIN_PROMPT_PREFIX
    )


def test_cve_prompt_rejects_empty_context():
    with pytest.raises(EmptyContext):
        build_cve_prompt(context_from_text(""))


def test_report_prompt_joins_with_blank_line():
    assert build_report_prompt("One sentence.") == REPORT_PROMPT_PREFIX + "\n\nOne sentence."


def test_report_prompt_phrases():
    assert "Do not give a simplified graph" in REPORT_PROMPT_PREFIX
    assert "Do not put text before or after json" in REPORT_PROMPT_PREFIX


def test_report_prompt_rejects_blank_text():
    with pytest.raises(EmptyReport):
        build_report_prompt("   \n")


def test_zoom_prompt_carries_all_edge_fields():
    prompt = build_zoom_prompt("from label", "to label", "edge label", "the context")
    assert "Edge source: from label" in prompt
    assert "Edge target: to label" in prompt
    assert "Edge label: edge label" in prompt
    assert prompt.endswith("Context:\nthe context")


def test_request_requires_exactly_one_input():
    with pytest.raises(ValueError):
        GenerationRequest()
    with pytest.raises(ValueError):
        GenerationRequest(query="q", report_path=Path("r.txt"))


def test_request_rejects_chunked_report_mode():
    with pytest.raises(ValueError):
        GenerationRequest(report_path=Path("r.txt"), chunk_token_budget=100)


def test_request_rejects_non_positive_budget():
    with pytest.raises(ValueError):
        GenerationRequest(query="q", chunk_token_budget=0)


def test_file_stamp_format():
    assert file_stamp(FIXED_CLOCK()) == "20260102T030405Z"


def test_split_single_description_is_identity():
    text = SEPARATOR + "only one here"
    assert split_into_chunks(text, 1000) == [text]


def test_split_respects_budget_and_reassembles():
    chunks = split_into_chunks(RASPBERRY_CONTEXT, 250)
    assert len(chunks) == 3
    for chunk in chunks:
        assert chunk.startswith(SEPARATOR)
        assert count_tokens(chunk) < 250
    assert "".join(chunks) == RASPBERRY_CONTEXT


def test_split_raises_when_one_description_cannot_fit():
    with pytest.raises(ChunkTooSmall):
        split_into_chunks(RASPBERRY_CONTEXT, 200)  # longest description needs 218


def test_generate_from_context_end_to_end(catalog, tmp_path):
    transport = StubTransport()
    result = generate_from_context(
        raspberry_context(),
        "Raspberry Pi",
        catalog,
        transport,
        model_id="stub-model",
        output_dir=tmp_path,
        clock=FIXED_CLOCK,
    )
    assert result.path == tmp_path / "graph-20260102T030405Z.json"
    assert result.path.exists()
    stored = parse_graph(result.path.read_text(encoding="utf-8"))
    assert validate(stored) == []
    assert stored == result.graph
    assert len(result.graph.nodes) == 4
    assert len(result.graph.edges) == 3
    assert result.prompts == (CVE_CHAIN_PROMPT_PREFIX + RASPBERRY_CONTEXT,)
    assert result.model_id == "stub-model"
    assert result.transport_id == "stub"
    assert result.repaired is False
    row = catalog.get_graph(result.graph_id)
    assert row[2] == "Raspberry Pi"
    assert parse_graph(row[3]) == result.graph


def test_chunked_generation_merges_chunk_graphs(catalog, tmp_path):
    transport = StubTransport()
    result = generate_from_context(
        raspberry_context(),
        "Raspberry Pi",
        catalog,
        transport,
        chunk_token_budget=250,
        output_dir=tmp_path,
        clock=FIXED_CLOCK,
    )
    assert len(transport.calls) == 3
    assert len(result.prompts) == 3
    # Chunks [2, 1, 1]: only the first chunk chains, so one edge survives.
    assert len(result.graph.nodes) == 4
    assert len(result.graph.edges) == 1
    assert result.graph.edges[0] == Edge("n1", "n2", "enables")


def test_generate_chunked_one_chunk_equals_unchunked():
    context = raspberry_context()
    chunked = generate_chunked(context, 10_000, StubTransport())
    prompt = build_cve_prompt(context)
    unchunked = parse_graph(StubTransport().send(prompt))
    # The chunk pass renumbers ids through merge; compare shapes.
    assert [n.label for n in chunked.nodes] == [n.label for n in unchunked.nodes]
    assert len(chunked.edges) == len(unchunked.edges)


def test_chunked_shared_label_deduplicates():
    shared = {"id": "n1", "label": "Shared Step", "precondition": "network access"}
    answers = [
        json.dumps({"nodes": [shared], "edges": []}),
        json.dumps(
            {
                "nodes": [shared, {"id": "n2", "label": "Second Step"}],
                "edges": [{"from": "n1", "to": "n2", "label": "enables"}],
            }
        ),
    ]
    transport = ScriptedTransport(answers=answers)
    # Each piece is 13 and 11 tokens with its separator; together they are 24,
    # so a budget of 20 forces one description per chunk.
    context = context_from_text(SEPARATOR + "alpha " * 8 + SEPARATOR + "beta " * 8)
    graph = generate_chunked(context, 20, transport)
    assert [(n.id, n.label) for n in graph.nodes] == [
        ("n1", "Shared Step"),
        ("n2", "Second Step"),
    ]
    assert graph.edges == (Edge("n1", "n2", "enables"),)


def test_prose_wrapped_answer_still_parses(catalog, tmp_path):
    graph_json = json.dumps({"nodes": [{"id": "a", "label": "A"}], "edges": []})
    transport = ScriptedTransport(answers=[f"Sure thing!\n```json\n{graph_json}\n```"])
    result = generate_from_context(
        raspberry_context(), "q", catalog, transport, output_dir=tmp_path, clock=FIXED_CLOCK
    )
    assert [n.label for n in result.graph.nodes] == ["A"]
    assert result.repaired is False


def test_truncated_answer_is_repaired_and_flagged(catalog, tmp_path):
    truncated = '{"nodes":[{"id":"a","label":"A"},{"id":"b","la'
    transport = ScriptedTransport(answers=[truncated])
    result = generate_from_context(
        raspberry_context(), "q", catalog, transport, output_dir=tmp_path, clock=FIXED_CLOCK
    )
    assert result.repaired is True
    assert [n.id for n in result.graph.nodes] == ["a"]
    assert result.path.exists()


def test_unusable_answer_raises_graph_parse_error(catalog, tmp_path):
    transport = ScriptedTransport(answers=["there is no graph here"])
    with pytest.raises(GraphParseError):
        generate_from_context(
            raspberry_context(), "q", catalog, transport, output_dir=tmp_path
        )
    assert catalog.list_graphs() == []  # nothing stored on failure


def test_oversize_prompt_fails_before_sending(catalog, tmp_path):
    transport = StubTransport(max_prompt_tokens=50)
    with pytest.raises(PromptTooLarge):
        generate_from_context(
            raspberry_context(), "q", catalog, transport, output_dir=tmp_path
        )
    assert transport.calls == []


def test_chunk_budget_above_transport_ceiling_fails_fast(catalog, tmp_path):
    transport = StubTransport(max_prompt_tokens=100)
    with pytest.raises(PromptTooLarge):
        generate_from_context(
            raspberry_context(),
            "q",
            catalog,
            transport,
            chunk_token_budget=250,
            output_dir=tmp_path,
        )
    assert transport.calls == []


def test_generate_query_mode_requires_embedder(ingested_catalog):
    request = GenerationRequest(query="Raspberry Pi")
    with pytest.raises(ValueError):
        generate(request, ingested_catalog, StubTransport())


def test_generate_report_mode_reads_file(catalog, tmp_path):
    report = tmp_path / "incident.txt"
    report.write_text("Attacker got in. Attacker moved laterally. Data left the building.")
    request = GenerationRequest(report_path=report, model_id="m")
    result = generate(request, catalog, StubTransport(), output_dir=tmp_path, clock=FIXED_CLOCK)
    # One node per sentence, chained.
    assert len(result.graph.nodes) == 3
    assert len(result.graph.edges) == 2
    assert catalog.get_graph(result.graph_id)[2] == f"report:{report}"


def test_generate_report_mode_missing_file_raises_oserror(catalog, tmp_path):
    request = GenerationRequest(report_path=tmp_path / "absent.txt")
    with pytest.raises(OSError):
        generate(request, catalog, StubTransport(), output_dir=tmp_path)


def test_report_label_defaults_to_text_prefix(catalog, tmp_path):
    result = generate_from_report_text(
        "Short report.", catalog, StubTransport(), output_dir=tmp_path, clock=FIXED_CLOCK
    )
    assert catalog.get_graph(result.graph_id)[2] == "report:Short report."


def test_write_graph_file_collision_gets_id_suffix(tmp_path):
    graph = AttackGraph(nodes=(Node("a", "A"),))
    first = write_graph_file(graph, tmp_path, "20260102T030405Z", 1)
    second = write_graph_file(graph, tmp_path, "20260102T030405Z", 2)
    assert first.name == "graph-20260102T030405Z.json"
    assert second.name == "graph-20260102T030405Z-2.json"
    assert first.exists() and second.exists()


def stub_generated_graph() -> AttackGraph:
    return parse_graph(StubTransport().send(CVE_CHAIN_PROMPT_PREFIX + RASPBERRY_CONTEXT))


def test_zoom_edge_not_in_graph():
    graph = stub_generated_graph()
    with pytest.raises(EdgeNotInGraph):
        zoom_edge(graph, Edge("n1", "n9", "enables"), RASPBERRY_CONTEXT, StubTransport())


def test_zoom_returns_matching_context_segment():
    graph = stub_generated_graph()
    transport = StubTransport()
    excerpt = zoom_edge(graph, Edge("n1", "n2", "enables"), RASPBERRY_CONTEXT, transport)
    assert excerpt == DESCRIPTIONS["CVE-2019-25089"]
    prompt = transport.calls[-1]
    assert "Edge source: The web application component of piSignage" in prompt
    assert "Edge target: An issue was discovered in includes/webconsole.php" in prompt
    assert "Edge label: enables" in prompt
    assert RASPBERRY_CONTEXT in prompt


def test_zoom_answer_returned_verbatim():
    graph = stub_generated_graph()
    transport = ScriptedTransport(answers=["  the exact excerpt\nwith lines  "])
    excerpt = zoom_edge(graph, Edge("n1", "n2", "enables"), RASPBERRY_CONTEXT, transport)
    assert excerpt == "  the exact excerpt\nwith lines  "


def test_manual_transport_round_trip(tmp_path):
    transport = ManualTransport(tmp_path / "exchange", timeout_s=5.0, poll_interval_s=0.01)
    # Pre-placed answer: send returns immediately.
    (tmp_path / "exchange").mkdir(exist_ok=True)
    (tmp_path / "exchange" / "answer-1.txt").write_text("first answer", encoding="utf-8")
    assert transport.send("first prompt") == "first answer"
    assert (tmp_path / "exchange" / "prompt-1.txt").read_text(encoding="utf-8") == "first prompt"

    # Second call advances the counter; answer arrives while polling.
    def respond():
        time.sleep(0.05)
        (tmp_path / "exchange" / "answer-2.txt").write_text("second answer", encoding="utf-8")

    thread = threading.Thread(target=respond)
    thread.start()
    try:
        assert transport.send("second prompt") == "second answer"
    finally:
        thread.join()
    assert (tmp_path / "exchange" / "prompt-2.txt").exists()


def test_manual_transport_times_out(tmp_path):
    transport = ManualTransport(tmp_path, timeout_s=0.1, poll_interval_s=0.01)
    with pytest.raises(TransportTimeout):
        transport.send("never answered")


def test_manual_transport_unreadable_answer(tmp_path):
    transport = ManualTransport(tmp_path, timeout_s=1.0, poll_interval_s=0.01)
    (tmp_path / "answer-1.txt").mkdir()  # a directory cannot be read as text
    with pytest.raises(TransportError):
        transport.send("prompt")


def completion_body(text: str) -> str:
    return json.dumps({"choices": [{"message": {"content": text}}]})


def test_api_transport_success_and_payload_shape():
    with ScriptedEndpoint([(200, completion_body("the answer"))]) as endpoint:
        transport = ApiTransport(url=endpoint.url, model="m1", key="sekrit")
        assert transport.send("hello") == "the answer"
        assert transport.transport_id == "api:m1"
        sent = json.loads(endpoint.requests[0])
        assert sent["model"] == "m1"
        assert sent["messages"] == [{"role": "user", "content": "hello"}]
        assert sent["max_tokens"] == transport.max_answer_tokens
        assert endpoint.headers_seen[0].get("Authorization") == "Bearer sekrit"


def test_api_transport_omits_auth_header_without_key():
    with ScriptedEndpoint([(200, completion_body("x"))]) as endpoint:
        ApiTransport(url=endpoint.url, model="m").send("p")
        assert "Authorization" not in endpoint.headers_seen[0]


def test_api_transport_retries_transient_failures():
    script = [(500, "boom"), (429, "slow down"), (200, completion_body("ok"))]
    with ScriptedEndpoint(script) as endpoint:
        transport = ApiTransport(url=endpoint.url, model="m", backoff_s=0.01)
        assert transport.send("p") == "ok"
        assert len(endpoint.requests) == 3


def test_api_transport_gives_up_after_retries():
    with ScriptedEndpoint([(503, "down")]) as endpoint:
        transport = ApiTransport(url=endpoint.url, model="m", backoff_s=0.01, max_retries=2)
        with pytest.raises(TransportError):
            transport.send("p")
        assert len(endpoint.requests) == 3  # initial try plus two retries


def test_api_transport_client_error_fails_immediately():
    with ScriptedEndpoint([(400, "bad request")]) as endpoint:
        transport = ApiTransport(url=endpoint.url, model="m", backoff_s=0.01)
        with pytest.raises(TransportError):
            transport.send("p")
        assert len(endpoint.requests) == 1


def test_api_transport_rejects_malformed_completion():
    with ScriptedEndpoint([(200, '{"choices": []}')]) as endpoint:
        with pytest.raises(TransportError):
            ApiTransport(url=endpoint.url, model="m").send("p")
    with ScriptedEndpoint([(200, "not json")]) as endpoint:
        with pytest.raises(TransportError):
            ApiTransport(url=endpoint.url, model="m").send("p")


def test_api_transport_connection_failure_maps_to_transport_error():
    transport = ApiTransport(url="http://127.0.0.1:9/", model="m", backoff_s=0.01, max_retries=1)
    with pytest.raises(TransportError):
        transport.send("p")


def test_api_transport_from_env(monkeypatch):
    monkeypatch.delenv(ENV_URL, raising=False)
    monkeypatch.delenv(ENV_MODEL, raising=False)
    monkeypatch.delenv(ENV_KEY, raising=False)
    with pytest.raises(TransportError) as exc_info:
        ApiTransport.from_env()
    assert ENV_URL in str(exc_info.value)
    assert ENV_MODEL in str(exc_info.value)

    monkeypatch.setenv(ENV_URL, "http://example.invalid/v1")
    monkeypatch.setenv(ENV_MODEL, "m2")
    monkeypatch.setenv(ENV_KEY, "k")
    transport = ApiTransport.from_env()
    assert transport.url == "http://example.invalid/v1"
    assert transport.model == "m2"
    assert transport.key == "k"
    assert transport.transport_id == "api:m2"

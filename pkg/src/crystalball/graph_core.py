"""Attack-graph model, JSON extraction/repair from LLM answers, validation,
merging, and DOT export. Everything here is pure."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass

from .errors import NoGraphFound, SchemaError, Unrepairable

logger = logging.getLogger(__name__)

PLACEHOLDER_LABEL = "(unresolved)"


@dataclass(frozen=True)
class Node:
    id: str
    label: str
    precondition: str | None = None
    postcondition: str | None = None


@dataclass(frozen=True)
class Edge:
    src: str
    dst: str
    label: str = ""


@dataclass(frozen=True)
class AttackGraph:
    nodes: tuple[Node, ...] = ()
    edges: tuple[Edge, ...] = ()

    def node_by_id(self, node_id: str) -> Node | None:
        for node in self.nodes:
            if node.id == node_id:
                return node
        return None


EMPTY_GRAPH = AttackGraph()


def _node_obj(node: Node) -> dict:
    obj: dict = {"id": node.id, "label": node.label}
    if node.precondition is not None:
        obj["precondition"] = node.precondition
    if node.postcondition is not None:
        obj["postcondition"] = node.postcondition
    return obj


def graph_to_obj(graph: AttackGraph) -> dict:
    """Canonical JSON shape: top-level keys exactly nodes and edges."""
    return {
        "nodes": [_node_obj(n) for n in graph.nodes],
        "edges": [{"from": e.src, "to": e.dst, "label": e.label} for e in graph.edges],
    }


def render_graph_json(graph: AttackGraph) -> str:
    return json.dumps(graph_to_obj(graph), indent=2, ensure_ascii=False) + "\n"


# -- answer post-processing ----------------------------------------------------


def _balanced_region(text: str, start: int) -> int | None:
    """End index (exclusive) of the balanced {...} starting at start, else None."""
    depth = 0
    in_string = False
    escape = False
    for i in range(start, len(text)):
        ch = text[i]
        if in_string:
            if escape:
                escape = False
            elif ch == "\\":
                escape = True
            elif ch == '"':
                in_string = False
            continue
        if ch == '"':
            in_string = True
        elif ch in "{[":
            depth += 1
        elif ch in "}]":
            depth -= 1
            if depth == 0:
                return i + 1
            if depth < 0:
                return None
    return None


def extract_graph_json(answer: str) -> str:
    """First balanced top-level {...} region holding a "nodes" key.

    Models wrap JSON in prose or code fences; scanning for braces skips both.
    A region that fails to close (truncated answer) is still returned if it
    mentions "nodes"; repair happens downstream.
    """
    pos = answer.find("{")
    while pos != -1:
        end = _balanced_region(answer, pos)
        if end is None:
            candidate = answer[pos:]
            if '"nodes"' in candidate:
                return candidate
        else:
            candidate = answer[pos:end]
            if '"nodes"' in candidate:
                try:
                    doc = json.loads(candidate)
                except json.JSONDecodeError:
                    return candidate
                if isinstance(doc, dict) and "nodes" in doc:
                    return candidate
        pos = answer.find("{", pos + 1)
    raise NoGraphFound("no JSON object with a nodes key in answer")


def repair_truncated(raw: str) -> tuple[str, bool]:
    """Make truncated graph JSON parseable by cutting back to the last
    structurally complete array element and closing what remains open.

    Complete input is returned unchanged. Raises Unrepairable when no array
    element ever completed before the truncation point.
    """
    if not raw or raw[0] != "{":
        raise Unrepairable("input does not begin with '{'")
    try:
        json.loads(raw)
        return raw, False
    except json.JSONDecodeError:
        pass

    stack: list[str] = []
    in_string = False
    escape = False
    in_bare = False  # inside a bare scalar token that is an array element
    last_cut: int | None = None
    last_stack: tuple[str, ...] = ()

    def mark(cut: int) -> None:
        nonlocal last_cut, last_stack
        last_cut = cut
        last_stack = tuple(stack)

    for i, ch in enumerate(raw):
        if in_string:
            if escape:
                escape = False
            elif ch == "\\":
                escape = True
            elif ch == '"':
                in_string = False
                if stack and stack[-1] == "[":
                    mark(i + 1)  # string element of an array completed
            continue
        if ch == '"':
            in_string = True
            in_bare = False
        elif ch in "{[":
            stack.append(ch)
            in_bare = False
        elif ch in "}]":
            if not stack or stack[-1] != ("{" if ch == "}" else "["):
                break  # mismatched closer; salvage what was marked so far
            stack.pop()
            in_bare = False
            if stack and stack[-1] == "[":
                mark(i + 1)  # container element of an array completed
        elif ch == ",":
            if in_bare and stack and stack[-1] == "[":
                mark(i)  # bare scalar element completed just before the comma
            in_bare = False
        elif ch == ":":
            in_bare = False
        elif not ch.isspace():
            if stack and stack[-1] == "[":
                in_bare = True

    if last_cut is None:
        raise Unrepairable("no structurally complete array element before truncation")
    repaired = raw[:last_cut] + "".join(
        "]" if c == "[" else "}" for c in reversed(last_stack)
    )
    try:
        json.loads(repaired)
    except json.JSONDecodeError as exc:  # malformed beyond truncation damage
        raise Unrepairable(f"cut-back did not yield valid JSON: {exc}") from exc
    return repaired, True


def _text(value: object) -> str | None:
    if value is None or isinstance(value, (dict, list)):
        return None
    text = value if isinstance(value, str) else str(value)
    return text if text else None


def parse_graph(raw: str) -> AttackGraph:
    """Tolerant mapping from model JSON to an AttackGraph.

    Accepts "source"/"target" as edge-key aliases, coerces non-string ids,
    and synthesizes placeholder nodes for dangling edge endpoints so that the
    result always satisfies the graph invariants.
    """
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise SchemaError("top-level JSON value is not an object")
    raw_nodes = doc.get("nodes")
    if not isinstance(raw_nodes, list):
        raise SchemaError("nodes key absent or not an array")
    raw_edges = doc.get("edges", [])
    if not isinstance(raw_edges, list):
        raise SchemaError("edges key is not an array")

    nodes: list[Node] = []
    by_id: dict[str, Node] = {}
    for entry in raw_nodes:
        if isinstance(entry, str) and entry:
            entry = {"id": entry, "label": entry}
        if not isinstance(entry, dict):
            continue
        node_id = _text(entry.get("id"))
        label = _text(entry.get("label"))
        if node_id is None:
            node_id = label
        if node_id is None:
            continue
        if label is None:
            label = node_id
        if node_id in by_id:
            logger.debug("dropping duplicate node id %r", node_id)
            continue
        node = Node(
            id=node_id,
            label=label,
            precondition=_text(entry.get("precondition")),
            postcondition=_text(entry.get("postcondition")),
        )
        by_id[node_id] = node
        nodes.append(node)

    edges: list[Edge] = []
    seen_edges: set[tuple[str, str, str]] = set()
    for entry in raw_edges:
        if not isinstance(entry, dict):
            continue
        src = _text(entry.get("from", entry.get("source")))
        dst = _text(entry.get("to", entry.get("target")))
        if src is None or dst is None:
            continue
        label = _text(entry.get("label")) or ""
        key = (src, dst, label)
        if key in seen_edges:
            continue
        seen_edges.add(key)
        for endpoint in (src, dst):
            if endpoint not in by_id:
                placeholder = Node(id=endpoint, label=PLACEHOLDER_LABEL)
                by_id[endpoint] = placeholder
                nodes.append(placeholder)
        edges.append(Edge(src, dst, label))

    return AttackGraph(tuple(nodes), tuple(edges))


# -- merging ---------------------------------------------------------------


def _normalize_label(label: str) -> str:
    return " ".join(label.split()).lower()


def merge(a: AttackGraph, b: AttackGraph, report: list[str] | None = None) -> AttackGraph:
    """Union two graphs, unifying nodes by normalized label.

    Chunk-local ids carry no global meaning, so label identity governs. On
    collision the first-seen node wins (conditions included; alternates go to
    the report if one is passed). Output ids are n1..nk in first-appearance
    order; edges are rewritten onto them and deduplicated by (from, to, label).
    """
    nodes: list[Node] = []
    index_by_label: dict[str, int] = {}
    edges: dict[tuple[str, str, str], Edge] = {}
    for graph in (a, b):
        id_map: dict[str, str] = {}
        for node in graph.nodes:
            key = _normalize_label(node.label)
            idx = index_by_label.get(key)
            if idx is None:
                idx = len(nodes)
                index_by_label[key] = idx
                nodes.append(
                    Node(f"n{idx + 1}", node.label, node.precondition, node.postcondition)
                )
            else:
                kept = nodes[idx]
                differs = (
                    node.precondition != kept.precondition
                    or node.postcondition != kept.postcondition
                )
                if differs and report is not None:
                    report.append(
                        f"label {kept.label!r}: kept first-seen conditions, dropped "
                        f"precondition={node.precondition!r} postcondition={node.postcondition!r}"
                    )
            id_map[node.id] = nodes[idx].id
        for edge in graph.edges:
            src = id_map.get(edge.src)
            dst = id_map.get(edge.dst)
            if src is None or dst is None:
                continue  # edge into a node the (invalid) input never declared
            key = (src, dst, edge.label)
            if key not in edges:
                edges[key] = Edge(src, dst, edge.label)
    return AttackGraph(tuple(nodes), tuple(edges.values()))


def merge_many(graphs: list[AttackGraph], report: list[str] | None = None) -> AttackGraph:
    merged = EMPTY_GRAPH
    for graph in graphs:
        merged = merge(merged, graph, report)
    return merged


def canonical_form(graph: AttackGraph) -> tuple:
    """Comparison key invariant under id renaming: sorted normalized node
    labels plus sorted edge triples expressed via endpoint labels."""
    label_of = {n.id: _normalize_label(n.label) for n in graph.nodes}
    nodes = tuple(sorted(_normalize_label(n.label) for n in graph.nodes))
    edges = tuple(sorted((label_of[e.src], label_of[e.dst], e.label) for e in graph.edges))
    return nodes, edges


# -- validation and export ---------------------------------------------------


def validate(graph: AttackGraph, allow_self_loops: bool = True) -> list[str]:
    """Invariant check; empty list means valid."""
    violations: list[str] = []
    seen_ids: set[str] = set()
    for node in graph.nodes:
        if not node.id:
            violations.append("node with empty id")
            continue
        if not node.label:
            violations.append(f"node {node.id!r} has empty label")
        if node.id in seen_ids:
            violations.append(f"duplicate node id: {node.id!r}")
        seen_ids.add(node.id)
    seen_edges: set[tuple[str, str, str]] = set()
    for edge in graph.edges:
        key = (edge.src, edge.dst, edge.label)
        if key in seen_edges:
            violations.append(f"duplicate edge: {edge.src!r} -> {edge.dst!r} [{edge.label!r}]")
        seen_edges.add(key)
        for endpoint in (edge.src, edge.dst):
            if endpoint not in seen_ids:
                violations.append(
                    f"edge references missing node: {edge.src!r} -> {edge.dst!r} ({endpoint!r})"
                )
        if not allow_self_loops and edge.src == edge.dst:
            violations.append(f"self-loop not allowed: {edge.src!r}")
    return violations


def _dot_escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n")


def export_dot(graph: AttackGraph) -> str:
    """Deterministic DOT text; nodes ordered by id, edges by (from, to, label)."""
    lines = ["digraph G {"]
    for node in sorted(graph.nodes, key=lambda n: n.id):
        attrs = [f'label="{_dot_escape(node.label)}"']
        tooltip_bits = []
        if node.precondition is not None:
            tooltip_bits.append(f"pre: {node.precondition}")
        if node.postcondition is not None:
            tooltip_bits.append(f"post: {node.postcondition}")
        if tooltip_bits:
            attrs.append(f'tooltip="{_dot_escape("; ".join(tooltip_bits))}"')
        lines.append(f'  "{_dot_escape(node.id)}" [{" ".join(attrs)}];')
    for edge in sorted(graph.edges, key=lambda e: (e.src, e.dst, e.label)):
        lines.append(
            f'  "{_dot_escape(edge.src)}" -> "{_dot_escape(edge.dst)}" '
            f'[label="{_dot_escape(edge.label)}"];'
        )
    lines.append("}")
    return "\n".join(lines) + "\n"

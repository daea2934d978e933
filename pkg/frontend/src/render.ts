import { NODE_HEIGHT, NODE_WIDTH, layeredLayout } from "./layout.js";
import type { AttackGraph, GraphEdge, GraphNode } from "./types.js";

const SVG_NS = "http://www.w3.org/2000/svg";
const LABEL_CHARS = 26;

export type EdgeSelectHandler = (edge: GraphEdge) => void;

function svgElement(name: string): SVGElement {
  return document.createElementNS(SVG_NS, name);
}

function edgeKey(edge: GraphEdge): string {
  return JSON.stringify([edge.from, edge.to, edge.label]);
}

function clipLabel(label: string): string {
  if (label.length <= LABEL_CHARS) {
    return label;
  }
  return label.slice(0, LABEL_CHARS - 3) + "...";
}

function nodeTooltip(node: GraphNode): string {
  const lines = [node.label];
  if (node.precondition !== undefined) {
    lines.push(`pre: ${node.precondition}`);
  }
  if (node.postcondition !== undefined) {
    lines.push(`post: ${node.postcondition}`);
  }
  return lines.join("\n");
}

/**
 * Renders the graph as an SVG with nodes in layered rows and arrowed edges
 * between them. Clicking an edge reports it through onEdgeSelect; the caller
 * owns the selection state and applies it with markSelectedEdge.
 */
export function renderGraph(graph: AttackGraph, seed: number, onEdgeSelect: EdgeSelectHandler): SVGSVGElement {
  const layout = layeredLayout(graph, seed);
  const svg = svgElement("svg") as SVGSVGElement;
  svg.setAttribute("viewBox", `0 0 ${layout.width} ${layout.height}`);
  svg.setAttribute("width", String(layout.width));
  svg.setAttribute("height", String(layout.height));

  const defs = svgElement("defs");
  const marker = svgElement("marker");
  marker.setAttribute("id", "arrow");
  marker.setAttribute("viewBox", "0 0 8 8");
  marker.setAttribute("refX", "8");
  marker.setAttribute("refY", "4");
  marker.setAttribute("markerWidth", "8");
  marker.setAttribute("markerHeight", "8");
  marker.setAttribute("orient", "auto");
  const tip = svgElement("path");
  tip.setAttribute("d", "M0,0 L8,4 L0,8 z");
  marker.appendChild(tip);
  defs.appendChild(marker);
  svg.appendChild(defs);

  // Edges first so node boxes paint over the line ends.
  for (const edge of graph.edges) {
    const a = layout.positions.get(edge.from);
    const b = layout.positions.get(edge.to);
    if (a === undefined || b === undefined) {
      continue;
    }
    const group = svgElement("g");
    group.setAttribute("class", "edge");
    group.setAttribute("data-edge-key", edgeKey(edge));

    const x1 = a.x;
    const y1 = a.y + NODE_HEIGHT / 2;
    const x2 = b.x;
    const y2 = b.y - NODE_HEIGHT / 2;

    const line = svgElement("line");
    line.setAttribute("class", "edge-line");
    line.setAttribute("x1", String(x1));
    line.setAttribute("y1", String(y1));
    line.setAttribute("x2", String(x2));
    line.setAttribute("y2", String(y2));
    line.setAttribute("marker-end", "url(#arrow)");
    group.appendChild(line);

    // Fat transparent twin of the line so clicks do not need pixel aim.
    const hit = svgElement("line");
    hit.setAttribute("class", "edge-hit");
    hit.setAttribute("x1", String(x1));
    hit.setAttribute("y1", String(y1));
    hit.setAttribute("x2", String(x2));
    hit.setAttribute("y2", String(y2));
    group.appendChild(hit);

    const text = svgElement("text");
    text.setAttribute("class", "edge-label");
    text.setAttribute("x", String((x1 + x2) / 2 + 6));
    text.setAttribute("y", String((y1 + y2) / 2 - 4));
    text.textContent = edge.label;
    group.appendChild(text);

    group.addEventListener("click", () => onEdgeSelect(edge));
    svg.appendChild(group);
  }

  for (const node of graph.nodes) {
    const at = layout.positions.get(node.id);
    if (at === undefined) {
      continue;
    }
    const group = svgElement("g");
    group.setAttribute("class", "node");
    group.setAttribute("data-node-id", node.id);

    const box = svgElement("rect");
    box.setAttribute("x", String(at.x - NODE_WIDTH / 2));
    box.setAttribute("y", String(at.y - NODE_HEIGHT / 2));
    box.setAttribute("width", String(NODE_WIDTH));
    box.setAttribute("height", String(NODE_HEIGHT));
    box.setAttribute("rx", "6");
    group.appendChild(box);

    const text = svgElement("text");
    text.setAttribute("x", String(at.x));
    text.setAttribute("y", String(at.y + 4));
    text.setAttribute("text-anchor", "middle");
    text.textContent = clipLabel(node.label);
    group.appendChild(text);

    const title = svgElement("title");
    title.textContent = nodeTooltip(node);
    group.appendChild(title);

    svg.appendChild(group);
  }

  return svg;
}

/** Moves the .selected class to the group matching the edge, or clears it. */
export function markSelectedEdge(svg: SVGSVGElement, edge: GraphEdge | null): void {
  for (const group of Array.from(svg.querySelectorAll("g.edge.selected"))) {
    group.classList.remove("selected");
  }
  if (edge === null) {
    return;
  }
  const key = edgeKey(edge);
  for (const group of Array.from(svg.querySelectorAll("g.edge"))) {
    if (group.getAttribute("data-edge-key") === key) {
      group.classList.add("selected");
    }
  }
}

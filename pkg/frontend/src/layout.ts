import type { AttackGraph } from "./types.js";

export interface Point {
  x: number;
  y: number;
}

export interface Layout {
  positions: Map<string, Point>;
  width: number;
  height: number;
}

export const NODE_WIDTH = 190;
export const NODE_HEIGHT = 46;

const COLUMN_GAP = 42;
const ROW_GAP = 120;
const MARGIN = 32;
const JITTER = 5;

// Tiny deterministic PRNG (mulberry32). The layout seed feeds this and
// nothing else, so a fixed seed always reproduces the same picture.
function mulberry32(seed: number): () => number {
  let state = seed >>> 0;
  return () => {
    state = (state + 0x6d2b79f5) >>> 0;
    let t = state;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

/**
 * Longest-path layering. Roots are the nodes with no incoming edges and sit
 * on row zero; every other node sits one row below its deepest predecessor,
 * so edges always point downward in an acyclic graph. Depths are capped at
 * the node count, which stops cycles from relaxing forever.
 */
function assignLayers(graph: AttackGraph): Map<string, number> {
  const depth = new Map<string, number>();
  const hasIncoming = new Set(graph.edges.map((edge) => edge.to));
  for (const node of graph.nodes) {
    if (!hasIncoming.has(node.id)) {
      depth.set(node.id, 0);
    }
  }
  if (depth.size === 0 && graph.nodes.length > 0) {
    // Every node is on a cycle; seed the first one so layering can start.
    depth.set(graph.nodes[0].id, 0);
  }
  const cap = graph.nodes.length;
  for (let pass = 0; pass < cap; pass++) {
    let changed = false;
    for (const edge of graph.edges) {
      const from = depth.get(edge.from);
      if (from === undefined || from + 1 > cap) {
        continue;
      }
      if ((depth.get(edge.to) ?? -1) < from + 1) {
        depth.set(edge.to, from + 1);
        changed = true;
      }
    }
    if (!changed) {
      break;
    }
  }
  for (const node of graph.nodes) {
    if (!depth.has(node.id)) {
      depth.set(node.id, 0);
    }
  }
  return depth;
}

export function layeredLayout(graph: AttackGraph, seed: number): Layout {
  const depth = assignLayers(graph);
  const rows = new Map<number, string[]>();
  let rowCount = 0;
  for (const node of graph.nodes) {
    const layer = depth.get(node.id) ?? 0;
    const row = rows.get(layer);
    if (row === undefined) {
      rows.set(layer, [node.id]);
    } else {
      row.push(node.id);
    }
    rowCount = Math.max(rowCount, layer + 1);
  }

  let widest = 0;
  for (const row of rows.values()) {
    widest = Math.max(widest, row.length);
  }
  const width = 2 * MARGIN + Math.max(1, widest) * NODE_WIDTH + Math.max(0, widest - 1) * COLUMN_GAP;
  const height = rowCount === 0 ? 2 * MARGIN : 2 * MARGIN + NODE_HEIGHT + (rowCount - 1) * ROW_GAP;

  const rng = mulberry32(seed);
  const positions = new Map<string, Point>();
  for (let layer = 0; layer < rowCount; layer++) {
    const row = rows.get(layer) ?? [];
    const rowWidth = row.length * NODE_WIDTH + (row.length - 1) * COLUMN_GAP;
    const left = (width - rowWidth) / 2;
    for (let slot = 0; slot < row.length; slot++) {
      positions.set(row[slot], {
        x: left + slot * (NODE_WIDTH + COLUMN_GAP) + NODE_WIDTH / 2 + (rng() * 2 - 1) * JITTER,
        y: MARGIN + NODE_HEIGHT / 2 + layer * ROW_GAP + (rng() * 2 - 1) * JITTER,
      });
    }
  }
  return { positions, width, height };
}

import type { AttackGraph, GraphListing } from "../src/types.js";

export interface RecordedCall {
  method: string;
  path: string;
  body: unknown;
}

interface StubResponse {
  status: number;
  json(): Promise<unknown>;
}

function respond(status: number, payload: unknown): StubResponse {
  return { status, json: async () => payload };
}

/**
 * In-memory stand-in for the graph service, wired in as the global fetch.
 * Records every call and refuses paths outside the five real endpoints, so
 * a test fails loudly if the UI ever talks anywhere else.
 */
export class FakeBackend {
  calls: RecordedCall[] = [];
  graphForGenerate: AttackGraph = { nodes: [], edges: [] };
  graphForExpand: AttackGraph = { nodes: [], edges: [] };
  excerptFor: (edge: { from: string; to: string }) => string = (edge) =>
    `context for ${edge.from}->${edge.to}`;
  failGenerate: { status: number; error: string } | null = null;
  generateGate: Promise<void> | null = null;

  private graphs = new Map<number, AttackGraph>();
  private labels = new Map<number, string>();
  private nextId = 1;

  seed(graph: AttackGraph, label: string): number {
    const id = this.nextId;
    this.nextId += 1;
    this.graphs.set(id, graph);
    this.labels.set(id, label);
    return id;
  }

  readonly fetch = async (
    input: string | URL,
    init?: { method?: string; body?: string },
  ): Promise<StubResponse> => {
    const path = String(input).replace(/^https?:\/\/[^/]+/, "");
    const method = (init?.method ?? "GET").toUpperCase();
    const body: unknown = init?.body === undefined ? null : JSON.parse(init.body);
    this.calls.push({ method, path, body });
    return this.route(method, path, body as Record<string, unknown>);
  };

  private async route(method: string, path: string, body: Record<string, unknown>): Promise<StubResponse> {
    if (method === "GET" && path === "/graphs") {
      const listing: GraphListing[] = [...this.graphs.keys()].map((id) => ({
        graph_id: id,
        created_at: "2026-01-02T03:04:05+00:00",
        query_text: this.labels.get(id) ?? "",
      }));
      return respond(200, listing);
    }
    const detail = /^\/graphs\/(\d+)$/.exec(path);
    if (method === "GET" && detail !== null) {
      const graph = this.graphs.get(Number(detail[1]));
      if (graph === undefined) {
        return respond(404, { error: `no graph with id ${detail[1]}` });
      }
      return respond(200, graph);
    }
    if (method === "POST" && path === "/generate") {
      if (this.generateGate !== null) {
        await this.generateGate;
      }
      if (this.failGenerate !== null) {
        return respond(this.failGenerate.status, { error: this.failGenerate.error });
      }
      const label = String(body["query"] ?? body["report_text"] ?? "");
      return respond(200, { graph_id: this.seed(this.graphForGenerate, label) });
    }
    if (method === "POST" && path === "/zoom") {
      const graph = this.graphs.get(Number(body["graph_id"]));
      if (graph === undefined) {
        return respond(404, { error: "no such graph" });
      }
      const edge = body["edge"] as { from: string; to: string; label: string };
      const known = graph.edges.some(
        (e) => e.from === edge.from && e.to === edge.to && e.label === edge.label,
      );
      if (!known) {
        return respond(400, { error: "edge not in graph" });
      }
      return respond(200, { excerpt: this.excerptFor(edge) });
    }
    if (method === "POST" && path === "/expand") {
      const origin = this.graphs.get(Number(body["graph_id"]));
      if (origin === undefined) {
        return respond(404, { error: "no such graph" });
      }
      if (typeof body["chunk_token_budget"] !== "number") {
        return respond(400, { error: "chunk_token_budget must be a positive integer" });
      }
      const label = this.labels.get(Number(body["graph_id"])) ?? "";
      return respond(200, { graph_id: this.seed(this.graphForExpand, label) });
    }
    throw new Error(`unexpected request: ${method} ${path}`);
  }
}

/** Linear graph: step 1 -> step 2 -> ... with foothold conditions. */
export function chainGraph(count: number): AttackGraph {
  const graph: AttackGraph = { nodes: [], edges: [] };
  for (let i = 1; i <= count; i++) {
    graph.nodes.push({
      id: `n${i}`,
      label: `step ${i}`,
      precondition: `foothold ${i - 1}`,
      postcondition: `foothold ${i}`,
    });
    if (i > 1) {
      graph.edges.push({ from: `n${i - 1}`, to: `n${i}`, label: "enables" });
    }
  }
  return graph;
}

// Two parallel entry paths that rejoin, then split again before root.
export const EIGHT_NODE_GRAPH: AttackGraph = {
  nodes: [
    { id: "n1", label: "Exposed RaspAP web portal" },
    { id: "n2", label: "Default admin credentials accepted", precondition: "network access" },
    { id: "n3", label: "Crafted cookie bypasses session check", precondition: "network access" },
    { id: "n4", label: "Shell commands injected via config form" },
    { id: "n5", label: "www-data shell on the gateway" },
    { id: "n6", label: "Sudoers entry left world-writable" },
    { id: "n7", label: "Cron job runs attacker script" },
    { id: "n8", label: "Root shell persists across reboot", postcondition: "root" },
  ],
  edges: [
    { from: "n1", to: "n2", label: "enables" },
    { from: "n1", to: "n3", label: "enables" },
    { from: "n2", to: "n4", label: "enables" },
    { from: "n3", to: "n4", label: "enables" },
    { from: "n4", to: "n5", label: "enables" },
    { from: "n5", to: "n6", label: "reveals" },
    { from: "n5", to: "n7", label: "schedules" },
    { from: "n6", to: "n8", label: "escalates to" },
    { from: "n7", to: "n8", label: "escalates to" },
  ],
};

import type { AttackGraph, GraphEdge, GraphListing } from "./types.js";

export interface GenerateOptions {
  query?: string;
  reportText?: string;
  chunkTokenBudget?: number;
}

/** Carries the HTTP status plus the service's error message. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

interface JsonResponse {
  status: number;
  json(): Promise<unknown>;
}

async function unwrap<T>(res: JsonResponse): Promise<T> {
  if (res.status >= 400) {
    // Error bodies are {"error": message}; tolerate anything else.
    let message = `request failed with status ${res.status}`;
    try {
      const body = (await res.json()) as { error?: unknown };
      if (typeof body?.error === "string") {
        message = body.error;
      }
    } catch {
      // keep the fallback message
    }
    throw new ApiError(res.status, message);
  }
  return (await res.json()) as T;
}

/**
 * Client for the graph service. These five endpoints are the only network
 * access the UI performs. The service fronts model credentials and listens
 * on loopback by default; point `base` at it directly.
 */
export class ApiClient {
  constructor(readonly base: string) {}

  private async get<T>(path: string): Promise<T> {
    return unwrap<T>(await fetch(this.base + path));
  }

  private async post<T>(path: string, body: object): Promise<T> {
    const res = await fetch(this.base + path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    return unwrap<T>(res);
  }

  listGraphs(): Promise<GraphListing[]> {
    return this.get("/graphs");
  }

  getGraph(graphId: number): Promise<AttackGraph> {
    return this.get(`/graphs/${graphId}`);
  }

  async generate(options: GenerateOptions): Promise<number> {
    const body: Record<string, unknown> = {};
    if (options.query !== undefined) {
      body["query"] = options.query;
    }
    if (options.reportText !== undefined) {
      body["report_text"] = options.reportText;
    }
    if (options.chunkTokenBudget !== undefined) {
      body["chunk_token_budget"] = options.chunkTokenBudget;
    }
    const out = await this.post<{ graph_id: number }>("/generate", body);
    return out.graph_id;
  }

  async zoom(graphId: number, edge: GraphEdge): Promise<string> {
    const out = await this.post<{ excerpt: string }>("/zoom", {
      graph_id: graphId,
      edge: { from: edge.from, to: edge.to, label: edge.label },
    });
    return out.excerpt;
  }

  async expand(graphId: number, chunkTokenBudget: number): Promise<number> {
    const out = await this.post<{ graph_id: number }>("/expand", {
      graph_id: graphId,
      chunk_token_budget: chunkTokenBudget,
    });
    return out.graph_id;
  }
}

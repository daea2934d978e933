import { ApiClient, ApiError, type GenerateOptions } from "./api.js";
import { markSelectedEdge, renderGraph } from "./render.js";
import type { AttackGraph, GraphEdge } from "./types.js";

// Fixed so reloading the same graph always draws the same picture.
export const LAYOUT_SEED = 11;

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  props: Partial<HTMLElementTagNameMap[K]> = {},
): HTMLElementTagNameMap[K] {
  return Object.assign(document.createElement(tag), props);
}

/**
 * Single-page controller. Holds no catalog state of its own: every view is
 * fetched from the service when needed, so a service restart only costs a
 * refresh. Generation and expansion share one pending flag; while it is set
 * both mutation buttons are disabled and repeat submits return immediately.
 */
export class App {
  private readonly api: ApiClient;

  private activeGraphId: number | null = null;
  private selectedEdge: GraphEdge | null = null;
  private pending = false;
  private svg: SVGSVGElement | null = null;

  private readonly modeSelect: HTMLSelectElement;
  private readonly textInput: HTMLTextAreaElement;
  private readonly budgetInput: HTMLInputElement;
  private readonly submitButton: HTMLButtonElement;
  private readonly pendingNote: HTMLSpanElement;
  private readonly banner: HTMLDivElement;
  private readonly notice: HTMLDivElement;
  private readonly refreshButton: HTMLButtonElement;
  private readonly graphList: HTMLUListElement;
  private readonly graphTitle: HTMLHeadingElement;
  private readonly canvas: HTMLDivElement;
  private readonly zoomButton: HTMLButtonElement;
  private readonly expandButton: HTMLButtonElement;
  private readonly excerptPanel: HTMLPreElement;

  constructor(root: HTMLElement, api: ApiClient) {
    this.api = api;

    this.modeSelect = el("select", { id: "mode" });
    this.modeSelect.appendChild(el("option", { value: "query", textContent: "query" }));
    this.modeSelect.appendChild(el("option", { value: "report", textContent: "report text" }));
    this.modeSelect.onchange = () => {
      // Chunking applies to retrieved contexts only; the service rejects it
      // alongside report text, so grey the field out instead.
      this.budgetInput.disabled = this.modeSelect.value === "report";
    };

    this.textInput = el("textarea", { id: "submit-text", rows: 3 });
    this.textInput.placeholder = "product query, or a pasted threat report";
    this.budgetInput = el("input", { id: "chunk-budget", type: "number", placeholder: "chunk token budget" });
    this.budgetInput.min = "1";
    this.submitButton = el("button", { id: "submit-btn", textContent: "Generate" });
    this.submitButton.onclick = () => void this.submit();
    this.pendingNote = el("span", { id: "pending-note", textContent: "waiting for the model...", hidden: true });

    this.banner = el("div", { id: "error-banner", className: "banner", hidden: true });
    this.notice = el("div", { id: "notfound-notice", className: "notice", hidden: true });

    this.refreshButton = el("button", { id: "refresh-btn", textContent: "Refresh" });
    this.refreshButton.onclick = () => void this.refreshList();
    this.graphList = el("ul", { id: "graph-list" });

    this.graphTitle = el("h2", { id: "graph-title", textContent: "no graph loaded" });
    this.canvas = el("div", { id: "canvas" });
    this.zoomButton = el("button", { id: "zoom-btn", textContent: "Zoom into edge", disabled: true });
    this.zoomButton.onclick = () => void this.zoomSelected();
    this.expandButton = el("button", { id: "expand-btn", textContent: "Expand with chunking", disabled: true });
    this.expandButton.onclick = () => void this.expand();
    this.excerptPanel = el("pre", { id: "excerpt-panel" });

    const form = el("div", { className: "topbar" });
    form.append(this.modeSelect, this.textInput, this.budgetInput, this.submitButton, this.pendingNote);

    const side = el("aside");
    side.append(this.refreshButton, this.graphList);

    const controls = el("div", { className: "controls" });
    controls.append(this.zoomButton, this.expandButton);

    const main = el("main");
    main.append(this.graphTitle, this.canvas, controls, this.excerptPanel);

    const columns = el("div", { className: "columns" });
    columns.append(side, main);

    root.append(form, this.banner, this.notice, columns);
  }

  async init(): Promise<void> {
    await this.refreshList();
  }

  private clearMessages(): void {
    this.banner.hidden = true;
    this.notice.hidden = true;
  }

  private showError(exc: unknown): void {
    this.banner.textContent = exc instanceof Error ? exc.message : String(exc);
    this.banner.hidden = false;
  }

  private setPending(value: boolean): void {
    this.pending = value;
    this.submitButton.disabled = value;
    this.expandButton.disabled = value || this.activeGraphId === null;
    this.pendingNote.hidden = !value;
  }

  async refreshList(): Promise<void> {
    this.clearMessages();
    try {
      const listing = await this.api.listGraphs();
      this.graphList.replaceChildren();
      for (const entry of listing) {
        const link = el("a", { href: "#", textContent: `#${entry.graph_id} ${entry.query_text}` });
        link.onclick = (ev) => {
          ev.preventDefault();
          void this.showGraph(entry.graph_id);
        };
        const item = el("li");
        item.appendChild(link);
        this.graphList.appendChild(item);
      }
    } catch (exc) {
      this.showError(exc);
    }
  }

  async showGraph(graphId: number): Promise<void> {
    this.clearMessages();
    let graph: AttackGraph;
    try {
      graph = await this.api.getGraph(graphId);
    } catch (exc) {
      if (exc instanceof ApiError && exc.status === 404) {
        this.notice.textContent = `graph ${graphId} was not found; refresh the list`;
        this.notice.hidden = false;
      } else {
        this.showError(exc);
      }
      return;
    }
    this.activeGraphId = graphId;
    this.selectedEdge = null;
    this.zoomButton.disabled = true;
    this.expandButton.disabled = this.pending;
    this.graphTitle.textContent = `graph ${graphId}: ${graph.nodes.length} nodes, ${graph.edges.length} edges`;
    this.svg = renderGraph(graph, LAYOUT_SEED, (edge) => this.selectEdge(edge));
    this.canvas.replaceChildren(this.svg);
  }

  private selectEdge(edge: GraphEdge): void {
    // The excerpt panel is left alone here on purpose: the analyst reads the
    // last answer while picking the next edge to ask about.
    this.selectedEdge = edge;
    this.zoomButton.disabled = false;
    if (this.svg !== null) {
      markSelectedEdge(this.svg, edge);
    }
  }

  private readBudget(): number | null {
    const raw = this.budgetInput.value.trim();
    if (this.budgetInput.disabled || raw === "") {
      return null;
    }
    const value = Number(raw);
    if (!Number.isInteger(value) || value <= 0) {
      throw new Error("chunk token budget must be a positive whole number");
    }
    return value;
  }

  async submit(): Promise<void> {
    if (this.pending) {
      return;
    }
    this.clearMessages();
    const text = this.textInput.value.trim();
    if (text === "") {
      this.showError(new Error("enter a query or paste a report first"));
      return;
    }
    let options: GenerateOptions;
    try {
      const budget = this.readBudget();
      options = this.modeSelect.value === "report" ? { reportText: text } : { query: text };
      if (budget !== null && options.query !== undefined) {
        options.chunkTokenBudget = budget;
      }
    } catch (exc) {
      this.showError(exc);
      return;
    }
    this.setPending(true);
    try {
      const graphId = await this.api.generate(options);
      await this.refreshList();
      await this.showGraph(graphId);
    } catch (exc) {
      this.showError(exc);
    } finally {
      this.setPending(false);
    }
  }

  async zoomSelected(): Promise<void> {
    if (this.selectedEdge === null || this.activeGraphId === null) {
      return;
    }
    this.clearMessages();
    try {
      const excerpt = await this.api.zoom(this.activeGraphId, this.selectedEdge);
      // textContent, never innerHTML: the excerpt is model output.
      this.excerptPanel.textContent = excerpt;
    } catch (exc) {
      this.showError(exc);
    }
  }

  async expand(): Promise<void> {
    if (this.pending || this.activeGraphId === null) {
      return;
    }
    this.clearMessages();
    let budget: number | null;
    try {
      budget = this.readBudget();
    } catch (exc) {
      this.showError(exc);
      return;
    }
    if (budget === null) {
      this.showError(new Error("expanding needs a chunk token budget"));
      return;
    }
    this.setPending(true);
    try {
      const graphId = await this.api.expand(this.activeGraphId, budget);
      await this.refreshList();
      await this.showGraph(graphId);
    } catch (exc) {
      this.showError(exc);
    } finally {
      this.setPending(false);
    }
  }
}

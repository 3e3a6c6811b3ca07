import { ApiClient, ApiError, bootstrapData, type SleepFn } from "./api.js";
import { Chart } from "./chart.js";
import { renderTrace } from "./tracepanel.js";
import type { LogEntry, QueryResponse } from "./types.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className: string,
  parent: HTMLElement,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  node.className = className;
  parent.appendChild(node);
  return node;
}

function resultTable(response: QueryResponse): HTMLElement {
  const wrap = document.createElement("div");
  wrap.className = "result";
  const table = document.createElement("table");
  table.className = "result-table";
  const head = document.createElement("tr");
  for (const col of response.columns) {
    const th = document.createElement("th");
    th.textContent = col;
    head.appendChild(th);
  }
  table.appendChild(head);
  for (const row of response.rows) {
    const tr = document.createElement("tr");
    for (const cell of row) {
      const td = document.createElement("td");
      td.textContent = String(cell);
      tr.appendChild(td);
    }
    table.appendChild(tr);
  }
  wrap.appendChild(table);
  const count = document.createElement("p");
  count.className = "result-count";
  count.textContent = `${response.rows.length} row(s), ${response.highlights.length} highlighted`;
  wrap.appendChild(count);
  return wrap;
}

function errorCard(title: string, message: string): HTMLElement {
  const card = document.createElement("div");
  card.className = "error-card";
  const head = document.createElement("strong");
  head.className = "error-stage";
  head.textContent = title;
  const body = document.createElement("p");
  body.className = "error-message";
  body.textContent = message;
  card.appendChild(head);
  card.appendChild(body);
  return card;
}

/**
 * The whole console state lives here and is reconstructable from API
 * responses: vessels/zones from bootstrap and polling, highlights and the
 * trace from the last query. The conversation log is append-only.
 */
export class Console {
  readonly chart: Chart;
  readonly log: LogEntry[] = [];

  private client: ApiClient;
  private banner: HTMLElement;
  private logBox: HTMLElement;
  private traceBox: HTMLElement;
  private input: HTMLInputElement;
  private sessionId: string | null = null;
  private booted = false;
  private busy = false;

  constructor(root: HTMLElement, client: ApiClient) {
    this.client = client;
    root.classList.add("console");
    this.banner = el("div", "banner hidden", root);
    const main = el("div", "console-main", root);
    const chartBox = el("div", "chart-box", main);
    this.chart = new Chart(chartBox);
    const panel = el("div", "query-panel", main);
    this.logBox = el("div", "log", panel);
    const form = el("form", "query-form", panel);
    this.input = el("input", "query-input", form);
    this.input.type = "text";
    this.input.placeholder = "Ask about the traffic picture";
    const button = el("button", "query-send", form);
    button.type = "submit";
    button.textContent = "Send";
    form.addEventListener("submit", (ev) => {
      ev.preventDefault();
      void this.submit(this.input.value);
    });
    this.traceBox = el("aside", "trace-drawer", root);
  }

  inFlight(): boolean {
    return this.busy;
  }

  session(): string | null {
    return this.sessionId;
  }

  /** Fetch zones and vessels (with retry) and draw the base picture. */
  async bootstrap(attempts = 4, baseDelayMs = 500, sleep?: SleepFn): Promise<boolean> {
    try {
      const { vessels, zones } = await bootstrapData(
        this.client, attempts, baseDelayMs, sleep,
      );
      this.chart.setData(zones, vessels);
      this.booted = true;
      this.hideBanner();
      return true;
    } catch (err) {
      this.showBanner(`Service unreachable: ${describe(err)}`);
      return false;
    }
  }

  /**
   * Submit one question. Empty text and overlapping submissions are
   * ignored; the service answers one query per session at a time anyway.
   */
  async submit(text: string, style?: string): Promise<QueryResponse | null> {
    const trimmed = text.trim();
    if (!trimmed || this.busy) return null;
    this.busy = true;
    this.appendQuestion(trimmed);
    try {
      const response = await this.client.query(trimmed, {
        sessionId: this.sessionId,
        style,
      });
      this.sessionId = response.session_id;
      this.log.push({ question: trimmed, response });
      this.renderResponse(response);
      return response;
    } catch (err) {
      // transport or service-level error: log it inline, keep the chart
      const title = err instanceof ApiError ? `HTTP ${err.status}` : "Network error";
      this.logBox.appendChild(errorCard(title, describe(err)));
      return null;
    } finally {
      this.busy = false;
      this.input.value = "";
    }
  }

  /** Poll hook: refresh vessel positions unless a query is in flight. */
  async pollTick(): Promise<boolean> {
    if (!this.booted || this.busy) return false;
    try {
      const vessels = await this.client.vessels();
      this.chart.updateVessels(vessels);
      this.hideBanner();
      return true;
    } catch (err) {
      this.showBanner(`Lost contact with the service: ${describe(err)}`);
      return false;
    }
  }

  private renderResponse(response: QueryResponse): void {
    if (response.status === "RESULT") {
      this.logBox.appendChild(resultTable(response));
      // the map mirrors the answer exactly; stale highlights would lie
      this.chart.setHighlights(response.highlights.map((h) => h.mmsi));
      this.chart.emphasizeZones(response.zones.map((z) => z.name));
    } else {
      const failure = response.failure;
      const stage = failure ? failure.status : "FAILED";
      const message = failure ? failure.message : "query failed";
      this.logBox.appendChild(errorCard(stage, message));
      // a failed query changes nothing on the chart
    }
    renderTrace(this.traceBox, response.trace);
  }

  private appendQuestion(text: string): void {
    const q = document.createElement("p");
    q.className = "log-question";
    q.textContent = text;
    this.logBox.appendChild(q);
  }

  private showBanner(text: string): void {
    this.banner.textContent = text;
    this.banner.className = "banner";
  }

  private hideBanner(): void {
    this.banner.className = "banner hidden";
  }
}

function describe(err: unknown): string {
  if (err instanceof Error) return err.message;
  return String(err);
}

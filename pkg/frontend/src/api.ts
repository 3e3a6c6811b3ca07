import type { QueryResponse, VesselDto, ZoneDto } from "./types.js";

export type FetchFn = (input: string, init?: RequestInit) => Promise<Response>;

/** Service-side error: carries the HTTP status and the JSON `detail` text. */
export class ApiError extends Error {
  status: number;

  constructor(status: number, detail: string) {
    super(detail);
    this.status = status;
  }
}

async function errorOf(res: Response): Promise<ApiError> {
  let detail = `${res.status}`;
  try {
    const body = await res.json();
    if (body && typeof body.detail === "string") detail = body.detail;
  } catch {
    // non-JSON error body; keep the bare status
  }
  return new ApiError(res.status, detail);
}

export interface QueryOptions {
  sessionId?: string | null;
  style?: string;
  representation?: string;
}

export class ApiClient {
  private base: string;
  private fetchFn: FetchFn;

  constructor(baseUrl: string, fetchFn?: FetchFn) {
    this.base = baseUrl.replace(/\/+$/, "");
    // bind so a bare window.fetch does not lose its receiver
    const f = fetchFn ?? (globalThis.fetch as FetchFn);
    this.fetchFn = (input, init) => f(input, init);
  }

  private async getJson<T>(path: string): Promise<T> {
    const res = await this.fetchFn(`${this.base}${path}`);
    if (!res.ok) throw await errorOf(res);
    return (await res.json()) as T;
  }

  async vessels(): Promise<VesselDto[]> {
    const body = await this.getJson<{ vessels: VesselDto[] }>("/api/vessels");
    return body.vessels;
  }

  async zones(): Promise<ZoneDto[]> {
    const body = await this.getJson<{ zones: ZoneDto[] }>("/api/zones");
    return body.zones;
  }

  async query(text: string, opts: QueryOptions = {}): Promise<QueryResponse> {
    const payload: Record<string, unknown> = { text };
    if (opts.sessionId) payload.session_id = opts.sessionId;
    if (opts.style) payload.style = opts.style;
    if (opts.representation) payload.representation = opts.representation;
    const res = await this.fetchFn(`${this.base}/api/query`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(payload),
    });
    if (!res.ok) throw await errorOf(res);
    return (await res.json()) as QueryResponse;
  }
}

export type SleepFn = (ms: number) => Promise<void>;

const realSleep: SleepFn = (ms) => new Promise((r) => setTimeout(r, ms));

/**
 * Fetch the bootstrap payload, retrying with exponential backoff. The
 * service briefly 503s while a snapshot loads, and the console may start
 * before it; both deserve a retry rather than a dead page.
 */
export async function bootstrapData(
  client: ApiClient,
  attempts = 4,
  baseDelayMs = 500,
  sleep: SleepFn = realSleep,
): Promise<{ vessels: VesselDto[]; zones: ZoneDto[] }> {
  let lastError: unknown = null;
  for (let attempt = 0; attempt < attempts; attempt++) {
    if (attempt > 0) await sleep(baseDelayMs * 2 ** (attempt - 1));
    try {
      const [vessels, zones] = await Promise.all([client.vessels(), client.zones()]);
      return { vessels, zones };
    } catch (err) {
      lastError = err;
    }
  }
  throw lastError;
}

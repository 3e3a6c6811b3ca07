import { describe, expect, it } from "vitest";

import { ApiClient, ApiError, bootstrapData, type FetchFn } from "../src/api.js";

function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" },
  });
}

interface Call {
  url: string;
  init?: RequestInit;
}

function recordingFetch(
  handler: (url: string, init?: RequestInit) => Response,
): { fetch: FetchFn; calls: Call[] } {
  const calls: Call[] = [];
  const fetch: FetchFn = async (url, init) => {
    calls.push({ url, init });
    return handler(url, init);
  };
  return { fetch, calls };
}

describe("ApiClient", () => {
  it("fetches vessels from the right path and unwraps the envelope", async () => {
    const { fetch, calls } = recordingFetch(() =>
      jsonResponse({ vessels: [{ mmsi: 1 }] }),
    );
    const client = new ApiClient("http://svc:8077/", fetch);
    const vessels = await client.vessels();
    expect(calls[0].url).toBe("http://svc:8077/api/vessels");
    expect(vessels).toEqual([{ mmsi: 1 }]);
  });

  it("posts queries as JSON and omits unset optional fields", async () => {
    const { fetch, calls } = recordingFetch(() =>
      jsonResponse({ status: "RESULT" }),
    );
    const client = new ApiClient("http://svc", fetch);
    await client.query("hello");
    expect(calls[0].url).toBe("http://svc/api/query");
    expect(calls[0].init?.method).toBe("POST");
    expect(JSON.parse(String(calls[0].init?.body))).toEqual({ text: "hello" });

    await client.query("again", { sessionId: "s1", representation: "CODE" });
    expect(JSON.parse(String(calls[1].init?.body))).toEqual({
      text: "again",
      session_id: "s1",
      representation: "CODE",
    });
  });

  it("surfaces the service detail text on errors", async () => {
    const { fetch } = recordingFetch(() =>
      jsonResponse({ detail: "text must not be empty" }, 422),
    );
    const client = new ApiClient("http://svc", fetch);
    const err = await client.query("").catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect(err.status).toBe(422);
    expect(err.message).toBe("text must not be empty");
  });

  it("falls back to the bare status for non-JSON error bodies", async () => {
    const { fetch } = recordingFetch(
      () => new Response("boom", { status: 500 }),
    );
    const client = new ApiClient("http://svc", fetch);
    const err = await client.vessels().catch((e) => e);
    expect(err.status).toBe(500);
    expect(err.message).toBe("500");
  });
});

describe("bootstrapData", () => {
  it("retries with exponential backoff until the service answers", async () => {
    let attempt = 0;
    const { fetch } = recordingFetch(() => {
      attempt += 1;
      if (attempt <= 4) return jsonResponse({ detail: "no data snapshot loaded" }, 503);
      return jsonResponse({ vessels: [], zones: [] });
    });
    const sleeps: number[] = [];
    const client = new ApiClient("http://svc", fetch);
    const data = await bootstrapData(client, 4, 500, async (ms) => {
      sleeps.push(ms);
    });
    expect(data.vessels).toEqual([]);
    // two full failures (vessels+zones each), success on the third round
    expect(sleeps).toEqual([500, 1000]);
  });

  it("throws the last error once attempts are exhausted", async () => {
    const { fetch, calls } = recordingFetch(() =>
      jsonResponse({ detail: "no data snapshot loaded" }, 503),
    );
    const client = new ApiClient("http://svc", fetch);
    const err = await bootstrapData(client, 3, 1, async () => {}).catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect(err.status).toBe(503);
    expect(calls.length).toBeGreaterThanOrEqual(3);
  });
});

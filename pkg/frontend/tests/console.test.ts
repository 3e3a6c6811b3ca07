import { beforeEach, describe, expect, it } from "vitest";

import { ApiClient, type FetchFn } from "../src/api.js";
import { Console } from "../src/console.js";
import type { QueryResponse, TraceDto, VesselDto, ZoneDto } from "../src/types.js";

function vessel(mmsi: number, name: string, lat: number, lon: number): VesselDto {
  return {
    mmsi, ship_name: name, callsign: "C", imo: 1, ship_type: "CARGO",
    length: 100, width: 20, tonnage: 5000, draft: 8,
    lat, lon, sog: 10, cog: 90, heading: 90,
    nav_status: "under way", eta: "2024-01-01T12:00:00Z", ts: "2024-01-01T06:00:00Z",
  };
}

const ZONES: ZoneDto[] = [
  {
    id: 1, obj_type: "zone", name: "fairway", region_code: "Z1", remark: "",
    vertices: [[30.0, 120.0], [30.0, 120.5], [30.4, 120.5], [30.4, 120.0]],
    wkt: "POLYGON((...))",
  },
];

const VESSELS = [
  vessel(101, "ALPHA", 30.1, 120.1),
  vessel(102, "BRAVO", 30.2, 120.2),
];

function trace(partial: Partial<TraceDto> = {}): TraceDto {
  return {
    query: "q", annotations: [], probes: [], docs: [], rules: [], facts: "",
    tool_calls: [], iterations: [], ir_text: "", sql: "", ...partial,
  };
}

function resultResponse(): QueryResponse {
  return {
    session_id: "sess-1",
    status: "RESULT",
    sql: "SELECT mmsi, ship_name FROM ship_ais WHERE sog > 12",
    ir: "(project (mmsi ship_name) (select (> sog 12) (rel ship_ais)))",
    columns: ["mmsi", "ship_name"],
    rows: [["101", "alpha"]],
    highlights: [{ mmsi: 101, lat: 30.1, lon: 120.1 }],
    zones: ZONES,
    failure: null,
    trace: trace({
      iterations: [{
        fingerprint: "f0",
        reply: "(project (mmsi ship_name) (select (> sog 12) (rel ship_ais)))",
        verdict: { status: "PASS" },
      }],
      sql: "SELECT mmsi, ship_name FROM ship_ais WHERE sog > 12",
      ir_text: "(project (mmsi ship_name) (select (> sog 12) (rel ship_ais)))",
    }),
  };
}

function failedResponse(): QueryResponse {
  return {
    session_id: "sess-1",
    status: "FAILED",
    sql: "",
    ir: null,
    columns: [],
    rows: [],
    highlights: [],
    zones: [],
    failure: {
      status: "SCHEMA",
      message: "unknown column 'speed' (did you mean 'sog'?)",
    },
    trace: trace({
      iterations: [
        {
          fingerprint: "f1",
          reply: "(project (speed) (rel ship_ais))",
          verdict: { status: "SCHEMA", message: "unknown column 'speed' (did you mean 'sog'?)" },
          feedback: "It failed validation (SCHEMA)",
        },
      ],
    }),
  };
}

interface Routes {
  vessels?: () => { status: number; body: unknown };
  zones?: () => { status: number; body: unknown };
  query?: (payload: Record<string, unknown>) => { status: number; body: unknown } | Promise<{ status: number; body: unknown }>;
}

function stubService(routes: Routes) {
  const queryPayloads: Record<string, unknown>[] = [];
  let vesselCalls = 0;
  const fetchFn: FetchFn = async (url, init) => {
    const reply = (r: { status: number; body: unknown }) =>
      new Response(JSON.stringify(r.body), { status: r.status });
    if (url.endsWith("/api/vessels")) {
      vesselCalls += 1;
      return reply(routes.vessels?.() ?? { status: 200, body: { vessels: VESSELS } });
    }
    if (url.endsWith("/api/zones")) {
      return reply(routes.zones?.() ?? { status: 200, body: { zones: ZONES } });
    }
    if (url.endsWith("/api/query")) {
      const payload = JSON.parse(String(init?.body));
      queryPayloads.push(payload);
      const out = routes.query?.(payload) ?? { status: 200, body: resultResponse() };
      return reply(await out);
    }
    return new Response("not found", { status: 404 });
  };
  return {
    client: new ApiClient("http://svc", fetchFn),
    queryPayloads,
    vesselCalls: () => vesselCalls,
  };
}

const noSleep = async () => {};

describe("Console", () => {
  let root: HTMLElement;

  beforeEach(() => {
    root = document.createElement("div");
    document.body.replaceChildren(root);
  });

  it("bootstraps the chart and hides the banner", async () => {
    const svc = stubService({});
    const console_ = new Console(root, svc.client);
    expect(await console_.bootstrap(1, 1, noSleep)).toBe(true);
    expect(console_.chart.vesselCount()).toBe(2);
    expect(console_.chart.zoneCount()).toBe(1);
    expect(root.querySelector(".banner")!.className).toContain("hidden");
  });

  it("shows a banner when the service never answers", async () => {
    const svc = stubService({
      vessels: () => ({ status: 503, body: { detail: "no data snapshot loaded" } }),
      zones: () => ({ status: 503, body: { detail: "no data snapshot loaded" } }),
    });
    const console_ = new Console(root, svc.client);
    expect(await console_.bootstrap(2, 1, noSleep)).toBe(false);
    const banner = root.querySelector(".banner")!;
    expect(banner.className).not.toContain("hidden");
    expect(banner.textContent).toContain("no data snapshot loaded");
  });

  it("renders an answer: table, highlights, zone emphasis, trace", async () => {
    const svc = stubService({});
    const console_ = new Console(root, svc.client);
    await console_.bootstrap(1, 1, noSleep);
    const response = await console_.submit("fast ships in the fairway");
    expect(response!.status).toBe("RESULT");
    expect(console_.log.length).toBe(1);

    const cells = [...root.querySelectorAll(".result-table td")].map(
      (n) => n.textContent,
    );
    expect(cells).toEqual(["101", "alpha"]);
    expect(console_.chart.highlighted()).toEqual([101]);
    expect(
      root.querySelector('[data-zone="fairway"]')!.getAttribute("class"),
    ).toContain("zone-active");
    const drawer = root.querySelector(".trace-drawer")!;
    expect(drawer.querySelectorAll(".trace-iteration").length).toBe(1);
    expect(drawer.textContent).toContain("PASS");
  });

  it("threads the session id into follow-up queries", async () => {
    const svc = stubService({});
    const console_ = new Console(root, svc.client);
    await console_.bootstrap(1, 1, noSleep);
    await console_.submit("first");
    await console_.submit("second");
    expect(svc.queryPayloads[0].session_id).toBeUndefined();
    expect(svc.queryPayloads[1].session_id).toBe("sess-1");
    expect(console_.log.length).toBe(2);
  });

  it("renders a failure as an inline card and leaves highlights alone", async () => {
    let firstQuery = true;
    const svc = stubService({
      query: () => {
        if (firstQuery) {
          firstQuery = false;
          return { status: 200, body: resultResponse() };
        }
        return { status: 200, body: failedResponse() };
      },
    });
    const console_ = new Console(root, svc.client);
    await console_.bootstrap(1, 1, noSleep);
    await console_.submit("good one");
    expect(console_.chart.highlighted()).toEqual([101]);

    const response = await console_.submit("bad one");
    expect(response!.status).toBe("FAILED");
    const card = root.querySelector(".error-card")!;
    expect(card.querySelector(".error-stage")!.textContent).toBe("SCHEMA");
    expect(card.querySelector(".error-message")!.textContent).toContain("sog");
    // the failed query must not disturb the picture
    expect(console_.chart.highlighted()).toEqual([101]);
    // the drawer now shows the failing iteration verbatim
    expect(root.querySelector(".trace-drawer")!.textContent).toContain(
      "(project (speed) (rel ship_ais))",
    );
  });

  it("logs transport errors inline without recording a log entry", async () => {
    const svc = stubService({
      query: () => ({ status: 502, body: { detail: "no scripted reply for fingerprint" } }),
    });
    const console_ = new Console(root, svc.client);
    await console_.bootstrap(1, 1, noSleep);
    const response = await console_.submit("anything");
    expect(response).toBeNull();
    expect(console_.log.length).toBe(0);
    const card = root.querySelector(".error-card")!;
    expect(card.querySelector(".error-stage")!.textContent).toBe("HTTP 502");
    expect(card.textContent).toContain("no scripted reply");
  });

  it("ignores empty text and overlapping submissions", async () => {
    let release: (value: { status: number; body: unknown }) => void;
    const gate = new Promise<{ status: number; body: unknown }>((r) => {
      release = r;
    });
    const svc = stubService({ query: () => gate });
    const console_ = new Console(root, svc.client);
    await console_.bootstrap(1, 1, noSleep);

    expect(await console_.submit("   ")).toBeNull();

    const first = console_.submit("slow question");
    expect(console_.inFlight()).toBe(true);
    expect(await console_.submit("impatient second")).toBeNull();
    expect(await console_.pollTick()).toBe(false);

    release!({ status: 200, body: resultResponse() });
    const response = await first;
    expect(response!.status).toBe("RESULT");
    expect(console_.inFlight()).toBe(false);
    expect(svc.queryPayloads.length).toBe(1);
  });

  it("polls vessel positions when idle and flags lost contact", async () => {
    let failPoll = false;
    const svc = stubService({
      vessels: () =>
        failPoll
          ? { status: 503, body: { detail: "no data snapshot loaded" } }
          : { status: 200, body: { vessels: VESSELS } },
    });
    const console_ = new Console(root, svc.client);
    await console_.bootstrap(1, 1, noSleep);
    const baseline = svc.vesselCalls();
    expect(await console_.pollTick()).toBe(true);
    expect(svc.vesselCalls()).toBe(baseline + 1);

    failPoll = true;
    expect(await console_.pollTick()).toBe(false);
    const banner = root.querySelector(".banner")!;
    expect(banner.className).not.toContain("hidden");
    expect(banner.textContent).toContain("Lost contact");
  });

  it("keeps the conversation log append-only in the DOM", async () => {
    const svc = stubService({});
    const console_ = new Console(root, svc.client);
    await console_.bootstrap(1, 1, noSleep);
    const logBox = root.querySelector(".log")!;
    let previous = 0;
    for (const text of ["one", "two", "three"]) {
      await console_.submit(text);
      expect(logBox.children.length).toBeGreaterThan(previous);
      previous = logBox.children.length;
    }
  });
});

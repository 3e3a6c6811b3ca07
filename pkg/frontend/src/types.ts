// Shapes of the service JSON. Field names mirror the wire format exactly so
// responses can be used without mapping.

export interface VesselDto {
  mmsi: number;
  ship_name: string;
  callsign: string;
  imo: number;
  ship_type: string;
  length: number;
  width: number;
  tonnage: number;
  draft: number;
  lat: number;
  lon: number;
  sog: number;
  cog: number;
  heading: number;
  nav_status: string;
  eta: string;
  ts: string;
}

export interface ZoneDto {
  id: number;
  obj_type: string;
  name: string;
  region_code: string;
  remark: string;
  vertices: [number, number][]; // [lat, lon]
  wkt: string;
}

export interface HighlightDto {
  mmsi: number;
  lat: number;
  lon: number;
}

export interface FailureDto {
  status: string;
  message: string;
  [key: string]: unknown;
}

export interface VerdictDto {
  status: string;
  message?: string;
  sql_text?: string;
  ir_text?: string;
  [key: string]: unknown;
}

export interface IterationDto {
  fingerprint: string;
  reply: string;
  verdict: VerdictDto;
  feedback?: string;
  [key: string]: unknown;
}

export interface TraceDto {
  query: string;
  annotations: { tag_path: string; surface: string; canonical?: string }[];
  probes: string[];
  docs: { doc_id: string; score: number }[];
  rules: string[];
  facts: string;
  tool_calls: { name: string; [key: string]: unknown }[];
  iterations: IterationDto[];
  ir_text: string;
  sql: string;
  [key: string]: unknown;
}

export interface QueryResponse {
  session_id: string;
  status: "RESULT" | "FAILED";
  sql: string;
  ir: string | null;
  columns: string[];
  rows: string[][];
  highlights: HighlightDto[];
  zones: ZoneDto[];
  failure: FailureDto | null;
  trace: TraceDto;
}

export interface LogEntry {
  question: string;
  response: QueryResponse;
}

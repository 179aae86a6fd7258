// Typed client for the careflow session service. Response shapes mirror the
// server documents verbatim; nothing here re-derives a status or a rank.

export type World = "open" | "closed";

export interface FactDoc {
  code: string;
  effective_date: string;
  value?: unknown;
  provenance: string;
}

export interface EventLinkDoc {
  relation: string;
  target: string;
}

export interface EventDoc {
  id: string;
  kind: string;
  code: string;
  date: string;
  value?: unknown;
  links?: EventLinkDoc[];
  attributes?: Record<string, string>;
  annotations?: string[];
}

export interface RecordDoc {
  id: string;
  demographics: Record<string, string>;
  payer_id: string;
  facts: FactDoc[];
  events: EventDoc[];
}

export interface SessionSummary {
  id: string;
  revision: number;
  graph_id: string;
  clock: number;
  record: RecordDoc;
}

export interface TraceDoc {
  verdict: string;
  node: string;
  matched?: string[];
  observed?: string[];
  missing?: string[];
  children?: TraceDoc[];
}

export interface DeterminationDoc {
  code: string;
  payer: string;
  guideline_id: string;
  status: string;
  missing_codes: string[];
  reasoning: string[];
  trace: TraceDoc;
}

// a batched code with no applicable guideline comes back as an error entry
export interface DeterminationErrorDoc {
  code: string;
  payer: string;
  error: string;
}

export type DeterminationResultDoc = DeterminationDoc | DeterminationErrorDoc;

export function isDeterminationError(d: DeterminationResultDoc): d is DeterminationErrorDoc {
  return "error" in d;
}

export interface RecommendationDoc {
  node_id: string;
  via_edge: string;
  condition_verdict: string;
  condition_trace: TraceDoc | null;
  rank: number;
  determination: DeterminationResultDoc | null;
  note?: string;
}

export interface AuditEntryDoc {
  t: number;
  twin: string;
  kind: string;
  text: string;
  refs: string[];
}

export interface RecommendationsResponse {
  session_id: string;
  as_of: string;
  world: World;
  recommendations: RecommendationDoc[];
  audit: AuditEntryDoc[];
}

export interface TimelineLinkDoc {
  relation: string;
  from: string;
  to: string;
  inferred: boolean;
}

export interface GapDoc {
  kind: string;
  subject: string;
  window_days: number;
  observed_delay_days: number;
  as_of: string;
  detail: string;
}

export interface TimelineResponse {
  session_id: string;
  as_of: string;
  record_id: string;
  events: EventDoc[];
  links: TimelineLinkDoc[];
  gaps: GapDoc[];
}

export interface SimulateResponse {
  session_id: string;
  as_of: string;
  world: World;
  determinations: DeterminationResultDoc[];
  audit: AuditEntryDoc[];
}

export interface OverlayFact {
  code: string;
  value?: unknown;
}

export interface GraphNodeDoc {
  id: string;
  kind: string;
  label: string;
  codes: string[];
  [extra: string]: unknown;
}

export interface GraphAssetDoc {
  id: string;
  nodes: GraphNodeDoc[];
  [extra: string]: unknown;
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
    public detail?: unknown,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

let apiBase = "";

export function configureApi(base: string): void {
  apiBase = base.replace(/\/+$/, "");
}

async function request(path: string, init?: RequestInit): Promise<Response> {
  const res = await fetch(apiBase + path, init);
  if (res.ok) return res;
  let code = "internal";
  let message = `${res.status} ${res.statusText}`;
  let detail: unknown;
  try {
    const body = await res.json();
    if (body && typeof body.code === "string") {
      code = body.code;
      message = body.message ?? message;
      detail = body.detail;
    }
  } catch {
    // non-JSON error body; keep the status line
  }
  throw new ApiError(res.status, code, message, detail);
}

async function requestJson<T>(path: string, init?: RequestInit): Promise<T> {
  const res = await request(path, init);
  return (await res.json()) as T;
}

function withQuery(path: string, params: Record<string, string | undefined>): string {
  const q = new URLSearchParams();
  for (const [key, value] of Object.entries(params)) {
    if (value !== undefined && value !== "") q.set(key, value);
  }
  const qs = q.toString();
  return qs ? `${path}?${qs}` : path;
}

const JSON_HEADERS = { "Content-Type": "application/json" };

export function health(): Promise<{ status: string; sessions: number }> {
  return requestJson("/health");
}

export function createSession(
  scenario: string | object,
  runScript = false,
): Promise<{ id: string; revision: number; script_outputs?: unknown[] }> {
  return requestJson("/sessions", {
    method: "POST",
    headers: JSON_HEADERS,
    body: JSON.stringify({ scenario, run_script: runScript }),
  });
}

export function getSession(sessionId: string): Promise<SessionSummary> {
  return requestJson(`/sessions/${sessionId}`);
}

export interface EventForm {
  id: string;
  kind: string;
  code: string;
  date: string;
  value?: unknown;
  attributes?: Record<string, string>;
}

// The only mutating call a view can make. Takes the form values alone, never
// the view state, so what-if overlays cannot leak into persistence.
export function postEvent(
  sessionId: string,
  event: EventForm,
  expectedRevision?: number,
): Promise<{ id: string; revision: number }> {
  const headers: Record<string, string> = { ...JSON_HEADERS };
  if (expectedRevision !== undefined) {
    headers["X-Expected-Revision"] = String(expectedRevision);
  }
  return requestJson(`/sessions/${sessionId}/events`, {
    method: "POST",
    headers,
    body: JSON.stringify({ event }),
  });
}

export function getRecommendations(
  sessionId: string,
  asOf?: string,
  world?: World,
): Promise<RecommendationsResponse> {
  return requestJson(
    withQuery(`/sessions/${sessionId}/recommendations`, { as_of: asOf, world }),
  );
}

export function getTimeline(sessionId: string, asOf?: string): Promise<TimelineResponse> {
  return requestJson(withQuery(`/sessions/${sessionId}/timeline`, { as_of: asOf }));
}

export function simulateNecessity(
  sessionId: string,
  codes: string[],
  options: { asOf?: string; world?: World; overlay?: OverlayFact[] } = {},
): Promise<SimulateResponse> {
  return requestJson(`/sessions/${sessionId}/necessity/simulate`, {
    method: "POST",
    headers: JSON_HEADERS,
    body: JSON.stringify({
      codes,
      as_of: options.asOf,
      world: options.world,
      overlay: options.overlay ?? [],
    }),
  });
}

export async function getAuditExport(sessionId: string): Promise<string> {
  const res = await request(`/sessions/${sessionId}/audit`);
  return res.text();
}

export function getGraphAsset(graphId: string): Promise<GraphAssetDoc> {
  return requestJson(`/assets/graphs/${graphId}`);
}

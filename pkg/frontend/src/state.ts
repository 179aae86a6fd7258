import type { OverlayFact, World } from "./api.js";

// Client-held view state. Overlay facts live here and in simulation request
// bodies only; event posts are built from form values, so a what-if can never
// end up persisted (see postEvent in api.ts).
export interface ViewState {
  sessionId: string;
  revision: number;
  asOf?: string;
  world: World;
  overlay: OverlayFact[];
  expandedTraces: ReadonlySet<string>;
}

export function initialState(sessionId: string, revision: number): ViewState {
  return {
    sessionId,
    revision,
    asOf: undefined,
    world: "open",
    overlay: [],
    expandedTraces: new Set(),
  };
}

export function withOverlayFact(state: ViewState, fact: OverlayFact): ViewState {
  const overlay = state.overlay.filter((f) => f.code !== fact.code);
  overlay.push(fact);
  return { ...state, overlay };
}

export function withoutOverlayFact(state: ViewState, code: string): ViewState {
  return { ...state, overlay: state.overlay.filter((f) => f.code !== code) };
}

export function clearOverlay(state: ViewState): ViewState {
  return { ...state, overlay: [] };
}

export function toggleTrace(state: ViewState, nodeId: string): ViewState {
  const expanded = new Set(state.expandedTraces);
  if (expanded.has(nodeId)) expanded.delete(nodeId);
  else expanded.add(nodeId);
  return { ...state, expandedTraces: expanded };
}

// "demo:menopause=post" or a bare code; empty value keeps the fact presence-only
export function parseOverlayInput(raw: string): OverlayFact | string {
  const text = raw.trim();
  if (!text) return "enter a code, e.g. demo:menopause=post";
  const eq = text.indexOf("=");
  const code = (eq < 0 ? text : text.slice(0, eq)).trim();
  if (!/^[a-z][a-z0-9-]*:[A-Za-z0-9][A-Za-z0-9.-]*$/.test(code)) {
    return `not a code: ${code || text} (expected namespace:value)`;
  }
  if (eq < 0) return { code, value: true };
  const rawValue = text.slice(eq + 1).trim();
  if (!rawValue) return { code, value: true };
  const num = Number(rawValue);
  return { code, value: Number.isFinite(num) && rawValue !== "" ? num : rawValue };
}

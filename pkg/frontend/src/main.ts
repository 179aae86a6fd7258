// Page wiring: fetch, render, delegate clicks. All decision content comes
// from the service; this file only moves documents into the DOM.

import {
  ApiError,
  configureApi,
  createSession,
  getAuditExport,
  getGraphAsset,
  getRecommendations,
  getSession,
  getTimeline,
  postEvent,
  simulateNecessity,
  type EventForm,
  type World,
} from "./api.js";
import {
  clearOverlay,
  initialState,
  parseOverlayInput,
  toggleTrace,
  withOverlayFact,
  withoutOverlayFact,
  type ViewState,
} from "./state.js";
import { parseAuditExport, renderAudit } from "./views/audit.js";
import {
  applySimulation,
  buildCards,
  renderCards,
  type CardModel,
} from "./views/recommendations.js";
import { renderTimeline } from "./views/timeline.js";
import { describeError, renderOverlayChips } from "./views/whatif.js";

declare global {
  interface Window {
    CAREFLOW_API?: string;
  }
}

configureApi(window.CAREFLOW_API ?? "");

let state: ViewState | null = null;
let cards: CardModel[] = [];
let labels = new Map<string, string>();

function el<T extends HTMLElement>(id: string): T {
  const found = document.getElementById(id);
  if (!found) throw new Error(`missing element #${id}`);
  return found as T;
}

function setBanner(text: string): void {
  const banner = el<HTMLElement>("banner");
  banner.textContent = text;
  banner.hidden = text === "";
}

function inputValue(id: string): string {
  return el<HTMLInputElement>(id).value.trim();
}

async function loadLabels(graphId: string): Promise<void> {
  try {
    const graph = await getGraphAsset(graphId);
    labels = new Map(graph.nodes.map((node) => [node.id, node.label]));
  } catch {
    labels = new Map(); // labels are cosmetic; node ids still render
  }
}

async function refreshTimeline(): Promise<void> {
  if (!state) return;
  const timeline = await getTimeline(state.sessionId, state.asOf);
  el("timeline-panel").innerHTML = renderTimeline(timeline);
}

async function refreshRecommendations(): Promise<void> {
  if (!state) return;
  const response = await getRecommendations(state.sessionId, state.asOf, state.world);
  cards = buildCards(response.recommendations, labels);
  if (state.overlay.length) {
    const codes = cards.flatMap((card) => (card.code ? [card.code] : []));
    if (codes.length) {
      const sim = await simulateNecessity(state.sessionId, codes, {
        asOf: state.asOf,
        world: state.world,
        overlay: state.overlay,
      });
      cards = applySimulation(cards, sim.determinations);
    }
  }
  el("recommendations-panel").innerHTML = renderCards(cards, state.expandedTraces);
  el("asof-note").textContent = `as of ${response.as_of}, ${response.world} world`;
}

async function refreshAudit(): Promise<void> {
  if (!state) return;
  const text = await getAuditExport(state.sessionId);
  el("audit-panel").innerHTML = renderAudit(parseAuditExport(text));
}

function renderOverlay(): void {
  if (!state) return;
  el("overlay-chips").innerHTML = renderOverlayChips(state.overlay);
}

async function refreshAll(): Promise<void> {
  if (!state) return;
  setBanner("");
  try {
    const session = await getSession(state.sessionId);
    state = { ...state, revision: session.revision };
    el("session-note").textContent =
      `session ${session.id} · revision ${session.revision} · patient ${session.record.id}`;
    renderOverlay();
    await Promise.all([refreshTimeline(), refreshRecommendations(), refreshAudit()]);
  } catch (err) {
    setBanner(describeError(err));
  }
}

async function openSession(sessionId: string): Promise<void> {
  const session = await getSession(sessionId);
  state = initialState(session.id, session.revision);
  await loadLabels(session.graph_id);
  el<HTMLElement>("workspace").hidden = false;
  await refreshAll();
}

async function onCreateSession(): Promise<void> {
  setBanner("");
  try {
    const ref = inputValue("scenario-ref") || "bundled:ovarian-scenario";
    const runScript = el<HTMLInputElement>("run-script").checked;
    const created = await createSession(ref, runScript);
    await openSession(created.id);
  } catch (err) {
    setBanner(describeError(err));
  }
}

async function onLoadSession(): Promise<void> {
  setBanner("");
  try {
    await openSession(inputValue("session-id"));
  } catch (err) {
    setBanner(describeError(err));
  }
}

async function onRecordEvent(): Promise<void> {
  if (!state) return;
  const errorBox = el<HTMLElement>("event-error");
  errorBox.textContent = "";
  const form: EventForm = {
    id: inputValue("event-id"),
    kind: inputValue("event-kind"),
    code: inputValue("event-code"),
    date: inputValue("event-date"),
  };
  const rawValue = inputValue("event-value");
  if (rawValue) {
    const num = Number(rawValue);
    form.value = Number.isFinite(num) ? num : rawValue;
  }
  try {
    const posted = await postEvent(state.sessionId, form, state.revision);
    state = { ...state, revision: posted.revision };
    await refreshAll();
  } catch (err) {
    if (err instanceof ApiError && err.code === "conflict") {
      errorBox.textContent = `${err.message} - reload to pick up the newer revision`;
    } else {
      errorBox.textContent = describeError(err);
    }
  }
}

async function onAddOverlay(): Promise<void> {
  if (!state) return;
  const errorBox = el<HTMLElement>("overlay-error");
  errorBox.textContent = "";
  const parsed = parseOverlayInput(inputValue("overlay-input"));
  if (typeof parsed === "string") {
    errorBox.textContent = parsed;
    return;
  }
  state = withOverlayFact(state, parsed);
  el<HTMLInputElement>("overlay-input").value = "";
  renderOverlay();
  try {
    await refreshRecommendations();
  } catch (err) {
    errorBox.textContent = describeError(err);
  }
}

async function onWorkspaceClick(target: HTMLElement): Promise<void> {
  if (!state) return;
  const action = target.dataset.action;
  if (action === "toggle-trace" && target.dataset.node) {
    state = toggleTrace(state, target.dataset.node);
    el("recommendations-panel").innerHTML = renderCards(cards, state.expandedTraces);
  } else if (action === "remove-overlay" && target.dataset.code) {
    state = withoutOverlayFact(state, target.dataset.code);
    renderOverlay();
    await refreshRecommendations();
  }
}

function wire(): void {
  el("create-session").addEventListener("click", () => void onCreateSession());
  el("load-session").addEventListener("click", () => void onLoadSession());
  el("record-event").addEventListener("click", () => void onRecordEvent());
  el("add-overlay").addEventListener("click", () => void onAddOverlay());
  el("clear-overlay").addEventListener("click", () => {
    if (!state) return;
    state = clearOverlay(state);
    renderOverlay();
    void refreshRecommendations();
  });
  el("refresh").addEventListener("click", () => void refreshAll());
  el<HTMLSelectElement>("world").addEventListener("change", (evt) => {
    if (!state) return;
    state = { ...state, world: (evt.target as HTMLSelectElement).value as World };
    void refreshRecommendations();
  });
  el<HTMLInputElement>("as-of").addEventListener("change", (evt) => {
    if (!state) return;
    const value = (evt.target as HTMLInputElement).value;
    state = { ...state, asOf: value || undefined };
    void refreshAll();
  });
  el("workspace").addEventListener("click", (evt) => {
    const target = evt.target as HTMLElement;
    if (target.dataset.action) void onWorkspaceClick(target);
  });
}

document.addEventListener("DOMContentLoaded", wire);

// Recommendation cards. Every status, rank, and trace line is taken verbatim
// from the server response; the only client-side work is layout.

import type {
  DeterminationResultDoc,
  RecommendationDoc,
  TraceDoc,
} from "../api.js";
import { isDeterminationError } from "../api.js";
import { esc } from "./html.js";

export interface CardModel {
  nodeId: string;
  label: string;
  rank: number;
  viaEdge: string;
  conditionVerdict: string;
  code: string | null;
  badge: string;
  badgeClass: string;
  reasoning: string[];
  missingCodes: string[];
  traceLines: string[];
  note?: string;
  // true once a what-if simulation result has been merged in
  simulated: boolean;
}

const BADGE_CLASSES: Record<string, string> = {
  APPROVED: "badge-approved",
  DENIED: "badge-denied",
  INSUFFICIENT_INFORMATION: "badge-insufficient",
};

export function badgeClassFor(status: string): string {
  return BADGE_CLASSES[status] ?? "badge-unknown";
}

export function traceLines(trace: TraceDoc, depth = 0): string[] {
  const notes: string[] = [];
  if (trace.matched?.length) notes.push(`matched ${trace.matched.join(", ")}`);
  if (trace.observed?.length) notes.push(`observed ${trace.observed.join(", ")}`);
  if (trace.missing?.length) notes.push(`no data (${trace.missing.join(", ")})`);
  const suffix = notes.length ? `: ${notes.join("; ")}` : "";
  const lines = [`${"  ".repeat(depth)}[${trace.verdict}] ${trace.node}${suffix}`];
  for (const child of trace.children ?? []) {
    lines.push(...traceLines(child, depth + 1));
  }
  return lines;
}

function cardFromDetermination(doc: DeterminationResultDoc): Partial<CardModel> {
  if (isDeterminationError(doc)) {
    return {
      code: doc.code,
      badge: "NO GUIDELINE",
      badgeClass: "badge-error",
      reasoning: [doc.error],
      missingCodes: [],
      traceLines: [],
    };
  }
  return {
    code: doc.code,
    badge: doc.status,
    badgeClass: badgeClassFor(doc.status),
    reasoning: doc.reasoning,
    missingCodes: doc.missing_codes,
    traceLines: traceLines(doc.trace),
  };
}

export function buildCards(
  recommendations: RecommendationDoc[],
  labels: ReadonlyMap<string, string> = new Map(),
): CardModel[] {
  // server order is already the ranking; keep it untouched
  return recommendations.map((rec) => {
    const base: CardModel = {
      nodeId: rec.node_id,
      label: labels.get(rec.node_id) ?? rec.node_id,
      rank: rec.rank,
      viaEdge: rec.via_edge,
      conditionVerdict: rec.condition_verdict,
      code: null,
      badge: rec.condition_verdict,
      badgeClass: "badge-unknown",
      reasoning: [],
      missingCodes: [],
      traceLines: rec.condition_trace ? traceLines(rec.condition_trace) : [],
      simulated: false,
    };
    if (rec.note) base.note = rec.note;
    if (rec.determination) Object.assign(base, cardFromDetermination(rec.determination));
    return base;
  });
}

// Merge what-if results onto the current cards by procedure code. Cards whose
// code was not simulated keep their persisted determination.
export function applySimulation(
  cards: CardModel[],
  determinations: DeterminationResultDoc[],
): CardModel[] {
  const byCode = new Map(determinations.map((d) => [d.code, d]));
  return cards.map((card) => {
    const doc = card.code === null ? undefined : byCode.get(card.code);
    if (!doc) return card;
    return { ...card, ...cardFromDetermination(doc), simulated: true };
  });
}

export function renderCards(cards: CardModel[], expanded: ReadonlySet<string>): string {
  if (!cards.length) {
    return '<p class="empty">No recommended next steps at this point in the care path.</p>';
  }
  const sections = cards.map((card) => {
    const open = expanded.has(card.nodeId);
    const badge =
      `<span class="badge ${card.badgeClass}">${esc(card.badge)}</span>` +
      (card.simulated ? '<span class="badge badge-simulated">what-if</span>' : "");
    const missing = card.missingCodes.length
      ? `<p class="missing">missing: ${card.missingCodes.map(esc).join(", ")}</p>`
      : "";
    const note = card.note ? `<p class="note">${esc(card.note)}</p>` : "";
    const trace = open
      ? `<pre class="trace">${card.traceLines.map(esc).join("\n")}</pre>`
      : "";
    const reasoning = open
      ? `<pre class="reasoning">${card.reasoning.map(esc).join("\n")}</pre>`
      : "";
    return `<article class="card" data-node="${esc(card.nodeId)}">
  <header>
    <span class="rank">${card.rank}</span>
    <h3>${esc(card.label)}</h3>
    ${badge}
  </header>
  <p class="via">${esc(card.viaEdge)} [${esc(card.conditionVerdict)}]${
    card.code ? ` &middot; ${esc(card.code)}` : ""
  }</p>
  ${note}${missing}
  <button type="button" data-action="toggle-trace" data-node="${esc(card.nodeId)}">
    ${open ? "hide" : "show"} rule trace
  </button>
  ${trace}${reasoning}
</article>`;
  });
  return sections.join("\n");
}

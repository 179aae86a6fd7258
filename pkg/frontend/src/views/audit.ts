// Reasoning log viewer. The export is line-delimited JSON with a fixed
// header; entries group by correlation id (the c-prefixed ref) so one message
// exchange reads top to bottom.

import type { AuditEntryDoc } from "../api.js";
import { esc } from "./html.js";

export interface AuditGroup {
  correlationId: string;
  entries: AuditEntryDoc[];
}

export function parseAuditExport(text: string): AuditEntryDoc[] {
  const lines = text.split("\n").filter((line) => line.trim() !== "");
  if (!lines.length) return [];
  const header = JSON.parse(lines[0]!);
  if (header.audit !== "careflow") {
    throw new Error("not a careflow audit export");
  }
  return lines.slice(1).map((line) => JSON.parse(line) as AuditEntryDoc);
}

function correlationOf(entry: AuditEntryDoc): string {
  return entry.refs.find((ref) => ref.startsWith("c")) ?? "(none)";
}

export function groupByCorrelation(entries: AuditEntryDoc[]): AuditGroup[] {
  const groups = new Map<string, AuditEntryDoc[]>();
  for (const entry of entries) {
    const key = correlationOf(entry);
    const bucket = groups.get(key);
    if (bucket) bucket.push(entry);
    else groups.set(key, [entry]);
  }
  // Map preserves first-seen order, which follows logical time
  return [...groups.entries()].map(([correlationId, grouped]) => ({
    correlationId,
    entries: grouped,
  }));
}

export function renderAudit(entries: AuditEntryDoc[]): string {
  if (!entries.length) {
    return '<p class="empty">No twin activity logged for this session yet.</p>';
  }
  const groups = groupByCorrelation(entries);
  const sections = groups.map((group) => {
    const rows = group.entries.map(
      (entry) =>
        `<li class="audit-${esc(entry.kind)}">
  <span class="t">t=${entry.t}</span>
  <span class="twin">${esc(entry.twin)}</span>
  <span class="kind">${esc(entry.kind)}</span>
  <span class="text">${esc(entry.text)}</span>
</li>`,
    );
    return `<section class="correlation" data-correlation="${esc(group.correlationId)}">
  <h4>${esc(group.correlationId)}</h4>
  <ul>\n${rows.join("\n")}\n</ul>
</section>`;
  });
  return sections.join("\n");
}

// Chronological event list. Events render in the order the server sent them;
// gap findings attach to their subject event, node-level gaps get a strip at
// the top.

import type { EventDoc, GapDoc, TimelineLinkDoc, TimelineResponse } from "../api.js";
import { esc } from "./html.js";

export interface TimelineRow {
  id: string;
  date: string;
  kind: string;
  code: string;
  value?: unknown;
  annotations: string[];
  links: string[];
  gaps: GapDoc[];
}

function linkDescriptions(event: EventDoc, links: TimelineLinkDoc[]): string[] {
  const out: string[] = [];
  for (const link of links) {
    const inferred = link.inferred ? " (inferred)" : "";
    if (link.from === event.id) out.push(`${link.relation} ${link.to}${inferred}`);
    if (link.to === event.id) out.push(`${link.relation} by ${link.from}${inferred}`);
  }
  return out;
}

export function buildRows(timeline: TimelineResponse): TimelineRow[] {
  return timeline.events.map((event) => ({
    id: event.id,
    date: event.date,
    kind: event.kind,
    code: event.code,
    value: event.value,
    annotations: event.annotations ?? [],
    links: linkDescriptions(event, timeline.links),
    gaps: timeline.gaps.filter((gap) => gap.subject === event.id),
  }));
}

// gaps whose subject is a care-path node rather than an event
export function nodeGaps(timeline: TimelineResponse): GapDoc[] {
  const eventIds = new Set(timeline.events.map((e) => e.id));
  return timeline.gaps.filter((gap) => !eventIds.has(gap.subject));
}

export function renderTimeline(timeline: TimelineResponse): string {
  const rows = buildRows(timeline);
  if (!rows.length) {
    return '<p class="empty">No events recorded yet.</p>';
  }
  const strip = nodeGaps(timeline)
    .map(
      (gap) =>
        `<p class="gap-banner"><span class="badge badge-gap">${esc(gap.kind)}</span> ${esc(
          gap.detail,
        )} (window ${gap.window_days}d, ${gap.observed_delay_days}d over)</p>`,
    )
    .join("\n");
  const items = rows.map((row) => {
    const value = row.value === undefined ? "" : ` = ${esc(JSON.stringify(row.value))}`;
    const badges = row.gaps
      .map((gap) => `<span class="badge badge-gap" title="${esc(gap.detail)}">${esc(gap.kind)}</span>`)
      .join(" ");
    const notes = [...row.annotations, ...row.links]
      .map((note) => `<span class="annotation">${esc(note)}</span>`)
      .join(" ");
    return `<li class="event" data-event="${esc(row.id)}">
  <time>${esc(row.date)}</time>
  <span class="kind kind-${esc(row.kind)}">${esc(row.kind)}</span>
  <code>${esc(row.code)}</code>${value}
  ${badges} ${notes}
</li>`;
  });
  return `${strip}\n<ol class="timeline">\n${items.join("\n")}\n</ol>`;
}

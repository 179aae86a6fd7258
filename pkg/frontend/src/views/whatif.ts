// What-if panel: client-held overlay facts and the simulation request built
// from them. Results flow back into the recommendation cards via
// applySimulation; nothing in this panel writes to the session.

import type { OverlayFact } from "../api.js";
import { ApiError } from "../api.js";
import { esc } from "./html.js";

export function buildSimulateBody(
  codes: string[],
  overlay: OverlayFact[],
  asOf?: string,
  world?: string,
): { codes: string[]; overlay: OverlayFact[]; as_of?: string; world?: string } {
  return { codes, overlay, as_of: asOf, world };
}

export function describeError(err: unknown): string {
  if (err instanceof ApiError) {
    const detail =
      err.detail === undefined ? "" : ` (${JSON.stringify(err.detail)})`;
    return `${err.code}: ${err.message}${detail}`;
  }
  return err instanceof Error ? err.message : String(err);
}

export function renderOverlayChips(overlay: OverlayFact[]): string {
  if (!overlay.length) {
    return '<p class="empty">No overlay facts; badges show the recorded chart.</p>';
  }
  const chips = overlay.map((fact) => {
    const value = fact.value === true ? "" : `=${esc(JSON.stringify(fact.value))}`;
    return `<span class="chip">${esc(fact.code)}${value}
  <button type="button" data-action="remove-overlay" data-code="${esc(fact.code)}">&times;</button>
</span>`;
  });
  return chips.join("\n");
}

/** Pure HTML renderers (string in, string out; no DOM dependency).
 *
 * The one law enforced here: a result card's body is always the verbatim
 * snippet from the API. Distilled text, rooms, and files render only as
 * collapsed routing metadata, never as the body.
 */

import type {
  ConfigInfo,
  ExchangePayload,
  RoomDirEntry,
  SearchEntry,
} from "./types.js";
import { encodeState, type AppState } from "./state.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&#39;");
}

export interface ResultCardModel {
  exchangeRef: string;
  rank: number;
  score: number;
  /** Displayed body: byte-derived from the API's verbatim_snippet. */
  body: string;
  routing: {
    distilledCore: string | null;
    rooms: { key: string; label: string; type: string }[];
    files: string[];
  };
  drillDownHref: string;
}

export function buildResultCard(entry: SearchEntry, state: AppState): ResultCardModel {
  return {
    exchangeRef: entry.exchange_ref,
    rank: entry.rank,
    score: entry.score,
    body: entry.verbatim_snippet,
    routing: {
      distilledCore: entry.routing.distilled_core,
      rooms: entry.routing.rooms.map((r) => ({
        key: r.room_key,
        label: r.room_label,
        type: r.room_type,
      })),
      files: entry.routing.files,
    },
    drillDownHref: encodeState({
      ...state,
      view: "exchange",
      exchangeRef: entry.exchange_ref,
    }),
  };
}

export function renderResultCard(card: ResultCardModel): string {
  const rooms = card.routing.rooms
    .map((r) => `<span class="chip chip-room">${escapeHtml(r.type)}:${escapeHtml(r.key)}</span>`)
    .join(" ");
  const files = card.routing.files
    .map((f) => `<span class="chip chip-file">${escapeHtml(f)}</span>`)
    .join(" ");
  const core = card.routing.distilledCore
    ? `<p class="routing-core">${escapeHtml(card.routing.distilledCore)}</p>`
    : "";
  return `
<article class="result-card" data-ref="${escapeHtml(card.exchangeRef)}">
  <header class="result-head">
    <span class="rank">#${card.rank}</span>
    <a class="ref drill-down" href="${escapeHtml(card.drillDownHref)}">${escapeHtml(card.exchangeRef)}</a>
    <span class="score">${card.score.toFixed(4)}</span>
  </header>
  <p class="result-body">${escapeHtml(card.body)}</p>
  <details class="routing">
    <summary>routing</summary>
    ${core}
    <div class="chips">${rooms} ${files}</div>
  </details>
</article>`.trim();
}

export function renderResults(cards: ResultCardModel[]): string {
  if (cards.length === 0) {
    return `<p class="empty-state">No lexical matches for this query and configuration.</p>`;
  }
  return cards.map(renderResultCard).join("\n");
}

export function renderErrorBanner(message: string): string {
  return `<div class="error-banner" role="alert">${escapeHtml(message)}</div>`;
}

export function renderConfigOptions(configs: ConfigInfo[], selected: string): string {
  return configs
    .map((c) => {
      const sel = c.config_id === selected ? ' selected="selected"' : "";
      return `<option value="${escapeHtml(c.config_id)}"${sel}>${escapeHtml(c.config_id)}</option>`;
    })
    .join("\n");
}

export interface DrillDownModel {
  exchangeRef: string;
  projectId: string;
  incomplete: boolean;
  /** Plies in order; text is char-identical to the API payload. */
  plies: { role: string; text: string; plyIndex: number; toolOnly: boolean }[];
  backHref: string;
}

export function buildDrillDown(payload: ExchangePayload, state: AppState): DrillDownModel {
  return {
    exchangeRef: payload.exchange_ref,
    projectId: payload.project_id,
    incomplete: payload.incomplete,
    plies: payload.messages.map((m) => ({
      role: m.role,
      text: m.text,
      plyIndex: m.ply_index,
      toolOnly: m.is_tool_only,
    })),
    backHref: encodeState({ ...state, view: "search", exchangeRef: null }),
  };
}

export function renderDrillDown(model: DrillDownModel): string {
  const plies = model.plies
    .map(
      (p) => `
  <section class="ply ply-${escapeHtml(p.role)}${p.toolOnly ? " ply-tool" : ""}">
    <header>ply ${p.plyIndex} &middot; ${escapeHtml(p.role)}${p.toolOnly ? " (tool)" : ""}</header>
    <pre class="ply-text">${escapeHtml(p.text)}</pre>
  </section>`,
    )
    .join("\n");
  const flag = model.incomplete ? ' <span class="chip chip-incomplete">incomplete</span>' : "";
  return `
<div class="drill-down">
  <a class="back" href="${escapeHtml(model.backHref)}">&larr; back to results</a>
  <h2>${escapeHtml(model.exchangeRef)}${flag}</h2>
  <p class="meta">project ${escapeHtml(model.projectId)}</p>
${plies}
</div>`.trim();
}

export function renderNotFound(exchangeRef: string, backHref: string): string {
  return `
<div class="not-found">
  <p>Exchange <code>${escapeHtml(exchangeRef)}</code> was not found.</p>
  <a class="back" href="${escapeHtml(backHref)}">&larr; back to search</a>
</div>`.trim();
}

export function renderRooms(rooms: RoomDirEntry[], state: AppState): string {
  if (rooms.length === 0) {
    return `<p class="empty-state">No rooms in this corpus.</p>`;
  }
  const rows = rooms
    .map((r) => {
      const href = encodeState({
        ...state,
        view: "search",
        query: r.room_key,
        configId: "distill_core_rooms:bm25_okapi:rrf",
        exchangeRef: null,
      });
      return `<tr>
  <td>${escapeHtml(r.room_type)}</td>
  <td><a class="room-link" href="${escapeHtml(href)}">${escapeHtml(r.room_key)}</a></td>
  <td>${escapeHtml(r.room_label)}</td>
  <td class="num">${r.n_objects}</td>
</tr>`;
    })
    .join("\n");
  return `
<table class="rooms">
  <thead><tr><th>type</th><th>key</th><th>label</th><th>objects</th></tr></thead>
  <tbody>
${rows}
  </tbody>
</table>`.trim();
}

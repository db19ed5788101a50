/** The UI round trip against a mocked service: search -> result card
 * (verbatim body, routing collapsed) -> drill-down char-identical to the
 * store payload -> back, with a /configs-driven picker of 118 entries.
 */

import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import {
  buildDrillDown,
  buildResultCard,
  escapeHtml,
  renderConfigOptions,
  renderDrillDown,
  renderResultCard,
} from "../src/render.js";
import { decodeState, defaultState } from "../src/state.js";
import type { ConfigInfo, ExchangePayload, SearchResponse } from "../src/types.js";

const verbatimText =
  "How should we handle the connection pool timeout in src/db/pool.py?\n" +
  "The root cause was pool exhaustion under load; raised pool_timeout to 30.";

const exchangePayload: ExchangePayload = {
  exchange_ref: "c00042#0-1",
  conversation_id: "c00042",
  project_id: "alpha",
  ply_start: 0,
  ply_end: 1,
  incomplete: false,
  messages: [
    {
      role: "user",
      text: "How should we handle the connection pool timeout in src/db/pool.py?",
      is_tool_only: false,
      ply_index: 0,
    },
    {
      role: "assistant",
      text: "The root cause was pool exhaustion under load; raised pool_timeout to 30.",
      is_tool_only: false,
      ply_index: 1,
    },
  ],
};

const searchResponse: SearchResponse = {
  query: "connection pool timeout",
  config_id: "full_text:bm25_okapi:passthrough",
  results: [
    {
      exchange_ref: "c00042#0-1",
      rank: 1,
      score: 7.31,
      verbatim_snippet: verbatimText.slice(0, 1200),
      routing: {
        distilled_core: "Raised the pool timeout.\npool_timeout=30",
        rooms: [{ room_type: "concept", room_key: "pool_timeout", room_label: "Pool timeout", room_id: "9" }],
        files: ["src/db/pool.py"],
      },
      provenance: ["bm25_okapi@verbatim"],
    },
  ],
};

const configs: ConfigInfo[] = Array.from({ length: 118 }, (_, i) => ({
  config_id: `m${i}:mech:f`,
  family: i < 44 ? "pure" : "cross_layer",
  mode: `m${i}`,
  mechanism: "mech",
  fusion: "f",
  k: 7,
}));

function mockService() {
  return async (url: string) => {
    let body: unknown;
    if (url.includes("/configs")) {
      body = configs;
    } else if (url.includes("/search")) {
      body = searchResponse;
    } else if (url.includes("/exchange/c00042/0/1")) {
      body = exchangePayload;
    } else {
      return { ok: false, status: 404, json: async () => ({}) };
    }
    return { ok: true, status: 200, json: async () => body };
  };
}

describe("UI round trip over the mocked service", () => {
  it("search -> card -> drill-down -> back preserves every contract", async () => {
    const client = new ApiClient("", mockService() as never);

    // the picker is driven by /configs and lists all 118 entries
    const picker = renderConfigOptions(await client.configs(), "m0:mech:f");
    expect(picker.match(/<option /g)!.length).toBe(118);

    // search: the card body is the verbatim snippet, routing is collapsed
    const state = { ...defaultState(), query: "connection pool timeout" };
    const resp = await client.search(state.query, "full_text:bm25_okapi:passthrough");
    const card = buildResultCard(resp.results[0], state);
    expect(card.body).toBe(resp.results[0].verbatim_snippet);
    const cardHtml = renderResultCard(card);
    expect(cardHtml).toContain(`<p class="result-body">${escapeHtml(card.body)}</p>`);
    expect(cardHtml).toContain('<details class="routing">');
    expect(cardHtml).not.toContain("<details class=\"routing\" open");
    const bodyHtml = cardHtml.match(/<p class="result-body">([\s\S]*?)<\/p>/)![1];
    expect(bodyHtml).not.toContain("Raised the pool timeout.");

    // drill-down: full exchange, character-identical to the store payload
    const drillState = decodeState(card.drillDownHref);
    expect(drillState.view).toBe("exchange");
    expect(drillState.exchangeRef).toBe("c00042#0-1");
    const payload = await client.exchange(drillState.exchangeRef!);
    const model = buildDrillDown(payload, drillState);
    expect(model.plies.map((p) => p.text).join("\n")).toBe(verbatimText);
    expect(model.plies.length).toBe(exchangePayload.messages.length);
    const drillHtml = renderDrillDown(model);
    for (const message of exchangePayload.messages) {
      expect(drillHtml).toContain(escapeHtml(message.text));
    }

    // back preserves the query state
    const backState = decodeState(model.backHref);
    expect(backState.view).toBe("search");
    expect(backState.query).toBe("connection pool timeout");
  });

  it("unknown refs land on the not-found path", async () => {
    const client = new ApiClient("", mockService() as never);
    await expect(client.exchange("ghost#9-9")).rejects.toHaveProperty("status", 404);
  });
});

/** Browser bootstrap: hash routing, event wiring, fetch orchestration.
 *
 * All state lives in the URL hash (see state.ts); this module only reacts
 * to hashchange and form events, fetches, and swaps innerHTML using the
 * pure renderers.
 */

import { ApiClient, NotFoundError } from "./api.js";
import {
  buildDrillDown,
  buildResultCard,
  renderConfigOptions,
  renderDrillDown,
  renderErrorBanner,
  renderNotFound,
  renderResults,
  renderRooms,
} from "./render.js";
import { decodeState, encodeState, type AppState } from "./state.js";

const api = new ApiClient("");

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) {
    throw new Error(`missing element #${id}`);
  }
  return node as T;
}

let scrollBeforeDrillDown = 0;

async function showSearch(state: AppState): Promise<void> {
  el("search-view").hidden = false;
  el("exchange-view").hidden = true;
  el("rooms-view").hidden = true;
  const input = el<HTMLInputElement>("query");
  if (input.value !== state.query) {
    input.value = state.query;
  }
  const picker = el<HTMLSelectElement>("config");
  if (picker.value !== state.configId) {
    picker.value = state.configId;
  }
  const results = el("results");
  if (!state.query) {
    results.innerHTML = "";
    return;
  }
  results.innerHTML = `<p class="loading">searching&hellip;</p>`;
  try {
    const resp = await api.search(state.query, state.configId);
    const cards = resp.results.map((entry) => buildResultCard(entry, state));
    results.innerHTML = renderResults(cards);
    el("config-echo").textContent = resp.config_id;
    window.scrollTo(0, scrollBeforeDrillDown);
    scrollBeforeDrillDown = 0;
  } catch (err) {
    if ((err as Error).name === "AbortError") {
      return; // a newer search took over
    }
    results.innerHTML = renderErrorBanner(
      `The convmem service is unreachable or failed (${(err as Error).message}). ` +
      `Start it with: convmem --store <dir> serve`,
    );
  }
}

async function showExchange(state: AppState): Promise<void> {
  el("search-view").hidden = true;
  el("exchange-view").hidden = false;
  el("rooms-view").hidden = true;
  const container = el("exchange");
  const backHref = encodeState({ ...state, view: "search", exchangeRef: null });
  if (!state.exchangeRef) {
    container.innerHTML = renderNotFound("(missing ref)", backHref);
    return;
  }
  try {
    const payload = await api.exchange(state.exchangeRef);
    container.innerHTML = renderDrillDown(buildDrillDown(payload, state));
  } catch (err) {
    if (err instanceof NotFoundError) {
      container.innerHTML = renderNotFound(state.exchangeRef, backHref);
    } else {
      container.innerHTML = renderErrorBanner(`failed to load exchange: ${(err as Error).message}`);
    }
  }
}

async function showRooms(state: AppState): Promise<void> {
  el("search-view").hidden = true;
  el("exchange-view").hidden = true;
  el("rooms-view").hidden = false;
  const container = el("rooms");
  try {
    container.innerHTML = renderRooms(await api.rooms(), state);
  } catch (err) {
    container.innerHTML = renderErrorBanner(`failed to load rooms: ${(err as Error).message}`);
  }
}

function route(): void {
  const state = decodeState(window.location.hash);
  if (state.view === "exchange") {
    void showExchange(state);
  } else if (state.view === "rooms") {
    void showRooms(state);
  } else {
    void showSearch(state);
  }
}

async function boot(): Promise<void> {
  const picker = el<HTMLSelectElement>("config");
  try {
    const configs = await api.configs();
    picker.innerHTML = renderConfigOptions(configs, decodeState(window.location.hash).configId);
  } catch (err) {
    el("results").innerHTML = renderErrorBanner(
      `could not load configurations: ${(err as Error).message}`,
    );
  }

  el<HTMLFormElement>("search-form").addEventListener("submit", (event) => {
    event.preventDefault();
    const state = decodeState(window.location.hash);
    state.view = "search";
    state.exchangeRef = null;
    state.query = el<HTMLInputElement>("query").value;
    state.configId = el<HTMLSelectElement>("config").value;
    window.location.hash = encodeState(state);
  });

  picker.addEventListener("change", () => {
    const state = decodeState(window.location.hash);
    if (state.view === "search" && state.query) {
      state.configId = picker.value;
      window.location.hash = encodeState(state);
    }
  });

  document.addEventListener("click", (event) => {
    const target = (event.target as HTMLElement).closest("a.drill-down");
    if (target) {
      scrollBeforeDrillDown = window.scrollY;
    }
  });

  window.addEventListener("hashchange", route);
  route();
}

void boot();

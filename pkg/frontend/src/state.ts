/** URL-reflected application state.
 *
 * Every view is deep-linkable: the query, the chosen config, and the
 * selected exchange all live in the location hash, so reloading or
 * sharing a link restores the exact view.
 *
 *   #/search?q=pool+timeout&config=full_text:bm25_okapi:passthrough
 *   #/exchange/c00042%230-3?q=pool+timeout&config=...
 *   #/rooms
 */

export interface AppState {
  view: "search" | "exchange" | "rooms";
  query: string;
  configId: string;
  exchangeRef: string | null;
}

export const DEFAULT_CONFIG_ID = "cross_bm25v_hnswd:bm25_okapi+hnsw:w80";

export function defaultState(): AppState {
  return { view: "search", query: "", configId: DEFAULT_CONFIG_ID, exchangeRef: null };
}

export function encodeState(state: AppState): string {
  const params = new URLSearchParams();
  if (state.query) {
    params.set("q", state.query);
  }
  if (state.configId) {
    params.set("config", state.configId);
  }
  const suffix = params.toString() ? `?${params.toString()}` : "";
  if (state.view === "exchange" && state.exchangeRef) {
    return `#/exchange/${encodeURIComponent(state.exchangeRef)}${suffix}`;
  }
  if (state.view === "rooms") {
    return `#/rooms${suffix}`;
  }
  return `#/search${suffix}`;
}

export function decodeState(hash: string): AppState {
  const state = defaultState();
  if (!hash || hash === "#" || hash === "#/") {
    return state;
  }
  const body = hash.startsWith("#") ? hash.slice(1) : hash;
  const qmark = body.indexOf("?");
  const path = qmark >= 0 ? body.slice(0, qmark) : body;
  const params = new URLSearchParams(qmark >= 0 ? body.slice(qmark + 1) : "");
  state.query = params.get("q") ?? "";
  state.configId = params.get("config") ?? DEFAULT_CONFIG_ID;
  if (path.startsWith("/exchange/")) {
    state.view = "exchange";
    state.exchangeRef = decodeURIComponent(path.slice("/exchange/".length));
  } else if (path === "/rooms") {
    state.view = "rooms";
  }
  return state;
}

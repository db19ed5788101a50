/** Typed client for the convmem service.
 *
 * At most one search request is in flight: starting a new one aborts the
 * previous. The fetch function is injectable for tests.
 */

import type { ConfigInfo, ExchangePayload, RoomDirEntry, SearchResponse } from "./types.js";

export type FetchLike = (url: string, init?: { signal?: AbortSignal }) => Promise<{
  ok: boolean;
  status: number;
  json(): Promise<unknown>;
}>;

export class ApiError extends Error {
  constructor(message: string, public readonly status: number) {
    super(message);
  }
}

export class NotFoundError extends ApiError {
  constructor(message: string) {
    super(message, 404);
  }
}

/** "conv#3-7" -> "/exchange/conv/3/7"; refs come from result cards. */
export function exchangePath(exchangeRef: string): string {
  const hash = exchangeRef.lastIndexOf("#");
  const dash = exchangeRef.lastIndexOf("-");
  if (hash < 0 || dash < hash) {
    throw new Error(`malformed exchange ref: ${exchangeRef}`);
  }
  const conv = exchangeRef.slice(0, hash);
  const start = exchangeRef.slice(hash + 1, dash);
  const end = exchangeRef.slice(dash + 1);
  if (!/^\d+$/.test(start) || !/^\d+$/.test(end)) {
    throw new Error(`malformed exchange ref: ${exchangeRef}`);
  }
  return `/exchange/${encodeURIComponent(conv)}/${start}/${end}`;
}

export class ApiClient {
  private searchController: AbortController | null = null;

  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async get<T>(path: string, signal?: AbortSignal): Promise<T> {
    const resp = await this.fetchFn(this.baseUrl + path, { signal });
    if (resp.status === 404) {
      throw new NotFoundError(`not found: ${path}`);
    }
    if (!resp.ok) {
      throw new ApiError(`request failed: ${path}`, resp.status);
    }
    return (await resp.json()) as T;
  }

  configs(): Promise<ConfigInfo[]> {
    return this.get<ConfigInfo[]>("/configs");
  }

  /** Abortable: a newer search cancels the one still in flight. */
  search(query: string, configId: string, k?: number): Promise<SearchResponse> {
    this.searchController?.abort();
    this.searchController = new AbortController();
    const params = new URLSearchParams({ q: query, config: configId });
    if (k !== undefined) {
      params.set("k", String(k));
    }
    return this.get<SearchResponse>(`/search?${params}`, this.searchController.signal);
  }

  exchange(exchangeRef: string): Promise<ExchangePayload> {
    return this.get<ExchangePayload>(exchangePath(exchangeRef));
  }

  rooms(): Promise<RoomDirEntry[]> {
    return this.get<RoomDirEntry[]>("/rooms");
  }
}

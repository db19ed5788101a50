/** Payload shapes of the convmem HTTP API. */

export interface ConfigInfo {
  config_id: string;
  family: string;
  mode: string;
  mechanism: string;
  fusion: string;
  k: number;
}

export interface RoomChip {
  room_type: string;
  room_key: string;
  room_label: string;
  room_id: string;
}

export interface RoutingInfo {
  distilled_core: string | null;
  rooms: RoomChip[];
  files: string[];
}

export interface SearchEntry {
  exchange_ref: string;
  rank: number;
  score: number;
  verbatim_snippet: string;
  routing: RoutingInfo;
  provenance: string[];
}

export interface SearchResponse {
  query: string;
  config_id: string;
  results: SearchEntry[];
}

export interface ExchangeMessage {
  role: string;
  text: string;
  is_tool_only: boolean;
  ply_index: number;
}

export interface ExchangePayload {
  exchange_ref: string;
  conversation_id: string;
  project_id: string;
  ply_start: number;
  ply_end: number;
  incomplete: boolean;
  messages: ExchangeMessage[];
}

export interface RoomDirEntry {
  room_id: string;
  room_type: string;
  room_key: string;
  room_label: string;
  n_objects: number;
}

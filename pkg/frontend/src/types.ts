/** JSON payload shapes of the monitoring-center HTTP API. */

export interface BinStatus {
  bin_id: string;
  lat: number;
  lon: number;
  fill: number | null;
  state: "EMPTY" | "PARTIAL" | "FULL" | "UNKNOWN";
  last_heard_at: number | null;
}

export interface Alert {
  alert_id: string;
  bin_id: string;
  created_at: number;
  fill_at_alert: number | null;
  cause: "THRESHOLD" | "DISAGREE" | "DUAL_FAULT" | "LOW_BATTERY" | "STALE";
  status: "OPEN" | "DISPATCHED" | "RESOLVED";
  order_id: string | null;
  resolved_at: number | null;
}

export interface WorkOrder {
  order_id: string;
  truck_id: string;
  bin_ids: string[];
  route_length_m: number;
  created_at: number;
  status: "CREATED" | "ASSIGNED" | "IN_PROGRESS" | "DONE";
  linked_alert_ids: string[];
  inspect_bin_ids: string[];
  collected_bin_ids: string[];
  idempotency_key: string | null;
}

export interface Zone {
  zone_id: string;
  name: string;
  bin_ids: string[];
  truck_ids: string[];
}

export interface Truck {
  truck_id: string;
  capacity_l: number;
  speed_kmh: number;
  lat: number;
  lon: number;
}

export interface RoutePreview {
  truck_id: string;
  visit_order: string[];
  route_length_m: number;
}

export interface Forecast {
  bin_id: string;
  predicted_full_at: number | null;
  reason: string | null;
  slope_per_ms: number | null;
}

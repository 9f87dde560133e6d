/** Pure view-model construction: merge server payloads into render-ready
 * rows. Everything shown is traceable to a server field; nothing is
 * invented client-side. */

import type { Alert, BinStatus, WorkOrder } from "./types.js";

export interface BinRow {
  binId: string;
  lat: number;
  lon: number;
  fillPct: string; // "73%" or "?"
  state: BinStatus["state"];
  openAlertCauses: string[];
  lastHeardAt: number | null;
  selected: boolean;
}

export interface AlertRow {
  alertId: string;
  binId: string;
  cause: Alert["cause"];
  status: Alert["status"];
  createdAt: number;
  orderId: string | null;
}

export interface OrderRow {
  orderId: string;
  truckId: string;
  status: WorkOrder["status"];
  binCount: number;
  collectedCount: number;
  routeKm: string;
  inspect: boolean;
}

export interface DashboardViewModel {
  bins: BinRow[];
  alertQueue: AlertRow[]; // open + dispatched first, newest first within a group
  resolvedAlertCount: number;
  orders: OrderRow[];
  selectedBinIds: string[];
  canCreateOrder: boolean;
}

export function fillLabel(fill: number | null): string {
  if (fill === null) return "?";
  return `${Math.round(fill * 100)}%`;
}

const STATUS_RANK: Record<Alert["status"], number> = { OPEN: 0, DISPATCHED: 1, RESOLVED: 2 };

export function buildViewModel(
  bins: BinStatus[],
  alerts: Alert[],
  orders: WorkOrder[],
  selected: ReadonlySet<string>,
): DashboardViewModel {
  const openByBin = new Map<string, string[]>();
  for (const alert of alerts) {
    if (alert.status === "RESOLVED") continue;
    const causes = openByBin.get(alert.bin_id) ?? [];
    causes.push(alert.cause);
    openByBin.set(alert.bin_id, causes);
  }

  const binRows: BinRow[] = bins
    .map((b) => ({
      binId: b.bin_id,
      lat: b.lat,
      lon: b.lon,
      fillPct: fillLabel(b.fill),
      state: b.state,
      openAlertCauses: openByBin.get(b.bin_id) ?? [],
      lastHeardAt: b.last_heard_at,
      selected: selected.has(b.bin_id),
    }))
    .sort((a, b) => a.binId.localeCompare(b.binId));

  const alertQueue: AlertRow[] = alerts
    .filter((a) => a.status !== "RESOLVED")
    .sort((a, b) =>
      STATUS_RANK[a.status] - STATUS_RANK[b.status] ||
      b.created_at - a.created_at ||
      a.alert_id.localeCompare(b.alert_id))
    .map((a) => ({
      alertId: a.alert_id,
      binId: a.bin_id,
      cause: a.cause,
      status: a.status,
      createdAt: a.created_at,
      orderId: a.order_id,
    }));

  const orderRows: OrderRow[] = orders
    .slice()
    .sort((a, b) => b.created_at - a.created_at || a.order_id.localeCompare(b.order_id))
    .map((o) => ({
      orderId: o.order_id,
      truckId: o.truck_id,
      status: o.status,
      binCount: o.bin_ids.length,
      collectedCount: o.collected_bin_ids.length,
      routeKm: (o.route_length_m / 1000).toFixed(2),
      inspect: o.inspect_bin_ids.length > 0,
    }));

  const knownBins = new Set(bins.map((b) => b.bin_id));
  const selectedBinIds = [...selected].filter((id) => knownBins.has(id)).sort();

  return {
    bins: binRows,
    alertQueue,
    resolvedAlertCount: alerts.length - alertQueue.length,
    orders: orderRows,
    selectedBinIds,
    canCreateOrder: selectedBinIds.length > 0,
  };
}

/** Toggle a bin in the route-preview selection; returns a new set. */
export function toggleSelection(selected: ReadonlySet<string>, binId: string): Set<string> {
  const next = new Set(selected);
  if (next.has(binId)) next.delete(binId);
  else next.add(binId);
  return next;
}

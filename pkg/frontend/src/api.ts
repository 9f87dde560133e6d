/** Typed client for the monitoring-center HTTP API.
 *
 * In the browser the base URL is the dashboard server's /api proxy (which
 * injects the operator token); in tests it points straight at the Python
 * service with the token set here.
 */

import type {
  Alert, BinStatus, Forecast, RoutePreview, Truck, WorkOrder, Zone,
} from "./types.js";

export interface ApiOptions {
  baseUrl: string;
  operatorToken?: string;
  fetchFn?: typeof fetch;
  timeoutMs?: number;
}

export class ApiError extends Error {
  constructor(public status: number, public detail: string) {
    super(`HTTP ${status}: ${detail}`);
  }
}

export class ApiClient {
  private baseUrl: string;
  private token?: string;
  private fetchFn: typeof fetch;
  private timeoutMs: number;

  constructor(options: ApiOptions) {
    this.baseUrl = options.baseUrl.replace(/\/$/, "");
    this.token = options.operatorToken;
    this.fetchFn = options.fetchFn ?? fetch;
    this.timeoutMs = options.timeoutMs ?? 5000;
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const headers: Record<string, string> = {};
    if (this.token) headers["X-Operator-Token"] = this.token;
    if (body !== undefined) headers["Content-Type"] = "application/json";
    const response = await this.fetchFn(`${this.baseUrl}${path}`, {
      method,
      headers,
      body: body === undefined ? undefined : JSON.stringify(body),
      signal: AbortSignal.timeout(this.timeoutMs),
    });
    if (!response.ok) {
      let detail = response.statusText;
      try {
        const parsed = (await response.json()) as { detail?: string };
        if (parsed.detail) detail = parsed.detail;
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(response.status, detail);
    }
    return (await response.json()) as T;
  }

  health(): Promise<{ status: string; now: number; bins: number }> {
    return this.request("GET", "/healthz");
  }

  bins(params?: { state?: string; zone?: string }): Promise<BinStatus[]> {
    const query = new URLSearchParams();
    if (params?.state) query.set("state", params.state);
    if (params?.zone) query.set("zone", params.zone);
    const suffix = query.size > 0 ? `?${query}` : "";
    return this.request("GET", `/public/bins${suffix}`);
  }

  alerts(status?: string): Promise<Alert[]> {
    const suffix = status ? `?status=${encodeURIComponent(status)}` : "";
    return this.request("GET", `/alerts${suffix}`);
  }

  orders(): Promise<WorkOrder[]> {
    return this.request("GET", "/orders");
  }

  zones(): Promise<Zone[]> {
    return this.request("GET", "/zones");
  }

  trucks(): Promise<Truck[]> {
    return this.request("GET", "/trucks");
  }

  createOrder(binIds: string[], truckId: string, idempotencyKey: string): Promise<WorkOrder> {
    return this.request("POST", "/orders", {
      bin_ids: binIds,
      truck_id: truckId,
      idempotency_key: idempotencyKey,
    });
  }

  setOrderStatus(orderId: string, status: string): Promise<WorkOrder> {
    return this.request("POST", `/orders/${encodeURIComponent(orderId)}/status`, { status });
  }

  previewRoute(binIds: string[], truckId?: string): Promise<RoutePreview> {
    const body: Record<string, unknown> = { bin_ids: binIds };
    if (truckId) body.truck_id = truckId;
    return this.request("POST", "/orders/preview", body);
  }

  forecast(binId: string): Promise<Forecast> {
    return this.request("GET", `/bins/${encodeURIComponent(binId)}/forecast`);
  }
}

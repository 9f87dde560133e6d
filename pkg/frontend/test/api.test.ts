import { describe, expect, it, vi } from "vitest";

import { ApiClient, ApiError } from "../src/api.js";

function mockFetch(status: number, body: unknown) {
  return vi.fn(async () =>
    new Response(JSON.stringify(body), {
      status,
      headers: { "Content-Type": "application/json" },
    }));
}

describe("ApiClient", () => {
  it("sends the operator token on every request", async () => {
    const fetchFn = mockFetch(200, []);
    const client = new ApiClient({
      baseUrl: "http://svc", operatorToken: "tok-123", fetchFn: fetchFn as unknown as typeof fetch,
    });
    await client.alerts("OPEN");
    const [url, init] = fetchFn.mock.calls[0] as [string, RequestInit];
    expect(url).toBe("http://svc/alerts?status=OPEN");
    expect((init.headers as Record<string, string>)["X-Operator-Token"]).toBe("tok-123");
  });

  it("serializes order creation bodies", async () => {
    const fetchFn = mockFetch(201, { order_id: "O-000001" });
    const client = new ApiClient({ baseUrl: "http://svc", fetchFn: fetchFn as unknown as typeof fetch });
    const order = await client.createOrder(["b1", "b2"], "truck-1", "key-1");
    expect(order.order_id).toBe("O-000001");
    const [, init] = fetchFn.mock.calls[0] as [string, RequestInit];
    expect(JSON.parse(init.body as string)).toEqual({
      bin_ids: ["b1", "b2"], truck_id: "truck-1", idempotency_key: "key-1",
    });
  });

  it("surfaces server rejections verbatim with the status code", async () => {
    const fetchFn = mockFetch(404, { detail: "unknown truck 'ghost'" });
    const client = new ApiClient({ baseUrl: "http://svc", fetchFn: fetchFn as unknown as typeof fetch });
    const failure = await client.createOrder(["b1"], "ghost", "k").catch((e) => e);
    expect(failure).toBeInstanceOf(ApiError);
    expect(failure.status).toBe(404);
    expect(failure.message).toContain("unknown truck 'ghost'");
  });

  it("builds public bin queries", async () => {
    const fetchFn = mockFetch(200, []);
    const client = new ApiClient({ baseUrl: "http://svc/", fetchFn: fetchFn as unknown as typeof fetch });
    await client.bins({ state: "FULL", zone: "zone-all" });
    const [url] = fetchFn.mock.calls[0] as [string];
    expect(url).toBe("http://svc/public/bins?state=FULL&zone=zone-all");
  });
});

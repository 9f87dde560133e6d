/** End-to-end acceptance against the real monitoring center.
 *
 * Spawns `binfleet serve --drive` on the reference fleet (bins preloaded
 * near the alert threshold, dispatch left to the human so the dashboard
 * owns the order flow, trucks slowed so order states stay observable),
 * then drives it through the dashboard's own client/poller/view stack:
 *
 *   1. a threshold crossing appears in the alert queue within 2 polls,
 *   2. creating an order moves its linked alerts to DISPATCHED within 1 poll,
 *   3. the route preview length equals the plan CLI for the same stops,
 *   4. double-submit with one idempotency key creates one order,
 *   5. stopping the service flips the poller to DEGRADED.
 */

import { spawn, spawnSync, type ChildProcess } from "node:child_process";
import { mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import net from "node:net";
import os from "node:os";
import path from "node:path";
import { fileURLToPath } from "node:url";

import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { Poller } from "../src/poller.js";

const REFERENCE = fileURLToPath(new URL("../../scenarios/reference.json", import.meta.url));
const TOKEN = "dev-operator-token";
const POLL_MS = 500;

function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const probe = net.createServer();
    probe.listen(0, "127.0.0.1", () => {
      const { port } = probe.address() as net.AddressInfo;
      probe.close(() => resolve(port));
    });
    probe.on("error", reject);
  });
}

function demoConfig(tmpDir: string): string {
  const raw = JSON.parse(readFileSync(REFERENCE, "utf-8"));
  raw.scenario_id = "dashboard-demo";
  // preload the fleet near the threshold so crossings happen within the
  // first reporting periods instead of a simulated day later
  raw.bins.forEach((bin: Record<string, number>, i: number) => {
    if (i % 3 === 0) bin.initial_volume_l = 0.72 * 300.0; // crosses at first read
    else if (i % 3 === 1) bin.initial_volume_l = 0.55 * 300.0;
  });
  // the dispatcher (this test, via the dashboard stack) owns dispatching
  raw.policies.dispatch_batch_size = 100000;
  raw.policies.max_alert_wait_ms = 10 ** 12;
  // slow trucks: DISPATCHED/IN_PROGRESS states stay visible across polls
  raw.trucks.forEach((t: Record<string, number>) => { t.speed_kmh = 0.5; });
  const file = path.join(tmpDir, "demo.json");
  writeFileSync(file, JSON.stringify(raw));
  return file;
}

describe("dashboard against a live service", () => {
  let service: ChildProcess;
  let tmpDir: string;
  let configPath: string;
  let api: ApiClient;
  let poller: Poller;
  let baseUrl: string;

  beforeAll(async () => {
    tmpDir = mkdtempSync(path.join(os.tmpdir(), "binfleet-dash-"));
    configPath = demoConfig(tmpDir);
    const httpPort = await freePort();
    const telePort = await freePort();
    baseUrl = `http://127.0.0.1:${httpPort}`;
    service = spawn("binfleet", [
      "serve", "--config", configPath,
      "--http", `127.0.0.1:${httpPort}`,
      "--telemetry", `127.0.0.1:${telePort}`,
      "--out", path.join(tmpDir, "serve-out"),
      "--drive", "--speedup", "2000",
    ], { stdio: ["ignore", "pipe", "pipe"] });
    service.stderr?.on("data", (chunk) => process.stderr.write(`[serve] ${chunk}`));

    api = new ApiClient({ baseUrl, operatorToken: TOKEN });
    poller = new Poller(api, { intervalMs: POLL_MS });

    const deadline = Date.now() + 20_000;
    for (;;) {
      try {
        await api.health();
        break;
      } catch {
        if (Date.now() > deadline) throw new Error("service never became healthy");
        await new Promise((r) => setTimeout(r, 200));
      }
    }
  }, 30_000);

  afterAll(async () => {
    poller?.stop();
    if (service && service.exitCode === null) {
      service.kill("SIGINT");
      await new Promise((resolve) => service.once("exit", resolve));
    }
  });

  it("shows a threshold crossing in the alert queue within 2 poll intervals", async () => {
    // wait (raw, outside the dashboard) until the service has an alert
    const deadline = Date.now() + 30_000;
    for (;;) {
      const alerts = await api.alerts("OPEN");
      if (alerts.some((a) => a.cause === "THRESHOLD")) break;
      if (Date.now() > deadline) throw new Error("no threshold crossing in the driven scenario");
      await new Promise((r) => setTimeout(r, 100));
    }
    // the dashboard must surface it within 2 of its own poll cycles
    let polls = 0;
    let seen = false;
    while (polls < 2 && !seen) {
      const state = await poller.pollOnce();
      polls += 1;
      seen = (state.view?.alertQueue ?? []).some(
        (a) => a.cause === "THRESHOLD" && a.status === "OPEN");
      if (!seen) await new Promise((r) => setTimeout(r, POLL_MS));
    }
    expect(seen).toBe(true);
    expect(polls).toBeLessThanOrEqual(2);
  }, 60_000);

  it("route preview length equals the plan CLI for the same stops", async () => {
    const state = await poller.pollOnce();
    const alerted = [...new Set((state.view?.alertQueue ?? [])
      .filter((a) => a.status === "OPEN")
      .map((a) => a.binId))].sort().slice(0, 3);
    expect(alerted.length).toBe(3);

    const preview = await api.previewRoute(alerted, "truck-1");
    expect(preview.visit_order.slice().sort()).toEqual(alerted);

    const trucks = await api.trucks();
    const depot = trucks.find((t) => t.truck_id === "truck-1")!;
    const bins = await api.bins();
    const problem = {
      depot: { lat: depot.lat, lon: depot.lon },
      stops: alerted.map((id) => {
        const bin = bins.find((b) => b.bin_id === id)!;
        return { id, lat: bin.lat, lon: bin.lon };
      }),
    };
    const problemPath = path.join(tmpDir, "preview-problem.json");
    writeFileSync(problemPath, JSON.stringify(problem));
    const planned = spawnSync("binfleet", ["plan", problemPath], { encoding: "utf-8" });
    expect(planned.status).toBe(0);
    const match = planned.stdout.match(/2-opt:\s+(.*)\s+\((\d+\.\d+) km\)/);
    expect(match).not.toBeNull();
    const cliKm = Number(match![2]);
    expect(Math.abs(preview.route_length_m / 1000 - cliKm)).toBeLessThanOrEqual(0.0005);
    const cliOrder = match![1].trim().split(" -> ");
    expect(preview.visit_order).toEqual(cliOrder);
  }, 60_000);

  it("creating an order moves its linked alerts to DISPATCHED within 1 poll", async () => {
    const state = await poller.pollOnce();
    const alerted = [...new Set((state.view?.alertQueue ?? [])
      .filter((a) => a.status === "OPEN")
      .map((a) => a.binId))].sort().slice(0, 3);
    expect(alerted.length).toBe(3);

    const key = `itest-${Date.now()}`;
    const order = await poller.mutate(() => api.createOrder(alerted, "truck-1", key));
    expect(order.linked_alert_ids.length).toBeGreaterThanOrEqual(3);

    const after = await poller.pollOnce(); // exactly one poll
    const queue = after.view?.alertQueue ?? [];
    for (const alertId of order.linked_alert_ids) {
      const row = queue.find((a) => a.alertId === alertId);
      expect(row, `alert ${alertId} missing from queue`).toBeDefined();
      expect(row!.status).toBe("DISPATCHED");
      expect(row!.orderId).toBe(order.order_id);
    }
    // double-submit with the same idempotency key: one order
    const again = await poller.mutate(() => api.createOrder(alerted, "truck-1", key));
    expect(again.order_id).toBe(order.order_id);
    const orders = await api.orders();
    expect(orders.filter((o) => o.idempotency_key === key).length).toBe(1);
  }, 60_000);

  it("unknown truck rejection is surfaced with its status code", async () => {
    const failure = await api.createOrder(["bin-001"], "ghost-truck", "k-x").catch((e) => e);
    expect(failure.status).toBe(404);
    expect(String(failure.message)).toContain("ghost-truck");
  });

  it("flips to DEGRADED when the service stops and keeps the last view", async () => {
    service.kill("SIGINT");
    await new Promise((resolve) => service.once("exit", resolve));
    const state = await poller.pollOnce();
    expect(state.degraded).toBe(true);
    expect(state.view).not.toBeNull(); // stale data flagged, not discarded
    expect(poller.nextDelayMs()).toBeGreaterThan(POLL_MS);
  }, 30_000);
});

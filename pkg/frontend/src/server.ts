/** Dashboard server: serves the page at / and proxies /api/* to the
 * monitoring center, injecting the operator token so it never reaches the
 * browser.
 *
 * Environment:
 *   DASHBOARD_PORT      listen port (default 8090)
 *   BINFLEET_API        center base URL (default http://127.0.0.1:8080)
 *   BINFLEET_TOKEN      operator token (default dev-operator-token)
 *   DASHBOARD_POLL_MS   poll interval for the page (default 2000)
 */

import http from "node:http";
import { URL } from "node:url";

import { dashboardHtml } from "./page.js";

export interface DashboardServerOptions {
  port: number;
  apiBase: string;
  operatorToken: string;
  pollIntervalMs: number;
}

export function optionsFromEnv(env: NodeJS.ProcessEnv = process.env): DashboardServerOptions {
  return {
    port: Number(env.DASHBOARD_PORT ?? 8090),
    apiBase: (env.BINFLEET_API ?? "http://127.0.0.1:8080").replace(/\/$/, ""),
    operatorToken: env.BINFLEET_TOKEN ?? "dev-operator-token",
    pollIntervalMs: Number(env.DASHBOARD_POLL_MS ?? 2000),
  };
}

export function createDashboardServer(options: DashboardServerOptions): http.Server {
  const page = dashboardHtml({ pollIntervalMs: options.pollIntervalMs });

  return http.createServer(async (req, res) => {
    const url = new URL(req.url ?? "/", `http://${req.headers.host ?? "localhost"}`);

    if (req.method === "GET" && (url.pathname === "/" || url.pathname === "/index.html")) {
      res.writeHead(200, { "Content-Type": "text/html; charset=utf-8" });
      res.end(page);
      return;
    }

    if (url.pathname.startsWith("/api/")) {
      const target = options.apiBase + url.pathname.slice(4) + url.search;
      const chunks: Buffer[] = [];
      for await (const chunk of req) chunks.push(chunk as Buffer);
      const body = Buffer.concat(chunks);
      try {
        const upstream = await fetch(target, {
          method: req.method,
          headers: {
            "X-Operator-Token": options.operatorToken,
            ...(body.length > 0 ? { "Content-Type": "application/json" } : {}),
          },
          body: body.length > 0 ? body : undefined,
          signal: AbortSignal.timeout(10_000),
        });
        const payload = Buffer.from(await upstream.arrayBuffer());
        res.writeHead(upstream.status, {
          "Content-Type": upstream.headers.get("content-type") ?? "application/json",
        });
        res.end(payload);
      } catch (err) {
        res.writeHead(502, { "Content-Type": "application/json" });
        res.end(JSON.stringify({ detail: `upstream unreachable: ${String(err)}` }));
      }
      return;
    }

    res.writeHead(404, { "Content-Type": "application/json" });
    res.end(JSON.stringify({ detail: "not found" }));
  });
}

const isMain = process.argv[1]?.endsWith("server.js") || process.argv[1]?.endsWith("server.ts");
if (isMain) {
  const options = optionsFromEnv();
  const server = createDashboardServer(options);
  server.listen(options.port, () => {
    console.log(`dashboard on http://127.0.0.1:${options.port} -> ${options.apiBase}`);
  });
}

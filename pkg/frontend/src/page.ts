/** Dashboard page: one self-contained HTML document with inline styles and
 * a vanilla polling script. The browser talks only to this server's /api
 * proxy, which injects the operator token; every number on screen comes
 * straight from a documented endpoint field. */

export interface PageConfig {
  pollIntervalMs: number;
}

export function dashboardHtml(config: PageConfig): string {
  return `<!DOCTYPE html>
<html lang="en">
<head>
<meta charset="utf-8">
<meta name="viewport" content="width=device-width,initial-scale=1">
<title>binfleet dispatch</title>
<style>
  *{margin:0;padding:0;box-sizing:border-box}
  body{font-family:'SF Mono','Cascadia Code',Consolas,monospace;background:#0d1117;color:#c9d1d9;font-size:13px}
  header{background:#161b22;border-bottom:1px solid #30363d;padding:10px 16px;display:flex;align-items:center;gap:16px}
  header h1{font-size:15px;color:#f0f6fc}
  .dot{width:8px;height:8px;border-radius:50%;display:inline-block;margin-right:5px}
  .dot.live{background:#3fb950}
  .dot.dead{background:#f85149}
  #banner{display:none;background:#3d1a1a;color:#ff7b72;padding:8px 16px;font-weight:600}
  #banner.on{display:block}
  main{display:grid;grid-template-columns:1.4fr 1fr;gap:16px;padding:16px}
  @media(max-width:1000px){main{grid-template-columns:1fr}}
  section{background:#161b22;border:1px solid #30363d;border-radius:6px;overflow:hidden}
  section h2{font-size:11px;text-transform:uppercase;letter-spacing:0.8px;color:#8b949e;padding:8px 12px;border-bottom:1px solid #30363d}
  table{width:100%;border-collapse:collapse;font-size:12px}
  th{color:#8b949e;text-align:left;padding:5px 10px;font-size:10px;text-transform:uppercase}
  td{padding:4px 10px;border-top:1px solid #21262d}
  tr:hover td{background:#1c2129}
  .state-FULL{color:#f85149;font-weight:700}
  .state-PARTIAL{color:#d29922}
  .state-EMPTY{color:#3fb950}
  .state-UNKNOWN{color:#6e7681}
  .st-OPEN{color:#f85149;font-weight:700}
  .st-DISPATCHED{color:#d29922;font-weight:700}
  .st-DONE,.st-RESOLVED{color:#3fb950}
  .st-ASSIGNED,.st-IN_PROGRESS{color:#58a6ff}
  .muted{color:#6e7681}
  .panel{padding:10px 12px;border-top:1px solid #30363d;display:flex;gap:8px;align-items:center;flex-wrap:wrap}
  button{background:#21262d;color:#c9d1d9;border:1px solid #30363d;border-radius:5px;padding:5px 12px;font:inherit;cursor:pointer}
  button:hover:not(:disabled){background:#30363d}
  button:disabled{opacity:0.4;cursor:not-allowed}
  button.primary{background:#1f6feb;border-color:#1f6feb;color:#fff}
  select{background:#21262d;color:#c9d1d9;border:1px solid #30363d;border-radius:5px;padding:4px 8px;font:inherit}
  #preview{color:#58a6ff}
  #flash{color:#d29922;min-height:1em;padding:0 12px 8px}
  .scroll{max-height:380px;overflow-y:auto}
</style>
</head>
<body>
<header>
  <h1>binfleet dispatch</h1>
  <span><span id="live" class="dot dead"></span><span id="livetext">connecting</span></span>
  <span class="muted" id="simclock"></span>
</header>
<div id="banner">DEGRADED &mdash; service unreachable, data below may be stale</div>
<main>
  <section>
    <h2>Bins</h2>
    <div class="scroll"><table id="bins">
      <thead><tr><th></th><th>bin</th><th>fill</th><th>state</th><th>alerts</th><th>lat</th><th>lon</th><th>forecast full</th></tr></thead>
      <tbody></tbody>
    </table></div>
    <div class="panel">
      <span id="selcount" class="muted">0 selected</span>
      <button id="btn-preview" disabled>Preview route</button>
      <select id="truck"></select>
      <button id="btn-order" class="primary" disabled>Create order</button>
      <span id="preview"></span>
    </div>
    <div id="flash"></div>
  </section>
  <div style="display:flex;flex-direction:column;gap:16px">
    <section>
      <h2>Alert queue</h2>
      <div class="scroll"><table id="alerts">
        <thead><tr><th>alert</th><th>bin</th><th>cause</th><th>status</th><th>order</th></tr></thead>
        <tbody></tbody>
      </table></div>
    </section>
    <section>
      <h2>Order board</h2>
      <div class="scroll"><table id="orders">
        <thead><tr><th>order</th><th>truck</th><th>status</th><th>bins</th><th>route km</th></tr></thead>
        <tbody></tbody>
      </table></div>
    </section>
  </div>
</main>
<script>
const POLL_MS = ${config.pollIntervalMs};
const selected = new Set();
let trucks = [];
let inFlight = false;
let failures = 0;

const esc = (s) => String(s).replace(/[&<>"]/g, (c) => ({"&":"&amp;","<":"&lt;",">":"&gt;",'"':"&quot;"}[c]));

async function api(path, options) {
  const response = await fetch("/api" + path, options);
  if (!response.ok) {
    let detail = response.statusText;
    try { detail = (await response.json()).detail || detail; } catch {}
    throw new Error("HTTP " + response.status + ": " + detail);
  }
  return response.json();
}

function setDegraded(on, message) {
  document.getElementById("banner").className = on ? "on" : "";
  document.getElementById("live").className = "dot " + (on ? "dead" : "live");
  document.getElementById("livetext").textContent = on ? "degraded" : "live";
  if (on && message) document.getElementById("flash").textContent = message;
}

function renderBins(bins, openAlerts) {
  const openByBin = {};
  for (const a of openAlerts) (openByBin[a.bin_id] = openByBin[a.bin_id] || []).push(a.cause);
  const rows = bins.map((b) => {
    const checked = selected.has(b.bin_id) ? "checked" : "";
    const fill = b.fill === null ? "?" : Math.round(b.fill * 100) + "%";
    const causes = (openByBin[b.bin_id] || []).join(", ");
    return '<tr data-bin="' + esc(b.bin_id) + '">' +
      '<td><input type="checkbox" data-sel="' + esc(b.bin_id) + '" ' + checked + "></td>" +
      "<td>" + esc(b.bin_id) + "</td><td>" + fill + "</td>" +
      '<td class="state-' + esc(b.state) + '">' + esc(b.state) + "</td>" +
      "<td>" + esc(causes) + "</td>" +
      "<td>" + b.lat.toFixed(4) + "</td><td>" + b.lon.toFixed(4) + "</td>" +
      '<td class="muted" data-forecast="' + esc(b.bin_id) + '"></td></tr>';
  });
  document.querySelector("#bins tbody").innerHTML = rows.join("");
  for (const box of document.querySelectorAll("[data-sel]")) {
    box.addEventListener("change", (ev) => {
      const id = ev.target.getAttribute("data-sel");
      if (ev.target.checked) selected.add(id); else selected.delete(id);
      updatePanel();
    });
  }
}

function renderAlerts(alerts) {
  const active = alerts.filter((a) => a.status !== "RESOLVED")
    .sort((x, y) => (x.status === y.status ? y.created_at - x.created_at
      : (x.status === "OPEN" ? -1 : 1)));
  document.querySelector("#alerts tbody").innerHTML = active.map((a) =>
    "<tr><td>" + esc(a.alert_id) + "</td><td>" + esc(a.bin_id) + "</td><td>" + esc(a.cause) +
    '</td><td class="st-' + esc(a.status) + '">' + esc(a.status) + "</td><td>" +
    esc(a.order_id || "") + "</td></tr>").join("") ||
    '<tr><td colspan="5" class="muted">no active alerts</td></tr>';
  return active;
}

function renderOrders(orders) {
  const rows = orders.slice().sort((x, y) => y.created_at - x.created_at);
  document.querySelector("#orders tbody").innerHTML = rows.map((o) =>
    "<tr><td>" + esc(o.order_id) + "</td><td>" + esc(o.truck_id) +
    '</td><td class="st-' + esc(o.status) + '">' + esc(o.status) + "</td><td>" +
    o.collected_bin_ids.length + "/" + o.bin_ids.length + "</td><td>" +
    (o.route_length_m / 1000).toFixed(2) + "</td></tr>").join("") ||
    '<tr><td colspan="5" class="muted">no orders yet</td></tr>';
}

function updatePanel() {
  document.getElementById("selcount").textContent = selected.size + " selected";
  document.getElementById("btn-preview").disabled = selected.size === 0 || inFlight;
  document.getElementById("btn-order").disabled = selected.size === 0 || inFlight || trucks.length === 0;
}

async function refresh() {
  try {
    const [bins, alerts, orders, truckList, health] = await Promise.all([
      api("/public/bins"), api("/alerts"), api("/orders"), api("/trucks"), api("/healthz"),
    ]);
    trucks = truckList;
    const sel = document.getElementById("truck");
    if (sel.options.length !== trucks.length) {
      sel.innerHTML = trucks.map((t) => '<option value="' + esc(t.truck_id) + '">' + esc(t.truck_id) + "</option>").join("");
    }
    const active = renderAlerts(alerts);
    renderBins(bins, active);
    renderOrders(orders);
    document.getElementById("simclock").textContent = "t=" + health.now;
    setDegraded(false);
    failures = 0;
  } catch (err) {
    failures += 1;
    setDegraded(true, String(err));
  }
  updatePanel();
  setTimeout(refresh, failures === 0 ? POLL_MS : Math.min(POLL_MS * 2 ** failures, 30000));
}

document.getElementById("btn-preview").addEventListener("click", async () => {
  if (inFlight || selected.size === 0) return;
  try {
    const preview = await api("/orders/preview", {
      method: "POST", headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ bin_ids: [...selected], truck_id: document.getElementById("truck").value }),
    });
    document.getElementById("preview").textContent =
      preview.visit_order.join(" \\u2192 ") + " = " + (preview.route_length_m / 1000).toFixed(3) + " km";
  } catch (err) {
    document.getElementById("flash").textContent = String(err);
  }
});

document.getElementById("btn-order").addEventListener("click", async () => {
  if (inFlight || selected.size === 0) return;
  inFlight = true;
  updatePanel();
  try {
    const order = await api("/orders", {
      method: "POST", headers: { "Content-Type": "application/json" },
      body: JSON.stringify({
        bin_ids: [...selected],
        truck_id: document.getElementById("truck").value,
        idempotency_key: crypto.randomUUID(),
      }),
    });
    document.getElementById("flash").textContent = "created " + order.order_id;
    selected.clear();
  } catch (err) {
    document.getElementById("flash").textContent = String(err);
  } finally {
    inFlight = false;
    updatePanel();
  }
});

refresh();
</script>
</body>
</html>`;
}

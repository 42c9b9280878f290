import { GatewayClient, GatewayError } from "./api.js";
import { LatencyStrip, TrendBuffer } from "./session.js";
import { activeLinks, mergeTopologies } from "./topology.js";
import type { ServiceEntry } from "./types.js";

interface ActiveSession {
  gateway: GatewayClient;
  raId: string;
  serviceName: string;
  trend: TrendBuffer;
  abort: AbortController;
}

const $ = (id: string) => document.getElementById(id) as HTMLElement;

let gateways: GatewayClient[] = [];
let session: ActiveSession | null = null;
const latencies = new LatencyStrip();

function setStatus(text: string) {
  $("status").textContent = text;
}

async function connect() {
  const raw = ($("gateway-urls") as HTMLInputElement).value;
  gateways = raw
    .split(",")
    .map((u) => u.trim())
    .filter(Boolean)
    .map((u) => new GatewayClient(u));
  await Promise.all([refreshServices(), refreshTopology()]);
  setStatus(`connected to ${gateways.length} gateway(s)`);
}

async function refreshServices() {
  const lists = await Promise.all(
    gateways.map(async (gw) => {
      try {
        return { gw, services: await gw.listServices("reachable") };
      } catch {
        return { gw, services: [] as ServiceEntry[] };
      }
    }),
  );
  const container = $("services");
  container.innerHTML = "";
  const seen = new Set<string>();
  for (const { gw, services } of lists) {
    for (const entry of services) {
      if (seen.has(entry.service_name)) continue;
      seen.add(entry.service_name);
      const row = document.createElement("div");
      row.className = "service-row";
      const label = document.createElement("span");
      label.textContent = `${entry.service_name} (home: ${entry.home_org})`;
      const button = document.createElement("button");
      button.textContent = "open";
      button.onclick = () => openSession(gw, entry.service_name);
      row.append(label, button);
      container.append(row);
    }
  }
}

async function refreshTopology() {
  const snapshots = await Promise.all(
    gateways.map((gw) => gw.topology().catch(() => null)),
  );
  const merged = mergeTopologies(snapshots.filter((s) => s !== null));
  const container = $("topology");
  container.innerHTML = `<div>orgs: ${merged.orgs.join(", ") || "-"}</div>`;
  for (const link of activeLinks(merged)) {
    const row = document.createElement("div");
    row.textContent = `${link.a} = ${link.b}  [${link.shared.join(", ")}]`;
    container.append(row);
  }
}

function renderLatencies() {
  const container = $("latency-strip");
  container.innerHTML = "";
  for (const entry of latencies.entries) {
    const chip = document.createElement("span");
    chip.className = `chip ${entry.badge}`;
    chip.textContent = `${entry.service_name} ${entry.t_service_ms}ms ${entry.path_class}`;
    container.append(chip);
  }
}

function drawTrend(trend: TrendBuffer) {
  const canvas = $("trend") as HTMLCanvasElement;
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const vars = trend.variables();
  vars.forEach((variable, i) => {
    const points = trend.get(variable);
    if (points.length < 2) return;
    const values = points.map((p) => p.value);
    const lo = Math.min(...values);
    const hi = Math.max(...values);
    const span = hi - lo || 1;
    ctx.strokeStyle = ["#2b8a3e", "#1864ab", "#e8590c"][i % 3];
    ctx.beginPath();
    points.forEach((p, j) => {
      const x = (j / (points.length - 1)) * canvas.width;
      const y = canvas.height - ((p.value - lo) / span) * (canvas.height - 8) - 4;
      j === 0 ? ctx.moveTo(x, y) : ctx.lineTo(x, y);
    });
    ctx.stroke();
  });
  const readout = vars
    .map((v) => {
      const last = trend.latest(v);
      return last ? `${v}=${last.value.toFixed(2)} (${last.quality})` : v;
    })
    .join("   ");
  $("trend-readout").textContent = readout;
}

async function openSession(gateway: GatewayClient, serviceName: string) {
  if (session) await closeSession();
  try {
    const opened = await gateway.open(serviceName);
    latencies.push(opened.latency_record);
    renderLatencies();
    const trend = new TrendBuffer();
    const abort = new AbortController();
    session = { gateway, raId: opened.ra_id, serviceName, trend, abort };
    $("session-title").textContent =
      `${serviceName} via ${opened.latency_record.path_class} ` +
      `(${opened.latency_record.t_service_ms} ms)`;
    void refreshTopology();
    void pump(session);
  } catch (err) {
    setStatus(err instanceof GatewayError ? err.message : String(err));
  }
}

async function pump(active: ActiveSession) {
  try {
    for await (const event of active.gateway.events(active.raId, active.abort.signal)) {
      if (session !== active) return;
      if (active.trend.apply(event)) drawTrend(active.trend);
      if (event.type === "session" && event.state === "closed") break;
    }
  } catch {
    // stream torn down (session closed or page navigating away)
  }
  if (session === active) {
    $("session-title").textContent = "no session";
    session = null;
  }
}

async function sendSetpoint() {
  if (!session) return;
  const variable = ($("sp-var") as HTMLInputElement).value;
  const value = Number(($("sp-value") as HTMLInputElement).value);
  const verdict = await session.gateway.setpoint(session.raId, variable, value);
  const note = $("sp-result");
  note.textContent = verdict.accepted ? "accepted" : `rejected: ${verdict.reason}`;
  note.className = verdict.accepted ? "ok" : "error";
}

async function closeSession() {
  if (!session) return;
  const active = session;
  session = null;
  active.abort.abort();
  await active.gateway.close(active.raId);
  $("session-title").textContent = "no session";
  void refreshTopology();
}

export function wire() {
  $("connect").onclick = () => void connect();
  $("refresh").onclick = () => void Promise.all([refreshServices(), refreshTopology()]);
  $("sp-send").onclick = () => void sendSetpoint();
  $("close-session").onclick = () => void closeSession();
}

if (typeof document !== "undefined" && document.readyState !== "loading") {
  wire();
} else if (typeof document !== "undefined") {
  document.addEventListener("DOMContentLoaded", wire);
}

// Console entry point: wires the stream store to the dashboard DOM. The page
// is stateless with respect to the process — reloading rebuilds the same view
// from /state + /stream.

import { drawChart, type ChartSpec } from "./charts.js";
import { COMMANDS, submitCommand, type CommandSpec } from "./commands.js";
import { StateStore, type StoreView } from "./store.js";
import { connectStream } from "./stream.js";
import type { CommandBody } from "./types.js";

const params = new URLSearchParams(location.search);
const apiBase = params.get("api") ?? `http://${location.hostname}:8000`;
const wsUrl = apiBase.replace(/^http/, "ws") + "/stream";

const FAULT_STATES = new Set(["fault"]);

// chart definitions; stroke band shows the allowed region before a limit
// error latches (defaults can be tuned via data attributes later)
const STROKE_MAX = 30;
const charts: { spec: ChartSpec; canvas: HTMLCanvasElement }[] = [];

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function buildCharts(view: StoreView): void {
  const latest = view.latest?.record ?? null;
  const setpoint = latest?.temp_setpoint ?? 200;
  const force = latest?.force_target ?? 30;
  const defs: ChartSpec[] = [
    {
      title: "Zone temperatures",
      unit: "°C",
      series: [
        { label: "zone 1", color: "#e6553f", value: (r) => r.zone_temp_1 },
        { label: "zone 2", color: "#f0a03c", value: (r) => r.zone_temp_2 },
        { label: "preheat", color: "#d8c24a", value: (r) => r.zone_temp_3 },
        { label: "setpoint", color: "#888", dashed: true, value: (r) => r.temp_setpoint },
      ],
      bands: [{ from: setpoint - 10, to: setpoint + 10, color: "rgba(90,160,90,0.15)" }],
    },
    {
      title: "Compaction force",
      unit: "N",
      series: [
        { label: "actual", color: "#4f9de0", value: (r) => r.acf_force },
        { label: "target", color: "#888", dashed: true, value: (r) => r.force_target },
      ],
      bands: [{ from: 25, to: force + 10, color: "rgba(90,160,90,0.12)" }],
      yMin: 0,
    },
    {
      title: "ACF stroke",
      unit: "mm",
      series: [{ label: "stroke", color: "#9a6fe0", value: (r) => r.acf_stroke }],
      bands: [
        { from: 0, to: STROKE_MAX, color: "rgba(90,160,90,0.10)" },
        { from: STROKE_MAX * 0.85, to: STROKE_MAX, color: "rgba(220,160,60,0.25)" },
      ],
      yMin: 0,
      yMax: STROKE_MAX * 1.15,
    },
  ];
  const host = el<HTMLDivElement>("charts");
  host.innerHTML = "";
  charts.length = 0;
  for (const spec of defs) {
    const canvas = document.createElement("canvas");
    canvas.width = 560;
    canvas.height = 160;
    host.appendChild(canvas);
    charts.push({ spec, canvas });
  }
}

function renderCommands(): void {
  const host = el<HTMLDivElement>("commands");
  for (const spec of COMMANDS) {
    host.appendChild(commandForm(spec));
  }
}

function commandForm(spec: CommandSpec): HTMLFormElement {
  const form = document.createElement("form");
  form.className = "command";
  const title = document.createElement("span");
  title.textContent = spec.label;
  form.appendChild(title);
  for (const field of spec.fields) {
    const label = document.createElement("label");
    label.textContent = field.unit ? `${field.label} [${field.unit}]` : field.label;
    if (field.options) {
      const select = document.createElement("select");
      select.name = field.name;
      for (const opt of field.options) {
        const o = document.createElement("option");
        o.value = opt;
        o.textContent = opt;
        select.appendChild(o);
      }
      label.appendChild(select);
    } else {
      const input = document.createElement("input");
      input.type = "number";
      input.name = field.name;
      input.step = String(field.step ?? "any");
      if (field.defaultValue !== undefined) input.value = String(field.defaultValue);
      label.appendChild(input);
    }
    form.appendChild(label);
  }
  const button = document.createElement("button");
  button.textContent = "Send";
  form.appendChild(button);
  form.addEventListener("submit", async (ev) => {
    ev.preventDefault();
    if (spec.confirm && !window.confirm(`${spec.label}?`)) return;
    const args: Record<string, number | string> = {};
    for (const field of spec.fields) {
      const input = form.elements.namedItem(field.name) as
        | HTMLInputElement
        | HTMLSelectElement;
      args[field.name] = field.options ? input.value : Number(input.value);
    }
    const body: CommandBody = { type: spec.type, args };
    const log = el<HTMLUListElement>("command-log");
    try {
      const reply = await submitCommand(apiBase, body);
      logLine(log, `${spec.type}: ${reply.ok ? "ok" : "refused"} — ${reply.message}`, !reply.ok);
    } catch {
      logLine(log, `${spec.type}: network failure — retry?`, true);
    }
  });
  return form;
}

function logLine(log: HTMLUListElement, text: string, isError: boolean): void {
  const li = document.createElement("li");
  li.textContent = text;
  if (isError) li.className = "refused";
  log.prepend(li);
  while (log.children.length > 20) log.removeChild(log.lastChild!);
}

function render(view: StoreView): void {
  const badge = el<HTMLSpanElement>("state-badge");
  const state = view.latest?.state ?? "—";
  badge.textContent = state;
  badge.className = FAULT_STATES.has(state) ? "badge fault" : "badge";

  el<HTMLSpanElement>("sim-time").textContent = view.latest
    ? `${view.latest.t.toFixed(2)} s`
    : "—";
  const rec = view.latest?.record ?? null;
  el<HTMLSpanElement>("spool").textContent = rec
    ? `${rec.spool_remaining.toFixed(3)} m`
    : "—";
  el<HTMLSpanElement>("track").textContent = rec
    ? `${rec.track} @ ${rec.s_progress.toFixed(3)} m`
    : "—";

  const banner = el<HTMLDivElement>("stale-banner");
  banner.hidden = !(view.stale || !view.connected);
  banner.textContent = view.connected
    ? "stream stale: no frame for over 1 s"
    : "disconnected — reconnecting…";

  const alarmsHost = el<HTMLUListElement>("alarms");
  alarmsHost.innerHTML = "";
  for (const alarm of view.latest?.alarms ?? []) {
    const li = document.createElement("li");
    li.textContent = alarm;
    alarmsHost.appendChild(li);
  }
  el<HTMLButtonElement>("ack-button").disabled = !FAULT_STATES.has(state);

  if (charts.length === 0 && view.latest?.record) buildCharts(view);
  for (const { spec, canvas } of charts) {
    drawChart(canvas, spec, view.window);
  }
}

const store = new StateStore();
store.subscribe(render);
connectStream(wsUrl, store);
renderCommands();
el<HTMLButtonElement>("ack-button").addEventListener("click", () => {
  void submitCommand(apiBase, { type: "ack_fault" });
});

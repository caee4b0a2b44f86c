// Minimal canvas strip charts with a fixed rolling-time horizon. Missing
// samples stay gaps (the line breaks), limit bands are shaded so operators
// see the allowed region before anything latches.

import type { TraceRecord } from "./types.js";
import { WINDOW_SECONDS } from "./store.js";

export interface Series {
  label: string;
  color: string;
  value: (r: TraceRecord) => number | null;
  dashed?: boolean;
}

export interface Band {
  from: number;
  to: number;
  color: string;
}

export interface ChartSpec {
  title: string;
  unit: string;
  series: Series[];
  /** shaded y-regions, e.g. the allowed stroke range */
  bands?: Band[];
  yMin?: number;
  yMax?: number;
}

export function drawChart(
  canvas: HTMLCanvasElement,
  spec: ChartSpec,
  window: TraceRecord[],
): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const w = canvas.width;
  const h = canvas.height;
  const padL = 44;
  const padB = 16;
  const padT = 18;
  ctx.clearRect(0, 0, w, h);

  const tEnd = window.length ? window[window.length - 1].t : 0;
  const tStart = tEnd - WINDOW_SECONDS;

  // y range: explicit bounds, else data extent with margin
  let yMin = spec.yMin ?? Infinity;
  let yMax = spec.yMax ?? -Infinity;
  if (spec.yMin === undefined || spec.yMax === undefined) {
    for (const r of window) {
      for (const s of spec.series) {
        const v = s.value(r);
        if (v === null || !Number.isFinite(v)) continue;
        if (spec.yMin === undefined) yMin = Math.min(yMin, v);
        if (spec.yMax === undefined) yMax = Math.max(yMax, v);
      }
    }
    for (const b of spec.bands ?? []) {
      if (spec.yMin === undefined) yMin = Math.min(yMin, b.from);
      if (spec.yMax === undefined) yMax = Math.max(yMax, b.to);
    }
    if (!Number.isFinite(yMin)) yMin = 0;
    if (!Number.isFinite(yMax)) yMax = 1;
    const margin = (yMax - yMin || 1) * 0.1;
    if (spec.yMin === undefined) yMin -= margin;
    if (spec.yMax === undefined) yMax += margin;
  }

  const toX = (t: number) =>
    padL + ((t - tStart) / WINDOW_SECONDS) * (w - padL - 4);
  const toY = (v: number) =>
    padT + (1 - (v - yMin) / (yMax - yMin)) * (h - padT - padB);

  for (const band of spec.bands ?? []) {
    ctx.fillStyle = band.color;
    const y1 = toY(Math.min(band.to, yMax));
    const y2 = toY(Math.max(band.from, yMin));
    ctx.fillRect(padL, y1, w - padL - 4, y2 - y1);
  }

  ctx.strokeStyle = "#444";
  ctx.strokeRect(padL, padT, w - padL - 4, h - padT - padB);

  ctx.fillStyle = "#aaa";
  ctx.font = "10px sans-serif";
  ctx.textAlign = "right";
  ctx.fillText(yMax.toFixed(1), padL - 4, padT + 8);
  ctx.fillText(yMin.toFixed(1), padL - 4, h - padB);
  ctx.textAlign = "left";
  ctx.fillStyle = "#ddd";
  ctx.font = "11px sans-serif";
  ctx.fillText(`${spec.title} [${spec.unit}]`, padL, 12);

  for (const series of spec.series) {
    ctx.strokeStyle = series.color;
    ctx.setLineDash(series.dashed ? [4, 3] : []);
    ctx.lineWidth = 1.2;
    ctx.beginPath();
    let pen = false;
    for (const r of window) {
      const v = series.value(r);
      if (v === null || !Number.isFinite(v) || r.t < tStart) {
        pen = false; // gap, not zero
        continue;
      }
      const x = toX(r.t);
      const y = toY(Math.min(Math.max(v, yMin), yMax));
      if (pen) {
        ctx.lineTo(x, y);
      } else {
        ctx.moveTo(x, y);
        pen = true;
      }
    }
    ctx.stroke();
  }
  ctx.setLineDash([]);
}

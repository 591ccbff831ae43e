// Minimal canvas loss chart: log-scaled y when the data allows it, drawn
// incrementally from the poller's cumulative row list.

import type { LossRow } from "./types.js";

export class LossChart {
  private ctx: CanvasRenderingContext2D;

  constructor(private canvas: HTMLCanvasElement) {
    const ctx = canvas.getContext("2d");
    if (!ctx) throw new Error("canvas 2d context unavailable");
    this.ctx = ctx;
  }

  draw(allRows: LossRow[]) {
    const { width, height } = this.canvas;
    const ctx = this.ctx;
    ctx.clearRect(0, 0, width, height);
    ctx.fillStyle = "#10131a";
    ctx.fillRect(0, 0, width, height);
    const rows = allRows.filter((r): r is [number, number] =>
      r[1] !== null && Number.isFinite(r[1]));
    if (rows.length === 0) {
      if (allRows.length > 0) {
        ctx.fillStyle = "#e46a6a";
        ctx.font = "12px sans-serif";
        ctx.fillText("loss diverged (no finite values)", 12, 20);
      }
      return;
    }

    const pad = 34;
    const xs = rows.map((r) => r[0]);
    const ys = rows.map((r) => r[1]);
    const logOk = ys.every((y) => y > 0);
    const ty = logOk ? (y: number) => Math.log10(y) : (y: number) => y;
    const yv = ys.map(ty);
    const xMin = xs[0], xMax = xs[xs.length - 1];
    let yMin = Math.min(...yv), yMax = Math.max(...yv);
    if (yMin === yMax) { yMin -= 1; yMax += 1; }

    const px = (x: number) =>
      pad + ((x - xMin) / Math.max(xMax - xMin, 1)) * (width - 2 * pad);
    const py = (y: number) =>
      height - pad - ((ty(y) - yMin) / (yMax - yMin)) * (height - 2 * pad);

    ctx.strokeStyle = "#2c3340";
    ctx.strokeRect(pad, pad, width - 2 * pad, height - 2 * pad);

    ctx.strokeStyle = "#5ad0a6";
    ctx.lineWidth = 1.5;
    ctx.beginPath();
    rows.forEach(([x, y], i) => {
      if (i === 0) ctx.moveTo(px(x), py(y));
      else ctx.lineTo(px(x), py(y));
    });
    ctx.stroke();

    ctx.fillStyle = "#9aa4b2";
    ctx.font = "11px sans-serif";
    ctx.fillText(String(xMin), pad, height - pad + 14);
    ctx.fillText(String(xMax), width - pad - 24, height - pad + 14);
    const last = ys[ys.length - 1];
    ctx.fillText(`loss ${last.toExponential(3)}`, pad + 4, pad - 8);
    if (logOk) ctx.fillText("log scale", width - pad - 56, pad - 8);
  }
}

/** Canvas drawing for the three views: hand skeleton, force bars, profile traces. */

import type { Frame, Point2, TracePoint } from "./viewmodel.js";

const TIP_COLORS: Record<string, string> = {
  ff: "#4e9af1",
  mf: "#38c172",
  rf: "#f1a54e",
  lf: "#e05c5c",
  th: "#b06cd9",
};

function color(tip: string): string {
  return TIP_COLORS[tip] ?? "#999";
}

/** Map model coordinates (meters) into a canvas rectangle, y up. */
function mapper(w: number, h: number) {
  const scale = Math.min(w, h) * 2.2;
  const cx = w * 0.5;
  const cy = h * 0.82;
  return (p: Point2) => ({ x: cx + p.u * scale, y: cy - p.v * scale });
}

export function drawSkeleton(ctx: CanvasRenderingContext2D, frame: Frame, w: number, h: number): void {
  ctx.clearRect(0, 0, w, h);
  const toPx = mapper(w, h);
  ctx.lineWidth = 3;
  ctx.lineCap = "round";
  for (const seg of frame.segments) {
    const a = toPx(seg.a);
    const b = toPx(seg.b);
    ctx.strokeStyle = color(seg.tip);
    ctx.beginPath();
    ctx.moveTo(a.x, a.y);
    ctx.lineTo(b.x, b.y);
    ctx.stroke();
  }
  for (const m of frame.markers) {
    const p = toPx(m.at);
    ctx.fillStyle = color(m.tip);
    ctx.beginPath();
    ctx.arc(p.x, p.y, 4 + Math.min(m.force, 10), 0, 2 * Math.PI);
    ctx.fill();
  }
  if (frame.segments.length > 0) {
    const wrist = toPx(frame.segments[0]!.a);
    ctx.fillStyle = "#555";
    ctx.beginPath();
    ctx.arc(wrist.x, wrist.y, 5, 0, 2 * Math.PI);
    ctx.fill();
  }
}

export function drawForceBars(ctx: CanvasRenderingContext2D, frame: Frame, w: number, h: number): void {
  ctx.clearRect(0, 0, w, h);
  const n = frame.bars.length;
  if (n === 0) return;
  const slot = w / n;
  const peak = Math.max(1, ...frame.bars.map((b) => b.force));
  ctx.font = "12px sans-serif";
  ctx.textAlign = "center";
  frame.bars.forEach((bar, i) => {
    const height = (bar.force / peak) * (h - 26);
    const x = i * slot + slot * 0.2;
    ctx.fillStyle = color(bar.tip);
    ctx.fillRect(x, h - 18 - height, slot * 0.6, height);
    ctx.fillStyle = "#333";
    ctx.fillText(`${bar.tip} ${bar.force.toFixed(1)}N`, i * slot + slot / 2, h - 4);
  });
}

function drawTrace(
  ctx: CanvasRenderingContext2D,
  points: TracePoint[],
  w: number,
  h: number,
  stroke: string,
): void {
  if (points.length < 2) return;
  const t0 = points[0]!.t;
  const t1 = points[points.length - 1]!.t;
  const span = Math.max(t1 - t0, 1e-9);
  let lo = Infinity;
  let hi = -Infinity;
  for (const p of points) {
    lo = Math.min(lo, p.value);
    hi = Math.max(hi, p.value);
  }
  const range = Math.max(hi - lo, 1e-9);
  ctx.strokeStyle = stroke;
  ctx.lineWidth = 1.5;
  ctx.beginPath();
  points.forEach((p, i) => {
    const x = ((p.t - t0) / span) * w;
    const y = h - ((p.value - lo) / range) * (h - 8) - 4;
    if (i === 0) ctx.moveTo(x, y);
    else ctx.lineTo(x, y);
  });
  ctx.stroke();
}

export function drawProfiles(ctx: CanvasRenderingContext2D, frame: Frame, w: number, h: number): void {
  ctx.clearRect(0, 0, w, h);
  const half = h / 2;
  drawTrace(ctx, frame.ksTrace, w, half - 2, "#4e9af1");
  ctx.save();
  ctx.translate(0, half + 2);
  drawTrace(ctx, frame.vTrace, w, half - 2, "#e05c5c");
  ctx.restore();
  ctx.fillStyle = "#666";
  ctx.font = "11px sans-serif";
  ctx.textAlign = "left";
  ctx.fillText("mean Ks", 6, 12);
  ctx.fillText("mean v", 6, half + 14);
}

/**
 * View-model layer: turns panel state into plain drawable data.
 *
 * Everything here is DOM-free so it can be tested headless. The renderer
 * consumes a Frame; the render loop samples the latest snapshot once per
 * animation tick, so a fast state stream never queues up frames.
 */

import type { Panel } from "./panel.js";
import type { StateMessage } from "./protocol.js";

export const TIP_ORDER = ["ff", "mf", "rf", "lf", "th"];

export interface Point2 {
  u: number;
  v: number;
}

export interface Segment {
  a: Point2;
  b: Point2;
  tip: string;
}

export interface TipMarker {
  tip: string;
  at: Point2;
  force: number;
}

export interface ForceBar {
  tip: string;
  force: number;
}

export interface TracePoint {
  t: number;
  value: number;
}

export interface Frame {
  t: number;
  segments: Segment[];
  markers: TipMarker[];
  bars: ForceBar[];
  ksTrace: TracePoint[];
  vTrace: TracePoint[];
  maxContactForce: number;
  meanContactForce: number;
}

/**
 * Oblique 2.5-D projection: the palm plane maps to screen axes and
 * height (z) shifts points up-left so lifted fingers read as lifted.
 */
export function project(p: number[]): Point2 {
  const [x = 0, y = 0, z = 0] = p;
  return { u: y + 0.35 * z, v: x + 0.2 * z };
}

/** Fixed-capacity time series; old points fall off the front. */
export class RollingTrace {
  private points: TracePoint[] = [];

  constructor(readonly capacity: number = 256) {
    if (capacity < 1) throw new RangeError("capacity must be at least 1");
  }

  push(t: number, value: number): void {
    this.points.push({ t, value });
    if (this.points.length > this.capacity) {
      this.points.splice(0, this.points.length - this.capacity);
    }
  }

  clear(): void {
    this.points = [];
  }

  snapshot(): TracePoint[] {
    return this.points.slice();
  }
}

/** Rolling mean stiffness and feedforward traces fed by accepted states. */
export class ProfileTraces {
  readonly ks = new RollingTrace();
  readonly v = new RollingTrace();

  observe(state: StateMessage): void {
    this.ks.push(state.t, mean(state.ks));
    this.v.push(state.t, mean(state.v));
  }

  clear(): void {
    this.ks.clear();
    this.v.clear();
  }
}

function mean(xs: number[]): number {
  if (xs.length === 0) return 0;
  let s = 0;
  for (const x of xs) s += x;
  return s / xs.length;
}

export function forcePerTip(state: StateMessage | null): ForceBar[] {
  const totals = new Map<string, number>(TIP_ORDER.map((tip) => [tip, 0]));
  if (state !== null) {
    for (const c of state.contacts) {
      totals.set(c.fingertip, (totals.get(c.fingertip) ?? 0) + c.force);
    }
  }
  return TIP_ORDER.map((tip) => ({ tip, force: totals.get(tip) ?? 0 }));
}

export function buildFrame(panel: Panel, traces: ProfileTraces): Frame {
  const state = panel.latest;
  const bars = forcePerTip(state);
  const segments: Segment[] = [];
  const markers: TipMarker[] = [];
  if (state !== null) {
    const wrist = project([0, 0, 0]);
    const force = new Map(bars.map((b) => [b.tip, b.force]));
    for (const tip of TIP_ORDER) {
      const pos = state.fingertips[tip];
      if (pos === undefined) continue;
      const at = project(pos);
      segments.push({ a: wrist, b: at, tip });
      markers.push({ tip, at, force: force.get(tip) ?? 0 });
    }
  }
  return {
    t: state ? state.t : 0,
    segments,
    markers,
    bars,
    ksTrace: traces.ks.snapshot(),
    vTrace: traces.v.snapshot(),
    maxContactForce: state ? state.aggregates.maxContactForce : 0,
    meanContactForce: state ? state.aggregates.meanContactForce : 0,
  };
}

/**
 * Drives drawing at the animation rate from the latest snapshot only.
 * The scheduler is injected so tests can step it deterministically.
 */
export class RenderLoop {
  frames = 0;
  private running = false;

  constructor(
    private readonly panel: Panel,
    private readonly traces: ProfileTraces,
    private readonly draw: (frame: Frame) => void,
    private readonly requestFrame: (cb: () => void) => void,
  ) {}

  start(): void {
    if (this.running) return;
    this.running = true;
    this.requestFrame(() => this.tick());
  }

  stop(): void {
    this.running = false;
  }

  private tick(): void {
    if (!this.running) return;
    this.draw(buildFrame(this.panel, this.traces));
    this.frames += 1;
    this.requestFrame(() => this.tick());
  }
}

/**
 * Canvas 2D rendering of the live scene and the metrics strip chart.
 *
 * Everything here is draw-only: it consumes the last accepted frame and
 * the view state and never touches the socket. All world->screen math
 * goes through ViewState so the camera stays the single source of truth.
 */

import type { AgentRow, Frame } from "./protocol.js";
import type { MetricsBuffer, ViewState } from "./view.js";

/** Base fill per behavior; the sensor bit brightens the agent. */
const TAG_COLORS: Record<string, { off: string; on: string }> = {
  milling: { off: "#3b6ea5", on: "#7fb3ff" },
  diffusing: { off: "#2f8f83", on: "#6fe3d2" },
  self_centering: { off: "#c77d2e", on: "#ffc163" },
};
export const AGENT_TAG_COLORS = TAG_COLORS;

const SELECTED_RING = "#ffffff";
const FOV_FILL = "rgba(140, 190, 255, 0.10)";
const FOV_EDGE = "rgba(140, 190, 255, 0.35)";
const TRAIL_COLOR = "180, 200, 230";
const CENTROID_COLOR = "#e6a4e0";
const PIVOT_COLOR = "#9ad0a0";
const ARENA_EDGE = "#5a5f6b";
const GRID_MINOR = "rgba(255,255,255,0.05)";
const GRID_MAJOR = "rgba(255,255,255,0.10)";

export interface ArenaInfo {
  kind: string;
  width: number;
  height: number;
}

export interface SceneOptions {
  /** Sensor range (m) and half field-of-view (rad), drawn to scale. */
  visionDistance: number;
  visionHalfangle: number;
  bodyRadius: number;
  arena: ArenaInfo;
  /** Commanded gains, for the (approximate) pivot overlay. */
  v: number;
  omega: number;
}

function agentColor(row: AgentRow): string {
  const colors = TAG_COLORS[row[5]] ?? TAG_COLORS.milling;
  return row[4] === 1 ? colors.on : colors.off;
}

/** World angle (CCW, y up) -> canvas arc angle (CW, y down). */
function screenAngle(worldAngle: number): number {
  return -worldAngle;
}

export function drawScene(
  ctx: CanvasRenderingContext2D,
  frame: Frame,
  view: ViewState,
  opts: SceneOptions,
): void {
  const w = ctx.canvas.width;
  const h = ctx.canvas.height;
  ctx.clearRect(0, 0, w, h);

  drawGrid(ctx, view, w, h);
  if (opts.arena.kind !== "unbounded") drawArena(ctx, view, opts.arena, w, h);

  if (view.overlays.trails) {
    for (const row of frame.agents) drawTrail(ctx, view, row, w, h);
  }
  if (view.overlays.fov) {
    for (const row of frame.agents) drawFov(ctx, view, row, opts, w, h);
  }
  if (view.overlays.pivots && opts.omega > 0) {
    for (const row of frame.agents) drawPivot(ctx, view, row, opts, w, h);
  }
  if (view.overlays.centroid && frame.agents.length > 0) {
    drawCentroid(ctx, view, frame.agents, w, h);
  }
  for (const row of frame.agents) drawAgent(ctx, view, row, opts, w, h);
}

function drawGrid(
  ctx: CanvasRenderingContext2D,
  view: ViewState,
  w: number,
  h: number,
): void {
  // 0.5 m minor lines, 1 m major lines, only at sane zoom levels.
  const step = view.camera.scale >= 30 ? 0.5 : 2.0;
  const [x0, y1] = view.screenToWorld(0, 0, w, h);
  const [x1, y0] = view.screenToWorld(w, h, w, h);
  if ((x1 - x0) / step > 400) return;
  ctx.lineWidth = 1;
  for (let gx = Math.floor(x0 / step) * step; gx <= x1; gx += step) {
    const [sx] = view.worldToScreen(gx, 0, w, h);
    ctx.strokeStyle = Math.abs(gx % 1) < 1e-9 ? GRID_MAJOR : GRID_MINOR;
    ctx.beginPath();
    ctx.moveTo(sx, 0);
    ctx.lineTo(sx, h);
    ctx.stroke();
  }
  for (let gy = Math.floor(y0 / step) * step; gy <= y1; gy += step) {
    const [, sy] = view.worldToScreen(0, gy, w, h);
    ctx.strokeStyle = Math.abs(gy % 1) < 1e-9 ? GRID_MAJOR : GRID_MINOR;
    ctx.beginPath();
    ctx.moveTo(0, sy);
    ctx.lineTo(w, sy);
    ctx.stroke();
  }
}

function drawArena(
  ctx: CanvasRenderingContext2D,
  view: ViewState,
  arena: ArenaInfo,
  w: number,
  h: number,
): void {
  const [sx0, sy0] = view.worldToScreen(-arena.width / 2, arena.height / 2, w, h);
  const [sx1, sy1] = view.worldToScreen(arena.width / 2, -arena.height / 2, w, h);
  ctx.strokeStyle = ARENA_EDGE;
  ctx.lineWidth = 2;
  ctx.setLineDash(arena.kind === "torus" ? [6, 6] : []);
  ctx.strokeRect(sx0, sy0, sx1 - sx0, sy1 - sy0);
  ctx.setLineDash([]);
}

function drawTrail(
  ctx: CanvasRenderingContext2D,
  view: ViewState,
  row: AgentRow,
  w: number,
  h: number,
): void {
  const trail = view.trailStore.get(row[0]);
  if (trail.length < 2) return;
  ctx.lineWidth = 1.5;
  for (let i = 1; i < trail.length; i++) {
    const alpha = 0.35 * (i / trail.length); // fade toward the tail
    const [ax, ay] = view.worldToScreen(trail[i - 1][0], trail[i - 1][1], w, h);
    const [bx, by] = view.worldToScreen(trail[i][0], trail[i][1], w, h);
    ctx.strokeStyle = `rgba(${TRAIL_COLOR}, ${alpha.toFixed(3)})`;
    ctx.beginPath();
    ctx.moveTo(ax, ay);
    ctx.lineTo(bx, by);
    ctx.stroke();
  }
}

function drawFov(
  ctx: CanvasRenderingContext2D,
  view: ViewState,
  row: AgentRow,
  opts: SceneOptions,
  w: number,
  h: number,
): void {
  const [, x, y, heading] = row;
  const [sx, sy] = view.worldToScreen(x, y, w, h);
  const r = opts.visionDistance * view.camera.scale;
  ctx.beginPath();
  ctx.moveTo(sx, sy);
  ctx.arc(
    sx,
    sy,
    r,
    screenAngle(heading + opts.visionHalfangle),
    screenAngle(heading - opts.visionHalfangle),
    false,
  );
  ctx.closePath();
  ctx.fillStyle = FOV_FILL;
  ctx.fill();
  ctx.strokeStyle = FOV_EDGE;
  ctx.lineWidth = 1;
  ctx.stroke();
}

function drawPivot(
  ctx: CanvasRenderingContext2D,
  view: ViewState,
  row: AgentRow,
  opts: SceneOptions,
  w: number,
  h: number,
): void {
  // Approximate: the point the agent would orbit turning left at the
  // shared commanded gains. Per-agent factors and the actual turn
  // direction live server-side; this overlay is a visual aid only.
  const [, x, y, heading] = row;
  const r = opts.v / opts.omega;
  const px = x - r * Math.sin(heading);
  const py = y + r * Math.cos(heading);
  const [sx, sy] = view.worldToScreen(px, py, w, h);
  ctx.strokeStyle = PIVOT_COLOR;
  ctx.lineWidth = 1;
  crossMark(ctx, sx, sy, 4);
}

function drawCentroid(
  ctx: CanvasRenderingContext2D,
  view: ViewState,
  agents: readonly AgentRow[],
  w: number,
  h: number,
): void {
  let cx = 0;
  let cy = 0;
  for (const a of agents) {
    cx += a[1];
    cy += a[2];
  }
  cx /= agents.length;
  cy /= agents.length;
  const [sx, sy] = view.worldToScreen(cx, cy, w, h);
  ctx.strokeStyle = CENTROID_COLOR;
  ctx.lineWidth = 1.5;
  crossMark(ctx, sx, sy, 7);
  ctx.beginPath();
  ctx.arc(sx, sy, 3.5, 0, 2 * Math.PI);
  ctx.stroke();
}

function crossMark(ctx: CanvasRenderingContext2D, sx: number, sy: number, r: number): void {
  ctx.beginPath();
  ctx.moveTo(sx - r, sy);
  ctx.lineTo(sx + r, sy);
  ctx.moveTo(sx, sy - r);
  ctx.lineTo(sx, sy + r);
  ctx.stroke();
}

function drawAgent(
  ctx: CanvasRenderingContext2D,
  view: ViewState,
  row: AgentRow,
  opts: SceneOptions,
  w: number,
  h: number,
): void {
  const [id, x, y, heading] = row;
  const [sx, sy] = view.worldToScreen(x, y, w, h);
  // Wedge sized by the physical body, but never smaller than a few px.
  const r = Math.max(opts.bodyRadius * view.camera.scale, 4);
  const a = screenAngle(heading);
  const back = 2.6; // rad offset of the two tail corners from the nose
  ctx.beginPath();
  ctx.moveTo(sx + r * 1.4 * Math.cos(a), sy + r * 1.4 * Math.sin(a));
  ctx.lineTo(sx + r * Math.cos(a + back), sy + r * Math.sin(a + back));
  ctx.lineTo(sx + 0.3 * r * Math.cos(a + Math.PI), sy + 0.3 * r * Math.sin(a + Math.PI));
  ctx.lineTo(sx + r * Math.cos(a - back), sy + r * Math.sin(a - back));
  ctx.closePath();
  ctx.fillStyle = agentColor(row);
  ctx.fill();
  if (row[4] === 1) {
    ctx.strokeStyle = "rgba(255,255,255,0.8)";
    ctx.lineWidth = 1;
    ctx.stroke();
  }
  if (view.selectedAgent === id) {
    ctx.beginPath();
    ctx.arc(sx, sy, r * 1.9, 0, 2 * Math.PI);
    ctx.strokeStyle = SELECTED_RING;
    ctx.lineWidth = 1.5;
    ctx.setLineDash([4, 3]);
    ctx.stroke();
    ctx.setLineDash([]);
  }
}

// -- metrics strip chart --------------------------------------------------------

const CIRC_COLOR = "#7fd18a";
const DIFF_COLOR = "#c39bd3";
const CIRC_MAX = 2.0; // display clamp
const DIFF_MAX = 5.0;

export function drawMetricsChart(
  ctx: CanvasRenderingContext2D,
  buffer: MetricsBuffer,
  millThreshold = 0.2,
  diffusionThreshold = 1.0,
): void {
  const w = ctx.canvas.width;
  const h = ctx.canvas.height;
  ctx.clearRect(0, 0, w, h);
  const points = buffer.all();
  if (points.length < 2) return;

  const yCirc = (v: number): number => h - (Math.min(v, CIRC_MAX) / CIRC_MAX) * h;
  const yDiff = (v: number): number => h - (Math.min(v, DIFF_MAX) / DIFF_MAX) * h;

  ctx.setLineDash([3, 4]);
  ctx.lineWidth = 1;
  ctx.strokeStyle = "rgba(127, 209, 138, 0.5)";
  hline(ctx, yCirc(millThreshold), w);
  ctx.strokeStyle = "rgba(195, 155, 211, 0.5)";
  hline(ctx, yDiff(diffusionThreshold), w);
  ctx.setLineDash([]);

  drawSeries(ctx, points.map((p) => p.circliness), yCirc, CIRC_COLOR, w);
  drawSeries(ctx, points.map((p) => p.diffusion), yDiff, DIFF_COLOR, w);
}

function hline(ctx: CanvasRenderingContext2D, y: number, w: number): void {
  ctx.beginPath();
  ctx.moveTo(0, y);
  ctx.lineTo(w, y);
  ctx.stroke();
}

function drawSeries(
  ctx: CanvasRenderingContext2D,
  values: ReadonlyArray<number | null>,
  yOf: (v: number) => number,
  color: string,
  w: number,
): void {
  ctx.strokeStyle = color;
  ctx.lineWidth = 1.5;
  ctx.beginPath();
  let started = false;
  for (let i = 0; i < values.length; i++) {
    const v = values[i];
    if (v === null || !Number.isFinite(v)) {
      started = false; // gap for non-finite samples
      continue;
    }
    const x = (i / (values.length - 1)) * w;
    if (started) ctx.lineTo(x, yOf(v));
    else {
      ctx.moveTo(x, yOf(v));
      started = true;
    }
  }
  ctx.stroke();
}

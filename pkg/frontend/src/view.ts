/**
 * Client-side view state: camera, selection, overlay toggles, and the
 * metrics chart buffer.
 *
 * None of this feeds back into the simulation. The view is a pure
 * function of the last accepted frame plus this state, so dropping,
 * panning or zooming can never change physics.
 */

export interface Camera {
  /** World coordinates of the canvas centre (m). */
  x: number;
  y: number;
  /** Pixels per metre. */
  scale: number;
}

export interface Overlays {
  fov: boolean;
  pivots: boolean;
  centroid: boolean;
  trails: boolean;
}

export interface MetricsPoint {
  tick: number;
  circliness: number | null;
  diffusion: number | null;
}

export const DEFAULT_SCALE = 120; // px per metre; comfortable for ~4 m scenes
export const MIN_SCALE = 2;
export const MAX_SCALE = 4000;

export class ViewState {
  camera: Camera = { x: 0, y: 0, scale: DEFAULT_SCALE };
  selectedAgent: number | null = null;
  overlays: Overlays = { fov: true, pivots: false, centroid: true, trails: true };
  readonly chart: MetricsBuffer;
  readonly trailStore: TrailStore;

  constructor(chartCapacity = 600, trailPoints = 240) {
    this.chart = new MetricsBuffer(chartCapacity);
    this.trailStore = new TrailStore(trailPoints);
  }

  /** World -> canvas pixels. Canvas y grows downward, world y upward. */
  worldToScreen(wx: number, wy: number, width: number, height: number): [number, number] {
    const sx = width / 2 + (wx - this.camera.x) * this.camera.scale;
    const sy = height / 2 - (wy - this.camera.y) * this.camera.scale;
    return [sx, sy];
  }

  /** Canvas pixels -> world. Inverse of worldToScreen. */
  screenToWorld(sx: number, sy: number, width: number, height: number): [number, number] {
    const wx = this.camera.x + (sx - width / 2) / this.camera.scale;
    const wy = this.camera.y - (sy - height / 2) / this.camera.scale;
    return [wx, wy];
  }

  /** Pan by a pixel delta (e.g. mouse drag). */
  panByPixels(dx: number, dy: number): void {
    this.camera.x -= dx / this.camera.scale;
    this.camera.y += dy / this.camera.scale;
  }

  /**
   * Zoom by `factor`, keeping the world point under the given canvas
   * pixel fixed (scroll-wheel anchor behaviour).
   */
  zoomAt(sx: number, sy: number, factor: number, width: number, height: number): void {
    const [ax, ay] = this.screenToWorld(sx, sy, width, height);
    const next = Math.min(MAX_SCALE, Math.max(MIN_SCALE, this.camera.scale * factor));
    this.camera.scale = next;
    const [bx, by] = this.screenToWorld(sx, sy, width, height);
    this.camera.x += ax - bx;
    this.camera.y += ay - by;
  }

  /** Centre and scale the camera so all points fit with a pixel margin. */
  fitToPoints(
    points: Array<[number, number]>,
    width: number,
    height: number,
    marginPx = 40,
  ): void {
    if (points.length === 0) return;
    let xmin = Infinity;
    let xmax = -Infinity;
    let ymin = Infinity;
    let ymax = -Infinity;
    for (const [x, y] of points) {
      xmin = Math.min(xmin, x);
      xmax = Math.max(xmax, x);
      ymin = Math.min(ymin, y);
      ymax = Math.max(ymax, y);
    }
    this.camera.x = (xmin + xmax) / 2;
    this.camera.y = (ymin + ymax) / 2;
    const spanX = Math.max(xmax - xmin, 1e-6);
    const spanY = Math.max(ymax - ymin, 1e-6);
    const fit = Math.min(
      (width - 2 * marginPx) / spanX,
      (height - 2 * marginPx) / spanY,
    );
    this.camera.scale = Math.min(MAX_SCALE, Math.max(MIN_SCALE, fit));
  }
}

/**
 * Pick the agent nearest to a world point, within `maxDist` metres.
 * Returns the agent id, or null when nothing is close enough.
 */
export function pickAgent(
  agents: Array<[number, number, number, ...unknown[]]>,
  wx: number,
  wy: number,
  maxDist: number,
): number | null {
  let best: number | null = null;
  let bestD2 = maxDist * maxDist;
  for (const row of agents) {
    const dx = row[1] - wx;
    const dy = row[2] - wy;
    const d2 = dx * dx + dy * dy;
    if (d2 <= bestD2) {
      bestD2 = d2;
      best = row[0];
    }
  }
  return best;
}

/** Rolling per-agent position history for the fading trail overlay. */
export class TrailStore {
  private trails = new Map<number, Array<[number, number]>>();

  constructor(readonly maxPoints = 240) {}

  /** Append one frame's positions; rows are wire agent rows [id, x, y, ...]. */
  push(agents: ReadonlyArray<readonly [number, number, number, ...unknown[]]>): void {
    const seen = new Set<number>();
    for (const a of agents) {
      seen.add(a[0]);
      let t = this.trails.get(a[0]);
      if (t === undefined) {
        t = [];
        this.trails.set(a[0], t);
      }
      t.push([a[1], a[2]]);
      if (t.length > this.maxPoints) t.splice(0, t.length - this.maxPoints);
    }
    for (const id of this.trails.keys()) {
      if (!seen.has(id)) this.trails.delete(id); // agent count shrank
    }
  }

  get(id: number): ReadonlyArray<readonly [number, number]> {
    return this.trails.get(id) ?? [];
  }

  clear(): void {
    this.trails.clear();
  }
}

/** Fixed-capacity append-only buffer backing the metrics strip chart. */
export class MetricsBuffer {
  private points: MetricsPoint[] = [];

  constructor(readonly capacity: number) {
    if (!(capacity >= 1)) throw new Error("chart capacity must be >= 1");
  }

  push(p: MetricsPoint): void {
    this.points.push(p);
    if (this.points.length > this.capacity) {
      this.points.splice(0, this.points.length - this.capacity);
    }
  }

  clear(): void {
    this.points = [];
  }

  get length(): number {
    return this.points.length;
  }

  /** Snapshot of buffered points, oldest first. */
  all(): readonly MetricsPoint[] {
    return this.points;
  }
}

import { describe, expect, it } from "vitest";

import {
  MAX_SCALE,
  MIN_SCALE,
  MetricsBuffer,
  TrailStore,
  ViewState,
  pickAgent,
} from "../src/view.js";

const W = 800;
const H = 600;

describe("camera transforms", () => {
  it("puts the camera target at the canvas centre", () => {
    const view = new ViewState();
    view.camera = { x: 1.5, y: -2.0, scale: 100 };
    expect(view.worldToScreen(1.5, -2.0, W, H)).toEqual([W / 2, H / 2]);
  });

  it("flips the y axis (world up = screen up = smaller pixel y)", () => {
    const view = new ViewState();
    view.camera = { x: 0, y: 0, scale: 100 };
    const [, syUp] = view.worldToScreen(0, 1, W, H);
    const [, syDown] = view.worldToScreen(0, -1, W, H);
    expect(syUp).toBeLessThan(H / 2);
    expect(syDown).toBeGreaterThan(H / 2);
  });

  it("screenToWorld inverts worldToScreen", () => {
    const view = new ViewState();
    view.camera = { x: 0.3, y: 0.7, scale: 140 };
    for (const [wx, wy] of [
      [0, 0],
      [1.25, -0.75],
      [-3.1, 2.2],
    ]) {
      const [sx, sy] = view.worldToScreen(wx, wy, W, H);
      const [bx, by] = view.screenToWorld(sx, sy, W, H);
      expect(bx).toBeCloseTo(wx, 9);
      expect(by).toBeCloseTo(wy, 9);
    }
  });

  it("panByPixels moves content with the drag", () => {
    const view = new ViewState();
    view.camera = { x: 0, y: 0, scale: 100 };
    const before = view.worldToScreen(0.5, 0.5, W, H);
    view.panByPixels(30, -12);
    const after = view.worldToScreen(0.5, 0.5, W, H);
    expect(after[0] - before[0]).toBeCloseTo(30, 9);
    expect(after[1] - before[1]).toBeCloseTo(-12, 9);
  });

  it("zoomAt keeps the anchor point fixed on screen", () => {
    const view = new ViewState();
    view.camera = { x: 0.2, y: -0.4, scale: 90 };
    const anchor: [number, number] = [123, 456];
    const beforeWorld = view.screenToWorld(anchor[0], anchor[1], W, H);
    view.zoomAt(anchor[0], anchor[1], 1.8, W, H);
    const afterWorld = view.screenToWorld(anchor[0], anchor[1], W, H);
    expect(afterWorld[0]).toBeCloseTo(beforeWorld[0], 9);
    expect(afterWorld[1]).toBeCloseTo(beforeWorld[1], 9);
    expect(view.camera.scale).toBeCloseTo(90 * 1.8, 9);
  });

  it("clamps zoom to sane bounds", () => {
    const view = new ViewState();
    view.zoomAt(0, 0, 1e-9, W, H);
    expect(view.camera.scale).toBe(MIN_SCALE);
    view.zoomAt(0, 0, 1e9, W, H);
    expect(view.camera.scale).toBe(MAX_SCALE);
  });

  it("fitToPoints frames all points inside the margin", () => {
    const view = new ViewState();
    const pts: Array<[number, number]> = [
      [-1, -1],
      [3, 0.5],
      [0, 2],
    ];
    view.fitToPoints(pts, W, H, 40);
    for (const [wx, wy] of pts) {
      const [sx, sy] = view.worldToScreen(wx, wy, W, H);
      expect(sx).toBeGreaterThanOrEqual(40 - 1e-6);
      expect(sx).toBeLessThanOrEqual(W - 40 + 1e-6);
      expect(sy).toBeGreaterThanOrEqual(40 - 1e-6);
      expect(sy).toBeLessThanOrEqual(H - 40 + 1e-6);
    }
  });
});

describe("pickAgent", () => {
  const agents: Array<[number, number, number]> = [
    [0, 0.0, 0.0],
    [1, 1.0, 0.0],
    [2, 0.0, 2.0],
  ];

  it("selects the nearest agent within range", () => {
    expect(pickAgent(agents, 0.9, 0.1, 0.5)).toBe(1);
    expect(pickAgent(agents, 0.05, 1.9, 0.5)).toBe(2);
  });

  it("returns null when every agent is too far", () => {
    expect(pickAgent(agents, 10, 10, 0.5)).toBeNull();
    expect(pickAgent([], 0, 0, 0.5)).toBeNull();
  });
});

describe("TrailStore", () => {
  it("accumulates per-agent positions up to maxPoints", () => {
    const store = new TrailStore(3);
    for (let t = 0; t < 5; t++) {
      store.push([
        [0, t, 0],
        [1, 0, t],
      ]);
    }
    expect(store.get(0).map((p) => p[0])).toEqual([2, 3, 4]);
    expect(store.get(1).map((p) => p[1])).toEqual([2, 3, 4]);
  });

  it("drops trails for agents that disappear and clears on demand", () => {
    const store = new TrailStore(10);
    store.push([
      [0, 1, 1],
      [1, 2, 2],
    ]);
    store.push([[0, 1.1, 1.1]]);
    expect(store.get(1)).toHaveLength(0);
    store.clear();
    expect(store.get(0)).toHaveLength(0);
  });
});

describe("MetricsBuffer", () => {
  it("keeps at most `capacity` points, dropping the oldest", () => {
    const buf = new MetricsBuffer(3);
    for (let t = 0; t < 5; t++) {
      buf.push({ tick: t, circliness: t / 10, diffusion: null });
    }
    expect(buf.length).toBe(3);
    expect(buf.all().map((p) => p.tick)).toEqual([2, 3, 4]);
  });

  it("clears", () => {
    const buf = new MetricsBuffer(4);
    buf.push({ tick: 0, circliness: 1, diffusion: 1 });
    buf.clear();
    expect(buf.length).toBe(0);
  });

  it("rejects a nonsense capacity", () => {
    expect(() => new MetricsBuffer(0)).toThrow();
  });
});

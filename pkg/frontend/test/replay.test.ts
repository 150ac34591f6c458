import { describe, expect, it } from "vitest";

import type { Frame } from "../src/protocol.js";
import {
  ActionHistory,
  buildReplayScript,
  compareFrameLogs,
  compareFramesByTick,
  describeCommand,
  frameFingerprint,
  stableStringify,
} from "../src/replay.js";

function frame(epoch: number, tick: number, x0 = 1.0): Frame {
  return {
    v: 1,
    type: "frame",
    epoch,
    tick,
    sim_time: tick * 0.022,
    running: false,
    agents: [
      [0, x0, -0.5, 1.5707963, 1, "milling"],
      [1, 0.25, 0.3, 0.0, 0, "milling"],
    ],
    metrics: { circliness: 0.4, diffusion: 1.1, n_components: 1 },
    collisions_total: 0,
  };
}

describe("stableStringify", () => {
  it("is insensitive to object key order", () => {
    expect(stableStringify({ b: 1, a: [2, { d: 3, c: 4 }] })).toBe(
      stableStringify({ a: [2, { c: 4, d: 3 }], b: 1 }),
    );
  });

  it("preserves array order", () => {
    expect(stableStringify([1, 2])).not.toBe(stableStringify([2, 1]));
  });
});

describe("frameFingerprint", () => {
  it("ignores the epoch counter", () => {
    expect(frameFingerprint(frame(0, 10))).toBe(frameFingerprint(frame(7, 10)));
  });

  it("is sensitive to state", () => {
    expect(frameFingerprint(frame(0, 10, 1.0))).not.toBe(
      frameFingerprint(frame(0, 10, 1.0000000001)),
    );
    expect(frameFingerprint(frame(0, 10))).not.toBe(frameFingerprint(frame(0, 11)));
  });

  it("can additionally ignore pacing fields like running", () => {
    const a = { ...frame(0, 10), running: true };
    const b = frame(1, 10);
    expect(frameFingerprint(a, ["running"])).toBe(frameFingerprint(b, ["running"]));
    expect(frameFingerprint(a)).not.toBe(frameFingerprint(b));
  });
});

describe("compareFrameLogs", () => {
  const original = [frame(0, 0), frame(0, 30), frame(0, 60)];

  it("calls replays identical when only the epoch differs", () => {
    const replayed = [frame(1, 0), frame(1, 30), frame(1, 60)];
    const result = compareFrameLogs(original, replayed);
    expect(result.identical).toBe(true);
    expect(result.framesCompared).toBe(3);
    expect(result.divergence).toBeNull();
  });

  it("pinpoints the first diverging frame", () => {
    const replayed = [frame(1, 0), frame(1, 30, 1.0 + 1e-9), frame(1, 60)];
    const result = compareFrameLogs(original, replayed);
    expect(result.identical).toBe(false);
    expect(result.divergence).toEqual({ index: 1, tickA: 30, tickB: 30 });
  });

  it("flags a length mismatch at the tail", () => {
    const replayed = [frame(1, 0), frame(1, 30)];
    const result = compareFrameLogs(original, replayed);
    expect(result.identical).toBe(false);
    expect(result.divergence).toEqual({ index: 2, tickA: 60, tickB: null });
  });
});

describe("compareFramesByTick", () => {
  it("matches logs with different strides on their common ticks", () => {
    // Original broadcast every 10 ticks, replay every 30: common ticks
    // are 0, 30, 60.
    const a = [0, 10, 20, 30, 40, 50, 60].map((t) => frame(0, t));
    const b = [0, 30, 60].map((t) => frame(1, t));
    const result = compareFramesByTick(a, b);
    expect(result.identical).toBe(true);
    expect(result.compared).toBe(3);
    expect(result.onlyA).toBe(4);
    expect(result.onlyB).toBe(0);
  });

  it("reports the first diverging common tick", () => {
    const a = [frame(0, 0), frame(0, 30)];
    const b = [frame(1, 0), frame(1, 30, 2.5)];
    const result = compareFramesByTick(a, b);
    expect(result.identical).toBe(false);
    expect(result.divergence?.tickA).toBe(30);
  });
});

describe("ActionHistory", () => {
  it("records and marks rejections", () => {
    const hist = new ActionHistory();
    hist.record({ seq: 1, command: { type: "pause" }, epoch: 0, tick: 5, wallMs: 0 });
    hist.record({
      seq: 2,
      command: { type: "set_param", name: "v", value: -1 },
      epoch: 0,
      tick: 5,
      wallMs: 1,
    });
    hist.markRejected(2);
    expect(hist.length).toBe(2);
    expect(hist.all()[1].rejected).toBe(true);
    hist.clear();
    expect(hist.length).toBe(0);
  });
});

describe("buildReplayScript", () => {
  it("re-applies state-changing commands at their original ticks", () => {
    const hist = new ActionHistory();
    hist.record({ seq: 1, command: { type: "pause" }, epoch: 0, tick: 0, wallMs: 0 });
    hist.record({
      seq: 2,
      command: {
        type: "assign_controller",
        agent_id: 3,
        controller: { tag: "self_centering", v_m_s: 0.25, omega_rad_s: 0.785 },
      },
      epoch: 0,
      tick: 40,
      wallMs: 2,
    });
    hist.record({
      seq: 3,
      command: { type: "set_param", name: "omega", value: 1.047 },
      epoch: 0,
      tick: 40,
      wallMs: 3,
    });
    hist.record({ seq: 4, command: { type: "snapshot" }, epoch: 0, tick: 80, wallMs: 4 });

    const script = buildReplayScript(hist.all(), 100);
    expect(script).toEqual([
      {
        advanceTicks: 40,
        command: {
          type: "assign_controller",
          agent_id: 3,
          controller: { tag: "self_centering", v_m_s: 0.25, omega_rad_s: 0.785 },
        },
      },
      { advanceTicks: 0, command: { type: "set_param", name: "omega", value: 1.047 } },
      { advanceTicks: 60, command: null },
    ]);
  });

  it("skips rejected commands", () => {
    const hist = new ActionHistory();
    hist.record({
      seq: 1,
      command: { type: "set_param", name: "v", value: -1 },
      epoch: 0,
      tick: 10,
      wallMs: 0,
      rejected: true,
    });
    expect(buildReplayScript(hist.all(), 10)).toEqual([
      { advanceTicks: 10, command: null },
    ]);
  });

  it("produces an empty script for an empty history at tick 0", () => {
    expect(buildReplayScript([], 0)).toEqual([]);
  });

  it("rejects a final tick earlier than the last command", () => {
    const hist = new ActionHistory();
    hist.record({
      seq: 1,
      command: { type: "set_param", name: "v", value: 0.3 },
      epoch: 0,
      tick: 50,
      wallMs: 0,
    });
    expect(() => buildReplayScript(hist.all(), 10)).toThrow(/finalTick/);
  });
});

describe("describeCommand", () => {
  it("labels commands for the history panel", () => {
    expect(describeCommand({ type: "step", k: 5 })).toBe("step k=5");
    expect(describeCommand({ type: "reset", seed: 7 })).toBe("reset seed=7");
    expect(describeCommand({ type: "set_param", name: "omega", value: 1.0471975 })).toBe(
      "set omega=1.047",
    );
    expect(
      describeCommand({
        type: "assign_controller",
        agent_id: 2,
        controller: { tag: "diffusing", v_m_s: 0.3, omega_rad_s: 2.6 },
      }),
    ).toBe("agent 2 -> diffusing");
  });
});

import { describe, expect, it } from "vitest";

import {
  Ack,
  ErrorMsg,
  Frame,
  FrameGate,
  Hello,
  ProtocolError,
  SeqAllocator,
  SnapshotMsg,
  cmdAssignController,
  cmdLoadConfig,
  cmdPause,
  cmdReset,
  cmdResume,
  cmdSetParam,
  cmdSetSpeed,
  cmdSnapshot,
  cmdStep,
  encodeCommand,
  parseServerMessage,
} from "../src/protocol.js";

function frameJson(over: Record<string, unknown> = {}): string {
  return JSON.stringify({
    v: 1,
    type: "frame",
    epoch: 0,
    tick: 30,
    sim_time: 0.66,
    running: true,
    agents: [
      [0, 1.0, -0.5, 1.57, 1, "milling"],
      [1, 0.2, 0.3, 0.0, 0, "self_centering"],
    ],
    metrics: { circliness: 0.53, diffusion: 1.2, n_components: 1 },
    collisions_total: 0,
    ...over,
  });
}

describe("parseServerMessage", () => {
  it("parses a frame", () => {
    const m = parseServerMessage(frameJson()) as Frame;
    expect(m.type).toBe("frame");
    expect(m.tick).toBe(30);
    expect(m.agents).toHaveLength(2);
    expect(m.agents[0][5]).toBe("milling");
    expect(m.metrics.circliness).toBeCloseTo(0.53);
  });

  it("parses a hello with its embedded frame", () => {
    const m = parseServerMessage(
      JSON.stringify({
        v: 1,
        type: "hello",
        epoch: 0,
        tick: 0,
        dt: 0.022,
        config: { n_agents: 6 },
        frame: JSON.parse(frameJson({ tick: 0, sim_time: 0 })),
      }),
    ) as Hello;
    expect(m.type).toBe("hello");
    expect(m.dt).toBeCloseTo(0.022);
    expect(m.frame.agents).toHaveLength(2);
  });

  it("parses acks, snapshots and errors", () => {
    const ack = parseServerMessage(
      JSON.stringify({ v: 1, type: "ack", cmd: "pause", epoch: 0, applied_at_tick: 5, seq: 3 }),
    ) as Ack;
    expect(ack.cmd).toBe("pause");
    expect(ack.seq).toBe(3);

    const snap = parseServerMessage(
      JSON.stringify({ v: 1, type: "snapshot", cmd: "snapshot", epoch: 0, applied_at_tick: 5, data: { tick: 5 } }),
    ) as SnapshotMsg;
    expect(snap.data.tick).toBe(5);

    const err = parseServerMessage(
      JSON.stringify({ v: 1, type: "error", reason: "unknown command", seq: 9, echo: "{nope" }),
    ) as ErrorMsg;
    expect(err.reason).toContain("unknown");
    expect(err.seq).toBe(9);
  });

  it.each([
    ["not JSON at all", "{nope"],
    ["a bare array", "[1,2,3]"],
    ["a wrong schema version", JSON.stringify({ v: 2, type: "frame" })],
    ["an unknown type", JSON.stringify({ v: 1, type: "telemetry" })],
    ["a short agent row", frameJson({ agents: [[0, 1, 2, 3, 1]] })],
    ["a bad sensor bit", frameJson({ agents: [[0, 1, 2, 3, 2, "milling"]] })],
    ["an unknown behavior tag", frameJson({ agents: [[0, 1, 2, 3, 1, "hovering"]] })],
    ["a missing tick", frameJson({ tick: undefined })],
    ["a string running flag", frameJson({ running: "yes" })],
  ])("rejects %s", (_name, text) => {
    expect(() => parseServerMessage(text)).toThrow(ProtocolError);
  });
});

describe("FrameGate", () => {
  it("accepts strictly advancing ticks and discards stale or duplicate ones", () => {
    const gate = new FrameGate();
    expect(gate.accepts({ epoch: 0, tick: 0 })).toBe(true);
    expect(gate.accepts({ epoch: 0, tick: 0 })).toBe(false); // duplicate
    expect(gate.accepts({ epoch: 0, tick: 5 })).toBe(true);
    expect(gate.accepts({ epoch: 0, tick: 3 })).toBe(false); // out of order
    expect(gate.accepts({ epoch: 0, tick: 6 })).toBe(true);
  });

  it("treats an epoch bump as an advance even though the tick restarts", () => {
    const gate = new FrameGate();
    expect(gate.accepts({ epoch: 0, tick: 500 })).toBe(true);
    expect(gate.accepts({ epoch: 1, tick: 0 })).toBe(true); // reset lands here
    expect(gate.accepts({ epoch: 0, tick: 501 })).toBe(false); // late frame from old epoch
    expect(gate.accepts({ epoch: 1, tick: 1 })).toBe(true);
  });

  it("starts fresh after reset()", () => {
    const gate = new FrameGate();
    expect(gate.accepts({ epoch: 3, tick: 99 })).toBe(true);
    gate.reset();
    expect(gate.accepts({ epoch: 0, tick: 0 })).toBe(true);
  });
});

describe("command builders", () => {
  it("builds the exact wire shapes", () => {
    expect(cmdPause()).toEqual({ type: "pause" });
    expect(cmdResume()).toEqual({ type: "resume" });
    expect(cmdStep(3)).toEqual({ type: "step", k: 3 });
    expect(cmdStep()).toEqual({ type: "step", k: 1 });
    expect(cmdReset()).toEqual({ type: "reset" });
    expect(cmdReset(42)).toEqual({ type: "reset", seed: 42 });
    expect(cmdSetSpeed(4)).toEqual({ type: "set_speed", multiplier: 4 });
    expect(cmdSetParam("omega", 1.047)).toEqual({
      type: "set_param",
      name: "omega",
      value: 1.047,
    });
    expect(cmdLoadConfig({ n_agents: 4 })).toEqual({
      type: "load_config",
      config: { n_agents: 4 },
    });
    expect(cmdSnapshot()).toEqual({ type: "snapshot" });
  });

  it("builds assign_controller with an SI controller spec", () => {
    expect(
      cmdAssignController(3, { tag: "self_centering", v_m_s: 0.25, omega_rad_s: 0.785 }),
    ).toEqual({
      type: "assign_controller",
      agent_id: 3,
      controller: { tag: "self_centering", v_m_s: 0.25, omega_rad_s: 0.785 },
    });
  });

  it("stamps sequence numbers on the encoded command", () => {
    const seqs = new SeqAllocator();
    const a = seqs.take();
    const b = seqs.take();
    expect(b).toBe(a + 1);
    const wire = JSON.parse(encodeCommand(cmdStep(2), b));
    expect(wire).toEqual({ type: "step", k: 2, seq: b });
  });
});

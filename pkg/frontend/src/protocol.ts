/**
 * Wire protocol for the live session socket.
 *
 * Server messages (schema v1):
 *   {"v": 1, "type": "hello", "epoch": E, "tick": T, "dt": dt,
 *    "config": {...}, "frame": {...}}
 *   {"v": 1, "type": "frame", "epoch": E, "tick": T, "sim_time": s,
 *    "running": bool, "agents": [[id,x,y,heading,sensor,tag],...],
 *    "metrics": {...}, "collisions_total": n}
 *   {"v": 1, "type": "ack", "seq"?, "cmd": name, "epoch": E,
 *    "applied_at_tick": T, ...}
 *   {"v": 1, "type": "snapshot", "seq"?, "data": {...}, ...}
 *   {"v": 1, "type": "error", "seq"?, "reason": str, "echo": ...}
 *
 * Commands are built by the cmd* helpers below so the exact field names
 * live in one place. All values SI (m, s, rad); callers convert at the
 * UI boundary only.
 */

export const SCHEMA_VERSION = 1;

export type BehaviorTag = "milling" | "diffusing" | "self_centering";

export const BEHAVIOR_TAGS: readonly BehaviorTag[] = [
  "milling",
  "diffusing",
  "self_centering",
];

/** One agent row as sent on the wire: [id, x, y, heading, sensor, tag]. */
export type AgentRow = [number, number, number, number, number, BehaviorTag];

export interface FrameMetrics {
  circliness: number | null;
  diffusion: number | null;
  n_components: number;
}

export interface Frame {
  v: number;
  type: "frame";
  epoch: number;
  tick: number;
  sim_time: number;
  running: boolean;
  agents: AgentRow[];
  metrics: FrameMetrics;
  collisions_total: number;
}

export interface Hello {
  v: number;
  type: "hello";
  epoch: number;
  tick: number;
  dt: number;
  config: Record<string, unknown>;
  frame: Frame;
}

export interface Ack {
  v: number;
  type: "ack";
  cmd: string;
  epoch: number;
  applied_at_tick: number;
  seq?: number;
  [extra: string]: unknown;
}

export interface SnapshotMsg {
  v: number;
  type: "snapshot";
  data: Record<string, unknown>;
  seq?: number;
  [extra: string]: unknown;
}

export interface ErrorMsg {
  v: number;
  type: "error";
  reason: string;
  seq?: number;
  echo?: unknown;
}

export type ServerMessage = Hello | Frame | Ack | SnapshotMsg | ErrorMsg;

export class ProtocolError extends Error {}

function isRecord(x: unknown): x is Record<string, unknown> {
  return typeof x === "object" && x !== null && !Array.isArray(x);
}

function need(cond: boolean, what: string): asserts cond {
  if (!cond) throw new ProtocolError(`malformed server message: ${what}`);
}

function checkAgents(rows: unknown): AgentRow[] {
  need(Array.isArray(rows), "agents must be an array");
  for (const row of rows) {
    need(Array.isArray(row) && row.length === 6, "agent row must have 6 fields");
    const [id, x, y, heading, sensor, tag] = row as unknown[];
    need(typeof id === "number", "agent id");
    need(typeof x === "number" && typeof y === "number", "agent position");
    need(typeof heading === "number", "agent heading");
    need(sensor === 0 || sensor === 1, "agent sensor bit");
    need(
      typeof tag === "string" && (BEHAVIOR_TAGS as readonly string[]).includes(tag),
      `agent tag ${String(tag)}`,
    );
  }
  return rows as AgentRow[];
}

function checkFrame(m: Record<string, unknown>): Frame {
  need(typeof m.epoch === "number", "frame epoch");
  need(typeof m.tick === "number", "frame tick");
  need(typeof m.sim_time === "number", "frame sim_time");
  need(typeof m.running === "boolean", "frame running flag");
  checkAgents(m.agents);
  need(isRecord(m.metrics), "frame metrics");
  need(typeof m.collisions_total === "number", "frame collisions_total");
  return m as unknown as Frame;
}

/**
 * Parse and validate one server message. Throws ProtocolError on
 * anything that is not a well-formed v1 message.
 */
export function parseServerMessage(text: string): ServerMessage {
  let raw: unknown;
  try {
    raw = JSON.parse(text);
  } catch {
    throw new ProtocolError("not JSON");
  }
  need(isRecord(raw), "not an object");
  need(raw.v === SCHEMA_VERSION, `unsupported schema version ${String(raw.v)}`);
  switch (raw.type) {
    case "hello": {
      need(typeof raw.epoch === "number", "hello epoch");
      need(typeof raw.tick === "number", "hello tick");
      need(typeof raw.dt === "number" && raw.dt > 0, "hello dt");
      need(isRecord(raw.config), "hello config");
      need(isRecord(raw.frame), "hello frame");
      checkFrame(raw.frame);
      return raw as unknown as Hello;
    }
    case "frame":
      return checkFrame(raw);
    case "ack": {
      need(typeof raw.cmd === "string", "ack cmd");
      need(typeof raw.epoch === "number", "ack epoch");
      need(typeof raw.applied_at_tick === "number", "ack applied_at_tick");
      return raw as unknown as Ack;
    }
    case "snapshot": {
      need(isRecord(raw.data), "snapshot data");
      return raw as unknown as SnapshotMsg;
    }
    case "error": {
      need(typeof raw.reason === "string", "error reason");
      return raw as unknown as ErrorMsg;
    }
    default:
      throw new ProtocolError(`unknown message type ${String(raw.type)}`);
  }
}

/**
 * Ordering guard for incoming frames.
 *
 * The renderer must only ever move forward: a frame is stale if its
 * (epoch, tick) pair does not advance past the last accepted one. Epoch
 * bumps (reset / load_config) restart the tick clock, so a higher epoch
 * is always an advance even though its tick is lower.
 */
export class FrameGate {
  private lastEpoch = -1;
  private lastTick = -1;

  accepts(frame: { epoch: number; tick: number }): boolean {
    if (frame.epoch < this.lastEpoch) return false;
    if (frame.epoch === this.lastEpoch && frame.tick <= this.lastTick) return false;
    this.lastEpoch = frame.epoch;
    this.lastTick = frame.tick;
    return true;
  }

  reset(): void {
    this.lastEpoch = -1;
    this.lastTick = -1;
  }
}

// -- command builders ---------------------------------------------------------

export interface ControllerModeSpec {
  tag: BehaviorTag;
  v_m_s: number;
  omega_rad_s: number;
}

export type Command = Record<string, unknown> & { type: string };

export function cmdPause(): Command {
  return { type: "pause" };
}

export function cmdResume(): Command {
  return { type: "resume" };
}

export function cmdStep(k = 1): Command {
  return { type: "step", k };
}

export function cmdReset(seed?: number): Command {
  return seed === undefined ? { type: "reset" } : { type: "reset", seed };
}

export function cmdSetSpeed(multiplier: number): Command {
  return { type: "set_speed", multiplier };
}

/** name is one of the shared wire params: "v", "omega", "vision_distance", "vision_halfangle". */
export function cmdSetParam(name: string, value: number): Command {
  return { type: "set_param", name, value };
}

export function cmdAssignController(
  agentId: number,
  controller: ControllerModeSpec,
): Command {
  return { type: "assign_controller", agent_id: agentId, controller };
}

export function cmdLoadConfig(config: Record<string, unknown>): Command {
  return { type: "load_config", config };
}

export function cmdSnapshot(): Command {
  return { type: "snapshot" };
}

/** Monotonic sequence numbers so acks can be matched to commands. */
export class SeqAllocator {
  private next = 1;

  take(): number {
    return this.next++;
  }
}

/** Stamp a command with a sequence number and serialize it for the socket. */
export function encodeCommand(cmd: Command, seq: number): string {
  return JSON.stringify({ ...cmd, seq });
}

/**
 * Action history and deterministic replay support.
 *
 * Every command the user issues is recorded together with the session
 * tick it was applied at. Because the engine is deterministic, resetting
 * the session and re-issuing the same commands at the same ticks must
 * reproduce the exact same frames; the comparator here checks that,
 * ignoring only the epoch counter (reset bumps it by design).
 */

import type { Command, Frame } from "./protocol.js";

export interface ActionEntry {
  seq: number;
  command: Command;
  /** Epoch/tick the server reported applying the command at. */
  epoch: number;
  tick: number;
  wallMs: number;
  /** True when the command was rejected; rejected commands do not replay. */
  rejected?: boolean;
}

export class ActionHistory {
  private entries: ActionEntry[] = [];

  record(entry: ActionEntry): void {
    this.entries.push(entry);
  }

  markRejected(seq: number): void {
    const e = this.entries.find((x) => x.seq === seq);
    if (e) e.rejected = true;
  }

  clear(): void {
    this.entries = [];
  }

  all(): readonly ActionEntry[] {
    return this.entries;
  }

  get length(): number {
    return this.entries.length;
  }
}

/** One replay step: advance this many ticks, then send the command (if any). */
export interface ReplayStep {
  advanceTicks: number;
  command: Command | null;
}

/**
 * Turn a recorded history into a replay script against a freshly reset
 * session (tick 0, same seed).
 *
 * Commands that only read state or that drive the replay itself
 * (snapshot, pause/resume/step/set_speed, reset) are pacing, not
 * physics; they are skipped. What remains is re-applied at the exact
 * tick it originally landed on, with `finalTick` padding the tail so
 * the replay covers the same tick range as the recording.
 */
export function buildReplayScript(
  history: readonly ActionEntry[],
  finalTick: number,
): ReplayStep[] {
  const PACING = new Set(["pause", "resume", "step", "set_speed", "reset", "snapshot"]);
  const script: ReplayStep[] = [];
  let at = 0;
  for (const e of history) {
    if (e.rejected || PACING.has(e.command.type)) continue;
    if (e.tick < at) {
      throw new Error(
        `history is not replayable: command at tick ${e.tick} after tick ${at}`,
      );
    }
    script.push({ advanceTicks: e.tick - at, command: { ...e.command } });
    at = e.tick;
  }
  if (finalTick < at) {
    throw new Error(`finalTick ${finalTick} precedes last command tick ${at}`);
  }
  if (finalTick > at) {
    script.push({ advanceTicks: finalTick - at, command: null });
  }
  return script;
}

// -- frame comparison ---------------------------------------------------------

/** JSON stringify with recursively sorted object keys, for stable comparison. */
export function stableStringify(x: unknown): string {
  if (x === null || typeof x !== "object") return JSON.stringify(x);
  if (Array.isArray(x)) return "[" + x.map(stableStringify).join(",") + "]";
  const obj = x as Record<string, unknown>;
  const keys = Object.keys(obj).sort();
  return (
    "{" +
    keys.map((k) => JSON.stringify(k) + ":" + stableStringify(obj[k])).join(",") +
    "}"
  );
}

/**
 * Canonical fingerprint of a frame with the listed fields removed.
 * Epoch is always stripped: a replay necessarily runs in a later epoch.
 */
export function frameFingerprint(
  frame: Frame,
  ignore: readonly string[] = [],
): string {
  const copy: Record<string, unknown> = { ...frame };
  delete copy.epoch;
  for (const field of ignore) delete copy[field];
  return stableStringify(copy);
}

export interface Divergence {
  index: number;
  tickA: number | null;
  tickB: number | null;
}

export interface ComparisonResult {
  identical: boolean;
  framesCompared: number;
  divergence: Divergence | null;
}

/**
 * Compare two frame logs for exact equality modulo epoch (and any extra
 * ignored fields, e.g. "running" when the replay is paced by stepping
 * while the original ran free).
 */
export function compareFrameLogs(
  a: readonly Frame[],
  b: readonly Frame[],
  ignore: readonly string[] = [],
): ComparisonResult {
  const n = Math.min(a.length, b.length);
  for (let i = 0; i < n; i++) {
    if (frameFingerprint(a[i], ignore) !== frameFingerprint(b[i], ignore)) {
      return {
        identical: false,
        framesCompared: n,
        divergence: { index: i, tickA: a[i].tick, tickB: b[i].tick },
      };
    }
  }
  if (a.length !== b.length) {
    return {
      identical: false,
      framesCompared: n,
      divergence: {
        index: n,
        tickA: a.length > n ? a[n].tick : null,
        tickB: b.length > n ? b[n].tick : null,
      },
    };
  }
  return { identical: true, framesCompared: n, divergence: null };
}

export interface TickJoinResult {
  identical: boolean;
  /** Ticks present in both logs and compared. */
  compared: number;
  /** Ticks only one side produced (stride mismatch, e.g. speed changes). */
  onlyA: number;
  onlyB: number;
  divergence: Divergence | null;
}

/**
 * Compare two frame logs joined on tick number.
 *
 * The strict list comparison above assumes both runs broadcast frames at
 * the same ticks. When the original session ran at a different speed
 * multiplier than the stepped replay, the frame strides differ and the
 * logs sample different ticks; joining on tick still checks every tick
 * both sides produced.
 */
export function compareFramesByTick(
  a: readonly Frame[],
  b: readonly Frame[],
  ignore: readonly string[] = [],
): TickJoinResult {
  const byTickB = new Map<number, Frame>();
  for (const f of b) byTickB.set(f.tick, f);
  let compared = 0;
  let onlyA = 0;
  let divergence: Divergence | null = null;
  for (const fa of a) {
    const fb = byTickB.get(fa.tick);
    if (fb === undefined) {
      onlyA++;
      continue;
    }
    if (divergence === null &&
        frameFingerprint(fa, ignore) !== frameFingerprint(fb, ignore)) {
      divergence = { index: compared, tickA: fa.tick, tickB: fb.tick };
    }
    compared++;
    byTickB.delete(fa.tick);
  }
  return {
    identical: divergence === null,
    compared,
    onlyA,
    onlyB: byTickB.size,
    divergence,
  };
}

/** Short human-readable label for the action history list. */
export function describeCommand(cmd: Command): string {
  switch (cmd.type) {
    case "step":
      return `step k=${cmd.k}`;
    case "reset":
      return cmd.seed === undefined ? "reset" : `reset seed=${cmd.seed}`;
    case "set_speed":
      return `speed x${cmd.multiplier}`;
    case "set_param":
      return `set ${cmd.name}=${Number(cmd.value).toPrecision(4)}`;
    case "assign_controller": {
      const c = cmd.controller as { tag?: string } | undefined;
      return `agent ${cmd.agent_id} -> ${c?.tag ?? "?"}`;
    }
    case "load_config":
      return "load config";
    default:
      return cmd.type;
  }
}

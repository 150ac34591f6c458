/**
 * WebSocket session client.
 *
 * Responsibilities: socket lifecycle, matching acks/errors to commands
 * by sequence number, the depth-1 latest-wins frame slot the renderer
 * drains at its own pace, the per-epoch frame log, the visible action
 * history, and the deterministic replay runner.
 *
 * The client is strictly a remote control: it holds no physics state,
 * only what the server sent.
 */

import {
  Ack,
  Command,
  ErrorMsg,
  Frame,
  FrameGate,
  Hello,
  SeqAllocator,
  SnapshotMsg,
  cmdPause,
  cmdReset,
  cmdSnapshot,
  cmdStep,
  encodeCommand,
  parseServerMessage,
} from "./protocol.js";
import {
  ActionHistory,
  TickJoinResult,
  buildReplayScript,
  compareFramesByTick,
} from "./replay.js";

const FRAME_LOG_CAP = 50_000;
/** Largest k the service accepts for one step command. */
const MAX_STEP_K = 100_000;

export interface SessionEvents {
  onHello?(hello: Hello): void;
  /** Called for every frame that passes the ordering gate. */
  onFrame?(frame: Frame): void;
  onAck?(ack: Ack | SnapshotMsg): void;
  /** Server-side rejection or protocol problem, for the toast stack. */
  onError?(message: string, detail?: ErrorMsg): void;
  onHistoryChange?(): void;
  onClose?(): void;
}

interface PendingCommand {
  command: Command;
  internal: boolean;
  resolve(reply: Ack | SnapshotMsg): void;
  reject(err: Error): void;
}

export class CommandRejected extends Error {
  constructor(readonly reason: string) {
    super(reason);
  }
}

export class SessionClient {
  private ws: WebSocket | null = null;
  private readonly gate = new FrameGate();
  private readonly seqs = new SeqAllocator();
  private readonly pending = new Map<number, PendingCommand>();
  readonly history = new ActionHistory();

  /** Depth-1 frame queue: newest frame wins, renderer pops when ready. */
  private frameSlot: Frame | null = null;
  /** All gated frames of the current epoch, for replay comparison. */
  private frameLog: Frame[] = [];
  private logEpoch = -1;

  hello: Hello | null = null;
  lastFrame: Frame | null = null;
  replaying = false;

  constructor(private readonly events: SessionEvents) {}

  get epoch(): number {
    return this.lastFrame?.epoch ?? this.hello?.epoch ?? 0;
  }

  get tick(): number {
    return this.lastFrame?.tick ?? this.hello?.tick ?? 0;
  }

  get connected(): boolean {
    return this.ws !== null && this.ws.readyState === WebSocket.OPEN;
  }

  connect(url: string): Promise<Hello> {
    return new Promise((resolve, reject) => {
      const ws = new WebSocket(url);
      this.ws = ws;
      ws.onmessage = (ev) => this.onMessage(String(ev.data), resolve);
      ws.onerror = () => {
        if (this.hello === null) reject(new Error(`cannot reach ${url}`));
      };
      ws.onclose = () => {
        this.failAllPending("connection closed");
        this.events.onClose?.();
      };
    });
  }

  close(): void {
    this.ws?.close();
    this.ws = null;
  }

  /** Pop the latest pending frame (or null). Rendering pace lives here. */
  takeFrame(): Frame | null {
    const f = this.frameSlot;
    this.frameSlot = null;
    return f;
  }

  /** Frames of the current epoch, oldest first. */
  epochFrames(): readonly Frame[] {
    return this.frameLog;
  }

  /**
   * Send a command; resolves with the matching ack (or snapshot reply),
   * rejects with CommandRejected when the server refuses it. Internal
   * sends (replay machinery) skip the visible action history.
   */
  send(command: Command, internal = false): Promise<Ack | SnapshotMsg> {
    if (!this.connected || this.ws === null) {
      return Promise.reject(new Error("not connected"));
    }
    const seq = this.seqs.take();
    const wire = encodeCommand(command, seq);
    return new Promise((resolve, reject) => {
      this.pending.set(seq, { command, internal, resolve, reject });
      this.ws!.send(wire);
    });
  }

  private onMessage(text: string, helloResolve: (h: Hello) => void): void {
    let msg;
    try {
      msg = parseServerMessage(text);
    } catch (e) {
      this.events.onError?.(`bad server message: ${(e as Error).message}`);
      return;
    }
    switch (msg.type) {
      case "hello": {
        this.hello = msg;
        this.gate.reset();
        this.acceptFrame(msg.frame);
        this.events.onHello?.(msg);
        helloResolve(msg);
        break;
      }
      case "frame":
        this.acceptFrame(msg);
        break;
      case "ack":
      case "snapshot": {
        const seq = typeof msg.seq === "number" ? msg.seq : null;
        const entry = seq !== null ? this.pending.get(seq) : undefined;
        if (seq !== null && entry !== undefined) {
          this.pending.delete(seq);
          if (!entry.internal) {
            this.history.record({
              seq,
              command: entry.command,
              epoch: msg.epoch as number,
              tick: msg.applied_at_tick as number,
              wallMs: Date.now(),
            });
            this.events.onHistoryChange?.();
          }
          entry.resolve(msg);
        }
        this.events.onAck?.(msg);
        break;
      }
      case "error": {
        const seq = typeof msg.seq === "number" ? msg.seq : null;
        const entry = seq !== null ? this.pending.get(seq) : undefined;
        if (seq !== null && entry !== undefined) {
          this.pending.delete(seq);
          if (!entry.internal) {
            this.history.record({
              seq,
              command: entry.command,
              epoch: this.epoch,
              tick: this.tick,
              wallMs: Date.now(),
              rejected: true,
            });
            this.events.onHistoryChange?.();
          }
          entry.reject(new CommandRejected(msg.reason));
        }
        this.events.onError?.(msg.reason, msg);
        break;
      }
    }
  }

  private acceptFrame(frame: Frame): void {
    if (!this.gate.accepts(frame)) return; // stale or duplicate
    if (frame.epoch !== this.logEpoch) {
      this.logEpoch = frame.epoch;
      this.frameLog = [];
    }
    this.frameLog.push(frame);
    if (this.frameLog.length > FRAME_LOG_CAP) {
      this.frameLog.splice(0, this.frameLog.length - FRAME_LOG_CAP);
    }
    this.lastFrame = frame;
    this.frameSlot = frame; // depth 1: newest wins
    this.events.onFrame?.(frame);
  }

  private failAllPending(reason: string): void {
    for (const entry of this.pending.values()) {
      entry.reject(new Error(reason));
    }
    this.pending.clear();
  }

  /**
   * Re-run the recorded action history against a reset session and
   * compare the frames tick-by-tick.
   *
   * Flow: pause, capture the current epoch's frame log, reset (same
   * seed), then for each recorded state-changing command step to its
   * tick and re-issue it; finally step to the last observed tick. A
   * trailing read-only snapshot command acts as a delivery barrier: the
   * outbox is FIFO, so once its reply arrives every replay frame is in.
   * `running` is ignored in the comparison because the replay is paced
   * by stepping while the original may have run free.
   */
  async replayHistory(): Promise<TickJoinResult> {
    if (this.replaying) throw new Error("replay already in progress");
    this.replaying = true;
    try {
      await this.send(cmdPause(), true);
      const original = [...this.frameLog];
      const epoch = this.logEpoch;
      const finalTick = original.length > 0 ? original[original.length - 1].tick : 0;
      const entries = this.history.all().filter((e) => e.epoch === epoch);
      const script = buildReplayScript(entries, finalTick);

      await this.send(cmdReset(), true);
      for (const step of script) {
        let left = step.advanceTicks;
        while (left > 0) {
          const k = Math.min(left, MAX_STEP_K);
          await this.send(cmdStep(k), true);
          left -= k;
        }
        if (step.command !== null) await this.send(step.command, true);
      }
      await this.send(cmdSnapshot(), true); // delivery barrier
      return compareFramesByTick(original, this.frameLog, ["running"]);
    } finally {
      this.replaying = false;
    }
  }
}

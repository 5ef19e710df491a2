/**
 * Client state and send policy.
 *
 * Two invariants live here rather than in the DOM layer so tests can pin
 * them: commands go out only while connected, and at most one velocity
 * command per vehicle leaves per received telemetry frame (the command rate
 * can never exceed the telemetry rate). Pausing is not staleness: a paused
 * server keeps sending frames, so the stale indicator reacts only to frame
 * arrival time.
 */

import type { Command, StateFrame } from "./protocol.js";

export type Connection = "connecting" | "open" | "closed";

export const STALE_AFTER_MS = 1000;

export interface UiState {
  connection: Connection;
  frame: StateFrame | null;
  lastFrameWallMs: number | null;
  lastError: string | null;
  selectedId: number;
}

export function initialState(): UiState {
  return {
    connection: "connecting",
    frame: null,
    lastFrameWallMs: null,
    lastError: null,
    selectedId: 0,
  };
}

export function onOpen(s: UiState): void {
  s.connection = "open";
  s.lastError = null;
}

export function onClose(s: UiState): void {
  s.connection = "closed";
}

export function onFrame(s: UiState, frame: StateFrame, nowMs: number): void {
  s.frame = frame;
  s.lastFrameWallMs = nowMs;
}

export function canSend(s: UiState): boolean {
  return s.connection === "open";
}

/** Stale means "no frame lately", never "the sim is paused". */
export function isStale(s: UiState, nowMs: number): boolean {
  if (s.connection !== "open" || s.lastFrameWallMs === null) return false;
  return nowMs - s.lastFrameWallMs > STALE_AFTER_MS;
}

/**
 * Edge-triggered velocity sender: emits only when the desired setpoint for
 * the selected vehicle changes, which makes "release everything" produce a
 * single zero-velocity hold and bounds the rate at one command per frame.
 */
export class TeleopGate {
  private lastSent = new Map<number, string>();

  commandForFrame(cmd: Command & { type: "velocity" }): Command | null {
    const key = JSON.stringify([cmd.v, cmd.yaw_rate]);
    if (this.lastSent.get(cmd.id) === key) return null;
    this.lastSent.set(cmd.id, key);
    return cmd;
  }

  reset(): void {
    this.lastSent.clear();
  }
}

/** Outbound message log; tests assert the rate-limit invariant on it. */
export interface SentRecord {
  frameTick: number;
  cmd: Command;
}

export class MessageLog {
  readonly sent: SentRecord[] = [];

  record(frameTick: number, cmd: Command): void {
    this.sent.push({ frameTick, cmd });
  }

  /** Worst-case velocity commands for one vehicle within one frame. */
  maxVelocityPerFramePerVehicle(): number {
    const counts = new Map<string, number>();
    for (const r of this.sent) {
      if (r.cmd.type !== "velocity") continue;
      const key = `${r.frameTick}:${r.cmd.id}`;
      counts.set(key, (counts.get(key) ?? 0) + 1);
    }
    return Math.max(0, ...counts.values());
  }
}

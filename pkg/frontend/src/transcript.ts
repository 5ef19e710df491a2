/**
 * Client-side command transcript.
 *
 * Records the state-affecting commands of a session as JSONL entries
 * `{"cmd": ..., "tick": N}`, the same shape the server writes to
 * commands.jsonl, where N is the tick of the latest frame at send time.
 * Keys are emitted in sorted order; note that JavaScript prints 1.0 as "1",
 * so comparison with server transcripts is by parsed value, not by bytes.
 */

import type { Command } from "./protocol.js";

export interface TranscriptEntry {
  tick: number;
  cmd: Command;
}

const SIM_COMMANDS = new Set(["velocity", "takeoff", "land", "set_shape"]);

/** Compact JSON with object keys sorted, matching the server's style. */
export function stableStringify(value: unknown): string {
  if (Array.isArray(value)) {
    return `[${value.map(stableStringify).join(",")}]`;
  }
  if (typeof value === "object" && value !== null) {
    const o = value as Record<string, unknown>;
    const body = Object.keys(o)
      .sort()
      .map((k) => `${JSON.stringify(k)}:${stableStringify(o[k])}`)
      .join(",");
    return `{${body}}`;
  }
  return JSON.stringify(value);
}

export class CommandRecorder {
  readonly entries: TranscriptEntry[] = [];

  /** Record a command if it affects sim state; runner commands (pause,
   * step, set_rtf) are not replayable and are skipped, as on the server. */
  record(frameTick: number, cmd: Command): void {
    if (!SIM_COMMANDS.has(cmd.type)) return;
    this.entries.push({ tick: frameTick, cmd });
  }

  toJsonl(): string {
    return this.entries
      .map((e) => stableStringify({ cmd: e.cmd, tick: e.tick }))
      .join("\n");
  }
}

export function parseTranscript(text: string): TranscriptEntry[] {
  const out: TranscriptEntry[] = [];
  for (const line of text.split("\n")) {
    if (!line.trim()) continue;
    const doc = JSON.parse(line) as { tick: number; cmd: Command };
    if (!Number.isInteger(doc.tick) || typeof doc.cmd !== "object") {
      throw new Error(`bad transcript line: ${line}`);
    }
    out.push({ tick: doc.tick, cmd: doc.cmd });
  }
  return out;
}

/**
 * Wire protocol types and validators.
 *
 * Mirrors the server contract in docs/protocol.md. Everything the client
 * sends or accepts passes through these guards; the UI never trusts a frame
 * it has not validated and never emits a command that would fail them.
 */

export const PROTO = 1;

export type Vec3 = [number, number, number];
export type Quat = [number, number, number, number];
export type Role = "leader" | "follower" | "solo";

export interface UavState {
  id: number;
  p: Vec3;
  v: Vec3;
  q: Quat; // scalar-first [w, x, y, z], body to world
  role: Role;
}

export interface StateFrame {
  proto: typeof PROTO;
  type: "state";
  t: number;
  tick: number;
  paused: boolean;
  rtf: number | "unbounded";
  shape: string | null;
  uavs: UavState[];
}

export interface ErrorFrame {
  proto: typeof PROTO;
  type: "error";
  msg: string;
}

export type ServerFrame = StateFrame | ErrorFrame;

export type Command =
  | { type: "velocity"; id: number; v: Vec3; yaw_rate: number }
  | { type: "takeoff"; id: number }
  | { type: "land"; id: number }
  | { type: "set_shape"; name: string }
  | { type: "pause"; value: boolean }
  | { type: "step"; n: number }
  | { type: "set_rtf"; factor: number | "unbounded" };

function isFinite_(x: unknown): x is number {
  return typeof x === "number" && Number.isFinite(x);
}

function isNumTuple(x: unknown, n: number): boolean {
  return Array.isArray(x) && x.length === n && x.every(isFinite_);
}

function isUav(u: unknown): u is UavState {
  if (typeof u !== "object" || u === null) return false;
  const o = u as Record<string, unknown>;
  return (
    Number.isInteger(o.id) &&
    isNumTuple(o.p, 3) &&
    isNumTuple(o.v, 3) &&
    isNumTuple(o.q, 4) &&
    (o.role === "leader" || o.role === "follower" || o.role === "solo")
  );
}

/** Parse and validate a server frame; null means "discard it". */
export function parseFrame(raw: string): ServerFrame | null {
  let doc: unknown;
  try {
    doc = JSON.parse(raw);
  } catch {
    return null;
  }
  if (typeof doc !== "object" || doc === null) return null;
  const o = doc as Record<string, unknown>;
  if (o.proto !== PROTO) return null;
  if (o.type === "error") {
    return typeof o.msg === "string" && o.msg.length > 0
      ? { proto: PROTO, type: "error", msg: o.msg }
      : null;
  }
  if (o.type !== "state") return null;
  if (!Number.isInteger(o.tick) || (o.tick as number) < 0) return null;
  if (!isFinite_(o.t)) return null;
  if (typeof o.paused !== "boolean") return null;
  const rtfOk = o.rtf === "unbounded" || (isFinite_(o.rtf) && o.rtf > 0);
  if (!rtfOk) return null;
  if (!(o.shape === null || typeof o.shape === "string")) return null;
  if (!Array.isArray(o.uavs) || !o.uavs.every(isUav)) return null;
  return o as unknown as StateFrame;
}

/** Schema check for outbound commands: returns a problem string or null. */
export function validateCommand(cmd: unknown): string | null {
  if (typeof cmd !== "object" || cmd === null) return "command must be an object";
  const o = cmd as Record<string, unknown>;
  switch (o.type) {
    case "velocity":
      if (!Number.isInteger(o.id)) return "velocity needs an integer id";
      if (!isNumTuple(o.v, 3)) return "velocity needs v as 3 finite numbers";
      if (!isFinite_(o.yaw_rate)) return "velocity needs a finite yaw_rate";
      return null;
    case "takeoff":
    case "land":
      return Number.isInteger(o.id) ? null : `${o.type} needs an integer id`;
    case "set_shape":
      return typeof o.name === "string" && o.name.length > 0
        ? null
        : "set_shape needs a name";
    case "pause":
      return typeof o.value === "boolean" ? null : "pause needs a boolean value";
    case "step":
      return Number.isInteger(o.n) && (o.n as number) > 0
        ? null
        : "step needs a positive integer n";
    case "set_rtf":
      return o.factor === "unbounded" || (isFinite_(o.factor) && o.factor > 0)
        ? null
        : 'set_rtf needs a positive factor or "unbounded"';
    default:
      return `unknown command type ${String(o.type)}`;
  }
}

/** Yaw about world z from a scalar-first quaternion. */
export function yawOf(q: Quat): number {
  const [w, x, y, z] = q;
  return Math.atan2(2 * (w * z + x * y), 1 - 2 * (y * y + z * z));
}

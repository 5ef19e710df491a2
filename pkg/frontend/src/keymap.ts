/**
 * Keyboard bindings and the held-keys to velocity-setpoint mapping.
 *
 * Velocities are body frame: +x forward along the heading, +y left, +z up.
 * Opposing held keys cancel; "stop" overrides everything. Bindings are
 * remappable at runtime (settings panel); the defaults below are the table
 * documented in the README.
 */

import type { Command, Vec3 } from "./protocol.js";

export type Action =
  | "forward"
  | "back"
  | "left"
  | "right"
  | "up"
  | "down"
  | "yaw_left"
  | "yaw_right"
  | "stop"
  | "takeoff"
  | "land"
  | "pause"
  | "step";

export const ACTIONS: readonly Action[] = [
  "forward", "back", "left", "right", "up", "down",
  "yaw_left", "yaw_right", "stop", "takeoff", "land", "pause", "step",
];

/** Default bindings, keyed by KeyboardEvent.code. */
export const DEFAULT_BINDINGS: Readonly<Record<string, Action>> = {
  KeyW: "forward",
  KeyS: "back",
  KeyA: "left",
  KeyD: "right",
  KeyR: "up",
  KeyF: "down",
  KeyQ: "yaw_left",
  KeyE: "yaw_right",
  Space: "stop",
  KeyT: "takeoff",
  KeyL: "land",
  KeyP: "pause",
  KeyN: "step",
};

/** Speed steps applied per axis while the matching keys are held. */
export interface TeleopRates {
  horizontal: number; // m/s for forward/back/left/right
  vertical: number; // m/s for up/down
  yaw: number; // rad/s for yaw_left/yaw_right
}

export const DEFAULT_RATES: TeleopRates = { horizontal: 1.0, vertical: 0.5, yaw: 0.6 };

export class Keymap {
  private bindings: Map<string, Action>;

  constructor(bindings: Record<string, Action> = { ...DEFAULT_BINDINGS }) {
    this.bindings = new Map(Object.entries(bindings));
  }

  actionOf(code: string): Action | undefined {
    return this.bindings.get(code);
  }

  codeOf(action: Action): string | undefined {
    for (const [code, a] of this.bindings) if (a === action) return code;
    return undefined;
  }

  /** Rebind an action to a new key, releasing both old claims. */
  rebind(action: Action, code: string): void {
    for (const [c, a] of [...this.bindings]) {
      if (a === action || c === code) this.bindings.delete(c);
    }
    this.bindings.set(code, action);
  }

  entries(): [string, Action][] {
    return [...this.bindings.entries()];
  }
}

/** Resolve held key codes into held actions under a keymap. */
export function heldActions(held: ReadonlySet<string>, km: Keymap): Set<Action> {
  const out = new Set<Action>();
  for (const code of held) {
    const a = km.actionOf(code);
    if (a !== undefined) out.add(a);
  }
  return out;
}

/** The body-frame velocity implied by the currently held movement actions. */
export function velocityFromActions(
  actions: ReadonlySet<Action>,
  rates: TeleopRates = DEFAULT_RATES,
): { v: Vec3; yaw_rate: number } {
  if (actions.has("stop")) return { v: [0, 0, 0], yaw_rate: 0 };
  const axis = (pos: Action, neg: Action, step: number) =>
    (actions.has(pos) ? step : 0) - (actions.has(neg) ? step : 0);
  return {
    v: [
      axis("forward", "back", rates.horizontal),
      axis("left", "right", rates.horizontal),
      axis("up", "down", rates.vertical),
    ],
    yaw_rate: axis("yaw_left", "yaw_right", rates.yaw),
  };
}

/** Build the velocity command for a vehicle from held key codes. */
export function velocityCommand(
  id: number,
  held: ReadonlySet<string>,
  km: Keymap,
  rates: TeleopRates = DEFAULT_RATES,
): Command {
  const { v, yaw_rate } = velocityFromActions(heldActions(held, km), rates);
  return { type: "velocity", id, v, yaw_rate };
}

/** One-shot commands triggered on key press rather than held state. */
export function discreteCommand(action: Action, id: number): Command | null {
  if (action === "takeoff") return { type: "takeoff", id };
  if (action === "land") return { type: "land", id };
  return null;
}

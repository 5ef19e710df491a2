import { describe, expect, it } from "vitest";

import { parseFrame, validateCommand, yawOf, type StateFrame } from "../src/protocol.js";

function stateFrame(overrides: Partial<Record<string, unknown>> = {}): string {
  return JSON.stringify({
    proto: 1,
    type: "state",
    t: 0.04,
    tick: 40,
    paused: false,
    rtf: 1.0,
    shape: "cube",
    uavs: [
      { id: 0, p: [0, 0, 3], v: [0, 0, 0], q: [1, 0, 0, 0], role: "leader" },
      { id: 1, p: [1, 1, 3], v: [0, 0, 0], q: [1, 0, 0, 0], role: "follower" },
    ],
    ...overrides,
  });
}

describe("parseFrame", () => {
  it("accepts a valid state frame verbatim", () => {
    const f = parseFrame(stateFrame()) as StateFrame;
    expect(f.type).toBe("state");
    expect(f.tick).toBe(40);
    expect(f.uavs).toHaveLength(2);
    expect(f.uavs[0]!.p).toEqual([0, 0, 3]);
    expect(f.shape).toBe("cube");
  });

  it("accepts shape null and unbounded rtf", () => {
    const f = parseFrame(stateFrame({ shape: null, rtf: "unbounded" })) as StateFrame;
    expect(f.shape).toBeNull();
    expect(f.rtf).toBe("unbounded");
  });

  it("accepts error frames", () => {
    const f = parseFrame(JSON.stringify({ proto: 1, type: "error", msg: "nope" }));
    expect(f).toEqual({ proto: 1, type: "error", msg: "nope" });
  });

  it.each([
    ["malformed json", "{oops"],
    ["wrong proto", stateFrame({ proto: 2 })],
    ["unknown type", stateFrame({ type: "telemetry" })],
    ["negative tick", stateFrame({ tick: -1 })],
    ["fractional tick", stateFrame({ tick: 1.5 })],
    ["missing paused", stateFrame({ paused: undefined })],
    ["zero rtf", stateFrame({ rtf: 0 })],
    ["bad shape", stateFrame({ shape: 7 })],
    [
      "short position tuple",
      stateFrame({ uavs: [{ id: 0, p: [0, 0], v: [0, 0, 0], q: [1, 0, 0, 0], role: "leader" }] }),
    ],
    [
      "bad role",
      stateFrame({ uavs: [{ id: 0, p: [0, 0, 3], v: [0, 0, 0], q: [1, 0, 0, 0], role: "boss" }] }),
    ],
    ["error without msg", JSON.stringify({ proto: 1, type: "error" })],
  ])("rejects %s", (_name, raw) => {
    expect(parseFrame(raw)).toBeNull();
  });
});

describe("validateCommand", () => {
  it.each([
    { type: "velocity", id: 0, v: [1, 0, 0], yaw_rate: 0.5 },
    { type: "takeoff", id: 3 },
    { type: "land", id: 0 },
    { type: "set_shape", name: "pyramid" },
    { type: "pause", value: true },
    { type: "step", n: 50 },
    { type: "set_rtf", factor: 2.0 },
    { type: "set_rtf", factor: "unbounded" },
  ])("accepts $type", (cmd) => {
    expect(validateCommand(cmd)).toBeNull();
  });

  it.each([
    ["junk type", { type: "warp" }],
    ["velocity without id", { type: "velocity", v: [0, 0, 0], yaw_rate: 0 }],
    ["velocity short v", { type: "velocity", id: 0, v: [0, 0], yaw_rate: 0 }],
    ["velocity NaN", { type: "velocity", id: 0, v: [0, 0, NaN], yaw_rate: 0 }],
    ["velocity missing yaw", { type: "velocity", id: 0, v: [0, 0, 0] }],
    ["fractional step", { type: "step", n: 0.5 }],
    ["zero step", { type: "step", n: 0 }],
    ["zero rtf", { type: "set_rtf", factor: 0 }],
    ["pause without value", { type: "pause" }],
    ["empty shape", { type: "set_shape", name: "" }],
  ])("rejects %s", (_name, cmd) => {
    expect(validateCommand(cmd)).not.toBeNull();
  });
});

describe("yawOf", () => {
  it("reads yaw from a scalar-first quaternion", () => {
    expect(yawOf([1, 0, 0, 0])).toBe(0);
    const half = 0.3;
    const q: [number, number, number, number] = [Math.cos(half), 0, 0, Math.sin(half)];
    expect(yawOf(q)).toBeCloseTo(0.6, 12);
  });
});

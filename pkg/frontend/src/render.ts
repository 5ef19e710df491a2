/**
 * Canvas rendering: top-down swarm view plus an altitude strip.
 *
 * Rendering is a pure function of the latest frame; nothing here
 * extrapolates, filters, or remembers previous positions. The Draw2D
 * interface is the structural subset of CanvasRenderingContext2D the views
 * need, so tests can substitute a recording stub.
 */

import type { StateFrame, UavState, Vec3 } from "./protocol.js";
import { yawOf } from "./protocol.js";

export interface Draw2D {
  fillStyle: string | CanvasGradient | CanvasPattern;
  strokeStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  font: string;
  clearRect(x: number, y: number, w: number, h: number): void;
  fillRect(x: number, y: number, w: number, h: number): void;
  strokeRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  stroke(): void;
  fill(): void;
  fillText(text: string, x: number, y: number): void;
}

export const LEADER_FILL = "#e8762c";
export const FOLLOWER_FILL = "#3a7bd5";
export const TARGET_STROKE = "#7fd53a";
export const MARKER_RADIUS = 6;
export const LEADER_RADIUS = 8;

/**
 * Builtin formation shape offsets, mirrored from the server's shape library
 * so the client can overlay follower slots without a second request.
 */
export const SHAPE_OFFSETS: Readonly<Record<string, readonly Vec3[]>> = {
  cube: [
    [1, 1, 1], [1, -1, 1], [-1, -1, 1], [-1, 1, 1],
    [1, 1, -1], [1, -1, -1], [-1, -1, -1], [-1, 1, -1],
  ],
  pyramid: [
    [1, 1, -1], [1, -1, -1], [-1, -1, -1], [-1, 1, -1],
    [1, 0, 0], [0, -1, 0], [-1, 0, 0], [0, 1, 0],
  ],
  triangle: [
    [2.3094010767585034, 0, 0],
    [1.0103629710818454, 0.7500000000000002, 0],
    [-0.28867513459481264, 1.5000000000000004, 0],
    [-1.1547005383792515, 1.5000000000000004, 0],
    [-1.154700538379252, 4.440892098500626e-16, 0],
    [-1.1547005383792526, -1.4999999999999996, 0],
    [-0.28867513459481375, -1.4999999999999996, 0],
    [1.010362971081845, -0.7499999999999998, 0],
  ],
};

export interface ViewTransform {
  toX(wx: number): number;
  toY(wy: number): number;
  scale: number;
}

/** Fit the swarm's xy bounding box (with margin, min 8 m span) to the canvas. */
export function fitView(uavs: readonly UavState[], w: number, h: number): ViewTransform {
  let minX = -4, maxX = 4, minY = -4, maxY = 4;
  for (const u of uavs) {
    minX = Math.min(minX, u.p[0]);
    maxX = Math.max(maxX, u.p[0]);
    minY = Math.min(minY, u.p[1]);
    maxY = Math.max(maxY, u.p[1]);
  }
  const cx = (minX + maxX) / 2;
  const cy = (minY + maxY) / 2;
  const span = Math.max(maxX - minX + 4, maxY - minY + 4, 8);
  const scale = Math.min(w, h) / span;
  return {
    scale,
    toX: (wx) => w / 2 + (wx - cx) * scale,
    // world +y is left in a top-down view with +x up the screen; draw the
    // conventional map view instead: screen x = world x, screen y = -world y
    toY: (wy) => h / 2 - (wy - cy) * scale,
  };
}

function drawMarker(ctx: Draw2D, view: ViewTransform, u: UavState): void {
  const x = view.toX(u.p[0]);
  const y = view.toY(u.p[1]);
  const leader = u.role === "leader";
  const r = leader ? LEADER_RADIUS : MARKER_RADIUS;
  ctx.fillStyle = leader ? LEADER_FILL : FOLLOWER_FILL;
  ctx.beginPath();
  ctx.arc(x, y, r, 0, 2 * Math.PI);
  ctx.fill();
  if (leader) {
    ctx.strokeStyle = LEADER_FILL;
    ctx.lineWidth = 2;
    ctx.beginPath();
    ctx.arc(x, y, r + 4, 0, 2 * Math.PI);
    ctx.stroke();
  }
  // heading glyph: a line from the center along the yaw direction
  const yaw = yawOf(u.q);
  ctx.strokeStyle = "#222222";
  ctx.lineWidth = 2;
  ctx.beginPath();
  ctx.moveTo(x, y);
  ctx.lineTo(x + Math.cos(yaw) * (r + 6), y - Math.sin(yaw) * (r + 6));
  ctx.stroke();
  ctx.fillStyle = "#222222";
  ctx.font = "10px sans-serif";
  ctx.fillText(String(u.id), x + r + 2, y - r - 2);
}

function drawTargets(ctx: Draw2D, view: ViewTransform, frame: StateFrame): void {
  if (!frame.shape) return;
  const offsets = SHAPE_OFFSETS[frame.shape];
  const leader = frame.uavs.find((u) => u.role === "leader");
  if (!offsets || !leader) return;
  ctx.strokeStyle = TARGET_STROKE;
  ctx.lineWidth = 1;
  const s = 4;
  for (const off of offsets) {
    const x = view.toX(leader.p[0] + off[0]);
    const y = view.toY(leader.p[1] + off[1]);
    ctx.beginPath();
    ctx.moveTo(x - s, y);
    ctx.lineTo(x + s, y);
    ctx.moveTo(x, y - s);
    ctx.lineTo(x, y + s);
    ctx.stroke();
  }
}

/** Top-down swarm view: one marker per vehicle, leader highlighted,
 * follower slot targets overlaid while a formation shape is active. */
export function renderTopDown(ctx: Draw2D, frame: StateFrame, w: number, h: number): void {
  ctx.clearRect(0, 0, w, h);
  ctx.fillStyle = "#f7f7f4";
  ctx.fillRect(0, 0, w, h);
  ctx.strokeStyle = "#cccccc";
  ctx.lineWidth = 1;
  ctx.strokeRect(0.5, 0.5, w - 1, h - 1);
  const view = fitView(frame.uavs, w, h);
  drawTargets(ctx, view, frame);
  for (const u of frame.uavs) drawMarker(ctx, view, u);
}

export const ALTITUDE_MAX_M = 10;

/** Altitude strip: one bar per vehicle, drawn verbatim from the frame. */
export function renderAltitude(ctx: Draw2D, frame: StateFrame, w: number, h: number): void {
  ctx.clearRect(0, 0, w, h);
  ctx.fillStyle = "#f7f7f4";
  ctx.fillRect(0, 0, w, h);
  const n = frame.uavs.length;
  if (n === 0) return;
  const slot = w / n;
  const bar = Math.max(2, slot * 0.6);
  frame.uavs.forEach((u, i) => {
    const frac = Math.max(0, Math.min(1, u.p[2] / ALTITUDE_MAX_M));
    const x = i * slot + (slot - bar) / 2;
    ctx.fillStyle = u.role === "leader" ? LEADER_FILL : FOLLOWER_FILL;
    ctx.fillRect(x, h * (1 - frac), bar, h * frac);
    ctx.fillStyle = "#222222";
    ctx.font = "10px sans-serif";
    ctx.fillText(u.p[2].toFixed(1), x, Math.max(10, h * (1 - frac) - 2));
  });
}

/**
 * DOM wiring: socket lifecycle, HUD, keyboard capture, settings panel.
 *
 * Everything testable lives in the sibling modules; this file only connects
 * them to the page. Importing it without a DOM (as the test runner does) is
 * a no-op.
 */

import {
  DEFAULT_RATES,
  Keymap,
  discreteCommand,
  velocityCommand,
  type Action,
} from "./keymap.js";
import {
  MessageLog,
  TeleopGate,
  canSend,
  initialState,
  isStale,
  onClose,
  onFrame,
  onOpen,
} from "./model.js";
import { parseFrame, validateCommand, type Command, type StateFrame } from "./protocol.js";
import { renderAltitude, renderTopDown } from "./render.js";
import { CommandRecorder } from "./transcript.js";

function byId<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
}

function main(): void {
  const state = initialState();
  const keymap = new Keymap();
  const gate = new TeleopGate();
  const log = new MessageLog();
  const recorder = new CommandRecorder();
  const held = new Set<string>();
  let socket: WebSocket | null = null;
  let rebinding: Action | null = null;

  const topdown = byId<HTMLCanvasElement>("topdown");
  const altitude = byId<HTMLCanvasElement>("altitude");
  const statusEl = byId<HTMLSpanElement>("status");
  const staleEl = byId<HTMLSpanElement>("stale");
  const errorEl = byId<HTMLSpanElement>("lasterror");
  const tEl = byId<HTMLSpanElement>("treadout");
  const tickEl = byId<HTMLSpanElement>("tickreadout");
  const rtfEl = byId<HTMLSpanElement>("rtfreadout");
  const pauseBtn = byId<HTMLButtonElement>("pausebtn");
  const stepBtn = byId<HTMLButtonElement>("stepbtn");
  const stepN = byId<HTMLInputElement>("stepn");
  const rtfSlider = byId<HTMLInputElement>("rtfslider");
  const rtfUnbounded = byId<HTMLInputElement>("rtfunbounded");
  const shapeSel = byId<HTMLSelectElement>("shapesel");
  const vehicleSel = byId<HTMLSelectElement>("vehiclesel");
  const reconnectBtn = byId<HTMLButtonElement>("reconnect");
  const downloadBtn = byId<HTMLButtonElement>("download");
  const bindingsDiv = byId<HTMLDivElement>("bindings");

  const controls: { disabled: boolean }[] = [
    pauseBtn, stepBtn, stepN, rtfSlider, rtfUnbounded, shapeSel, vehicleSel, downloadBtn,
  ];

  function send(cmd: Command): void {
    if (!canSend(state) || socket === null) return;
    const problem = validateCommand(cmd);
    if (problem !== null) {
      errorEl.textContent = `refused to send: ${problem}`;
      return;
    }
    socket.send(JSON.stringify(cmd));
    const tick = state.frame ? state.frame.tick : 0;
    log.record(tick, cmd);
    recorder.record(tick, cmd);
  }

  function refreshControls(): void {
    const enabled = canSend(state);
    for (const c of controls) c.disabled = !enabled;
    reconnectBtn.hidden = state.connection !== "closed";
    statusEl.textContent = state.connection;
    statusEl.className = state.connection;
  }

  function refreshVehicles(frame: StateFrame): void {
    if (vehicleSel.options.length === frame.uavs.length) return;
    vehicleSel.innerHTML = "";
    for (const u of frame.uavs) {
      const opt = document.createElement("option");
      opt.value = String(u.id);
      opt.textContent = `${u.id} (${u.role})`;
      if (u.role === "leader") opt.selected = true;
      vehicleSel.appendChild(opt);
    }
    state.selectedId = Number(vehicleSel.value);
  }

  function renderBindings(): void {
    bindingsDiv.innerHTML = "";
    for (const [code, action] of keymap.entries()) {
      const row = document.createElement("div");
      const btn = document.createElement("button");
      btn.textContent = rebinding === action ? "press a key..." : code;
      btn.onclick = () => {
        rebinding = action;
        renderBindings();
      };
      row.appendChild(btn);
      row.appendChild(document.createTextNode(` ${action}`));
      bindingsDiv.appendChild(row);
    }
  }

  function handleFrame(frame: StateFrame): void {
    onFrame(state, frame, Date.now());
    refreshVehicles(frame);
    tEl.textContent = frame.t.toFixed(3);
    tickEl.textContent = String(frame.tick);
    rtfEl.textContent = frame.rtf === "unbounded" ? "unbounded" : `${frame.rtf}x`;
    pauseBtn.textContent = frame.paused ? "resume" : "pause";
    renderTopDown(topdown.getContext("2d")!, frame, topdown.width, topdown.height);
    renderAltitude(altitude.getContext("2d")!, frame, altitude.width, altitude.height);
    // one teleop decision per telemetry frame, edge-triggered
    const cmd = gate.commandForFrame(
      velocityCommand(state.selectedId, held, keymap, DEFAULT_RATES) as Command & {
        type: "velocity";
      },
    );
    if (cmd !== null) send(cmd);
  }

  function connect(): void {
    state.connection = "connecting";
    refreshControls();
    socket = new WebSocket(`ws://${location.host}/ws`);
    socket.onopen = () => {
      onOpen(state);
      gate.reset();
      refreshControls();
    };
    socket.onclose = () => {
      onClose(state);
      refreshControls();
    };
    socket.onmessage = (ev) => {
      const frame = parseFrame(String(ev.data));
      if (frame === null) return;
      if (frame.type === "error") {
        errorEl.textContent = frame.msg;
        return;
      }
      handleFrame(frame);
    };
  }

  document.addEventListener("keydown", (ev) => {
    if (ev.repeat) return;
    if (rebinding !== null) {
      keymap.rebind(rebinding, ev.code);
      rebinding = null;
      renderBindings();
      ev.preventDefault();
      return;
    }
    const action = keymap.actionOf(ev.code);
    if (action === undefined) return;
    ev.preventDefault();
    if (action === "pause") {
      send({ type: "pause", value: !(state.frame?.paused ?? false) });
      return;
    }
    if (action === "step") {
      send({ type: "step", n: Math.max(1, Number(stepN.value) || 1) });
      return;
    }
    const oneShot = discreteCommand(action, state.selectedId);
    if (oneShot !== null) {
      send(oneShot);
      return;
    }
    held.add(ev.code);
  });

  document.addEventListener("keyup", (ev) => {
    held.delete(ev.code);
  });

  pauseBtn.onclick = () => send({ type: "pause", value: !(state.frame?.paused ?? false) });
  stepBtn.onclick = () => send({ type: "step", n: Math.max(1, Number(stepN.value) || 1) });
  shapeSel.onchange = () => send({ type: "set_shape", name: shapeSel.value });
  vehicleSel.onchange = () => {
    state.selectedId = Number(vehicleSel.value);
    gate.reset();
  };
  rtfSlider.oninput = () => {
    rtfUnbounded.checked = false;
    send({ type: "set_rtf", factor: Number(rtfSlider.value) });
  };
  rtfUnbounded.onchange = () => {
    if (rtfUnbounded.checked) send({ type: "set_rtf", factor: "unbounded" });
    else send({ type: "set_rtf", factor: Number(rtfSlider.value) });
  };
  reconnectBtn.onclick = () => connect();
  downloadBtn.onclick = () => {
    const blob = new Blob([recorder.toJsonl() + "\n"], { type: "application/jsonl" });
    const a = document.createElement("a");
    a.href = URL.createObjectURL(blob);
    a.download = "teleop_transcript.jsonl";
    a.click();
    URL.revokeObjectURL(a.href);
  };

  window.setInterval(() => {
    staleEl.hidden = !isStale(state, Date.now());
  }, 250);

  renderBindings();
  refreshControls();
  connect();
}

if (typeof document !== "undefined" && document.getElementById("topdown") !== null) {
  main();
}

"""WebSocket command/telemetry service wrapping a lockstep simulation.

One background thread owns the simulation (via SimRunner); the asyncio side
only enqueues validated commands and fans out immutable JSON frames. Every
outbound frame carries "proto": 1. Invalid inbound frames get an error frame
and are otherwise ignored, so a misbehaving client cannot disturb the run.
"""

from __future__ import annotations

import asyncio
import json
import socket
from contextlib import asynccontextmanager

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from starlette.staticfiles import StaticFiles

from .config import SimConfig
from .sim import CommandError, PROTO_VERSION, SimRunner, Simulation, validate_command


class BindError(OSError):
    """Requested service port is not available."""


def _error_frame(msg: str) -> str:
    return json.dumps({"proto": PROTO_VERSION, "type": "error", "msg": msg}, sort_keys=True)


def build_app(
    sim: Simulation,
    *,
    start_paused: bool = False,
    total_steps: int | None = None,
    ui_dir: str | None = None,
) -> FastAPI:
    """Assemble the FastAPI app; the sim thread starts/stops with the app."""
    clients: set[asyncio.Queue] = set()
    loop_box: dict = {"loop": None}

    def on_frame(frame: dict) -> None:
        loop = loop_box["loop"]
        if loop is None or loop.is_closed():
            return
        data = json.dumps(frame, sort_keys=True)

        def _fanout() -> None:
            for q in list(clients):
                if q.full():  # slow client: drop the oldest frame, keep the newest
                    try:
                        q.get_nowait()
                    except asyncio.QueueEmpty:
                        pass
                q.put_nowait(data)

        loop.call_soon_threadsafe(_fanout)

    runner = SimRunner(sim, on_frame=on_frame, start_paused=start_paused)

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        loop_box["loop"] = asyncio.get_running_loop()
        runner.start(total_steps)
        yield
        runner.stop()
        sim.close()

    app = FastAPI(lifespan=lifespan)
    app.state.runner = runner
    app.state.sim = sim

    @app.websocket("/ws")
    async def ws_endpoint(websocket: WebSocket) -> None:
        await websocket.accept()
        q: asyncio.Queue = asyncio.Queue(maxsize=64)
        clients.add(q)

        async def sender() -> None:
            while True:
                await websocket.send_text(await q.get())

        async def receiver() -> None:
            while True:
                raw = await websocket.receive_text()
                try:
                    doc = json.loads(raw)
                except json.JSONDecodeError:
                    await websocket.send_text(_error_frame("malformed JSON"))
                    continue
                try:
                    validate_command(doc, sim)
                except CommandError as exc:
                    await websocket.send_text(_error_frame(str(exc)))
                    continue
                runner.submit(doc)

        send_task = asyncio.create_task(sender())
        recv_task = asyncio.create_task(receiver())
        try:
            done, pending = await asyncio.wait(
                {send_task, recv_task}, return_when=asyncio.FIRST_COMPLETED
            )
            for task in pending:
                task.cancel()
            for task in done:
                exc = task.exception()
                if exc is not None and not isinstance(exc, (WebSocketDisconnect, RuntimeError)):
                    raise exc
        except WebSocketDisconnect:
            pass
        finally:
            clients.discard(q)

    if ui_dir:
        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")
    return app


def check_port(host: str, port: int) -> None:
    try:
        with socket.socket(socket.AF_INET, socket.SOCK_STREAM) as s:
            s.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
            s.bind((host, port))
    except OSError as exc:
        raise BindError(f"cannot bind {host}:{port}: {exc}") from exc


def serve(
    cfg: SimConfig,
    port: int,
    host: str = "127.0.0.1",
    *,
    start_paused: bool = False,
    total_steps: int | None = None,
    ui_dir: str | None = None,
) -> None:
    """Run the service until interrupted (or until total_steps completes)."""
    import uvicorn

    check_port(host, port)
    sim = Simulation(cfg)
    app = build_app(sim, start_paused=start_paused, total_steps=total_steps, ui_dir=ui_dir)
    uvicorn.run(app, host=host, port=port, log_level="warning")

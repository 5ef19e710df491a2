"""WebSocket service: frame fanout, command validation, error isolation."""

import json
import socket

import pytest
from starlette.testclient import TestClient

from swarmsim.config import formation9_config, hover_config
from swarmsim.service import BindError, build_app, check_port
from swarmsim.sim import Simulation


def make_app(cfg=None, start_paused=True):
    sim = Simulation(cfg if cfg is not None else hover_config(duration_s=None))
    return build_app(sim, start_paused=start_paused), sim


def recv_until(ws, pred, limit=500):
    """Read frames until pred matches; paused servers keep emitting snapshots."""
    for _ in range(limit):
        frame = json.loads(ws.receive_text())
        if pred(frame):
            return frame
    raise AssertionError("no matching frame arrived")


def test_state_frames_have_wire_schema():
    app, _ = make_app(formation9_config(duration_s=None))
    with TestClient(app) as client, client.websocket_connect("/ws") as ws:
        f = recv_until(ws, lambda f: f["type"] == "state")
        assert f["proto"] == 1
        assert f["paused"] is True and f["tick"] == 0 and f["t"] == 0.0
        assert isinstance(f["rtf"], (int, float, str))
        assert len(f["uavs"]) == 9
        assert sum(u["role"] == "leader" for u in f["uavs"]) == 1


def test_paused_server_does_not_advance():
    app, sim = make_app()
    with TestClient(app) as client, client.websocket_connect("/ws") as ws:
        for _ in range(4):
            f = recv_until(ws, lambda f: f["type"] == "state")
            assert f["tick"] == 0
        assert sim.clock.step_index == 0


def test_step_command_advances_exactly():
    app, sim = make_app()
    with TestClient(app) as client, client.websocket_connect("/ws") as ws:
        recv_until(ws, lambda f: f["type"] == "state")
        ws.send_text(json.dumps({"type": "step", "n": 7}))
        f = recv_until(ws, lambda f: f["type"] == "state" and f["tick"] == 7)
        assert f["paused"] is True
        assert f["t"] == 7 * 0.001
        assert sim.clock.step_index == 7


def test_malformed_json_gets_error_frame_and_connection_survives():
    app, sim = make_app()
    with TestClient(app) as client, client.websocket_connect("/ws") as ws:
        ws.send_text("{not json")
        err = recv_until(ws, lambda f: f["type"] == "error")
        assert err["proto"] == 1 and "JSON" in err["msg"]
        ws.send_text(json.dumps({"type": "step", "n": 3}))
        recv_until(ws, lambda f: f["type"] == "state" and f["tick"] == 3)
        assert sim.clock.step_index == 3


def test_unknown_vehicle_id_rejected_without_state_change():
    app, sim = make_app()
    with TestClient(app) as client, client.websocket_connect("/ws") as ws:
        ws.send_text(json.dumps({"type": "velocity", "id": 99, "v": [5, 0, 0]}))
        err = recv_until(ws, lambda f: f["type"] == "error")
        assert "99" in err["msg"]
        ws.send_text(json.dumps({"type": "step", "n": 200}))
        f = recv_until(ws, lambda f: f["type"] == "state" and f["tick"] == 200)
        # the bad command never reached the sim: still in quiet hover
        v = f["uavs"][0]["v"]
        assert all(abs(x) < 0.01 for x in v)


def test_velocity_command_takes_effect():
    app, _ = make_app()
    with TestClient(app) as client, client.websocket_connect("/ws") as ws:
        ws.send_text(json.dumps({"type": "velocity", "id": 0, "v": [1.0, 0.0, 0.0]}))
        ws.send_text(json.dumps({"type": "step", "n": 3000}))
        f = recv_until(ws, lambda f: f["type"] == "state" and f["tick"] == 3000)
        assert f["uavs"][0]["v"][0] > 0.8


def test_set_rtf_is_echoed_in_frames():
    app, _ = make_app()
    with TestClient(app) as client, client.websocket_connect("/ws") as ws:
        ws.send_text(json.dumps({"type": "set_rtf", "factor": 2.5}))
        recv_until(ws, lambda f: f["type"] == "state" and f["rtf"] == 2.5)
        ws.send_text(json.dumps({"type": "set_rtf", "factor": "unbounded"}))
        recv_until(ws, lambda f: f["type"] == "state" and f["rtf"] == "unbounded")


def test_two_clients_see_the_same_stream():
    app, _ = make_app()
    with TestClient(app) as client:
        with client.websocket_connect("/ws") as a, client.websocket_connect("/ws") as b:
            a.send_text(json.dumps({"type": "step", "n": 5}))
            fa = recv_until(a, lambda f: f["type"] == "state" and f["tick"] == 5)
            fb = recv_until(b, lambda f: f["type"] == "state" and f["tick"] == 5)
            assert fa == fb


def test_resume_runs_freely():
    app, sim = make_app()
    with TestClient(app) as client, client.websocket_connect("/ws") as ws:
        ws.send_text(json.dumps({"type": "set_rtf", "factor": "unbounded"}))
        ws.send_text(json.dumps({"type": "pause", "value": False}))
        f = recv_until(ws, lambda f: f["type"] == "state" and f["tick"] > 500)
        assert f["paused"] is False
        ws.send_text(json.dumps({"type": "pause", "value": True}))
        recv_until(ws, lambda f: f["type"] == "state" and f["paused"])
    assert sim.clock.t == sim.clock.step_index * 0.001


def test_static_ui_mount(tmp_path):
    (tmp_path / "index.html").write_text("<html><body>teleop</body></html>")
    sim = Simulation(hover_config(duration_s=None))
    app = build_app(sim, start_paused=True, ui_dir=str(tmp_path))
    with TestClient(app) as client:
        r = client.get("/")
        assert r.status_code == 200 and "teleop" in r.text


def test_check_port_reports_conflicts():
    with socket.socket(socket.AF_INET, socket.SOCK_STREAM) as s:
        s.bind(("127.0.0.1", 0))
        s.listen(1)
        port = s.getsockname()[1]
        with pytest.raises(BindError):
            check_port("127.0.0.1", port)
    check_port("127.0.0.1", port)  # free again once released

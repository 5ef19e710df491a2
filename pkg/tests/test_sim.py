"""Engine integration: determinism, scheduling, commands, replay, runner."""

import json
import math
import os
import threading
import time

import pytest
from conftest import bundle_digest

from swarmsim.config import SimConfig, VehicleConfig, WorldConfig, formation9_config, hover_config
from swarmsim.evaluation import ape, associate, read_tum
from swarmsim.sim import (
    CommandError,
    IoError,
    SimRunner,
    Simulation,
    replay_transcript,
    run,
    validate_command,
)

from dataclasses import replace


def cfg_with_logs(cfg, log_dir):
    return replace(cfg, log_dir=str(log_dir))


# --- determinism ----------------------------------------------------------------


def test_identical_runs_are_byte_identical(tmp_path):
    base = formation9_config(seed=7, duration_s=3.0)
    run(cfg_with_logs(base, tmp_path / "a"))
    run(cfg_with_logs(base, tmp_path / "b"))
    da = bundle_digest(str(tmp_path / "a"))
    db = bundle_digest(str(tmp_path / "b"))
    assert da == db
    assert len(da) == 9 * 6 + 2  # six files per vehicle + config echo + transcript


def test_seed_changes_noise_but_not_truth(tmp_path):
    run(cfg_with_logs(hover_config(seed=1, duration_s=1.0), tmp_path / "a"))
    run(cfg_with_logs(hover_config(seed=2, duration_s=1.0), tmp_path / "b"))
    da = bundle_digest(str(tmp_path / "a"))
    db = bundle_digest(str(tmp_path / "b"))
    assert da["veh0_imu.csv"] != db["veh0_imu.csv"]  # noise differs
    # noiseless hover truth is seed-independent
    assert da["veh0_gt.tum"] == db["veh0_gt.tum"]


def test_step_n_equals_n_single_steps(tmp_path):
    base = hover_config(seed=3, duration_s=None)
    a = Simulation(cfg_with_logs(base, tmp_path / "a"))
    a.step(1500)
    a.close()
    b = Simulation(cfg_with_logs(base, tmp_path / "b"))
    for _ in range(1500):
        b.step(1)
    b.close()
    assert bundle_digest(str(tmp_path / "a")) == bundle_digest(str(tmp_path / "b"))


def test_time_is_tick_times_dt():
    sim = Simulation(hover_config(duration_s=None))
    sim.step(3000)
    assert sim.clock.t == 3.0  # not 2.9999999999999757


# --- scheduling -------------------------------------------------------------------


def row_count(path):
    with open(path) as fh:
        return sum(1 for line in fh if not line.startswith(("#", "t,")))


def test_sampling_counts_are_exact(tmp_path):
    cfg = cfg_with_logs(hover_config(seed=5, duration_s=2.0), tmp_path)
    run(cfg)
    # rate * T rows, no off-by-one, for every stream
    assert row_count(tmp_path / "veh0_imu.csv") == 500
    assert row_count(tmp_path / "veh0_baro.csv") == 100
    assert row_count(tmp_path / "veh0_mag.csv") == 100
    assert row_count(tmp_path / "veh0_gps.csv") == 20
    assert row_count(tmp_path / "veh0_gt.tum") == 200
    assert row_count(tmp_path / "veh0_vel_tracking.csv") == 200


def test_sample_timestamps(tmp_path):
    cfg = cfg_with_logs(hover_config(seed=5, duration_s=1.0), tmp_path)
    run(cfg)
    with open(tmp_path / "veh0_imu.csv") as fh:
        next(fh)
        ts = [float(line.split(",")[0]) for line in fh]
    assert ts[0] == 0.004  # first fire one full period in
    assert ts[-1] == 1.0
    assert all(abs(b - a - 0.004) < 1e-12 for a, b in zip(ts, ts[1:]))


def test_hover_truth_is_static(tmp_path):
    cfg = cfg_with_logs(hover_config(seed=1, duration_s=2.0), tmp_path)
    sim = run(cfg)
    z0 = cfg.vehicles[0].start[2]
    traj = read_tum(str(tmp_path / "veh0_gt.tum"))
    assert max(abs(s.p[2] - z0) for s in traj.samples) < 1e-3


def test_imu_reads_gravity_at_hover(tmp_path):
    cfg = cfg_with_logs(hover_config(seed=1, duration_s=0.1), tmp_path)
    run(cfg)
    with open(tmp_path / "veh0_imu.csv") as fh:
        next(fh)
        first = [float(x) for x in next(fh).split(",")]
    # truth columns: specific force ~ (0, 0, g), rates ~ 0
    assert abs(first[1]) < 0.05 and abs(first[2]) < 0.05
    assert abs(first[3] - 9.81) < 0.05
    assert all(abs(x) < 0.01 for x in first[4:7])


# --- commands ----------------------------------------------------------------------


def test_validate_rejects_malformed_commands():
    sim = Simulation(formation9_config(duration_s=None))
    bad = [
        "not a dict",
        {"type": 7},
        {"type": "warp"},
        {"type": "velocity", "id": 99, "v": [0, 0, 0]},
        {"type": "velocity", "id": True, "v": [0, 0, 0]},
        {"type": "velocity", "id": 0, "v": [0, 0]},
        {"type": "velocity", "id": 0, "v": [0, 0, float("nan")]},
        {"type": "velocity", "id": 0, "v": [0, 0, 0], "yaw_rate": "fast"},
        {"type": "velocity", "id": 1, "v": [0, 0, 0]},  # formation follower
        {"type": "set_shape", "name": "sphere"},
        {"type": "set_shape"},
        {"type": "pause", "value": 1},
        {"type": "step", "n": 0},
        {"type": "step", "n": 2.5},
        {"type": "set_rtf", "factor": 0},
        {"type": "set_rtf"},
    ]
    for doc in bad:
        with pytest.raises(CommandError):
            validate_command(doc, sim)


def test_validate_accepts_wire_commands():
    sim = Simulation(formation9_config(duration_s=None))
    good = [
        {"type": "velocity", "id": 0, "v": [1, 0, 0], "yaw_rate": 0.5},
        {"type": "takeoff", "id": 3},
        {"type": "land", "id": 0},
        {"type": "set_shape", "name": "pyramid"},
        {"type": "pause"},
        {"type": "pause", "value": False},
        {"type": "step", "n": 50},
        {"type": "set_rtf", "factor": 2.0},
        {"type": "set_rtf", "factor": "unbounded"},
    ]
    for doc in good:
        assert validate_command(doc, sim) is doc


def test_apply_command_rejects_runner_commands():
    sim = Simulation(hover_config(duration_s=None))
    with pytest.raises(CommandError):
        sim.apply_command({"type": "pause"})


def test_set_shape_requires_formation():
    sim = Simulation(hover_config(duration_s=None))
    with pytest.raises(CommandError):
        validate_command({"type": "set_shape", "name": "cube"}, sim)


def test_teleop_velocity_is_body_frame():
    vc = VehicleConfig(id=0, start=(0.0, 0.0, 5.0), yaw=math.pi / 2.0)
    sim = Simulation(SimConfig(vehicles=(vc,)))
    sim.apply_command({"type": "velocity", "id": 0, "v": [1.0, 0.0, 0.0], "yaw_rate": 0.0})
    sim.step(3000)
    v = sim.vehicles[0].state.v
    p = sim.vehicles[0].state.p
    # body +x at yaw 90 deg is world +y
    assert abs(v[1] - 1.0) < 0.1
    assert abs(v[0]) < 0.05
    assert p[1] > 2.0 and abs(p[0]) < 0.3


def test_takeoff_and_land_cycle():
    vc = VehicleConfig(id=0, start=(0.0, 0.0, 0.0))
    sim = Simulation(SimConfig(vehicles=(vc,)))
    sim.step(500)
    assert sim.vehicles[0].state.p == (0.0, 0.0, 0.0)  # parked until commanded
    sim.apply_command({"type": "takeoff", "id": 0})
    sim.step(8000)
    assert abs(sim.vehicles[0].state.p[2] - 2.5) < 0.05
    sim.apply_command({"type": "land", "id": 0})
    sim.step(10000)
    st = sim.vehicles[0].state
    assert st.p[2] == 0.0 and st.v == (0.0, 0.0, 0.0)
    assert sim.vehicles[0].controller.motors_off


# --- formation schedule -------------------------------------------------------------


def short_formation(**kw):
    cfg = formation9_config(duration_s=None)
    return replace(cfg, formation=replace(cfg.formation, **kw))


def test_scheduled_shape_sequence():
    sim = Simulation(short_formation(switch_every=1.0))
    assert sim.frame()["shape"] == "cube"
    sim.step(1000)
    assert sim.frame()["shape"] == "cube"  # switch lands at the 1001st tick
    sim.step(1)
    assert sim.frame()["shape"] == "pyramid"
    sim.step(1000)
    assert sim.frame()["shape"] == "triangle"
    sim.step(3000)
    assert sim.frame()["shape"] == "triangle"  # sequence clamps at the end


def test_manual_set_shape_disables_schedule():
    sim = Simulation(short_formation(switch_every=1.0))
    sim.step(100)
    sim.apply_command({"type": "set_shape", "name": "triangle"})
    sim.step(2000)
    assert sim.frame()["shape"] == "triangle"  # no scheduled override


def test_followers_converge_to_offsets():
    sim = Simulation(formation9_config(duration_s=None))
    sim.step(10_000)
    leader = sim.by_id[sim.cfg.formation.leader_id]
    worst = 0.0
    for i, fid in enumerate(sim.follower_ids):
        veh = sim.by_id[fid]
        off = sim._offsets[i]
        target = tuple(leader.state.p[k] + off[k] for k in range(3))
        worst = max(worst, math.dist(veh.state.p, target))
    assert worst < 0.1


# --- transcript replay ----------------------------------------------------------------


def scripted_session(cfg, ticks_cmds, total):
    sim = Simulation(cfg)
    try:
        by_tick = dict(ticks_cmds)
        for k in range(total):
            if k in by_tick:
                sim.apply_command(by_tick[k])
            sim.step(1)
    finally:
        sim.close()
    return sim


def test_replay_reproduces_live_session(tmp_path):
    base = hover_config(seed=9, duration_s=None)
    cmds = [
        (500, {"type": "velocity", "id": 0, "v": [1.0, 0.0, 0.2], "yaw_rate": 0.3}),
        (1500, {"type": "velocity", "id": 0, "v": [0.0, 0.0, 0.0], "yaw_rate": 0.0}),
        (2200, {"type": "land", "id": 0}),
    ]
    scripted_session(cfg_with_logs(base, tmp_path / "live"), cmds, 3000)
    replay_transcript(
        cfg_with_logs(base, tmp_path / "replay"),
        str(tmp_path / "live" / "commands.jsonl"),
        steps=3000,
    )
    assert bundle_digest(str(tmp_path / "live")) == bundle_digest(str(tmp_path / "replay"))


def test_transcript_records_tick_and_payload(tmp_path):
    cfg = cfg_with_logs(hover_config(seed=1, duration_s=None), tmp_path)
    sim = Simulation(cfg)
    sim.step(42)
    sim.apply_command({"type": "velocity", "id": 0, "v": [1, 0, 0]})
    sim.step(1)
    sim.close()
    rec = json.loads((tmp_path / "commands.jsonl").read_text().strip())
    assert rec["tick"] == 42
    assert rec["cmd"]["type"] == "velocity"


def test_replay_rejects_malformed_transcript(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"cmd": {"type": "land", "id": 0}}\n')
    with pytest.raises(ValueError):
        replay_transcript(hover_config(duration_s=1.0), str(path))


# --- logs and estimator ------------------------------------------------------------


def test_config_echo_scrubs_environment_fields(tmp_path):
    cfg = cfg_with_logs(hover_config(seed=1, duration_s=0.1), tmp_path)
    run(cfg)
    echo = json.loads((tmp_path / "config.json").read_text())
    assert echo["log_dir"] is None
    assert echo["serve"] is None
    assert echo["seed"] == 1


def test_estimator_log_and_accuracy(tmp_path):
    base = hover_config(seed=4, duration_s=10.0)
    veh = replace(base.vehicles[0], estimator="imu_gps")
    cfg = replace(base, vehicles=(veh,), log_dir=str(tmp_path))
    sim = Simulation(cfg)
    sim.apply_command({"type": "velocity", "id": 0, "v": [1.0, 0.0, 0.0], "yaw_rate": 0.1})
    sim.step(10_000)
    sim.close()
    gt = read_tum(str(tmp_path / "veh0_gt.tum"))
    est = read_tum(str(tmp_path / "veh0_est.tum"))
    assert len(est) == len(gt) == 1000
    trans, _ = ape(associate(gt, est, max_dt=0.001))
    assert 0.0 < trans.rmse < 1.0  # dead reckoning with GPS resets: coarse but sane


def test_no_estimator_no_est_file(tmp_path):
    cfg = cfg_with_logs(hover_config(seed=1, duration_s=0.1), tmp_path)
    run(cfg)
    assert not os.path.exists(tmp_path / "veh0_est.tum")


def test_camera_stream_logged(tmp_path):
    base = hover_config(seed=2, duration_s=1.0, with_camera=True)
    cfg = replace(
        base,
        log_dir=str(tmp_path),
        world=WorldConfig(generate_n=200, box_min=(-10.0, -10.0, 0.0), box_max=(10.0, 10.0, 8.0)),
    )
    run(cfg)
    with open(tmp_path / "veh0_camera.csv") as fh:
        next(fh)
        rows = [line.split(",") for line in fh]
    assert rows  # saw something
    ts = sorted({float(r[0]) for r in rows})
    assert all(abs((t / 0.05) - round(t / 0.05)) < 1e-9 for t in ts)  # 20 Hz grid
    uL, uR = float(rows[0][2]), float(rows[0][4])
    assert uL > uR  # positive disparity


def test_unwritable_log_dir_raises(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    cfg = replace(hover_config(duration_s=0.1), log_dir=str(blocker / "sub"))
    with pytest.raises(IoError):
        Simulation(cfg)


def test_run_requires_a_horizon():
    with pytest.raises(Exception):
        run(hover_config(duration_s=None))


# --- frames and runner ----------------------------------------------------------------


def test_frame_schema():
    sim = Simulation(formation9_config(duration_s=None))
    sim.step(40)
    f = sim.frame()
    assert f["proto"] == 1 and f["type"] == "state"
    assert f["tick"] == 40 and f["t"] == 0.04
    assert f["shape"] == "cube"
    assert len(f["uavs"]) == 9
    u = f["uavs"][0]
    assert set(u) == {"id", "p", "v", "q", "role"}
    assert len(u["p"]) == 3 and len(u["q"]) == 4
    roles = {u["role"] for u in f["uavs"]}
    assert roles == {"leader", "follower"}


class FrameSink:
    def __init__(self):
        self.frames = []
        self.event = threading.Event()

    def __call__(self, frame):
        self.frames.append(frame)
        self.event.set()

    def wait_for(self, pred, timeout=5.0):
        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            if any(pred(f) for f in list(self.frames)):
                return True
            time.sleep(0.005)
        return False


def test_runner_paused_emits_snapshots_without_advancing():
    sim = Simulation(hover_config(duration_s=None))
    sink = FrameSink()
    runner = SimRunner(sim, on_frame=sink, start_paused=True)
    runner.start()
    try:
        assert sink.wait_for(lambda f: f["paused"] and f["tick"] == 0)
        time.sleep(0.15)
        assert sim.clock.step_index == 0
        assert all(f["tick"] == 0 for f in sink.frames)
    finally:
        runner.stop()


def test_runner_step_advances_exactly_n():
    sim = Simulation(hover_config(duration_s=None))
    sink = FrameSink()
    runner = SimRunner(sim, on_frame=sink, start_paused=True)
    runner.start()
    try:
        runner.submit({"type": "step", "n": 5})
        deadline = time.monotonic() + 5.0
        while time.monotonic() < deadline and sim.clock.step_index < 5:
            time.sleep(0.005)
        assert sim.clock.step_index == 5
        time.sleep(0.15)
        assert sim.clock.step_index == 5  # still paused afterwards
    finally:
        runner.stop()


def test_runner_resume_and_rtf():
    sim = Simulation(hover_config(duration_s=None))
    sink = FrameSink()
    runner = SimRunner(sim, on_frame=sink, start_paused=True)
    runner.start()
    try:
        runner.submit({"type": "set_rtf", "factor": 2.5})
        runner.submit({"type": "pause", "value": False})
        assert sink.wait_for(lambda f: not f["paused"] and f["tick"] > 0)
        assert sink.wait_for(lambda f: f["rtf"] == 2.5)
    finally:
        runner.stop()


def test_runner_ignores_invalid_submissions():
    sim = Simulation(hover_config(duration_s=None))
    runner = SimRunner(sim, on_frame=None, start_paused=True)
    runner.start()
    try:
        runner.submit({"type": "warp", "to": "mars"})
        runner.submit({"type": "step", "n": 3})
        deadline = time.monotonic() + 5.0
        while time.monotonic() < deadline and sim.clock.step_index < 3:
            time.sleep(0.005)
        assert sim.clock.step_index == 3  # bad command skipped, good one ran
    finally:
        runner.stop()


def test_runner_total_steps_bound():
    sim = Simulation(hover_config(duration_s=None))
    runner = SimRunner(sim, on_frame=None, start_paused=False)
    runner.start(total_steps=250)
    deadline = time.monotonic() + 5.0
    while time.monotonic() < deadline and sim.clock.step_index < 250:
        time.sleep(0.005)
    runner.stop()
    assert sim.clock.step_index == 250

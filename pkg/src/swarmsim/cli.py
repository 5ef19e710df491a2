"""Command-line entry points: run, eval, formation, worldgen."""

from __future__ import annotations

import argparse
import dataclasses
import math
import sys
import time

from . import evaluation, sim as simmod
from .camera import generate_landmarks, save_landmarks
from .config import (
    ConfigError,
    SimConfig,
    formation9_config,
    hover_config,
    load_config,
)
from .formation import BUILTIN_SHAPES, FastSwarm, FollowerLaw
from .geometry import UNBOUNDED

PRESETS = {"hover": hover_config, "formation9": formation9_config}


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="swarmsim",
        description="Deterministic multirotor swarm simulator and evaluation tools.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    pr = sub.add_parser("run", help="run a simulation from a config file or preset")
    pr.add_argument("--config", help="JSON config file")
    pr.add_argument("--preset", choices=sorted(PRESETS), help="built-in scenario")
    pr.add_argument("--steps", type=int, help="number of physics ticks (overrides duration)")
    pr.add_argument("--duration", type=float, help="sim seconds (overrides config)")
    pr.add_argument("--seed", type=int, help="override config seed")
    pr.add_argument("--log-dir", help="override config log directory")
    pr.add_argument("--rtf", help='realtime factor: number or "unbounded"')
    pr.add_argument("--serve", type=int, metavar="PORT", help="expose the WebSocket service")
    pr.add_argument("--host", default="127.0.0.1")
    pr.add_argument("--serve-ui", metavar="DIR", help="also serve a built UI from DIR")
    pr.add_argument("--start-paused", action="store_true")
    pr.add_argument("--transcript", help="replay a recorded command transcript (JSONL)")

    pe = sub.add_parser("eval", help="trajectory accuracy metrics on TUM files")
    pe.add_argument("--mode", choices=["ape", "rpe"], required=True)
    pe.add_argument("--ref", required=True, help="reference (ground truth) TUM file")
    pe.add_argument("--est", required=True, help="estimated TUM file")
    pe.add_argument("--delta", type=float, default=0.5, help="RPE window, meters")
    pe.add_argument("--align", choices=["none", "se3"], default="none")
    pe.add_argument("--max-dt", type=float, default=0.02, help="association tolerance, s")
    pe.add_argument("--out", help="write the JSON report here")

    pf = sub.add_parser("formation", help="leader-follower formation demo/benchmark")
    pf.add_argument("--shape-seq", default="cube,pyramid,triangle")
    pf.add_argument("--sim", choices=["fast", "full"], default="fast")
    pf.add_argument("--switch-every", type=float, default=20.0, help="s per shape")
    pf.add_argument("--agents", type=int, default=8,
                    help="fast sim only; !=8 switches to a grid benchmark layout")
    pf.add_argument("--dt", type=float, default=0.01, help="fast sim step, s")
    pf.add_argument("--seed", type=int, default=7)
    pf.add_argument("--log-dir", help="full sim only")
    pf.add_argument("--benchmark", action="store_true", help="print realtime multiple")

    pw = sub.add_parser("worldgen", help="generate a random landmark world file")
    pw.add_argument("--landmarks", type=int, required=True)
    pw.add_argument("--box", default="-20,-20,0,20,20,10",
                    metavar="XMIN,YMIN,ZMIN,XMAX,YMAX,ZMAX")
    pw.add_argument("--seed", type=int, default=0)
    pw.add_argument("--out", required=True)
    return p


def _load_run_config(args) -> SimConfig:
    if bool(args.config) == bool(args.preset):
        raise ConfigError("specify exactly one of --config or --preset")
    cfg = load_config(args.config) if args.config else PRESETS[args.preset]()
    patch = {}
    if args.seed is not None:
        patch["seed"] = args.seed
    if args.duration is not None:
        patch["duration_s"] = args.duration
    if args.log_dir is not None:
        patch["log_dir"] = args.log_dir
    if args.rtf is not None:
        patch["realtime_factor"] = (
            UNBOUNDED if args.rtf == UNBOUNDED else float(args.rtf)
        )
    return dataclasses.replace(cfg, **patch) if patch else cfg


def _cmd_run(args) -> int:
    cfg = _load_run_config(args)
    steps = args.steps
    if args.serve is not None:
        from .service import serve

        if steps is None and cfg.duration_s is not None:
            steps = round(cfg.duration_s / cfg.dt_physics)
        serve(cfg, args.serve, host=args.host, start_paused=args.start_paused,
              total_steps=steps, ui_dir=args.serve_ui)
        return 0
    t0 = time.monotonic()
    if args.transcript:
        s = simmod.replay_transcript(cfg, args.transcript, steps)
    else:
        s = simmod.run(cfg, steps)
    wall = time.monotonic() - t0
    sim_t = s.clock.t
    rate = sim_t / wall if wall > 0 else float("inf")
    print(f"ran {s.clock.step_index} ticks ({sim_t:.3f} sim-s) in {wall:.2f} s "
          f"({rate:.1f}x realtime)")
    if cfg.log_dir:
        print(f"logs: {cfg.log_dir}")
    return 0


def _cmd_eval(args) -> int:
    ref = evaluation.read_tum(args.ref)
    est = evaluation.read_tum(args.est)
    pairs = evaluation.associate(ref, est, max_dt=args.max_dt)
    if args.mode == "ape":
        trans, rot = evaluation.ape(pairs, align=args.align)
        extra = {"align": args.align}
    else:
        trans, rot = evaluation.rpe(pairs, delta=args.delta)
        extra = {"delta": args.delta}
    doc = evaluation.report_json(args.mode, trans, rot, extra)
    print(doc)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(doc + "\n")
    return 0


def _grid_offsets(n: int, spacing: float = 1.5):
    """Benchmark layout: n points on a square grid around the leader, z=0."""
    side = math.ceil(math.sqrt(n))
    pts = []
    for i in range(n):
        gx, gy = divmod(i, side)
        pts.append((
            (gx - (side - 1) / 2.0) * spacing,
            (gy - (side - 1) / 2.0) * spacing,
            0.0,
        ))
    return tuple(pts)


def _cmd_formation(args) -> int:
    names = [s.strip() for s in args.shape_seq.split(",") if s.strip()]
    for n in names:
        if n not in BUILTIN_SHAPES:
            raise ConfigError(f"unknown shape {n!r}")

    if args.sim == "full":
        cfg = formation9_config(seed=args.seed)
        cfg = dataclasses.replace(
            cfg,
            formation=dataclasses.replace(
                cfg.formation, shapes=tuple(names), switch_every=args.switch_every
            ),
            duration_s=args.switch_every * len(names),
            log_dir=args.log_dir,
        )
        s = simmod.Simulation(cfg)
        dt = cfg.dt_physics
        phase_steps = round(args.switch_every / dt)
        try:
            for i, name in enumerate(names):
                t0 = time.monotonic()
                s.step(phase_steps)
                leader = s.by_id[cfg.formation.leader_id]
                errs = []
                for j, fid in enumerate(s.follower_ids):
                    veh = s.by_id[fid]
                    off = s._offsets[j]
                    tgt = (leader.state.p[0] + off[0], leader.state.p[1] + off[1],
                           leader.state.p[2] + off[2])
                    errs.append(math.dist(veh.state.p, tgt))
                wall = time.monotonic() - t0
                print(f"{name}: max follower error {max(errs):.4f} m after "
                      f"{args.switch_every:.0f} s ({args.switch_every / wall:.1f}x realtime)")
        finally:
            s.close()
        return 0

    # fast point-mass sim
    if args.agents == 8:
        offsets = BUILTIN_SHAPES[names[0]].offsets
    else:
        offsets = _grid_offsets(args.agents)
    swarm = FastSwarm(offsets, FollowerLaw(), dt=args.dt, leader_start=(0.0, 0.0, 5.0))
    # start displaced so convergence is visible
    swarm.p = swarm.p * 1.6
    phase_steps = round(args.switch_every / args.dt)
    t0 = time.monotonic()
    for i, name in enumerate(names if args.agents == 8 else names[:1]):
        if args.agents == 8 and i > 0:
            swarm.set_offsets(BUILTIN_SHAPES[name].offsets)
        swarm.step(phase_steps)
        print(f"{name}: max follower error {float(swarm.errors().max()):.4f} m "
              f"after {args.switch_every:.0f} s")
    wall = time.monotonic() - t0
    sim_s = swarm.t
    if args.benchmark:
        print(f"{args.agents} agents: {sim_s:.0f} sim-s in {wall:.3f} s "
              f"({sim_s / wall:.0f}x realtime)")
    return 0


def _cmd_worldgen(args) -> int:
    vals = [float(x) for x in args.box.split(",")]
    if len(vals) != 6:
        raise ConfigError("--box needs 6 comma-separated numbers")
    lms = generate_landmarks(args.landmarks, tuple(vals[:3]), tuple(vals[3:]), args.seed)
    save_landmarks(lms, args.out)
    print(f"wrote {len(lms)} landmarks to {args.out}")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "eval":
            return _cmd_eval(args)
        if args.command == "formation":
            return _cmd_formation(args)
        if args.command == "worldgen":
            return _cmd_worldgen(args)
    except (
        ConfigError,
        FileNotFoundError,
        evaluation.DegenerateAlignment,
        evaluation.NoOverlap,
        evaluation.NonMonotonicTime,
        evaluation.ParseError,
        evaluation.PathTooShort,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Command line: run suites, replay traces, summarise records, render maps."""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from .config import PROFILES, load_config
from .domains import FAMILIES
from .agent import run_episode
from .harness import (compute_metrics, episode_from_trace, evaluate, generate_episodes,
                      read_records, read_trace, run_suite, trace_lines, write_records)
from .navigation import OccupancyGrid

RECORDS = "records.jsonl"


def _cmd_run(args) -> int:
    run = load_config(args.config, profile=args.profile, workers=args.workers)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    episodes = generate_episodes(args.task, args.episodes, args.seed, run, policy=args.policy,
                                 snapshots=not args.no_snapshots)
    records = run_suite(episodes, run.workers, out / "traces")
    write_records(records, out / RECORDS)
    table = compute_metrics(records).table(f"{args.task}/{run.profile}/{args.policy}")
    (out / "summary.txt").write_text(table, encoding="utf-8")
    print(table, end="")
    print(f"{len(records)} episodes in {time.perf_counter() - t0:.1f}s; records in {out / RECORDS}")
    return 0


def _cmd_replay(args) -> int:
    path = Path(args.trace)
    header, steps, end = read_trace(path)
    episode = episode_from_trace(header, snapshots=bool(steps) and "belief" in steps[0])
    outcome = run_episode(episode.world, episode.config, episode.agent_seed)
    record = evaluate(episode, outcome)
    fresh = trace_lines(episode, outcome, record)
    for rec in outcome.trace:
        action = rec.get("action", "")
        print(f"{rec['i']:4d} {rec['mode']:<8} {rec['op']:<24} {str(rec.get('ok', '')):<6} {action}")
    print(f"status={outcome.status} ground_truth_success={record.ground_truth_success} "
          f"steps={outcome.steps_used}")
    old = path.read_text(encoding="utf-8").splitlines()
    for n, (a, b) in enumerate(zip(old, fresh)):
        if a != b:
            print(f"diverged from the recorded trace at line {n + 1}")
            return 1
    if len(old) != len(fresh):
        print("diverged from the recorded trace: different length")
        return 1
    print("reproduced the recorded trace exactly")
    return 0


def _cmd_metrics(args) -> int:
    path = Path(args.inp)
    if path.is_dir():
        path = path / RECORDS
    records = read_records(path)
    print(compute_metrics(records).table(path.parent.name), end="")
    return 0


def _agent_cell(text: str):
    lines = text.rstrip("\n").split("\n")
    for r, line in enumerate(lines):
        i = line.find("A")
        if i >= 0:
            return (i, len(lines) - 1 - r)
    return None


def _cmd_render(args) -> int:
    _, _, end = read_trace(args.trace)
    text = end["occupancy"]
    if args.format == "txt":
        data = text.encode("utf-8")
    else:
        data = OccupancyGrid.from_text(text).to_pgm(_agent_cell(text), scale=args.scale)
    if args.out:
        Path(args.out).write_bytes(data)
    else:
        sys.stdout.buffer.write(data)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ogamus", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="generate and run a suite of episodes")
    r.add_argument("--task", choices=FAMILIES, required=True)
    r.add_argument("--episodes", type=int, default=10)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--profile", choices=PROFILES, default=None)
    r.add_argument("--config", default=None, help="YAML file overriding any threshold")
    r.add_argument("--out", default="runs/latest")
    r.add_argument("--workers", type=int, default=None)
    r.add_argument("--policy", choices=("ogamus", "random"), default="ogamus")
    r.add_argument("--no-snapshots", action="store_true",
                   help="leave per-step belief snapshots out of the traces")
    r.set_defaults(fn=_cmd_run)

    rp = sub.add_parser("replay", help="re-run the episode of a trace and compare")
    rp.add_argument("--trace", required=True)
    rp.set_defaults(fn=_cmd_replay)

    m = sub.add_parser("metrics", help="summarise a records file or run directory")
    m.add_argument("--in", dest="inp", required=True)
    m.set_defaults(fn=_cmd_metrics)

    rd = sub.add_parser("render", help="draw the final occupancy map of a trace")
    rd.add_argument("--trace", required=True)
    rd.add_argument("--format", choices=("txt", "pgm"), default="txt")
    rd.add_argument("--scale", type=int, default=4)
    rd.add_argument("--out", default=None)
    rd.set_defaults(fn=_cmd_render)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    raise SystemExit(main())

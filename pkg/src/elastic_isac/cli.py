"""Command line entry point: ``train``, ``eval`` and ``baseline`` runs writing plot-ready CSVs."""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import RunConfig, load_config
from .runner import METRIC_COLUMNS, Runner, moving_average

BASELINE_SCHEMES = {"ccn": "ccn", "cfn": "cfn", "random": "random"}


@dataclass(frozen=True)
class RunManifest:
    command: str
    config: str | None
    seed: int
    episodes: int
    out: Path
    checkpoint: Path | None
    checkpoint_every: int
    baseline: str | None
    ma_window: int
    wall_time: bool


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


class CsvLog:
    """Append-only CSV with a header; every row is flushed so a crash leaves a readable prefix."""

    def __init__(self, path: Path, columns):
        self.columns = list(columns)
        self.fh = open(path, "w", newline="", encoding="utf-8")
        self.writer = csv.writer(self.fh)
        self.writer.writerow(self.columns)
        self.fh.flush()

    def write(self, row: dict) -> None:
        self.writer.writerow([_fmt(row[c]) for c in self.columns])
        self.fh.flush()

    def close(self) -> None:
        self.fh.close()


def _config(m: RunManifest) -> RunConfig:
    return load_config(m.config) if m.config else RunConfig()


def _finite(rows) -> bool:
    return all(math.isfinite(float(v)) for r in rows for v in r.values() if isinstance(v, (int, float)))


def _summary(m: RunManifest, scheme: str, rows: list[dict]) -> dict:
    usr = [r["usr"] for r in rows]
    ma = moving_average(usr, m.ma_window) if rows else np.zeros(0)
    return {
        "command": m.command,
        "scheme": scheme,
        "seed": m.seed,
        "episodes": len(rows),
        "ma_window": m.ma_window,
        "usr_first_window": float(np.mean(usr[: m.ma_window])) if rows else None,
        "usr_final_ma": float(ma[-1]) if len(ma) else None,
        "usr_best_ma": float(ma.max()) if len(ma) else None,
        "overhead_mean": float(np.mean([r["overhead"] for r in rows])) if rows else None,
        "streams": ["perturb", "channel", "estimation", "federation", "motion", "posterior", "init", "policy",
                    "baseline"],
    }


def _training_run(m: RunManifest, scheme: str) -> int:
    cfg = _config(m)
    m.out.mkdir(parents=True, exist_ok=True)
    runner = Runner(cfg, scheme, m.seed, total_updates=m.episodes)
    if m.checkpoint is not None and m.checkpoint.exists() and m.command == "train":
        runner.load(m.checkpoint)
    ckpt = m.checkpoint or (m.out / "checkpoint.bin")
    log = CsvLog(m.out / "metrics.csv", METRIC_COLUMNS)
    rows = []
    try:
        for ep in range(m.episodes):
            t0 = time.perf_counter()
            rec = runner.run_episode(ep, train=True)
            wall = (time.perf_counter() - t0) * 1000.0 if m.wall_time else 0.0
            row = rec.metrics(m.seed, wall)
            log.write(row)
            rows.append(row)
            if runner.learner is not None and m.checkpoint_every and (ep + 1) % m.checkpoint_every == 0:
                runner.save(ckpt)
    finally:
        log.close()
    if runner.learner is not None:
        runner.save(ckpt)
    (m.out / "summary.json").write_text(json.dumps(_summary(m, scheme, rows), indent=2, sort_keys=True))
    return 0 if _finite(rows) else 1


def run_train(m: RunManifest) -> int:
    return _training_run(m, "proposed")


def run_baseline(m: RunManifest) -> int:
    if m.baseline not in BASELINE_SCHEMES:
        raise SystemExit("baseline requires --baseline {ccn,cfn,random}")
    return _training_run(m, BASELINE_SCHEMES[m.baseline])


def run_eval(m: RunManifest) -> int:
    cfg = _config(m)
    scheme = BASELINE_SCHEMES.get(m.baseline, "proposed") if m.baseline else "proposed"
    runner = Runner(cfg, scheme, m.seed)
    if m.checkpoint is not None:
        runner.load(m.checkpoint)
    elif runner.learner is not None:
        print("note: no checkpoint given, evaluating freshly initialised policies", file=sys.stderr)
    m.out.mkdir(parents=True, exist_ok=True)
    c = cfg.scenario
    frame_cols = (["episode", "frame", "U", "S", "USR", "reward", "comm_utility", "sense_utility"]
                  + [f"rate_{k}" for k in range(c.M * c.K)]
                  + [f"pos_err_{q}" for q in range(c.M * c.Q)] + [f"vel_err_{q}" for q in range(c.M * c.Q)]
                  + [f"O1_{m_}" for m_ in range(c.M)] + [f"O2_{m_}" for m_ in range(c.M)]
                  + [f"OF_{r}" for r in range(c.R)])
    log = CsvLog(m.out / "metrics.csv", METRIC_COLUMNS)
    detail = CsvLog(m.out / "frames.csv", frame_cols)
    rows = []
    try:
        for ep in range(m.episodes):
            t0 = time.perf_counter()
            rec = runner.run_episode(ep, train=False, greedy=True)
            wall = (time.perf_counter() - t0) * 1000.0 if m.wall_time else 0.0
            row = rec.metrics(m.seed, wall)
            log.write(row)
            rows.append(row)
            for d in rec.frames:
                fr = {"episode": ep, "frame": d["frame"], "U": d["U"], "S": d["S"], "USR": d["USR"],
                      "reward": d["reward"], "comm_utility": d["comm_utility"], "sense_utility": d["sense_utility"]}
                fr.update({f"rate_{k}": float(v) for k, v in enumerate(d["rates"])})
                fr.update({f"pos_err_{q}": float(v) for q, v in enumerate(d["pos_err"])})
                fr.update({f"vel_err_{q}": float(v) for q, v in enumerate(d["vel_err"])})
                fr.update({f"O1_{i}": v for i, v in enumerate(d["O1"])})
                fr.update({f"O2_{i}": v for i, v in enumerate(d["O2"])})
                fr.update({f"OF_{i}": v for i, v in enumerate(d["OF"])})
                detail.write(fr)
    finally:
        log.close()
        detail.close()
    (m.out / "summary.json").write_text(json.dumps(_summary(m, scheme, rows), indent=2, sort_keys=True))
    return 0 if _finite(rows) else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="elastic-isac", description=__doc__)
    p.add_argument("command", choices=("train", "eval", "baseline"))
    p.add_argument("--config", default=None, help="TOML config; defaults to the full-size parameters")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--episodes", type=int, default=100)
    p.add_argument("--out", default="runs/latest")
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--checkpoint-every", type=int, default=0)
    p.add_argument("--baseline", choices=tuple(BASELINE_SCHEMES), default=None)
    p.add_argument("--ma-window", type=int, default=40)
    p.add_argument("--wall-time", action="store_true", help="record wall-clock ms per episode (breaks byte equality)")
    return p


def main(argv=None) -> int:
    a = build_parser().parse_args(argv)
    if a.episodes < 1:
        raise SystemExit("--episodes must be >= 1")
    m = RunManifest(a.command, a.config, a.seed, a.episodes, Path(a.out),
                    Path(a.checkpoint) if a.checkpoint else None, a.checkpoint_every, a.baseline, a.ma_window,
                    a.wall_time)
    try:
        handler = {"train": run_train, "eval": run_eval, "baseline": run_baseline}[a.command]
        return handler(m)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

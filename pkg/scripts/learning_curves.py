"""Train every scheme at desk scale and write one metrics CSV per scheme plus a summary.

    python scripts/learning_curves.py --episodes 2000 --out runs/curves
"""
from __future__ import annotations

import argparse
import csv
import json
import time
from pathlib import Path

import numpy as np

from elastic_isac.config import load_config
from elastic_isac.runner import METRIC_COLUMNS, moving_average, train

ROOT = Path(__file__).resolve().parents[1]


def run(config: Path, episodes: int, seed: int, window: int, out: Path, schemes=("proposed", "ccn", "cfn", "random")):
    cfg = load_config(config)
    out.mkdir(parents=True, exist_ok=True)
    summary = {}
    for scheme in schemes:
        t0 = time.perf_counter()
        n = episodes if scheme != "random" else min(episodes, 200)
        _, rows = train(cfg, scheme, seed, n)
        with open(out / f"{scheme}.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(METRIC_COLUMNS)
            for r in rows:
                w.writerow([repr(r[c]) if isinstance(r[c], float) else r[c] for c in METRIC_COLUMNS])
        usr = np.array([r["usr"] for r in rows])
        ma = moving_average(usr, window)
        summary[scheme] = {
            "episodes": n,
            "first_window": float(usr[:window].mean()),
            "final_ma": float(ma[-1]),
            "best_ma": float(ma.max()),
            "seconds": time.perf_counter() - t0,
        }
        print(scheme, json.dumps(summary[scheme]), flush=True)
    (out / "summary.json").write_text(json.dumps(summary, indent=2))
    return summary


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--config", type=Path, default=ROOT / "configs" / "desk.toml")
    p.add_argument("--episodes", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--window", type=int, default=40)
    p.add_argument("--out", type=Path, default=Path("runs/curves"))
    a = p.parse_args()
    run(a.config, a.episodes, a.seed, a.window, a.out)


if __name__ == "__main__":
    main()

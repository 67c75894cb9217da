"""E1(a, T) against the claim rate nu with nu * mbar fixed, plus its closed-form
limit as a approaches the fluid value."""

import argparse
from pathlib import Path

from clientruin.attribution import attribution_sweep
from clientruin.cli import write_csv
from clientruin.model import load_config

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="out/fig2")
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()
    params, raw = load_config(ROOT / "configs" / "attribution.yaml")
    cfg = raw["attribution"]
    rows = attribution_sweep(params, cfg["a"], cfg["nu"], cfg["T"], jobs=args.jobs)
    write_csv(Path(args.out) / "attribution.csv", ["nu", "a", "e1", "e1_limit"],
              [(r["nu"], r["a"], r["e1"], r["e1_limit"]) for r in rows])
    for nu in cfg["nu"]:
        cells = [r for r in rows if r["nu"] == nu]
        line = "  ".join(f"{r['e1']:.3f}" for r in cells)
        print(f"nu={nu:8.3f}  limit={cells[0]['e1_limit']:.3f}  e1: {line}")


if __name__ == "__main__":
    main()

"""Most likely paths to ruin over a sweep of horizons, for both client dynamics.

Writes one CSV per (dynamics, T) with columns s, f_star, g_star, f_bar, g_bar
and a summary of rate against T.
"""

import argparse
from pathlib import Path

import numpy as np

from clientruin.cli import write_csv
from clientruin.model import load_config
from clientruin.pathsolver import RuinQuery, decay_rate, most_likely_path

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="out/fig1")
    ap.add_argument("--d", type=int, default=64)
    args = ap.parse_args()
    out = Path(args.out)
    summary = []
    for name in ("top_row", "bottom_row"):
        params, raw = load_config(ROOT / "configs" / f"{name}.yaml")
        u = raw["query"]["u"]
        rho, t_star = decay_rate(params, u)
        print(f"{name}: rho* = {rho:.4f} at t* = {t_star:.4f}")
        for T in raw["query"]["T_list"]:
            mlp = most_likely_path(params, RuinQuery(u, T, "ruin", args.d))
            write_csv(out / f"{name}_T{T:g}.csv", ["s", "f_star", "g_star", "f_bar", "g_bar"], mlp.rows())
            dev = mlp.path.f - mlp.f_bar
            summary.append((name, T, mlp.rate, float(dev[1:-1].min()), float(dev[1:-1].max())))
            print(f"  T={T:4.1f}  rate={mlp.rate:.4f}  f*-fbar in [{dev.min():+.4f}, {dev.max():+.4f}]")
        summary.append((name, "t_star", rho, t_star, np.nan))
    write_csv(out / "rates.csv", ["dynamics", "T", "rate", "min_dev", "max_dev"], summary)


if __name__ == "__main__":
    main()

"""Monte Carlo ruin probabilities at several n against the large-deviation rate."""

import argparse
from pathlib import Path

from clientruin.cli import write_csv
from clientruin.model import load_config
from clientruin.pathsolver import decay_rate
from clientruin.simulate import empirical_decay

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default=str(ROOT / "configs" / "small_surplus.yaml"))
    ap.add_argument("--replications", type=int, default=None)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--out", default="out/ldp_vs_mc")
    args = ap.parse_args()
    params, raw = load_config(args.config)
    sim = raw["sim"]
    u, T = sim["u"], sim["T"]
    reps = args.replications or sim["replications"]
    rho, t_star = decay_rate(params, u, T)
    fit = empirical_decay(params, u, T, sim["n_list"], reps, seed=sim["seed"], jobs=args.jobs)
    rows = []
    for row in fit.table:
        e = row["estimate"]
        rows.append((row["n"], e.p_hat, e.ci_low, e.ci_high, e.hits, row["rate"]))
        print(f"n={row['n']:3d}  p={e.p_hat:.3e}  [{e.ci_low:.3e}, {e.ci_high:.3e}]  -log(p)/n={row['rate']:.4f}")
    print(f"rate from the variational problem: {rho:.4f} (t* = {t_star:.3f})")
    print(f"regression slope of -log p on n:  {fit.slope:.4f}  ({abs(fit.slope - rho) / rho:.1%} off)")
    write_csv(Path(args.out) / "ldp_vs_mc.csv", ["n", "p_hat", "ci_low", "ci_high", "hits", "rate"], rows)


if __name__ == "__main__":
    main()

"""Command-line entry point: decay, path, attribute, simulate, verify.

Values come from the config file's ``model``, ``query``, ``sim`` and
``solver`` sections; command-line flags override them. Every command writes
``manifest.json`` next to its outputs.
"""

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

from . import __version__
from .model import load_config

EXIT_OK, EXIT_USAGE, EXIT_SOLVER, EXIT_VERIFY = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _floats(text):
    return [float(x) if x not in ("inf", "infinity") else math.inf for x in text.split(",") if x.strip()]


def _horizon(text):
    return math.inf if text.lower() in ("inf", "infinity") else float(text)


def _jsonable(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _clean(obj):
    # json writes inf as Infinity; keep files strict JSON
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (float, np.floating)) and not math.isfinite(float(obj)):
        return str(float(obj))
    return obj


def write_atomic(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    with os.fdopen(fd, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def write_json(path, obj):
    write_atomic(path, json.dumps(_clean(obj), indent=2, default=_jsonable) + "\n")


def write_csv(path, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    write_atomic(path, buf.getvalue())


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _section(raw, name):
    return dict(raw.get(name) or {})


def _pick(flag, section, key, default=None):
    if flag is not None:
        return flag
    return section.get(key, default)


def build_parser():
    p = _Parser(prog="clientruin", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--config", required=True, help="YAML or JSON config file")
        sp.add_argument("--out", default="out", help="output directory (default: out)")
        sp.add_argument("--dry-run", action="store_true", help="print the resolved plan and exit")
        sp.add_argument("--jobs", type=int, default=None, help="worker processes")

    d = sub.add_parser("decay", help="ruin decay rate and optimal horizon")
    common(d)
    d.add_argument("--u", type=float)
    d.add_argument("--T", type=_horizon, help="horizon, or 'inf'")
    d.add_argument("--nodes", type=int, help="coarse scan nodes")

    pa = sub.add_parser("path", help="most likely paths for a list of horizons")
    common(pa)
    pa.add_argument("--u", type=float)
    pa.add_argument("--T", type=_floats, help="comma-separated horizons")
    pa.add_argument("--d", type=int, help="output cells per path")

    at = sub.add_parser("attribute", help="client-count share of capital fluctuations")
    common(at)
    at.add_argument("--T", type=float)
    at.add_argument("--a", type=_floats, help="comma-separated terminal targets")
    at.add_argument("--nu", type=_floats, help="comma-separated claim rates")
    at.add_argument("--d", type=int)

    si = sub.add_parser("simulate", help="Monte Carlo ruin probability")
    common(si)
    si.add_argument("--u", type=float)
    si.add_argument("--n", type=int)
    si.add_argument("--T", type=float)
    si.add_argument("--replications", type=int)
    si.add_argument("--seed", type=int)
    si.add_argument("--trajectories", type=int, default=None, help="number of trajectories to dump")

    ve = sub.add_parser("verify", help="run the cross-module check suite")
    common(ve)
    ve.add_argument("--mc-replications", type=int, default=None)
    ve.add_argument("--skip-mc", action="store_true", help="leave out the Monte Carlo check")
    return p


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _plan_decay(args, raw):
    q, s = _section(raw, "query"), _section(raw, "solver")
    return {
        "u": float(_pick(args.u, q, "u")),
        "T": _horizon(str(_pick(args.T, q, "T", "inf"))),
        "nodes": int(_pick(args.nodes, s, "scan_nodes", 64)),
    }


def _run_decay(params, plan, out):
    from .pathsolver import decay_rate

    res = decay_rate(params, plan["u"], plan["T"], nodes=plan["nodes"])
    write_json(out / "decay.json", {"rho": res.rho, "t_star": res.t_star, "u": plan["u"], "T": plan["T"]})
    write_csv(out / "decay_curve.csv", ["t", "rho"], zip(res.ts, res.rhos))
    return ["decay.json", "decay_curve.csv"], {"rho": res.rho, "t_star": res.t_star}


def _plan_path(args, raw):
    q, s = _section(raw, "query"), _section(raw, "solver")
    Ts = args.T if args.T is not None else q.get("T_list", [q.get("T", 1.0)])
    return {"u": float(_pick(args.u, q, "u")), "T": [float(t) for t in Ts], "d": int(_pick(args.d, s, "d", 64))}


def _run_path(params, plan, out):
    from .pathsolver import RuinQuery, most_likely_path

    files, rates = [], []
    for T in plan["T"]:
        mlp = most_likely_path(params, RuinQuery(plan["u"], T, "ruin", plan["d"]))
        name = f"path_T{T:g}.csv"
        write_csv(out / name, ["s", "f_star", "g_star", "f_bar", "g_bar"], mlp.rows())
        files.append(name)
        rates.append((T, mlp.rate))
    write_csv(out / "path_rates.csv", ["T", "rate"], rates)
    files.append("path_rates.csv")
    best = min(rates, key=lambda r: r[1])
    return files, {"rates": rates, "best_T": best[0], "best_rate": best[1]}


def _plan_attribute(args, raw):
    from .attribution import SWEEP_A, SWEEP_NU

    q, s = _section(raw, "attribution"), _section(raw, "solver")
    return {
        "T": float(_pick(args.T, q, "T", 1.0)),
        "a": [float(a) for a in _pick(args.a, q, "a", SWEEP_A)],
        "nu": [float(v) for v in _pick(args.nu, q, "nu", SWEEP_NU)],
        "d": int(_pick(args.d, s, "d", 64)),
    }


def _run_attribute(params, plan, out, jobs):
    from .attribution import attribution_sweep

    rows = attribution_sweep(params, plan["a"], plan["nu"], plan["T"], plan["d"], jobs=jobs)
    write_csv(out / "attribution.csv", ["nu", "a", "e1", "e1_limit"], [(r["nu"], r["a"], r["e1"], r["e1_limit"]) for r in rows])
    failed = [r for r in rows if r["error"]]
    for r in failed:
        print(f"warning: nu={r['nu']} a={r['a']}: {r['error']}", file=sys.stderr)
    return ["attribution.csv"], {"cells": len(rows), "failed": len(failed)}


def _plan_simulate(args, raw):
    sim, q = _section(raw, "sim"), _section(raw, "query")
    return {
        "u": float(_pick(args.u, sim, "u", q.get("u"))),
        "n": int(_pick(args.n, sim, "n", 20)),
        "T": float(_pick(args.T, sim, "T", 5.0)),
        "replications": int(_pick(args.replications, sim, "replications", 10000)),
        "seed": int(_pick(args.seed, sim, "seed", 0)),
        "trajectories": int(_pick(args.trajectories, sim, "trajectories", 10)),
        "record_grid": [float(x) for x in sim.get("record_grid", np.linspace(0, 5.0, 21)[1:].tolist())],
    }


def _run_simulate(params, plan, out, jobs):
    from .simulate import SimConfig, estimate_ruin_probability, sample_trajectory

    cfg = SimConfig(plan["n"], plan["T"], plan["replications"], plan["seed"], jobs=jobs)
    est = estimate_ruin_probability(params, cfg, plan["u"])
    payload = est.to_dict()
    payload.pop("wall_clock")
    write_json(out / "estimate.json", payload)
    grid = tuple(t for t in plan["record_grid"] if t <= plan["T"])
    tcfg = SimConfig(plan["n"], plan["T"], max(plan["trajectories"], 1), plan["seed"], record_grid=grid)
    rows = []
    for i in range(plan["trajectories"]):
        tr = sample_trajectory(params, tcfg, i, plan["u"])
        rows += [(i, t, F, G) for t, F, G in zip(tr.times, tr.F, tr.G)]
    write_csv(out / "trajectories.csv", ["replication", "t", "F", "G"], rows)
    return ["estimate.json", "trajectories.csv"], {"p_hat": est.p_hat, "hits": est.hits, "wall_clock": est.wall_clock}


def _plan_verify(args, raw):
    q, v = _section(raw, "query"), _section(raw, "verify")
    return {
        "u": float(q.get("u", 5.0)),
        "T": float(v.get("path_T", 1.0)),
        "mc_replications": int(_pick(args.mc_replications, v, "mc_replications", 200_000)),
        "include_mc": not args.skip_mc,
    }


def _run_verify(params, plan, out, jobs):
    from .verify import run_suite

    checks = run_suite(params, plan["u"], plan["T"], plan["mc_replications"], jobs, plan["include_mc"])
    report = {"passed": all(c.passed for c in checks), "checks": [c.to_dict() for c in checks]}
    write_json(out / "verify.json", report)
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name}")
    return ["verify.json"], {"passed": report["passed"]}


PLANS = {
    "decay": _plan_decay,
    "path": _plan_path,
    "attribute": _plan_attribute,
    "simulate": _plan_simulate,
    "verify": _plan_verify,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        params, raw = load_config(args.config)
        plan = PLANS[args.command](args, raw)
    except (OSError, KeyError, TypeError, ValueError) as exc:
        print(f"clientruin: bad configuration: {exc}", file=sys.stderr)
        return EXIT_USAGE
    jobs = int(args.jobs or _section(raw, "sim").get("jobs", 1))
    out = Path(args.out)
    if args.dry_run:
        print(json.dumps(_clean({"command": args.command, "config": args.config, "model": params.to_dict(),
                                 "plan": plan, "jobs": jobs, "out": str(out)}), indent=2, default=_jsonable))
        return EXIT_OK

    t0 = time.perf_counter()
    status = EXIT_OK
    try:
        if args.command == "decay":
            files, summary = _run_decay(params, plan, out)
        elif args.command == "path":
            files, summary = _run_path(params, plan, out)
        elif args.command == "attribute":
            files, summary = _run_attribute(params, plan, out, jobs)
        elif args.command == "simulate":
            files, summary = _run_simulate(params, plan, out, jobs)
        else:
            files, summary = _run_verify(params, plan, out, jobs)
            status = EXIT_OK if summary["passed"] else EXIT_VERIFY
    except (ArithmeticError, ValueError, RuntimeError) as exc:
        write_json(out / "error.json", {"command": args.command, "error": type(exc).__name__, "message": str(exc), "plan": plan})
        print(f"clientruin: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER

    manifest = {
        "command": args.command,
        "config": str(Path(args.config).resolve()),
        "model": params.to_dict(),
        "plan": plan,
        "outputs": [str((out / f).resolve()) for f in files],
        "seed": plan.get("seed"),
        "version": __version__,
        "wall_clock": time.perf_counter() - t0,
        "summary": summary,
    }
    write_json(out / "manifest.json", manifest)
    print(json.dumps(_clean(summary), default=_jsonable))
    return status


if __name__ == "__main__":
    sys.exit(main())

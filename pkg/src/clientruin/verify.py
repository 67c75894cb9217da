"""Cross-module consistency checks, each returning a pass/fail record."""

from dataclasses import asdict, dataclass

import numpy as np
from scipy.stats import chisquare, poisson

from . import mgf
from .distributions import Excess
from .mgf import DualVector, TimeGrid
from .model import fluid_claims, fluid_population, log_phi
from .pathsolver import RuinQuery, decay_rate, most_likely_path, most_likely_path_variational
from .ratefn import PathGrid, k_local, rate_f, rate_multi, rate_one_point, rate_sample_path
from .simulate import SimConfig, empirical_decay, sample_trajectory


@dataclass
class Check:
    name: str
    passed: bool
    detail: dict

    def to_dict(self):
        return asdict(self)


def _rng(seed):
    return np.random.default_rng(seed)


def random_duals(params, rng, d, t_max=3.0):
    times = np.sort(rng.uniform(0.1, t_max, d))
    while np.any(np.diff(times) < 1e-3):
        times = np.sort(rng.uniform(0.1, t_max, d))
    omega = rng.normal(0.0, 0.7, d)
    hi = min(0.8, 0.8 * params.theta_max) / d
    theta = rng.uniform(-1.0 / d, hi, d)
    return TimeGrid(times), DualVector(omega, theta)


def check_normalization(params, tol=1e-9):
    T = 2.0
    grid = TimeGrid([0.5, 1.2, T])
    zero = DualVector.zeros(3)
    zf = mgf.DualFunction.from_callables(T, lambda s: 0 * s, lambda s: 0 * s)
    vals = {
        "m_minus_one": mgf.m_minus_one(params, T, 0.0, 0.0),
        "m_plus_one": mgf.m_plus_one(params, T, 0.0, 0.0),
        "m_minus_multi": mgf.m_minus_multi(params, grid, zero),
        "m_plus_multi": mgf.m_plus_multi(params, grid, zero),
        "m_minus_limit": mgf.m_minus_limit(params, zf),
        "m_plus_limit": mgf.m_plus_limit(params, zf),
    }
    err = max(abs(v - 1.0) for v in vals.values())
    return Check("mgf normalization", err < tol, {"max_error": err})


def check_one_point_equivalence(params, cases=100, seed=7, tol=1e-10):
    """Errors are scaled by max(1, |value|); mgfs in the hundreds of
    thousands cannot agree to 1e-10 absolutely in double precision."""
    rng = _rng(seed)
    worst = worst_abs = 0.0
    for _ in range(cases):
        grid, duals = random_duals(params, rng, 1)
        t, w, th = grid.times[0], duals.omega[0], duals.theta[0]
        pairs = [(mgf.m_minus_multi(params, grid, duals), mgf.m_minus_one(params, t, w, th)),
                 (mgf.m_plus_multi(params, grid, duals), mgf.m_plus_one(params, t, w, th))]
        for a, b in pairs:
            worst_abs = max(worst_abs, abs(a - b))
            worst = max(worst, abs(a - b) / max(1.0, abs(b)))
    return Check("multi-point mgfs at d=1 equal one-point mgfs", worst < tol,
                 {"cases": cases, "max_error": worst, "max_abs_error": worst_abs})


def check_rate_multi_equivalence(params, seed=11, cases=3, tol=1e-8):
    rng = _rng(seed)
    worst = 0.0
    for _ in range(cases):
        t = rng.uniform(0.5, 3.0)
        f = fluid_population(params, t) * rng.uniform(0.7, 1.4) + 0.05
        g = fluid_claims(params, t) + rng.uniform(-0.8, 1.5)
        a = rate_one_point(params, t, f, g).value
        b = rate_multi(params, [t], [f], [g]).value
        worst = max(worst, abs(a - b))
    return Check("rate_multi at d=1 equals rate_one_point", worst < tol, {"max_error": worst})


def check_fluid_zero_rate(params, T=3.0, tol=1e-6):
    t = np.linspace(0.0, T, 33)
    fl = PathGrid.fluid(params, t)
    v1 = rate_one_point(params, T, float(fl.f[-1]), float(fl.g[-1])).value
    v2 = rate_f(params, fl).value
    v3 = rate_sample_path(params, fl).value
    worst = max(abs(v1), abs(v2), abs(v3))
    return Check("rate vanishes on the fluid path", worst < tol, {"one_point": v1, "rate_f": v2, "sample_path": v3})


def check_rate_positive_off_fluid(params, seed=3, cases=10):
    rng = _rng(seed)
    worst = np.inf
    for _ in range(cases):
        t = rng.uniform(0.5, 3.0)
        df, dg = rng.normal(size=2)
        scale = 0.11 / (abs(df) + abs(dg))
        f = max(float(fluid_population(params, t)) + df * scale, 0.0)
        g = float(fluid_claims(params, t)) + dg * scale
        worst = min(worst, rate_one_point(params, t, f, g).value)
    return Check("rate positive away from the fluid point", worst > 0, {"min_rate": worst})


def check_k_local(params, tol=1e-12):
    xs = np.array([0.3, 1.0, 2.5])
    mean = xs * (params.nu * params.mbar - params.r)
    at_mean = np.abs(k_local(params, xs, mean)).max()
    off = np.array([k_local(params, x, m + s) for x, m in zip(xs, mean) for s in (-0.2, 0.2)])
    u = np.linspace(-params.r * 1.0 + 0.05, 3.0, 41)
    k = k_local(params, 1.0, u)
    convex = bool(np.all(k[1:-1] <= 0.5 * (k[2:] + k[:-2]) + 1e-12))
    ok = at_mean < tol and bool(np.all(off > 0)) and convex and k_local(params, 0.0, 0.0) == 0.0
    return Check("local claim cost vanishes only at the local mean", ok,
                 {"at_mean": float(at_mean), "min_off_mean": float(off.min()), "convex": convex})


def check_convexity(params, seed=5, cases=10):
    rng = _rng(seed)
    lp_ok = True
    th = rng.uniform(-2.0, min(2.0, 0.9 * params.theta_max), (cases, 2))
    for a, b in th:
        lp_ok &= bool(log_phi(params, 0.5 * (a + b)) <= 0.5 * (log_phi(params, a) + log_phi(params, b)) + 1e-12)
    ln_ok = True
    grid = TimeGrid([0.7, 1.6])
    for _ in range(cases):
        x, y = rng.normal(0, 0.5, (2, 4)), rng.normal(0, 0.5, (2, 4))
        x[:, 2:] *= min(1.0, 0.3 * params.theta_max)
        y[:, 2:] *= min(1.0, 0.3 * params.theta_max)
        for p, q in zip(x, y):
            m = 0.5 * (p + q)
            lm = mgf.log_n(params, grid, DualVector(m[:2], m[2:]))
            la = mgf.log_n(params, grid, DualVector(p[:2], p[2:]))
            lb = mgf.log_n(params, grid, DualVector(q[:2], q[2:]))
            ln_ok &= bool(lm <= 0.5 * (la + lb) + 1e-10)
    rate_ok = True
    t = 2.0
    fb, gb = float(fluid_population(params, t)), float(fluid_claims(params, t))
    for _ in range(cases // 2):
        p = np.array([fb, gb]) + rng.normal(0, 0.4, 2)
        q = np.array([fb, gb]) + rng.normal(0, 0.4, 2)
        p[0], q[0] = abs(p[0]), abs(q[0])
        m = 0.5 * (p + q)
        rm = rate_one_point(params, t, *m).value
        ra = rate_one_point(params, t, *p).value
        rb = rate_one_point(params, t, *q).value
        rate_ok &= bool(rm <= 0.5 * (ra + rb) + 1e-9)
    ok = lp_ok and ln_ok and rate_ok
    return Check("convexity midpoint tests", ok, {"log_phi": lp_ok, "log_n": ln_ok, "rate_one_point": rate_ok})


def check_two_solvers(params, u, T, d=64):
    mlp = most_likely_path(params, RuinQuery(u, T, "ruin", d))
    var = most_likely_path_variational(params, RuinQuery(u, T, "ruin", d))
    rel = abs(var.rate - mlp.rate) / max(mlp.rate, 1e-12)
    scale = max(np.abs(mlp.path.f).max(), 1e-12)
    sup_f = float(np.abs(var.path.f - mlp.path.f).max() / scale)
    gscale = max(np.abs(mlp.path.g).max(), 1e-12)
    sup_g = float(np.abs(var.path.g - mlp.path.g).max() / gscale)
    ok = rel < 0.02 and sup_f < 0.05 and sup_g < 0.05
    return Check("recovered path agrees with direct minimization", ok,
                 {"u": u, "T": T, "rate_recovered": mlp.rate, "rate_direct": var.rate, "rel_rate_gap": rel,
                  "sup_rel_f": sup_f, "sup_rel_g": sup_g})


def check_conservation(params, n=20, T=5.0, count=20, seed=1, tol=1e-9):
    cfg = SimConfig(n=n, T=T, replications=count, seed=seed, record_grid=tuple(np.linspace(0.25, T, 20)))
    worst = max(sample_trajectory(params, cfg, i).conservation_error() for i in range(count))
    return Check("simulator conservation identity", worst < tol, {"max_error": worst})


def check_equilibrium_occupancy(params, n=10, t=1.5, count=4000, seed=2):
    """Head count at t is Poisson(n lam mean) when the system starts stationary."""
    soj = params.sojourn
    stat = params.with_(f0=params.lam * soj.mean(), residual=Excess(soj))
    cfg = SimConfig(n=n, T=t, replications=count, seed=seed, record_grid=(t,), initial="poisson")
    counts = np.array([round(sample_trajectory(stat, cfg, i).F[0] * n) for i in range(count)])
    mean = n * stat.f0
    lo, hi = int(poisson.ppf(0.005, mean)), int(poisson.ppf(0.995, mean))
    # bins: <= lo, each k strictly between, >= hi
    obs = np.array([(counts <= lo).sum()] + [(counts == k).sum() for k in range(lo + 1, hi)] + [(counts >= hi).sum()])
    probs = np.array([poisson.cdf(lo, mean)] + [poisson.pmf(k, mean) for k in range(lo + 1, hi)] + [poisson.sf(hi - 1, mean)])
    p = chisquare(obs, probs * count / probs.sum()).pvalue
    return Check("stationary head count is Poisson", p > 0.01, {"p_value": float(p), "mean_count": float(counts.mean()), "expected": mean})


def check_mc_vs_ldp(params, u=0.5, T=5.0, n_list=(10, 20, 40), replications=1_000_000, seed=2024, jobs=1):
    rho = decay_rate(params, u, T).rho
    fit = empirical_decay(params, u, T, n_list, replications, seed=seed, jobs=jobs)
    rel = abs(fit.slope - rho) / rho
    gaps = [abs(row["rate"] - rho) for row in fit.table]
    shrinking = all(b < a for a, b in zip(gaps[:-1], gaps[1:]))
    per_n = [{"n": row["n"], "p_hat": row["estimate"].p_hat, "hits": row["estimate"].hits,
              "ci": [row["estimate"].ci_low, row["estimate"].ci_high], "rate": row["rate"]} for row in fit.table]
    return Check("Monte Carlo decay matches the rate", rel < 0.25 and shrinking,
                 {"rho": rho, "slope": fit.slope, "rel_gap": rel, "gaps": gaps, "per_n": per_n})


def run_suite(params, u, T, mc_replications=200_000, jobs=1, include_mc=True):
    checks = [
        check_normalization(params),
        check_one_point_equivalence(params, cases=20),
        check_rate_multi_equivalence(params, cases=2),
        check_fluid_zero_rate(params),
        check_rate_positive_off_fluid(params),
        check_k_local(params),
        check_convexity(params),
        check_two_solvers(params, u, T),
        check_conservation(params),
        check_equilibrium_occupancy(params),
    ]
    if include_mc:
        checks.append(check_mc_vs_ldp(params, replications=mc_replications, jobs=jobs))
    return checks

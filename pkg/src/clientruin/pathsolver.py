"""Ruin decay rates and most likely paths.

The infimum of the rate over paths ending in ``[0, inf) x [u, inf)`` at time
t is the Legendre transform of the one-point cumulant in theta alone
(omega = 0 frees the terminal client mass), and the infimum over g >= u sits
at g = u when u exceeds the fluid value.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize

from .mgf import DualVector, TimeGrid, log_n, one_point_cumulant
from .model import fluid_claims, fluid_population, log_phi
from .optimize import golden_section
from .ratefn import DUAL_CAP, THETA_MARGIN, PathGrid, RateResult, _cell_terms, _rate_f_solve

SCAN_NODES = 64
INF_STEP = 0.125
INF_PATIENCE = 8


@dataclass(frozen=True)
class RuinQuery:
    """Terminal condition at time T: ``g(T) >= u`` (ruin) or ``g(T) = u``
    (point). ``d`` is the number of output cells."""

    u: float
    T: float
    target: str = "ruin"
    d: int = 64

    def __post_init__(self):
        if self.target not in ("ruin", "point"):
            raise ValueError("target must be 'ruin' or 'point'")
        if self.target == "ruin" and not self.u > 0:
            raise ValueError("ruin queries need u > 0")
        if not self.T > 0 or self.d < 2:
            raise ValueError("need T > 0 and d >= 2")


@dataclass
class MostLikelyPath:
    path: PathGrid
    omega_star: float
    theta_star: float
    rate: float
    f_bar: np.ndarray = None
    g_bar: np.ndarray = None
    failures: list = field(default_factory=list)

    @property
    def s(self):
        return self.path.times

    def rows(self):
        """(s, f_star, g_star, f_bar, g_bar) tuples."""
        p = self.path
        return list(zip(p.times, p.f, p.g, self.f_bar, self.g_bar))


@dataclass
class DecayResult:
    rho: float
    t_star: float
    ts: np.ndarray
    rhos: np.ndarray

    def __iter__(self):
        return iter((self.rho, self.t_star))


# ---------------------------------------------------------------------------
# terminal duals
# ---------------------------------------------------------------------------


def _dN(params, t, theta):
    return one_point_cumulant(params, t, 0.0, theta, order=1)[1][1]


def _upper_bracket(params, t, level):
    """Smallest tried theta > 0 with dN/dtheta >= level, or None."""
    cap = params.theta_max - THETA_MARGIN
    hi = min(1.0, params.theta_max / 2)
    while True:
        if _dN(params, t, hi) >= level:
            return hi
        if hi >= DUAL_CAP or (np.isfinite(cap) and cap - hi < 1e-10):
            return None
        hi = 0.5 * (hi + cap) if np.isfinite(cap) else 2 * hi


def _legendre_theta(params, t, level):
    """Value and maximizer of sup_theta (theta level - N_t(0, theta))."""
    gbar = float(fluid_claims(params, t))
    if level == gbar:
        return RateResult(0.0, np.zeros(1), np.zeros(1))
    if level > gbar:
        lo, hi = 0.0, _upper_bracket(params, t, level)
        if hi is None:
            return RateResult(np.inf, np.zeros(1), np.array([np.inf]), True, 0, 0.0, "level unreachable")
    else:
        hi, lo = 0.0, -1.0
        while _dN(params, t, lo) > level:
            if lo < -DUAL_CAP:
                return RateResult(np.inf, np.zeros(1), np.array([-np.inf]), True, 0, 0.0, "level unreachable")
            lo *= 2
    th = brentq(lambda x: _dN(params, t, x) - level, lo, hi, xtol=1e-13, rtol=1e-13, maxiter=200)
    value = th * level - one_point_cumulant(params, t, 0.0, th)
    grad = abs(_dN(params, t, th) - level)
    return RateResult(max(float(value), 0.0), np.zeros(1), np.array([th]), True, 0, grad)


def decay_at_horizon(params, u, t):
    """rho(t): cheapest way to have net claims at least u at time t."""
    if not t > 0:
        raise ValueError("t must be positive")
    if u <= fluid_claims(params, t):
        return RateResult(0.0, np.zeros(1), np.zeros(1), True, 0, 0.0, "fluid path already ruined")
    return _legendre_theta(params, t, u)


def point_target(params, a, t):
    """Rate and duals for paths with g(t) = a exactly (client mass free)."""
    return _legendre_theta(params, t, a)


def decay_rate(params, u, T=np.inf, nodes=SCAN_NODES, rtol=1e-4):
    """inf over t in (0, T] of rho(t), with the smallest minimizing t."""
    rho = lambda t: decay_at_horizon(params, u, t).value
    if np.isfinite(T):
        ts = T * np.arange(1, nodes + 1) / nodes
        rhos = np.array([rho(t) for t in ts])
    else:
        ts, rhos = [], []
        best, best_t, rises = np.inf, 0.0, 0
        t = 0.0
        while True:
            t += INF_STEP
            v = rho(t)
            ts.append(t)
            rhos.append(v)
            if v < best:
                best, best_t, rises = v, t, 0
            elif v > best:
                rises += 1
            if rises >= INF_PATIENCE or (best_t > 0 and t > 5 * best_t and rises > 0):
                break
        ts, rhos = np.array(ts), np.array(rhos)
    i = int(np.argmin(rhos))
    if rhos[i] == 0.0:
        # ruin along the fluid path: first time the scan reaches zero
        j = i
        lo = ts[j - 1] if j > 0 else 0.0
        hi = ts[j]
        while hi - lo > rtol * hi:
            mid = 0.5 * (lo + hi)
            if rho(mid) == 0.0:
                hi = mid
            else:
                lo = mid
        return DecayResult(0.0, hi, ts, rhos)
    lo = ts[i - 1] if i > 0 else ts[0] * 1e-3
    hi = ts[i + 1] if i + 1 < len(ts) else ts[i]
    t_star, val = golden_section(rho, lo, hi, rtol=rtol)
    if rhos[i] <= val:
        t_star, val = ts[i], rhos[i]
    return DecayResult(float(val), float(t_star), ts, rhos)


# ---------------------------------------------------------------------------
# path recovery from the two-point cumulant
# ---------------------------------------------------------------------------


def _two_point_gradient(params, s, T, theta_star, omega_star=0.0, h=1e-4):
    """d/d(omega_1, theta_1) of N on the grid (s, T) at ((0, w*), (0, th*)),
    by central differences with one Richardson step."""
    grid = TimeGrid([s, T])

    def N(w1, th1):
        return log_n(params, grid, DualVector([w1, omega_star], [th1, theta_star]))

    def central(k, step):
        if k == 0:
            return (N(step, 0.0) - N(-step, 0.0)) / (2 * step)
        return (N(0.0, step) - N(0.0, -step)) / (2 * step)

    out = []
    for k in (0, 1):
        d1, d2 = central(k, h), central(k, h / 2)
        out.append((4 * d2 - d1) / 3)
    return np.array(out)


def recover_path(params, T, theta_star, omega_star=0.0, d=64):
    """Most likely path for terminal duals (omega*, theta*) at time T."""
    s = np.linspace(0.0, T, d + 1)
    f = np.empty_like(s)
    g = np.empty_like(s)
    f[0], g[0] = params.f0, 0.0
    failures = []
    for i, si in enumerate(s[1:-1], start=1):
        try:
            grad = _two_point_gradient(params, si, T, theta_star, omega_star)
        except (ValueError, FloatingPointError, OverflowError) as exc:
            grad = np.array([np.nan, np.nan])
            failures.append((float(si), str(exc)))
        if not np.all(np.isfinite(grad)):
            failures.append((float(si), "non-finite derivative"))
        f[i], g[i] = grad
    _, end = one_point_cumulant(params, T, omega_star, theta_star, order=1)
    f[-1], g[-1] = end
    return s, np.maximum(f, 0.0), g, failures


def most_likely_path(params, query):
    """Most likely path to the terminal set of ``query``."""
    if query.target == "ruin":
        rr = decay_at_horizon(params, query.u, query.T)
    else:
        rr = point_target(params, query.u, query.T)
    if rr.infinite:
        raise ValueError("terminal set is unreachable at this horizon")
    th = float(rr.theta[0])
    s, f, g, failures = recover_path(params, query.T, th, 0.0, query.d)
    path = PathGrid(s, f, g)
    return MostLikelyPath(path, 0.0, th, rr.value, fluid_population(params, s), fluid_claims(params, s), failures)


# ---------------------------------------------------------------------------
# direct minimization of the discretized action
# ---------------------------------------------------------------------------

_F_FLOOR = 1e-8
_INFEASIBLE = 1e12


class _Action:
    """Discretized rate of (f, g) on a fixed grid, with its gradient."""

    def __init__(self, params, times, g_end, f_end=None):
        self.params = params
        self.t = times
        self.d = times.size - 1
        self.g_end = g_end
        self.f_end = f_end
        self.y = None
        self.nfree_f = self.d if f_end is None else self.d - 1

    def unpack(self, z):
        p = self.params
        f = np.empty(self.d + 1)
        f[0] = p.f0
        f[1 : 1 + self.nfree_f] = z[: self.nfree_f]
        if self.f_end is not None:
            f[-1] = self.f_end
        g = np.empty(self.d + 1)
        g[0] = 0.0
        g[1:-1] = z[self.nfree_f :]
        g[-1] = self.g_end
        return f, g

    def pack(self, f, g):
        return np.concatenate([f[1 : 1 + self.nfree_f], g[1:-1]])

    def __call__(self, z):
        f, g = self.unpack(z)
        dt, xs, us, kval, th = _cell_terms(self.params, self.t, f, g)
        if not np.all(np.isfinite(kval)) or not np.all(np.isfinite(th)):
            return _INFEASIBLE, np.zeros_like(z)
        res = _rate_f_solve(self.params, self.t, f, tol=1e-11, y0=self.y)
        if res.diverged or not np.isfinite(res.value):
            return _INFEASIBLE, np.zeros_like(z)
        self.y = res.x
        y = np.concatenate([[0.0], res.x])
        omega = np.diff(y)
        value = res.value + float(dt @ kval)
        Lk = log_phi(self.params, th)
        gf = omega.copy()
        half = -0.5 * dt * Lk
        gf += half  # cell k touches f_k (right end)
        gf[:-1] += half[1:]  # and f_{k-1} (left end) of the next cell
        gg = th[:-1] - th[1:]
        grad = np.concatenate([gf[: self.nfree_f], gg])
        return value, grad


def most_likely_path_variational(params, query, start_paths=(), f_end=None, tol=1e-10, maxiter=5000):
    """Minimize the discretized action over grid paths with g(T) fixed.

    Starts from the fluid path (shifted to the target), a linear ramp and
    any ``start_paths`` (e.g. the recovered path); the best end point wins.
    """
    T, d = query.T, query.d
    t = np.linspace(0.0, T, d + 1)
    gbar = fluid_claims(params, t)
    fbar = fluid_population(params, t)
    target = query.u
    if query.target == "ruin" and target <= gbar[-1]:
        return MostLikelyPath(PathGrid(t, fbar, gbar), 0.0, 0.0, 0.0, fbar, gbar)
    if params.nu == 0:
        return _variational_no_claims(params, query, t, fbar, gbar, f_end)

    act = _Action(params, t, target, f_end)
    fe = fbar[-1] if f_end is None else f_end
    starts = [
        (np.where(t < T, fbar, fe), gbar + (t / T) * (target - gbar[-1])),
        (params.f0 + (fe - params.f0) * t / T, target * t / T),
    ]
    starts += [(np.asarray(p.f, float), np.asarray(p.g, float)) for p in start_paths]
    bounds = [(_F_FLOOR, None)] * act.nfree_f + [(None, None)] * (d - 1)
    best = None
    for f_s, g_s in starts:
        z0 = act.pack(np.maximum(f_s, _F_FLOOR), g_s)
        if act(z0)[0] >= _INFEASIBLE:
            continue
        act.y = None
        res = minimize(act, z0, jac=True, method="L-BFGS-B", bounds=bounds,
                       options={"maxiter": maxiter, "maxfun": 4 * maxiter, "ftol": tol, "gtol": 1e-9})
        if best is None or res.fun < best.fun:
            best = res
    f, g = act.unpack(best.x)
    return MostLikelyPath(PathGrid(t, f, g), 0.0, float("nan"), float(best.fun), fbar, gbar)


def _variational_no_claims(params, query, t, fbar, gbar, f_end):
    # without claims g is pinned by f: g' = -r f
    r = params.r
    dt = np.diff(t)
    free = t.size - 1 if f_end is None else t.size - 2

    def unpack(z):
        f = np.empty(t.size)
        f[0] = params.f0
        f[1 : 1 + free] = z
        if f_end is not None:
            f[-1] = f_end
        return f

    def claims(f):
        return np.concatenate([[0.0], np.cumsum(-r * dt * 0.5 * (f[1:] + f[:-1]))])

    def obj(z):
        f = unpack(z)
        res = _rate_f_solve(params, t, f, tol=1e-11)
        y = np.concatenate([[0.0], res.x])
        return res.value, np.diff(y)[:free]

    cons = [{"type": "eq", "fun": lambda z: claims(unpack(z))[-1] - query.u}]
    z0 = fbar[1 : 1 + free]
    res = minimize(obj, z0, jac=True, method="SLSQP", bounds=[(_F_FLOOR, None)] * free, constraints=cons,
                   options={"maxiter": 500, "ftol": 1e-12})
    f = unpack(res.x)
    return MostLikelyPath(PathGrid(t, f, claims(f)), 0.0, float("nan"), float(res.fun), fbar, gbar)

"""Rate functions: one point, several points, and whole sample paths."""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.optimize import minimize_scalar

from .mgf import DualVector, TimeGrid, log_n, one_point_cumulant
from .model import fluid_claims, fluid_population, log_phi, log_phi_derivs
from .optimize import fd_grad_hess, newton_ascent

DUAL_CAP = 1e3
THETA_MARGIN = 1e-9


@dataclass
class RateResult:
    value: float
    omega: np.ndarray = field(default_factory=lambda: np.zeros(0))
    theta: np.ndarray = field(default_factory=lambda: np.zeros(0))
    converged: bool = True
    iterations: int = 0
    grad_norm: float = 0.0
    message: str = ""

    @property
    def infinite(self):
        return np.isinf(self.value)


@dataclass(frozen=True)
class PathGrid:
    """Path values on ``times``; the first time is 0."""

    times: np.ndarray
    f: np.ndarray
    g: np.ndarray = None

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        f = np.asarray(self.f, dtype=float)
        if t.ndim != 1 or t.size < 2 or t[0] != 0.0 or np.any(np.diff(t) <= 0):
            raise ValueError("path times must start at 0 and increase strictly")
        if f.shape != t.shape:
            raise ValueError("f must match the time grid")
        if np.any(f < 0):
            raise ValueError("client mass must be non-negative")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "f", f)
        if self.g is not None:
            g = np.asarray(self.g, dtype=float)
            if g.shape != t.shape:
                raise ValueError("g must match the time grid")
            object.__setattr__(self, "g", g)

    @property
    def T(self):
        return float(self.times[-1])

    def derivative(self, which="f"):
        """Central differences inside, one-sided at the ends."""
        return np.gradient(getattr(self, which), self.times)

    @classmethod
    def fluid(cls, params, times):
        t = np.asarray(times, dtype=float)
        return cls(t, fluid_population(params, t), fluid_claims(params, t))


# ---------------------------------------------------------------------------
# one and several time points
# ---------------------------------------------------------------------------


def _theta_ok(params, theta):
    return np.all(np.asarray(theta) < params.theta_max - THETA_MARGIN)


def rate_one_point(params, t, f, g, tol=1e-7):
    """sup over (omega, theta) of omega f + theta g - N_t(omega, theta)."""

    def fun(x):
        N, grad, hess = one_point_cumulant(params, t, x[0], x[1], order=2)
        return x[0] * f + x[1] * g - N, np.array([f, g]) - grad, -hess

    res = newton_ascent(fun, np.zeros(2), lambda x: _theta_ok(params, x[1]), tol=tol, cap=DUAL_CAP)
    value = np.inf if res.diverged else max(res.value, 0.0)
    return RateResult(value, res.x[:1], res.x[1:], res.converged or res.diverged, res.iterations, res.grad_norm, res.message)


def rate_multi(params, grid, fs, gs, tol=1e-7):
    """Legendre transform of the joint cumulant on a grid (finite differences)."""
    grid = grid if isinstance(grid, TimeGrid) else TimeGrid(grid)
    fs = np.asarray(fs, dtype=float)
    gs = np.asarray(gs, dtype=float)
    d = grid.d
    target = np.concatenate([fs, gs])

    def objective(x):
        return float(x @ target - log_n(params, grid, DualVector(x[:d], x[d:])))

    def fun(x):
        return fd_grad_hess(objective, x)

    def feasible(x):
        return _theta_ok(params, np.cumsum(x[d:][::-1]))

    res = newton_ascent(fun, np.zeros(2 * d), feasible, tol=tol, cap=DUAL_CAP)
    value = np.inf if res.diverged else max(res.value, 0.0)
    return RateResult(value, res.x[:d], res.x[d:], res.converged or res.diverged, res.iterations, res.grad_norm, res.message)


# ---------------------------------------------------------------------------
# local claim cost
# ---------------------------------------------------------------------------


def _solve_slope(params, target, iters=200):
    """theta with d/dtheta log phi(theta) = target, elementwise; target > -r."""
    target = np.asarray(target, dtype=float)
    dL = lambda th: log_phi_derivs(params, th)[1]
    cap = params.theta_max
    lo = np.full_like(target, -1.0)
    while np.any(m := dL(lo) > target):
        lo = np.where(m, 2 * lo, lo)
    hi = np.full_like(target, min(1.0, cap / 2))
    while np.any(m := dL(hi) < target):
        hi = np.where(m, 0.5 * (hi + cap) if np.isfinite(cap) else 2 * hi, hi)
        if np.isfinite(cap) and np.any(cap - hi < 1e-12):
            break
    th = 0.5 * (lo + hi)
    for _ in range(iters):
        _, d1, d2 = log_phi_derivs(params, th)
        F = d1 - target
        lo = np.where(F < 0, th, lo)
        hi = np.where(F > 0, th, hi)
        newton = th - F / np.where(d2 > 0, d2, np.inf)
        bad = ~((newton > lo) & (newton < hi))
        th_new = np.where(bad, 0.5 * (lo + hi), newton)
        if np.all(np.abs(th_new - th) <= 1e-15 * (1 + np.abs(th))):
            th = th_new
            break
        th = th_new
    return th


def k_local_terms(params, x, u):
    """K_x(u) = sup_theta (theta u - x log phi(theta)) with its maximizer.

    Returns ``(value, theta)``. Infinite values come with theta = nan.
    """
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    x, u = np.broadcast_arrays(x, u)
    value = np.full(x.shape, np.inf)
    theta = np.full(x.shape, np.nan)
    r, nu = params.r, params.nu
    zero_x = x <= 0
    value[zero_x & (u == 0)] = 0.0
    theta[zero_x & (u == 0)] = 0.0
    if nu == 0:
        mean = (~zero_x) & np.isclose(u, -r * x, rtol=1e-12, atol=1e-15)
        value[mean] = 0.0
        theta[mean] = 0.0
        return value, theta
    edge = (~zero_x) & (u + r * x == 0)
    value[edge] = nu * x[edge]
    theta[edge] = -np.inf
    inner = (~zero_x) & (u + r * x > 0)
    if np.any(inner):
        th = _solve_slope(params, u[inner] / x[inner])
        theta[inner] = th
        value[inner] = np.maximum(th * u[inner] - x[inner] * log_phi(params, th), 0.0)
    return value, theta


def k_local(params, x, u, variant="log"):
    """Local cost of claims at rate u with client mass x.

    ``variant="phi"`` uses phi(theta) in place of log phi(theta); it is kept
    only to compare the two readings and does not vanish at the mean rate.
    """
    if variant == "phi":
        if x == 0:
            return 0.0 if u == 0 else np.inf
        hi = params.theta_max - THETA_MARGIN if np.isfinite(params.theta_max) else 50.0
        res = minimize_scalar(lambda th: -(th * u - x * np.exp(log_phi(params, th))), bounds=(-50.0, hi), method="bounded", options={"xatol": 1e-12})
        return float(-res.fun)
    value, _ = k_local_terms(params, x, u)
    return float(value) if np.ndim(value) == 0 else value


# ---------------------------------------------------------------------------
# sample-path rate
# ---------------------------------------------------------------------------


@lru_cache(maxsize=64)
def _population_weights(params, times):
    """Departure-cell probabilities for the initial clients and arrivals.

    ``p[k]`` is the chance an initial client leaves in ``(t_k, t_{k+1}]``
    (``p[d]``: stays past T). ``W[j, k]`` integrates over arrival times in
    ``(t_j, t_{j+1}]`` the chance of leaving in ``(t_k, t_{k+1}]``.
    """
    t = np.asarray(times)
    d = t.size - 1
    T = t[-1]
    res, soj = params.residual, params.sojourn
    cdf0 = res.cdf(t)
    p = np.append(np.diff(cdf0), res.tail(T))

    m = soj.mean()

    def G(x):
        x = np.maximum(x, 0.0)
        return x - (m - soj.partial_moment(1, x))

    # I[j, c] = int_{t_j}^{t_{j+1}} cdf(t_c - a) da
    I = G(t[None, :] - t[:-1, None]) - G(t[None, :] - t[1:, None])
    W = np.zeros((d + 1, d + 1))
    W[:d, :d] = I[:, 1:] - I[:, :-1]
    W[:d, d] = np.diff(t) - I[:, d]
    W = np.triu(np.maximum(W, 0.0))
    return p, W


def _rate_f_solve(params, times, f, tol=1e-10, y0=None):
    d = times.size - 1
    T = times[-1]
    p, W = _population_weights(params, tuple(times))
    lam, f0 = params.lam, params.f0
    lin = f[1:] - np.append(f[2:], 0.0)
    logp = np.log(np.where(p > 0, p, 1.0))
    logp[p <= 0] = -np.inf

    def fun(yfree):
        y = np.concatenate([[0.0], yfree])
        val = float(lin @ yfree)
        grad = lin.copy()
        hess = np.zeros((d, d))
        if f0 > 0:
            z = logp + y
            zmax = np.max(z)
            ez = np.exp(z - zmax)
            s = ez.sum()
            pi = ez / s
            val -= f0 * (zmax + np.log(s))
            grad -= f0 * pi[1:]
            hess -= f0 * (np.diag(pi[1:]) - np.outer(pi[1:], pi[1:]))
        if lam > 0:
            E = W * np.exp(y[None, :] - y[:, None])
            val -= lam * (E.sum() - T)
            col, row = E.sum(axis=0), E.sum(axis=1)
            grad -= lam * (col - row)[1:]
            S = E + E.T
            lap = np.diag(S.sum(axis=1) - np.diag(S)) - (S - np.diag(np.diag(S)))
            hess -= lam * lap[1:, 1:]
        return val, grad, hess

    start = np.zeros(d) if y0 is None else y0
    return newton_ascent(fun, start, tol=tol, maxiter=500, cap=DUAL_CAP)


def rate_f(params, fpath, T=None, tol=1e-10):
    """Cost of the client path alone, optimized over y = log z on the grid.

    Between grid points log z is held constant, so the supremum is the
    Legendre transform of the population cumulant at the grid times.
    """
    times = fpath.times
    if T is not None and abs(T - fpath.T) > 1e-12:
        raise ValueError("path does not end at T")
    if abs(fpath.f[0] - params.f0) > 1e-9:
        raise ValueError(f"path starts at {fpath.f[0]} but f0 = {params.f0}")
    res = _rate_f_solve(params, times, fpath.f, tol=tol)
    y = np.concatenate([[0.0], res.x])
    value = np.inf if res.diverged else max(res.value, 0.0)
    return RateResult(value, np.diff(y), np.zeros(0), res.converged or res.diverged, res.iterations, res.grad_norm, res.message)


def _cell_terms(params, times, f, g):
    dt = np.diff(times)
    xs = 0.5 * (f[1:] + f[:-1])
    us = np.diff(g) / dt
    val, th = k_local_terms(params, xs, us)
    return dt, xs, us, val, th


def rate_g_given_f(params, path, variant="log"):
    """int_0^T K_{f(s)}(g'(s)) ds with g' and f taken per grid cell."""
    if path.g is None:
        raise ValueError("path has no claims values")
    if abs(path.g[0]) > 1e-12:
        raise ValueError("claims path must start at 0")
    if variant == "phi":
        dt = np.diff(path.times)
        xs = 0.5 * (path.f[1:] + path.f[:-1])
        us = np.diff(path.g) / dt
        return float(sum(h * k_local(params, x, u, "phi") for h, x, u in zip(dt, xs, us)))
    dt, _, _, val, _ = _cell_terms(params, path.times, path.f, path.g)
    return float(dt @ val)


def rate_sample_path(params, path, T=None):
    rf = rate_f(params, path, T)
    rg = rate_g_given_f(params, path)
    value = rf.value + rg
    return RateResult(value, rf.omega, np.zeros(0), rf.converged, rf.iterations, rf.grad_norm, rf.message)

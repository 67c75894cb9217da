"""Event-driven Monte Carlo of the scaled portfolio.

Clients are generated first (initial clients with residual sojourns, then
Poisson arrivals with full sojourns). The claim stream is the superposition
of the clients' Poisson(nu) streams, so between population changes it is a
Poisson process with rate nu times the head count; claim gaps are redrawn
after every population change, which is exact by memorylessness. Ruin can
only happen at a claim, since premiums only push net claims down.

Replication ``i`` draws from a SplitMix64 stream keyed by ``(seed, i)``, so
results do not depend on how replications are split across workers.
"""

import math
import os
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numba import njit
from scipy.stats import norm

GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_TWO53 = 1.0 / 9007199254740992.0


@njit(cache=True)
def _mix(z):
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


@njit(cache=True)
def _stream_key(seed, index):
    return _mix(_mix(np.uint64(seed)) + np.uint64(index) * GAMMA)


@njit(cache=True)
def _uniform(state):
    state[0] += GAMMA
    return (float(_mix(state[0]) >> np.uint64(11)) + 0.5) * _TWO53


@njit(cache=True)
def _exponential(state, rate):
    return -math.log(_uniform(state)) / rate


@njit(cache=True)
def _normal(state):
    return math.sqrt(-2.0 * math.log(_uniform(state))) * math.cos(2.0 * math.pi * _uniform(state))


@njit(cache=True)
def _gamma(state, shape, rate):
    boost = 1.0
    if shape < 1.0:
        boost = _uniform(state) ** (1.0 / shape)
        shape += 1.0
    d = shape - 1.0 / 3.0
    c = 1.0 / math.sqrt(9.0 * d)
    while True:
        x = _normal(state)
        v = 1.0 + c * x
        if v <= 0.0:
            continue
        v = v * v * v
        if math.log(_uniform(state)) < 0.5 * x * x + d - d * v + d * math.log(v):
            return boost * d * v / rate


@njit(cache=True)
def _draw_plain(state, code, p0, p1):
    if code == 0:
        return _exponential(state, p0)
    if code == 1:
        return p0 + (p1 - p0) * _uniform(state)
    if code == 2:
        return p0
    return _gamma(state, p0, p1)


@njit(cache=True)
def _draw_size_biased(state, code, p0, p1):
    if code == 0:
        return _gamma(state, 2.0, p0)
    if code == 1:
        return math.sqrt(p0 * p0 + _uniform(state) * (p1 * p1 - p0 * p0))
    if code == 2:
        return p0
    return _gamma(state, p0 + 1.0, p1)


@njit(cache=True)
def _draw(state, law):
    code = int(law[0])
    if code == 4:
        return _uniform(state) * _draw_size_biased(state, int(law[3]), law[4], law[5])
    return _draw_plain(state, code, law[1], law[2])


@njit(cache=True)
def _poisson(state, mean):
    # count of unit-rate arrivals in [0, mean]
    k = 0
    t = _exponential(state, 1.0)
    while t <= mean:
        k += 1
        t += _exponential(state, 1.0)
    return k


@njit(cache=True)
def _clients(state, n, T, lam, f0, residual, sojourn, poisson_start):
    """Start and end times of every client that is present at some t <= T."""
    if poisson_start:
        n0 = _poisson(state, n * f0)
    else:
        n0 = int(math.floor(n * f0 + 0.5))
    rate = n * lam
    cap = n0 + 16
    if rate > 0:
        cap += int(rate * T + 10.0 * math.sqrt(rate * T) + 16)
    starts = np.empty(cap)
    ends = np.empty(cap)
    for i in range(n0):
        starts[i] = 0.0
        ends[i] = _draw(state, residual)
    m = n0
    if rate > 0:
        t = _exponential(state, rate)
        while t <= T:
            if m == cap:
                cap *= 2
                s2 = np.empty(cap)
                e2 = np.empty(cap)
                s2[:m] = starts[:m]
                e2[:m] = ends[:m]
                starts, ends = s2, e2
            starts[m] = t
            ends[m] = t + _draw(state, sojourn)
            m += 1
            t += _exponential(state, rate)
    return starts[:m], ends[:m]


@njit(cache=True)
def _sweep(state, starts, ends_sorted, T, nu, r, claim, level, grid, outF, outG, stop_at_ruin, claim_t, claim_x):
    """Walk through population changes and claims up to T.

    ``level`` is n * u. Fills ``outF`` / ``outG`` (unscaled head count and net
    claims) at the ``grid`` times and, when ``claim_t`` has room, records the
    claims. Returns (ruined, ruin time, claims recorded, net claims at T,
    integral of head count up to T).
    """
    m = starts.size
    t = 0.0
    k = 0
    integ = 0.0
    cum = 0.0
    i_s = 0
    i_e = 0
    j = 0
    ng = grid.size
    nc = 0
    ruined = False
    ruin_time = math.inf
    if level <= 0.0:
        ruined = True
        ruin_time = 0.0
        if stop_at_ruin:
            return ruined, ruin_time, nc, cum, integ
    while True:
        next_start = starts[i_s] if i_s < m else math.inf
        next_end = ends_sorted[i_e] if i_e < m else math.inf
        nxt = min(next_start, next_end, T)
        tc = math.inf
        if k > 0 and nu > 0.0:
            tc = t + _exponential(state, nu * k)
        stop = min(tc, nxt)
        while j < ng and grid[j] < stop:
            outF[j] = k
            outG[j] = cum - r * (integ + k * (grid[j] - t))
            j += 1
        if tc < nxt:
            integ += k * (tc - t)
            t = tc
            x = _draw(state, claim)
            cum += x
            if nc < claim_t.size:
                claim_t[nc] = t
                claim_x[nc] = x
                nc += 1
            if not ruined and cum - r * integ >= level:
                ruined = True
                ruin_time = t
                if stop_at_ruin:
                    return ruined, ruin_time, nc, cum - r * integ, integ
            continue
        integ += k * (nxt - t)
        t = nxt
        if t >= T:
            break
        if next_start <= next_end:
            k += 1
            i_s += 1
        else:
            k -= 1
            i_e += 1
    while j < ng and grid[j] <= T:
        outF[j] = k
        outG[j] = cum - r * integ - r * k * (grid[j] - t)
        j += 1
    return ruined, ruin_time, nc, cum - r * integ, integ


@njit(cache=True)
def _ruin_batch(seed, first, count, n, T, lam, f0, nu, r, claim, residual, sojourn, poisson_start, level, grid, keep_paths):
    hits = np.zeros(count, dtype=np.bool_)
    times = np.full(count, math.inf)
    ng = grid.size
    F = np.zeros((count if keep_paths else 0, ng))
    G = np.zeros((count if keep_paths else 0, ng))
    bufF = np.zeros(ng)
    bufG = np.zeros(ng)
    empty = np.zeros(0)
    state = np.zeros(1, dtype=np.uint64)
    for i in range(count):
        state[0] = _stream_key(seed, first + np.uint64(i))
        starts, ends = _clients(state, n, T, lam, f0, residual, sojourn, poisson_start)
        ends_sorted = np.sort(ends)
        ruined, rt, _, _, _ = _sweep(state, starts, ends_sorted, T, nu, r, claim, level,
                                     grid if keep_paths else empty, bufF, bufG, not keep_paths, empty, empty)
        hits[i] = ruined
        times[i] = rt
        if keep_paths:
            F[i, :] = bufF
            G[i, :] = bufG
    return hits, times, F, G


# ---------------------------------------------------------------------------
# python API
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SimConfig:
    """``initial="poisson"`` draws the initial head count from Poisson(n f0)
    instead of rounding n f0; used for stationarity checks."""

    n: int
    T: float
    replications: int = 1000
    seed: int = 0
    record_grid: tuple = ()
    initial: str = "fixed"
    jobs: int = 1

    def __post_init__(self):
        if self.n < 1 or self.replications < 1 or not self.T > 0:
            raise ValueError("need n >= 1, replications >= 1 and T > 0")
        if self.initial not in ("fixed", "poisson"):
            raise ValueError("initial must be 'fixed' or 'poisson'")
        object.__setattr__(self, "record_grid", tuple(float(x) for x in self.record_grid))
        object.__setattr__(self, "seed", int(self.seed) & 0xFFFFFFFFFFFFFFFF)


@dataclass
class TrajectorySample:
    times: np.ndarray
    F: np.ndarray
    G: np.ndarray
    ruined: bool
    ruin_time: float
    n: int
    r: float
    starts: np.ndarray
    ends: np.ndarray
    claim_times: np.ndarray
    claim_sizes: np.ndarray
    G_end: float

    def direct_G(self, t):
        """Net claims at t from the raw events, scaled by 1/n."""
        claims = self.claim_sizes[self.claim_times <= t].sum()
        present = np.clip(np.minimum(self.ends, t) - np.minimum(self.starts, t), 0.0, None).sum()
        return (claims - self.r * present) / self.n

    def conservation_error(self):
        """Largest gap between bookkept and directly recomputed net claims."""
        T = self.times[-1] if self.times.size else None
        errs = [abs(self.direct_G(t) - g) for t, g in zip(self.times, self.G)]
        if T is not None:
            errs.append(abs(self.direct_G(T) - self.G_end))
        return max(errs, default=0.0)

    def departures(self, lo, hi):
        return int(np.sum((self.ends > lo) & (self.ends <= hi)))


@dataclass
class RuinEstimate:
    p_hat: float
    ci_low: float
    ci_high: float
    replications: int
    hits: int
    wall_clock: float
    zero_hits: bool = False

    def to_dict(self):
        return {k: getattr(self, k) for k in ("p_hat", "ci_low", "ci_high", "replications", "hits", "wall_clock", "zero_hits")}


def _kernel_params(params):
    return params.claim.kernel_params(), params.residual.kernel_params(), params.sojourn.kernel_params()


def sample_trajectory(params, config, index, u=math.inf):
    """One replication with snapshots at ``config.record_grid`` (T appended
    when absent) and the raw client and claim events."""
    claim, residual, sojourn = _kernel_params(params)
    grid = np.array(sorted(set(config.record_grid) | {config.T}))
    state = np.zeros(1, dtype=np.uint64)
    state[0] = _stream_key(np.uint64(config.seed), np.uint64(index))
    starts, ends = _clients(state, config.n, config.T, params.lam, params.f0, residual, sojourn, config.initial == "poisson")
    cap = int(params.nu * config.T * (starts.size + 1) * 2 + 64)
    ct, cx = np.zeros(cap), np.zeros(cap)
    F, G = np.zeros(grid.size), np.zeros(grid.size)
    ruined, rt, nc, g_end, _ = _sweep(state, starts, np.sort(ends), config.T, params.nu, params.r, claim,
                                       config.n * u, grid, F, G, False, ct, cx)
    if nc == cap:
        raise RuntimeError("claim buffer overflow")
    n = config.n
    return TrajectorySample(grid, F / n, G / n, bool(ruined), float(rt), n, params.r, starts, ends,
                            ct[:nc].copy(), cx[:nc].copy(), g_end / n)


def _chunks(total, jobs):
    size = -(-total // max(jobs, 1))
    return [(i, min(size, total - i)) for i in range(0, total, size)]


def _run_chunk(args):
    params, config, u, first, count, keep = args
    claim, residual, sojourn = _kernel_params(params)
    grid = np.asarray(config.record_grid, dtype=float)
    return _ruin_batch(np.uint64(config.seed), np.uint64(first), count, config.n, config.T, params.lam, params.f0,
                       params.nu, params.r, claim, residual, sojourn, config.initial == "poisson",
                       config.n * u, grid, keep)


def _run(params, config, u, keep=False):
    jobs = max(1, config.jobs)
    parts = [(params, config, u, a, c, keep) for a, c in _chunks(config.replications, jobs)]
    if jobs > 1 and len(parts) > 1:
        with ProcessPoolExecutor(jobs) as ex:
            out = list(ex.map(_run_chunk, parts))
    else:
        out = [_run_chunk(p) for p in parts]
    hits = np.concatenate([o[0] for o in out])
    times = np.concatenate([o[1] for o in out])
    F = np.concatenate([o[2] for o in out])
    G = np.concatenate([o[3] for o in out])
    return hits, times, F, G


def wilson_interval(hits, n, level=0.95):
    z = norm.ppf(0.5 + level / 2)
    p = hits / n
    den = 1 + z * z / n
    mid = (p + z * z / (2 * n)) / den
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    lo = 0.0 if hits == 0 else max(0.0, float(mid - half))
    hi = 1.0 if hits == n else min(1.0, float(mid + half))
    return lo, hi


@lru_cache(maxsize=32)
def estimate_ruin_probability(params, config, u):
    """Fraction of replications with net claims reaching u by T."""
    t0 = time.perf_counter()
    hits, _, _, _ = _run(params, config, u)
    k = int(hits.sum())
    N = config.replications
    lo, hi = wilson_interval(k, N)
    if k == 0:
        hi = 1.0 - 0.05 ** (1.0 / N)
    return RuinEstimate(k / N, lo, hi, N, k, time.perf_counter() - t0, k == 0)


@dataclass
class DecayFit:
    slope: float
    intercept: float
    table: list = field(default_factory=list)

    def __iter__(self):
        return iter((self.slope, self.table))


def empirical_decay(params, u, T, n_list, replications, seed=0, jobs=1):
    """Slope of -log p_n against n, with per-n estimates."""
    if len(n_list) < 3 or list(n_list) != sorted(n_list):
        raise ValueError("need at least three increasing values of n")
    table = []
    for n in n_list:
        cfg = SimConfig(n=n, T=T, replications=replications, seed=seed, jobs=jobs)
        est = estimate_ruin_probability(params, cfg, u)
        table.append({"n": n, "estimate": est, "rate": -math.log(est.p_hat) / n if est.hits else math.nan})
    usable = [row for row in table if row["estimate"].hits > 0]
    if len(usable) < len(table):
        warnings.warn("dropping n values without ruin events", RuntimeWarning)
    if len(usable) < 2:
        raise ValueError("too few n values with ruin events")
    x = np.array([row["n"] for row in usable], dtype=float)
    y = np.array([-math.log(row["estimate"].p_hat) for row in usable])
    slope, intercept = np.polyfit(x, y, 1)
    return DecayFit(float(slope), float(intercept), table)


def conditioned_ensemble(params, config, u, min_hits=100):
    """Mean scaled client path over replications ruined by T."""
    if not config.record_grid:
        raise ValueError("config.record_grid is empty")
    hits, _, F, _ = _run(params, config, u, keep=True)
    k = int(hits.sum())
    if k < min_hits:
        raise ValueError(f"only {k} ruin events; need {min_hits}")
    grid = np.asarray(config.record_grid)
    return grid, F[hits].mean(axis=0) / config.n, F.mean(axis=0) / config.n, k

"""Moment generating functions of the client population and net claims.

A client present on ``[a, a + tau)`` contributes ``exp(Psi(exit) - Psi(a))``
where ``Psi`` is piecewise linear with slope ``log phi(Theta_k)`` on
``(t_{k-1}, t_k]`` and jumps by ``omega_k`` just after ``t_k``. A client that
leaves at exactly ``t_k`` is not counted at ``t_k``.
"""

from dataclasses import dataclass

import numpy as np

from .model import log_phi, log_phi_derivs
from .quadrature import composite_rule, gauss_legendre

__all__ = [
    "TimeGrid",
    "DualVector",
    "DualFunction",
    "m_minus_one",
    "m_plus_one",
    "log_m_plus_one",
    "m_minus_multi",
    "m_plus_multi",
    "log_m_plus_multi",
    "log_n",
    "one_point_cumulant",
    "psi",
    "m_minus_limit",
    "m_plus_limit",
    "embed",
]


@dataclass(frozen=True)
class TimeGrid:
    times: tuple

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if t.ndim != 1 or t.size < 1:
            raise ValueError("a time grid needs at least one point")
        if not np.all(np.isfinite(t)) or t[0] < 0 or np.any(np.diff(t) <= 0):
            raise ValueError("grid times must be finite, non-negative and strictly increasing")
        object.__setattr__(self, "times", tuple(float(x) for x in t))

    @property
    def d(self):
        return len(self.times)

    @property
    def t(self):
        return np.asarray(self.times)

    @property
    def edges(self):
        """Times with t_0 = 0 prepended."""
        return np.concatenate([[0.0], self.t])

    @property
    def deltas(self):
        return np.diff(self.edges)


@dataclass(frozen=True)
class DualVector:
    omega: tuple
    theta: tuple

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.omega, dtype=float))
        th = np.atleast_1d(np.asarray(self.theta, dtype=float))
        if w.shape != th.shape or w.ndim != 1:
            raise ValueError("omega and theta must be 1-d of equal length")
        object.__setattr__(self, "omega", tuple(map(float, w)))
        object.__setattr__(self, "theta", tuple(map(float, th)))

    @classmethod
    def zeros(cls, d):
        return cls(np.zeros(d), np.zeros(d))

    @property
    def Omega(self):
        """Partial sums Omega_0 = 0, ..., Omega_d."""
        return np.concatenate([[0.0], np.cumsum(self.omega)])

    @property
    def Theta(self):
        """Tail sums Theta_1, ..., Theta_d."""
        return np.cumsum(np.asarray(self.theta)[::-1])[::-1]


def _check(grid, duals):
    if len(duals.omega) != grid.d:
        raise ValueError(f"dual length {len(duals.omega)} does not match grid size {grid.d}")


def _slopes(params, grid, duals):
    """Slopes L_k, cumulative C_k = sum_{j<=k} L_j delta_j and Omega_k."""
    L = np.atleast_1d(log_phi(params, duals.Theta))
    C = np.concatenate([[0.0], np.cumsum(L * grid.deltas)])
    return L, C, duals.Omega


# ---------------------------------------------------------------------------
# one time point
# ---------------------------------------------------------------------------


def m_minus_one(params, t, omega, theta):
    """E exp(Psi(min(tau0, t))) for one initial client."""
    L = float(log_phi(params, theta))
    res = params.residual
    stay = np.exp(L * t + omega) * float(res.tail(t))
    return res.expect(lambda s: np.exp(L * s), 0.0, t) + stay


def log_m_plus_one(params, t, omega, theta, reading="t"):
    """log of the arrivals' mgf at one time point.

    The double integral over arrival time and sojourn is swapped into single
    integrals. ``reading="1"`` subtracts 1 instead of t inside the exponent,
    kept only for comparison.
    """
    if params.lam == 0:
        return 0.0
    L = float(log_phi(params, theta))
    soj = params.sojourn
    left = soj.expect(lambda x: np.exp(L * x) * (t - x), 0.0, t)
    splits = tuple(soj.kinks) + tuple(v for v, _ in soj.atoms)
    x, w = composite_rule(0.0, t, splits)
    stayed = np.exp(omega) * float(w @ (soj.tail(x) * np.exp(L * x))) if x.size else 0.0
    offset = t if reading == "t" else 1.0
    return params.lam * (left + stayed - offset)


def m_plus_one(params, t, omega, theta, reading="t"):
    return float(np.exp(log_m_plus_one(params, t, omega, theta, reading)))


def _law_moments(law, t, L, shift):
    """Moments E[x^j e^{Lx - shift}; x <= t] for j = 0, 1, 2, plus the
    integrated-tail moments int_0^t x^j e^{Lx - shift} tail(x) dx."""
    x, w = composite_rule(0.0, t, tuple(law.kinks) + tuple(v for v, _ in law.atoms))
    e = np.exp(L * x - shift)
    dens = w * law.density(x) * e
    inside = np.array([dens.sum(), dens @ x, dens @ x**2])
    for v, p in law.atoms:
        if 0 < v <= t:
            ev = p * np.exp(L * v - shift)
            inside += ev * np.array([1.0, v, v * v])
    tw = w * law.tail(x) * e
    tails = np.array([tw.sum(), tw @ x, tw @ x**2])
    return x, w, inside, tails


def one_point_cumulant(params, t, omega, theta, order=0):
    """N_t(omega, theta) = f0 log M^- + log M^+ with its gradient and Hessian.

    Returns ``N`` when ``order=0``, ``(N, grad)`` for 1 and
    ``(N, grad, hess)`` for 2, derivatives taken in ``(omega, theta)``.
    """
    L, dL, d2L = (float(v) for v in log_phi_derivs(params, theta))
    shift = max(0.0, L * t) + max(0.0, omega)
    tj = np.array([1.0, t, t * t])

    # initial clients: A_j = P_j + e^omega Q_j, all scaled by e^{-shift}
    if params.f0 > 0:
        _, _, P, _ = _law_moments(params.residual, t, L, shift)
        Q = tj * np.exp(L * t + omega - shift) * float(params.residual.tail(t))
        A = P + Q
        logA = np.log(A[0]) + shift
        a1, a2 = A[1] / A[0], A[2] / A[0]
        q0, q1 = Q[0] / A[0], Q[1] / A[0]
    else:
        logA = a1 = a2 = q0 = q1 = 0.0

    # arrivals: B_j = R_j + e^omega S_j
    if params.lam > 0:
        soj = params.sojourn
        x, w, _, S = _law_moments(soj, t, L, shift)
        ein = w * soj.density(x) * np.exp(L * x - shift) * (t - x)
        R = np.array([ein.sum(), ein @ x, ein @ x**2])
        for v, p in soj.atoms:
            if 0 < v <= t:
                R += p * np.exp(L * v - shift) * (t - v) * np.array([1.0, v, v * v])
        scale = np.exp(shift)
        Bs = S * np.exp(omega) * scale
        B = R * scale + Bs
    else:
        B = np.zeros(3)
        Bs = np.zeros(3)

    f0, lam = params.f0, params.lam
    N = f0 * logA + lam * (B[0] - t)
    if order == 0:
        return N
    grad = np.array([f0 * q0 + lam * Bs[0], dL * (f0 * a1 + lam * B[1])])
    if order == 1:
        return N, grad
    h_ww = f0 * q0 * (1 - q0) + lam * Bs[0]
    h_wt = dL * (f0 * (q1 - q0 * a1) + lam * Bs[1])
    h_tt = d2L * (f0 * a1 + lam * B[1]) + dL**2 * (f0 * (a2 - a1 * a1) + lam * B[2])
    hess = np.array([[h_ww, h_wt], [h_wt, h_tt]])
    return N, grad, hess


# ---------------------------------------------------------------------------
# several time points
# ---------------------------------------------------------------------------


def m_minus_multi(params, grid, duals):
    """E exp(Psi(exit of the initial client)) on a grid."""
    _check(grid, duals)
    L, C, Om = _slopes(params, grid, duals)
    e = grid.edges
    res = params.residual
    lo, hi = e[:-1], e[1:]
    inside = res.expect_batch(lambda x: np.exp(L[:, None] * (x - lo[:, None])), lo, hi)
    total = np.sum(np.exp(Om[:-1] + C[:-1]) * inside)
    return float(total + np.exp(Om[-1] + C[-1]) * res.tail(e[-1]))


def log_m_plus_multi(params, grid, duals):
    """log of the arrivals' mgf on a grid.

    For an arrival at ``a = t_{l-1} + s`` the inner expectation is split
    into the cells ``(t_{k-1}, t_k]`` where the client leaves, plus the
    event that it stays past ``t_d``. The outer integral over ``s`` is split
    wherever an inner limit crosses a kink or atom of the sojourn law.
    """
    _check(grid, duals)
    if params.lam == 0:
        return 0.0
    L, C, Om = _slopes(params, grid, duals)
    e = grid.edges
    d = grid.d
    soj = params.sojourn
    marks = np.array(sorted(set(soj.kinks) | {v for v, _ in soj.atoms}), dtype=float)
    total = 0.0
    for ell in range(1, d + 1):
        a_lo, a_hi = e[ell - 1], e[ell]
        splits = (e[ell:, None] - marks[None, :]).ravel() if marks.size else ()
        a, wa = composite_rule(a_lo, a_hi, splits)
        base = Om[ell - 1] + C[ell - 1] + L[ell - 1] * (a - a_lo)  # Psi(a)
        ks = np.arange(ell, d + 1)
        # exponent of Psi(a + tau) - Psi(a) = c + L_k tau on cell k
        c = (Om[ks - 1] + C[ks - 1])[None, :] + L[ks - 1][None, :] * (a[:, None] - e[ks - 1][None, :])
        c = c - base[:, None]
        lo = np.maximum(e[ks - 1][None, :] - a[:, None], 0.0)
        hi = e[ks][None, :] - a[:, None]
        slope = np.broadcast_to(L[ks - 1][None, :], c.shape).ravel()
        cc = c.ravel()
        inner = soj.expect_batch(lambda x: np.exp(cc[:, None] + slope[:, None] * x), lo.ravel(), hi.ravel())
        inner = inner.reshape(c.shape).sum(axis=1)
        stay = soj.tail(e[-1] - a) * np.exp(Om[-1] + C[-1] - base)
        total += float(wa @ (inner + stay - 1.0))
    return params.lam * total


def m_plus_multi(params, grid, duals):
    return float(np.exp(log_m_plus_multi(params, grid, duals)))


def log_n(params, grid, duals):
    """Joint cumulant f0 log M^- + log M^+."""
    out = log_m_plus_multi(params, grid, duals)
    if params.f0 > 0:
        out += params.f0 * np.log(m_minus_multi(params, grid, duals))
    return out


# ---------------------------------------------------------------------------
# dual functions and the limiting mgfs
# ---------------------------------------------------------------------------

_PSI_NODES = 8


@dataclass(frozen=True)
class DualFunction:
    """Dual functions omega(s), theta(s) on a uniform grid over [0, T],
    linearly interpolated."""

    T: float
    omega: tuple
    theta: tuple

    def __post_init__(self):
        w = np.asarray(self.omega, dtype=float)
        th = np.asarray(self.theta, dtype=float)
        if w.shape != th.shape or w.ndim != 1 or w.size < 2:
            raise ValueError("need at least two nodes for omega and theta")
        object.__setattr__(self, "omega", tuple(map(float, w)))
        object.__setattr__(self, "theta", tuple(map(float, th)))

    @classmethod
    def from_callables(cls, T, omega, theta, nodes=513):
        s = np.linspace(0.0, T, nodes)
        return cls(T, np.broadcast_to(omega(s), s.shape), np.broadcast_to(theta(s), s.shape))

    @property
    def nodes(self):
        return np.linspace(0.0, self.T, len(self.omega))

    @property
    def h(self):
        return self.T / (len(self.omega) - 1)

    def _antiderivative(self, vals, s):
        v = np.asarray(vals)
        h = self.h
        cum = np.concatenate([[0.0], np.cumsum(0.5 * h * (v[1:] + v[:-1]))])
        s = np.clip(np.asarray(s, dtype=float), 0.0, self.T)
        j = np.minimum((s / h).astype(int), len(v) - 2)
        x = s - j * h
        return cum[j] + v[j] * x + (v[j + 1] - v[j]) * x * x / (2 * h)

    def value(self, s, which="theta"):
        v = self.theta if which == "theta" else self.omega
        return np.interp(s, self.nodes, v)

    def Omega(self, s):
        return self._antiderivative(self.omega, s)

    def Theta(self, s):
        return self._antiderivative(self.theta, self.T) - self._antiderivative(self.theta, s)


class _Psi:
    """Evaluator of Psi(u) = Omega(u) + int_0^u log phi(Theta(s)) ds."""

    def __init__(self, params, duals):
        self.params = params
        self.duals = duals
        xg, wg = gauss_legendre(_PSI_NODES)
        self.xg = 0.5 * (xg + 1.0)
        self.wg = 0.5 * wg
        nodes = duals.nodes
        h = duals.h
        pts = nodes[:-1, None] + h * self.xg[None, :]
        cells = h * (log_phi(params, duals.Theta(pts)) @ self.wg)
        self.cum = np.concatenate([[0.0], np.cumsum(cells)])

    def __call__(self, u):
        u = np.clip(np.asarray(u, dtype=float), 0.0, self.duals.T)
        h = self.duals.h
        j = np.minimum((u / h).astype(int), len(self.cum) - 2)
        x = u - j * h
        pts = (j * h)[..., None] + x[..., None] * self.xg
        part = x * (log_phi(self.params, self.duals.Theta(pts)) @ self.wg)
        return self.duals.Omega(u) + self.cum[j] + part


def psi(params, duals, u):
    return _Psi(params, duals)(u)


def m_minus_limit(params, duals):
    """int_0^T h0(u) e^{Psi(u)} du + tail0(T) e^{Psi(T)}."""
    P = _Psi(params, duals)
    T = duals.T
    res = params.residual
    x, w = composite_rule(0.0, T, tuple(duals.nodes[1:-1]) + tuple(res.kinks), n=_PSI_NODES)
    return float(w @ (res.density(x) * np.exp(P(x))) + res.tail(T) * np.exp(P(T)))


def m_plus_limit(params, duals):
    """exp(lam int_0^T (Phi(s) + Phibar(s) - 1) ds)."""
    if params.lam == 0:
        return 1.0
    P = _Psi(params, duals)
    T = duals.T
    soj = params.sojourn
    marks = [T - k for k in set(soj.kinks) | {v for v, _ in soj.atoms}]
    s, ws = composite_rule(0.0, T, tuple(duals.nodes[1:-1]) + tuple(marks), n=_PSI_NODES)
    ps = P(s)
    phi_in = soj.expect_batch(lambda x: np.exp(P(s[:, None] + x) - ps[:, None]), np.zeros_like(s), T - s)
    phi_bar = soj.tail(T - s) * np.exp(P(T) - ps)
    return float(np.exp(params.lam * (ws @ (phi_in + phi_bar - 1.0))))


def embed(duals, d):
    """Finite-dimensional duals on t_k = k T / d with theta_k = Delta theta(t_k)
    and omega_k = Delta omega(t_k)."""
    delta = duals.T / d
    t = delta * np.arange(1, d + 1)
    return TimeGrid(t), DualVector(delta * duals.value(t, "omega"), delta * duals.value(t, "theta"))

"""Probability laws on [0, inf) used for claims and sojourn times."""

from dataclasses import dataclass
from math import comb, factorial, inf

import numpy as np
from scipy import special

from .quadrature import batch_rule, composite_rule

# Geometric grading toward 0 for densities that are not smooth there.
_GRADING = tuple(10.0**-k for k in range(12, 0, -1))

FAMILY_CODES = {"exponential": 0, "uniform": 1, "deterministic": 2, "gamma": 3, "excess-of": 4}


class Distribution:
    """Base class. Subclasses are frozen dataclasses holding family params.

    ``kinks`` are points where the density is not smooth, ``atoms`` are
    ``(location, mass)`` pairs. ``expect`` integrates over the half-open
    range ``(lo, hi]``, which is the convention used throughout for
    "left by time x" events.
    """

    family = ""
    kinks = ()
    atoms = ()
    bounded_density = True
    theta_max = inf
    support_upper = inf

    # -- interface every family provides ---------------------------------
    def density(self, t):
        raise NotImplementedError

    def partial_moment(self, k, t):
        """E[(X - t)_+^k] for t >= 0; k = 0 gives the tail P(X > t)."""
        raise NotImplementedError

    def mgf(self, theta):
        raise NotImplementedError

    def sample(self, rng, size=None):
        raise NotImplementedError

    def sample_size_biased(self, rng, size=None):
        raise NotImplementedError

    def scaled(self, c):
        raise NotImplementedError

    def params(self):
        raise NotImplementedError

    # -- derived quantities ----------------------------------------------
    def tail(self, t):
        return self.partial_moment(0, np.maximum(t, 0.0))

    def cdf(self, t):
        return 1.0 - self.tail(t)

    def moment(self, k):
        return float(self.partial_moment(k, 0.0))

    def mean(self):
        return self.moment(1)

    def second_moment(self):
        return self.moment(2)

    def mgf_derivative(self, theta, order):
        """d^order/dtheta^order of the mgf, i.e. E[X^order exp(theta X)]."""
        self._check_theta(theta)
        theta = np.asarray(theta, dtype=float)
        upper = self._truncation(float(np.max(theta, initial=0.0)), order)
        x, w = composite_rule(0.0, upper, self.kinks)
        weights = w * x**order * self.density(x)
        out = np.exp(np.multiply.outer(theta, x)) @ weights
        for v, p in self.atoms:
            out = out + p * v**order * np.exp(theta * v)
        return out

    def _truncation(self, theta, order):
        if np.isfinite(self.support_upper):
            return self.support_upper
        x = max(1.0, 2.0 * self.mean())
        while self.tail(x) * np.exp(theta * x) * (1.0 + x) ** (order + 1) > 1e-18:
            x *= 1.5
        return x

    def _check_theta(self, theta):
        if np.any(np.asarray(theta) >= self.theta_max):
            raise DomainError(f"mgf of {self.family} is infinite at theta >= {self.theta_max}")

    def expect(self, g, lo, hi):
        """Integral of g over (lo, hi] against this law."""
        lo = max(lo, 0.0)
        if hi <= lo:
            return 0.0
        x, w = composite_rule(lo, hi, self.kinks)
        total = float(w @ (self.density(x) * g(x))) if x.size else 0.0
        for v, p in self.atoms:
            if lo < v <= hi:
                total += p * float(g(np.array([v]))[0])
        return total

    def expect_batch(self, g, lo, hi):
        """Row-wise integrals of g over (lo_i, hi_i]; g maps (m, K) -> (m, K)."""
        lo = np.maximum(np.atleast_1d(np.asarray(lo, dtype=float)), 0.0)
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        x, w = batch_rule(lo, hi, self.kinks)
        out = np.sum(w * self.density(x) * g(x), axis=1)
        for v, p in self.atoms:
            hit = (lo < v) & (v <= hi)
            if np.any(hit):
                out = out + p * hit * g(np.full((lo.size, 1), v))[:, 0]
        return out

    def to_dict(self):
        return {"family": self.family, "params": self.params()}

    def kernel_params(self):
        """Flat float encoding consumed by the compiled simulator."""
        p = list(self.params().values())
        return np.array([FAMILY_CODES[self.family], *p, 0.0, 0.0, 0.0][:6], dtype=float)


class DomainError(ValueError):
    """Raised when a dual argument lies at or beyond the mgf abscissa."""


def _pm_from_moments(dist, k, t):
    # E[(X - t)^k] for t <= 0, where X - t >= 0 surely.
    return sum(comb(k, j) * dist.moment(j) * (-t) ** (k - j) for j in range(k + 1))


@dataclass(frozen=True)
class Exponential(Distribution):
    rate: float

    family = "exponential"

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError("exponential rate must be positive")

    @property
    def theta_max(self):
        return self.rate

    def density(self, t):
        t = np.asarray(t, dtype=float)
        return np.where(t >= 0, self.rate * np.exp(-self.rate * np.maximum(t, 0.0)), 0.0)

    def partial_moment(self, k, t):
        t = np.maximum(np.asarray(t, dtype=float), 0.0)
        return factorial(k) / self.rate**k * np.exp(-self.rate * t)

    def moment(self, k):
        return factorial(k) / self.rate**k

    def mgf(self, theta):
        self._check_theta(theta)
        return self.rate / (self.rate - np.asarray(theta, dtype=float))

    def mgf_derivative(self, theta, order):
        self._check_theta(theta)
        return factorial(order) * self.rate / (self.rate - np.asarray(theta, dtype=float)) ** (order + 1)

    def sample(self, rng, size=None):
        return rng.exponential(1.0 / self.rate, size)

    def sample_size_biased(self, rng, size=None):
        return rng.gamma(2.0, 1.0 / self.rate, size)

    def scaled(self, c):
        return Exponential(self.rate / c)

    def params(self):
        return {"rate": self.rate}


@dataclass(frozen=True)
class Uniform(Distribution):
    lower: float
    upper: float

    family = "uniform"

    def __post_init__(self):
        if not 0 <= self.lower < self.upper:
            raise ValueError("uniform law needs 0 <= lower < upper")

    @property
    def kinks(self):
        return tuple(p for p in (self.lower, self.upper) if p > 0)

    @property
    def support_upper(self):
        return self.upper

    def density(self, t):
        t = np.asarray(t, dtype=float)
        inside = (t >= self.lower) & (t <= self.upper)
        return np.where(inside, 1.0 / (self.upper - self.lower), 0.0)

    def partial_moment(self, k, t):
        t = np.asarray(t, dtype=float)
        a, b = self.lower, self.upper
        start = np.clip(t, a, b)
        return ((b - t) ** (k + 1) - (start - t) ** (k + 1)) / ((k + 1) * (b - a)) * (t < b)

    def mgf(self, theta):
        return self.mgf_derivative(theta, 0)

    def mgf_derivative(self, theta, order):
        theta = np.asarray(theta, dtype=float)
        x, w = composite_rule(self.lower, self.upper)
        vals = np.exp(np.multiply.outer(theta, x)) * x**order
        return vals @ w / (self.upper - self.lower)

    def sample(self, rng, size=None):
        return rng.uniform(self.lower, self.upper, size)

    def sample_size_biased(self, rng, size=None):
        u = rng.uniform(size=size)
        return np.sqrt(self.lower**2 + u * (self.upper**2 - self.lower**2))

    def scaled(self, c):
        return Uniform(self.lower * c, self.upper * c)

    def params(self):
        return {"lower": self.lower, "upper": self.upper}


@dataclass(frozen=True)
class Deterministic(Distribution):
    value: float

    family = "deterministic"
    bounded_density = False

    def __post_init__(self):
        if not self.value > 0:
            raise ValueError("deterministic value must be positive")

    @property
    def atoms(self):
        return ((self.value, 1.0),)

    @property
    def support_upper(self):
        return self.value

    def density(self, t):
        return np.zeros_like(np.asarray(t, dtype=float))

    def partial_moment(self, k, t):
        t = np.asarray(t, dtype=float)
        return np.where(self.value > t, np.abs(self.value - t) ** k, 0.0)

    def mgf(self, theta):
        return np.exp(np.asarray(theta, dtype=float) * self.value)

    def mgf_derivative(self, theta, order):
        return self.value**order * self.mgf(theta)

    def sample(self, rng, size=None):
        return np.full(size, self.value) if size is not None else self.value

    def sample_size_biased(self, rng, size=None):
        return self.sample(rng, size)

    def scaled(self, c):
        return Deterministic(self.value * c)

    def params(self):
        return {"value": self.value}


@dataclass(frozen=True)
class Gamma(Distribution):
    shape: float
    rate: float

    family = "gamma"

    def __post_init__(self):
        if not (self.shape > 0 and self.rate > 0):
            raise ValueError("gamma shape and rate must be positive")

    @property
    def theta_max(self):
        return self.rate

    @property
    def bounded_density(self):
        return self.shape >= 1

    @property
    def kinks(self):
        if float(self.shape).is_integer():
            return ()
        return tuple(g / self.rate for g in _GRADING)

    def density(self, t):
        t = np.asarray(t, dtype=float)
        pos = np.maximum(t, 1e-300)
        logd = (
            self.shape * np.log(self.rate)
            + (self.shape - 1) * np.log(pos)
            - self.rate * pos
            - special.gammaln(self.shape)
        )
        return np.where(t > 0, np.exp(logd), 0.0)

    def _upper_moment(self, j, t):
        # E[X^j 1{X > t}]
        a = self.shape + j
        return np.exp(special.gammaln(a) - special.gammaln(self.shape)) / self.rate**j * special.gammaincc(
            a, self.rate * t
        )

    def partial_moment(self, k, t):
        t = np.maximum(np.asarray(t, dtype=float), 0.0)
        return sum(comb(k, j) * (-t) ** (k - j) * self._upper_moment(j, t) for j in range(k + 1))

    def mgf(self, theta):
        self._check_theta(theta)
        return (self.rate / (self.rate - np.asarray(theta, dtype=float))) ** self.shape

    def mgf_derivative(self, theta, order):
        self._check_theta(theta)
        theta = np.asarray(theta, dtype=float)
        rising = np.prod([self.shape + j for j in range(order)]) if order else 1.0
        return rising / (self.rate - theta) ** order * self.mgf(theta)

    def sample(self, rng, size=None):
        return rng.gamma(self.shape, 1.0 / self.rate, size)

    def sample_size_biased(self, rng, size=None):
        return rng.gamma(self.shape + 1.0, 1.0 / self.rate, size)

    def scaled(self, c):
        return Gamma(self.shape, self.rate / c)

    def params(self):
        return {"shape": self.shape, "rate": self.rate}


@dataclass(frozen=True)
class Excess(Distribution):
    """Stationary excess (equilibrium residual) law of ``inner``."""

    inner: Distribution

    family = "excess-of"

    @property
    def kinks(self):
        return tuple(sorted(set(self.inner.kinks) | {v for v, _ in self.inner.atoms}))

    @property
    def theta_max(self):
        return self.inner.theta_max

    @property
    def support_upper(self):
        return self.inner.support_upper

    def density(self, t):
        t = np.asarray(t, dtype=float)
        return np.where(t >= 0, self.inner.tail(t) / self.inner.mean(), 0.0)

    def partial_moment(self, k, t):
        t = np.maximum(np.asarray(t, dtype=float), 0.0)
        return self.inner.partial_moment(k + 1, t) / ((k + 1) * self.inner.mean())

    def mgf(self, theta):
        return self.mgf_derivative(theta, 0)

    def mgf_derivative(self, theta, order):
        if order == 0 and np.all(np.abs(theta) >= 1e-3):
            self._check_theta(theta)
            theta = np.asarray(theta, dtype=float)
            return (self.inner.mgf(theta) - 1.0) / (theta * self.inner.mean())
        return Distribution.mgf_derivative(self, theta, order)

    def sample(self, rng, size=None):
        return rng.uniform(size=size) * self.inner.sample_size_biased(rng, size)

    def sample_size_biased(self, rng, size=None):
        # Size-biased excess: density y * tail(y) / E[X^2/2].
        raise NotImplementedError("size-biased sampling of an excess law is not supported")

    def scaled(self, c):
        return Excess(self.inner.scaled(c))

    def params(self):
        return {"inner": self.inner.to_dict()}

    def kernel_params(self):
        inner = self.inner.kernel_params()
        if inner[0] == FAMILY_CODES["excess-of"]:
            raise NotImplementedError("nested excess laws cannot be simulated")
        return np.array([FAMILY_CODES["excess-of"], 0.0, 0.0, inner[0], inner[1], inner[2]])


_FAMILIES = {
    "exponential": Exponential,
    "uniform": Uniform,
    "deterministic": Deterministic,
    "gamma": Gamma,
}


def from_dict(d):
    """Build a law from ``{"family": ..., "params": {...}}``."""
    family = d["family"]
    params = dict(d.get("params", {}))
    if family in ("excess-of", "excess"):
        return Excess(from_dict(params["inner"]))
    try:
        cls = _FAMILIES[family]
    except KeyError:
        raise ValueError(f"unknown distribution family {family!r}") from None
    return cls(**{k: float(v) for k, v in params.items()})

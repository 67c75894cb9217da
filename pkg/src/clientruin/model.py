"""Model parameters, the per-client Levy exponent and the fluid limits."""

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import yaml
from scipy.optimize import brentq

from . import distributions as dist
from .distributions import DomainError, Distribution, Excess

__all__ = [
    "DomainError",
    "ModelParams",
    "phi",
    "log_phi",
    "log_phi_derivs",
    "fluid_population",
    "fluid_integral",
    "fluid_claims",
    "net_profit_holds",
    "adjustment_coefficient",
    "load_config",
    "params_from_dict",
]


@dataclass(frozen=True)
class ModelParams:
    """Cramer-Lundberg portfolio with an M/G/inf client population.

    ``lam`` is the client arrival rate, ``f0`` the initial client mass,
    ``nu`` and ``r`` the per-client claim rate and premium rate. The
    residual law of the initial clients defaults to the stationary excess
    of the sojourn law.
    """

    lam: float
    f0: float
    nu: float
    r: float
    claim: Distribution
    sojourn: Distribution
    residual: Distribution = field(default=None)

    def __post_init__(self):
        if self.residual is None:
            object.__setattr__(self, "residual", Excess(self.sojourn))
        if self.lam < 0 or self.nu < 0 or self.f0 < 0:
            raise ValueError("lam, nu and f0 must be non-negative")
        if not self.r > 0:
            raise ValueError("premium rate r must be positive")
        if not self.residual.bounded_density:
            raise ValueError(f"residual law {self.residual.family} has no bounded density")

    @property
    def mbar(self):
        return self.claim.mean()

    @property
    def theta_max(self):
        return np.inf if self.nu == 0 else self.claim.theta_max

    def with_(self, **kw):
        return replace(self, **kw)

    def to_dict(self):
        return {
            "lambda": self.lam,
            "f0": self.f0,
            "nu": self.nu,
            "r": self.r,
            "claim": self.claim.to_dict(),
            "sojourn": self.sojourn.to_dict(),
            "residual": self.residual.to_dict(),
        }


def params_from_dict(d):
    residual = d.get("residual")
    return ModelParams(
        lam=float(d["lambda"]),
        f0=float(d["f0"]),
        nu=float(d["nu"]),
        r=float(d["r"]),
        claim=dist.from_dict(d["claim"]),
        sojourn=dist.from_dict(d["sojourn"]),
        residual=dist.from_dict(residual) if residual else None,
    )


def load_config(path):
    """Read a JSON or YAML config with sections ``model``, ``sim``, ``solver``.

    A file holding only the model keys is accepted too. Returns
    ``(params, sections)`` where ``sections`` is the raw dict.
    """
    text = Path(path).read_text()
    raw = json.loads(text) if str(path).endswith(".json") else yaml.safe_load(text)
    model = raw.get("model", raw)
    return params_from_dict(model), raw


def log_phi(params, theta):
    """log phi(theta) = -r theta + nu (beta(theta) - 1)."""
    theta = np.asarray(theta, dtype=float)
    if params.nu == 0:
        return -params.r * theta
    return -params.r * theta + params.nu * (params.claim.mgf(theta) - 1.0)


def log_phi_derivs(params, theta):
    """(log phi, d/dtheta, d2/dtheta2) at theta."""
    theta = np.asarray(theta, dtype=float)
    if params.nu == 0:
        return -params.r * theta, np.full_like(theta, -params.r), np.zeros_like(theta)
    c = params.claim
    return (
        -params.r * theta + params.nu * (c.mgf(theta) - 1.0),
        -params.r + params.nu * c.mgf_derivative(theta, 1),
        params.nu * c.mgf_derivative(theta, 2),
    )


def phi(params, theta):
    return np.exp(log_phi(params, theta))


def fluid_population(params, t):
    """f(t) = f0 tail_res(t) + lam int_0^t tail_soj(s) ds."""
    t = np.asarray(t, dtype=float)
    s = params.sojourn
    return params.f0 * params.residual.tail(t) + params.lam * (s.mean() - s.partial_moment(1, t))


def fluid_integral(params, t):
    """int_0^t f(s) ds, in closed form through partial moments."""
    t = np.asarray(t, dtype=float)
    s, res = params.sojourn, params.residual
    first = params.f0 * (res.mean() - res.partial_moment(1, t))
    second = params.lam * (s.mean() * t - 0.5 * (s.moment(2) - s.partial_moment(2, t)))
    return first + second


def fluid_claims(params, t):
    """g(t) = (nu mbar - r) int_0^t f."""
    return (params.nu * params.mbar - params.r) * fluid_integral(params, t)


def net_profit_holds(params):
    return params.r > params.mbar * params.nu


def adjustment_coefficient(params):
    """Positive root of log phi, or inf when there is none."""
    if params.nu == 0 or not net_profit_holds(params):
        return np.inf if params.nu == 0 else 0.0
    hi = min(1.0, params.theta_max / 2)
    cap = params.theta_max
    while log_phi(params, hi) < 0:
        hi = 0.5 * (hi + cap) if np.isfinite(cap) else 2 * hi
        if np.isfinite(cap) and cap - hi < 1e-12:
            return cap
    return brentq(lambda x: float(log_phi(params, x)), 1e-12, hi, xtol=1e-14, rtol=1e-14)

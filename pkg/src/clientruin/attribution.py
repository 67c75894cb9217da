"""How much of a capital fluctuation comes from client-count fluctuations.

E1 compares the extra premium income earned by the conditioned client
path with the total deviation of net claims from the fluid value; E2 is the
remainder, attributed to the claims themselves.
"""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.integrate import simpson
from scipy.stats import linregress

from .distributions import Exponential
from .model import fluid_claims, fluid_integral, fluid_population, net_profit_holds
from .pathsolver import MostLikelyPath, RuinQuery, most_likely_path
from .quadrature import integrate

EPS_SCHEDULE = (0.2, 0.1, 0.05)
SWEEP_A = (0.0, -0.5, -0.9, -1.1, -1.5, -2.0)
SWEEP_NU = tuple(2.0**k for k in range(-3, 9))


@dataclass
class AttributionResult:
    a: float
    T: float
    e1: float
    e2: float
    numerator: float
    denominator: float
    path: MostLikelyPath = None


def e1(params, a, T, d=64):
    """E1(a, T) from the most likely path with g(T) = a."""
    if not net_profit_holds(params):
        raise ValueError("attribution needs r > nu * mbar")
    gbar = float(fluid_claims(params, T))
    denom = gbar - a
    if abs(denom) < 1e-12:
        raise ValueError("a equals the fluid value; E1 is undefined there")
    mlp = most_likely_path(params, RuinQuery(a, T, "point", d))
    s = mlp.path.times
    extra = simpson(mlp.path.f - mlp.f_bar, x=s)
    num = (params.r - params.mbar * params.nu) * extra
    val = num / denom
    return AttributionResult(a, T, val, 1.0 - val, num, denom, mlp)


def _exponential_rate(params):
    if not isinstance(params.sojourn, Exponential):
        raise ValueError("the closed-form limit needs an exponential sojourn law")
    return params.sojourn.rate


def ect_profile(params, T, t):
    """(lam + f(t) mu) w(t)^2 with w(t) = ((r - nu mbar)/mu)(1 - e^{-mu(T-t)})."""
    mu = _exponential_rate(params)
    w = (params.r - params.nu * params.mbar) / mu * (1.0 - np.exp(-mu * (T - np.asarray(t))))
    return (params.lam + fluid_population(params, t) * mu) * w * w


def e1_limit_exponential(params, T):
    """Limit of E1(a, T) as a approaches the fluid value, exponential sojourn."""
    _exponential_rate(params)
    num = integrate(lambda t: ect_profile(params, T, t), 0.0, T)
    claims = params.claim.moment(2) * params.nu * float(fluid_integral(params, T))
    return num / (num + claims)


def e1_extrapolated(params, T, eps=EPS_SCHEDULE, d=64):
    """E1 at a = g(T) - eps for each eps, extrapolated to eps = 0 by a
    polynomial through the points."""
    gbar = float(fluid_claims(params, T))
    vals = np.array([e1(params, gbar - e, T, d).e1 for e in eps])
    coef = np.polyfit(np.asarray(eps), vals, len(eps) - 1)
    return float(np.polyval(coef, 0.0)), vals


def marginal_rate_fit(params, T, eps=0.05, d=64):
    """Extra client inflow of the conditioned path, weighted by the premium a
    client arriving at t still earns, regressed on the closed-form profile.

    Returns ``(t, c, profile, r_squared)``.
    """
    mu = _exponential_rate(params)
    gbar = float(fluid_claims(params, T))
    res = e1(params, gbar - eps, T, d)
    t = res.path.path.times
    f = res.path.path.f
    inflow = np.gradient(f, t) - params.lam + mu * f
    w = (params.r - params.nu * params.mbar) / mu * (1.0 - np.exp(-mu * (T - t)))
    c = inflow * w
    prof = ect_profile(params, T, t)
    fit = linregress(prof, c)
    return t, c, prof, fit.rvalue**2


def scale_claim_rate(params, nu):
    """Same nu * mbar, claims arriving at rate ``nu``."""
    return params.with_(nu=nu, claim=params.claim.scaled(params.nu / nu))


def _sweep_cell(args):
    params, nu, a, T, d, limit = args
    p = scale_claim_rate(params, nu)
    try:
        val = e1(p, a, T, d).e1
        err = ""
    except (ValueError, ArithmeticError) as exc:
        val, err = math.nan, str(exc)
    return {"nu": nu, "a": a, "e1": val, "e1_limit": limit, "error": err}


def attribution_sweep(params, a_list=SWEEP_A, nu_grid=SWEEP_NU, T=1.0, d=64, jobs=1):
    """Rows (nu, a, e1, e1_limit), nu-major; failed cells carry nan and an
    error message."""
    limits = {}
    for nu in nu_grid:
        try:
            limits[nu] = e1_limit_exponential(scale_claim_rate(params, nu), T)
        except ValueError:
            limits[nu] = math.nan
    cells = [(params, nu, a, T, d, limits[nu]) for nu in nu_grid for a in a_list]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as ex:
            return list(ex.map(_sweep_cell, cells))
    return [_sweep_cell(c) for c in cells]

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import norm

from clientruin import Deterministic, Exponential, Gamma, ModelParams, Uniform
from clientruin.model import fluid_claims, fluid_integral, fluid_population
from clientruin.simulate import (
    SimConfig,
    conditioned_ensemble,
    empirical_decay,
    estimate_ruin_probability,
    sample_trajectory,
    wilson_interval,
)
from clientruin.verify import check_equilibrium_occupancy

from conftest import bottom_row, top_row

LAWS = [
    top_row(),
    bottom_row(),
    ModelParams(2.0, 0.5, 2.0, 3.0, Gamma(0.7, 1.4), Gamma(2.5, 2.0)),
    ModelParams(1.0, 1.0, 1.0, 2.0, Uniform(0.5, 1.5), Deterministic(1.0)),
]


def test_no_claims_no_ruin():
    p = top_row().with_(nu=0.0)
    est = estimate_ruin_probability(p, SimConfig(n=10, T=3.0, replications=2000, seed=1), 0.1)
    assert est.hits == 0 and est.p_hat == 0.0 and est.zero_hits
    assert est.ci_high == pytest.approx(1 - 0.05 ** (1 / 2000))


def test_zero_surplus_is_ruined_at_once(top):
    est = estimate_ruin_probability(top, SimConfig(n=10, T=1.0, replications=500, seed=1), 0.0)
    assert est.p_hat == 1.0


def test_same_seed_same_answer_across_jobs(top):
    a = estimate_ruin_probability(top, SimConfig(n=10, T=2.0, replications=4000, seed=9), 0.5)
    b = estimate_ruin_probability(top, SimConfig(n=10, T=2.0, replications=4000, seed=9, jobs=2), 0.5)
    c = estimate_ruin_probability(top, SimConfig(n=10, T=2.0, replications=4000, seed=10), 0.5)
    assert a.hits == b.hits
    assert a.hits != c.hits
    t1 = sample_trajectory(top, SimConfig(n=10, T=2.0, seed=9), 17)
    t2 = sample_trajectory(top, SimConfig(n=10, T=2.0, seed=9), 17)
    assert np.array_equal(t1.claim_sizes, t2.claim_sizes)


@pytest.mark.parametrize("params", LAWS, ids=["top", "bottom", "gamma", "fixed"])
def test_conservation_identity(params):
    cfg = SimConfig(n=20, T=4.0, seed=3, record_grid=tuple(np.linspace(0.2, 4.0, 20)))
    for i in range(10):
        assert sample_trajectory(params, cfg, i).conservation_error() < 1e-9


@pytest.mark.parametrize("params", LAWS, ids=["top", "bottom", "gamma", "fixed"])
def test_scaled_mean_paths_follow_fluid(params):
    grid = (0.5, 1.5, 3.0)
    cfg = SimConfig(n=20, T=3.0, seed=5, record_grid=grid)
    runs = [sample_trajectory(params, cfg, i) for i in range(2000)]
    F = np.array([r.F for r in runs])
    G = np.array([r.G for r in runs])
    t = np.asarray(grid)
    for got, ref in ((F, fluid_population(params, t)), (G, fluid_claims(params, t))):
        se = got.std(axis=0) / math.sqrt(len(runs))
        assert np.all(np.abs(got.mean(axis=0) - ref) < 5 * se + 1e-3)


def test_departures_balance_arrivals(bottom):
    # expected departures by t: n (f0 + lam t - f(t))
    cfg = SimConfig(n=40, T=2.0, seed=8)
    t = 1.2
    deps = np.array([sample_trajectory(bottom, cfg, i).departures(0.0, t) for i in range(1500)])
    ref = 40 * (bottom.f0 + bottom.lam * t - float(fluid_population(bottom, t)))
    assert abs(deps.mean() - ref) < 5 * deps.std() / math.sqrt(deps.size)


def test_claim_totals(top):
    cfg = SimConfig(n=20, T=2.0, seed=4)
    runs = [sample_trajectory(top, cfg, i) for i in range(1000)]
    counts = np.array([r.claim_times.size for r in runs])
    ref = 20 * top.nu * float(fluid_integral(top, 2.0))
    assert abs(counts.mean() - ref) < 5 * counts.std() / math.sqrt(counts.size)
    sizes = np.concatenate([r.claim_sizes for r in runs])
    assert abs(sizes.mean() - top.mbar) < 5 * sizes.std() / math.sqrt(sizes.size)


@pytest.mark.parametrize("sojourn", [Exponential(1.0), Uniform(0.0, 2.0), Gamma(2.0, 2.0)], ids=repr)
def test_stationary_head_count_is_poisson(sojourn):
    p = top_row().with_(sojourn=sojourn, residual=None)
    assert check_equilibrium_occupancy(p).passed


def test_wilson_interval_properties():
    lo, hi = wilson_interval(100, 1000)
    assert lo < 0.1 < hi
    lo2, hi2 = wilson_interval(200, 2000)
    assert (hi - lo) / (hi2 - lo2) == pytest.approx(math.sqrt(2), rel=0.02)
    assert wilson_interval(0, 100)[0] == 0.0
    assert wilson_interval(100, 100)[1] == 1.0


@given(st.integers(0, 500), st.integers(1, 500))
def test_wilson_interval_contains_estimate(k, extra):
    n = k + extra
    lo, hi = wilson_interval(k, n)
    assert 0.0 <= lo <= k / n <= hi <= 1.0


def test_wilson_interval_coverage():
    # repeated binomial draws; coverage near 95 %
    rng = np.random.default_rng(0)
    p, n = 0.03, 400
    ks = rng.binomial(n, p, 4000)
    cover = np.mean([lo <= p <= hi for lo, hi in (wilson_interval(k, n) for k in ks)])
    assert abs(cover - 0.95) < 3 * math.sqrt(0.95 * 0.05 / ks.size) + 0.01


def test_conditioned_paths_carry_more_clients(top):
    cfg = SimConfig(n=5, T=1.0, replications=40000, seed=3, record_grid=(0.5, 1.0))
    grid, cond, mean, k = conditioned_ensemble(top, cfg, 1.0)
    assert k >= 100
    assert np.all(cond > mean + 0.01)
    assert np.allclose(mean, 1.0, atol=0.01)


def test_conditioned_ensemble_needs_hits(top):
    cfg = SimConfig(n=40, T=0.5, replications=200, seed=3, record_grid=(0.25,))
    with pytest.raises(ValueError):
        conditioned_ensemble(top, cfg, 5.0)


def test_empirical_decay_shape(top):
    fit = empirical_decay(top, 0.5, 2.0, (4, 8, 12), 20000, seed=1)
    assert fit.slope > 0
    assert [row["n"] for row in fit.table] == [4, 8, 12]
    with pytest.raises(ValueError):
        empirical_decay(top, 0.5, 2.0, (8, 4, 12), 100)


def test_config_validation():
    with pytest.raises(ValueError):
        SimConfig(n=0, T=1.0)
    with pytest.raises(ValueError):
        SimConfig(n=5, T=1.0, initial="other")

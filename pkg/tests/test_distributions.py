import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from clientruin.distributions import (
    Deterministic,
    DomainError,
    Excess,
    Exponential,
    Gamma,
    Uniform,
    from_dict,
)

CONTINUOUS = [
    Exponential(1.5),
    Exponential(0.3),
    Uniform(0.0, 1.0),
    Uniform(0.5, 2.0),
    Gamma(0.7, 2.0),
    Gamma(2.5, 1.0),
    Gamma(3.0, 4.0),
    Excess(Uniform(0.0, 1.0)),
    Excess(Gamma(0.7, 2.0)),
    Excess(Deterministic(2.0)),
]
ALL = CONTINUOUS + [Deterministic(1.3)]


def _upper(d, theta=0.0):
    if np.isfinite(d.support_upper):
        return d.support_upper
    return 80.0 / (d.theta_max - max(theta, 0.0))


@pytest.mark.parametrize("d", CONTINUOUS, ids=repr)
def test_density_integrates_to_one(d):
    total = d.expect(lambda x: np.ones_like(x), 0.0, _upper(d))
    assert abs(total - 1.0) < 1e-8


@pytest.mark.parametrize("d", ALL, ids=repr)
def test_mean_is_integrated_tail(d):
    pts = list(d.kinks) + [v for v, _ in d.atoms]
    pts = [p for p in pts if p > 1e-6] or None
    tail_int, _ = integrate.quad(lambda x: float(d.tail(x)), 0.0, _upper(d), points=pts, limit=400, epsabs=1e-12)
    assert abs(d.mean() - tail_int) < 1e-6


@pytest.mark.parametrize("d", ALL, ids=repr)
def test_tail_decreases_from_one(d):
    x = np.linspace(0.0, _upper(d) * 1.2, 400)
    tail = d.tail(x)
    assert tail[0] == pytest.approx(1.0)
    assert np.all(np.diff(tail) <= 1e-15)
    assert tail[-1] < 1e-10


@pytest.mark.parametrize("d", ALL, ids=repr)
def test_partial_moments_against_quadrature(d):
    for k in (1, 2, 3):
        for t in (0.0, 0.4, 1.1):
            ref = d.expect(lambda x: (x - t) ** k, t, max(_upper(d), t))
            assert d.partial_moment(k, t) == pytest.approx(ref, rel=1e-9, abs=1e-12)


@pytest.mark.parametrize("d", ALL, ids=repr)
def test_mgf_and_derivatives(d):
    assert float(d.mgf(0.0)) == pytest.approx(1.0, abs=1e-12)
    for theta in (-0.7, 0.2):
        for k in (0, 1, 2):
            ref = d.expect(lambda x: x**k * np.exp(theta * x), 0.0, _upper(d, theta))
            assert float(d.mgf_derivative(theta, k)) == pytest.approx(ref, rel=1e-9)
    assert float(d.mgf_derivative(0.0, 1)) == pytest.approx(d.mean(), rel=1e-10)
    assert float(d.mgf_derivative(0.0, 2)) == pytest.approx(d.moment(2), rel=1e-10)


def test_mgf_vectorized_matches_scalar():
    for d in ALL:
        th = np.array([-1.0, 0.0, 0.1])
        vec = d.mgf(th)
        assert np.allclose(vec, [float(d.mgf(t)) for t in th], rtol=1e-12)


def test_excess_of_exponential_is_exponential():
    x = np.linspace(0.0, 8.0, 101)
    for rate in (0.5, 1.0, 3.0):
        e, d = Excess(Exponential(rate)), Exponential(rate)
        assert np.max(np.abs(e.density(x) - d.density(x))) < 1e-10
        assert np.max(np.abs(e.tail(x) - d.tail(x))) < 1e-10


def test_excess_density_is_tail_over_mean():
    inner = Gamma(2.5, 1.3)
    x = np.linspace(0.0, 6.0, 50)
    assert np.allclose(Excess(inner).density(x), inner.tail(x) / inner.mean(), rtol=1e-13)


def test_closed_forms():
    # exponential moments and the uniform excess mean (1/3)
    assert Exponential(2.0).moment(3) == pytest.approx(6 / 8)
    assert Excess(Uniform(0.0, 1.0)).mean() == pytest.approx(1 / 3)
    assert Uniform(0.0, 1.0).partial_moment(1, 0.5) == pytest.approx(0.125)
    assert Gamma(2.0, 1.0).partial_moment(0, 1.0) == pytest.approx(2 * np.exp(-1.0))


def test_mgf_abscissa():
    assert Exponential(1.5).theta_max == 1.5
    with pytest.raises(DomainError):
        Exponential(1.5).mgf(1.5)
    with pytest.raises(DomainError):
        Gamma(2.0, 1.0).mgf_derivative(1.2, 1)
    assert np.isinf(Uniform(0, 1).theta_max)


def test_bounded_density_flags():
    assert not Deterministic(1.0).bounded_density
    assert not Gamma(0.5, 1.0).bounded_density
    assert Excess(Deterministic(1.0)).bounded_density


@pytest.mark.parametrize("d", ALL, ids=repr)
def test_dict_roundtrip(d):
    assert from_dict(d.to_dict()) == d


def test_unknown_family_rejected():
    with pytest.raises(ValueError):
        from_dict({"family": "pareto", "params": {"alpha": 2.0}})
    with pytest.raises(ValueError):
        Uniform(1.0, 1.0)


@given(st.floats(0.1, 5.0), st.floats(0.1, 4.0))
def test_scaling_multiplies_the_variable(c, rate):
    for d in (Exponential(rate), Gamma(1.5, rate), Uniform(0.2, 0.2 + rate), Excess(Exponential(rate))):
        s = d.scaled(c)
        assert s.mean() == pytest.approx(c * d.mean(), rel=1e-10)
        assert float(s.tail(c * 0.7)) == pytest.approx(float(d.tail(0.7)), rel=1e-9, abs=1e-14)


@pytest.mark.parametrize("d", ALL, ids=repr)
def test_sampling_mean(d, rng):
    x = d.sample(rng, 200_000)
    se = np.sqrt(d.moment(2) - d.mean() ** 2) / np.sqrt(x.size)
    assert abs(x.mean() - d.mean()) < 5 * se + 1e-12


def test_expect_counts_atoms_on_half_open_range():
    d = Deterministic(1.0)
    one = lambda x: np.ones_like(x)
    assert d.expect(one, 0.5, 1.0) == 1.0
    assert d.expect(one, 1.0, 2.0) == 0.0
    got = d.expect_batch(one, np.array([0.5, 1.0]), np.array([1.0, 2.0]))
    assert np.array_equal(got, [1.0, 0.0])

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from clientruin import Exponential, ModelParams, Uniform
from clientruin import mgf
from clientruin.mgf import DualFunction, DualVector, TimeGrid, embed
from clientruin.model import fluid_claims, fluid_population

from conftest import bottom_row, top_row

# nested adaptive quadrature, tests/oracles/mgf_quadrature.py
ORACLE = [
    (ModelParams(1.0, 1.0, 3.0, 3.0, Exponential(1.5), Exponential(1.0)), 1.3259462738056136, 0.14099642616158825),
    (ModelParams(3.0, 0.5, 3.0, 3.0, Exponential(1.5), Uniform(0.0, 1.0)), 1.1087007423441073, 0.5960828773128093),
]


@pytest.mark.parametrize("params,minus,logplus", ORACLE)
def test_multi_point_against_quadrature_oracle(params, minus, logplus):
    grid = TimeGrid([0.6, 1.5])
    duals = DualVector([0.3, -0.4], [0.2, -0.3])
    assert mgf.m_minus_multi(params, grid, duals) == pytest.approx(minus, rel=1e-10)
    assert mgf.log_m_plus_multi(params, grid, duals) == pytest.approx(logplus, rel=1e-9)


def test_one_point_closed_form():
    # exponential(1) residual, theta = 0: P(left by 1) + e^omega P(still there)
    p = ModelParams(1.0, 1.0, 1.0, 2.0, Exponential(1.0), Exponential(1.0))
    for w in (-1.0, 0.0, 0.7):
        assert mgf.m_minus_one(p, 1.0, w, 0.0) == pytest.approx((1 - np.exp(-1)) + np.exp(w - 1), rel=1e-12)


def test_two_point_enumeration_theta_zero():
    p = ModelParams(1.0, 1.0, 1.0, 2.0, Exponential(1.0), Uniform(0.0, 2.0))
    res = p.residual
    t1, t2, w1, w2 = 0.5, 1.3, 0.4, -0.8
    ref = float(res.cdf(t1) + np.exp(w1) * (res.cdf(t2) - res.cdf(t1)) + np.exp(w1 + w2) * res.tail(t2))
    got = mgf.m_minus_multi(p, TimeGrid([t1, t2]), DualVector([w1, w2], [0.0, 0.0]))
    assert got == pytest.approx(ref, rel=1e-12)


@pytest.mark.parametrize("params", [top_row(), bottom_row()])
def test_normalization(params):
    grid = TimeGrid([0.3, 1.0, 2.2])
    zero = DualVector.zeros(3)
    assert mgf.m_minus_multi(params, grid, zero) == pytest.approx(1.0, abs=1e-12)
    assert mgf.m_plus_multi(params, grid, zero) == pytest.approx(1.0, abs=1e-12)
    assert mgf.m_plus_one(params, 2.0, 0.0, 0.0) == pytest.approx(1.0, abs=1e-12)
    zf = DualFunction.from_callables(2.0, lambda s: 0 * s, lambda s: 0 * s)
    assert mgf.m_minus_limit(params, zf) == pytest.approx(1.0, abs=1e-12)
    assert mgf.m_plus_limit(params, zf) == pytest.approx(1.0, abs=1e-12)


@given(st.floats(0.1, 3.0), st.floats(-2.0, 2.0), st.floats(-1.0, 1.0))
def test_d1_multi_equals_one_point(t, w, th):
    for p in (top_row(), bottom_row()):
        g, v = TimeGrid([t]), DualVector([w], [th])
        assert mgf.m_minus_multi(p, g, v) == pytest.approx(mgf.m_minus_one(p, t, w, th), rel=1e-10)
        assert mgf.m_plus_multi(p, g, v) == pytest.approx(mgf.m_plus_one(p, t, w, th), rel=1e-10)


def test_refining_with_zero_duals_is_invariant(top):
    grid = TimeGrid([0.8, 2.0])
    duals = DualVector([0.5, -0.3], [0.3, 0.1])
    fine = TimeGrid([0.4, 0.8, 1.1, 2.0])
    fine_duals = DualVector([0.0, 0.5, 0.0, -0.3], [0.0, 0.3, 0.0, 0.1])
    assert mgf.log_n(top, fine, fine_duals) == pytest.approx(mgf.log_n(top, grid, duals), abs=1e-9)


@given(st.floats(-2.0, 2.0), st.floats(0.01, 1.0))
def test_monotone_in_omega(w, dw):
    p = bottom_row()
    grid = TimeGrid([0.5, 1.5])
    lo = mgf.log_n(p, grid, DualVector([w, 0.1], [0.1, 0.1]))
    hi = mgf.log_n(p, grid, DualVector([w + dw, 0.1], [0.1, 0.1]))
    assert hi > lo


@pytest.mark.parametrize("params", [top_row(), bottom_row()])
def test_log_n_gradient_at_zero_is_fluid(params):
    times = np.array([0.4, 1.3, 2.5])
    grid = TimeGrid(times)
    h = 1e-5
    for k in range(3):
        e = np.zeros(3)
        e[k] = h
        dw = (mgf.log_n(params, grid, DualVector(e, 0 * e)) - mgf.log_n(params, grid, DualVector(-e, 0 * e))) / (2 * h)
        dt = (mgf.log_n(params, grid, DualVector(0 * e, e)) - mgf.log_n(params, grid, DualVector(0 * e, -e))) / (2 * h)
        assert dw == pytest.approx(float(fluid_population(params, times[k])), abs=1e-7)
        assert dt == pytest.approx(float(fluid_claims(params, times[k])), abs=1e-7)


def test_one_point_cumulant_derivatives(bottom):
    t, w, th = 1.7, 0.4, 0.3
    N, g, H = mgf.one_point_cumulant(bottom, t, w, th, order=2)
    h = 1e-5
    fn = lambda a, b: mgf.one_point_cumulant(bottom, t, a, b)
    assert N == pytest.approx(bottom.f0 * np.log(mgf.m_minus_one(bottom, t, w, th)) + mgf.log_m_plus_one(bottom, t, w, th), rel=1e-12)
    assert g[0] == pytest.approx((fn(w + h, th) - fn(w - h, th)) / (2 * h), rel=1e-7)
    assert g[1] == pytest.approx((fn(w, th + h) - fn(w, th - h)) / (2 * h), rel=1e-7)
    assert H[0, 1] == pytest.approx(H[1, 0])
    assert H[1, 1] == pytest.approx((mgf.one_point_cumulant(bottom, t, w, th + h, 1)[1][1]
                                    - mgf.one_point_cumulant(bottom, t, w, th - h, 1)[1][1]) / (2 * h), rel=1e-6)


def test_no_arrivals_gives_one():
    p = ModelParams(0.0, 1.0, 3.0, 3.0, Exponential(1.5), Exponential(1.0))
    assert mgf.m_plus_multi(p, TimeGrid([1.0, 2.0]), DualVector([0.4, 0.2], [0.3, 0.1])) == 1.0
    assert mgf.m_plus_one(p, 2.0, 0.3, 0.2) == 1.0


def test_alternative_reading_differs_by_lambda_times_gap(top):
    t = 2.5
    a = mgf.log_m_plus_one(top, t, 0.2, 0.1)
    b = mgf.log_m_plus_one(top, t, 0.2, 0.1, reading="1")
    assert a - b == pytest.approx(top.lam * (1.0 - t), rel=1e-12)


def test_timegrid_validation():
    with pytest.raises(ValueError):
        TimeGrid([1.0, 1.0])
    with pytest.raises(ValueError):
        mgf.m_minus_multi(top_row(), TimeGrid([1.0, 2.0]), DualVector([0.0], [0.0]))


@pytest.mark.parametrize("params", [top_row(), bottom_row()])
def test_multi_point_converges_to_limit(params):
    duals = DualFunction.from_callables(2.0, lambda s: 0.3 * np.sin(2 * s), lambda s: 0.2 * np.cos(s))
    lim_minus, lim_plus = mgf.m_minus_limit(params, duals), mgf.m_plus_limit(params, duals)
    errs = []
    for d in (16, 64, 256):
        g, v = embed(duals, d)
        errs.append(abs(mgf.m_minus_multi(params, g, v) - lim_minus) + abs(mgf.m_plus_multi(params, g, v) - lim_plus))
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 5e-3
    # first order: quartering the step cuts the error about fourfold
    assert 2.5 < errs[1] / errs[2] < 6.0


def test_psi_is_omega_plus_integrated_slope(top):
    duals = DualFunction.from_callables(1.5, lambda s: 0.1 + 0 * s, lambda s: 0.2 + 0 * s)
    # constant theta: Theta(s) = 0.2 (1.5 - s), Omega(u) = 0.1 u
    from scipy.integrate import quad
    from clientruin.model import log_phi
    u = 1.1
    ref = 0.1 * u + quad(lambda s: float(log_phi(top, 0.2 * (1.5 - s))), 0, u, epsabs=1e-13)[0]
    assert float(mgf.psi(top, duals, u)) == pytest.approx(ref, rel=1e-10)

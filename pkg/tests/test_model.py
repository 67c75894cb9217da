import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, optimize

from clientruin import Deterministic, DomainError, Excess, Exponential, ModelParams, Uniform
from clientruin.model import (
    adjustment_coefficient,
    fluid_claims,
    fluid_integral,
    fluid_population,
    load_config,
    log_phi,
    log_phi_derivs,
    net_profit_holds,
    params_from_dict,
    phi,
)

from conftest import top_row


def test_phi_at_zero_is_one(top):
    assert float(phi(top, 0.0)) == 1.0


def test_log_phi_vanishes_at_adjustment_coefficient(top):
    assert abs(float(log_phi(top, 0.5))) < 1e-14
    # independent root search on log phi
    root = optimize.brentq(lambda t: -3 * t + 3 * (1.5 / (1.5 - t) - 1), 0.1, 1.4)
    assert root == pytest.approx(0.5, abs=1e-12)
    assert adjustment_coefficient(top) == pytest.approx(0.5, abs=1e-12)


def test_pure_drift():
    p = ModelParams(1.0, 1.0, 0.0, 1.0, Exponential(1.0), Exponential(1.0))
    assert float(phi(p, 2.0)) == pytest.approx(np.exp(-2.0))


def test_phi_domain_error(top):
    with pytest.raises(DomainError):
        phi(top, 1.5)


def test_log_phi_derivatives_by_differences(top):
    h = 1e-6
    for th in (-1.0, 0.2, 0.9):
        v, d1, d2 = log_phi_derivs(top, th)
        assert float(d1) == pytest.approx(float(log_phi(top, th + h) - log_phi(top, th - h)) / (2 * h), rel=1e-7)
        assert float(d2) == pytest.approx(float(log_phi_derivs(top, th + h)[1] - log_phi_derivs(top, th - h)[1]) / (2 * h), rel=1e-6)


@given(st.floats(-3.0, 1.4), st.floats(-3.0, 1.4), st.floats(0.0, 1.0))
def test_log_phi_convex(a, b, w):
    p = top_row()
    m = w * a + (1 - w) * b
    assert float(log_phi(p, m)) <= w * float(log_phi(p, a)) + (1 - w) * float(log_phi(p, b)) + 1e-12


def test_fluid_population_examples(top):
    assert np.allclose(fluid_population(top, np.linspace(0, 10, 11)), 1.0)
    empty = ModelParams(0.0, 0.0, 1.0, 1.0, Exponential(1.0), Exponential(1.0))
    assert float(fluid_population(empty, 3.0)) == 0.0
    p = ModelParams(3.0, 0.0, 1.0, 1.0, Exponential(1.0), Uniform(0.0, 1.0))
    assert float(fluid_population(p, 2.0)) == pytest.approx(1.5)


def test_fluid_integral_against_quadrature():
    p = ModelParams(2.0, 0.7, 1.0, 3.0, Exponential(1.0), Uniform(0.3, 1.7))
    for t in (0.2, 1.0, 2.5):
        ref, _ = integrate.quad(lambda s: float(fluid_population(p, s)), 0.0, t, points=[0.3, 1.7], limit=200)
        assert float(fluid_integral(p, t)) == pytest.approx(ref, rel=1e-10)


def test_fluid_claims_examples(top):
    p = ModelParams(1.0, 1.0, 1.0, 2.0, Exponential(1.0), Exponential(1.0))
    assert float(fluid_claims(p, 1.0)) == pytest.approx(-1.0)
    assert float(fluid_claims(top, 1.0)) == pytest.approx(-1.0)
    zero = ModelParams(1.0, 1.0, 2.0, 2.0, Exponential(1.0), Uniform(0, 2))
    assert float(fluid_claims(zero, 4.0)) == 0.0
    assert float(fluid_claims(top, 0.0)) == 0.0


def test_fluid_population_continuous_nonnegative(bottom):
    t = np.linspace(0.0, 4.0, 4001)
    f = fluid_population(bottom, t)
    assert np.all(f >= 0)
    assert np.max(np.abs(np.diff(f))) < 1e-2


def test_net_profit(top):
    assert net_profit_holds(top)
    assert not net_profit_holds(ModelParams(1, 1, 1.0, 1.0, Exponential(1.0), Exponential(1.0)))
    assert not net_profit_holds(ModelParams(1, 1, 4.0, 2.0, Exponential(1.0), Exponential(1.0)))


def test_validation():
    with pytest.raises(ValueError):
        ModelParams(1, 1, 1, 0.0, Exponential(1.0), Exponential(1.0))
    with pytest.raises(ValueError):
        ModelParams(-1, 1, 1, 1.0, Exponential(1.0), Exponential(1.0))
    with pytest.raises(ValueError):
        ModelParams(1, 1, 1, 1.0, Exponential(1.0), Exponential(1.0), residual=Deterministic(1.0))
    # deterministic sojourn is fine; its excess law is uniform
    p = ModelParams(1, 1, 1, 1.0, Exponential(1.0), Deterministic(2.0))
    assert p.residual == Excess(Deterministic(2.0))


def test_config_roundtrip(tmp_path, top):
    path = tmp_path / "m.json"
    path.write_text(json.dumps({"model": top.to_dict()}))
    params, raw = load_config(path)
    assert params == top
    assert params_from_dict(top.to_dict()) == top
    assert set(top.to_dict()) == {"lambda", "f0", "nu", "r", "claim", "sojourn", "residual"}


def test_yaml_config(tmp_path):
    path = tmp_path / "m.yaml"
    path.write_text(
        "lambda: 3\nf0: 0\nnu: 3\nr: 3\n"
        "claim: {family: exponential, params: {rate: 1.5}}\n"
        "sojourn: {family: uniform, params: {lower: 0, upper: 1}}\n"
    )
    params, _ = load_config(path)
    assert params.residual == Excess(Uniform(0.0, 1.0))

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import beta as beta_dist

from wrglab.errors import InvalidParameter
from wrglab.simulator import replica_stream
from wrglab.weight_models import (
    AtomMixture,
    BetaConditioned,
    Degenerate,
    GammaFraction,
    ParetoWeibull,
    RaVCanonical,
    WeightClass,
    build,
    from_dict,
    parse_class,
)

MODELS = [
    ("degenerate", {}),
    ("atom", {"q0": 0.5, "base": "uniform", "a": 0.3, "b": 0.9}),
    ("atom", {"q0": 0.3, "base": "point", "a": 0.5}),
    ("beta", {"alpha": 2, "beta": 2, "w_star": 0.0}),
    ("beta", {"alpha": 0.7, "beta": 3.0, "w_star": 0.4}),
    ("gamma", {"b": 0, "c1": 1, "w_star": 0.2}),
    ("gamma", {"b": 1.5, "c1": 0.5, "w_star": 0.1}),
    ("pareto", {"alpha": 3}),
    ("pareto", {"alpha": 1.5}),
    ("rav", {"c": 1, "tau": 2}),
    ("rav", {"c": 0.5, "tau": 1.5}),
]


def rng(seed=0):
    return replica_stream(seed, 0)


def test_degenerate_constants():
    m = build("degenerate")
    assert m.mean_w == 1.0
    assert m.theta(1) == 2.0
    assert np.all(m.sample(rng(), 100) == 1.0)


def test_atom_q0_one_is_rrt():
    m = build("atom", {"q0": 1.0})
    assert np.all(m.sample(rng(), 1000) == 1.0)
    assert m.mean_w == 1.0


def test_atom_closed_form_mean():
    m = build("atom", {"q0": 0.5, "base": "uniform", "a": 0.3, "b": 0.9})
    assert m.mean_w == pytest.approx(0.5 + 0.5 * 0.6, rel=1e-15)
    assert m.theta(1) == pytest.approx(1.8, rel=1e-15)


def test_pareto_mean_and_tail():
    m = build("pareto", {"alpha": 3})
    assert m.mean_w == pytest.approx(1 / 3, rel=1e-14)
    for t in [1.5, 2.0, 10.0, 1e3]:
        assert m.tail(1 - 1 / t) == pytest.approx(t**-2, rel=1e-12)
    w = m.sample(rng(), 10**7)
    assert abs(w.mean() - 1 / 3) < 4 * w.std() / math.sqrt(w.size)


def test_rav_inverse_transform_point():
    m = build("rav", {"c": 1, "tau": 2})
    # the sampler maps U to 1 - exp(-c (-log U)^(1/tau)); at U = 1/e this is 1 - 1/e
    u = math.exp(-1)
    assert 1 - math.exp(-m.c * (-math.log(u)) ** (1 / m.tau)) == pytest.approx(1 - math.exp(-1))
    assert m.tail(1 - math.exp(-1)) == pytest.approx(u, rel=1e-14)


def test_normalizations():
    assert build("gamma", {"b": 0, "c1": 1, "w_star": 0.2}).tail(0.2) == 1.0
    assert build("beta", {"alpha": 2, "beta": 3, "w_star": 0.0}).tail(0.0) == 1.0
    g = build("gamma", {"b": 1.5, "c1": 0.5, "w_star": 0.1})
    assert g.tail(0.1 + 1e-12) == pytest.approx(1.0, abs=1e-9)


def test_beta_tail_matches_conditioned_beta():
    m = build("beta", {"alpha": 0.7, "beta": 3.0, "w_star": 0.4})
    ref = beta_dist(0.7, 3.0)
    for x in [0.45, 0.6, 0.9, 0.99]:
        assert m.tail(x) == pytest.approx(ref.sf(x) / ref.sf(0.4), rel=1e-10)
    assert m.z >= 1.0


@pytest.mark.parametrize("kind,params", MODELS)
def test_sampler_matches_tail_dkw(kind, params):
    m = build(kind, params)
    w = np.sort(m.sample(rng(11), 10**6))
    assert np.all((w > 0) & (w <= 1))
    grid = np.linspace(max(m.w_star, 1e-3), 0.999, 50)
    emp = 1.0 - np.searchsorted(w, grid, side="left") / w.size  # empirical P(W >= x)
    bound = math.sqrt(math.log(2 / 0.001) / (2 * w.size))
    assert np.max(np.abs(emp - m.tail(grid))) < bound


@pytest.mark.parametrize("kind,params", MODELS)
def test_mean_quadrature_vs_monte_carlo(kind, params):
    m = build(kind, params)
    w = m.sample(rng(5), 10**7 if kind != "gamma" or params["b"] == 0 else 10**6)
    se = w.std() / math.sqrt(w.size)
    assert abs(w.mean() - m.mean_w) <= 4 * se + 1e-15


@pytest.mark.parametrize("kind,params", [p for p in MODELS if p[0] != "degenerate"])
def test_mass_near_one(kind, params):
    m = build(kind, params)
    w = m.sample(rng(3), 10**6)
    for delta in [0.5, 0.2, 0.1, 0.01]:
        p = float(m.tail(1 - delta))
        assert p > 0
        if w.size * p >= 20:  # otherwise an empty window is the likely outcome
            assert np.any(w > 1 - delta)


@pytest.mark.parametrize("kind,params", MODELS)
def test_theta_exact(kind, params):
    m = build(kind, params)
    for mm in (1, 2, 5):
        assert m.theta(mm) == 1 + m.mean_w / mm
    assert 0 < m.mean_w <= 1


@pytest.mark.parametrize("kind,params", MODELS)
def test_determinism_and_round_trip(kind, params):
    m = build(kind, params)
    assert np.array_equal(m.sample(rng(9), 1000), m.sample(rng(9), 1000))
    again = from_dict(m.to_dict())
    assert again == m and hash(again) == hash(m)


@pytest.mark.parametrize("kind,params", MODELS)
def test_tail_monotone(kind, params):
    m = build(kind, params)
    x = np.linspace(0, 1, 2001)
    t = m.tail(x)
    assert np.all(np.diff(t) <= 1e-15)
    assert t[0] == 1.0


@pytest.mark.parametrize(
    "kind,params",
    [
        ("atom", {"q0": 0.0, "a": 0.3, "b": 0.5}),
        ("atom", {"q0": 0.5, "a": 0.5, "b": 0.3}),
        ("atom", {"q0": 0.5, "base": "exotic", "a": 0.3}),
        ("beta", {"alpha": -1, "beta": 2}),
        ("beta", {"alpha": 1, "beta": 2, "w_star": 1.0}),
        ("gamma", {"b": 3, "c1": 1, "w_star": 0.5}),
        ("gamma", {"b": 0, "c1": 0, "w_star": 0.2}),
        ("pareto", {"alpha": 1.0}),
        ("rav", {"c": 1, "tau": 1.0}),
        ("rav", {"c": -1, "tau": 2}),
        ("degenerate", {"q0": 1}),
        ("beta", {"alpha": 2, "beta": 2, "gamma": 1}),
    ],
)
def test_invalid_parameters(kind, params):
    with pytest.raises(InvalidParameter):
        build(kind, params)


def test_gamma_monotonicity_guard_boundary():
    # 1/(1 - w*) = 2 equals b c1 = 2: allowed; slightly beyond is rejected
    build("gamma", {"b": 2, "c1": 1, "w_star": 0.5})
    with pytest.raises(InvalidParameter):
        build("gamma", {"b": 2.001, "c1": 1, "w_star": 0.5})


def test_class_parsing():
    assert parse_class("GammaFraction") is WeightClass.GAMMA
    assert parse_class("rrt") is WeightClass.DEGENERATE
    with pytest.raises(InvalidParameter):
        parse_class("lognormal")
    with pytest.raises(InvalidParameter):
        from_dict({"class": "degenerate", "extra": 1})


def test_concrete_types():
    assert isinstance(build("degenerate"), Degenerate)
    assert isinstance(build("atom", {"q0": 0.5, "a": 0.2, "b": 0.4}), AtomMixture)
    assert isinstance(build("beta", {"alpha": 1, "beta": 1}), BetaConditioned)
    assert isinstance(build("gamma", {"b": 0, "c1": 1}), GammaFraction)
    assert isinstance(build("pareto", {"alpha": 2}), ParetoWeibull)
    assert isinstance(build("rav", {"c": 1, "tau": 2}), RaVCanonical)


@given(st.floats(0.05, 1.0), st.floats(0.01, 0.98), st.floats(0.0, 0.5))
def test_atom_mean_property(q0, a, width):
    b = min(a + width, 0.99)
    m = AtomMixture(q0, "uniform", a, b)
    assert m.mean_w == pytest.approx(q0 + (1 - q0) * (a + b) / 2, rel=1e-12)


@given(st.floats(1.05, 20.0))
def test_pareto_mean_property(alpha):
    m = ParetoWeibull(alpha)
    assert m.mean_w == pytest.approx(1 / alpha, rel=1e-12)

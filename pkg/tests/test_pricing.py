import math

import numpy as np
import pytest

from polyproc.generator import build_matrix
from polyproc.models import catalog, catalog_names
from polyproc.montecarlo import MCConfig, simulate_terminal
from polyproc.polybasis import PolyVector, _monomial_values, constant, enumerate_basis, evaluate, monomial
from polyproc.pricing import (
    MarketMap,
    Payoff,
    PolyClaim,
    fit_payoff,
    greeks,
    grid_sample,
    parse_payoff,
    pilot_fit,
    price,
)


def _prices(model):
    return model.market.to_price(model.x0)


# ---------------------------------------------------------------- MarketMap


def test_market_map_round_trip(rng):
    m = MarketMap(("exp", "identity"), (2.0, 1.0))
    x = rng.normal(size=(5, 2))
    np.testing.assert_allclose(m.to_state(m.to_price(x)), x, rtol=1e-14, atol=1e-15)
    np.testing.assert_allclose(m.inverse_jacobian([4.0, 0.3]), [0.25, 1.0])


def test_market_map_rejects_bad_inputs():
    with pytest.raises(ValueError, match="positive"):
        MarketMap(("exp",), (0.0,))
    with pytest.raises(ValueError, match="unknown"):
        MarketMap(("log",), (1.0,))
    m = MarketMap(("exp", "identity"), (1.0, 1.0))
    with pytest.raises(ValueError, match="positive"):
        m.to_state([-1.0, 0.1])
    with pytest.raises(ValueError, match="dimension"):
        m.to_state([1.0])


# -------------------------------------------------------------------- price


def test_constant_claim_prices_to_one(all_models):
    for name, model in all_models.items():
        A = build_matrix(model.spec, 2)
        claim = PolyClaim(constant(A.basis, 1.0), 1.5)
        assert price(model.spec, claim, 0.0, _prices(model), model.market, A) == pytest.approx(1.0, abs=1e-14)


def test_black_scholes_log_price_claim():
    r, a, T, S0 = 0.03, 0.04, 2.0, 1.3
    model = catalog("black_scholes", {"r": r, "a": a, "s0": 1.0})
    claim = PolyClaim(monomial(enumerate_basis(1, 1), (1,)), T)
    p = price(model.spec, claim, 0.0, [S0], model.market)
    assert p == pytest.approx(math.log(S0) + (r - a / 2) * T, rel=1e-14)


@pytest.mark.slow
def test_bates_log_price_square_against_monte_carlo():
    model = catalog("bates")
    claim = PolyClaim(monomial(enumerate_basis(2, 2), (2, 0)), 1.0)
    exact = price(model.spec, claim, 0.0, _prices(model), model.market)
    xT = simulate_terminal(model.sim, model.x0, 1.0, MCConfig(paths=1_000_000, steps=200, seed=21))
    v = np.log(model.market.to_price(xT)[:, 0]) ** 2
    z = (v.mean() - exact) / (v.std(ddof=1) / math.sqrt(v.size))
    assert abs(z) < 4


def test_price_at_maturity_is_the_payoff(rng):
    model = catalog("bates")
    basis = enumerate_basis(2, 3)
    f = PolyVector(basis, rng.normal(size=len(basis)))
    s = [1.2, 0.05]
    assert price(model.spec, PolyClaim(f, 1.0), 1.0, s, model.market) == evaluate(f, model.market.to_state(s))


def test_price_is_linear(rng):
    model = catalog("heston")
    A = build_matrix(model.spec, 3)
    f = PolyVector(A.basis, rng.normal(size=len(A.basis)))
    g = PolyVector(A.basis, rng.normal(size=len(A.basis)))
    s = _prices(model)
    pf = price(model.spec, PolyClaim(f, 1.0), 0.2, s, model.market, A)
    pg = price(model.spec, PolyClaim(g, 1.0), 0.2, s, model.market, A)
    pc = price(model.spec, PolyClaim(2.5 * f - 0.7 * g, 1.0), 0.2, s, model.market, A)
    assert pc == pytest.approx(2.5 * pf - 0.7 * pg, rel=1e-12, abs=1e-12)


def test_price_time_outside_horizon_is_rejected():
    model = catalog("cir")
    claim = PolyClaim(monomial(enumerate_basis(1, 1), (1,)), 1.0)
    with pytest.raises(ValueError, match="must lie in"):
        price(model.spec, claim, 1.5, [0.2])
    with pytest.raises(ValueError, match="must lie in"):
        price(model.spec, claim, -0.1, [0.2])
    with pytest.raises(ValueError):
        PolyClaim(claim.f, -1.0)


def test_price_rejects_nonpositive_exponential_price():
    model = catalog("black_scholes")
    claim = PolyClaim(monomial(enumerate_basis(1, 1), (1,)), 1.0)
    with pytest.raises(ValueError, match="positive"):
        price(model.spec, claim, 0.0, [0.0], model.market)


# ------------------------------------------------------------------- greeks


def test_constant_claim_has_zero_greeks():
    model = catalog("bates")
    g = greeks(model.spec, PolyClaim(constant(enumerate_basis(2, 2), 3.0), 1.0), 0.0, _prices(model), model.market)
    np.testing.assert_array_equal(g, [0.0, 0.0])


def test_brownian_square_greek():
    model = catalog("brownian")
    claim = PolyClaim(monomial(enumerate_basis(1, 2), (2,)), 1.0)
    assert greeks(model.spec, claim, 0.0, [0.7])[0] == pytest.approx(1.4, rel=1e-14)


def _central_difference(model, claim, t, s, A):
    out = np.zeros(len(s))
    for i in range(len(s)):
        h = 1e-4 * max(abs(s[i]), 1.0)
        up, dn = s.copy(), s.copy()
        up[i] += h
        dn[i] -= h
        out[i] = (price(model.spec, claim, t, up, model.market, A) - price(model.spec, claim, t, dn, model.market, A)) / (2 * h)
    return out


def test_bates_fitted_claim_greeks_against_finite_differences():
    model = catalog("bates")
    fit = pilot_fit(model, Payoff("call", (1.0,)).bind(model.market), 3, 1.0, MCConfig(paths=1, steps=50, seed=3))
    claim = PolyClaim(fit.poly, 1.0)
    A = build_matrix(model.spec, 3)
    s = np.array([1.05, 0.05])
    analytic = greeks(model.spec, claim, 0.0, s, model.market, A)
    fd = _central_difference(model, claim, 0.0, s, A)
    np.testing.assert_allclose(analytic, fd, rtol=1e-6)


@pytest.mark.parametrize("name", catalog_names())
def test_greeks_match_finite_differences_for_random_claims(name, rng):
    model = catalog(name)
    A = build_matrix(model.spec, 3)
    f = PolyVector(A.basis, rng.normal(size=len(A.basis)))
    claim = PolyClaim(f, 1.0)
    # an interior start point keeps the perturbed prices inside the state space
    x = np.where(model.x0 == 0, 0.3, model.x0) if name != "brownian" else model.x0 + 0.3
    if name in ("jacobi",):
        x = np.array([0.4])
    s = model.market.to_price(x)
    analytic = greeks(model.spec, claim, 0.25, s, model.market, A)
    fd = _central_difference(model, claim, 0.25, s, A)
    np.testing.assert_allclose(analytic, fd, rtol=1e-6, atol=1e-9 * (1 + np.abs(fd).max()))


# ---------------------------------------------------------------------- fit


def test_fit_recovers_polynomial_payoff(rng):
    basis = enumerate_basis(2, 3)
    target = PolyVector(basis, rng.normal(size=len(basis)))
    pts = rng.uniform(-1, 1, size=(40, 2))
    fit = fit_payoff(lambda s: evaluate(target, s), None, 3, pts)
    np.testing.assert_allclose(fit.poly.coeffs, target.coeffs, rtol=1e-8, atol=1e-8)
    assert not fit.ridge
    assert fit.rmse < 1e-10


def test_degree_zero_fit_is_weighted_mean():
    pts = np.array([[0.5], [1.0], [2.0]])
    w = np.array([1.0, 2.0, 3.0])
    call = Payoff("call", (0.8,))
    fit = fit_payoff(call, None, 0, pts, w)
    expected = np.sum(w * np.maximum(pts[:, 0] - 0.8, 0)) / w.sum()
    assert fit.poly.coeffs[0] == pytest.approx(expected, rel=1e-14)
    single = fit_payoff(call, None, 0, np.array([[1.5]]))
    assert single.poly.coeffs[0] == pytest.approx(0.7, rel=1e-14)


def test_higher_degree_fit_has_lower_rmse_on_the_same_sample():
    model = catalog("black_scholes", {"a": 0.09})
    pts = simulate_terminal(model.sim, model.x0, 1.0, MCConfig(paths=10_000, steps=50, seed=9))
    call = Payoff("call", (1.0,)).bind(model.market)
    f2 = fit_payoff(call, model.market, 2, pts)
    f4 = fit_payoff(call, model.market, 4, pts)
    assert f4.rmse < f2.rmse


def test_fit_residuals_are_orthogonal_to_the_design(rng):
    pts = rng.normal(size=(500, 2)) * [0.2, 0.02] + [0.0, 0.04]
    w = rng.uniform(0.5, 2.0, size=500)
    market = MarketMap(("exp", "identity"), (1.0, 1.0))
    call = Payoff("call", (1.0,)).bind(market)
    fit = fit_payoff(call, market, 3, pts, w)
    design = _monomial_values(fit.poly.basis, pts)
    resid = design @ fit.poly.coeffs - call(market.to_price(pts))
    scale = np.sqrt(np.sum(w[:, None] * design**2, axis=0)) * np.sqrt(np.sum(w * resid**2))
    assert np.all(np.abs((w * resid) @ design) <= 1e-8 * (1 + scale))


def test_ill_conditioned_design_switches_to_ridge():
    pts = np.linspace(0, 1000, 200)
    fit = fit_payoff(lambda s: np.sqrt(s[..., 0]), None, 6, pts)
    assert fit.ridge
    assert fit.condition > 1e12
    assert np.all(np.isfinite(fit.poly.coeffs))
    assert fit.diagnostics()["ridge"] is True


def test_fit_errors():
    with pytest.raises(ValueError, match="at least 3"):
        fit_payoff(lambda s: s[..., 0], None, 2, np.array([0.0, 1.0]))
    with pytest.raises(ValueError, match="nonnegative"):
        fit_payoff(lambda s: s[..., 0], None, 1, np.array([0.0, 1.0]), [1.0, -1.0])
    with pytest.raises(ValueError, match="expected 2 weights"):
        fit_payoff(lambda s: s[..., 0], None, 0, np.array([0.0, 1.0]), [1.0, 1.0, 1.0])


def test_fit_json_has_diagnostics():
    fit = fit_payoff(lambda s: s[..., 0] ** 2, None, 2, np.linspace(-1, 1, 9))
    doc = fit.to_json()
    assert set(doc["diagnostics"]) == {"rmse", "max_residual", "condition", "ridge", "points"}
    back = PolyVector.from_json(doc)
    np.testing.assert_allclose(back.coeffs, [0.0, 0.0, 1.0], atol=1e-12)


def test_pilot_fit_is_reproducible_and_independent_of_estimation_seed():
    model = catalog("heston")
    call = Payoff("call", (1.0,)).bind(model.market)
    cfg = MCConfig(paths=100, steps=20, seed=7)
    a = pilot_fit(model, call, 2, 1.0, cfg, pilot_paths=2000)
    b = pilot_fit(model, call, 2, 1.0, cfg, pilot_paths=2000)
    np.testing.assert_array_equal(a.poly.coeffs, b.poly.coeffs)
    pilot_points = simulate_terminal(model.sim, model.x0, 1.0, MCConfig(paths=2000, steps=20, seed=7))
    direct = fit_payoff(call, model.market, 2, pilot_points)
    assert not np.array_equal(direct.poly.coeffs, a.poly.coeffs)


def test_grid_sample():
    g = grid_sample([0, -1], [1, 1], 3)
    assert g.shape == (9, 2)
    np.testing.assert_array_equal(g[0], [0, -1])
    np.testing.assert_array_equal(g[-1], [1, 1])


# ------------------------------------------------------------------ payoffs


@pytest.mark.parametrize("text,kind,args", [
    ("call 1.0", "call", (1.0,)),
    ("put 95", "put", (95.0,)),
    ("power 2", "power", (2.0,)),
    ("poly 1, 0, -0.5", "poly", (1.0, 0.0, -0.5)),
])
def test_parse_payoff(text, kind, args):
    p = parse_payoff(text)
    assert (p.kind, p.args) == (kind, args)
    assert parse_payoff(str(p)) == p


@pytest.mark.parametrize("text", ["call", "swap 1", "call abc", ""])
def test_parse_payoff_errors(text):
    with pytest.raises(ValueError):
        parse_payoff(text)


def test_payoff_values_and_polynomial_form():
    s = np.array([[0.5], [1.5]])
    np.testing.assert_array_equal(Payoff("call", (1.0,))(s), [0.0, 0.5])
    np.testing.assert_array_equal(Payoff("put", (1.0,))(s), [0.5, 0.0])
    np.testing.assert_array_equal(Payoff("power", (2.0,))(s), [0.25, 2.25])
    basis = enumerate_basis(2, 3)
    poly = Payoff("poly", (1.0, 2.0)).polynomial(basis)
    assert poly.terms() == {(0, 0): 1.0, (1, 0): 2.0}
    assert Payoff("call", (1.0,)).polynomial(basis) is None
    market = MarketMap(("exp", "identity"), (1.0, 1.0))
    assert Payoff("power", (2.0,)).polynomial(basis, market) is None
    log_claim = Payoff("poly", (0.0, 1.0))
    np.testing.assert_allclose(log_claim(np.array([[math.e, 0.1]]), market), [1.0])
    with pytest.raises(ValueError, match="exceeds"):
        Payoff("poly", (1, 1, 1, 1, 1)).polynomial(basis)

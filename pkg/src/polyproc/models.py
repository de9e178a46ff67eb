"""Catalog of polynomial models.

Each entry bundles the generator characteristics (drift stated for the
truncation ``chi(xi) = xi``), an Euler simulation face, a default start
point and the market map ``S = G(X)``.  Drifts are written as in the SDE
with uncompensated jumps and converted with :func:`convert_truncation`, so
the analytic and simulation faces share one source of truth.
"""

from __future__ import annotations

import inspect
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping

import numpy as np

from .generator import (
    ConditionA,
    ConditionB,
    DiagonalJumpAction,
    DiffusionSpec,
    DriftSpec,
    GeneratorSpec,
    JumpMomentTable,
    PushforwardAtoms,
    StateSpace,
    convert_truncation,
    spec_from_json,
    validate,
)
from .jumplaws import ExponentialJumps, ProductJumps, law_from_json
from .montecarlo import JumpSource, SimulationSpec
from .polybasis import enumerate_basis, from_terms
from .pricing import MarketMap

__all__ = ["Model", "CATALOG", "catalog", "catalog_names", "load_model", "model_from_document"]


@dataclass(frozen=True, eq=False)
class Model:
    name: str
    params: dict
    spec: GeneratorSpec
    sim: SimulationSpec | None
    x0: np.ndarray
    market: MarketMap
    coords: tuple[str, ...] = ()

    @property
    def n(self) -> int:
        return self.spec.n

    def document(self) -> dict:
        return {"model": self.name, "params": _jsonable(self.params)}


def _jsonable(v):
    if isinstance(v, Mapping):
        return {k: _jsonable(x) for k, x in v.items()}
    if hasattr(v, "to_json"):
        return v.to_json()
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


def _require(cond: bool, msg: str):
    if not cond:
        raise ValueError(msg)


def _pos(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def _correction(n: int, terms: Mapping[int, Mapping[tuple, float]]):
    basis = enumerate_basis(n, 1)
    return [from_terms(basis, terms[i]) if i in terms else None for i in range(n)]


def _x0(x0, default, n: int) -> np.ndarray:
    x = np.asarray(default if x0 is None else x0, dtype=float).reshape(-1)
    _require(x.size == n, f"start point needs {n} coordinates, got {x.size}")
    return x


def _finish(name, params, spec, sim, x0, market, coords) -> Model:
    problems = validate(spec)
    if problems:
        raise ValueError(f"{name}: " + "; ".join(problems))
    _require(spec.state.contains(x0), f"{name}: start point {x0.tolist()} lies outside the state space")
    return Model(name, params, spec, sim, x0, market, coords)


# ------------------------------------------------------------ 1-d diffusions


def brownian(mu: float = 0.0, sigma: float = 1.0, x0=None) -> Model:
    """``dX = mu dt + sigma dB`` on the real line."""
    params = dict(mu=mu, sigma=sigma)
    spec = GeneratorSpec(StateSpace.of("line"), DriftSpec([mu], [[0.0]]), DiffusionSpec([[sigma**2]]))
    sim = SimulationSpec(1, lambda x: np.full_like(x, mu), lambda x: np.full((x.shape[0], 1, 1), sigma), 1)
    return _finish("brownian", params, spec, sim, _x0(x0, [0.0], 1), MarketMap.identity(1), ("x",))


def cir(b: float = 0.1, beta: float = -0.5, sigma: float = 0.3, x0=None) -> Model:
    """``dX = (b + beta X) dt + sigma sqrt(X) dB`` on the half-line."""
    _require(b >= 0, f"cir needs b >= 0, got {b}")
    _require(sigma >= 0, f"cir needs sigma >= 0, got {sigma}")
    params = dict(b=b, beta=beta, sigma=sigma)
    spec = GeneratorSpec(StateSpace.of("half"), DriftSpec([b], [[beta]]), DiffusionSpec([[0.0]], [[[sigma**2]]]))
    sim = SimulationSpec(
        1,
        lambda x: b + beta * x,
        lambda x: (sigma * np.sqrt(x))[:, :, None],
        1,
        coef_guard=_pos,
    )
    return _finish("cir", params, spec, sim, _x0(x0, [0.2], 1), MarketMap.identity(1), ("x",))


def vasicek(beta: float = 1.0, theta: float = 0.0, sigma: float = 0.2, x0=None) -> Model:
    """``dX = -beta (X - theta) dt + sigma dB``."""
    _require(sigma >= 0, f"vasicek needs sigma >= 0, got {sigma}")
    params = dict(beta=beta, theta=theta, sigma=sigma)
    spec = GeneratorSpec(StateSpace.of("line"), DriftSpec([beta * theta], [[-beta]]), DiffusionSpec([[sigma**2]]))
    sim = SimulationSpec(
        1, lambda x: -beta * (x - theta), lambda x: np.full((x.shape[0], 1, 1), sigma), 1
    )
    return _finish("vasicek", params, spec, sim, _x0(x0, [theta], 1), MarketMap.identity(1), ("x",))


def jacobi(beta: float = 1.0, theta: float = 0.5, sigma: float = 0.4, lam: float = 0.0, x0=None) -> Model:
    """Jacobi diffusion on [0, 1], optionally reflected at 1/2 at Poisson(``lam``) times."""
    _require(beta > 0 and sigma > 0, f"jacobi needs beta > 0 and sigma > 0, got beta={beta}, sigma={sigma}")
    _require(0 <= theta <= 1, f"jacobi needs theta in [0, 1], got {theta}")
    _require(lam >= 0, f"jump intensity must be >= 0, got {lam}")
    params = dict(beta=beta, theta=theta, sigma=sigma, lam=lam)
    s2 = sigma**2
    diffusion = DiffusionSpec([[0.0]], [[[s2]]], {(0, 0): [[-s2]]})
    spec = GeneratorSpec(StateSpace.of((0.0, 1.0)), DriftSpec([beta * theta], [[-beta]]), diffusion)
    jumps = ()
    if lam > 0:
        atoms = PushforwardAtoms(((lam, [[-2.0]], [1.0]),))
        spec = GeneratorSpec(spec.state, spec.drift, diffusion, ConditionB(atoms))
        spec = convert_truncation(spec, _correction(1, {0: {(0,): lam, (1,): -2.0 * lam}}))
        jumps = (JumpSource(lambda x: np.full(x.shape[0], lam), lambda x, u: 1.0 - 2.0 * x, 1),)
    clip = lambda x: np.clip(x, 0.0, 1.0)
    sim = SimulationSpec(
        1,
        lambda x: -beta * (x - theta),
        lambda x: (sigma * np.sqrt(x * (1.0 - x)))[:, :, None],
        1,
        jumps,
        coef_guard=clip,
        post_step=clip,
    )
    return _finish("jacobi", params, spec, sim, _x0(x0, [theta], 1), MarketMap.identity(1), ("x",))


def pearson(beta: float = 1.0, theta: float = 0.0, a: float = 1.0, alpha10: float = 0.0, alpha11: float = 0.0,
            state="line", x0=None) -> Model:
    """``dX = -beta (X - theta) dt + sqrt(alpha11 X^2 + alpha10 X + a) dB``."""
    _require(beta > 0, f"pearson needs beta > 0, got {beta}")
    params = dict(beta=beta, theta=theta, a=a, alpha10=alpha10, alpha11=alpha11, state=state)
    st = StateSpace.of(state if isinstance(state, str) else tuple(state))
    diffusion = DiffusionSpec([[a]], [[[alpha10]]], {(0, 0): [[alpha11]]} if alpha11 else {})
    spec = GeneratorSpec(st, DriftSpec([beta * theta], [[-beta]]), diffusion)
    lo, hi = st.bounds[0]
    guard = (lambda x: np.clip(x, lo, hi)) if math.isfinite(lo) or math.isfinite(hi) else None
    sim = SimulationSpec(
        1,
        lambda x: -beta * (x - theta),
        lambda x: np.sqrt(_pos(alpha11 * x * x + alpha10 * x + a))[:, :, None],
        1,
        coef_guard=guard,
        post_step=guard if st.kind(0) != "half" else None,
    )
    default = theta if st.contains([theta]) else (lo if math.isfinite(lo) else hi)
    return _finish("pearson", params, spec, sim, _x0(x0, [default], 1), MarketMap.identity(1), ("x",))


# ----------------------------------------------------------------- Levy type


def _law(law, default):
    return law_from_json(default if law is None else law)


def levy(b: float = 0.0, a: float = 1.0, lam: float = 0.0, law=None, x0=None) -> Model:
    """Levy process ``b t + sqrt(a) B_t + compound Poisson(lam, law)`` (``b`` is the drift with raw jumps)."""
    _require(a >= 0 and lam >= 0, "levy needs a >= 0 and lam >= 0")
    law = _law(law, {"law": "normal", "mean": 0.0, "std": 0.5})
    params = dict(b=b, a=a, lam=lam, law=law)
    jumps = None
    if lam > 0:
        jumps = ConditionA(base=JumpMomentTable.from_function(1, lambda l: lam * law.raw_moment(l[0])))
    spec = GeneratorSpec(StateSpace.of("line"), DriftSpec([b], [[0.0]]), DiffusionSpec([[a]]), jumps)
    spec = convert_truncation(spec, _correction(1, {0: {(0,): lam * law.raw_moment(1)}}))
    sources = ()
    if lam > 0:
        sources = (JumpSource(lambda x: np.full(x.shape[0], lam), lambda x, u: law.quantile(u), 1),)
    sq = math.sqrt(a)
    sim = SimulationSpec(1, lambda x: np.full_like(x, b), lambda x: np.full((x.shape[0], 1, 1), sq), 1, sources)
    return _finish("levy", params, spec, sim, _x0(x0, [0.0], 1), MarketMap.identity(1), ("x",))


def _exp_levy_rate(lam: float, law):
    k1 = law.mgf(1.0) - 1.0

    def rate(k):
        p = k[0]
        return lam * (law.mgf(float(p)) - 1.0 - p * k1)

    return rate


def exp_levy(r: float = 0.03, a: float = 0.04, lam: float = 0.0, law=None, x0=None) -> Model:
    """Price process ``S = S_0 exp(L)`` of a Levy process, stated in the price coordinate.

    The generator acts diagonally: ``x^k -> (a k (k-1)/2 + r k + J(k)) x^k`` with
    ``J(k) = lam int (e^{k y} - 1 - k (e^y - 1)) law(dy)``.
    """
    _require(a >= 0 and lam >= 0, "exp_levy needs a >= 0 and lam >= 0")
    law = _law(law, {"law": "normal", "mean": -0.1, "std": 0.15})
    params = dict(r=r, a=a, lam=lam, law=law)
    jumps = None
    kappa = 0.0
    if lam > 0:
        problem = law.exp_moment_problem(1.0)
        _require(problem is None, f"exp_levy: {problem}")
        kappa = law.mgf(1.0) - 1.0

        def check(m, law=law):
            problem = law.exp_moment_problem(float(m))
            return [problem] if problem else []

        jumps = ConditionB(DiagonalJumpAction(_exp_levy_rate(lam, law), check, {"lam": lam, "law": law.to_json()}))
    spec = GeneratorSpec(StateSpace.of("half"), DriftSpec([0.0], [[r]]), DiffusionSpec([[0.0]], None, {(0, 0): [[a]]}), jumps)
    sources = ()
    if lam > 0:
        sources = (JumpSource(lambda x: np.full(x.shape[0], lam), lambda x, u: x * np.expm1(law.quantile(u)), 1),)
    sq = math.sqrt(a)
    sim = SimulationSpec(1, lambda x: (r - lam * kappa) * x, lambda x: (sq * x)[:, :, None], 1, sources)
    return _finish("exp_levy", params, spec, sim, _x0(x0, [1.0], 1), MarketMap.identity(1), ("s",))


def black_scholes(r: float = 0.03, a: float = 0.04, s0: float = 1.0, x0=None) -> Model:
    """Log-price ``X = log(S / s0)`` with ``dX = (r - a/2) dt + sqrt(a) dB``."""
    _require(a >= 0, f"black_scholes needs a >= 0, got {a}")
    params = dict(r=r, a=a, s0=s0)
    mu = r - 0.5 * a
    spec = GeneratorSpec(StateSpace.of("line"), DriftSpec([mu], [[0.0]]), DiffusionSpec([[a]]))
    sq = math.sqrt(a)
    sim = SimulationSpec(1, lambda x: np.full_like(x, mu), lambda x: np.full((x.shape[0], 1, 1), sq), 1)
    return _finish("black_scholes", params, spec, sim, _x0(x0, [0.0], 1), MarketMap(("exp",), (s0,)), ("x",))


# ------------------------------------------------------ stochastic volatility


def _kappa(law) -> float:
    problem = law.exp_moment_problem(1.0)
    _require(problem is None, str(problem))
    return law.mgf(1.0) - 1.0


def bates(r: float = 0.03, b: float = 0.04, beta: float = 2.0, sigma: float = 0.4, rho: float = -0.7,
          lam: float = 1.0, law=None, s0: float = 1.0, x0=None) -> Model:
    """Stochastic volatility with jumps in the log-price, coordinates ``(x, v)``.

    ``dx = (r - v/2 - lam v kappa) dt + sqrt(v) dB_1 + dZ``,
    ``dv = (b - beta v) dt + sigma sqrt(v) (rho dB_1 + sqrt(1 - rho^2) dB_2)``,
    where ``Z`` jumps with intensity ``lam v`` and ``kappa = E[e^xi] - 1``.
    """
    _require(b >= 0 and sigma >= 0 and lam >= 0, "bates needs b, sigma, lam >= 0")
    _require(-1 <= rho <= 1, f"correlation must lie in [-1, 1], got {rho}")
    law = _law(law, {"law": "normal", "mean": -0.1, "std": 0.15})
    params = dict(r=r, b=b, beta=beta, sigma=sigma, rho=rho, lam=lam, law=law, s0=s0)
    kappa = _kappa(law) if lam > 0 else 0.0
    drift = DriftSpec([r, b], [[0.0, 0.0], [-0.5 - lam * kappa, -beta]])
    lin = np.zeros((2, 2, 2))
    lin[1] = [[1.0, sigma * rho], [sigma * rho, sigma**2]]
    jumps = None
    if lam > 0:
        table = JumpMomentTable.from_function(2, lambda l: lam * law.raw_moment(l[0]) if l[1] == 0 else 0.0)
        jumps = ConditionA(linear={1: table})
    spec = GeneratorSpec(StateSpace.of("line", "half"), drift, DiffusionSpec(np.zeros((2, 2)), lin), jumps)
    spec = convert_truncation(spec, _correction(2, {0: {(0, 1): lam * law.raw_moment(1)}}))
    chol = np.array([[1.0, 0.0], [sigma * rho, sigma * math.sqrt(max(1 - rho * rho, 0.0))]])

    def sim_drift(x):
        v = x[:, 1]
        return np.stack([r - (0.5 + lam * kappa) * v, b - beta * v], axis=1)

    def sim_diffusion(x):
        return np.sqrt(x[:, 1])[:, None, None] * chol

    def guard(x):
        return np.stack([x[:, 0], _pos(x[:, 1])], axis=1)

    sources = ()
    if lam > 0:
        sources = (
            JumpSource(
                lambda x: lam * x[:, 1],
                lambda x, u: np.stack([law.quantile(u[:, 0]), np.zeros(u.shape[0])], axis=1),
                1,
            ),
        )
    sim = SimulationSpec(2, sim_drift, sim_diffusion, 2, sources, coef_guard=guard)
    market = MarketMap(("exp", "identity"), (s0, 1.0))
    return _finish("bates", params, spec, sim, _x0(x0, [0.0, 0.04], 2), market, ("x", "v"))


def heston(r: float = 0.03, b: float = 0.04, beta: float = 2.0, sigma: float = 0.4, rho: float = -0.7,
           s0: float = 1.0, x0=None) -> Model:
    """:func:`bates` without jumps."""
    m = bates(r, b, beta, sigma, rho, 0.0, None, s0, x0)
    params = dict(r=r, b=b, beta=beta, sigma=sigma, rho=rho, s0=s0)
    return Model("heston", params, m.spec, m.sim, m.x0, m.market, m.coords)


_BATES2F_LAW1 = {"law": "product", "components": [
    {"law": "normal", "mean": -0.05, "std": 0.1}, {"law": "exponential", "mean": 0.01},
    {"law": "exponential", "mean": 0.0}]}
_BATES2F_LAW2 = {"law": "product", "components": [
    {"law": "normal", "mean": -0.1, "std": 0.15}, {"law": "exponential", "mean": 0.0},
    {"law": "exponential", "mean": 0.01}]}


def bates2f(r: float = 0.03, b1: float = 0.02, b2: float = 0.02, beta11: float = 1.5, beta12: float = 0.1,
            beta21: float = 0.1, beta22: float = 3.0, sigma1: float = 0.3, sigma2: float = 0.4,
            rho1: float = -0.6, rho2: float = -0.5, lam1: float = 1.0, lam2: float = 1.0, law1=None, law2=None,
            s0: float = 1.0, x0=None) -> Model:
    """Two-factor stochastic volatility with jumps, coordinates ``(x, u, v)``.

    Jump sources ``k = 1, 2`` arrive with intensities ``lam1 u`` and ``lam2 v``
    and have trivariate sizes ``law1``, ``law2`` (independent components; the
    ``u`` and ``v`` components must be nonnegative).
    """
    _require(min(b1, b2, beta12, beta21, sigma1, sigma2, lam1, lam2) >= 0,
             "bates2f needs b1, b2, beta12, beta21, sigma1, sigma2, lam1, lam2 >= 0")
    _require(-1 <= rho1 <= 1 and -1 <= rho2 <= 1, "correlations must lie in [-1, 1]")
    law1 = _law(law1, _BATES2F_LAW1)
    law2 = _law(law2, _BATES2F_LAW2)
    for name, law in (("law1", law1), ("law2", law2)):
        _require(isinstance(law, ProductJumps) and law.dim == 3, f"{name} must be a product law with 3 components")
        for c in law.components[1:]:
            _require(isinstance(c, ExponentialJumps), f"{name}: volatility jump components must be exponential")
    params = dict(r=r, b1=b1, b2=b2, beta11=beta11, beta12=beta12, beta21=beta21, beta22=beta22, sigma1=sigma1,
                  sigma2=sigma2, rho1=rho1, rho2=rho2, lam1=lam1, lam2=lam2, law1=law1, law2=law2, s0=s0)
    k1 = _kappa(law1.components[0]) if lam1 > 0 else 0.0
    k2 = _kappa(law2.components[0]) if lam2 > 0 else 0.0
    beta = np.array([
        [0.0, 0.0, 0.0],
        [-0.5 - lam1 * k1, -beta11, beta21],
        [-0.5 - lam2 * k2, beta12, -beta22],
    ])
    drift = DriftSpec([r, b1, b2], beta)
    lin = np.zeros((3, 3, 3))
    lin[1] = [[1.0, sigma1 * rho1, 0.0], [sigma1 * rho1, sigma1**2, 0.0], [0.0, 0.0, 0.0]]
    lin[2] = [[1.0, 0.0, sigma2 * rho2], [0.0, 0.0, 0.0], [sigma2 * rho2, 0.0, sigma2**2]]
    linear = {}
    if lam1 > 0:
        linear[1] = JumpMomentTable.from_function(3, lambda l: lam1 * law1.moment(l))
    if lam2 > 0:
        linear[2] = JumpMomentTable.from_function(3, lambda l: lam2 * law2.moment(l))
    spec = GeneratorSpec(StateSpace.of("line", "half", "half"), drift, DiffusionSpec(np.zeros((3, 3)), lin),
                         ConditionA(linear=linear) if linear else None)
    m1 = [c.raw_moment(1) for c in law1.components]
    m2 = [c.raw_moment(1) for c in law2.components]
    spec = convert_truncation(
        spec, _correction(3, {q: {(0, 1, 0): lam1 * m1[q], (0, 0, 1): lam2 * m2[q]} for q in range(3)})
    )
    c1 = sigma1 * math.sqrt(max(1 - rho1 * rho1, 0.0))
    c2 = sigma2 * math.sqrt(max(1 - rho2 * rho2, 0.0))

    def sim_drift(x):
        u, v = x[:, 1], x[:, 2]
        return np.stack([
            r - (0.5 + lam1 * k1) * u - (0.5 + lam2 * k2) * v,
            b1 - beta11 * u + beta12 * v,
            b2 - beta22 * v + beta21 * u,
        ], axis=1)

    def sim_diffusion(x):
        su, sv = np.sqrt(x[:, 1]), np.sqrt(x[:, 2])
        out = np.zeros((x.shape[0], 3, 4))
        out[:, 0, 0] = su
        out[:, 0, 2] = sv
        out[:, 1, 0] = sigma1 * rho1 * su
        out[:, 1, 1] = c1 * su
        out[:, 2, 2] = sigma2 * rho2 * sv
        out[:, 2, 3] = c2 * sv
        return out

    def guard(x):
        return np.stack([x[:, 0], _pos(x[:, 1]), _pos(x[:, 2])], axis=1)

    sources = []
    if lam1 > 0:
        sources.append(JumpSource(lambda x: lam1 * x[:, 1], lambda x, u: law1.quantile(u), 3))
    if lam2 > 0:
        sources.append(JumpSource(lambda x: lam2 * x[:, 2], lambda x, u: law2.quantile(u), 3))
    sim = SimulationSpec(3, sim_drift, sim_diffusion, 4, tuple(sources), coef_guard=guard)
    market = MarketMap(("exp", "identity", "identity"), (s0, 1.0, 1.0))
    return _finish("bates2f", params, spec, sim, _x0(x0, [0.0, 0.02, 0.01], 3), market, ("x", "u", "v"))


CATALOG: dict[str, Callable[..., Model]] = {
    "brownian": brownian,
    "cir": cir,
    "vasicek": vasicek,
    "jacobi": jacobi,
    "pearson": pearson,
    "levy": levy,
    "exp_levy": exp_levy,
    "black_scholes": black_scholes,
    "heston": heston,
    "bates": bates,
    "bates2f": bates2f,
}


def catalog_names() -> list[str]:
    return sorted(CATALOG)


def catalog(name: str, params: Mapping[str, Any] | None = None) -> Model:
    """Build a catalog model; unknown names and parameters raise ``ValueError``."""
    try:
        factory = CATALOG[name]
    except KeyError:
        raise ValueError(f"unknown model {name!r}; catalog models: {', '.join(catalog_names())}") from None
    params = dict(params or {})
    allowed = set(inspect.signature(factory).parameters)
    unknown = sorted(set(params) - allowed)
    if unknown:
        raise ValueError(f"{name}: unknown parameter(s) {', '.join(unknown)}; accepted: {', '.join(sorted(allowed))}")
    return factory(**params)


def _generic_sim(spec: GeneratorSpec) -> SimulationSpec | None:
    if spec.jumps is not None:
        return None
    n = spec.n

    def diffusion(x):
        w, v = np.linalg.eigh(spec.diffusion(x))
        return v * np.sqrt(_pos(w))[:, None, :]

    lo = np.array([b[0] for b in spec.state.bounds])
    hi = np.array([b[1] for b in spec.state.bounds])
    guard = (lambda x: np.clip(x, lo, hi)) if np.any(np.isfinite(lo) | np.isfinite(hi)) else None
    return SimulationSpec(n, spec.drift, diffusion, n, coef_guard=guard)


def model_from_document(doc: Mapping) -> Model:
    """Model from ``{"model": name, "params": {...}}`` or a raw generator document."""
    if "model" in doc:
        return catalog(doc["model"], doc.get("params", {}))
    spec = spec_from_json(doc)
    problems = validate(spec)
    if problems:
        raise ValueError("; ".join(problems))
    n = spec.n
    x0 = np.asarray(doc.get("x0", [min(max(0.0, lo), hi) for lo, hi in spec.state.bounds]), dtype=float)
    m = doc.get("market")
    market = MarketMap(tuple(m["kinds"]), tuple(m["base"])) if m else MarketMap.identity(n)
    return Model("custom", {"document": dict(doc)}, spec, _generic_sim(spec), x0, market,
                 tuple(f"x{i}" for i in range(n)))


def load_model(source: str, overrides: Mapping[str, Any] | None = None) -> Model:
    """Resolve a catalog name, a path to a JSON document or an inline JSON document."""
    source = source.strip()
    if source.startswith("{"):
        doc = json.loads(source)
    elif source in CATALOG:
        doc = {"model": source, "params": {}}
    elif Path(source).is_file():
        doc = json.loads(Path(source).read_text())
    else:
        raise ValueError(f"unknown model {source!r}; catalog models: {', '.join(catalog_names())}")
    if overrides:
        if "model" not in doc:
            raise ValueError("parameter overrides apply to catalog models only")
        doc = {"model": doc["model"], "params": {**doc.get("params", {}), **overrides}}
    return model_from_document(doc)

"""Exact prices and Greeks of polynomial claims, and polynomial payoff fits.

A claim ``F = f(G^{-1}(S_T))`` with ``f`` a polynomial in the state is priced
by propagating ``f`` with ``exp((T - t) A)``.  No discounting is applied:
prices are expectations under the model's measure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .expm import apply_semigroup
from .generator import GeneratorMatrix, GeneratorSpec, build_matrix
from .montecarlo import MCConfig, simulate_terminal
from .polybasis import Basis, PolyVector, _monomial_values, differentiate, enumerate_basis, evaluate, from_terms

__all__ = [
    "MarketMap",
    "PolyClaim",
    "FitResult",
    "Payoff",
    "price",
    "greeks",
    "fit_payoff",
    "pilot_fit",
    "grid_sample",
    "parse_payoff",
]

COND_LIMIT = 1e12
RIDGE_SCALE = 1e-10
PILOT_SEED_OFFSET = 0x5DEECE66D


@dataclass(frozen=True)
class MarketMap:
    """Diagonal map ``S = G(X)``; each coordinate is ``"identity"`` or ``"exp"`` (``S = base * e^X``)."""

    kinds: tuple[str, ...]
    base: tuple[float, ...]

    def __post_init__(self):
        kinds = tuple(self.kinds)
        base = tuple(float(b) for b in self.base)
        if len(kinds) != len(base):
            raise ValueError("need one base level per coordinate")
        for k, b in zip(kinds, base):
            if k not in ("identity", "exp"):
                raise ValueError(f"unknown coordinate map {k!r} (expected identity or exp)")
            if k == "exp" and not b > 0:
                raise ValueError(f"exponential coordinates need a positive base level, got {b}")
        object.__setattr__(self, "kinds", kinds)
        object.__setattr__(self, "base", base)

    @classmethod
    def identity(cls, n: int) -> "MarketMap":
        return cls(("identity",) * n, (1.0,) * n)

    @property
    def n(self) -> int:
        return len(self.kinds)

    @property
    def _exp(self) -> np.ndarray:
        return np.array([k == "exp" for k in self.kinds])

    def to_price(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.where(self._exp, np.asarray(self.base) * np.exp(np.where(self._exp, x, 0.0)), x)

    def to_state(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        if s.shape[-1] != self.n:
            raise ValueError(f"price vector has dimension {s.shape[-1]}, market map has n={self.n}")
        if np.any(self._exp & ~(s > 0)):
            raise ValueError("prices of exponential coordinates must be positive")
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(self._exp, np.log(s / np.asarray(self.base)), s)

    def inverse_jacobian(self, s) -> np.ndarray:
        """Diagonal of the Jacobian of ``G^{-1}`` at ``s``."""
        s = np.asarray(s, dtype=float)
        self.to_state(s)
        with np.errstate(divide="ignore"):
            return np.where(self._exp, 1.0 / s, 1.0)

    def to_json(self) -> dict:
        return {"kinds": list(self.kinds), "base": list(self.base)}


@dataclass(frozen=True)
class PolyClaim:
    """Claim paying ``f(G^{-1}(S_T))`` at maturity ``T``."""

    f: PolyVector
    T: float

    def __post_init__(self):
        if not (math.isfinite(self.T) and self.T >= 0):
            raise ValueError(f"maturity must be finite and >= 0, got {self.T}")


def _propagated(spec: GeneratorSpec, claim: PolyClaim, t: float, matrix: GeneratorMatrix | None) -> PolyVector:
    if not 0 <= t <= claim.T:
        raise ValueError(f"valuation time t={t} must lie in [0, T={claim.T}]")
    A = matrix if matrix is not None else build_matrix(spec, claim.f.basis.m)
    return apply_semigroup(A, claim.T - t, claim.f.embed(A.basis))


def price(spec: GeneratorSpec, claim: PolyClaim, t: float, s_t, market: MarketMap | None = None,
          matrix: GeneratorMatrix | None = None) -> float:
    """``E[f(X_T) | X_t = G^{-1}(s_t)]``."""
    market = market or MarketMap.identity(spec.n)
    x = market.to_state(np.asarray(s_t, dtype=float).reshape(-1))
    return float(evaluate(_propagated(spec, claim, t, matrix), x))


def greeks(spec: GeneratorSpec, claim: PolyClaim, t: float, s_t, market: MarketMap | None = None,
           matrix: GeneratorMatrix | None = None) -> np.ndarray:
    """Gradient of :func:`price` with respect to the observed prices ``s_t``."""
    market = market or MarketMap.identity(spec.n)
    s = np.asarray(s_t, dtype=float).reshape(-1)
    x = market.to_state(s)
    q = _propagated(spec, claim, t, matrix)
    grad = np.array([evaluate(differentiate(q, i), x) for i in range(spec.n)])
    return grad * market.inverse_jacobian(s)


# ------------------------------------------------------------------ fitting


@dataclass(frozen=True)
class FitResult:
    poly: PolyVector
    rmse: float
    max_residual: float
    condition: float
    ridge: bool
    points: int

    def diagnostics(self) -> dict:
        return {
            "rmse": self.rmse,
            "max_residual": self.max_residual,
            "condition": self.condition,
            "ridge": self.ridge,
            "points": self.points,
        }

    def to_json(self) -> dict:
        return {**self.poly.to_json(), "diagnostics": self.diagnostics()}


def fit_payoff(payoff: Callable[[np.ndarray], np.ndarray], market: MarketMap | None, degree: int, points,
               weights=None) -> FitResult:
    """Weighted least-squares polynomial ``f`` of the given degree with ``f(x) ~ payoff(G(x))``.

    Solved through an SVD of the weighted design; when its condition number
    exceeds ``COND_LIMIT`` the solve switches to Tikhonov regularization with
    parameter ``RIDGE_SCALE * s_max**2`` and the result is flagged.
    """
    x = np.asarray(points, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    L, n = x.shape
    basis = enumerate_basis(n, degree)
    N = len(basis)
    w = np.ones(L) if weights is None else np.asarray(weights, dtype=float).reshape(-1)
    if w.shape != (L,):
        raise ValueError(f"expected {L} weights, got {w.size}")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite and nonnegative")
    used = w > 0
    if np.count_nonzero(used) < N:
        raise ValueError(f"degree-{degree} fit in {n} variables needs at least {N} weighted points, got {np.count_nonzero(used)}")
    market = market or MarketMap.identity(n)
    y = np.asarray(payoff(market.to_price(x)), dtype=float).reshape(-1)
    design = _monomial_values(basis, x)
    sw = np.sqrt(w)
    u, sv, vt = np.linalg.svd(design * sw[:, None], full_matrices=False)
    if sv[0] == 0.0:
        raise ValueError("design matrix is identically zero")
    cond = sv[0] / sv[-1] if sv[-1] > 0 else math.inf
    rhs = u.T @ (sw * y)
    ridge = bool(cond > COND_LIMIT)
    if ridge:
        lam = RIDGE_SCALE * sv[0] ** 2
        coef = vt.T @ (sv / (sv**2 + lam) * rhs)
    else:
        coef = vt.T @ (rhs / sv)
    if not np.all(np.isfinite(coef)):
        raise ValueError("least-squares fit is rank deficient even after regularization")
    resid = design @ coef - y
    rmse = math.sqrt(float(np.sum(w * resid**2) / np.sum(w)))
    return FitResult(PolyVector(basis, coef), rmse, float(np.max(np.abs(resid[used]))), float(cond), ridge,
                     int(np.count_nonzero(used)))


def pilot_fit(model, payoff: Callable[[np.ndarray], np.ndarray], degree: int, T: float, cfg: MCConfig,
              pilot_paths: int = 10_000) -> FitResult:
    """Fit on terminal states of a pilot run with an independent seed (uniform weights)."""
    pilot = replace(cfg, paths=pilot_paths, seed=cfg.seed + PILOT_SEED_OFFSET, first_path=0)
    points = simulate_terminal(model.sim, model.x0, T, pilot)
    return fit_payoff(payoff, model.market, degree, points)


def grid_sample(lo: Sequence[float], hi: Sequence[float], per_axis: int) -> np.ndarray:
    """Uniform tensor grid on the box ``[lo, hi]``; an alternative to pilot samples for :func:`fit_payoff`."""
    axes = [np.linspace(a, b, per_axis) for a, b in zip(lo, hi)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.reshape(-1) for m in mesh], axis=-1)


# ------------------------------------------------------------------ payoffs


@dataclass(frozen=True)
class Payoff:
    """Payoff on the first price coordinate.

    ``kind`` is ``call``/``put`` (strike ``args[0]``), ``power`` (``S^p``) or
    ``poly`` (coefficients of a polynomial in the state coordinate
    ``x = G^{-1}(S)``).
    """

    kind: str
    args: tuple[float, ...] = field(default_factory=tuple)
    coordinate: int = 0

    def __call__(self, prices: np.ndarray, market: MarketMap | None = None) -> np.ndarray:
        prices = np.asarray(prices, dtype=float)
        s = prices[..., self.coordinate] if prices.ndim > 1 else prices
        if self.kind == "call":
            return np.maximum(s - self.args[0], 0.0)
        if self.kind == "put":
            return np.maximum(self.args[0] - s, 0.0)
        if self.kind == "power":
            return s ** self.args[0]
        if self.kind == "poly":
            if market is not None and prices.ndim > 1:
                x = market.to_state(prices)[..., self.coordinate]
            elif market is not None:
                x = market.to_state(prices[..., None])[..., 0]
            else:
                x = s
            return np.polynomial.polynomial.polyval(x, np.asarray(self.args))
        raise ValueError(f"unknown payoff kind {self.kind!r}")

    def bind(self, market: MarketMap | None) -> Callable[[np.ndarray], np.ndarray]:
        return lambda prices: self(prices, market)

    def polynomial(self, basis: Basis, market: MarketMap | None = None) -> PolyVector | None:
        """The payoff as a polynomial in the state, or None when it is not one."""
        n = basis.n
        e = tuple(1 if j == self.coordinate else 0 for j in range(n))
        identity = market is None or market.kinds[self.coordinate] == "identity"
        if self.kind == "poly":
            coeffs = list(self.args)
        elif self.kind == "power" and identity and float(self.args[0]).is_integer() and self.args[0] >= 0:
            coeffs = [0.0] * int(self.args[0]) + [1.0]
        else:
            return None
        if len(coeffs) - 1 > basis.m:
            raise ValueError(f"payoff polynomial of degree {len(coeffs) - 1} exceeds basis degree {basis.m}")
        return from_terms(basis, {tuple(p * v for v in e): c for p, c in enumerate(coeffs)})

    def to_json(self) -> dict:
        return {"kind": self.kind, "args": list(self.args), "coordinate": self.coordinate}

    def __str__(self) -> str:
        if self.kind == "poly":
            return "poly " + ",".join(repr(a) for a in self.args)
        return f"{self.kind} {self.args[0]!r}"


def parse_payoff(text: str) -> Payoff:
    """Parse ``call K``, ``put K``, ``power p`` or ``poly c0,c1,...``."""
    parts = text.strip().split(None, 1)
    if len(parts) != 2:
        raise ValueError(f"cannot parse payoff {text!r}; expected 'call K', 'put K', 'power p' or 'poly c0,c1,...'")
    kind, rest = parts[0].lower(), parts[1]
    try:
        if kind in ("call", "put", "power"):
            return Payoff(kind, (float(rest),))
        if kind == "poly":
            return Payoff(kind, tuple(float(c) for c in rest.replace(" ", "").split(",") if c))
    except ValueError:
        raise ValueError(f"cannot parse the numbers in payoff {text!r}") from None
    raise ValueError(f"unknown payoff kind {kind!r}; expected call, put, power or poly")

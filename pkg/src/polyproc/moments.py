"""Moments, mixed moments, time-space harmonic polynomials and GMM calibration."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
import scipy.optimize

from .expm import apply_semigroup, expm
from .generator import GeneratorMatrix, GeneratorSpec, build_matrix
from .polybasis import MultiIndex, PolyVector, as_multi_index, enumerate_basis, evaluate, monomial, multiply

__all__ = [
    "MomentRequest",
    "GmmCondition",
    "CalibrationResult",
    "moment",
    "mixed_moment",
    "harmonic_polynomial",
    "stationary_horizon",
    "sample_moments",
    "model_moments",
    "gmm_residuals",
    "calibrate",
]

STATIONARY_TOL = 1e-10
NM_XATOL = 1e-6
NM_MAXITER = 500


def _index(k, n: int) -> MultiIndex:
    k = as_multi_index(np.atleast_1d(k))
    if len(k) != n:
        raise ValueError(f"multi-index {k} has dimension {len(k)}, model has n={n}")
    return k


def _point(spec: GeneratorSpec, x) -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != spec.n:
        raise ValueError(f"start point has dimension {x.size}, model has n={spec.n}")
    if not spec.state.contains(x, tol=1e-12):
        raise ValueError(f"start point {x.tolist()} lies outside the state space")
    return x


def _matrix(spec: GeneratorSpec, degree: int, matrix: GeneratorMatrix | None) -> GeneratorMatrix:
    if matrix is not None and matrix.basis.m >= degree:
        return matrix
    return build_matrix(spec, degree)


def moment(spec: GeneratorSpec, k, t: float, x, matrix: GeneratorMatrix | None = None) -> float:
    """``E[X_t^k]`` started at ``x``."""
    if t < 0:
        raise ValueError("time must be >= 0")
    k = _index(k, spec.n)
    x = _point(spec, x)
    A = _matrix(spec, sum(k), matrix)
    return float(evaluate(apply_semigroup(A, t, monomial(A.basis, k)), x))


@dataclass(frozen=True)
class MomentRequest:
    spec: GeneratorSpec
    k: MultiIndex
    t: float
    x: np.ndarray

    def value(self, matrix: GeneratorMatrix | None = None) -> float:
        return moment(self.spec, self.k, self.t, self.x, matrix)


def _mixed_poly(A: GeneratorMatrix, n_idx: MultiIndex, m_idx: MultiIndex, s: float) -> PolyVector:
    # x^n * E[X_s^m | X_0 = x] as a polynomial of degree <= |n| + |m|
    inner = apply_semigroup(A, s, monomial(A.basis, m_idx))
    return multiply(monomial(A.basis, n_idx), inner, A.basis)


def mixed_moment(spec: GeneratorSpec, n_idx, m_idx, t: float, s: float, x,
                 matrix: GeneratorMatrix | None = None) -> float:
    """``E[X_t^n X_{t+s}^m]`` started at ``x`` via the tower property."""
    if t < 0 or s < 0:
        raise ValueError("times must be >= 0")
    n_idx, m_idx = _index(n_idx, spec.n), _index(m_idx, spec.n)
    x = _point(spec, x)
    A = _matrix(spec, sum(n_idx) + sum(m_idx), matrix)
    outer = apply_semigroup(A, t, _mixed_poly(A, n_idx, m_idx, s))
    return float(evaluate(outer, x))


def harmonic_polynomial(spec: GeneratorSpec, f: PolyVector, s: float,
                        matrix: GeneratorMatrix | None = None) -> PolyVector:
    """``Q(-s, .) = sum_n (-s)^n / n! A^n f`` for generators that strictly lower the degree."""
    A = _matrix(spec, f.basis.m, matrix)
    f = f.embed(A.basis)
    dense = A.dense()
    degrees = A.basis.degrees
    for i, k in enumerate(A.basis):
        row = np.flatnonzero(dense[i])
        if row.size and degrees[row].max() >= max(sum(k), 1):
            raise ValueError(
                f"generator does not lower the degree: image of x^{list(k)} has degree {int(degrees[row].max())}"
            )
    term = f.coeffs.copy()
    out = term.copy()
    for n in range(1, A.basis.m + 1):
        term = (-s / n) * (term @ dense)
        out = out + term
    return PolyVector(A.basis, out)


def stationary_horizon(A: GeneratorMatrix) -> float:
    """Time after which the slowest non-constant mode has decayed below ``STATIONARY_TOL``."""
    eig = np.linalg.eigvals(A.dense()[1:, 1:])
    if eig.size == 0:
        raise ValueError("model has no non-constant modes")
    slowest = float(np.max(eig.real))
    if slowest >= -1e-12:
        raise ValueError(f"model has no mean reversion (slowest mode rate {slowest:g} >= 0); "
                         "stationary moments do not exist, pass a start point instead")
    return math.log(1.0 / STATIONARY_TOL) / -slowest


# --------------------------------------------------------------------- GMM


@dataclass(frozen=True)
class GmmCondition:
    """Moment conditions ``E[X_t^{n_i} X_{t+s_i}^{m_i}]``; ``terms`` holds ``(n_i, m_i, s_i)``."""

    terms: tuple = ()

    def __post_init__(self):
        terms = tuple((as_multi_index(np.atleast_1d(a)), as_multi_index(np.atleast_1d(b)), float(s))
                      for a, b, s in self.terms)
        for a, b, s in terms:
            if s < 0:
                raise ValueError("lags must be >= 0")
        object.__setattr__(self, "terms", terms)

    @property
    def degree(self) -> int:
        return max((sum(a) + sum(b) for a, b, _ in self.terms), default=0)

    def __len__(self) -> int:
        return len(self.terms)

    def to_json(self) -> list:
        return [{"n": list(a), "m": list(b), "lag": s} for a, b, s in self.terms]

    @classmethod
    def from_json(cls, doc: Sequence[Mapping]) -> "GmmCondition":
        return cls(tuple((d["n"], d["m"], d.get("lag", 0.0)) for d in doc))


def _panel(data) -> np.ndarray:
    arr = np.asarray(data, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :, None]
    elif arr.ndim == 2:
        arr = arr[None]
    if arr.ndim != 3:
        raise ValueError("data must have shape (T,), (T, n) or (chains, T, n)")
    return arr


def _lag_steps(s: float, dt: float) -> int:
    q = s / dt
    j = round(q)
    if abs(q - j) > 1e-9 * max(1.0, q):
        raise ValueError(f"lag {s} is not an integer multiple of the sampling interval {dt}")
    return int(j)


def _products(cond: GmmCondition, panel: np.ndarray, dt: float) -> list[np.ndarray]:
    P, T, n = panel.shape
    out = []
    for a, b, s in cond.terms:
        if len(a) != n or len(b) != n:
            raise ValueError(f"condition indices have dimension {len(a)}, data has {n} coordinates")
        j = _lag_steps(s, dt)
        if j >= T:
            raise ValueError(f"series of length {T} is too short for lag {s} ({j} steps)")
        head = np.prod(panel[:, : T - j, :] ** np.asarray(a), axis=-1)
        tail = np.prod(panel[:, j:, :] ** np.asarray(b), axis=-1)
        out.append(head * tail)  # (P, T - j)
    return out


def sample_moments(cond: GmmCondition, data, dt: float, batches: int = 20) -> tuple[np.ndarray, np.ndarray]:
    """Sample averages of the conditions and their standard errors.

    With several chains the standard error comes from the spread of per-chain
    averages; a single chain is split into ``batches`` contiguous batches.
    """
    panel = _panel(data)
    means, errs = [], []
    for prod in _products(cond, panel, dt):
        means.append(float(prod.mean()))
        if prod.shape[0] > 1:
            groups = prod.mean(axis=1)
        else:
            usable = prod.shape[1] - prod.shape[1] % batches
            groups = prod[0, :usable].reshape(batches, -1).mean(axis=1) if usable >= batches else prod[0]
        errs.append(float(groups.std(ddof=1) / math.sqrt(groups.size)) if groups.size > 1 else math.inf)
    return np.array(means), np.array(errs)


def _default_point(spec: GeneratorSpec) -> np.ndarray:
    pts = []
    for lo, hi in spec.state.bounds:
        pts.append(0.5 * (lo + hi) if math.isfinite(lo) and math.isfinite(hi) else min(max(0.0, lo), hi))
    return np.array(pts)


def model_moments(cond: GmmCondition, spec: GeneratorSpec, dt: float = 1.0, T: int = 1, x=None,
                  matrix: GeneratorMatrix | None = None) -> np.ndarray:
    """Model side of the conditions.

    Without ``x`` the stationary moments (at :func:`stationary_horizon`);
    with ``x`` the average of ``E_x[X_t^n X_{t+s}^m]`` over the sample times
    ``t = 0, dt, ..., (T - 1 - lag) dt`` of a chain started at ``x``.
    """
    if not cond.terms:
        return np.zeros(0)
    A = _matrix(spec, cond.degree, matrix)
    basis = A.basis
    polys = [_mixed_poly(A, a, b, s) for a, b, s in cond.terms]
    if x is None:
        P = expm(A, stationary_horizon(A)).matrix
        point = _default_point(spec)
        return np.array([evaluate(PolyVector(basis, p.coeffs @ P), point) for p in polys])
    x = _point(spec, x)
    step = expm(A, dt).matrix
    out = []
    for p, (a, b, s) in zip(polys, cond.terms):
        count = T - _lag_steps(s, dt)
        coeffs = p.coeffs.copy()
        total = np.zeros_like(coeffs)
        for _ in range(count):
            total += coeffs
            coeffs = coeffs @ step
        out.append(evaluate(PolyVector(basis, total / count), x))
    return np.array(out)


def gmm_residuals(cond: GmmCondition, data, dt: float, spec: GeneratorSpec, x=None,
                  matrix: GeneratorMatrix | None = None) -> np.ndarray:
    """Sample average minus model moment, one entry per condition."""
    if not cond.terms:
        return np.zeros(0)
    panel = _panel(data)
    sample = np.array([p.mean() for p in _products(cond, panel, dt)])
    return sample - model_moments(cond, spec, dt, panel.shape[1], x, matrix)


@dataclass(frozen=True)
class CalibrationResult:
    params: dict
    objective: float
    iterations: int
    converged: bool
    flat: tuple[str, ...] = ()
    message: str = ""

    def to_json(self) -> dict:
        return {
            "params": self.params,
            "objective": self.objective,
            "iterations": self.iterations,
            "converged": self.converged,
            "flat": list(self.flat),
            "message": self.message,
        }


def calibrate(cond: GmmCondition, data, dt: float, box: Mapping[str, tuple[float, float]], family: str,
              fixed: Mapping[str, float] | None = None, x=None) -> CalibrationResult:
    """Minimize ``g' g`` over the parameter box with Nelder-Mead.

    The search runs in coordinates scaled to the unit cube, starts from the
    box midpoint with an initial simplex of quarter-width steps and stops when
    the simplex diameter falls below ``NM_XATOL`` or after ``NM_MAXITER``
    iterations.  Parameters whose perturbation by 5% of the box width leaves
    the objective unchanged are reported in ``flat``.
    """
    from .models import catalog

    fixed = dict(fixed or {})
    names = list(box)
    lo = np.array([float(box[k][0]) for k in names])
    hi = np.array([float(box[k][1]) for k in names])
    if np.any(~np.isfinite(lo) | ~np.isfinite(hi)) or np.any(hi < lo):
        raise ValueError("parameter box needs finite bounds with lo <= hi")
    panel = _panel(data)
    free = hi > lo
    width = hi - lo

    def params_at(u):
        p = lo.copy()
        p[free] = lo[free] + np.clip(u, 0.0, 1.0) * width[free]
        return {**fixed, **{k: float(v) for k, v in zip(names, p)}}

    def objective(u):
        try:
            spec = catalog(family, params_at(u)).spec
            g = gmm_residuals(cond, panel, dt, spec, x)
        except (ValueError, FloatingPointError, np.linalg.LinAlgError):
            return math.inf
        val = float(g @ g)
        return val if math.isfinite(val) else math.inf

    d = int(np.count_nonzero(free))
    start = np.full(d, 0.5)
    f0 = objective(start)
    if not math.isfinite(f0):
        raise ValueError(f"objective is not finite at the box midpoint {params_at(start)}")
    if d == 0:
        return CalibrationResult(params_at(start), f0, 0, True, (), "zero-width box")
    simplex = np.vstack([start] + [start + 0.25 * np.eye(d)[i] for i in range(d)])
    res = scipy.optimize.minimize(
        objective,
        start,
        method="Nelder-Mead",
        bounds=[(0.0, 1.0)] * d,
        options={"xatol": NM_XATOL, "fatol": math.inf, "maxiter": NM_MAXITER, "initial_simplex": simplex},
    )
    best = res.x
    fbest = float(res.fun)
    flat = []
    free_names = [k for k, f in zip(names, free) if f]
    for i, name in enumerate(free_names):
        changes = []
        for delta in (-0.05, 0.05):
            u = best.copy()
            u[i] = min(max(u[i] + delta, 0.0), 1.0)
            changes.append(abs(objective(u) - fbest))
        if max(changes) <= 1e-12 * (1.0 + abs(fbest)):
            flat.append(name)
    return CalibrationResult(params_at(best), fbest, int(res.nit), bool(res.success), tuple(flat), str(res.message))

"""Matrix exponential of generator matrices and the semigroup action on polynomials.

``expm`` is scaling and squaring around the diagonal [13/13] Pade approximant
(Higham 2005).  ``ode_oracle`` integrates the backward equation with classical
RK4 and exists to check ``apply_semigroup`` along an independent path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .generator import GeneratorMatrix
from .polybasis import PolyVector

__all__ = ["ExpmResult", "expm", "expm_dense", "apply_semigroup", "ode_oracle"]

_THETA_13 = 5.371920351148152
_PADE_13 = (
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
)


@dataclass(frozen=True, eq=False)
class ExpmResult:
    matrix: np.ndarray
    scaling: int
    norm: float


def expm_dense(a: np.ndarray) -> ExpmResult:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    n = a.shape[0]
    ident = np.eye(n)
    norm = float(np.abs(a).sum(axis=0).max()) if n else 0.0
    if norm == 0.0:
        return ExpmResult(ident, 0, 0.0)

    s = max(0, math.ceil(math.log2(norm / _THETA_13))) if norm > _THETA_13 else 0
    a1 = a / 2.0**s
    b = _PADE_13
    a2 = a1 @ a1
    a4 = a2 @ a2
    a6 = a2 @ a4
    u = a1 @ (a6 @ (b[13] * a6 + b[11] * a4 + b[9] * a2) + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * ident)
    v = a6 @ (b[12] * a6 + b[10] * a4 + b[8] * a2) + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * ident
    if not np.any(np.triu(a, 1)):
        # keeps the upper triangle exactly zero
        r = scipy.linalg.solve_triangular(v - u, v + u, lower=True)
    else:
        r = np.linalg.solve(v - u, v + u)
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(s):
            r = r @ r
    if not np.all(np.isfinite(r)):
        raise FloatingPointError("matrix exponential overflowed")
    return ExpmResult(r, s, norm)


def expm(a: GeneratorMatrix | np.ndarray, t: float = 1.0) -> ExpmResult:
    """``exp(t A)``; negative ``t`` gives the inverse semigroup element."""
    t = float(t)
    if not math.isfinite(t):
        raise ValueError("time must be finite")
    dense = a.dense() if isinstance(a, GeneratorMatrix) else np.asarray(a, dtype=float)
    if not np.all(np.isfinite(dense)):
        raise ValueError("matrix has non-finite entries")
    if t == 0.0:
        return ExpmResult(np.eye(dense.shape[0]), 0, 0.0)
    return expm_dense(t * dense)


def _check_basis(a: GeneratorMatrix, f: PolyVector):
    if f.basis is not a.basis:
        raise ValueError(f"polynomial basis {f.basis} does not match generator basis {a.basis}")


def apply_semigroup(a: GeneratorMatrix, t: float, f: PolyVector) -> PolyVector:
    """Coefficients of ``P_t f``: the row vector of ``f`` times ``exp(t A)``."""
    _check_basis(a, f)
    return PolyVector(a.basis, f.coeffs @ expm(a, t).matrix)


def ode_oracle(a: GeneratorMatrix, t: float, f: PolyVector, steps: int = 10_000) -> PolyVector:
    """RK4 solution of ``d alpha/dt = alpha A`` from ``alpha(0) = f``.

    For a linear autonomous system one classical RK4 step is multiplication by
    ``I + hA + (hA)^2/2 + (hA)^3/6 + (hA)^4/24``; that step matrix is formed once
    and applied ``steps`` times.
    """
    _check_basis(a, f)
    if steps < 1:
        raise ValueError("steps must be >= 1")
    hA = (float(t) / steps) * a.dense()
    step = np.eye(hA.shape[0])
    term = np.eye(hA.shape[0])
    for j in range(1, 5):
        term = term @ hA / j
        step = step + term
    y = f.coeffs.copy()
    for _ in range(steps):
        y = y @ step
    return PolyVector(a.basis, y)

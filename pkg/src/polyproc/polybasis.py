"""Monomial bases of Pol_{<=m}(R^n) and polynomial algebra on coefficient vectors.

A basis enumerates the multi-indices ``k`` with ``|k| <= m`` in graded
lexicographic order: first by total degree, then lexicographically.  With this
ordering every degree filtration ``Pol_{<=d}`` is a leading block of the
coefficient vector, so degree-preserving operators become block
lower-triangular matrices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import product
from typing import Iterable, Iterator, Mapping, NamedTuple, Sequence

import numpy as np

MultiIndex = tuple[int, ...]

__all__ = [
    "MultiIndex",
    "Basis",
    "PolyVector",
    "JumpTerm",
    "enumerate_basis",
    "index_of",
    "monomial",
    "constant",
    "from_terms",
    "differentiate",
    "multiply",
    "evaluate",
    "jump_taylor_terms",
    "degree",
    "unit",
]


def degree(k: Sequence[int]) -> int:
    return int(sum(k))


def unit(n: int, i: int) -> MultiIndex:
    """The multi-index e_i."""
    return tuple(1 if j == i else 0 for j in range(n))


def as_multi_index(k: Iterable[int]) -> MultiIndex:
    k = tuple(int(v) for v in k)
    if any(v < 0 for v in k):
        raise ValueError(f"multi-index entries must be nonnegative, got {k}")
    return k


def _compositions(total: int, parts: int) -> Iterator[MultiIndex]:
    # lexicographically increasing compositions of `total` into `parts` entries
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


class Basis:
    """Graded-lex monomial basis of polynomials of degree <= ``m`` in ``n`` variables.

    Instances are interned per ``(n, m)``; use :func:`enumerate_basis`.
    """

    __slots__ = ("n", "m", "ordering", "_position", "exponents", "degrees")

    def __init__(self, n: int, m: int):
        size = math.comb(n + m, n)
        if size > np.iinfo(np.intp).max:
            raise OverflowError(f"basis size binomial({n + m}, {n}) exceeds the index range")
        self.n = n
        self.m = m
        self.ordering: tuple[MultiIndex, ...] = tuple(
            k for d in range(m + 1) for k in _compositions(d, n)
        )
        self._position = {k: i for i, k in enumerate(self.ordering)}
        self.exponents = np.array(self.ordering, dtype=np.int64).reshape(size, n)
        self.exponents.setflags(write=False)
        self.degrees = self.exponents.sum(axis=1)
        self.degrees.setflags(write=False)

    def __len__(self) -> int:
        return len(self.ordering)

    @property
    def size(self) -> int:
        return len(self.ordering)

    def __getitem__(self, i: int) -> MultiIndex:
        return self.ordering[i]

    def __iter__(self) -> Iterator[MultiIndex]:
        return iter(self.ordering)

    def __contains__(self, k) -> bool:
        return tuple(k) in self._position

    def __repr__(self) -> str:
        return f"Basis(n={self.n}, m={self.m}, N={len(self)})"

    def __reduce__(self):
        return enumerate_basis, (self.n, self.m)

    def index(self, k: Sequence[int]) -> int:
        k = tuple(k)
        try:
            return self._position[k]
        except KeyError:
            if len(k) != self.n:
                raise ValueError(f"multi-index {k} has dimension {len(k)}, basis has n={self.n}") from None
            if any(v < 0 for v in k):
                raise ValueError(f"multi-index {k} has negative entries") from None
            raise ValueError(f"multi-index {k} has degree {sum(k)} > basis degree {self.m}") from None

    def block(self, d: int) -> slice:
        """Slice of the positions holding monomials of exact degree ``d``."""
        lo = math.comb(self.n + d - 1, self.n) if d > 0 else 0
        return slice(lo, math.comb(self.n + d, self.n))


@lru_cache(maxsize=None)
def enumerate_basis(n: int, m: int) -> Basis:
    """All multi-indices with ``|k| <= m`` on ``n`` coordinates, graded-lex ordered."""
    if n < 1:
        raise ValueError(f"dimension must be positive, got {n}")
    if m < 0:
        raise ValueError(f"maximal degree must be nonnegative, got {m}")
    return Basis(int(n), int(m))


def index_of(basis: Basis, k: Sequence[int]) -> int:
    return basis.index(k)


@dataclass(frozen=True, eq=False)
class PolyVector:
    """Polynomial stored as coefficients over a :class:`Basis`."""

    basis: Basis
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float)
        if c.shape != (len(self.basis),):
            raise ValueError(f"expected {len(self.basis)} coefficients, got shape {c.shape}")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def n(self) -> int:
        return self.basis.n

    @property
    def degree(self) -> int:
        nz = np.flatnonzero(self.coeffs)
        return int(self.basis.degrees[nz].max()) if nz.size else 0

    def terms(self) -> dict[MultiIndex, float]:
        return {self.basis[i]: float(self.coeffs[i]) for i in np.flatnonzero(self.coeffs)}

    def embed(self, target: Basis) -> "PolyVector":
        """Same polynomial expressed over ``target`` (same ``n``, enough degree)."""
        if target is self.basis:
            return self
        if target.n != self.n:
            raise ValueError(f"cannot embed a polynomial in {self.n} variables into n={target.n}")
        if self.degree > target.m:
            raise ValueError(f"polynomial of degree {self.degree} does not fit a degree-{target.m} basis")
        out = np.zeros(len(target))
        for i in np.flatnonzero(self.coeffs):
            out[target.index(self.basis[i])] = self.coeffs[i]
        return PolyVector(target, out)

    def __call__(self, x) -> np.ndarray | float:
        return evaluate(self, x)

    def _coerce(self, other: "PolyVector") -> tuple[Basis, np.ndarray, np.ndarray]:
        if other.basis is self.basis:
            return self.basis, self.coeffs, other.coeffs
        target = self.basis if self.basis.m >= other.basis.m else other.basis
        return target, self.embed(target).coeffs, other.embed(target).coeffs

    def __add__(self, other):
        if not isinstance(other, PolyVector):
            return NotImplemented
        b, p, q = self._coerce(other)
        return PolyVector(b, p + q)

    def __sub__(self, other):
        if not isinstance(other, PolyVector):
            return NotImplemented
        b, p, q = self._coerce(other)
        return PolyVector(b, p - q)

    def __mul__(self, scalar):
        if isinstance(scalar, PolyVector):
            return NotImplemented
        return PolyVector(self.basis, self.coeffs * float(scalar))

    __rmul__ = __mul__

    def __neg__(self):
        return PolyVector(self.basis, -self.coeffs)

    def __repr__(self) -> str:
        terms = " + ".join(f"{c:g}*x^{k}" for k, c in self.terms().items()) or "0"
        return f"PolyVector({terms}; n={self.n}, m={self.basis.m})"

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "max_degree": self.basis.m,
            "basis": [list(k) for k in self.basis],
            "coefficients": [float(c) for c in self.coeffs],
        }

    @classmethod
    def from_json(cls, doc: Mapping) -> "PolyVector":
        if "coefficients" in doc:
            basis = enumerate_basis(int(doc["n"]), int(doc["max_degree"]))
            terms = {tuple(k): c for k, c in zip(doc["basis"], doc["coefficients"])}
            return from_terms(basis, terms)
        raise ValueError("polynomial document needs 'n', 'max_degree', 'basis' and 'coefficients'")


def monomial(basis: Basis, k: Sequence[int], coeff: float = 1.0) -> PolyVector:
    c = np.zeros(len(basis))
    c[basis.index(k)] = coeff
    return PolyVector(basis, c)


def constant(basis: Basis, value: float = 1.0) -> PolyVector:
    return monomial(basis, (0,) * basis.n, value)


def from_terms(basis: Basis, terms: Mapping[Sequence[int], float]) -> PolyVector:
    c = np.zeros(len(basis))
    for k, v in terms.items():
        c[basis.index(tuple(k))] += v
    return PolyVector(basis, c)


@lru_cache(maxsize=None)
def _derivative_map(basis: Basis, axis: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    src, dst, fac = [], [], []
    for i, k in enumerate(basis):
        if k[axis] > 0:
            km = k[:axis] + (k[axis] - 1,) + k[axis + 1:]
            src.append(i)
            dst.append(basis.index(km))
            fac.append(k[axis])
    return np.array(src, dtype=np.intp), np.array(dst, dtype=np.intp), np.array(fac, dtype=float)


def differentiate(p: PolyVector, axis: int) -> PolyVector:
    """Partial derivative with respect to coordinate ``axis``, in the same basis."""
    if not 0 <= axis < p.n:
        raise ValueError(f"axis {axis} out of range for n={p.n}")
    src, dst, fac = _derivative_map(p.basis, axis)
    out = np.zeros(len(p.basis))
    np.add.at(out, dst, fac * p.coeffs[src])
    return PolyVector(p.basis, out)


def multiply(p: PolyVector, q: PolyVector, target: Basis) -> PolyVector:
    """Exact product ``p*q`` over ``target``; refuses to truncate."""
    if not (p.n == q.n == target.n):
        raise ValueError("all factors and the target basis must share the same dimension")
    dp, dq = p.degree, q.degree
    if dp + dq > target.m:
        raise ValueError(f"product degree {dp + dq} exceeds target basis degree {target.m}")
    out = np.zeros(len(target))
    ip = np.flatnonzero(p.coeffs)
    iq = np.flatnonzero(q.coeffs)
    ep, eq = p.basis.exponents, q.basis.exponents
    for i in ip:
        ci = p.coeffs[i]
        for j in iq:
            out[target.index(tuple(ep[i] + eq[j]))] += ci * q.coeffs[j]
    return PolyVector(target, out)


def _monomial_values(basis: Basis, x: np.ndarray) -> np.ndarray:
    # x: (..., n) -> (..., N) with exact integer powers by repeated multiplication
    powers = np.empty(x.shape + (basis.m + 1,))
    powers[..., 0] = 1.0
    for e in range(1, basis.m + 1):
        powers[..., e] = powers[..., e - 1] * x
    vals = np.ones(x.shape[:-1] + (len(basis),))
    for i in range(basis.n):
        vals *= powers[..., i, basis.exponents[:, i]]
    return vals


def evaluate(p: PolyVector, x) -> np.ndarray | float:
    """Evaluate ``p`` at a point of shape ``(n,)`` or a batch of shape ``(L, n)``."""
    x = np.asarray(x, dtype=float)
    if p.n == 1 and x.ndim == 1 and x.shape != (1,):
        x = x[:, None]
    elif x.ndim == 0:
        x = x.reshape(1)
    if x.shape[-1] != p.n:
        raise ValueError(f"point has dimension {x.shape[-1]}, polynomial has n={p.n}")
    val = _monomial_values(p.basis, x) @ p.coeffs
    return float(val) if val.ndim == 0 else val


class JumpTerm(NamedTuple):
    l: MultiIndex
    coeff: int
    residual: MultiIndex


def jump_taylor_terms(k: Sequence[int]) -> list[JumpTerm]:
    """Terms of ``(x+xi)^k - x^k - sum_j k_j xi_j x^(k-e_j)`` as ``coeff * x^residual * xi^l``.

    Only ``l <= k`` with ``|l| >= 2`` survive; ``coeff = prod_i binom(k_i, l_i)``.
    """
    k = as_multi_index(k)
    terms = []
    for l in product(*(range(ki + 1) for ki in k)):
        if sum(l) < 2:
            continue
        c = math.prod(math.comb(ki, li) for ki, li in zip(k, l))
        terms.append(JumpTerm(l, c, tuple(ki - li for ki, li in zip(k, l))))
    terms.sort(key=lambda t: (sum(t.l), t.l))
    return terms

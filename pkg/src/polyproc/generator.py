"""Differential characteristics of polynomial jump-diffusions and their generator matrix.

Characteristics are stated for the truncation function chi(xi) = xi:

* drift      b(x) = b + sum_i x_i beta_i
* diffusion  a(x) = a + sum_i x_i alpha_{i0} + sum_{i<=j} x_i x_j alpha_{ij}
* jumps      either an affine/quadratic combination of Levy measures known
  through their monomial moments (:class:`ConditionA`), or a push-forward
  ``g(x, y) = H(y) x + h(y)`` of one Levy measure (:class:`ConditionB`).

:func:`build_matrix` applies the generator to every basis monomial; row ``i``
of the result holds the coefficients of the image of monomial ``i``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Mapping, Protocol, Sequence

import numpy as np
import scipy.sparse

from .polybasis import (
    Basis,
    MultiIndex,
    PolyVector,
    as_multi_index,
    enumerate_basis,
    from_terms,
    jump_taylor_terms,
    multiply,
    monomial,
    unit,
)

__all__ = [
    "SpecError",
    "MissingMomentError",
    "StateSpace",
    "DriftSpec",
    "DiffusionSpec",
    "JumpMomentTable",
    "ConditionA",
    "ConditionB",
    "PushforwardAtoms",
    "DiagonalJumpAction",
    "GeneratorSpec",
    "GeneratorMatrix",
    "validate",
    "build_matrix",
    "convert_truncation",
    "validation_grid",
    "spec_to_json",
    "spec_from_json",
    "SPARSE_THRESHOLD",
]

SPARSE_THRESHOLD = 512
GRID_CAP = 100_000
_HALF_LINE_GRID = (0.0, 0.5, 1.0, 5.0, 25.0)
_LINE_GRID = (-25.0, -5.0, -1.0, 0.0, 1.0, 5.0, 25.0)
_INTERVAL_POINTS = 9


class SpecError(ValueError):
    """A generator specification failed validation."""

    def __init__(self, violations: Sequence[str]):
        self.violations = list(violations)
        super().__init__("invalid generator spec:\n  " + "\n  ".join(self.violations))


class MissingMomentError(ValueError):
    pass


# ---------------------------------------------------------------- state space


@dataclass(frozen=True)
class StateSpace:
    """Product state space; each coordinate is R, [0, inf) or a closed [lo, hi]."""

    bounds: tuple[tuple[float, float], ...]

    def __post_init__(self):
        bounds = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        for lo, hi in bounds:
            if lo == -math.inf and hi == math.inf:
                continue
            if lo == 0.0 and hi == math.inf:
                continue
            if not (math.isfinite(lo) and math.isfinite(hi)):
                raise ValueError(f"unsupported coordinate domain ({lo}, {hi})")
            if not lo < hi:
                raise ValueError(f"interval needs lo < hi, got [{lo}, {hi}]")
        object.__setattr__(self, "bounds", bounds)

    @classmethod
    def of(cls, *kinds) -> "StateSpace":
        """Build from ``"line"``, ``"half"`` or ``(lo, hi)`` per coordinate."""
        out = []
        for k in kinds:
            if k == "line":
                out.append((-math.inf, math.inf))
            elif k == "half":
                out.append((0.0, math.inf))
            else:
                lo, hi = k
                out.append((lo, hi))
        return cls(tuple(out))

    @property
    def n(self) -> int:
        return len(self.bounds)

    def kind(self, i: int):
        lo, hi = self.bounds[i]
        if lo == -math.inf:
            return "line"
        if hi == math.inf:
            return "half"
        return [lo, hi]

    def nonnegative(self, i: int) -> bool:
        return self.bounds[i][0] >= 0.0

    def nonpositive(self, i: int) -> bool:
        return self.bounds[i][1] <= 0.0

    def contains(self, x, tol: float = 0.0) -> bool:
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.shape != (self.n,):
            return False
        return all(lo - tol <= v <= hi + tol for v, (lo, hi) in zip(x, self.bounds))

    def coordinate_grid(self, i: int) -> np.ndarray:
        lo, hi = self.bounds[i]
        if lo == -math.inf:
            return np.array(_LINE_GRID)
        if hi == math.inf:
            return np.array(_HALF_LINE_GRID)
        return np.linspace(lo, hi, _INTERVAL_POINTS)

    def to_json(self) -> list:
        return [self.kind(i) for i in range(self.n)]

    @classmethod
    def from_json(cls, doc: Sequence) -> "StateSpace":
        return cls.of(*(k if isinstance(k, str) else tuple(k) for k in doc))


def validation_grid(state: StateSpace, cap: int = GRID_CAP) -> np.ndarray:
    """Deterministic sample of the state space used for admissibility checks.

    Per coordinate: 9 equispaced points on a bounded interval, {0, .5, 1, 5, 25}
    on the half-line and {-25, -5, -1, 0, 1, 5, 25} on the line.  Tensor grids
    larger than ``cap`` are thinned to ``cap`` points taken at equispaced
    positions of the row-major enumeration.
    """
    axes = [state.coordinate_grid(i) for i in range(state.n)]
    sizes = [len(a) for a in axes]
    total = math.prod(sizes)
    flat = np.arange(total) if total <= cap else np.unique(np.linspace(0, total - 1, cap).round().astype(np.int64))
    idx = np.unravel_index(flat, sizes)
    return np.stack([axes[i][idx[i]] for i in range(state.n)], axis=-1)


# ---------------------------------------------------------- drift / diffusion


@dataclass(frozen=True, eq=False)
class DriftSpec:
    """Affine drift ``b + sum_i x_i beta[i]``; ``beta[i]`` is the vector multiplying x_i."""

    b: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        b = np.array(self.b, dtype=float).reshape(-1)
        n = b.size
        beta = np.zeros((n, n)) if self.beta is None else np.array(self.beta, dtype=float).reshape(n, n)
        b.setflags(write=False)
        beta.setflags(write=False)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "beta", beta)

    @property
    def n(self) -> int:
        return self.b.size

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self.b + x @ self.beta


@dataclass(frozen=True, eq=False)
class DiffusionSpec:
    """Quadratic diffusion matrix ``a + sum_i x_i alpha_lin[i] + sum_{i<=j} x_i x_j alpha_quad[(i, j)]``."""

    a: np.ndarray
    alpha_lin: np.ndarray | None = None
    alpha_quad: Mapping[tuple[int, int], np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        a = np.array(self.a, dtype=float)
        a = a.reshape(1, 1) if a.ndim < 2 else a
        n = a.shape[0]
        lin = np.zeros((n, n, n)) if self.alpha_lin is None else np.array(self.alpha_lin, dtype=float).reshape(n, n, n)
        quad = {}
        for key, mat in dict(self.alpha_quad).items():
            i, j = sorted(int(v) for v in key)
            quad[(i, j)] = quad.get((i, j), 0.0) + np.array(mat, dtype=float).reshape(n, n)
        for arr in (a, lin, *quad.values()):
            arr.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "alpha_lin", lin)
        object.__setattr__(self, "alpha_quad", quad)

    @property
    def n(self) -> int:
        return self.a.shape[0]

    def __call__(self, x) -> np.ndarray:
        """a(x) for ``x`` of shape (n,) or (L, n); returns (n, n) or (L, n, n)."""
        x = np.asarray(x, dtype=float)
        out = self.a + np.tensordot(x, self.alpha_lin, axes=([-1], [0]))
        for (i, j), mat in self.alpha_quad.items():
            out = out + (x[..., i] * x[..., j])[..., None, None] * mat
        return out

    def matrices(self) -> Iterable[tuple[str, np.ndarray]]:
        yield "a", self.a
        for i in range(self.n):
            yield f"alpha_{i}0", self.alpha_lin[i]
        for (i, j), mat in self.alpha_quad.items():
            yield f"alpha_{i}{j}", mat


# ----------------------------------------------------------------------- jumps


@dataclass(frozen=True, eq=False)
class JumpMomentTable:
    """Monomial moments ``int xi^l mu(dxi)`` of a Levy measure for ``2 <= |l| <= max_degree``.

    A table built with ``fn`` computes entries on demand and covers every
    degree (``max_degree`` is then ``None``).
    """

    n: int
    max_degree: int | None
    moments: Mapping[MultiIndex, float]
    fn: Callable[[MultiIndex], float] | None = None

    def __post_init__(self):
        object.__setattr__(self, "moments", {as_multi_index(k): float(v) for k, v in dict(self.moments).items()})
        if self.max_degree is None and self.fn is None:
            raise ValueError("a table without a moment function needs a finite max_degree")

    @classmethod
    def from_function(
        cls, n: int, fn: Callable[[MultiIndex], float], max_degree: int | None = None
    ) -> "JumpMomentTable":
        """Table backed by ``fn``; with ``max_degree`` the entries are materialized eagerly."""
        if max_degree is None:
            return cls(n, None, {}, fn)
        basis = enumerate_basis(n, max_degree)
        return cls(n, max_degree, {l: fn(l) for l in basis if sum(l) >= 2})

    def covers(self, m: int) -> bool:
        return self.max_degree is None or self.max_degree >= m

    def __getitem__(self, l: MultiIndex) -> float:
        try:
            return self.moments[l]
        except KeyError:
            if self.fn is not None:
                v = float(self.fn(l))
                self.moments[l] = v
                return v
            raise MissingMomentError(f"jump moment for l={l} missing (table covers degree {self.max_degree})") from None

    def problems(self, required_degree: int | None = None) -> list[str]:
        if self.max_degree is None:
            top = required_degree if required_degree is not None else 0
        else:
            top = self.max_degree if required_degree is None else max(self.max_degree, required_degree)
        out = []
        if required_degree is not None and not self.covers(required_degree):
            out.append(f"table covers degree {self.max_degree} < required {required_degree}")
        for l in enumerate_basis(self.n, max(top, 0)):
            if sum(l) < 2:
                continue
            try:
                v = self[l]
            except MissingMomentError:
                if self.max_degree is not None and sum(l) <= self.max_degree:
                    out.append(f"missing moment for l={list(l)}")
                continue
            if not math.isfinite(v):
                out.append(f"non-finite moment for l={list(l)}")
            nz = [i for i, li in enumerate(l) if li]
            if len(nz) == 1 and l[nz[0]] % 2 == 0 and v < 0:
                out.append(f"even moment for l={list(l)} is negative ({v})")
        return out

    def materialize(self, m: int) -> "JumpMomentTable":
        return JumpMomentTable(self.n, m, {l: self[l] for l in enumerate_basis(self.n, m) if sum(l) >= 2})

    def to_json(self) -> dict:
        if self.max_degree is None:
            raise ValueError("materialize() a function-backed table before serializing it")
        return {json.dumps(list(k)): v for k, v in self.moments.items()}

    @classmethod
    def from_json(cls, doc: Mapping[str, float], n: int | None = None) -> "JumpMomentTable":
        moments = {tuple(json.loads(k)): float(v) for k, v in doc.items()}
        if n is None:
            n = len(next(iter(moments)))
        top = max((sum(k) for k in moments), default=1)
        return cls(n, top, moments)


@dataclass(frozen=True, eq=False)
class ConditionA:
    """Kernel ``mu_00 + sum_{i in I} x_i mu_i0 + sum_{(i,j) in J} x_i x_j mu_ij`` via moment tables."""

    base: JumpMomentTable | None = None
    linear: Mapping[int, JumpMomentTable] = field(default_factory=dict)
    quadratic: Mapping[tuple[int, int], JumpMomentTable] = field(default_factory=dict)

    def tables(self) -> Iterable[tuple[str, JumpMomentTable]]:
        if self.base is not None:
            yield "mu_00", self.base
        for i, t in self.linear.items():
            yield f"mu_{i}0", t
        for (i, j), t in self.quadratic.items():
            yield f"mu_{i}{j}", t


class JumpAction(Protocol):
    """Image of a monomial under the jump part of a Condition-B generator."""

    def __call__(self, k: MultiIndex, basis: Basis) -> PolyVector: ...


@dataclass(frozen=True, eq=False)
class ConditionB:
    """Push-forward kernel; the jump part is supplied as a monomial action."""

    action: JumpAction


@dataclass(frozen=True, eq=False)
class PushforwardAtoms:
    """Jump action of ``g(x, y) = H(y) x + h(y)`` under a finite atomic measure.

    ``atoms`` is a sequence of ``(weight, H, h)`` with ``H`` of shape (n, n).
    """

    atoms: tuple

    def __post_init__(self):
        atoms = []
        for w, H, h in self.atoms:
            h = np.array(h, dtype=float).reshape(-1)
            atoms.append((float(w), np.array(H, dtype=float).reshape(h.size, h.size), h))
        object.__setattr__(self, "atoms", tuple(atoms))

    def __call__(self, k: MultiIndex, basis: Basis) -> PolyVector:
        n = basis.n
        d = sum(k)
        local = enumerate_basis(n, max(d, 1))
        f = monomial(local, k)
        out = PolyVector(local, np.zeros(len(local)))
        for w, H, h in self.atoms:
            # coordinates of the jump g(x) and of the landing point x + g(x), as affine polynomials
            jump = [from_terms(local, {(0,) * n: h[i], **{unit(n, j): H[i, j] for j in range(n)}}) for i in range(n)]
            land = [jump[i] + monomial(local, unit(n, i)) for i in range(n)]
            shifted = monomial(local, (0,) * n)
            for i in range(n):
                for _ in range(k[i]):
                    shifted = multiply(shifted, land[i], local)
            drift = PolyVector(local, np.zeros(len(local)))
            for i in range(n):
                if k[i]:
                    km = k[:i] + (k[i] - 1,) + k[i + 1:]
                    drift = drift + multiply(jump[i], monomial(local, km, k[i]), local)
            out = out + w * (shifted - f - drift)
        return out.embed(basis)

    def first_moment(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return sum(w * (x @ H.T + h) for w, H, h in self.atoms)

    def to_json(self) -> dict:
        return {
            "type": "pushforward_atoms",
            "atoms": [{"weight": w, "H": H.tolist(), "h": h.tolist()} for w, H, h in self.atoms],
        }


@dataclass(frozen=True, eq=False)
class DiagonalJumpAction:
    """Jump action mapping ``x^k`` to ``rate(k) * x^k`` (multiplicative jumps).

    ``violations(m)`` reports moment conditions that fail up to degree ``m``.
    """

    rate: Callable[[MultiIndex], float]
    check: Callable[[int], list[str]] | None = None
    description: Mapping | None = None

    def __call__(self, k: MultiIndex, basis: Basis) -> PolyVector:
        return monomial(basis, k, self.rate(tuple(k)))

    def violations(self, m: int) -> list[str]:
        return list(self.check(m)) if self.check is not None else []


# ---------------------------------------------------------------- full spec


@dataclass(frozen=True, eq=False)
class GeneratorSpec:
    state: StateSpace
    drift: DriftSpec
    diffusion: DiffusionSpec
    jumps: ConditionA | ConditionB | None = None

    def __post_init__(self):
        n = self.state.n
        if self.drift.n != n or self.diffusion.n != n:
            raise ValueError(
                f"dimension mismatch: state n={n}, drift n={self.drift.n}, diffusion n={self.diffusion.n}"
            )
        if isinstance(self.jumps, ConditionA):
            for name, t in self.jumps.tables():
                if t.n != n:
                    raise ValueError(f"jump table {name} has dimension {t.n}, state has n={n}")

    @property
    def n(self) -> int:
        return self.state.n


def validate(spec: GeneratorSpec, m: int | None = None) -> list[str]:
    """Structural admissibility violations of ``spec`` (empty list when admissible).

    Checks symmetry of every diffusion matrix, positive semidefiniteness of
    a(x) on :func:`validation_grid`, the index sets of Condition A, and
    completeness of the jump moment tables (up to degree ``m`` when given).
    """
    out: list[str] = []
    state, dif = spec.state, spec.diffusion
    if not (np.all(np.isfinite(spec.drift.b)) and np.all(np.isfinite(spec.drift.beta))):
        out.append("drift has non-finite entries")
    for name, mat in dif.matrices():
        if not np.all(np.isfinite(mat)):
            out.append(f"diffusion matrix {name} has non-finite entries")
        elif not np.array_equal(mat, mat.T):
            out.append(f"diffusion matrix {name} is not symmetric")
    if not out:
        grid = validation_grid(state)
        ax = dif(grid)
        eig = np.linalg.eigvalsh(ax)
        scale = 1.0 + np.abs(ax).max(axis=(-2, -1))
        bad = np.flatnonzero(eig[:, 0] < -1e-12 * scale)
        for p in bad[:5]:
            out.append(f"a(x) not positive semidefinite at x={grid[p].tolist()} (min eigenvalue {eig[p, 0]:.6g})")
        if bad.size > 5:
            out.append(f"... a(x) fails at {bad.size} grid points in total")
    jumps = spec.jumps
    if isinstance(jumps, ConditionA):
        for i in jumps.linear:
            if not 0 <= i < spec.n:
                out.append(f"linear jump table index {i} out of range")
            elif not state.nonnegative(i):
                out.append(f"linear jump table attached to coordinate {i}, which is not in I (S_{i} not in R_+)")
        for i, j in jumps.quadratic:
            if not (0 <= i <= j < spec.n):
                out.append(f"quadratic jump table index ({i},{j}) invalid (need i <= j < n)")
            elif not (
                (state.nonnegative(i) and state.nonnegative(j)) or (state.nonpositive(i) and state.nonpositive(j))
            ):
                out.append(f"quadratic jump table ({i},{j}) not in J (S_i x S_j not in R_+^2 or R_-^2)")
        for name, t in jumps.tables():
            out.extend(f"jump table {name}: {p}" for p in t.problems(m))
    elif isinstance(jumps, ConditionB) and m is not None:
        check = getattr(jumps.action, "violations", None)
        if check is not None:
            out.extend(check(m))
    return out


# ------------------------------------------------------------- matrix build


@dataclass(frozen=True, eq=False)
class GeneratorMatrix:
    """Matrix of the generator on a monomial basis.

    Row convention: ``A e_i = sum_j entries[i, j] e_j``.  ``entries`` is a dense
    array for ``N <= SPARSE_THRESHOLD`` and a COO sparse array otherwise.
    """

    basis: Basis
    entries: np.ndarray | scipy.sparse.coo_array

    @property
    def is_sparse(self) -> bool:
        return scipy.sparse.issparse(self.entries)

    @property
    def nnz(self) -> int:
        return int(self.entries.nnz) if self.is_sparse else int(np.count_nonzero(self.entries))

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape

    def dense(self) -> np.ndarray:
        if self.is_sparse:
            return self.entries.toarray()
        return self.entries

    def image(self, k: Sequence[int]) -> PolyVector:
        """Generator applied to the monomial ``x^k``."""
        return PolyVector(self.basis, self.dense()[self.basis.index(k)])

    def is_lower_triangular(self) -> bool:
        return not np.any(np.triu(self.dense(), 1))

    def degree_violations(self) -> list[tuple[int, int]]:
        """Entries mapping a monomial to a higher degree (should be empty)."""
        deg = self.basis.degrees
        rows, cols = np.nonzero(self.dense())
        bad = deg[cols] > deg[rows]
        return list(zip(rows[bad].tolist(), cols[bad].tolist()))

    def to_csv(self, fh=None) -> str | None:
        """Row-major CSV with a header row of basis multi-indices."""
        buf = io.StringIO() if fh is None else fh
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([json.dumps(list(k)) for k in self.basis])
        for row in self.dense():
            w.writerow([f"{v:.17g}" for v in row])
        return buf.getvalue() if fh is None else None

    def to_json(self) -> dict:
        return {
            "n": self.basis.n,
            "max_degree": self.basis.m,
            "basis": [list(k) for k in self.basis],
            "matrix": self.dense().tolist(),
        }


class _RowAccumulator:
    def __init__(self, basis: Basis):
        self.basis = basis
        self.rows: list[int] = []
        self.cols: list[int] = []
        self.vals: list[float] = []

    def add(self, row: int, k: Sequence[int], value: float):
        if value != 0.0:
            self.rows.append(row)
            self.cols.append(self.basis.index(tuple(k)))
            self.vals.append(value)

    def add_poly(self, row: int, p: PolyVector):
        for j in np.flatnonzero(p.coeffs):
            self.rows.append(row)
            self.cols.append(self.basis.index(p.basis[j]))
            self.vals.append(float(p.coeffs[j]))

    def finish(self) -> np.ndarray | scipy.sparse.coo_array:
        N = len(self.basis)
        coo = scipy.sparse.coo_array((self.vals, (self.rows, self.cols)), shape=(N, N))
        coo.sum_duplicates()
        if N <= SPARSE_THRESHOLD:
            dense = coo.toarray()
            dense.setflags(write=False)
            return dense
        return coo


def _add(k: MultiIndex, *deltas: MultiIndex) -> MultiIndex:
    out = list(k)
    for d in deltas:
        for i, v in enumerate(d):
            out[i] += v
    return tuple(out)


def build_matrix(spec: GeneratorSpec, m: int) -> GeneratorMatrix:
    """Matrix of the generator restricted to polynomials of degree <= ``m``."""
    problems = validate(spec, m)
    if problems:
        raise SpecError(problems)
    n = spec.n
    basis = enumerate_basis(n, m)
    acc = _RowAccumulator(basis)
    b, beta = spec.drift.b, spec.drift.beta
    dif = spec.diffusion
    e = [unit(n, i) for i in range(n)]
    zero = (0,) * n
    # diffusion coefficient of d_p d_q as affine/quadratic polynomial terms: list of (delta, matrix)
    a_terms = [(zero, dif.a)] + [(e[i], dif.alpha_lin[i]) for i in range(n)]
    a_terms += [(_add(e[i], e[j]), mat) for (i, j), mat in dif.alpha_quad.items()]
    a_terms = [(d, mat) for d, mat in a_terms if np.any(mat)]
    jumps = spec.jumps

    for row, k in enumerate(basis):
        if sum(k) == 0:
            continue
        for l in range(n):
            if k[l] == 0:
                continue
            km = _add(k, tuple(-v for v in e[l]))
            acc.add(row, km, k[l] * b[l])
            for i in range(n):
                acc.add(row, _add(km, e[i]), k[l] * beta[i, l])
        for p in range(n):
            for q in range(n):
                if p == q:
                    if k[p] < 2:
                        continue
                    c = k[p] * (k[p] - 1)
                else:
                    if k[p] == 0 or k[q] == 0:
                        continue
                    c = k[p] * k[q]
                kpq = list(k)
                kpq[p] -= 1
                kpq[q] -= 1
                kpq = tuple(kpq)
                for delta, mat in a_terms:
                    acc.add(row, _add(kpq, delta), 0.5 * c * mat[p, q])
        if isinstance(jumps, ConditionA):
            for term in jump_taylor_terms(k):
                if jumps.base is not None:
                    acc.add(row, term.residual, term.coeff * jumps.base[term.l])
                for i, t in jumps.linear.items():
                    acc.add(row, _add(term.residual, e[i]), term.coeff * t[term.l])
                for (i, j), t in jumps.quadratic.items():
                    acc.add(row, _add(term.residual, e[i], e[j]), term.coeff * t[term.l])
        elif isinstance(jumps, ConditionB):
            image = jumps.action(k, basis)
            if image.degree > sum(k):
                raise ValueError(f"jump action raised the degree of x^{k} to {image.degree}")
            acc.add_poly(row, image)

    out = GeneratorMatrix(basis, acc.finish())
    bad = out.degree_violations()
    assert not bad, f"generator matrix does not preserve degree filtration at {bad[:5]}"
    return out


# ------------------------------------------------------- truncation change


def convert_truncation(spec: GeneratorSpec, correction: Sequence[PolyVector | None]) -> GeneratorSpec:
    """Restate a drift given under another truncation function in the chi(xi) = xi form.

    ``correction[i]`` is the polynomial ``x -> int (xi_i - chi~_i(xi)) K(x, dxi)``;
    it must be affine in ``x``.
    """
    n = spec.n
    if len(correction) != n:
        raise ValueError(f"need one correction polynomial per coordinate ({n}), got {len(correction)}")
    b = spec.drift.b.copy()
    beta = spec.drift.beta.copy()
    for coord, p in enumerate(correction):
        if p is None:
            continue
        if p.n != n:
            raise ValueError(f"correction for coordinate {coord} has n={p.n}, expected {n}")
        if p.degree > 1:
            raise ValueError(
                "drift correction must lie in Pol_{<=1}: b(chi~) + int (xi - chi~(xi)) K(x, dxi) "
                f"has degree {p.degree} in coordinate {coord}"
            )
        terms = p.terms()
        b[coord] += terms.get((0,) * n, 0.0)
        for i in range(n):
            beta[i, coord] += terms.get(unit(n, i), 0.0)
    return replace(spec, drift=DriftSpec(b, beta))


# ------------------------------------------------------------- JSON I/O


def spec_to_json(spec: GeneratorSpec) -> dict:
    doc = {
        "state": spec.state.to_json(),
        "drift": {"b": spec.drift.b.tolist(), "beta": spec.drift.beta.tolist()},
        "diffusion": {
            "a": spec.diffusion.a.tolist(),
            "alpha_lin": spec.diffusion.alpha_lin.tolist(),
            "alpha_quad": {f"{i},{j}": m.tolist() for (i, j), m in spec.diffusion.alpha_quad.items()},
        },
        "jumps": None,
    }
    j = spec.jumps
    if isinstance(j, ConditionA):
        doc["jumps"] = {
            "type": "condition_a",
            "base": j.base.to_json() if j.base is not None else None,
            "linear": {str(i): t.to_json() for i, t in j.linear.items()},
            "quadratic": {f"{i},{k}": t.to_json() for (i, k), t in j.quadratic.items()},
        }
    elif isinstance(j, ConditionB):
        to_json = getattr(j.action, "to_json", None)
        if to_json is None:
            raise ValueError("this Condition-B jump action has no JSON form; use a catalog model document")
        doc["jumps"] = to_json()
    return doc


def spec_from_json(doc: Mapping) -> GeneratorSpec:
    state = StateSpace.from_json(doc["state"])
    n = state.n
    dr = doc.get("drift", {})
    drift = DriftSpec(dr.get("b", [0.0] * n), dr.get("beta"))
    df = doc.get("diffusion", {})
    quad = {tuple(int(v) for v in key.split(",")): mat for key, mat in df.get("alpha_quad", {}).items()}
    diffusion = DiffusionSpec(df.get("a", np.zeros((n, n))), df.get("alpha_lin"), quad)
    jd = doc.get("jumps")
    jumps = None
    if jd:
        kind = jd.get("type", "condition_a")
        if kind == "condition_a":
            jumps = ConditionA(
                base=JumpMomentTable.from_json(jd["base"], n) if jd.get("base") else None,
                linear={int(i): JumpMomentTable.from_json(t, n) for i, t in jd.get("linear", {}).items()},
                quadratic={
                    tuple(int(v) for v in key.split(",")): JumpMomentTable.from_json(t, n)
                    for key, t in jd.get("quadratic", {}).items()
                },
            )
        elif kind == "pushforward_atoms":
            jumps = ConditionB(PushforwardAtoms(tuple((a["weight"], a["H"], a["h"]) for a in jd["atoms"])))
        else:
            raise ValueError(f"unknown jump specification type {kind!r}")
    return GeneratorSpec(state, drift, diffusion, jumps)

"""Jump-size distributions of the catalog models.

Each law exposes raw moments (for generator moment tables), its moment
generating function (for compensators and exponential-Levy rates) and a
quantile function (for simulation from uniforms).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.special import ndtri

__all__ = ["NormalJumps", "DoubleExponentialJumps", "ExponentialJumps", "ProductJumps", "law_from_json"]


@dataclass(frozen=True)
class NormalJumps:
    """Normal jump sizes (Merton)."""

    mean: float
    std: float

    def __post_init__(self):
        if not self.std >= 0:
            raise ValueError(f"jump standard deviation must be >= 0, got {self.std}")

    dim = 1

    def raw_moment(self, p: int) -> float:
        # E[Y^p] = mean E[Y^(p-1)] + (p-1) std^2 E[Y^(p-2)]
        m0, m1 = 1.0, self.mean
        if p == 0:
            return m0
        for q in range(2, p + 1):
            m0, m1 = m1, self.mean * m1 + (q - 1) * self.std**2 * m0
        return m1

    def mgf(self, u: float) -> float:
        return math.exp(u * self.mean + 0.5 * u * u * self.std**2)

    def exp_moment_problem(self, m: float) -> str | None:
        return None

    def quantile(self, u: np.ndarray) -> np.ndarray:
        return self.mean + self.std * ndtri(u)

    def to_json(self) -> dict:
        return {"law": "normal", "mean": self.mean, "std": self.std}


@dataclass(frozen=True)
class DoubleExponentialJumps:
    """Asymmetric double exponential jump sizes (Kou).

    Upward jumps with probability ``p`` and rate ``eta_up``, downward jumps with
    rate ``eta_down``.
    """

    p: float
    eta_up: float
    eta_down: float

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"upward jump probability must lie in [0, 1], got {self.p}")
        if not (self.eta_up > 0 and self.eta_down > 0):
            raise ValueError("Kou tail rates must be positive")

    dim = 1

    def raw_moment(self, q: int) -> float:
        f = math.factorial(q)
        return self.p * f / self.eta_up**q + (1 - self.p) * (-1) ** q * f / self.eta_down**q

    def mgf(self, u: float) -> float:
        problem = self.exp_moment_problem(u)
        if problem:
            raise ValueError(problem)
        return self.p * self.eta_up / (self.eta_up - u) + (1 - self.p) * self.eta_down / (self.eta_down + u)

    def exp_moment_problem(self, m: float) -> str | None:
        if m >= self.eta_up and self.p > 0:
            return (
                f"exponential moment condition int_{{|y|>1}} e^(m y) mu(dy) < inf fails for m={m}: "
                f"Kou upward tail rate eta_up={self.eta_up} must exceed m"
            )
        if -m >= self.eta_down and self.p < 1:
            return (
                f"exponential moment condition fails for m={m}: "
                f"Kou downward tail rate eta_down={self.eta_down} must exceed {-m}"
            )
        return None

    def quantile(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        q = 1.0 - self.p
        with np.errstate(divide="ignore", invalid="ignore"):
            down = np.log(u / q) / self.eta_down
            up = -np.log((1.0 - u) / self.p) / self.eta_up
        return np.where(u <= q, down, up)

    def to_json(self) -> dict:
        return {"law": "kou", "p": self.p, "eta_up": self.eta_up, "eta_down": self.eta_down}


@dataclass(frozen=True)
class ExponentialJumps:
    """Nonnegative exponential jump sizes; ``mean == 0`` means no displacement."""

    mean: float

    def __post_init__(self):
        if not self.mean >= 0:
            raise ValueError(f"exponential jump mean must be >= 0, got {self.mean}")

    dim = 1

    def raw_moment(self, p: int) -> float:
        return math.factorial(p) * self.mean**p

    def mgf(self, u: float) -> float:
        problem = self.exp_moment_problem(u)
        if problem:
            raise ValueError(problem)
        return 1.0 / (1.0 - self.mean * u)

    def exp_moment_problem(self, m: float) -> str | None:
        if self.mean > 0 and m * self.mean >= 1.0:
            return f"exponential moment condition fails for m={m}: need m < 1/mean = {1 / self.mean}"
        return None

    def quantile(self, u: np.ndarray) -> np.ndarray:
        return -self.mean * np.log1p(-np.asarray(u, dtype=float))

    def to_json(self) -> dict:
        return {"law": "exponential", "mean": self.mean}


@dataclass(frozen=True)
class ProductJumps:
    """Jump vector with independent components."""

    components: tuple

    @property
    def dim(self) -> int:
        return len(self.components)

    def moment(self, l: Sequence[int]) -> float:
        return math.prod(c.raw_moment(li) for c, li in zip(self.components, l))

    def quantile(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        return np.stack([c.quantile(u[..., i]) for i, c in enumerate(self.components)], axis=-1)

    def to_json(self) -> dict:
        return {"law": "product", "components": [c.to_json() for c in self.components]}


def law_from_json(doc) -> NormalJumps | DoubleExponentialJumps | ExponentialJumps | ProductJumps:
    if isinstance(doc, (NormalJumps, DoubleExponentialJumps, ExponentialJumps, ProductJumps)):
        return doc
    if not isinstance(doc, Mapping):
        raise ValueError(f"jump law must be a mapping with a 'law' key, got {doc!r}")
    kind = doc.get("law", "normal")
    args = {k: v for k, v in doc.items() if k != "law"}
    if kind in ("normal", "merton"):
        return NormalJumps(float(args.get("mean", 0.0)), float(args.get("std", 0.0)))
    if kind == "kou":
        return DoubleExponentialJumps(float(args["p"]), float(args["eta_up"]), float(args["eta_down"]))
    if kind == "exponential":
        return ExponentialJumps(float(args.get("mean", 0.0)))
    if kind == "product":
        return ProductJumps(tuple(law_from_json(c) for c in args["components"]))
    raise ValueError(f"unknown jump law {kind!r} (expected normal, kou, exponential or product)")

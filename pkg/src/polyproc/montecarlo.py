"""Euler-Maruyama simulation of the catalog models and Monte Carlo estimators.

Random numbers are counter based: the uniform used by path ``i`` for draw
number ``c`` is a pure function of ``(seed, i, c)`` (SplitMix64 finalizer over
a per-path key).  Paths can therefore be generated in any grouping, by any
number of workers, with bit-identical results.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import ndtri

from .expm import apply_semigroup
from .generator import GeneratorMatrix, build_matrix
from .polybasis import PolyVector, evaluate

__all__ = [
    "JumpSource",
    "SimulationSpec",
    "MCConfig",
    "Estimate",
    "SimulationResult",
    "MartingalePoint",
    "PathStreams",
    "splitmix64",
    "simulate",
    "simulate_terminal",
    "simulate_series",
    "estimate_plain",
    "estimate_cv",
    "martingale_check",
]

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30, _S27, _S31, _S11 = (np.uint64(v) for v in (30, 27, 31, 11))

# counter layout within one time step
_STRIDE = 1 << 20
_POISSON_SLOT = 1024
_JUMP_SLOT = 2048
_MAX_JUMPS_PER_STEP = 4096
_MAX_JUMP_DIM = 8

CHUNK = 1 << 15


def _mix64(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


def splitmix64(seed: int, count: int) -> list[int]:
    """First ``count`` outputs of the SplitMix64 generator started at ``seed``."""
    state = np.array([(seed + (j + 1) * _GAMMA) & _MASK for j in range(count)], dtype=np.uint64)
    return [int(v) for v in _mix64(state)]


class PathStreams:
    """Independent uniform streams for a set of path indices under one seed."""

    def __init__(self, seed: int, paths: np.ndarray):
        key = int(_mix64(np.array([(int(seed) + _GAMMA) & _MASK], dtype=np.uint64))[0])
        idx = np.asarray(paths, dtype=np.uint64)
        self._base = _mix64(np.uint64(key) + (idx + np.uint64(1)) * np.uint64(_GAMMA))

    def uniforms(self, counter: int, idx: np.ndarray | None = None) -> np.ndarray:
        base = self._base if idx is None else self._base[idx]
        z = _mix64(base + np.uint64(((counter + 1) * _GAMMA) & _MASK))
        return ((z >> _S11).astype(np.float64) + 0.5) * (1.0 / 9007199254740992.0)

    def normals(self, counter: int, idx: np.ndarray | None = None) -> np.ndarray:
        return ndtri(self.uniforms(counter, idx))


@dataclass(frozen=True)
class JumpSource:
    """Compound Poisson jumps: ``intensity(x)`` per unit time, ``increment(x, u)`` per jump.

    ``u`` holds ``dim`` independent uniforms per path.
    """

    intensity: Callable[[np.ndarray], np.ndarray]
    increment: Callable[[np.ndarray, np.ndarray], np.ndarray]
    dim: int = 1


@dataclass(frozen=True)
class SimulationSpec:
    """Simulation face of a model.

    ``drift`` is the drift of the dynamics with uncompensated jumps, i.e. the
    generator drift minus ``int xi K(x, dxi)``.  ``diffusion(x)`` returns a
    factor of shape (L, n, noise_dim) with ``sigma sigma^T = a(x)``.
    ``coef_guard`` maps the state to the point where coefficients are
    evaluated (full truncation); ``post_step`` projects after each step.
    """

    n: int
    drift: Callable[[np.ndarray], np.ndarray]
    diffusion: Callable[[np.ndarray], np.ndarray]
    noise_dim: int
    jumps: tuple[JumpSource, ...] = ()
    coef_guard: Callable[[np.ndarray], np.ndarray] | None = None
    post_step: Callable[[np.ndarray], np.ndarray] | None = None


@dataclass(frozen=True)
class MCConfig:
    paths: int
    steps: int = 400
    seed: int = 0
    workers: int = 1
    first_path: int = 0

    def __post_init__(self):
        if self.paths < 1:
            raise ValueError("need at least one path")
        if self.steps < 1:
            raise ValueError("need at least one step per unit time")
        if self.workers < 1:
            raise ValueError("need at least one worker")


@dataclass(frozen=True)
class Estimate:
    mean: float
    stderr: float
    variance: float
    paths: int
    seed: int
    variance_ratio: float | None = None
    plain: "Estimate | None" = None

    def to_json(self) -> dict:
        out = {k: getattr(self, k) for k in ("mean", "stderr", "variance", "paths", "seed", "variance_ratio")}
        if self.plain is not None:
            out["plain"] = self.plain.to_json()
        return out


@dataclass
class SimulationResult:
    times: np.ndarray
    states: np.ndarray  # (len(times), L, n)
    clamp_events: int = 0

    @property
    def terminal(self) -> np.ndarray:
        return self.states[-1]

    def at(self, t: float) -> np.ndarray:
        i = int(np.argmin(np.abs(self.times - t)))
        if not math.isclose(self.times[i], t, rel_tol=1e-9, abs_tol=1e-12):
            raise KeyError(f"time {t} was not recorded")
        return self.states[i]


def _poisson(rate: np.ndarray, u: np.ndarray) -> np.ndarray:
    # inversion of the Poisson CDF, vectorised over paths
    counts = np.zeros(rate.shape, dtype=np.int64)
    p = np.exp(-rate)
    cdf = p.copy()
    active = u > cdf
    k = 0
    cap = int(np.max(rate + 20.0 * np.sqrt(rate) + 50.0)) if rate.size else 0
    while active.any() and k < cap:
        k += 1
        p = p * rate / k
        cdf = cdf + p
        counts[active] += 1
        active &= u > cdf
    return counts


def _run_block(sim: SimulationSpec, x0: np.ndarray, dt: float, n_steps: int, paths: np.ndarray, seed: int,
               record: np.ndarray) -> tuple[np.ndarray, int]:
    L = paths.size
    rng = PathStreams(seed, paths)
    x = np.tile(x0, (L, 1))
    out = np.empty((record.size, L, sim.n))
    slot = 0
    if slot < record.size and record[slot] == 0:
        out[slot] = x
        slot += 1
    sq = math.sqrt(dt)
    clamps = 0
    for step in range(n_steps):
        base = step * _STRIDE
        if sim.coef_guard is not None:
            xc = sim.coef_guard(x)
            clamps += int(np.count_nonzero(np.any(xc != x, axis=1)))
        else:
            xc = x
        z = np.stack([rng.normals(base + q) for q in range(sim.noise_dim)], axis=1)
        x = x + sim.drift(xc) * dt + np.einsum("lij,lj->li", sim.diffusion(xc), z) * sq
        for s, src in enumerate(sim.jumps):
            counts = _poisson(src.intensity(xc) * dt, rng.uniforms(base + _POISSON_SLOT + s))
            for j in range(int(counts.max(initial=0))):
                if j >= _MAX_JUMPS_PER_STEP:
                    raise RuntimeError("too many jumps in one time step; increase the step count")
                idx = np.flatnonzero(counts > j)
                first = base + _JUMP_SLOT + (s * _MAX_JUMPS_PER_STEP + j) * _MAX_JUMP_DIM
                u = np.stack([rng.uniforms(first + q, idx) for q in range(src.dim)], axis=1)
                x[idx] = x[idx] + src.increment(x[idx], u)
        if sim.post_step is not None:
            xp = sim.post_step(x)
            clamps += int(np.count_nonzero(np.any(xp != x, axis=1)))
            x = xp
        while slot < record.size and record[slot] == step + 1:
            out[slot] = x
            slot += 1
    return out, clamps


def simulate(sim: SimulationSpec, x0, T: float, cfg: MCConfig, record: Sequence[float] = ()) -> SimulationResult:
    """Simulate ``cfg.paths`` paths on [0, T] and keep the states at ``record`` times and at T.

    The step is ``T / round(T * cfg.steps)``; recorded times must fall on the grid.
    """
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if x0.size != sim.n:
        raise ValueError(f"start point has dimension {x0.size}, model has n={sim.n}")
    if not T > 0:
        raise ValueError("horizon must be positive")
    n_steps = max(1, round(T * cfg.steps))
    dt = T / n_steps
    steps = set()
    for t in list(record) + [T]:
        k = round(t / dt)
        if not (0 <= k <= n_steps) or abs(k * dt - t) > 1e-9 * max(1.0, T):
            raise ValueError(f"record time {t} is not on the simulation grid (dt={dt})")
        steps.add(k)
    rec = np.array(sorted(steps), dtype=np.int64)
    return _simulate_steps(sim, x0, dt, n_steps, rec, cfg)


def _simulate_steps(sim, x0, dt, n_steps, rec, cfg) -> SimulationResult:
    starts = range(cfg.first_path, cfg.first_path + cfg.paths, CHUNK)
    blocks = [np.arange(s, min(s + CHUNK, cfg.first_path + cfg.paths), dtype=np.int64) for s in starts]

    def work(paths):
        return _run_block(sim, x0, dt, n_steps, paths, cfg.seed, rec)

    if cfg.workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(work, blocks))
    else:
        results = [work(b) for b in blocks]
    states = np.concatenate([r[0] for r in results], axis=1)
    return SimulationResult(rec * dt, states, sum(r[1] for r in results))


def simulate_terminal(sim: SimulationSpec, x0, T: float, cfg: MCConfig) -> np.ndarray:
    """Terminal states, shape (cfg.paths, n)."""
    return simulate(sim, x0, T, cfg).terminal


def simulate_series(sim: SimulationSpec, x0, dt: float, n_obs: int, cfg: MCConfig,
                    burn_in: float = 0.0) -> np.ndarray:
    """``cfg.paths`` independent chains observed ``n_obs`` times at spacing ``dt``.

    Returns an array of shape (paths, n_obs, n); the first observation is taken
    after ``burn_in`` time units.
    """
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    per_obs = max(1, round(dt * cfg.steps))
    h = dt / per_obs
    burn = round(burn_in / dt) * per_obs
    rec = burn + per_obs * np.arange(n_obs, dtype=np.int64)
    res = _simulate_steps(sim, x0, h, int(rec[-1]), rec, cfg)
    return np.transpose(res.states, (1, 0, 2))


# ------------------------------------------------------------------ estimators


def _prices(market, terminals: np.ndarray) -> np.ndarray:
    return terminals if market is None else market.to_price(terminals)


def _summary(values: np.ndarray, cfg: MCConfig) -> tuple[float, float, float]:
    L = values.size
    mean = float(np.mean(values))
    var = float(np.var(values, ddof=1)) if L > 1 else 0.0
    return mean, math.sqrt(var / L), var


def estimate_plain(payoff: Callable[[np.ndarray], np.ndarray], market, terminals: np.ndarray,
                   cfg: MCConfig) -> Estimate:
    """Sample mean of ``payoff(G(X_T))`` over the simulated terminal states."""
    terminals = np.asarray(terminals, dtype=float)
    if terminals.shape[0] == 0:
        raise ValueError("no terminal samples")
    values = np.asarray(payoff(_prices(market, terminals)), dtype=float)
    mean, se, var = _summary(values, cfg)
    return Estimate(mean, se, var, values.size, cfg.seed)


def estimate_cv(payoff: Callable[[np.ndarray], np.ndarray], market, f: PolyVector, exact_mean: float,
                terminals: np.ndarray, cfg: MCConfig) -> Estimate:
    """Control-variate estimator ``mean(payoff - (f(X_T) - E f(X_T)))`` on the same samples."""
    terminals = np.asarray(terminals, dtype=float)
    values = np.asarray(payoff(_prices(market, terminals)), dtype=float)
    plain = Estimate(*_summary(values, cfg), values.size, cfg.seed)
    adjusted = values - (evaluate(f, terminals) - exact_mean)
    mean, se, var = _summary(adjusted, cfg)
    if var > 0:
        ratio = plain.variance / var
    else:
        ratio = math.inf if plain.variance > 0 else 1.0
    return Estimate(mean, se, var, values.size, cfg.seed, ratio, plain)


@dataclass(frozen=True)
class MartingalePoint:
    time: float
    mean: float
    stderr: float
    target: float
    z: float


def martingale_check(model, f: PolyVector, T: float, x0, checkpoints: Sequence[float], cfg: MCConfig,
                     matrix: GeneratorMatrix | None = None) -> list[MartingalePoint]:
    """z-scores of the sample mean of ``Q(T - s, X_s)`` against ``Q(T, x0)``.

    ``Q(u, .) = P_u f``; ``model`` provides ``spec`` and ``sim``.
    """
    A = matrix if matrix is not None else build_matrix(model.spec, f.basis.m)
    f = f.embed(A.basis)
    checkpoints = [float(s) for s in checkpoints]
    if any(s < 0 or s > T for s in checkpoints):
        raise ValueError("checkpoints must lie in [0, T]")
    target = evaluate(apply_semigroup(A, T, f), np.asarray(x0, dtype=float))
    res = simulate(model.sim, x0, T, cfg, record=[s for s in checkpoints if s > 0])
    out = []
    for s in checkpoints:
        q = apply_semigroup(A, T - s, f)
        xs = res.at(s) if s > 0 else np.tile(np.asarray(x0, dtype=float), (cfg.paths, 1))
        mean, se, _ = _summary(evaluate(q, xs), cfg)
        diff = mean - target
        # below round-off the sample is deterministic; compare against the round-off scale instead
        noise = 1e-12 * (1 + abs(target))
        if se > noise:
            z = diff / se
        else:
            z = 0.0 if abs(diff) <= noise else math.copysign(math.inf, diff)
        out.append(MartingalePoint(s, mean, se, target, z))
    return out

"""Seeded generators of jump-diffusion-plus-rough-noise sample paths with
full component metadata, and coupled sequences for stability experiments.

Every draw comes from a counter-based stream keyed by (seed, component), so
identical ``(model, seed, grid_level)`` gives bit-identical paths, coupled
pairs share their base randomness exactly, and adding a perturbation stream
never disturbs the base components.

Jump times are drawn in continuous time and kept exact in the jump list;
the grid only carries the continuous component.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import rng as _rng
from .errors import ConfigError, ResourceLimitError
from .laws import JumpLaw
from .paths import CadlagPath, JumpEvent, PathDecomposition

__all__ = [
    "BrownianComponent",
    "DriftComponent",
    "CompoundPoissonComponent",
    "FixedScheduleComponent",
    "FbmComponent",
    "ProcessModel",
    "PathSample",
    "CoupledSequence",
    "sample_path",
    "sample_coupled",
    "fixed_jump_variation",
    "fractional_gaussian_noise",
]

MAX_GRID_LEVEL = 20  # 2**20 grid cells per path


@dataclass(frozen=True)
class BrownianComponent:
    sigma: float = 1.0


@dataclass(frozen=True)
class DriftComponent:
    """Finite-variation drift: a constant rate, or a callable giving the
    cumulative drift as a function of time."""

    rate: float | Callable = 0.0

    def cumulative(self, times: np.ndarray) -> np.ndarray:
        if callable(self.rate):
            return np.asarray([float(self.rate(t)) for t in times])
        return self.rate * times


@dataclass(frozen=True)
class CompoundPoissonComponent:
    intensity: float
    law: JumpLaw


@dataclass(frozen=True)
class FixedScheduleComponent:
    """Deterministic jump times with per-time size laws (the fixed-time set)."""

    schedule: tuple[tuple[float, JumpLaw], ...]


@dataclass(frozen=True)
class FbmComponent:
    hurst: float = 0.75
    scale: float = 1.0

    def __post_init__(self):
        if not 0.5 < self.hurst < 1.0:
            raise ConfigError("hurst index must lie in (0.5, 1)")


@dataclass(frozen=True)
class ProcessModel:
    horizon: float = 1.0
    x0: float = 0.0
    brownian: BrownianComponent | None = None
    drift: DriftComponent | None = None
    compound_poisson: CompoundPoissonComponent | None = None
    fixed_schedule: FixedScheduleComponent | None = None
    fbm: FbmComponent | None = None


@dataclass(frozen=True)
class PathSample:
    """A sampled path with its decomposition and generating metadata.

    Unpacks like ``(path, decomposition)`` for convenience.
    """

    path: CadlagPath
    decomposition: PathDecomposition
    model: ProcessModel | None
    seed: int
    grid_level: int

    def __iter__(self):
        return iter((self.path, self.decomposition))


# -- fractional Gaussian noise ------------------------------------------------


def _fgn_covariances(n: int, hurst: float, dt: float) -> np.ndarray:
    j = np.arange(n + 1, dtype=float)
    h2 = 2.0 * hurst
    return 0.5 * dt**h2 * ((j + 1.0) ** h2 - 2.0 * j**h2 + np.abs(j - 1.0) ** h2)


def fractional_gaussian_noise(
    n: int, hurst: float, dt: float, rng: np.random.Generator
) -> np.ndarray:
    """Exact-in-law fGn increments via circulant embedding, with a Cholesky
    fallback for short grids if the embedding is not nonnegative."""
    if n == 1:
        return rng.normal(0.0, dt**hurst, 1)
    gamma = _fgn_covariances(n, hurst, dt)
    row = np.concatenate((gamma[: n + 1], gamma[n - 1 : 0 : -1]))
    lam = np.fft.fft(row).real
    if lam.min() < -1e-8 * lam.max():
        if n > (1 << 12):
            raise ResourceLimitError("circulant embedding failed on a long grid")
        cov = np.empty((n, n))
        for i in range(n):
            cov[i] = gamma[np.abs(np.arange(n) - i)]
        chol = np.linalg.cholesky(cov + 1e-14 * np.eye(n))
        return chol @ rng.standard_normal(n)
    lam = np.clip(lam, 0.0, None)
    m = row.size
    z = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    f = np.fft.fft(np.sqrt(lam) * z) / np.sqrt(m)
    return f.real[:n]


# -- path generation -----------------------------------------------------------


def _grid(model: ProcessModel, grid_level: int) -> np.ndarray:
    if grid_level < 0 or grid_level > MAX_GRID_LEVEL:
        raise ResourceLimitError(f"grid level must lie in [0, {MAX_GRID_LEVEL}]")
    n = 1 << grid_level
    pts = model.horizon * (np.arange(n + 1, dtype=float) / n)
    pts[-1] = model.horizon
    return pts


def _sample_jumps(model: ProcessModel, seed: int, namespace: str = "") -> tuple[JumpEvent, ...]:
    events: list[JumpEvent] = []
    cp = model.compound_poisson
    if cp is not None:
        gen = _rng.stream(seed, namespace + "compound_poisson")
        count = int(gen.poisson(cp.intensity * model.horizon))
        if count:
            times = np.sort(gen.uniform(0.0, model.horizon, count))
            times = times[times > 0.0]
            sizes = cp.law.sample(gen, times.size)
            for t, s in zip(times, sizes):
                if s != 0.0:
                    events.append(JumpEvent(float(t), float(s), fixed_time=False))
    if model.fixed_schedule is not None:
        gen = _rng.stream(seed, namespace + "fixed_schedule")
        for t, law in model.fixed_schedule.schedule:
            size = float(law.sample(gen, 1)[0])
            if size != 0.0:
                events.append(JumpEvent(float(t), size, fixed_time=True))
    events.sort(key=lambda e: e.time)
    merged: list[JumpEvent] = []
    for e in events:
        if merged and merged[-1].time == e.time:
            prev = merged.pop()
            total = prev.size + e.size
            if total != 0.0:
                merged.append(JumpEvent(e.time, total, prev.fixed_time or e.fixed_time))
        else:
            merged.append(e)
    return tuple(merged)


def sample_path(
    model: ProcessModel, seed: int, grid_level: int, namespace: str = ""
) -> PathSample:
    """Deterministic function of ``(model, seed, grid_level)``.

    Returns the total path together with its decomposition; the parts are
    built on a common grid so they sum to the total exactly at every grid
    point.  ``namespace`` prefixes the component stream keys so auxiliary
    draws (an integrand path, say) never share randomness with a base path
    under the same seed.
    """
    times = _grid(model, grid_level)
    zeros = np.zeros_like(times)

    mart_vals = zeros
    if model.brownian is not None:
        gen = _rng.stream(seed, namespace + "brownian")
        dw = gen.normal(0.0, model.brownian.sigma * np.sqrt(np.diff(times)))
        mart_vals = np.concatenate(([0.0], np.cumsum(dw)))

    fv_vals = np.full_like(times, model.x0)
    if model.drift is not None:
        fv_vals = fv_vals + model.drift.cumulative(times)
    jumps = _sample_jumps(model, seed, namespace)

    zq_vals = zeros
    if model.fbm is not None:
        gen = _rng.stream(seed, namespace + "fbm")
        inc = fractional_gaussian_noise(
            times.size - 1, model.fbm.hurst, float(times[1] - times[0]), gen
        )
        zq_vals = model.fbm.scale * np.concatenate(([0.0], np.cumsum(inc)))

    mart = CadlagPath(model.horizon, times, mart_vals)
    fv = CadlagPath(model.horizon, times, fv_vals, jumps)
    zero_qv = CadlagPath(model.horizon, times, zq_vals)
    total = CadlagPath(model.horizon, times, mart_vals + fv_vals + zq_vals, jumps)
    decomp = PathDecomposition(total=total, mart=mart, fv=fv, zero_qv=zero_qv)
    return PathSample(total, decomp, model, seed, grid_level)


# -- coupled sequences ---------------------------------------------------------


_RULES = ("identity", "scale_jumps", "add_noise", "add_fbm", "mollify_jumps")


@dataclass(frozen=True)
class CoupledSequence:
    """Family ``X^n -> X`` built with common random numbers.

    The base path is sampled once per ``(seed, grid_level)``; the rule
    perturbs a copy of it, drawing any extra randomness from its own
    stream, so pathwise statistics of ``X^n - X`` are well defined and
    ``n = inf`` reproduces the base path exactly.
    """

    base: ProcessModel
    rule: str = "identity"
    scale: float = 1.0
    hurst: float = 0.75

    def __post_init__(self):
        if self.rule not in _RULES:
            raise ConfigError(f"unknown coupling rule {self.rule!r}")


def _mollify(path: CadlagPath, width: float) -> CadlagPath:
    """Replace each jump by a linear ramp ending at the jump time."""
    if not path.jumps:
        return path
    breakpoints = [path.grid]
    for j in path.jumps:
        breakpoints.append(np.asarray([max(j.time - width, 0.0), j.time]))
    grid = np.union1d(np.concatenate(breakpoints), path.grid)
    cont = np.interp(grid, path.grid, path.cont_values)
    ramp = np.zeros_like(grid)
    for j in path.jumps:
        lo = max(j.time - width, 0.0)
        ramp += j.size * np.clip((grid - lo) / (j.time - lo), 0.0, 1.0)
    return CadlagPath(path.horizon, grid, cont + ramp)


def sample_coupled(
    seq: CoupledSequence, n: float, seed: int, grid_level: int
) -> tuple[PathSample, PathSample]:
    """Return ``(X^n, X)`` from shared randomness; the rule touches only
    the first path."""
    base = sample_path(seq.base, seed, grid_level)
    if n == math.inf or seq.rule == "identity":
        return base, base
    if n <= 0:
        raise ConfigError("sequence index must be positive")
    d = base.decomposition
    if seq.rule == "scale_jumps":
        factor = 1.0 - 1.0 / n
        fv = d.fv.scale_jumps(factor)
        total = d.total.scale_jumps(factor)
        perturbed = PathDecomposition(total=total, mart=d.mart, fv=fv, zero_qv=d.zero_qv)
    elif seq.rule == "add_noise":
        gen = _rng.stream(seed, "coupling_noise")
        times = base.path.grid
        dw = gen.normal(0.0, np.sqrt(np.diff(times)))
        w = (seq.scale / n) * np.concatenate(([0.0], np.cumsum(dw)))
        noise = CadlagPath(seq.base.horizon, times, w)
        perturbed = PathDecomposition(
            total=base.path + noise, mart=d.mart + noise, fv=d.fv, zero_qv=d.zero_qv
        )
    elif seq.rule == "add_fbm":
        gen = _rng.stream(seed, "coupling_fbm")
        times = base.path.grid
        inc = fractional_gaussian_noise(times.size - 1, seq.hurst, float(times[1] - times[0]), gen)
        g = (seq.scale / n) * np.concatenate(([0.0], np.cumsum(inc)))
        extra = CadlagPath(seq.base.horizon, times, g)
        perturbed = PathDecomposition(
            total=base.path + extra, mart=d.mart, fv=d.fv, zero_qv=d.zero_qv + extra
        )
    else:  # mollify_jumps
        width = seq.scale / n
        total = _mollify(base.path, width)
        fv = _mollify(d.fv, width)
        perturbed = PathDecomposition(total=total, mart=d.mart, fv=fv, zero_qv=d.zero_qv)
    xn = PathSample(perturbed.total, perturbed, None, seed, grid_level)
    return xn, base


def fixed_jump_variation(path: CadlagPath) -> float:
    """Total variation of the fixed-time jumps: ``sum |dX_s|`` over the
    jumps flagged as belonging to the deterministic schedule."""
    return float(sum(abs(j.size) for j in path.jumps if j.fixed_time))

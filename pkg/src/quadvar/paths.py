"""Cadlag sample paths on ``[0, t]``: piecewise-linear continuous component
plus an exact, time-ordered jump list.

The continuous component is sampled on an explicit grid and linearly
interpolated between grid times; jumps are never discretised onto the grid.
The path value is ``X_s = interp(cont, s) + sum(size for jumps at time <= s)``,
which is right-continuous with left limits by construction.  Paths are
immutable after construction and safe to share across workers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "JumpEvent",
    "CadlagPath",
    "PathDecomposition",
    "zero_path",
    "constant_path",
    "continuous_path",
    "pure_jump_path",
    "piecewise_constant_path",
]


@dataclass(frozen=True)
class JumpEvent:
    """One jump: time in ``(0, horizon]``, nonzero size, fixed-time marker.

    ``fixed_time`` is a model property (deterministic jump schedules), set by
    generators rather than inferred from the sample.
    """

    time: float
    size: float
    fixed_time: bool = False


@dataclass(frozen=True, eq=False)
class CadlagPath:
    horizon: float
    grid: np.ndarray
    cont_values: np.ndarray
    jumps: tuple[JumpEvent, ...] = ()
    # populated in __post_init__, kept as arrays for vectorised evaluation
    _jump_times: np.ndarray = field(init=False, repr=False)
    _jump_sizes: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        grid = np.ascontiguousarray(np.asarray(self.grid, dtype=float))
        cont = np.ascontiguousarray(np.asarray(self.cont_values, dtype=float))
        if grid.ndim != 1 or cont.shape != grid.shape:
            raise ValueError("grid and cont_values must be 1-d arrays of equal length")
        if grid.size < 2 or grid[0] != 0.0 or grid[-1] != self.horizon:
            raise ValueError("grid must run from 0 to horizon")
        if self.horizon <= 0.0:
            raise ValueError("horizon must be positive")
        if np.any(np.diff(grid) <= 0.0):
            raise ValueError("grid times must be strictly increasing")
        jumps = tuple(self.jumps)
        jt = np.array([j.time for j in jumps], dtype=float)
        js = np.array([j.size for j in jumps], dtype=float)
        if jt.size:
            if np.any(jt <= 0.0) or np.any(jt > self.horizon):
                raise ValueError("jump times must lie in (0, horizon]")
            if np.any(np.diff(jt) <= 0.0):
                raise ValueError("jump times must be strictly increasing")
            if np.any(js == 0.0):
                raise ValueError("jump sizes must be nonzero")
        grid.flags.writeable = False
        cont.flags.writeable = False
        jt.flags.writeable = False
        js.flags.writeable = False
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "cont_values", cont)
        object.__setattr__(self, "jumps", jumps)
        object.__setattr__(self, "_jump_times", jt)
        object.__setattr__(self, "_jump_sizes", js)

    # -- evaluation ---------------------------------------------------------

    def _check_domain(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        if np.any(s < 0.0) or np.any(s > self.horizon):
            raise ValueError(f"time outside [0, {self.horizon}]")
        return s

    def _cont_at(self, s: np.ndarray) -> np.ndarray:
        return np.interp(s, self.grid, self.cont_values)

    def _jump_sum(self, s: np.ndarray, side: str) -> np.ndarray:
        if not self._jump_times.size:
            return np.zeros_like(s)
        prefix = np.concatenate(([0.0], np.cumsum(self._jump_sizes)))
        idx = np.searchsorted(self._jump_times, s, side=side)
        return prefix[idx]

    def values(self, s) -> np.ndarray:
        """Path values ``X_s`` at an array of times (vectorised)."""
        s = self._check_domain(s)
        return self._cont_at(s) + self._jump_sum(s, side="right")

    def value(self, s: float) -> float:
        """Path value ``X_s``."""
        return float(self.values(np.asarray([s]))[0])

    def left_limits(self, s) -> np.ndarray:
        """Left limits ``X_{s-}``; at ``s = 0`` this returns ``X_0``.

        Computed as ``X_s - dX_s`` so that value, left limit and jump size
        are consistent to the last bit at every jump time.
        """
        s = self._check_domain(s)
        vals = self._cont_at(s) + self._jump_sum(s, side="right")
        if not self._jump_times.size:
            return vals
        idx = np.searchsorted(self._jump_times, s)
        idx_c = np.minimum(idx, self._jump_times.size - 1)
        hit = self._jump_times[idx_c] == s
        return vals - np.where(hit, self._jump_sizes[idx_c], 0.0)

    def left_limit(self, s: float) -> float:
        if s <= 0.0:
            raise ValueError("left limit requires s > 0")
        return float(self.left_limits(np.asarray([s]))[0])

    def jump_at(self, s: float) -> float:
        """Jump size at time s (0.0 if the path does not jump there)."""
        i = np.searchsorted(self._jump_times, s)
        if i < self._jump_times.size and self._jump_times[i] == s:
            return float(self._jump_sizes[i])
        return 0.0

    def breakpoints(self) -> np.ndarray:
        """All times where the path may change slope or jump."""
        return np.union1d(self.grid, self._jump_times)

    def sup_process(self, s: float) -> float:
        """``sup_{u<=s} |X_u|``, exact for piecewise-linear-plus-jumps paths.

        Segment extrema sit at segment endpoints, so it suffices to scan the
        right values and left limits at breakpoints up to ``s``.
        """
        s = float(self._check_domain(s))
        pts = self.breakpoints()
        pts = pts[pts <= s]
        if pts.size == 0 or pts[-1] != s:
            pts = np.append(pts, s)
        best = float(np.max(np.abs(self.values(pts))))
        left = float(np.max(np.abs(self.left_limits(pts))))
        return max(best, left)

    # -- transformations ----------------------------------------------------

    def stop(self, T: float, open: bool = False) -> "CadlagPath":
        """Path stopped at ``T``: frozen at ``X_T``, or at ``X_{T-}`` with the
        jump at ``T`` removed when ``open=True`` (pre-stopping)."""
        if T < 0.0 or T > self.horizon:
            raise ValueError("stopping time outside [0, horizon]")
        if T == self.horizon and not open:
            return self
        keep = self.grid[self.grid < T]
        grid = np.concatenate((keep, [T])) if keep.size else np.asarray([0.0, T])
        if T == 0.0:
            grid = np.asarray([0.0])
        frozen = float(self._cont_at(np.asarray([T]))[0])
        new_grid = np.concatenate((grid, [self.horizon])) if grid[-1] < self.horizon else grid
        cont = np.concatenate((self._cont_at(grid), [frozen])) if grid[-1] < self.horizon else self._cont_at(grid)
        if new_grid[0] != 0.0:
            new_grid = np.concatenate(([0.0], new_grid))
            cont = np.concatenate(([self.cont_values[0]], cont))
        if open:
            jumps = tuple(j for j in self.jumps if j.time < T)
        else:
            jumps = tuple(j for j in self.jumps if j.time <= T)
        return CadlagPath(self.horizon, new_grid, cont, jumps)

    def with_grid(self, extra_times) -> "CadlagPath":
        """Same path with additional grid times (values are interpolated,
        which is exact for the piecewise-linear continuous part)."""
        extra = self._check_domain(np.asarray(extra_times, dtype=float))
        grid = np.union1d(self.grid, extra)
        return CadlagPath(self.horizon, grid, self._cont_at(grid), self.jumps)

    # -- algebra ------------------------------------------------------------

    def _merge_jumps(self, other: "CadlagPath", sign: float) -> tuple[JumpEvent, ...]:
        merged: dict[float, list] = {}
        for j in self.jumps:
            merged[j.time] = [j.size, j.fixed_time]
        for j in other.jumps:
            if j.time in merged:
                merged[j.time][0] += sign * j.size
                merged[j.time][1] = merged[j.time][1] or j.fixed_time
            else:
                merged[j.time] = [sign * j.size, j.fixed_time]
        return tuple(
            JumpEvent(t, sz, fx) for t, (sz, fx) in sorted(merged.items()) if sz != 0.0
        )

    def _combine(self, other: "CadlagPath", sign: float) -> "CadlagPath":
        if not isinstance(other, CadlagPath):
            return NotImplemented
        if other.horizon != self.horizon:
            raise ValueError("paths must share a horizon")
        grid = np.union1d(self.grid, other.grid)
        cont = self._cont_at(grid) + sign * other._cont_at(grid)
        return CadlagPath(self.horizon, grid, cont, self._merge_jumps(other, sign))

    def __add__(self, other):
        return self._combine(other, 1.0)

    def __sub__(self, other):
        return self._combine(other, -1.0)

    def __neg__(self):
        return self * (-1.0)

    def __mul__(self, c):
        c = float(c)
        jumps = tuple(
            JumpEvent(j.time, c * j.size, j.fixed_time) for j in self.jumps if c * j.size != 0.0
        )
        return CadlagPath(self.horizon, self.grid, c * self.cont_values, jumps)

    __rmul__ = __mul__

    def scale_jumps(self, c: float) -> "CadlagPath":
        """Scale jump sizes only; the continuous component is untouched."""
        c = float(c)
        jumps = tuple(
            JumpEvent(j.time, c * j.size, j.fixed_time) for j in self.jumps if c * j.size != 0.0
        )
        return CadlagPath(self.horizon, self.grid, self.cont_values, jumps)

    # -- serialisation ------------------------------------------------------

    def to_json(self) -> str:
        """Flat three-section record; floats round-trip bit-exactly."""
        return json.dumps(
            {
                "horizon": self.horizon,
                "grid": [[float(t), float(v)] for t, v in zip(self.grid, self.cont_values)],
                "jumps": [[j.time, j.size, bool(j.fixed_time)] for j in self.jumps],
            }
        )

    @staticmethod
    def from_json(text: str) -> "CadlagPath":
        doc = json.loads(text)
        grid = np.asarray([row[0] for row in doc["grid"]])
        cont = np.asarray([row[1] for row in doc["grid"]])
        jumps = tuple(JumpEvent(t, s, bool(fx)) for t, s, fx in doc["jumps"])
        return CadlagPath(doc["horizon"], grid, cont, jumps)


@dataclass(frozen=True, eq=False)
class PathDecomposition:
    """Split ``X = M + A + C``: local-martingale part, finite-variation part
    and the continuous zero-quadratic-variation part.  The finite-variation
    part carries the initial value and all jumps."""

    total: CadlagPath
    mart: CadlagPath
    fv: CadlagPath
    zero_qv: CadlagPath

    def __post_init__(self):
        if self.zero_qv.jumps:
            raise ValueError("zero-QV part must be continuous")
        grid = self.total.grid
        recon = self.mart.values(grid) + self.fv.values(grid) + self.zero_qv.values(grid)
        if not np.allclose(recon, self.total.values(grid), rtol=0.0, atol=1e-9):
            raise ValueError("mart + fv + zero_qv does not reproduce the total path")

    @property
    def semimartingale(self) -> CadlagPath:
        """The part with jumps and finite-variation drift: ``Z = M + A``."""
        return self.mart + self.fv

    @property
    def initial_value(self) -> float:
        return self.total.value(0.0)


# -- constructors ------------------------------------------------------------


def zero_path(horizon: float) -> CadlagPath:
    return constant_path(horizon, 0.0)


def constant_path(horizon: float, value: float) -> CadlagPath:
    return CadlagPath(horizon, np.asarray([0.0, horizon]), np.asarray([value, value]))


def continuous_path(times, values) -> CadlagPath:
    times = np.asarray(times, dtype=float)
    return CadlagPath(times[-1], times, np.asarray(values, dtype=float))


def pure_jump_path(horizon: float, jumps: Iterable[JumpEvent], start: float = 0.0) -> CadlagPath:
    return CadlagPath(
        horizon, np.asarray([0.0, horizon]), np.asarray([start, start]), tuple(jumps)
    )


def piecewise_constant_path(
    horizon: float, switch_times: Sequence[float], values: Sequence[float], fixed_time: bool = False
) -> CadlagPath:
    """Right-continuous step path: ``values[0]`` on ``[0, switch_times[0])``,
    then ``values[i]`` from ``switch_times[i-1]`` on."""
    if len(values) != len(switch_times) + 1:
        raise ValueError("need one more value than switch times")
    jumps = []
    for t, prev, new in zip(switch_times, values[:-1], values[1:]):
        size = new - prev
        if size != 0.0:
            jumps.append(JumpEvent(float(t), float(size), fixed_time))
    return pure_jump_path(horizon, jumps, start=float(values[0]))

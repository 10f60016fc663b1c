"""Refining partition sequences of ``[0, t]``.

A refining sequence ``{D_k}`` is nested (``D_k`` a subset of ``D_{k+1}``)
with mesh tending to zero.  The dyadic default has mesh ``t * 2**-k``;
the jump-adapted variant unions every level with a fixed set of jump
times so jump increments are isolated exactly at every level.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ResourceLimitError

__all__ = ["RefiningSequence", "DyadicSequence", "JumpAdaptedSequence", "clip", "make_sequence"]

MAX_LEVEL = 22  # 2**22 + 1 grid points; anything above is not desk scale


class RefiningSequence:
    """Base class; concrete sequences implement :meth:`level`."""

    horizon: float

    def level(self, k: int) -> np.ndarray:
        raise NotImplementedError

    def mesh(self, k: int) -> float:
        return float(np.max(np.diff(self.level(k))))


@dataclass(frozen=True)
class DyadicSequence(RefiningSequence):
    horizon: float = 1.0

    def level(self, k: int) -> np.ndarray:
        """``D_k = {j * t * 2**-k : j = 0..2**k}``.

        Points are materialised as ``t * (j / 2**k)``; the dyadic fractions
        are exact in binary floating point, so nesting is exact as well.
        """
        if k < 0:
            raise ValueError("level must be nonnegative")
        if k > MAX_LEVEL:
            raise ResourceLimitError(f"partition level {k} exceeds {MAX_LEVEL}")
        n = 1 << k
        pts = self.horizon * (np.arange(n + 1, dtype=float) / n)
        # guard against rounding at the right endpoint for non-dyadic horizons
        pts[-1] = self.horizon
        return pts


@dataclass(frozen=True)
class JumpAdaptedSequence(RefiningSequence):
    """Dyadic levels unioned with a fixed jump-time set from level ``k0`` on.

    Still nested: the dyadic part is nested and the injected set is constant.
    """

    horizon: float
    jump_times: tuple[float, ...]
    k0: int = 0

    def __post_init__(self):
        jt = np.asarray(self.jump_times, dtype=float)
        if jt.size and (np.any(jt <= 0.0) or np.any(jt > self.horizon)):
            raise ValueError("jump times must lie in (0, horizon]")
        object.__setattr__(self, "jump_times", tuple(np.unique(jt).tolist()))

    def level(self, k: int) -> np.ndarray:
        base = DyadicSequence(self.horizon).level(k)
        if k < self.k0 or not self.jump_times:
            return base
        return np.union1d(base, np.asarray(self.jump_times))


def make_sequence(kind: str, horizon: float, jump_times=()) -> RefiningSequence:
    """Build a sequence from its config name (``dyadic`` | ``jump-adapted``)."""
    if kind == "dyadic":
        return DyadicSequence(horizon)
    if kind in ("jump-adapted", "jump_adapted"):
        return JumpAdaptedSequence(horizon, tuple(float(t) for t in jump_times))
    raise ValueError(f"unknown partition kind {kind!r}")


def clip(seq: RefiningSequence, k: int, s: float) -> np.ndarray:
    """Increment intervals of ``D_k`` for partial sums up to ``s``.

    Returns an ``(m, 2)`` array of ``[t_i, min(t_{i+1}, s)]`` for the
    ``t_i < s``; the last right endpoint is exactly ``s`` and degenerate
    zero-length intervals are dropped (they contribute 0 to every sum).
    """
    if s <= 0.0:
        raise ValueError("partial sums need s > 0")
    if s > seq.horizon:
        raise ValueError("s beyond the horizon")
    pts = seq.level(k)
    # first index with pts[i] >= s; exists because pts[-1] == horizon >= s
    i = int(np.searchsorted(pts, s, side="left"))
    lefts = pts[:i]
    rights = np.minimum(pts[1 : i + 1], s)
    out = np.column_stack((lefts, rights))
    return out[out[:, 0] < out[:, 1]]


def clip_points(seq: RefiningSequence, k: int, s: float) -> np.ndarray:
    """Evaluation points for partial sums up to ``s``: the ``t_i < s``
    followed by ``s`` itself.  Consecutive pairs tile ``[0, s]``."""
    if s <= 0.0:
        raise ValueError("partial sums need s > 0")
    if s > seq.horizon:
        raise ValueError("s beyond the horizon")
    pts = seq.level(k)
    i = int(np.searchsorted(pts, s, side="left"))
    return np.append(pts[:i], s)

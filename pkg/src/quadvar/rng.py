"""Counter-based random streams.

Every stochastic quantity in the package is drawn from a Philox stream keyed
by ``(seed, component, replica)``.  Philox is counter based, so streams are
independent by key construction: adding a perturbation stream to a coupled
pair never shifts the base streams, and replicas can run in any order (or in
parallel) with bit-identical results.
"""

from __future__ import annotations

import numpy as np

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


def _fnv1a64(text: str) -> int:
    h = _FNV_OFFSET
    for byte in text.encode("utf-8"):
        h ^= byte
        h = (h * _FNV_PRIME) & _MASK64
    return h


def stream(seed: int, component: str, replica: int = 0) -> np.random.Generator:
    """Return the generator for one (seed, component, replica) cell."""
    if seed < 0:
        raise ValueError("seed must be nonnegative")
    key = np.array(
        [seed & _MASK64, (_fnv1a64(component) ^ ((replica * 0x9E3779B97F4A7C15) & _MASK64)) & _MASK64],
        dtype=np.uint64,
    )
    return np.random.Generator(np.random.Philox(key=key))

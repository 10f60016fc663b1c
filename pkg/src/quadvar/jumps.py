"""Jump truncation, its compensated variant, truncation diagnostics and the
canonical instability examples.

Threshold conventions: plain truncation keeps jumps with ``|size| >= a``
(boundary inclusive); the compensated variant drops ``|size| < a`` along
with their compensator contribution, so its output has no jump below ``a``.
The boundary cases are exactly the troublesome jump-size lattice; the
probes evaluate thresholds on and off lattice points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, UnsupportedModelError
from .laws import CategoricalLaw, PointMassLaw
from .models import (
    CompoundPoissonComponent,
    CoupledSequence,
    PathSample,
    ProcessModel,
    sample_coupled,
    sample_path,
)
from .partitions import JumpAdaptedSequence
from .paths import CadlagPath, JumpEvent, piecewise_constant_path
from .qv import partial_qv

__all__ = [
    "truncate_plain",
    "truncate_compensated",
    "TruncationReport",
    "truncation_sweep",
    "trouble_set_probe",
    "v_condition_probe",
    "ProbeTable",
    "oscillator_path",
    "counterexample",
    "CounterexampleFamily",
]


def truncate_plain(X: CadlagPath, a: float) -> CadlagPath:
    """Drop every jump with ``|size| < a``; the continuous part is untouched."""
    if a <= 0:
        raise ValueError("truncation level must be positive")
    jumps = tuple(j for j in X.jumps if abs(j.size) >= a)
    return CadlagPath(X.horizon, X.grid, X.cont_values, jumps)


def truncate_compensated(sample: PathSample, a: float) -> CadlagPath:
    """Compensated truncation: jumps below ``a`` are removed together with
    their compensator contribution, which is added back as an analytic
    drift (and as deterministic fixed-time corrections where the schedule
    law has a nonzero truncated mean).

    Requires the generating model: the compound-Poisson intensity/law give
    the drift in closed form, avoiding any nested simulation.
    """
    if not 0 < a < 1:
        raise ValueError("compensated truncation is defined for 0 < a < 1")
    X = sample.path
    model = sample.model
    if model is None:
        raise UnsupportedModelError("compensated truncation needs the generating model")

    removed = [j for j in X.jumps if abs(j.size) < a]
    kept = tuple(j for j in X.jumps if abs(j.size) >= a)
    grid = X.grid
    cont = X.cont_values.copy()

    if any(not j.fixed_time for j in removed) or model.compound_poisson is not None:
        cp = model.compound_poisson
        if cp is None:
            raise UnsupportedModelError("small free jumps present but no compound-Poisson metadata")
        # drift of the removed band: intensity * E[J 1{|J| < a}] * s
        cont = cont + cp.intensity * cp.law.mean_below(a, inclusive=False) * grid

    extra: list[JumpEvent] = []
    if model.fixed_schedule is not None:
        removed_fixed_times = {j.time for j in removed if j.fixed_time}
        for t, law in model.fixed_schedule.schedule:
            if t in removed_fixed_times:
                atom = law.mean_below(a, inclusive=False)
                if atom != 0.0:
                    extra.append(JumpEvent(float(t), float(atom), fixed_time=True))
    jumps = tuple(sorted(kept + tuple(extra), key=lambda j: j.time))
    return CadlagPath(X.horizon, grid, cont, jumps)


@dataclass(frozen=True)
class TruncationReport:
    """Per-level distances between the truncated and the original path over
    a replica batch; rows are replicas, columns the thresholds."""

    a_grid: tuple[float, ...]
    sup_dist: np.ndarray
    qv_dist: np.ndarray
    mode: str

    def __post_init__(self):
        if np.any(self.sup_dist < 0.0) or np.any(self.qv_dist < 0.0):
            raise ValueError("distances must be nonnegative")

    def sup_median(self) -> np.ndarray:
        return np.median(self.sup_dist, axis=0)

    def qv_median(self) -> np.ndarray:
        return np.median(self.qv_dist, axis=0)


def truncation_sweep(
    model: ProcessModel,
    a_grid,
    replicas: int,
    seed: int,
    grid_level: int,
    k: int,
    mode: str = "compensated",
) -> TruncationReport:
    """Sample ``replicas`` paths and record sup and QV distances of the
    truncated path to the original across the threshold grid."""
    if mode not in ("compensated", "plain"):
        raise ConfigError("mode must be 'compensated' or 'plain'")
    a_grid = tuple(float(a) for a in a_grid)
    sup = np.empty((replicas, len(a_grid)))
    qv = np.empty_like(sup)
    for r in range(replicas):
        sample = sample_path(model, seed + r, grid_level)
        for i, a in enumerate(a_grid):
            trunc = (
                truncate_compensated(sample, a) if mode == "compensated" else truncate_plain(sample.path, a)
            )
            diff = trunc - sample.path
            sup[r, i] = diff.sup_process(diff.horizon)
            seq = JumpAdaptedSequence(diff.horizon, tuple(j.time for j in diff.jumps))
            qv[r, i] = partial_qv(diff, seq, k)
    return TruncationReport(a_grid, sup, qv, mode)


def trouble_set_probe(model: ProcessModel, a_candidates, replicas: int, seed: int, grid_level: int = 4):
    """Empirical frequency, per candidate level, of a jump whose size hits
    the level exactly (exact float comparison; lattice laws produce exact
    sizes, continuous laws almost surely never match)."""
    a_candidates = [float(a) for a in a_candidates]
    hits = np.zeros(len(a_candidates))
    for r in range(replicas):
        sizes = {abs(j.size) for j in sample_path(model, seed + r, grid_level).path.jumps}
        for i, a in enumerate(a_candidates):
            if a in sizes:
                hits[i] += 1.0
    return dict(zip(a_candidates, hits / replicas))


@dataclass(frozen=True)
class ProbeTable:
    """Empirical probabilities over an ``(a, n)`` grid; diagnostic only."""

    mode: str
    a_grid: tuple[float, ...]
    n_grid: tuple[float, ...]
    probs: np.ndarray  # shape (len(a_grid), len(n_grid))
    threshold: float

    def to_csv(self, file) -> None:
        import csv

        w = csv.writer(file)
        w.writerow(["a"] + [f"n={n!r}" for n in self.n_grid])
        for a, row in zip(self.a_grid, self.probs):
            w.writerow([repr(a)] + [repr(float(p)) for p in row])


def v_condition_probe(
    seq: CoupledSequence,
    mode: str,
    a_grid,
    n_grid,
    c: float,
    replicas: int,
    seed: int,
    grid_level: int = 4,
) -> ProbeTable:
    """Small-jump negligibility probes for a coupled family.

    ``V2``: empirical ``P(sum |dX^n_s| 1{|dX^n_s| <= a} >= c)`` at the
    horizon.  ``V1``: empirical probability that the running small-jump sum
    of ``X^n`` exceeds ``c`` in sup norm.  A table of estimates, never a
    verdict.
    """
    if mode not in ("V1", "V2"):
        raise ConfigError("mode must be 'V1' or 'V2'")
    a_grid = tuple(float(a) for a in a_grid)
    n_grid = tuple(float(n) for n in n_grid)
    counts = np.zeros((len(a_grid), len(n_grid)))
    for r in range(replicas):
        for j, n in enumerate(n_grid):
            xn, _ = sample_coupled(seq, n, seed + r, grid_level)
            sizes = np.asarray([jump.size for jump in xn.path.jumps])
            for i, a in enumerate(a_grid):
                small = sizes[np.abs(sizes) <= a] if sizes.size else sizes
                if mode == "V2":
                    stat = float(np.sum(np.abs(small)))
                else:
                    running = np.concatenate(([0.0], np.cumsum(small)))
                    stat = float(np.max(np.abs(running)))
                if stat >= c:
                    counts[i, j] += 1.0
    return ProbeTable(mode, a_grid, n_grid, counts / replicas, c)


# -- canonical instability examples -------------------------------------------


def oscillator_path(n: int) -> CadlagPath:
    """Square wave through zero on the dyadic grid of step ``2**-(n+1)``:
    amplitude ``2**-((n+1)/2)``, values cycling ``+h, 0, -h, 0``.

    Every one of its ``2**(n+1) - 1`` jumps has modulus ``h``, so the
    supremum is ``h -> 0`` while the quadratic variation is
    ``1 - 2**-(n+1) -> 1``: sup-small perturbations need not be QV-small.
    """
    if n < 1:
        raise ValueError("oscillation index must be >= 1")
    cells = 1 << (n + 1)
    h = math.sqrt(2.0 ** -(n + 1))
    cycle = (h, 0.0, -h, 0.0)
    values = [cycle[j % 4] for j in range(cells)]
    switch = [(j + 1) / cells for j in range(cells - 1)]
    return piecewise_constant_path(1.0, switch, values, fixed_time=True)


@dataclass(frozen=True)
class CounterexampleFamily:
    """A named family of paths indexed by ``n``.

    Deterministic families expose :meth:`path`; stochastic families carry a
    coupled sequence and expose :meth:`sample_pair`.
    """

    name: str
    natural_level: "callable"
    coupled: CoupledSequence | None = None
    deterministic: "callable" = None

    def path(self, n: int) -> CadlagPath:
        if self.deterministic is None:
            raise ConfigError(f"{self.name} is a stochastic family; use sample_pair")
        return self.deterministic(n)

    def sample_pair(self, n: float, seed: int, grid_level: int = 4) -> tuple[PathSample, PathSample]:
        if self.coupled is None:
            raise ConfigError(f"{self.name} is deterministic; use path")
        return sample_coupled(self.coupled, n, seed, grid_level)


def counterexample(name: str, **params) -> CounterexampleFamily:
    """Families reproducing the classic truncation/QV instabilities:

    - ``oscillator``: deterministic square waves, sup -> 0 but QV -> 1.
    - ``poisson_scale``: unit-jump Poisson with jumps scaled by ``1 - 1/n``;
      plain truncation at 1 empties the scaled path.
    - ``layered_poisson``: superposed Poisson layers with jump sizes
      ``1/k**2`` truncated at ``K`` layers; the same scaling breaks
      truncation at every lattice level ``1/k**2``.
    """
    if name == "oscillator":
        return CounterexampleFamily(
            "oscillator", natural_level=lambda n: n + 1, deterministic=oscillator_path
        )
    if name == "poisson_scale":
        intensity = float(params.get("intensity", 1.0))
        base = ProcessModel(
            horizon=float(params.get("horizon", 1.0)),
            compound_poisson=CompoundPoissonComponent(intensity, PointMassLaw(1.0)),
        )
        return CounterexampleFamily(
            "poisson_scale",
            natural_level=lambda n: 0,
            coupled=CoupledSequence(base, rule="scale_jumps"),
        )
    if name == "layered_poisson":
        layers = int(params.get("layers", 50))
        atoms = tuple(1.0 / k**2 for k in range(1, layers + 1))
        base = ProcessModel(
            horizon=float(params.get("horizon", 1.0)),
            compound_poisson=CompoundPoissonComponent(float(layers), CategoricalLaw(atoms)),
        )
        return CounterexampleFamily(
            "layered_poisson",
            natural_level=lambda n: 0,
            coupled=CoupledSequence(base, rule="scale_jumps"),
        )
    raise ConfigError(f"unknown counterexample {name!r}")

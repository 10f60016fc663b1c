"""Pathwise quadratic variation toolkit: cadlag paths with exact jumps,
refining partitions, discrete stochastic integrals, jump truncation and a
Monte Carlo stability-experiment harness."""

from .paths import CadlagPath, JumpEvent, PathDecomposition
from .partitions import DyadicSequence, JumpAdaptedSequence
from .qv import partial_cov, partial_qv, qv_split
from .follmer import foellmer_integral, integration_by_parts_residual, ito_formula_residual
from .transforms import Transform, TransformSequence, build_ya, builtin_sequence, builtin_transform
from .models import CoupledSequence, ProcessModel, sample_coupled, sample_path
from .jumps import counterexample, truncate_compensated, truncate_plain

__version__ = "0.1.0"

__all__ = [
    "CadlagPath",
    "JumpEvent",
    "PathDecomposition",
    "DyadicSequence",
    "JumpAdaptedSequence",
    "partial_qv",
    "partial_cov",
    "qv_split",
    "foellmer_integral",
    "integration_by_parts_residual",
    "ito_formula_residual",
    "Transform",
    "TransformSequence",
    "builtin_transform",
    "builtin_sequence",
    "build_ya",
    "ProcessModel",
    "CoupledSequence",
    "sample_path",
    "sample_coupled",
    "truncate_plain",
    "truncate_compensated",
    "counterexample",
    "__version__",
]

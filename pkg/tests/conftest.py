import numpy as np
import pytest

from quadvar.laws import UniformLaw
from quadvar.models import (
    BrownianComponent,
    CompoundPoissonComponent,
    DriftComponent,
    ProcessModel,
    sample_path,
)
from quadvar.partitions import JumpAdaptedSequence
from quadvar.paths import CadlagPath, piecewise_constant_path


@pytest.fixture(scope="session")
def mixed_model():
    """Brownian + drift + compound Poisson, bounded jumps."""
    return ProcessModel(
        brownian=BrownianComponent(1.0),
        drift=DriftComponent(0.3),
        compound_poisson=CompoundPoissonComponent(3.0, UniformLaw(-1.0, 1.0)),
    )


@pytest.fixture
def step_path():
    """Zero path with a single jump of size 2 at time 0.5."""
    return piecewise_constant_path(1.0, [0.5], [0.0, 2.0])


def jump_adapted(*paths: CadlagPath) -> JumpAdaptedSequence:
    times = np.concatenate([p._jump_times for p in paths]) if paths else np.empty(0)
    return JumpAdaptedSequence(paths[0].horizon, tuple(np.unique(times).tolist()))


def sample_mixed(model, seed, level=10):
    return sample_path(model, seed, level)

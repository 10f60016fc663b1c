import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quadvar.errors import ResourceLimitError
from quadvar.partitions import (
    DyadicSequence,
    JumpAdaptedSequence,
    clip,
    clip_points,
    make_sequence,
)


class TestLevels:
    def test_dyadic_examples(self):
        seq = DyadicSequence(1.0)
        assert seq.level(1).tolist() == [0.0, 0.5, 1.0]
        assert seq.level(2).tolist() == [0.0, 0.25, 0.5, 0.75, 1.0]

    def test_jump_adapted_union(self):
        seq = JumpAdaptedSequence(1.0, (0.3,))
        assert seq.level(1).tolist() == [0.0, 0.3, 0.5, 1.0]

    def test_nesting_exact(self):
        for seq in (DyadicSequence(1.0), DyadicSequence(2.5), JumpAdaptedSequence(1.0, (0.3, 0.77))):
            for k in range(0, 12):
                coarse = set(seq.level(k).tolist())
                fine = set(seq.level(k + 1).tolist())
                assert coarse <= fine

    def test_mesh_decreases_with_dyadic_bound(self):
        seq = DyadicSequence(1.0)
        meshes = [seq.mesh(k) for k in range(10)]
        assert all(b <= a for a, b in zip(meshes, meshes[1:]))
        assert all(seq.mesh(k) <= 1.0 * 2.0**-k for k in range(10))

    def test_endpoints_present(self):
        seq = JumpAdaptedSequence(2.0, (1.3,))
        for k in range(6):
            pts = seq.level(k)
            assert pts[0] == 0.0 and pts[-1] == 2.0

    def test_level_cap(self):
        with pytest.raises(ResourceLimitError):
            DyadicSequence(1.0).level(23)

    def test_negative_level(self):
        with pytest.raises(ValueError):
            DyadicSequence(1.0).level(-1)

    def test_make_sequence_names(self):
        assert isinstance(make_sequence("dyadic", 1.0), DyadicSequence)
        assert isinstance(make_sequence("jump-adapted", 1.0, (0.5,)), JumpAdaptedSequence)
        with pytest.raises(ValueError):
            make_sequence("random", 1.0)


class TestClip:
    def test_example_midpoint(self):
        seq = DyadicSequence(1.0)
        assert clip(seq, 1, 0.75).tolist() == [[0.0, 0.5], [0.5, 0.75]]

    def test_full_horizon(self):
        seq = DyadicSequence(1.0)
        assert clip(seq, 1, 1.0).tolist() == [[0.0, 0.5], [0.5, 1.0]]

    def test_partition_point_drops_degenerate(self):
        seq = DyadicSequence(1.0)
        assert clip(seq, 1, 0.5).tolist() == [[0.0, 0.5]]

    def test_domain_error(self):
        seq = DyadicSequence(1.0)
        with pytest.raises(ValueError):
            clip(seq, 1, 0.0)
        with pytest.raises(ValueError):
            clip(seq, 1, 1.2)

    @settings(max_examples=50, deadline=None)
    @given(s=st.floats(1e-6, 1.0), k=st.integers(0, 8))
    def test_tiling(self, s, k):
        intervals = clip(DyadicSequence(1.0), k, s)
        assert intervals[0, 0] == 0.0
        assert intervals[-1, 1] == s
        assert np.all(intervals[1:, 0] == intervals[:-1, 1])
        assert np.all(intervals[:, 0] < intervals[:, 1])

    def test_clip_points_pair_with_intervals(self):
        seq = DyadicSequence(1.0)
        pts = clip_points(seq, 2, 0.6)
        assert pts.tolist() == [0.0, 0.25, 0.5, 0.6]

import numpy as np
import pytest

from quadvar.errors import ConfigError
from quadvar.follmer import (
    foellmer_integral,
    integral_trace,
    integration_by_parts_residual,
    ito_formula_residual,
    level_sup_distance,
    transform_path,
    transform_qv_check,
)
from quadvar.laws import UniformLaw
from quadvar.models import (
    BrownianComponent,
    CompoundPoissonComponent,
    DriftComponent,
    ProcessModel,
    sample_path,
)
from quadvar.partitions import DyadicSequence
from quadvar.paths import CadlagPath, constant_path, piecewise_constant_path
from quadvar.qv import partial_qv
from quadvar.transforms import builtin_transform

from conftest import jump_adapted

DYADIC = DyadicSequence(1.0)
PURE_JUMP = ProcessModel(compound_poisson=CompoundPoissonComponent(3.0, UniformLaw(-1, 1)))


class TestFoellmerIntegral:
    def test_constant_integrand_telescopes(self, mixed_model):
        x = sample_path(mixed_model, 1, 10).path
        one = constant_path(1.0, 1.0)
        for k in (0, 3, 7, 10):
            got = foellmer_integral(one, x, DYADIC, k)
            assert got == pytest.approx(x.value(1.0) - x.value(0.0), abs=1e-12)

    def test_self_integral_identity(self):
        x = sample_path(ProcessModel(brownian=BrownianComponent(1.0)), 8, 16).path
        got = foellmer_integral(x, x, DYADIC, 16)
        want = 0.5 * (x.value(1.0) ** 2 - x.value(0.0) ** 2 - partial_qv(x, DYADIC, 16))
        assert got == pytest.approx(want, abs=1e-10)

    def test_left_point_rule_coincident_jump(self):
        # integrand is still 0 at the left endpoint of the covering cell
        y = piecewise_constant_path(1.0, [0.5], [0.0, 1.0])
        x = piecewise_constant_path(1.0, [0.5], [0.0, 2.0])
        for k in (1, 2, 5):
            assert foellmer_integral(y, x, DYADIC, k) == 0.0

    def test_clip_at_s(self, mixed_model):
        x = sample_path(mixed_model, 2, 10).path
        one = constant_path(1.0, 1.0)
        assert foellmer_integral(one, x, DYADIC, 8, 0.6) == pytest.approx(
            x.value(0.6) - x.value(0.0), abs=1e-12
        )


class TestIntegrationByParts:
    def test_random_pairs_every_level(self, mixed_model):
        for seed in range(10):
            x = sample_path(mixed_model, 300 + seed, 10).path
            y = sample_path(mixed_model, 400 + seed, 10).path
            seq = jump_adapted(x, y)
            for k in (2, 6, 10):
                scale = 1.0 + abs(x.value(1.0) * y.value(1.0))
                assert integration_by_parts_residual(x, y, seq, k) <= 1e-12 * scale

    def test_self_pair_reduces_to_qv_identity(self, mixed_model):
        x = sample_path(mixed_model, 55, 10).path
        seq = jump_adapted(x)
        assert integration_by_parts_residual(x, x, seq, 9) <= 1e-12 * (1 + x.value(1.0) ** 2)


class TestItoResidual:
    def test_linear_map_exact_every_level(self, mixed_model):
        ident = builtin_transform("identity")
        x = sample_path(mixed_model, 6, 10).path
        for k in (2, 5, 9):
            assert ito_formula_residual(ident, x, jump_adapted(x), k) <= 1e-12

    def test_square_on_pure_jump_exact_at_separating_level(self):
        square = builtin_transform("square")
        sample = sample_path(PURE_JUMP, 23, 6)
        x = sample.path
        seq = jump_adapted(x)
        assert ito_formula_residual(square, x, seq, 8) <= 1e-12

    def test_exp_on_brownian_drift_decays(self):
        expf = builtin_transform("exp")
        model = ProcessModel(brownian=BrownianComponent(1.0), drift=DriftComponent(0.5))
        reps = 150
        res = {k: [] for k in (10, 12, 14, 16)}
        for seed in range(reps):
            x = sample_path(model, seed, 16).path
            for k in res:
                res[k].append(ito_formula_residual(expf, x, DYADIC, k))
        meds = [np.median(res[k]) for k in (10, 12, 14, 16)]
        assert all(b <= a for a, b in zip(meds, meds[1:]))
        assert np.mean(np.asarray(res[16]) <= 0.02) >= 0.9

    def test_closed_form_oracle(self):
        # same assembly with the exact Brownian continuous QV (sigma^2 ds)
        # in place of the discrete continuous increments agrees at fine k
        expf = builtin_transform("exp")
        model = ProcessModel(brownian=BrownianComponent(1.0), drift=DriftComponent(0.5))
        x = sample_path(model, 97, 16).path
        pts = DYADIC.level(16)
        v = x.values(pts)
        exact_cont = 0.5 * float(np.exp(v[:-1]) @ np.diff(pts))
        discrete = float(np.exp(v[:-1]) @ np.diff(v))
        oracle_residual = abs(
            float(np.exp(v[-1]) - np.exp(v[0])) - discrete - exact_cont
        )
        assert oracle_residual <= 0.05
        assert ito_formula_residual(expf, x, DYADIC, 16) <= 0.05

    def test_missing_second_derivative(self, mixed_model):
        absf = builtin_transform("abs")
        x = sample_path(mixed_model, 3, 8).path
        with pytest.raises(ConfigError):
            ito_formula_residual(absf, x, jump_adapted(x), 6)


class TestTransformQV:
    def test_identity_transform(self, mixed_model):
        ident = builtin_transform("identity")
        x = sample_path(mixed_model, 12, 10).path
        seq = jump_adapted(x)
        rep = transform_qv_check(ident, x, seq, 9)
        assert rep.lhs == pytest.approx(partial_qv(x, seq, 9), abs=1e-12)
        assert rep.gap <= 1e-12

    def test_abs_on_pure_jump_exact(self):
        absf = builtin_transform("abs")
        sample = sample_path(PURE_JUMP, 31, 6)
        x = sample.path
        seq = jump_adapted(x)
        rep = transform_qv_check(absf, x, seq, 8)
        want = sum(
            (abs(x.value(j.time)) - abs(x.value(j.time) - j.size)) ** 2 for j in x.jumps
        )
        assert rep.rhs == pytest.approx(want, abs=1e-14)
        assert rep.gap <= 1e-12

    def test_abs_on_brownian_band(self):
        absf = builtin_transform("abs")
        model = ProcessModel(brownian=BrownianComponent(1.0))
        hits = 0
        reps = 150
        for seed in range(reps):
            # generated at level 18 so the finer-level oracle still samples
            # true marginals (dyadic nesting)
            x = sample_path(model, seed, 18).path
            rep = transform_qv_check(absf, x, DYADIC, 16)
            finer = transform_qv_check(absf, x, DYADIC, 18)
            if rep.gap <= 0.05 and abs(rep.lhs - finer.lhs) <= 0.1:
                hits += 1
        assert hits >= 0.9 * reps


class TestTransformPath:
    def test_identity_reproduces_path(self, mixed_model):
        ident = builtin_transform("identity")
        x = sample_path(mixed_model, 40, 8).path
        tp = transform_path(ident, x)
        ss = np.linspace(0, 1, 257)
        assert np.allclose(tp.values(ss), x.values(ss), rtol=0.0, atol=1e-12)
        assert tp.jumps == x.jumps

    def test_square_of_step(self):
        square = builtin_transform("square")
        x = piecewise_constant_path(1.0, [0.5], [0.0, 2.0])
        tp = transform_path(square, x)
        assert len(tp.jumps) == 1 and tp.jumps[0].size == 4.0

    def test_kink_density_against_dense_oracle(self):
        absf = builtin_transform("abs")
        x = CadlagPath(1.0, np.array([0.0, 1.0]), np.array([-1.0, 1.0]))
        tp = transform_path(absf, x)
        ss = np.linspace(0.0, 1.0, 4001)
        dense = np.abs(x.values(ss))
        assert np.max(np.abs(tp.values(ss) - dense)) <= 1e-6 * max(1.0, dense.max())

    def test_curvature_densification(self):
        expf = builtin_transform("exp")
        x = CadlagPath(1.0, np.array([0.0, 1.0]), np.array([0.0, 3.0]))
        tp = transform_path(expf, x)
        ss = np.linspace(0.0, 1.0, 2001)
        dense = np.exp(x.values(ss))
        assert np.max(np.abs(tp.values(ss) - dense)) <= 2e-5 * dense.max()


class TestIntegralTrace:
    def test_jump_check_exact_on_pure_jump(self):
        sample = sample_path(PURE_JUMP, 51, 6)
        x = sample.path
        y = sample_path(PURE_JUMP, 52, 6).path
        seq = jump_adapted(x, y)
        trace = integral_trace(y, x, seq, 8)
        assert trace.jump_check.size == len(x.jumps)
        assert np.max(trace.jump_check) <= 1e-14

    def test_level_distance_shrinks(self):
        model = ProcessModel(brownian=BrownianComponent(1.0))
        x = sample_path(model, 61, 14).path
        y = sample_path(model, 62, 14).path
        coarse = level_sup_distance(y, x, DYADIC, 6, 14)
        fine = level_sup_distance(y, x, DYADIC, 12, 14)
        assert fine <= coarse + 1e-12

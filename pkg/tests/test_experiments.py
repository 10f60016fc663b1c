import io
import math

import numpy as np
import pytest

from quadvar.errors import ConfigError
from quadvar.experiments import (
    DoubleLimitReport,
    ExperimentSpec,
    binomial_ci,
    emit_plot_data,
    hnorm_j,
    hnorm_lp,
    run_double_limit,
    run_integrator_stability,
    run_qv_stability,
    stability_stat_matrix,
)
from quadvar.laws import PointMassLaw, UniformLaw
from quadvar.models import (
    BrownianComponent,
    CompoundPoissonComponent,
    CoupledSequence,
    DriftComponent,
    ProcessModel,
    sample_path,
)
from quadvar.partitions import DyadicSequence
from quadvar.paths import CadlagPath
from quadvar.transforms import TransformSequence, builtin_sequence, builtin_transform

SMALL_BASE = ProcessModel(
    brownian=BrownianComponent(0.5),
    compound_poisson=CompoundPoissonComponent(1.0, UniformLaw(-0.5, 0.5)),
)


def small_spec(**overrides) -> ExperimentSpec:
    base = dict(
        scenario="test",
        coupled=CoupledSequence(SMALL_BASE, rule="add_noise", scale=0.5),
        transform_seq=builtin_sequence("polynomial_family"),
        threshold=0.1,
        n_grid=(2, 4, 8),
        level=9,
        replicas=40,
        seed=31,
        hypothesis_preset="linear_growth_ui",
    )
    base.update(overrides)
    return ExperimentSpec(**base)


class TestSpecValidation:
    def test_unknown_statistic(self):
        with pytest.raises(ConfigError):
            small_spec(statistic="energy")

    def test_unknown_mode(self):
        with pytest.raises(ConfigError):
            small_spec(mode="almost")

    def test_empty_grid(self):
        with pytest.raises(ConfigError):
            small_spec(n_grid=())

    def test_integrator_needs_integrand(self):
        with pytest.raises(ConfigError):
            run_qv_stability(small_spec(statistic="integral_sup_difference", replicas=1))


class TestDegenerate:
    def test_identical_processes_and_transforms_zero(self):
        ident = builtin_transform("identity")
        seq = TransformSequence("const", lambda n: ident, ident)
        spec = small_spec(
            coupled=CoupledSequence(SMALL_BASE, rule="identity"),
            transform_seq=seq,
            replicas=10,
            hypothesis_preset=None,
        )
        stats = stability_stat_matrix(spec)
        assert np.all(stats == 0.0)

    def test_infinity_index_zero_column(self):
        spec = small_spec(n_grid=(2, math.inf), replicas=10)
        stats = stability_stat_matrix(spec)
        assert np.all(stats[:, 1] == 0.0)


class TestAggregation:
    def test_report_fields_and_monotone_tail(self):
        report = run_qv_stability(small_spec())
        probs = [c["prob"] for c in report.cells]
        tails = [c["as_frac"] for c in report.cells]
        assert all(0.0 <= p <= 1.0 for p in probs)
        assert all(a >= b - 1e-12 for a, b in zip(tails, tails[1:]))
        assert all(c["ci_lo"] <= c["prob"] <= c["ci_hi"] for c in report.cells)

    def test_jensen_ordering(self):
        report = run_qv_stability(small_spec(mode="lp", lp_p=1.0))
        for cell in report.cells:
            p_norm = cell["mean_p"] ** (1.0 / 1.0)
            p2_norm = cell["mean_2p"] ** (1.0 / 2.0)
            assert p_norm <= p2_norm + 1e-12

    def test_rerun_bit_identical(self):
        spec = small_spec()
        a = stability_stat_matrix(spec)
        b = stability_stat_matrix(spec)
        assert np.array_equal(a, b)
        buf1, buf2 = io.StringIO(), io.StringIO()
        run_qv_stability(spec, stats=a).to_csv(buf1)
        run_qv_stability(spec, stats=b).to_csv(buf2)
        assert buf1.getvalue() == buf2.getvalue()

    def test_chunked_matrix_matches_serial(self):
        spec = small_spec(replicas=12)
        whole = stability_stat_matrix(spec)
        parts = np.vstack(
            [stability_stat_matrix(spec, lo, hi) for lo, hi in ((0, 5), (5, 12))]
        )
        assert np.array_equal(whole, parts)

    def test_binomial_ci_edges(self):
        lo, hi = binomial_ci(0, 100)
        assert lo == 0.0 and 0.0 < hi < 0.06
        lo, hi = binomial_ci(100, 100)
        assert hi == 1.0 and lo > 0.94

    def test_hypothesis_warnings(self):
        report = run_qv_stability(small_spec(replicas=4, hypothesis_preset=None))
        assert any("preset" in w for w in report.warnings)
        report = run_qv_stability(small_spec(replicas=4, hypothesis_preset="bounded_derivative"))
        assert any("not part" in w for w in report.warnings)


class TestTrends:
    def test_qv_stability_decreasing(self):
        report = run_qv_stability(small_spec(n_grid=(2, 8, 32), replicas=80, level=10))
        probs = [c["prob"] for c in report.cells]
        assert probs[0] >= probs[-1]
        assert probs[-1] <= 0.05
        assert report.cells[-1]["mean"] <= 0.02

    def test_integrator_reduces_to_sup_for_constant_integrand(self):
        # continuous paths and a constant integrand: the integral statistic
        # equals the sup statistic when the transforms agree at the start
        cont_base = ProcessModel(brownian=BrownianComponent(0.5))
        integrand = ProcessModel(x0=1.0)  # the constant path 1
        common = dict(
            coupled=CoupledSequence(cont_base, rule="add_noise", scale=0.5),
            replicas=12,
            n_grid=(2, 4),
        )
        spec_int = small_spec(statistic="integral_sup_difference", integrand=integrand, **common)
        spec_sup = small_spec(statistic="sup_of_difference", **common)
        got = stability_stat_matrix(spec_int)
        want = stability_stat_matrix(spec_sup)
        assert np.allclose(got, want, rtol=0.0, atol=1e-12)

    def test_integrator_stability_runs(self):
        spec = small_spec(
            statistic="integral_sup_difference",
            integrand=ProcessModel(brownian=BrownianComponent(1.0)),
            replicas=40,
            n_grid=(2, 32),
        )
        report = run_integrator_stability(spec)
        assert report.cells[-1]["prob"] <= report.cells[0]["prob"]


class TestDoubleLimit:
    def test_poisson_scale_matrix(self):
        fam_base = ProcessModel(compound_poisson=CompoundPoissonComponent(1.0, PointMassLaw(1.0)))
        ident = builtin_transform("identity")
        spec = small_spec(
            coupled=CoupledSequence(fam_base, rule="scale_jumps"),
            transform_seq=TransformSequence("id", lambda n: ident, ident),
            threshold=0.5,
            n_grid=(2, 4, 8, 16, 32),
            a_grid=(1.0, 0.5, 0.25),
            level=6,
            replicas=150,
            hypothesis_preset=None,
        )
        report = run_double_limit(spec)
        lattice_row = report.probs[0]
        assert np.all(lattice_row >= 0.5)
        assert report.probs[1, -1] <= 0.05
        assert report.probs[2, -1] <= 0.05
        assert report.row_then_column()[0] >= 0.5
        assert report.column_then_row().shape == (5,)

    def test_identity_family_matches_single_process_decay(self):
        square = builtin_transform("square")
        spec = small_spec(
            coupled=CoupledSequence(SMALL_BASE, rule="identity"),
            transform_seq=TransformSequence("sq", lambda n: square, square),
            a_grid=(0.4, 0.2),
            replicas=20,
            hypothesis_preset=None,
        )
        report = run_double_limit(spec)
        # X^n == X and f_n == f: columns are constant in n
        assert np.allclose(report.probs, report.probs[:, :1])

    def test_requires_a_grid(self):
        with pytest.raises(ConfigError):
            run_double_limit(small_spec())


class TestHnorm:
    def test_linear_fv_only(self):
        model = ProcessModel(drift=DriftComponent(1.0))
        decomp = sample_path(model, 0, 4).decomposition
        assert hnorm_j(decomp, k=4) == 1.0

    def test_initial_value_only(self):
        model = ProcessModel(x0=5.0)
        decomp = sample_path(model, 0, 2).decomposition
        assert hnorm_j(decomp, k=2) == 5.0

    def test_brownian_l2_estimate(self):
        model = ProcessModel(brownian=BrownianComponent(1.0))
        vals = [hnorm_j(sample_path(model, s, 10).decomposition, k=10) for s in range(300)]
        # E[S_k] = t = 1, so the L2 norm of sqrt(S_k) is 1
        assert hnorm_lp(vals, 2.0) == pytest.approx(1.0, abs=0.05)


class TestPlotData:
    def test_trend_rows(self):
        report = run_qv_stability(small_spec(n_grid=(2, 4, 8, 16, 32), replicas=5))
        buf = io.StringIO()
        assert emit_plot_data(report, "trend", buf) == 5

    def test_matrix_rows(self):
        report = DoubleLimitReport(
            a_grid=(1.0, 0.5, 0.25, 0.1),
            n_grid=(1, 2, 3, 4, 5),
            probs=np.zeros((4, 5)),
            threshold=0.1,
            config={},
            seed=0,
            warnings=[],
            runtime_seconds=0.0,
        )
        buf = io.StringIO()
        assert emit_plot_data(report, "matrix", buf) == 20

    def test_trace_rows(self):
        from quadvar.partitions import DyadicSequence
        from quadvar.qv import qv_split

        path = sample_path(SMALL_BASE, 3, 8).path
        trace = qv_split(path, DyadicSequence(1.0), 5)
        buf = io.StringIO()
        assert emit_plot_data(trace, "trace", buf) == trace.times.size

    def test_unknown_kind(self):
        report = run_qv_stability(small_spec(replicas=3))
        with pytest.raises(ConfigError):
            emit_plot_data(report, "sparkline", io.StringIO())


class TestNamedScenarios:
    def test_mollified_abs_scenario_trend(self):
        from quadvar.cli import build_scenario

        spec, kind = build_scenario(
            "mollified_abs_drifted_cp", {"replicas": 60, "level": 10, "seed": 17}
        )
        assert kind == "qv"
        report = run_qv_stability(spec)
        probs = [c["prob"] for c in report.cells]
        assert probs[-1] <= probs[0]
        assert probs[-1] <= 0.05
        assert not report.warnings

    def test_t2_noise_dominated_scenario(self):
        from quadvar.cli import build_scenario

        spec, kind = build_scenario(
            "t2_noise_dominated", {"replicas": 30, "level": 10, "seed": 23, "n_grid": [2, 16]}
        )
        assert kind == "integrator"
        # continuous members: the perturbed path never jumps
        from quadvar.models import sample_coupled

        xn, _ = sample_coupled(spec.coupled, 4, 1, 8)
        assert xn.path.jumps == ()
        report = run_integrator_stability(spec)
        assert report.cells[-1]["prob"] <= report.cells[0]["prob"]

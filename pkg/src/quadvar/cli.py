"""Config-driven command line: simulate paths, compute QV and integrals,
run truncations and stability experiments, and check the exact identities.

Commands: ``simulate | qv | integrate | truncate | experiment | check``.
All randomness derives from the config seed, so identical configs produce
identical output files (the JSON summary carries the only timestamp).
``QV_THREADS`` caps the replica worker pool for experiments; chunks merge
in a fixed order, so results do not depend on the worker count.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .errors import ConfigError, ResourceLimitError, UnsupportedModelError
from .experiments import (
    ExperimentSpec,
    double_limit_counts,
    emit_plot_data,
    run_double_limit,
    run_qv_stability,
    stability_stat_matrix,
)
from .follmer import integral_trace, integraltrace_to_csv, integration_by_parts_residual, level_sup_distance
from .jumps import counterexample, oscillator_path, truncation_sweep
from .laws import CategoricalLaw, PointMassLaw, TruncatedNormalLaw, UniformLaw
from .models import (
    BrownianComponent,
    CompoundPoissonComponent,
    CoupledSequence,
    DriftComponent,
    FbmComponent,
    ProcessModel,
    sample_path,
)
from .partitions import JumpAdaptedSequence, make_sequence
from .qv import check_doubleup, check_triangle, partial_cov, partial_qv, qv_split, qvtrace_to_csv
from .transforms import TransformSequence, builtin_sequence, builtin_transform

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_CONFIG = 2
EXIT_UNSUPPORTED = 3
EXIT_RESOURCE = 4


# -- registries ----------------------------------------------------------------


def _law_from_config(doc: dict):
    kind = doc.get("kind", "uniform")
    if kind == "uniform":
        return UniformLaw(float(doc.get("lo", -1.0)), float(doc.get("hi", 1.0)))
    if kind == "truncated_normal":
        return TruncatedNormalLaw(
            float(doc.get("mu", 0.0)),
            float(doc.get("sigma", 0.5)),
            float(doc.get("lo", -1.0)),
            float(doc.get("hi", 1.0)),
        )
    if kind == "point_mass":
        return PointMassLaw(float(doc.get("value", 1.0)))
    if kind == "categorical":
        return CategoricalLaw(tuple(doc["atoms"]), tuple(doc["probs"]) if "probs" in doc else None)
    raise ConfigError(f"unknown jump law {kind!r}")


def build_model(name: str, params: dict | None = None) -> ProcessModel:
    """Named model presets; parameters override the preset defaults."""
    p = dict(params or {})
    horizon = float(p.pop("horizon", 1.0))
    x0 = float(p.pop("x0", 0.0))

    def bm(sig=1.0):
        return BrownianComponent(float(p.pop("sigma", sig)))

    def cp(lam, lo=-1.0, hi=1.0):
        law = _law_from_config(p.pop("law")) if "law" in p else UniformLaw(lo, hi)
        return CompoundPoissonComponent(float(p.pop("intensity", lam)), law)

    if name == "brownian":
        model = ProcessModel(horizon, x0, brownian=bm())
    elif name == "brownian_drift":
        model = ProcessModel(horizon, x0, brownian=bm(), drift=DriftComponent(float(p.pop("rate", 0.5))))
    elif name == "cp_uniform":
        model = ProcessModel(horizon, x0, compound_poisson=cp(3.0))
    elif name == "cp_drift":
        model = ProcessModel(
            horizon, x0,
            drift=DriftComponent(float(p.pop("rate", 0.3))),
            compound_poisson=cp(3.0),
        )
    elif name == "bm_cp":
        model = ProcessModel(horizon, x0, brownian=bm(), compound_poisson=cp(3.0))
    elif name == "bm_cp_dense":
        model = ProcessModel(horizon, x0, brownian=bm(), compound_poisson=cp(40.0))
    elif name == "bm_cp_fbm":
        model = ProcessModel(
            horizon, x0, brownian=bm(), compound_poisson=cp(3.0),
            fbm=FbmComponent(float(p.pop("hurst", 0.75)), float(p.pop("fbm_scale", 1.0))),
        )
    elif name == "fbm":
        model = ProcessModel(
            horizon, x0, fbm=FbmComponent(float(p.pop("hurst", 0.75)), float(p.pop("fbm_scale", 1.0)))
        )
    elif name == "poisson":
        model = ProcessModel(
            horizon, x0,
            compound_poisson=CompoundPoissonComponent(float(p.pop("intensity", 1.0)), PointMassLaw(1.0)),
        )
    elif name == "layered_poisson":
        layers = int(p.pop("layers", 50))
        atoms = tuple(1.0 / k**2 for k in range(1, layers + 1))
        model = ProcessModel(
            horizon, x0,
            compound_poisson=CompoundPoissonComponent(float(layers), CategoricalLaw(atoms)),
        )
    elif name == "drifted_cp":
        # jumps bounded away from a derivative kink at 0 by a positive start + drift
        model = ProcessModel(
            horizon, float(p.pop("start", 3.0)),
            drift=DriftComponent(float(p.pop("rate", 0.5))),
            compound_poisson=cp(2.0, -0.5, 0.5),
        )
    else:
        raise ConfigError(f"unknown model {name!r}")
    if p:
        raise ConfigError(f"unused model parameters for {name!r}: {sorted(p)}")
    return model


MODEL_NAMES = (
    "brownian", "brownian_drift", "cp_uniform", "cp_drift", "bm_cp", "bm_cp_dense",
    "bm_cp_fbm", "fbm", "poisson", "layered_poisson", "drifted_cp", "oscillator",
)


def build_transform_sequence(name: str, params: dict | None = None) -> TransformSequence:
    if name in ("polynomial_family", "mollified_abs", "shifted_relu_smooth"):
        return builtin_sequence(name, **(params or {}))
    # a constant sequence from a single transform name
    f = builtin_transform(name, **(params or {}))
    return TransformSequence(f"{name}_const", lambda n: f, f)


def build_scenario(name: str, overrides: dict) -> tuple[ExperimentSpec, str]:
    """Named experiment scenarios; returns the populated ``ExperimentSpec``
    and the runner kind (``qv`` | ``integrator`` | ``double_limit``)."""
    o = dict(overrides)
    seed = int(o.pop("seed", 0))
    replicas = int(o.pop("replicas", 500))
    level = int(o.pop("level", 14))

    def spec(**kw) -> ExperimentSpec:
        base = dict(
            scenario=name, seed=seed, replicas=replicas, level=level,
            threshold=float(o.pop("threshold", kw.pop("threshold", 0.1))),
        )
        base.update(kw)
        base.update({k: tuple(v) if isinstance(v, list) else v for k, v in o.items()})
        return ExperimentSpec(**base)

    small_base = build_model("bm_cp", {"sigma": 0.5, "intensity": 1.0, "law": {"kind": "uniform", "lo": -0.5, "hi": 0.5}})
    if name == "x2_add_noise":
        return (
            spec(
                coupled=CoupledSequence(small_base, rule="add_noise", scale=0.5),
                transform_seq=builtin_sequence("polynomial_family"),
                hypothesis_preset="linear_growth_ui",
            ),
            "qv",
        )
    if name == "x2_add_noise_integrator":
        return (
            spec(
                coupled=CoupledSequence(small_base, rule="add_noise", scale=0.5),
                transform_seq=builtin_sequence("polynomial_family"),
                statistic="integral_sup_difference",
                integrand=build_model("brownian"),
                hypothesis_preset="linear_growth_ui",
            ),
            "integrator",
        )
    if name == "mollified_abs_drifted_cp":
        return (
            spec(
                coupled=CoupledSequence(build_model("drifted_cp"), rule="add_noise", scale=0.5),
                transform_seq=builtin_sequence("mollified_abs"),
                hypothesis_preset="as_countable_kinks",
            ),
            "qv",
        )
    if name == "t2_noise_dominated":
        return (
            spec(
                coupled=CoupledSequence(build_model("brownian_drift", {"sigma": 0.5}), rule="add_noise", scale=0.5),
                transform_seq=builtin_sequence("polynomial_family"),
                statistic="integral_sup_difference",
                integrand=build_model("brownian"),
                hypothesis_preset="continuous_dominated",
            ),
            "integrator",
        )
    if name == "poisson_scale_double_limit":
        fam = counterexample("poisson_scale")
        ident = build_transform_sequence("identity")
        return (
            spec(
                coupled=fam.coupled,
                transform_seq=ident,
                threshold=float(o.pop("c", 0.5)) if "c" in o else 0.5,
                a_grid=tuple(o.pop("a_grid", (1.0, 0.5, 0.25))),
                level=6,
                hypothesis_preset="fixed_time_variation",
            ),
            "double_limit",
        )
    if name == "v2_add_noise_double_limit":
        return (
            spec(
                coupled=CoupledSequence(small_base, rule="add_noise", scale=0.5),
                transform_seq=builtin_sequence("polynomial_family"),
                threshold=0.1,
                a_grid=tuple(o.pop("a_grid", (0.4, 0.2, 0.1))),
                hypothesis_preset="linear_growth_ui",
            ),
            "double_limit",
        )
    raise ConfigError(f"unknown scenario {name!r}")


SCENARIO_NAMES = (
    "x2_add_noise", "x2_add_noise_integrator", "mollified_abs_drifted_cp",
    "t2_noise_dominated", "poisson_scale_double_limit", "v2_add_noise_double_limit",
)


# -- config handling -----------------------------------------------------------

CONFIG_SCHEMA = {
    "type": "object",
    "properties": {
        "command": {"enum": ["simulate", "qv", "integrate", "truncate", "experiment", "check"]},
        "model": {
            "type": "object",
            "properties": {"name": {"type": "string"}, "params": {"type": "object"}},
            "required": ["name"],
        },
        "integrand": {
            "type": "object",
            "properties": {"name": {"type": "string"}, "params": {"type": "object"}},
            "required": ["name"],
        },
        "scenario": {"type": "string"},
        "transform": {"type": "string"},
        "statistic": {"type": "string"},
        "mode": {"enum": ["probability", "as_surrogate", "lp"]},
        "partition": {"enum": ["dyadic", "jump-adapted"]},
        "format": {"enum": ["csv", "json"]},
        "seed": {"type": "integer", "minimum": 0},
        "level": {"type": "integer", "minimum": 0},
        "grid_level": {"type": "integer", "minimum": 0},
        "replicas": {"type": "integer", "minimum": 1},
        "n": {"type": "integer", "minimum": 1},
        "a": {"type": "number", "exclusiveMinimum": 0},
        "threshold": {"type": "number"},
        "n_grid": {"type": "array", "items": {"type": "number"}, "minItems": 1},
        "a_grid": {"type": "array", "items": {"type": "number"}, "minItems": 1},
        "out": {"type": "string"},
        "truncation_mode": {"enum": ["plain", "compensated"]},
    },
    "additionalProperties": False,
}


def load_config(path: str | None, args: argparse.Namespace) -> dict:
    cfg: dict = {}
    if path:
        try:
            cfg = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
    import jsonschema

    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"config schema violation: {exc.message}") from exc
    for key in (
        "seed", "level", "grid_level", "replicas", "n", "a", "out", "format",
        "partition", "scenario", "transform", "statistic", "mode", "threshold",
        "truncation_mode",
    ):
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    if getattr(args, "model", None) is not None:
        cfg["model"] = {"name": args.model, "params": cfg.get("model", {}).get("params", {})}
    if getattr(args, "integrand", None) is not None:
        cfg["integrand"] = {"name": args.integrand, "params": {}}
    if getattr(args, "n_grid", None):
        cfg["n_grid"] = [float(x) for x in args.n_grid]
    if getattr(args, "a_grid", None):
        cfg["a_grid"] = [float(x) for x in args.a_grid]
    return cfg


def _require_seed(cfg: dict) -> int:
    if "seed" not in cfg:
        raise ConfigError("stochastic commands need a seed (config key or --seed)")
    return int(cfg["seed"])


def _outdir(cfg: dict) -> Path:
    out = Path(cfg.get("out", "out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _model_from_cfg(cfg: dict, default: str = "bm_cp") -> tuple[str, dict]:
    doc = cfg.get("model", {"name": default})
    return doc["name"], doc.get("params", {})


# -- command implementations -----------------------------------------------------


def cmd_simulate(cfg: dict) -> int:
    name, params = _model_from_cfg(cfg)
    level = int(cfg.get("grid_level", cfg.get("level", 10)))
    out = _outdir(cfg)
    if name == "oscillator":
        path = oscillator_path(int(cfg.get("n", 5)))
        target = out / f"oscillator_n{cfg.get('n', 5)}.json"
    else:
        seed = _require_seed(cfg)
        path = sample_path(build_model(name, params), seed, level).path
        target = out / f"{name}_seed{seed}_level{level}.json"
    target.write_text(path.to_json())
    print(f"simulate {name}: {len(path.jumps)} jumps, sup={path.sup_process(path.horizon):.6g} -> {target}")
    return EXIT_OK


def cmd_qv(cfg: dict) -> int:
    name, params = _model_from_cfg(cfg)
    out = _outdir(cfg)
    if name == "oscillator":
        n = int(cfg.get("n", 5))
        path = oscillator_path(n)
        k = int(cfg.get("level", n + 1))
    else:
        seed = _require_seed(cfg)
        k = int(cfg.get("level", 12))
        path = sample_path(build_model(name, params), seed, max(k, 10)).path
    kind = cfg.get("partition", "jump-adapted")
    seq = make_sequence(kind, path.horizon, tuple(j.time for j in path.jumps))
    trace = qv_split(path, seq, k)
    target = out / f"qv_{name}_k{k}.csv"
    with open(target, "w", newline="") as fh:
        qvtrace_to_csv(trace, fh)
    total = float(trace.values[-1])
    print(
        f"qv {name} level={k} partition={kind}: {total!r} "
        f"(jump part {float(trace.jump_part[-1])!r}) -> {target}"
    )
    return EXIT_OK


def cmd_integrate(cfg: dict) -> int:
    name, params = _model_from_cfg(cfg)
    seed = _require_seed(cfg)
    k = int(cfg.get("level", 12))
    out = _outdir(cfg)
    x = sample_path(build_model(name, params), seed, max(k, 10)).path
    iname, iparams = (cfg.get("integrand", {"name": "brownian"})["name"], cfg.get("integrand", {}).get("params", {}))
    y = sample_path(build_model(iname, iparams), seed, max(k, 10), namespace="integrand/").path
    seq = JumpAdaptedSequence(x.horizon, tuple(j.time for j in x.jumps))
    trace = integral_trace(y, x, seq, k)
    target = out / f"integral_{name}_k{k}.csv"
    with open(target, "w", newline="") as fh:
        integraltrace_to_csv(trace, fh)
    surrogate = level_sup_distance(y, x, seq, max(k - 2, 0), k)
    jump_check = float(np.max(trace.jump_check)) if trace.jump_check.size else 0.0
    print(
        f"integrate {iname} d{name} level={k}: I_t={float(trace.values[-1])!r} "
        f"max_jump_check={jump_check:.3g} level_sup_distance={surrogate:.3g} -> {target}"
    )
    return EXIT_OK


def cmd_truncate(cfg: dict) -> int:
    name, params = _model_from_cfg(cfg, default="bm_cp_dense")
    seed = _require_seed(cfg)
    out = _outdir(cfg)
    a_grid = cfg.get("a_grid", [0.5, 0.2, 0.1, 0.05])
    mode = cfg.get("truncation_mode", "compensated")
    report = truncation_sweep(
        build_model(name, params),
        a_grid,
        replicas=int(cfg.get("replicas", 200)),
        seed=seed,
        grid_level=int(cfg.get("grid_level", 10)),
        k=int(cfg.get("level", 10)),
        mode=mode,
    )
    target = out / f"truncate_{name}_{mode}.csv"
    with open(target, "w", newline="") as fh:
        import csv as _csv

        w = _csv.writer(fh)
        w.writerow(["a", "sup_dist_median", "qv_dist_median"])
        for a, s, q in zip(report.a_grid, report.sup_median(), report.qv_median()):
            w.writerow([repr(a), repr(float(s)), repr(float(q))])
    for a, s, q in zip(report.a_grid, report.sup_median(), report.qv_median()):
        print(f"truncate {mode} a={a}: sup_median={s:.4g} qv_median={q:.4g}")
    print(f"-> {target}")
    return EXIT_OK


def _worker_count() -> int:
    try:
        return max(1, int(os.environ.get("QV_THREADS", "1")))
    except ValueError:
        return 1


def _experiment_worker(payload: tuple[str, dict, int, int]):
    kind, cfg, lo, hi = payload
    spec, _ = build_scenario(cfg["scenario"], cfg.get("_overrides", {}))
    if kind == "double_limit":
        return double_limit_counts(spec, lo, hi)
    return stability_stat_matrix(spec, lo, hi)


def cmd_experiment(cfg: dict) -> int:
    if "scenario" not in cfg:
        raise ConfigError("experiment needs a scenario name")
    seed = _require_seed(cfg)
    overrides = {
        k: cfg[k]
        for k in ("replicas", "level", "threshold", "n_grid", "a_grid", "mode", "statistic", "grid_level")
        if k in cfg
    }
    overrides["seed"] = seed
    spec, kind = build_scenario(cfg["scenario"], overrides)
    workers = _worker_count()
    if workers > 1 and spec.replicas >= 2 * workers:
        chunk = -(-spec.replicas // workers)
        ranges = [(lo, min(lo + chunk, spec.replicas)) for lo in range(0, spec.replicas, chunk)]
        payloads = [("double_limit" if kind == "double_limit" else "stability",
                     {"scenario": cfg["scenario"], "_overrides": overrides}, lo, hi)
                    for lo, hi in ranges]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_experiment_worker, payloads))
        merged = np.sum(parts, axis=0) if kind == "double_limit" else np.vstack(parts)
    else:
        merged = None

    out = _outdir(cfg)
    fmt = cfg.get("format", "csv")
    if kind == "double_limit":
        report = run_double_limit(spec, counts=merged)
        stem = out / f"experiment_{cfg['scenario']}"
        with open(f"{stem}.csv", "w", newline="") as fh:
            emit_plot_data(report, "matrix", fh)
        if fmt == "json":
            with open(f"{stem}.json", "w") as fh:
                json.dump(
                    {"config": report.config, "a_grid": list(report.a_grid),
                     "n_grid": list(report.n_grid), "probs": report.probs.tolist(),
                     "warnings": report.warnings},
                    fh, indent=2,
                )
        for i, a in enumerate(report.a_grid):
            row = " ".join(f"{v:.3f}" for v in report.probs[i])
            print(f"experiment {cfg['scenario']} a={a}: {row}")
    else:
        report = run_qv_stability(spec, stats=merged)
        stem = out / f"experiment_{cfg['scenario']}"
        with open(f"{stem}.csv", "w", newline="") as fh:
            report.to_csv(fh)
        if fmt == "json":
            with open(f"{stem}.json", "w") as fh:
                report.to_json(fh)
        for cell in report.cells:
            print(
                f"experiment {cfg['scenario']} n={cell['n']}: prob={cell['prob']:.3f} "
                f"[{cell['ci_lo']:.3f}, {cell['ci_hi']:.3f}] mean={cell['mean']:.4g}"
            )
        for w in report.warnings:
            print(f"warning: {w}")
    print(f"-> {stem}.csv")
    return EXIT_OK


def cmd_check(cfg: dict) -> int:
    """Exact-identity suite: integration-by-parts and polarisation residuals,
    plus the two QV inequalities, on seeded random jump-diffusion paths."""
    seed = int(cfg.get("seed", 2024))
    k = int(cfg.get("level", 10))
    rounds = int(cfg.get("replicas", 200))
    model = build_model("bm_cp")
    worst_ibp = 0.0
    worst_polar = 0.0
    violations = 0
    for r in range(rounds):
        x = sample_path(model, seed + 2 * r, k).path
        y = sample_path(model, seed + 2 * r + 1, k).path
        times = np.union1d(x._jump_times, y._jump_times)
        seq = JumpAdaptedSequence(x.horizon, tuple(times.tolist()))
        worst_ibp = max(worst_ibp, integration_by_parts_residual(x, y, seq, k))
        polar = abs(
            2.0 * partial_cov(x, y, seq, k)
            - (partial_qv(x + y, seq, k) - partial_qv(x, seq, k) - partial_qv(y, seq, k))
        )
        worst_polar = max(worst_polar, polar)
        z = sample_path(model, seed + 10_000 + r, k).path
        if not check_triangle([x, y, z], seq, k).holds:
            violations += 1
        if not check_doubleup([x, y, z], seq, k).holds:
            violations += 1
    print(f"check: max IBP residual {worst_ibp:.3e} (tolerance 1e-10)")
    print(f"check: max polarisation residual {worst_polar:.3e} (tolerance 1e-12)")
    print(f"check: inequality violations {violations} of {2 * rounds}")
    ok = worst_ibp <= 1e-10 and worst_polar <= 1e-12 and violations == 0
    print("check: PASS" if ok else "check: FAIL")
    return EXIT_OK if ok else EXIT_FAIL


# -- entry point -----------------------------------------------------------------


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="quadvar",
        description="pathwise QV, discrete stochastic integrals, jump truncation and stability experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("simulate", "qv", "integrate", "truncate", "experiment", "check"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", default=None, help="JSON config file")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--out", default=None, help="output directory")
        sp.add_argument("--level", type=int, default=None, help="partition level k")
        sp.add_argument("--grid-level", dest="grid_level", type=int, default=None)
        sp.add_argument("--replicas", type=int, default=None)
        sp.add_argument("--format", choices=("csv", "json"), default=None)
        sp.add_argument("--partition", choices=("dyadic", "jump-adapted"), default=None)
        sp.add_argument("--model", choices=MODEL_NAMES, default=None)
        sp.add_argument("--n", type=int, default=None, help="family index (oscillator etc.)")
        sp.add_argument("--a", type=float, default=None, help="truncation level")
        sp.add_argument("--a-grid", dest="a_grid", nargs="+", type=float, default=None)
        sp.add_argument("--n-grid", dest="n_grid", nargs="+", type=float, default=None)
        sp.add_argument("--threshold", type=float, default=None)
        sp.add_argument("--statistic", default=None)
        sp.add_argument("--mode", choices=("probability", "as_surrogate", "lp"), default=None)
        sp.add_argument("--integrand", choices=MODEL_NAMES, default=None)
        sp.add_argument("--scenario", choices=SCENARIO_NAMES, default=None)
        sp.add_argument(
            "--truncation-mode", dest="truncation_mode", choices=("plain", "compensated"), default=None
        )
    return parser


COMMANDS = {
    "simulate": cmd_simulate,
    "qv": cmd_qv,
    "integrate": cmd_integrate,
    "truncate": cmd_truncate,
    "experiment": cmd_experiment,
    "check": cmd_check,
}


def run(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args)
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except UnsupportedModelError as exc:
        print(f"unsupported model: {exc}", file=sys.stderr)
        return EXIT_UNSUPPORTED
    except ResourceLimitError as exc:
        print(f"resource limit: {exc}", file=sys.stderr)
        return EXIT_RESOURCE


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()

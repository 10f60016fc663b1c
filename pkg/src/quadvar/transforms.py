"""Transforms ``f`` with their (Dini-)derivatives, approximating sequences,
and the semimartingale-plus-continuous decomposition of ``f(X)`` at a jump
threshold.

The derivative convention throughout is the Dini derivative
``limsup_{h->0} (f(x+h) - f(x))/h``; for ``|x|`` this fixes ``f'(0) = 1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigError, UnsupportedModelError
from .partitions import RefiningSequence
from .paths import CadlagPath, JumpEvent
from .qv import partial_qv

__all__ = [
    "Transform",
    "TransformSequence",
    "builtin_transform",
    "builtin_sequence",
    "polynomial_derivative_approx",
    "PolyDerivativeFit",
    "verify_strong_convergence",
    "StrongConvergenceReport",
    "YaDecomposition",
    "build_ya",
    "gamma_qv_trend",
]


@dataclass(frozen=True)
class Transform:
    """A scalar map with derivative data.

    ``f`` and ``dini_d`` must be vectorised (accept ndarrays).  ``kinks``
    lists the points where ``dini_d`` is discontinuous; path transforms use
    them to densify grids around level crossings.  ``lipschitz_on`` maps a
    radius ``R`` to a Lipschitz constant valid on ``[-R, R]``.
    """

    name: str
    f: Callable
    dini_d: Callable
    second_d: Callable | None = None
    lipschitz_on: Callable[[float], float] | None = None
    tags: tuple[str, ...] = ()
    kinks: tuple[float, ...] = ()

    def __call__(self, x):
        return self.f(x)


def _poly_transform(name: str, coeffs) -> Transform:
    poly = np.polynomial.Polynomial(coeffs)
    d1 = poly.deriv()
    d2 = d1.deriv() if poly.degree() >= 1 else np.polynomial.Polynomial([0.0])
    abs_d1 = np.polynomial.Polynomial(np.abs(d1.coef))
    return Transform(
        name=name,
        f=poly,
        dini_d=d1,
        second_d=d2,
        lipschitz_on=lambda r: float(abs_d1(abs(r))),
        tags=("c2", "polynomial"),
    )


def builtin_transform(name: str, **params) -> Transform:
    """Registry of ready-made transforms addressed by name."""
    if name == "identity":
        return _poly_transform("identity", [0.0, 1.0])
    if name == "square":
        return _poly_transform("square", [0.0, 0.0, 1.0])
    if name == "polynomial":
        return _poly_transform("polynomial", params["coeffs"])
    if name == "exp":
        return Transform(
            name="exp",
            f=np.exp,
            dini_d=np.exp,
            second_d=np.exp,
            lipschitz_on=lambda r: float(np.exp(abs(r))),
            tags=("c2",),
        )
    if name == "abs":
        return Transform(
            name="abs",
            f=np.abs,
            dini_d=lambda x: np.where(np.asarray(x, dtype=float) >= 0.0, 1.0, -1.0),
            second_d=None,
            lipschitz_on=lambda r: 1.0,
            tags=("lipschitz", "countable_kinks"),
            kinks=(0.0,),
        )
    if name == "relu":
        shift = float(params.get("shift", 0.0))
        return Transform(
            name="relu",
            f=lambda x: np.maximum(np.asarray(x, dtype=float) - shift, 0.0),
            dini_d=lambda x: np.where(np.asarray(x, dtype=float) >= shift, 1.0, 0.0),
            second_d=None,
            lipschitz_on=lambda r: 1.0,
            tags=("lipschitz", "countable_kinks"),
            kinks=(shift,),
        )
    raise ConfigError(f"unknown transform {name!r}")


@dataclass(frozen=True)
class TransformSequence:
    """A sequence ``f_n`` with its limit ``f`` and an anchor point.

    ``c1_limit`` says whether the limit itself is C1; the uniform derivative
    convergence check only applies in that case (a mollified kink cannot
    converge uniformly at the kink).
    """

    name: str
    member: Callable[[int], Transform]
    limit: Transform
    anchor: float = 0.0
    c1_limit: bool = True


def builtin_sequence(name: str, **params) -> TransformSequence:
    if name == "polynomial_family":
        def member(n: int) -> Transform:
            return _poly_transform(f"square+x/{n}", [0.0, 1.0 / n, 1.0])

        return TransformSequence("polynomial_family", member, builtin_transform("square"))

    if name == "mollified_abs":
        def member(n: int) -> Transform:
            eps = 1.0 / n

            def f(x):
                return np.sqrt(np.asarray(x, dtype=float) ** 2 + eps)

            def d1(x):
                x = np.asarray(x, dtype=float)
                return x / np.sqrt(x**2 + eps)

            def d2(x):
                x = np.asarray(x, dtype=float)
                return eps / (x**2 + eps) ** 1.5

            return Transform(
                name=f"sqrt(x^2+1/{n})",
                f=f,
                dini_d=d1,
                second_d=d2,
                lipschitz_on=lambda r: 1.0,
                tags=("c2",),
            )

        return TransformSequence(
            "mollified_abs", member, builtin_transform("abs"), c1_limit=False
        )

    if name == "shifted_relu_smooth":
        shift = float(params.get("shift", 0.0))

        def member(n: int) -> Transform:
            eps = 1.0 / n

            def f(x):
                y = np.asarray(x, dtype=float) - shift
                return 0.5 * (y + np.sqrt(y**2 + eps))

            def d1(x):
                y = np.asarray(x, dtype=float) - shift
                return 0.5 * (1.0 + y / np.sqrt(y**2 + eps))

            def d2(x):
                y = np.asarray(x, dtype=float) - shift
                return 0.5 * eps / (y**2 + eps) ** 1.5

            return Transform(
                name=f"smooth_relu_{n}",
                f=f,
                dini_d=d1,
                second_d=d2,
                lipschitz_on=lambda r: 1.0,
                tags=("c2",),
            )

        return TransformSequence(
            "shifted_relu_smooth",
            member,
            builtin_transform("relu", shift=shift),
            c1_limit=False,
        )

    raise ConfigError(f"unknown transform sequence {name!r}")


@dataclass(frozen=True)
class StrongConvergenceReport:
    anchor_gaps: np.ndarray     # |f_n(x0) - f(x0)| per n
    sup_gaps: np.ndarray        # (radii, n) sup of |f_n' - f'| (or |f_n - f|)
    derivative_checked: bool
    ok: bool


def verify_strong_convergence(
    seq: TransformSequence,
    ns=(4, 16, 64, 256),
    radii=(1.0, 5.0, 10.0),
    grid: int = 513,
) -> StrongConvergenceReport:
    """Numeric check of the approximation hypotheses: anchor values converge
    and ``f_n' -> f'`` (value convergence for non-C1 limits) uniformly on the
    given compact radii, witnessed by sup gaps decreasing along ``ns``."""
    ns = list(ns)
    anchor_gaps = np.array(
        [abs(float(seq.member(n).f(seq.anchor)) - float(seq.limit.f(seq.anchor))) for n in ns]
    )
    sup = np.empty((len(radii), len(ns)))
    for i, r in enumerate(radii):
        xs = np.linspace(-r, r, grid)
        for j, n in enumerate(ns):
            fn = seq.member(n)
            if seq.c1_limit:
                sup[i, j] = float(np.max(np.abs(fn.dini_d(xs) - seq.limit.dini_d(xs))))
            else:
                sup[i, j] = float(np.max(np.abs(fn.f(xs) - seq.limit.f(xs))))
    ok = bool(
        np.all(np.diff(anchor_gaps) <= 1e-12 + anchor_gaps[:-1])
        and np.all(sup[:, -1] <= sup[:, 0] + 1e-12)
        and np.all(sup[:, -1] < 0.5)
    )
    return StrongConvergenceReport(anchor_gaps, sup, seq.c1_limit, ok)


@dataclass(frozen=True)
class PolyDerivativeFit:
    transform: Transform
    derivative_sup_error: float
    degree: int
    radius: float


def polynomial_derivative_approx(f: Transform, m: float, n: int) -> PolyDerivativeFit:
    """Smooth surrogate built from a polynomial derivative fit.

    Fits a degree-``n`` Chebyshev least-squares polynomial ``p_n`` to the
    Dini derivative on ``[-m, m]`` and takes its exact antiderivative
    anchored so that ``f_n(-m) = f(-m)``.  The reported sup error is
    ``max |p_n - f'|`` on a dense grid.
    """
    if m <= 0 or n < 1:
        raise ValueError("radius and degree must be positive")
    nodes = -m * np.cos(np.pi * (np.arange(4 * (n + 1)) + 0.5) / (4 * (n + 1)))
    p = np.polynomial.Chebyshev.fit(nodes, f.dini_d(nodes), deg=n, domain=[-m, m])
    anti = p.integ(lbnd=-m)
    f_at_anchor = float(f.f(-m))
    # the antiderivative is 0 at -m analytically; subtract the float residue
    # so the anchor value is reproduced exactly
    anti_residue = float(anti(-m))

    def value(x):
        return f_at_anchor + (anti(x) - anti_residue)

    xs = np.linspace(-m, m, 4001)
    sup_err = float(np.max(np.abs(p(xs) - f.dini_d(xs))))
    fit = Transform(
        name=f"{f.name}~cheb{n}",
        f=value,
        dini_d=p,
        second_d=p.deriv(),
        lipschitz_on=lambda r: float(np.max(np.abs(p(np.linspace(-min(r, m), min(r, m), 1001))))),
        tags=("c2", "polynomial_fit"),
    )
    return PolyDerivativeFit(fit, sup_err, n, m)


# -- decomposition of f(X) at a jump threshold --------------------------------


@dataclass(frozen=True)
class YaTerms:
    """The five constituent paths: initial value, big-jump compensation sum,
    the discrete integral against the semimartingale part, the compensated
    small-jump part (samples minus analytic drift) and the fixed-time
    small-jump sample sum."""

    initial: CadlagPath
    big_jumps: CadlagPath
    dz_integral: CadlagPath
    compensated_small: CadlagPath
    fixed_time_sum: CadlagPath


@dataclass(frozen=True)
class YaDecomposition:
    a: float
    y_path: CadlagPath
    gamma_path: CadlagPath
    terms: YaTerms
    transform: Transform
    sample: object = field(repr=False)
    level: int = 0

    def __post_init__(self):
        if self.gamma_path.jumps:
            raise ValueError("the residual part must be continuous")


def _left_point_trace(level_pts, level_vals, weights, eval_pts, eval_vals):
    """Running sum of ``w(t_i) * (V(min(t_{i+1}, u)) - V(t_i))`` over cells,
    evaluated at ``eval_pts`` (which must contain all ``level_pts``)."""
    full = weights[:-1] * np.diff(level_vals)
    cum = np.concatenate(([0.0], np.cumsum(full)))
    idx = np.clip(np.searchsorted(level_pts, eval_pts, side="right") - 1, 0, level_pts.size - 1)
    return cum[idx] + weights[idx] * (eval_vals - level_vals[idx])


def build_ya(f: Transform, sample, a: float, seq: RefiningSequence, k: int) -> YaDecomposition:
    """Split ``f(X)`` into a semimartingale-style part and a continuous
    residual at jump threshold ``a``.

    ``sample`` must expose ``path``, ``decomposition`` and ``model`` (as
    produced by :func:`quadvar.models.sample_path`); the model supplies the
    analytic small-jump compensator drift.  The assembled part carries
    exactly the jumps of ``f(X)`` (they telescope across the constituent
    terms), so the residual is continuous by construction.
    """
    if a <= 0:
        raise ValueError("threshold must be positive")
    path: CadlagPath = sample.path
    decomp = sample.decomposition
    model = sample.model
    horizon = path.horizon

    level_pts = seq.level(k)
    pts = np.union1d(path.breakpoints(), level_pts)
    # positions of the partition points inside the evaluation grid
    level_idx = np.searchsorted(pts, level_pts)

    x_pts = path.values(pts)
    x_level = x_pts[level_idx]
    fx_pts = np.asarray(f.f(x_pts), dtype=float)
    f0 = float(f.f(path.value(0.0)))

    jt = path._jump_times
    js = path._jump_sizes
    fixed = np.array([j.fixed_time for j in path.jumps], dtype=bool)
    x_at = path.values(jt) if jt.size else np.empty(0)
    x_before = x_at - js
    dini_before = np.asarray(f.dini_d(x_before), dtype=float) if jt.size else np.empty(0)
    df_jumps = np.asarray(f.f(x_at), dtype=float) - np.asarray(f.f(x_before), dtype=float)

    big = np.abs(js) > a
    small_free = (~big) & (~fixed)
    small_fixed = (~big) & fixed

    # the compensator drift of non-fixed small jumps, left-point discretised
    needs_compensator = bool(np.any(small_free))
    drift_on_pts = np.zeros_like(pts)
    if needs_compensator or (model is not None and getattr(model, "compound_poisson", None)):
        cp = getattr(model, "compound_poisson", None) if model is not None else None
        if cp is None:
            if needs_compensator:
                raise UnsupportedModelError(
                    "small-jump compensation needs compound-Poisson metadata on the model"
                )
        else:
            excess = cp.law.excess_mean(f, a)
            g_vals = cp.intensity * np.asarray(excess(x_level), dtype=float)
            drift_on_pts = _left_point_trace(level_pts, level_pts, g_vals, pts, pts)

    # discrete integral of f'(X_-) against the semimartingale part:
    # continuous Riemann trace against Z stripped of jumps + exact jump terms
    mart, fv = decomp.mart, decomp.fv
    zc_pts = np.interp(pts, mart.grid, mart.cont_values) + np.interp(pts, fv.grid, fv.cont_values)
    w = np.asarray(f.dini_d(x_level), dtype=float)
    dz_trace = _left_point_trace(level_pts, zc_pts[level_idx], w, pts, zc_pts)

    def jump_path(mask, sizes) -> CadlagPath:
        events = tuple(
            JumpEvent(float(t), float(sz), bool(fx))
            for t, sz, fx, keep in zip(jt, sizes, fixed, mask)
            if keep and sz != 0.0
        )
        return CadlagPath(horizon, np.asarray([0.0, horizon]), np.zeros(2), events)

    taylor = df_jumps - js * dini_before
    terms = YaTerms(
        initial=CadlagPath(horizon, np.asarray([0.0, horizon]), np.full(2, f0)),
        big_jumps=jump_path(big, taylor),
        dz_integral=CadlagPath(
            horizon,
            pts,
            dz_trace,
            tuple(
                JumpEvent(float(t), float(sz), bool(fx))
                for t, sz, fx in zip(jt, dini_before * js, fixed)
                if sz != 0.0
            ),
        ),
        compensated_small=CadlagPath(
            horizon, pts, -drift_on_pts, jump_path(small_free, taylor).jumps
        ),
        fixed_time_sum=jump_path(small_fixed, taylor),
    )

    # assembled directly: continuous part from the term traces, jumps exactly
    # those of f(X) (the per-jump pieces telescope to f(X_s) - f(X_s-))
    y_cont = f0 + dz_trace - drift_on_pts
    y_jumps = tuple(
        JumpEvent(float(t), float(sz), bool(fx))
        for t, sz, fx in zip(jt, df_jumps, fixed)
        if sz != 0.0
    )
    y_path = CadlagPath(horizon, pts, y_cont, y_jumps)

    cum_df = np.zeros_like(pts)
    if jt.size:
        nonzero = df_jumps != 0.0
        if np.any(nonzero):
            prefix = np.concatenate(([0.0], np.cumsum(df_jumps[nonzero])))
            cum_df = prefix[np.searchsorted(jt[nonzero], pts, side="right")]
    gamma_cont = fx_pts - cum_df - y_cont
    gamma_path = CadlagPath(horizon, pts, gamma_cont)

    return YaDecomposition(
        a=a, y_path=y_path, gamma_path=gamma_path, terms=terms,
        transform=f, sample=sample, level=k,
    )


def gamma_qv_trend(decomp: YaDecomposition, seq: RefiningSequence, k_list) -> list[float]:
    """Partial QV of the continuous residual across levels, rebuilding the
    decomposition at each level so every quantity lives on one partition."""
    out = []
    for k in k_list:
        d = build_ya(decomp.transform, decomp.sample, decomp.a, seq, k)
        out.append(partial_qv(d.gamma_path, seq, k))
    return out

"""Jump-size laws with exact truncated moments.

Each law can sample sizes and evaluate the truncated means that the
compensated operations need in closed form: ``E[J 1{|J| < a}]``,
``E[J^2 1{|J| < a}]`` (strict and inclusive variants) and the transform
excess mean ``E[(f(z + J) - f(z) - J f'(z)) 1{|J| <= a}]``.  The latter is
a one-dimensional integral against the density, evaluated by fixed
Gauss-Legendre quadrature split at the transform's kinks (exact for
polynomial transforms, deterministic for the rest).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["JumpLaw", "UniformLaw", "TruncatedNormalLaw", "CategoricalLaw", "PointMassLaw"]

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(64)


class JumpLaw:
    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        raise NotImplementedError

    def mean_below(self, a: float, inclusive: bool = False) -> float:
        """``E[J 1{|J| < a}]`` (or ``<= a``)."""
        raise NotImplementedError

    def m2_below(self, a: float, inclusive: bool = False) -> float:
        """``E[J^2 1{|J| < a}]`` (or ``<= a``)."""
        raise NotImplementedError

    def abs_mean_below(self, a: float, inclusive: bool = False) -> float:
        """``E[|J| 1{|J| < a}]`` (or ``<= a``)."""
        raise NotImplementedError

    def excess_mean(self, f, a: float):
        """Return a vectorised ``z -> E[(f(z+J) - f(z) - J f'(z)) 1{|J| <= a}]``."""
        raise NotImplementedError


def _split_points(lo: float, hi: float, interior: list[float]) -> np.ndarray:
    pts = [lo] + sorted(p for p in interior if lo < p < hi) + [hi]
    return np.asarray(pts)


class _DensityLaw(JumpLaw):
    """Law with a density on a bounded support; quadrature-based moments."""

    lo: float
    hi: float

    def density(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _integrate(self, fn, lo: float, hi: float, kinks=()) -> float:
        if hi <= lo:
            return 0.0
        total = 0.0
        cuts = _split_points(lo, hi, list(kinks))
        for left, right in zip(cuts[:-1], cuts[1:]):
            half = 0.5 * (right - left)
            mid = 0.5 * (right + left)
            xs = mid + half * _GL_NODES
            total += half * float(np.sum(_GL_WEIGHTS * fn(xs) * self.density(xs)))
        return total

    def _band(self, a: float) -> tuple[float, float]:
        return max(self.lo, -a), min(self.hi, a)

    def mean_below(self, a: float, inclusive: bool = False) -> float:
        lo, hi = self._band(a)
        return self._integrate(lambda x: x, lo, hi)

    def m2_below(self, a: float, inclusive: bool = False) -> float:
        lo, hi = self._band(a)
        return self._integrate(lambda x: x * x, lo, hi)

    def abs_mean_below(self, a: float, inclusive: bool = False) -> float:
        lo, hi = self._band(a)
        return self._integrate(np.abs, lo, hi, kinks=(0.0,))

    def excess_mean(self, f, a: float):
        lo, hi = self._band(a)

        poly = f.f if isinstance(f.f, np.polynomial.Polynomial) else None
        if poly is not None and not f.kinks:
            # Taylor is exact for polynomials:
            # E[f(z+J) - f(z) - J f'(z)] = sum_{m>=2} f^(m)(z)/m! * E[J^m 1{band}]
            moments = [self._integrate(lambda x, m=m: x**m, lo, hi) for m in range(2, poly.degree() + 1)]
            derivs = [poly.deriv(m) for m in range(2, poly.degree() + 1)]
            factorials = [float(math.factorial(m)) for m in range(2, poly.degree() + 1)]

            def poly_value(z):
                z = np.atleast_1d(np.asarray(z, dtype=float))
                out = np.zeros_like(z)
                for mom, der, fact in zip(moments, derivs, factorials):
                    if mom != 0.0:
                        out += (mom / fact) * der(z)
                return out

            return poly_value

        def smooth_value(z):
            # no derivative kinks: one vectorised quadrature panel over z
            z = np.atleast_1d(np.asarray(z, dtype=float))
            if hi <= lo:
                return np.zeros_like(z)
            half = 0.5 * (hi - lo)
            xs = 0.5 * (hi + lo) + half * _GL_NODES
            fz = np.asarray(f.f(z), dtype=float)[:, None]
            dz = np.asarray(f.dini_d(z), dtype=float)[:, None]
            integrand = np.asarray(f.f(z[:, None] + xs[None, :]), dtype=float) - fz - xs[None, :] * dz
            return half * (integrand * self.density(xs)[None, :]) @ _GL_WEIGHTS

        def kinked_value(z):
            # split each quadrature where z + x crosses a kink of f'
            z = np.atleast_1d(np.asarray(z, dtype=float))
            out = np.empty_like(z)
            for i, zi in enumerate(z):
                fz = float(f.f(zi))
                dz = float(f.dini_d(zi))
                cuts = [c - zi for c in f.kinks]
                out[i] = self._integrate(
                    lambda x: np.asarray(f.f(zi + x), dtype=float) - fz - x * dz,
                    lo, hi, kinks=cuts,
                )
            return out

        return kinked_value if f.kinks else smooth_value


@dataclass(frozen=True)
class UniformLaw(_DensityLaw):
    lo: float = -1.0
    hi: float = 1.0

    def density(self, x):
        return np.full_like(np.asarray(x, dtype=float), 1.0 / (self.hi - self.lo))

    def sample(self, rng, size):
        return rng.uniform(self.lo, self.hi, size)


@dataclass(frozen=True)
class TruncatedNormalLaw(_DensityLaw):
    """Normal(mu, sigma) conditioned on ``[lo, hi]`` (rejection sampling)."""

    mu: float = 0.0
    sigma: float = 0.5
    lo: float = -1.0
    hi: float = 1.0

    def _mass(self) -> float:
        from scipy.stats import norm

        return float(norm.cdf((self.hi - self.mu) / self.sigma) - norm.cdf((self.lo - self.mu) / self.sigma))

    def density(self, x):
        x = np.asarray(x, dtype=float)
        z = (x - self.mu) / self.sigma
        base = np.exp(-0.5 * z * z) / (self.sigma * np.sqrt(2.0 * np.pi))
        return np.where((x >= self.lo) & (x <= self.hi), base / self._mass(), 0.0)

    def sample(self, rng, size):
        out = np.empty(size)
        filled = 0
        while filled < size:
            draw = rng.normal(self.mu, self.sigma, max(size - filled, 16))
            ok = draw[(draw >= self.lo) & (draw <= self.hi)]
            take = min(ok.size, size - filled)
            out[filled : filled + take] = ok[:take]
            filled += take
        return out


@dataclass(frozen=True)
class CategoricalLaw(JumpLaw):
    """Finite support with explicit probabilities; moments are exact sums."""

    atoms: tuple[float, ...]
    probs: tuple[float, ...] | None = None

    def _p(self) -> np.ndarray:
        if self.probs is None:
            return np.full(len(self.atoms), 1.0 / len(self.atoms))
        return np.asarray(self.probs, dtype=float)

    def sample(self, rng, size):
        return rng.choice(np.asarray(self.atoms, dtype=float), size=size, p=self._p())

    def _mask(self, a: float, inclusive: bool) -> np.ndarray:
        atoms = np.abs(np.asarray(self.atoms, dtype=float))
        return atoms <= a if inclusive else atoms < a

    def mean_below(self, a, inclusive: bool = False):
        atoms = np.asarray(self.atoms, dtype=float)
        return float(np.sum(atoms * self._p() * self._mask(a, inclusive)))

    def m2_below(self, a, inclusive: bool = False):
        atoms = np.asarray(self.atoms, dtype=float)
        return float(np.sum(atoms**2 * self._p() * self._mask(a, inclusive)))

    def abs_mean_below(self, a, inclusive: bool = False):
        atoms = np.asarray(self.atoms, dtype=float)
        return float(np.sum(np.abs(atoms) * self._p() * self._mask(a, inclusive)))

    def excess_mean(self, f, a: float):
        atoms = np.asarray(self.atoms, dtype=float)
        probs = self._p()
        keep = np.abs(atoms) <= a

        def value(z):
            z = np.atleast_1d(np.asarray(z, dtype=float))
            fz = np.asarray(f.f(z), dtype=float)
            dz = np.asarray(f.dini_d(z), dtype=float)
            out = np.zeros_like(z)
            for atom, p, ok in zip(atoms, probs, keep):
                if ok:
                    out += p * (np.asarray(f.f(z + atom), dtype=float) - fz - atom * dz)
            return out

        return value


def PointMassLaw(value: float) -> CategoricalLaw:
    return CategoricalLaw(atoms=(float(value),), probs=(1.0,))

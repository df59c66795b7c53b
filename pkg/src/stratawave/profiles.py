"""Piecewise-smooth scalar profiles with a single interior breakpoint.

Density and shear profiles of a two-layer column are smooth on each layer
but may jump (value and/or derivative) at the internal interface.  A
``PiecewiseProfile`` keeps the two branches separate so that one-sided
values at the breakpoint are always well defined.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import InterpolatedUnivariateSpline


def _fd_derivative(f: Callable, lo: float, hi: float) -> Callable:
    """Fourth-order central difference, nudged inward near branch ends."""

    span = hi - lo

    def df(x):
        x = np.asarray(x, dtype=float)
        # step small against the branch but large against roundoff; the
        # min() keeps the 5-point stencil inside very thin branches
        h = min(1e-4 * max(span, 1.0), span / 8.0) if span > 0 else 1e-8
        xc = np.clip(x, lo + 2 * h, hi - 2 * h)
        return (f(xc - 2 * h) - 8 * f(xc - h) + 8 * f(xc + h) - f(xc + 2 * h)) / (12 * h)

    return df


@dataclass(frozen=True)
class Branch:
    """One smooth branch of a profile on the closed interval [lo, hi]."""

    lo: float
    hi: float
    f: Callable
    df: Callable

    def __call__(self, x):
        return np.asarray(self.f(np.asarray(x, dtype=float)), dtype=float)

    def deriv(self, x):
        return np.asarray(self.df(np.asarray(x, dtype=float)), dtype=float)


class PiecewiseProfile:
    """Scalar profile on [lo, hi] with one interior breakpoint.

    Branches are supplied either as callables (optionally with analytic
    derivatives) or as sampled tables, which are interpolated with quintic
    splines per branch.
    """

    def __init__(self, breakpoint: float, lower: Callable, upper: Callable,
                 domain=(-1.0, 0.0),
                 lower_deriv: Optional[Callable] = None,
                 upper_deriv: Optional[Callable] = None):
        lo, hi = float(domain[0]), float(domain[1])
        bp = float(breakpoint)
        if not (lo < bp < hi):
            raise ValueError(f"breakpoint {bp} not interior to domain ({lo}, {hi})")
        self.breakpoint = bp
        self.domain = (lo, hi)
        lower_v = _vectorize(lower)
        upper_v = _vectorize(upper)
        self.lower = Branch(lo, bp, lower_v,
                            _vectorize(lower_deriv) if lower_deriv else _fd_derivative(lower_v, lo, bp))
        self.upper = Branch(bp, hi, upper_v,
                            _vectorize(upper_deriv) if upper_deriv else _fd_derivative(upper_v, bp, hi))
        self._validate()

    # ------------------------------------------------------------------
    @classmethod
    def from_samples(cls, breakpoint: float, x: np.ndarray, y: np.ndarray,
                     domain=(-1.0, 0.0)) -> "PiecewiseProfile":
        """Build from a sampled table.

        Rows with ``x <= breakpoint`` feed the lower branch and rows with
        ``x >= breakpoint`` the upper branch; a duplicated breakpoint row
        supplies the two one-sided values.
        """
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        order = np.argsort(x, kind="stable")
        x, y = x[order], y[order]
        bp = float(breakpoint)
        mlo = x <= bp + 1e-14 * max(1.0, abs(bp))
        mup = x >= bp - 1e-14 * max(1.0, abs(bp))
        # a duplicated breakpoint abscissa: first copy belongs below, second above
        dup = np.flatnonzero(np.isclose(x, bp, rtol=0, atol=1e-12))
        if dup.size >= 2:
            mlo[dup[1:]] = False
            mup[dup[:-1]] = False
        for mask, name in ((mlo, "lower"), (mup, "upper")):
            if np.count_nonzero(mask) < 6:
                raise ValueError(f"need at least 6 samples on the {name} branch for quintic interpolation")
        slo = InterpolatedUnivariateSpline(x[mlo], y[mlo], k=5)
        sup = InterpolatedUnivariateSpline(x[mup], y[mup], k=5)
        return cls(bp, slo, sup, domain=domain,
                   lower_deriv=slo.derivative(), upper_deriv=sup.derivative())

    @classmethod
    def constant(cls, value: float, breakpoint: float, domain=(-1.0, 0.0)) -> "PiecewiseProfile":
        v = float(value)
        return cls(breakpoint, lambda x: np.full_like(np.asarray(x, float), v),
                   lambda x: np.full_like(np.asarray(x, float), v), domain=domain,
                   lower_deriv=lambda x: np.zeros_like(np.asarray(x, float)),
                   upper_deriv=lambda x: np.zeros_like(np.asarray(x, float)))

    # ------------------------------------------------------------------
    def _validate(self):
        for br in (self.lower, self.upper):
            xs = np.linspace(br.lo, br.hi, 33)
            vals = br(xs)
            if not np.all(np.isfinite(vals)):
                raise ValueError("profile branch evaluates to non-finite values")

    def branch(self, side: str) -> Branch:
        if side in ("-", "lower", "lo"):
            return self.lower
        if side in ("+", "upper", "up"):
            return self.upper
        raise ValueError(f"unknown side {side!r}")

    def __call__(self, x, side: Optional[str] = None):
        """Evaluate; at the breakpoint ``side`` picks the one-sided value ('+' default)."""
        if side is not None:
            return self.branch(side)(x)
        x = np.asarray(x, dtype=float)
        out = np.where(x < self.breakpoint, self.lower(np.minimum(x, self.breakpoint)),
                       self.upper(np.maximum(x, self.breakpoint)))
        return out if out.shape else float(out)

    def deriv(self, x, side: str):
        return self.branch(side).deriv(x)

    def jump(self) -> float:
        """Upper minus lower one-sided value at the breakpoint."""
        return float(self.upper(self.breakpoint) - self.lower(self.breakpoint))

    def rescale(self, factor: float, domain_factor: float = 1.0) -> "PiecewiseProfile":
        """Return factor*f(domain_factor * x) on the shrunken/stretched domain."""
        a = float(factor)
        s = float(domain_factor)
        lo, hi = self.domain
        low, upp = self.lower, self.upper
        return PiecewiseProfile(
            self.breakpoint / s,
            lambda x: a * low(s * np.asarray(x, float)),
            lambda x: a * upp(s * np.asarray(x, float)),
            domain=(lo / s, hi / s),
            lower_deriv=lambda x: a * s * low.deriv(s * np.asarray(x, float)),
            upper_deriv=lambda x: a * s * upp.deriv(s * np.asarray(x, float)),
        )


def _vectorize(f: Callable) -> Callable:
    """Wrap scalar-only callables so they accept arrays."""

    def wrapped(x):
        x = np.asarray(x, dtype=float)
        try:
            out = np.asarray(f(x), dtype=float)
            if out.shape == x.shape:
                return out
        except (TypeError, ValueError):
            pass
        return np.asarray([f(float(v)) for v in np.atleast_1d(x)], dtype=float).reshape(x.shape)

    return wrapped

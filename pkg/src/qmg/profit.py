"""Profit intensity of a price-eigenstate strategy facing a Gaussian market.

In units of the market's dispersion the intensity at withholding threshold
``a`` is ``phi(a) / (1 + Phi(-a))``. Its maximizer satisfies
``a (1 + Phi(-a)) = phi(a)``, i.e. the maximal intensity equals the
threshold that attains it (about 0.27603).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import NumericalError, ValidationError
from .numerics import normal_cdf, normal_pdf

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class IntensitySpec:
    sigma: float = 1.0
    a_range: tuple[float, float] | None = None

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValidationError(f"sigma must be positive, got {self.sigma}")
        lo, hi = self.interval
        if not (0.0 <= lo < hi <= 3.0 * self.sigma * (1 + 1e-12)):
            raise ValidationError(f"a_range must satisfy 0 <= lo < hi <= 3 sigma, got {(lo, hi)}")

    @property
    def interval(self) -> tuple[float, float]:
        if self.a_range is None:
            return 0.0, 3.0 * self.sigma
        return float(self.a_range[0]), float(self.a_range[1])


def profit_intensity(a: float, spec: IntensitySpec = IntensitySpec()) -> float:
    if a < 0:
        raise ValidationError(f"threshold must be >= 0, got {a}")
    z = a / spec.sigma
    return spec.sigma * normal_pdf(z) / (1.0 + normal_cdf(-z))


def stationarity_residual(a: float) -> float:
    """``a (1 + Phi(-a)) - phi(a)`` in normalized units; zero at the maximizer."""
    return a * (1.0 + normal_cdf(-a)) - normal_pdf(a)


# A flat maximum is only located to about sqrt(machine epsilon).
_ARGMAX_FLOOR = 1e-8


def fixed_point(spec: IntensitySpec = IntensitySpec(), tol: float = 1e-8) -> tuple[float, float]:
    """Golden-section maximization of the intensity on ``spec.a_range``.

    Returns ``(a_star, rho_star)``. The maximum must be interior and must be a
    fixed point of the intensity, ``rho(a_star) == a_star`` within ``10 tol``
    (``tol`` floored at 1e-8, the resolution of a comparison-based search).
    """
    if not tol > 0:
        raise ValidationError(f"tol must be positive, got {tol}")
    a, b = spec.interval

    def f(x):
        return profit_intensity(x, spec)

    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = f(d)
    a_star = 0.5 * (a + b)
    lo, hi = spec.interval
    if a_star - lo <= 10 * tol or hi - a_star <= 10 * tol:
        raise NumericalError(f"no interior maximum on [{lo}, {hi}] (search ended at {a_star})")
    rho_star = f(a_star)
    if abs(rho_star - a_star) > 10 * max(tol, _ARGMAX_FLOOR) * max(1.0, spec.sigma):
        raise NumericalError(f"maximum {rho_star} at {a_star} is not a fixed point")
    return a_star, rho_star

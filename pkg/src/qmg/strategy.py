"""Trader strategies: amplitudes over log-price and their named families.

A pure strategy is an amplitude ``psi(q)`` in the demand representation,
``q = ln c - E(ln c)``. Its supply representation over ``p = -q`` is the
conjugate transform from :mod:`qmg.numerics`. Price eigenstates are not
square integrable and are kept symbolic: only their proper value is stored
and their buy/sell probabilities are exact step functions.

Sign convention: the transform uses ``exp(+i p q / hbar_E)``, so the supply
operator acts as ``P = i hbar_E d/dq`` on demand amplitudes and a state with
mean supply ``p0`` carries the phase ``exp(-i p0 q / hbar_E)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Literal

import numpy as np

from .errors import ValidationError
from .numerics import (
    DEFAULT_GRID,
    DEFAULT_H_E,
    TWO_PI,
    ComplexField1D,
    Grid1D,
    cumulative_at,
    cumulative_integral,
    fourier_pair,
    hermite_fn,
    integrate,
    inverse_fourier_pair,
)

Rep = Literal["demand", "supply"]

# Supply grid resolution target, as a fraction of hbar_E.
_SUPPLY_SPACING = 1.0 / 50.0
_MAX_SUPPLY_POINTS = 1 << 18


def _supply_pad(grid: Grid1D, h_E: float) -> int:
    hbar = h_E / TWO_PI
    pad = 1
    while h_E / (pad * grid.n * grid.h) > _SUPPLY_SPACING * hbar and pad * grid.n < _MAX_SUPPLY_POINTS:
        pad *= 2
    return pad


class Strategy:
    """Common base of :class:`PureStrategy` and :class:`PriceEigenstate`."""

    h_E: float

    @property
    def hbar(self) -> float:
        return self.h_E / TWO_PI


@dataclass(frozen=True, eq=False)
class PureStrategy(Strategy):
    """Square-integrable strategy stored as its demand amplitude.

    ``supply_amplitude`` may be given when the strategy was defined in the
    supply representation; otherwise it is derived on first use and cached.
    """

    amplitude: ComplexField1D
    h_E: float = DEFAULT_H_E
    supply_amplitude: ComplexField1D | None = field(default=None, repr=False)

    def __post_init__(self):
        if not self.h_E > 0:
            raise ValidationError(f"h_E must be positive, got {self.h_E}")
        if not self.norm2 > 0:
            raise ValidationError("strategy amplitude has zero norm")

    @property
    def grid(self) -> Grid1D:
        return self.amplitude.grid

    @cached_property
    def norm2(self) -> float:
        return self.amplitude.norm2()

    @cached_property
    def supply(self) -> ComplexField1D:
        if self.supply_amplitude is not None:
            return self.supply_amplitude
        return fourier_pair(self.amplitude, self.h_E, pad=_supply_pad(self.grid, self.h_E))

    # normalized densities and their running integrals

    @cached_property
    def _q_density(self):
        f = self.amplitude.density / self.norm2
        F = cumulative_integral(f, self.grid)
        return f, F / F[-1]

    @cached_property
    def _p_density(self):
        sup = self.supply
        f = sup.density
        F = cumulative_integral(f, sup.grid)
        return f / F[-1], F / F[-1]

    def demand_density(self) -> np.ndarray:
        return self._q_density[0]

    def supply_density(self) -> np.ndarray:
        return self._p_density[0]

    def demand_cdf(self, q):
        f, F = self._q_density
        return cumulative_at(q, self.grid, f, F)

    def supply_cdf(self, p):
        f, F = self._p_density
        return cumulative_at(p, self.supply.grid, f, F)

    @cached_property
    def moments(self) -> "Moments":
        return _moments(self)


@dataclass(frozen=True)
class PriceEigenstate(Strategy):
    """Symbolic eigenstate of the demand (``rep="demand"``) or supply operator."""

    rep: Rep
    point: float
    h_E: float = DEFAULT_H_E

    def __post_init__(self):
        if self.rep not in ("demand", "supply"):
            raise ValidationError(f"rep must be 'demand' or 'supply', got {self.rep!r}")
        if not math.isfinite(self.point):
            raise ValidationError("eigenstate proper value must be finite")


@dataclass(frozen=True)
class TraderDeclaration:
    """One trader's submission: strategy, asset units ``s`` and money ``d``.

    ``demand_locked`` marks a trader whose demand side is being measured
    continuously; such a trader offers no supply moves to the clearinghouse.
    """

    trader_id: int
    strategy: Strategy
    s: float
    d: float
    demand_locked: bool = False

    def __post_init__(self):
        if not (self.s >= 0 and self.d >= 0):
            raise ValidationError(f"trader {self.trader_id}: capitals must be >= 0")
        if not self.s + self.d > 0:
            raise ValidationError(f"trader {self.trader_id}: declares no capital")


@dataclass(frozen=True)
class RiskParams:
    """Parameters of the risk inclination functional.

    ``theta`` is the characteristic transaction time, ``omega = 2 pi/theta``;
    ``theta_nc`` is the noncommutativity parameter, which shifts the
    effective constant to ``h_eff = sqrt(h_E**2 + theta_nc**2)``.
    """

    m: float = 1.0
    theta: float = TWO_PI
    h_E: float = DEFAULT_H_E
    theta_nc: float = 0.0

    def __post_init__(self):
        if not (self.m > 0 and self.theta > 0 and self.h_E > 0):
            raise ValidationError("m, theta and h_E must be positive")
        if not self.theta_nc >= 0:
            raise ValidationError("theta_nc must be >= 0")

    @property
    def omega(self) -> float:
        return TWO_PI / self.theta

    @property
    def h_eff(self) -> float:
        return math.hypot(self.h_E, self.theta_nc)

    @property
    def hbar_eff(self) -> float:
        return self.h_eff / TWO_PI

    @property
    def ground_energy(self) -> float:
        return 0.5 * self.hbar_eff * self.omega


# -- representations and probabilities ----------------------------------------


def normalize(s: Strategy) -> Strategy:
    if isinstance(s, PriceEigenstate):
        return s
    scale = 1.0 / math.sqrt(s.norm2)
    if abs(scale - 1.0) < 1e-15:
        return s
    sup = None
    if s.supply_amplitude is not None:
        sup = ComplexField1D(s.supply_amplitude.grid, s.supply_amplitude.samples * scale)
    return PureStrategy(ComplexField1D(s.grid, s.amplitude.samples * scale), s.h_E, sup)


def supply_rep(s: Strategy) -> ComplexField1D:
    if isinstance(s, PriceEigenstate):
        raise ValidationError("price eigenstates have no gridded supply representation")
    return s.supply


def buy_cdf(s: Strategy, ln_c):
    """Probability of buying at price ``c`` or lower (running demand integral)."""
    if isinstance(s, PriceEigenstate):
        if s.rep != "demand":
            raise ValidationError("buy_cdf of a supply eigenstate is undefined")
        out = np.where(np.asarray(ln_c, dtype=float) < s.point, 0.0, 1.0)
        return out if out.ndim else float(out)
    return s.demand_cdf(ln_c)


def sell_cdf(s: Strategy, ln_c):
    """Probability of selling: supply integral up to ``p = -ln c``."""
    upper = -np.asarray(ln_c, dtype=float)
    if isinstance(s, PriceEigenstate):
        if s.rep != "supply":
            raise ValidationError("sell_cdf of a demand eigenstate is undefined")
        out = np.where(upper >= s.point, 1.0, 0.0)
        return out if out.ndim else float(out)
    return s.supply_cdf(upper)


# -- moments -------------------------------------------------------------------


@dataclass(frozen=True)
class Moments:
    mean_q: float
    mean_p: float
    var_q: float
    var_p: float
    cov_pq: float

    @property
    def delta_q(self) -> float:
        return math.sqrt(self.var_q)

    @property
    def delta_p(self) -> float:
        return math.sqrt(self.var_p)

    @property
    def correlation(self) -> float:
        return self.cov_pq / math.sqrt(self.var_p * self.var_q)

    def uncertainty_product(self) -> float:
        """``dp * dq * sqrt(1 - r**2)``, i.e. the square root of the covariance determinant."""
        return math.sqrt(max(self.var_p * self.var_q - self.cov_pq ** 2, 0.0))


def _moments(s: PureStrategy) -> Moments:
    q = s.grid.points
    fq = s.demand_density()
    mq = integrate(q * fq, s.grid)
    vq = integrate((q - mq) ** 2 * fq, s.grid)
    sup = s.supply
    p = sup.grid.points
    fp = s.supply_density()
    mp = integrate(p * fp, sup.grid)
    vp = integrate((p - mp) ** 2 * fp, sup.grid)
    # symmetrized <QP + PQ>/2 = Re <psi| Q P |psi>, with P psi from the unpadded pair
    psi = s.amplitude.samples / math.sqrt(s.norm2)
    phi = fourier_pair(ComplexField1D(s.grid, psi), s.h_E)
    p_psi = inverse_fourier_pair(
        ComplexField1D(phi.grid, phi.grid.points * phi.samples), s.h_E, q_lo=s.grid.lo
    ).samples
    qp = integrate(np.real(np.conj(psi) * q * p_psi), s.grid)
    return Moments(mq, mp, vq, vp, qp - mq * mp)


def risk_expectation(s: Strategy, params: RiskParams) -> float:
    """Expected risk inclination ``E[(P-p0)^2]/2m + m w^2 E[(Q-q0)^2]/2``.

    ``p0`` and ``q0`` are the state's own means, so the value only depends on
    the central moments.
    """
    if isinstance(s, PriceEigenstate):
        raise ValidationError("risk of a price eigenstate is unbounded")
    mom = s.moments
    w = params.omega
    return mom.var_p / (2.0 * params.m) + params.m * w * w * mom.var_q / 2.0


# -- constructors --------------------------------------------------------------


def _check_resolved(amp: np.ndarray, grid: Grid1D, width: float, what: str):
    if width < 4 * grid.h:
        raise ValidationError(
            f"{what}: width {width:g} is below 4 grid spacings ({4 * grid.h:g})"
        )
    dens = np.abs(amp) ** 2
    peak = dens.max()
    if peak <= 0 or max(dens[0], dens[-1]) > 1e-10 * max(peak, 1.0):
        raise ValidationError(f"{what}: tails exceed 1e-10 at the grid edge; widen the grid")


def make_gaussian(q0: float, sigma_q: float, h_E: float = DEFAULT_H_E,
                  grid: Grid1D = DEFAULT_GRID) -> PureStrategy:
    """Real Gaussian amplitude whose demand density is ``N(q0, sigma_q**2)``."""
    if not sigma_q > 0:
        raise ValidationError(f"sigma_q must be positive, got {sigma_q}")
    q = grid.points
    amp = np.exp(-((q - q0) ** 2) / (4.0 * sigma_q ** 2))
    _check_resolved(amp, grid, sigma_q, "gaussian")
    return normalize(PureStrategy(ComplexField1D(grid, amp), h_E))


def make_coherent_correlated(r: float, eta: float, p0: float = 0.0, q0: float = 0.0,
                             h_E: float = DEFAULT_H_E,
                             grid: Grid1D = DEFAULT_GRID) -> PureStrategy:
    """Minimum-uncertainty Gaussian with supply/demand correlation ``r``.

    ``dq = eta / sqrt(1 - r**2)`` and ``dp = hbar_E / (2 eta)``, hence
    ``dp * dq * sqrt(1 - r**2) = hbar_E / 2``.
    """
    if not -1.0 < r < 1.0:
        raise ValidationError(f"correlation must lie in (-1, 1), got {r}")
    if not eta > 0:
        raise ValidationError(f"eta must be positive, got {eta}")
    hbar = h_E / TWO_PI
    dq = eta / math.sqrt(1.0 - r * r)
    dp = hbar / (2.0 * eta)
    chirp = r * dp / (2.0 * hbar * dq)
    x = grid.points - q0
    amp = np.exp(-x * x / (4.0 * dq * dq) - 1j * chirp * x * x - 1j * p0 * grid.points / hbar)
    _check_resolved(amp, grid, dq, "coherent strategy")
    return normalize(PureStrategy(ComplexField1D(grid, amp), h_E))


def make_oscillator_eigenstate(n: int, params: RiskParams, p0: float = 0.0, q0: float = 0.0,
                               grid: Grid1D = DEFAULT_GRID) -> PureStrategy:
    """n-th eigenstate of the risk inclination operator centered at ``(p0, q0)``.

    The returned strategy carries ``h_eff`` as its own Planck constant.
    """
    h = params.h_eff
    m_omega = params.m * params.omega
    x = grid.points - q0
    amp = hermite_fn(n, x, h, m_omega) * np.exp(-1j * p0 * grid.points / (h / TWO_PI))
    _check_resolved(amp, grid, math.sqrt(h / TWO_PI / m_omega), "oscillator eigenstate")
    return normalize(PureStrategy(ComplexField1D(grid, amp), h))


def make_uniform(lo: float, hi: float, h_E: float = DEFAULT_H_E,
                 grid: Grid1D = DEFAULT_GRID) -> PureStrategy:
    """Flat demand amplitude on ``[lo, hi]``."""
    if not lo < hi:
        raise ValidationError("uniform strategy needs lo < hi")
    q = grid.points
    amp = ((q >= lo) & (q <= hi)).astype(float)
    if amp.sum() < 4:
        raise ValidationError("uniform window covers fewer than 4 grid points")
    return normalize(PureStrategy(ComplexField1D(grid, amp), h_E))


def from_supply(phi: ComplexField1D, h_E: float = DEFAULT_H_E,
                q_lo: float | None = None) -> PureStrategy:
    """Strategy defined by its supply amplitude on ``phi.grid``.

    The demand amplitude lives on the conjugate grid (starting at ``q_lo``,
    centered by default); the given supply amplitude is kept verbatim for
    supply-side probabilities.
    """
    psi = inverse_fourier_pair(phi, h_E, q_lo=q_lo)
    return normalize(PureStrategy(psi, h_E, supply_amplitude=phi))


def make_uniform_supply(lo: float, hi: float, h_E: float = DEFAULT_H_E,
                        n: int = 4096, p_extent: float = 12.0) -> PureStrategy:
    """Flat supply amplitude on ``[lo, hi]`` over a centered supply grid."""
    if not lo < hi:
        raise ValidationError("uniform strategy needs lo < hi")
    dp = 2.0 * p_extent / n
    pg = Grid1D.from_spacing(-(n // 2) * dp, dp, n)
    p = pg.points
    amp = ((p >= lo) & (p <= hi)).astype(float)
    if amp.sum() < 4:
        raise ValidationError("uniform window covers fewer than 4 grid points")
    return from_supply(ComplexField1D(pg, amp), h_E)


def superpose(a: PureStrategy, b: PureStrategy, ca: complex = 1.0, cb: complex = 1.0) -> PureStrategy:
    """Normalized ``ca*a + cb*b`` of two strategies on the same grid."""
    if a.grid != b.grid or a.h_E != b.h_E:
        raise ValidationError("superposition needs a common grid and h_E")
    amp = ca * a.amplitude.samples / math.sqrt(a.norm2) + cb * b.amplitude.samples / math.sqrt(b.norm2)
    return normalize(PureStrategy(ComplexField1D(a.grid, amp), a.h_E))


def collapse_demand(s: Strategy, q_center: float, width: float) -> PureStrategy:
    """Project the demand amplitude onto ``[q_center - width/2, q_center + width/2]``.

    One repeated demand-side measurement: multiply by the window indicator and
    renormalize.
    """
    if isinstance(s, PriceEigenstate):
        raise ValidationError("cannot collapse a symbolic eigenstate")
    if width < 4 * s.grid.h:
        raise ValidationError(f"window width {width:g} is below 4 grid spacings")
    q = s.grid.points
    mask = np.abs(q - q_center) <= 0.5 * width
    amp = np.where(mask, s.amplitude.samples, 0.0)
    if not np.any(np.abs(amp) > 0):
        raise ValidationError("collapse window does not overlap the strategy")
    return normalize(PureStrategy(ComplexField1D(s.grid, amp), s.h_E))

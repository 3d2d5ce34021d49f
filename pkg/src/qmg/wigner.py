"""Phase-space pseudo-probabilities of strategies.

The Wigner field of a pure strategy is

    W(p, q) = h_E**-1 * integral exp(i p x / hbar_E) psi(q + x/2) conj(psi(q - x/2)) dx

whose marginals are the demand and supply densities. Fields are stored as
``values[i_p, i_q]`` on a pair of uniform grids. Negative values mark a
"giffen": cumulative slices of such a field are not monotone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import TruncationError, ValidationError
from .numerics import Grid1D, cumulative_integral, laguerre_damped
from .strategy import (
    PriceEigenstate,
    RiskParams,
    Strategy,
    make_oscillator_eigenstate,
)

#: Phase-space grid for analytic (thermal) fields.
PHASE_GRID = Grid1D(-16.0, 16.0, 512)

GIBBS_TAIL = 1e-10


def _trap_weights(grid: Grid1D) -> np.ndarray:
    w = np.full(grid.n, grid.h)
    w[0] = w[-1] = 0.5 * grid.h
    return w


@dataclass(frozen=True, eq=False)
class WignerField:
    p_grid: Grid1D
    q_grid: Grid1D
    values: np.ndarray
    h_E: float

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.p_grid.n, self.q_grid.n):
            raise ValidationError(
                f"field shape {v.shape} does not match grids ({self.p_grid.n}, {self.q_grid.n})"
            )
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    def _integrate(self, arr) -> float:
        return float(_trap_weights(self.p_grid) @ arr @ _trap_weights(self.q_grid))

    def total(self) -> float:
        return self._integrate(self.values)

    def marginal_q(self) -> np.ndarray:
        """Integral over p, one value per q grid point."""
        return _trap_weights(self.p_grid) @ self.values

    def marginal_p(self) -> np.ndarray:
        return self.values @ _trap_weights(self.q_grid)

    def mean_p(self) -> float:
        return self._integrate(self.p_grid.points[:, None] * self.values) / self.total()

    def mean_q(self) -> float:
        return self._integrate(self.values * self.q_grid.points[None, :]) / self.total()

    def covariance(self) -> np.ndarray:
        """2x2 covariance of (p, q) under the field."""
        tot = self.total()
        p = self.p_grid.points[:, None] - self.mean_p()
        q = self.q_grid.points[None, :] - self.mean_q()
        vpp = self._integrate(p * p * self.values) / tot
        vqq = self._integrate(q * q * self.values) / tot
        vpq = self._integrate(p * q * self.values) / tot
        return np.array([[vpp, vpq], [vpq, vqq]])

    def purity(self) -> float:
        """``h_E * integral W**2``; 1 for pure states, below 1 for mixtures."""
        return self.h_E * self._integrate(self.values ** 2)

    def __add__(self, other: "WignerField") -> "WignerField":
        _same_grids(self, other)
        return WignerField(self.p_grid, self.q_grid, self.values + other.values, self.h_E)

    def scaled(self, w: float) -> "WignerField":
        return WignerField(self.p_grid, self.q_grid, w * self.values, self.h_E)


def _same_grids(a: WignerField, b: WignerField):
    if a.p_grid != b.p_grid or a.q_grid != b.q_grid:
        raise ValidationError("fields live on different grids")


# -- pure and mixed strategies ---------------------------------------------------


def wigner_of_pure(s: Strategy, p_grid: Grid1D | None = None, rows: int = 256) -> WignerField:
    """Wigner field of a gridded strategy.

    The q axis takes every ``n/rows``-th point of the strategy grid so that
    ``q +/- x/2`` stays on grid nodes; the x integral is a trapezoid sum with
    step twice the grid spacing, evaluated for each requested p.
    The default p axis mirrors the extent of the strategy grid.
    """
    if isinstance(s, PriceEigenstate):
        raise ValidationError("price eigenstates have no Wigner field")
    grid = s.grid
    rows = min(rows, grid.n)
    q_grid = grid.subsample(grid.n // rows)
    if p_grid is None:
        half = max(abs(grid.lo), abs(grid.hi))
        p_grid = Grid1D(-half, half, rows)
    psi = s.amplitude.samples / math.sqrt(s.norm2)
    n, h, hbar = grid.n, grid.h, s.hbar
    M = n // 2
    padded = np.concatenate([np.zeros(M, complex), psi, np.zeros(M, complex)])
    idx = np.arange(0, n, grid.n // rows)[:, None]
    m = np.arange(M + 1)[None, :]
    corr = padded[M + idx + m] * np.conj(padded[M + idx - m])
    phase = np.exp(1j * np.outer(p_grid.points, 2.0 * h * np.arange(M + 1) / hbar))
    values = (2.0 * h / s.h_E) * (2.0 * np.real(phase @ corr.T) - corr[:, 0].real[None, :])
    return WignerField(p_grid, q_grid, values, s.h_E)


@dataclass(frozen=True)
class MixedStrategy:
    """Convex combination of pure strategies."""

    components: tuple[tuple[float, Strategy], ...]

    def __post_init__(self):
        comps = tuple((float(w), s) for w, s in self.components)
        if not comps:
            raise ValidationError("a mixed strategy needs at least one component")
        if any(w < 0 for w, _ in comps):
            raise ValidationError("mixture weights must be >= 0")
        total = sum(w for w, _ in comps)
        if abs(total - 1.0) > 1e-12:
            raise ValidationError(f"mixture weights sum to {total!r}, not 1")
        object.__setattr__(self, "components", comps)


def wigner_of_mixed(m: MixedStrategy, p_grid: Grid1D | None = None, rows: int = 256) -> WignerField:
    out = None
    for w, s in m.components:
        f = wigner_of_pure(s, p_grid, rows).scaled(w)
        out = f if out is None else out + f
    return out


# -- Cournot curves --------------------------------------------------------------


class Curve(NamedTuple):
    ln_c: np.ndarray
    F: np.ndarray


def _interp_axis(values: np.ndarray, grid: Grid1D, x: float, axis: int) -> np.ndarray:
    if not grid.contains(x):
        raise ValidationError(f"slice at {x} lies outside [{grid.lo}, {grid.hi}]")
    t = (x - grid.lo) / grid.h
    i = min(int(math.floor(t)), grid.n - 2)
    frac = t - i
    a = np.take(values, i, axis=axis)
    b = np.take(values, i + 1, axis=axis)
    return (1.0 - frac) * a + frac * b


def demand_curve(field: WignerField, p_const: float | None = None) -> Curve:
    """Running integral over q of the field at fixed p (default: the mean p)."""
    if p_const is None:
        p_const = field.mean_p()
    row = _interp_axis(field.values, field.p_grid, p_const, axis=0)
    return Curve(field.q_grid.points.copy(), cumulative_integral(row, field.q_grid))


def supply_curve(field: WignerField, q_const: float | None = None) -> Curve:
    """Running integral over p up to ``-ln c`` at fixed q (default: the mean q).

    Returned on ascending ``ln c = -p``.
    """
    if q_const is None:
        q_const = field.mean_q()
    col = _interp_axis(field.values, field.q_grid, q_const, axis=1)
    F = cumulative_integral(col, field.p_grid)
    return Curve(-field.p_grid.points[::-1].copy(), F[::-1].copy())


def is_monotone(F: np.ndarray, increasing: bool = True, tol: float = 1e-9) -> bool:
    """Monotone up to ``tol`` relative to the curve's largest magnitude."""
    dF = np.diff(F) if increasing else -np.diff(F)
    scale = max(float(np.max(np.abs(F))), 1e-300)
    return bool(dF.min() >= -tol * scale)


# -- giffens and Gaussianity -----------------------------------------------------


class GiffenReport(NamedTuple):
    giffen: bool
    p: float
    q: float
    value: float

    def __bool__(self) -> bool:
        return self.giffen


def is_giffen(field: WignerField, tol: float | None = None) -> GiffenReport:
    """Flags a field whose minimum drops below ``-tol`` (default 1e-8 of max |W|)."""
    v = field.values
    if tol is None:
        tol = 1e-8 * float(np.max(np.abs(v)))
    ip, iq = np.unravel_index(int(np.argmin(v)), v.shape)
    vmin = float(v[ip, iq])
    return GiffenReport(vmin < -tol, float(field.p_grid.points[ip]), float(field.q_grid.points[iq]), vmin)


def _excess_kurtosis(x: np.ndarray, f: np.ndarray, grid: Grid1D) -> float:
    w = _trap_weights(grid)
    f = f / (w @ f)
    mu = w @ (x * f)
    var = w @ ((x - mu) ** 2 * f)
    return float(w @ ((x - mu) ** 4 * f) / var ** 2 - 3.0)


def hudson_check(s: Strategy, field: WignerField | None = None) -> bool:
    """Whether a pure strategy is Gaussian.

    Both marginals must have excess kurtosis below 1e-4 in magnitude and the
    Wigner field must stay above -1e-6. For pure states this coincides with
    the field having no negative region.
    """
    if isinstance(s, PriceEigenstate):
        raise ValidationError("price eigenstates are not pure gridded strategies")
    kq = _excess_kurtosis(s.grid.points, s.demand_density(), s.grid)
    kp = _excess_kurtosis(s.supply.grid.points, s.supply_density(), s.supply.grid)
    if field is None:
        field = wigner_of_pure(s)
    return abs(kq) < 1e-4 and abs(kp) < 1e-4 and float(field.values.min()) >= -1e-6


# -- thermal strategies ----------------------------------------------------------


@dataclass(frozen=True)
class GibbsSpec:
    """Gibbs mixture of oscillator eigenstates at inverse temperature ``beta``.

    ``n_max=None`` picks the smallest truncation whose discarded weight is
    below 1e-10. ``beta=inf`` is the ground state.
    """

    beta: float
    params: RiskParams = RiskParams()
    n_max: int | None = None
    p0: float = 0.0
    q0: float = 0.0

    def __post_init__(self):
        if not self.beta > 0:
            raise ValidationError(f"beta must be positive, got {self.beta}")
        if self.n_max is not None and (int(self.n_max) != self.n_max or self.n_max < 0):
            raise ValidationError(f"n_max must be a non-negative integer, got {self.n_max}")

    @property
    def quantum(self) -> float:
        """Level spacing ``hbar_eff * omega``."""
        return self.params.hbar_eff * self.params.omega

    def tail(self, n_max: int) -> float:
        """Gibbs weight beyond level ``n_max``."""
        if math.isinf(self.beta):
            return 0.0
        return math.exp(-self.beta * self.quantum * (n_max + 1))

    def truncation(self) -> int:
        if self.n_max is not None:
            if self.tail(self.n_max) >= GIBBS_TAIL:
                raise TruncationError(
                    f"n_max={self.n_max} leaves Gibbs tail {self.tail(self.n_max):.3g} >= {GIBBS_TAIL}"
                )
            return int(self.n_max)
        if math.isinf(self.beta):
            return 0
        return int(math.floor(-math.log(GIBBS_TAIL) / (self.beta * self.quantum)))

    def weights(self) -> np.ndarray:
        """``w_n = exp(-beta n hbar w) (1 - exp(-beta hbar w))`` for n <= truncation."""
        n = np.arange(self.truncation() + 1)
        if math.isinf(self.beta):
            return (n == 0).astype(float)
        bq = self.beta * self.quantum
        return np.exp(-bq * n) * -np.expm1(-bq)


def _energy(params: RiskParams, p_grid: Grid1D, q_grid: Grid1D, p0: float, q0: float) -> np.ndarray:
    p = p_grid.points[:, None] - p0
    q = q_grid.points[None, :] - q0
    w = params.omega
    return p * p / (2.0 * params.m) + params.m * w * w * q * q / 2.0


def laguerre_level(n: int, params: RiskParams, p_grid: Grid1D = PHASE_GRID,
                   q_grid: Grid1D = PHASE_GRID, p0: float = 0.0, q0: float = 0.0) -> WignerField:
    """Wigner field of the n-th oscillator level from its Laguerre closed form."""
    hbar = params.hbar_eff
    y = 4.0 * _energy(params, p_grid, q_grid, p0, q0) / (hbar * params.omega)
    values = (-1) ** n / (math.pi * hbar) * laguerre_damped(n, y)
    return WignerField(p_grid, q_grid, values, params.h_eff)


def thermal_series(spec: GibbsSpec, p_grid: Grid1D = PHASE_GRID,
                   q_grid: Grid1D = PHASE_GRID) -> WignerField:
    """Gibbs-weighted sum of the Laguerre-form level fields."""
    params = spec.params
    hbar = params.hbar_eff
    y = 4.0 * _energy(params, p_grid, q_grid, spec.p0, spec.q0) / (hbar * params.omega)
    weights = spec.weights()
    # same upward recurrence as laguerre_damped, accumulated level by level
    prev = np.zeros_like(y)
    cur = np.exp(-0.5 * y)
    acc = weights[0] * cur
    for k in range(len(weights) - 1):
        prev, cur = cur, ((2 * k + 1 - y) * cur - k * prev) / (k + 1)
        acc += weights[k + 1] * (-1) ** (k + 1) * cur
    return WignerField(p_grid, q_grid, acc / (math.pi * hbar), params.h_eff)


def thermal_x(spec: GibbsSpec) -> float:
    """``x = (2 / hbar w) tanh(beta hbar w / 2)``."""
    q = spec.quantum
    return 2.0 / q * math.tanh(0.5 * spec.beta * q)


def thermal_closed_form(spec: GibbsSpec, p_grid: Grid1D = PHASE_GRID,
                        q_grid: Grid1D = PHASE_GRID) -> WignerField:
    """Bivariate normal ``(omega / 2 pi) x exp(-x H(p, q))``."""
    x = thermal_x(spec)
    H = _energy(spec.params, p_grid, q_grid, spec.p0, spec.q0)
    values = spec.params.omega / (2.0 * math.pi) * x * np.exp(-x * H)
    return WignerField(p_grid, q_grid, values, spec.params.h_eff)


def gibbs_mixture(spec: GibbsSpec, grid: Grid1D | None = None) -> MixedStrategy:
    """The thermal state as an explicit mixture of eigenstate wavefunctions."""
    weights = spec.weights()
    kwargs = {} if grid is None else {"grid": grid}
    comps = [
        (float(w), make_oscillator_eigenstate(n, spec.params, spec.p0, spec.q0, **kwargs))
        for n, w in enumerate(weights)
    ]
    # absorb the discarded tail into the ground level so weights sum to one
    comps[0] = (comps[0][0] + 1.0 - float(weights.sum()), comps[0][1])
    return MixedStrategy(tuple(comps))


def slices_monotone(field: WignerField, slices: Sequence[float] | None = None) -> bool:
    """Whether every demand slice (fixed p) is nondecreasing."""
    ps = field.p_grid.points if slices is None else slices
    return all(is_monotone(demand_curve(field, p).F) for p in ps)

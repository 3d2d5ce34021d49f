"""Deterministic numerical kernel shared by every other module.

Grids are uniform and inclusive of both end points, with a power-of-two
number of samples so the conjugate-variable transform maps onto a plain FFT.
Everything here is a pure function of its arguments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np

from .errors import BracketError, ValidationError

TWO_PI = 2.0 * math.pi

#: Default economical Planck constant, chosen so that hbar_E = 1.
DEFAULT_H_E = TWO_PI


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class Grid1D:
    """Uniform grid ``lo, lo + h, ..., hi`` with ``n`` points, ``h = (hi - lo)/(n - 1)``."""

    lo: float
    hi: float
    n: int

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)) or not self.lo < self.hi:
            raise ValidationError(f"grid needs finite lo < hi, got [{self.lo}, {self.hi}]")
        if int(self.n) != self.n or self.n < 8 or not _is_power_of_two(int(self.n)):
            raise ValidationError(f"grid size must be a power of two >= 8, got {self.n}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "lo", float(self.lo))
        object.__setattr__(self, "hi", float(self.hi))

    @classmethod
    def from_spacing(cls, lo: float, h: float, n: int) -> "Grid1D":
        return cls(lo, lo + (n - 1) * h, n)

    @property
    def h(self) -> float:
        return (self.hi - self.lo) / (self.n - 1)

    @cached_property
    def points(self) -> np.ndarray:
        x = self.lo + self.h * np.arange(self.n)
        x.flags.writeable = False
        return x

    def contains(self, x: float) -> bool:
        return self.lo <= x <= self.hi

    def subsample(self, stride: int) -> "Grid1D":
        """Every ``stride``-th point, starting at ``lo``."""
        if stride < 1 or self.n % stride:
            raise ValidationError(f"stride {stride} does not divide grid size {self.n}")
        return Grid1D.from_spacing(self.lo, self.h * stride, self.n // stride)


#: q in [-12, 12] with 4096 points.
DEFAULT_GRID = Grid1D(-12.0, 12.0, 4096)


@dataclass(frozen=True, eq=False)
class ComplexField1D:
    """Complex samples living on a :class:`Grid1D`. Immutable."""

    grid: Grid1D
    samples: np.ndarray

    def __post_init__(self):
        s = np.array(self.samples, dtype=complex)
        if s.shape != (self.grid.n,):
            raise ValidationError(
                f"field has {s.shape} samples, grid expects ({self.grid.n},)"
            )
        if not np.all(np.isfinite(s)):
            raise ValidationError("field samples must be finite")
        s.flags.writeable = False
        object.__setattr__(self, "samples", s)

    @property
    def density(self) -> np.ndarray:
        return np.abs(self.samples) ** 2

    def norm2(self) -> float:
        return integrate(self.density, self.grid)


def _checked(f, grid: Grid1D) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    if f.shape != (grid.n,):
        raise ValidationError(f"expected {grid.n} samples, got shape {f.shape}")
    if not np.all(np.isfinite(f)):
        raise ValidationError("integrand has non-finite samples")
    return f


def integrate(f, grid: Grid1D) -> float:
    """Composite trapezoid rule over the whole grid."""
    f = _checked(f, grid)
    return float(grid.h * (f.sum() - 0.5 * (f[0] + f[-1])))


def cumulative_integral(f, grid: Grid1D) -> np.ndarray:
    """Running trapezoid integral from ``grid.lo``; ``F[0] == 0``."""
    f = _checked(f, grid)
    F = np.empty(grid.n)
    F[0] = 0.0
    np.cumsum(0.5 * grid.h * (f[1:] + f[:-1]), out=F[1:])
    return F


def cumulative_at(x, grid: Grid1D, f: np.ndarray, F: np.ndarray):
    """Evaluate a running integral at arbitrary abscissae.

    Between nodes the integrand is taken piecewise linear, so the result is
    continuous in ``x``, agrees with ``F`` on the nodes, and is monotone
    whenever ``f >= 0``. Below the grid it is 0; above it, ``F[-1]``.
    """
    x = np.asarray(x, dtype=float)
    h = grid.h
    i = np.clip(np.floor((x - grid.lo) / h).astype(np.int64), 0, grid.n - 2)
    t = np.clip(x - (grid.lo + i * h), 0.0, h)
    slope = (f[i + 1] - f[i]) / h
    out = F[i] + f[i] * t + 0.5 * slope * t * t
    out = np.where(x < grid.lo, 0.0, out)
    out = np.where(x >= grid.hi, F[-1], out)
    return out if out.ndim else float(out)


def bisect_root(g: Callable[[float], float], a: float, b: float, tol: float) -> float:
    """Bisection for a sign change of ``g`` on ``[a, b]``.

    An exact zero at a midpoint keeps the left half, so the procedure is fully
    deterministic. Returns the midpoint of the final bracket (width <= tol).
    """
    if not tol > 0:
        raise ValidationError(f"tol must be positive, got {tol}")
    if a > b:
        a, b = b, a
    ga, gb = g(a), g(b)
    if ga == 0.0:
        return a
    if ga * gb > 0:
        raise BracketError(f"no sign change on [{a}, {b}]: g(a)={ga}, g(b)={gb}")
    while b - a > tol:
        mid = 0.5 * (a + b)
        if mid <= a or mid >= b:
            break
        gm = g(mid)
        if gm == 0.0 or (gm > 0) != (ga > 0):
            b = mid
        else:
            a, ga = mid, gm
    return 0.5 * (a + b)


# -- conjugate-variable transform ------------------------------------------


def fourier_pair(psi_q: ComplexField1D, h_E: float, pad: int = 1,
                 p_lo: float | None = None) -> ComplexField1D:
    """Supply amplitude from a demand amplitude.

    Discretizes ``phi(p) = h_E**-0.5 * integral exp(+i p q / hbar_E) psi(q) dq``
    with ``hbar_E = h_E / (2 pi)``. The conjugate grid has
    ``N = pad * n`` points spaced ``h_E / (N h)``; ``pad > 1`` zero-extends
    the demand grid to the right, which refines the supply grid. The default
    supply grid starts at ``-N/2`` spacings, so it is centered on p = 0.

    The discrete map is exactly unitary in the Riemann-sum inner product.
    """
    if not h_E > 0:
        raise ValidationError(f"h_E must be positive, got {h_E}")
    if not _is_power_of_two(pad):
        raise ValidationError(f"pad must be a power of two, got {pad}")
    grid = psi_q.grid
    hbar = h_E / TWO_PI
    N = grid.n * pad
    h = grid.h
    dp = h_E / (N * h)
    if p_lo is None:
        p_lo = -(N // 2) * dp
    j = np.arange(N)
    psi = np.zeros(N, dtype=complex)
    psi[: grid.n] = psi_q.samples
    twisted = psi * np.exp(1j * p_lo * h * j / hbar)
    p = p_lo + dp * j
    phi = (h / math.sqrt(h_E)) * np.exp(1j * p * grid.lo / hbar) * N * np.fft.ifft(twisted)
    return ComplexField1D(Grid1D.from_spacing(p_lo, dp, N), phi)


def inverse_fourier_pair(phi_p: ComplexField1D, h_E: float, q_lo: float | None = None,
                         n_out: int | None = None) -> ComplexField1D:
    """Inverse of :func:`fourier_pair`.

    ``psi(q) = h_E**-0.5 * integral exp(-i p q / hbar_E) phi(p) dp`` on the
    conjugate demand grid starting at ``q_lo`` (default: centered on 0).
    ``n_out`` keeps only the first ``n_out`` demand samples, undoing padding.
    """
    if not h_E > 0:
        raise ValidationError(f"h_E must be positive, got {h_E}")
    grid = phi_p.grid
    hbar = h_E / TWO_PI
    N = grid.n
    dp = grid.h
    h = h_E / (N * dp)
    if q_lo is None:
        q_lo = -(N // 2) * h
    k = np.arange(N)
    twisted = phi_p.samples * np.exp(-1j * k * dp * q_lo / hbar)
    q = q_lo + h * k
    psi = (dp / math.sqrt(h_E)) * np.exp(-1j * q * grid.lo / hbar) * np.fft.fft(twisted)
    if n_out is not None:
        if not _is_power_of_two(n_out) or n_out > N:
            raise ValidationError(f"n_out must be a power of two <= {N}, got {n_out}")
        psi = psi[:n_out]
        N = n_out
    return ComplexField1D(Grid1D.from_spacing(q_lo, h, N), psi)


# -- special functions --------------------------------------------------------


def hermite_fn(n: int, x, h_E: float, m_omega: float):
    """Normalized oscillator eigenfunction ``psi_n(x)`` for ``hbar_E = h_E/2pi``.

    Length scale ``s = sqrt(hbar_E / m_omega)``; evaluated with the
    normalized three-term recurrence so nothing overflows up to n = 64.
    """
    if int(n) != n or not 0 <= n <= 64:
        raise ValidationError(f"oscillator level must be in [0, 64], got {n}")
    if not (h_E > 0 and m_omega > 0):
        raise ValidationError("h_E and m_omega must be positive")
    s = math.sqrt(h_E / TWO_PI / m_omega)
    xi = np.asarray(x, dtype=float) / s
    prev = np.zeros_like(xi)
    cur = np.exp(-0.5 * xi * xi) / (math.pi ** 0.25 * math.sqrt(s))
    for k in range(int(n)):
        prev, cur = cur, math.sqrt(2.0 / (k + 1)) * xi * cur - math.sqrt(k / (k + 1)) * prev
    return cur if cur.ndim else float(cur)


def _laguerre_recurrence(n: int, x, start):
    prev = np.zeros_like(x)
    cur = start
    for k in range(n):
        prev, cur = cur, ((2 * k + 1 - x) * cur - k * prev) / (k + 1)
    return cur


def laguerre(n: int, x):
    """Laguerre polynomial ``L_n(x)`` by upward recurrence."""
    if int(n) != n or not 0 <= n <= 512:
        raise ValidationError(f"Laguerre order must be in [0, 512], got {n}")
    x = np.asarray(x, dtype=float)
    out = _laguerre_recurrence(int(n), x, np.ones_like(x))
    return out if out.ndim else float(out)


def laguerre_damped(n: int, x):
    """``exp(-x/2) * L_n(x)``; bounded by 1 in magnitude for ``x >= 0``.

    The recurrence is linear, so seeding it with ``exp(-x/2)`` avoids the
    overflow of ``L_n`` and the underflow of the exponential at large x.
    """
    if int(n) != n or not 0 <= n <= 512:
        raise ValidationError(f"Laguerre order must be in [0, 512], got {n}")
    x = np.asarray(x, dtype=float)
    out = _laguerre_recurrence(int(n), x, np.exp(-0.5 * x))
    return out if out.ndim else float(out)


def normal_pdf(x):
    x = np.asarray(x, dtype=float)
    out = np.exp(-0.5 * x * x) / math.sqrt(TWO_PI)
    return out if out.ndim else float(out)


def normal_cdf(x: float) -> float:
    """Standard normal CDF through the complementary error function."""
    return 0.5 * math.erfc(-x / math.sqrt(2.0))

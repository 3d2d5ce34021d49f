"""The clearinghouse: price discovery and settlement for one round.

For a division of traders into buyers and sellers, each declared amplitude is
rescaled so its squared modulus integrates to the declared capital (money
``d`` for buyers, asset units ``s`` for sellers). The money that would change
hands at log-price ``x`` is ``min(D(x), exp(x) S(x))`` where ``D`` is the
buyers' running demand integral and ``S`` the sellers' supply integral up to
``p = -x``. The clearing price balances the two; the division with the
largest turnover at its clearing price wins.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Literal, Sequence

import numpy as np

from .errors import ValidationError
from .numerics import DEFAULT_GRID, ComplexField1D, Grid1D, bisect_root
from .strategy import (
    PriceEigenstate,
    PureStrategy,
    Strategy,
    TraderDeclaration,
    buy_cdf,
    from_supply,
    normalize,
    sell_cdf,
)

Mode = Literal["capital", "probability"]

MAX_EXHAUSTIVE_TRADERS = 20

# No-trade reason codes.
NO_CROSSING = "no-crossing"
EMPTY_SIDE = "empty-side"
ZENO_COLLAPSE = "zeno-collapse"


@dataclass(frozen=True)
class Division:
    """Partition of the participating traders into buyers and sellers."""

    buyers: tuple[int, ...]
    sellers: tuple[int, ...]

    def __post_init__(self):
        b, s = tuple(sorted(self.buyers)), tuple(sorted(self.sellers))
        if set(b) & set(s):
            raise ValidationError("a trader cannot be on both sides of a division")
        if len(set(b)) != len(b) or len(set(s)) != len(s):
            raise ValidationError("duplicate trader id in division")
        object.__setattr__(self, "buyers", b)
        object.__setattr__(self, "sellers", s)

    @property
    def ids(self) -> tuple[int, ...]:
        return tuple(sorted(self.buyers + self.sellers))

    @property
    def mask(self) -> int:
        """Bit ``i`` is set when the ``i``-th smallest id is a buyer."""
        buyers = set(self.buyers)
        return sum(1 << i for i, k in enumerate(self.ids) if k in buyers)

    @classmethod
    def from_mask(cls, mask: int, ids: Iterable[int]) -> "Division":
        ids = sorted(ids)
        return cls(
            tuple(k for i, k in enumerate(ids) if mask >> i & 1),
            tuple(k for i, k in enumerate(ids) if not mask >> i & 1),
        )


@dataclass(frozen=True)
class Leg:
    """One trader on one side, with its rescaled capital weight."""

    trader_id: int
    strategy: Strategy
    weight: float
    side: Literal["buy", "sell"]

    def cdf(self, ln_c):
        f = buy_cdf if self.side == "buy" else sell_cdf
        return self.weight * f(self.strategy, ln_c)

    def density(self) -> tuple[Grid1D, np.ndarray]:
        """Rescaled density on the leg's own grid (demand grid for buyers)."""
        s = self.strategy
        if isinstance(s, PriceEigenstate):
            raise ValidationError("eigenstate legs have a point mass, not a density")
        if self.side == "buy":
            return s.grid, self.weight * s.demand_density()
        return s.supply.grid, self.weight * s.supply_density()


@dataclass(frozen=True)
class FlowProfile:
    division: Division
    buyers: tuple[Leg, ...]
    sellers: tuple[Leg, ...]
    mode: Mode = "capital"
    scan_grid: Grid1D = DEFAULT_GRID
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def demand(self, ln_c):
        """Money the buyers are willing to spend at ``ln_c`` (the first branch)."""
        return sum((leg.cdf(ln_c) for leg in self.buyers), 0.0 * np.asarray(ln_c, dtype=float))

    def supply(self, ln_c):
        """Asset units the sellers offer at ``ln_c``."""
        return sum((leg.cdf(ln_c) for leg in self.sellers), 0.0 * np.asarray(ln_c, dtype=float))

    def imbalance(self, ln_c):
        return self.demand(ln_c) - np.exp(ln_c) * self.supply(ln_c)

    def _scan_imbalance(self) -> np.ndarray:
        x = self.scan_grid.points
        total = np.zeros_like(x)
        for leg in self.buyers:
            total += leg.weight * self._unit_cdf(leg, x)
        sup = np.zeros_like(x)
        for leg in self.sellers:
            sup += leg.weight * self._unit_cdf(leg, x)
        return total - np.exp(x) * sup

    def _unit_cdf(self, leg: Leg, x) -> np.ndarray:
        key = (leg.trader_id, leg.side, self.scan_grid)
        vals = self._cache.get(key)
        if vals is None:
            f = buy_cdf if leg.side == "buy" else sell_cdf
            vals = self._cache[key] = np.asarray(f(leg.strategy, x), dtype=float)
        return vals


@dataclass(frozen=True)
class ClearingOutcome:
    division: Division | None
    ln_c_star: float | None
    turnover: float
    delta_G: dict[int, float]
    delta_money: dict[int, float]
    residual: float
    reason: str | None = None
    fill_q: dict[int, float] = field(default_factory=dict)
    fill_p: dict[int, float] = field(default_factory=dict)

    @property
    def traded(self) -> bool:
        return self.reason is None

    @property
    def price(self) -> float | None:
        return None if self.ln_c_star is None else math.exp(self.ln_c_star)


def no_trade(ids: Iterable[int], reason: str, division: Division | None = None) -> ClearingOutcome:
    ids = sorted(ids)
    zeros = {k: 0.0 for k in ids}
    return ClearingOutcome(division, None, 0.0, dict(zeros), dict(zeros), 0.0, reason)


# -- rescaling -----------------------------------------------------------------


def _can_buy(decl: TraderDeclaration) -> bool:
    s = decl.strategy
    return decl.d > 0 and not (isinstance(s, PriceEigenstate) and s.rep == "supply")


def _can_sell(decl: TraderDeclaration) -> bool:
    s = decl.strategy
    return (
        decl.s > 0
        and not decl.demand_locked
        and not (isinstance(s, PriceEigenstate) and s.rep == "demand")
    )


def rescale(decls: Sequence[TraderDeclaration], division: Division, mode: Mode = "capital",
            scan_grid: Grid1D | None = None) -> FlowProfile:
    """Attach capital weights to the declared strategies.

    Capital mode weights buyers by ``d`` and sellers by ``s``; probability
    mode by ``d / sum(d)`` and ``s / sum(s)`` over each side.
    """
    if mode not in ("capital", "probability"):
        raise ValidationError(f"unknown clearing mode {mode!r}")
    by_id = {d.trader_id: d for d in decls}
    missing = set(division.ids) - set(by_id)
    if missing:
        raise ValidationError(f"division names unknown traders {sorted(missing)}")
    for k in division.buyers:
        if not _can_buy(by_id[k]):
            raise ValidationError(f"trader {k} cannot be placed on the buy side")
    for k in division.sellers:
        if not _can_sell(by_id[k]):
            raise ValidationError(f"trader {k} cannot be placed on the sell side")
    d_tot = sum(by_id[k].d for k in division.buyers)
    s_tot = sum(by_id[k].s for k in division.sellers)

    def weight(cap, tot):
        return cap / tot if mode == "probability" else cap

    buyers = tuple(
        Leg(k, normalize(by_id[k].strategy), weight(by_id[k].d, d_tot), "buy") for k in division.buyers
    )
    sellers = tuple(
        Leg(k, normalize(by_id[k].strategy), weight(by_id[k].s, s_tot), "sell") for k in division.sellers
    )
    if scan_grid is None:
        scan_grid = _default_scan_grid(decls)
    return FlowProfile(division, buyers, sellers, mode, scan_grid)


def _default_scan_grid(decls: Sequence[TraderDeclaration]) -> Grid1D:
    for d in sorted(decls, key=lambda d: d.trader_id):
        if isinstance(d.strategy, PureStrategy):
            return d.strategy.grid
    return DEFAULT_GRID


# -- price and turnover --------------------------------------------------------


def turnover(profile: FlowProfile, ln_c: float) -> float:
    """Largest money flow possible at ``ln_c``: the smaller of the two branches."""
    if ln_c == -math.inf:
        return 0.0
    return float(min(profile.demand(ln_c), math.exp(ln_c) * profile.supply(ln_c)))


def residual(profile: FlowProfile, ln_c: float) -> float:
    return float(abs(profile.imbalance(ln_c)))


def clear_price(profile: FlowProfile, tol: float = 1e-12) -> float | None:
    """Smallest clearing log-price on the scan grid, or ``None`` for no trade.

    Scans the imbalance ``D(x) - exp(x) S(x)`` for its first sign change and
    refines it by bisection to ``tol`` in ``x``. A root at which nothing
    changes hands (no overlap of the two sides) also counts as no trade.
    """
    if not profile.buyers or not profile.sellers:
        return None
    x = profile.scan_grid.points
    sg = np.sign(profile._scan_imbalance())
    hit = np.flatnonzero((sg[:-1] == 0) | (sg[:-1] * sg[1:] <= 0))
    if hit.size == 0:
        if sg[-1] != 0:
            return None
        root = float(x[-1])
    else:
        i = int(hit[0])
        if sg[i] == 0:
            root = float(x[i])
        else:
            root = bisect_root(lambda v: float(profile.imbalance(v)), float(x[i]), float(x[i + 1]), tol)
    floor = 1e-12 * sum(leg.weight for leg in profile.buyers)
    if turnover(profile, root) > floor:
        return root
    # a crossing on an eigenstate's step: the midpoint may sit just left of it
    nudged = root + tol
    if hit.size and nudged <= x[int(hit[0]) + 1] and turnover(profile, nudged) > floor:
        return nudged
    return None


def settle(profile: FlowProfile, ln_c_star: float | None) -> ClearingOutcome:
    """Asset and money changes at the clearing price.

    Buyers pay their running demand integral and receive ``1/c`` asset per
    unit paid; sellers deliver their running supply integral and receive
    ``c`` per unit. If the two branches differ (a residual left by the root
    finder or a step in an eigenstate's demand) the longer side is rationed
    pro rata down to the turnover, so the round stays exactly zero-sum.
    """
    ids = profile.division.ids
    if ln_c_star is None:
        return no_trade(ids, NO_CROSSING, profile.division)
    c = math.exp(ln_c_star)
    D = float(profile.demand(ln_c_star))
    S = float(profile.supply(ln_c_star))
    j = min(D, c * S)
    buy_scale = j / D if D > 0 else 0.0
    sell_scale = j / (c * S) if S > 0 else 0.0
    dG = {k: 0.0 for k in ids}
    dM = {k: 0.0 for k in ids}
    for leg in profile.buyers:
        spend = float(leg.cdf(ln_c_star)) * buy_scale
        dG[leg.trader_id] = spend / c
        dM[leg.trader_id] = -spend
    for leg in profile.sellers:
        units = float(leg.cdf(ln_c_star)) * sell_scale
        dG[leg.trader_id] = -units
        dM[leg.trader_id] = c * units
    return ClearingOutcome(
        division=profile.division,
        ln_c_star=ln_c_star,
        turnover=j,
        delta_G=dG,
        delta_money=dM,
        residual=abs(D - c * S),
        fill_q={leg.trader_id: ln_c_star for leg in profile.buyers},
        fill_p={leg.trader_id: -ln_c_star for leg in profile.sellers},
    )


def best_division(decls: Sequence[TraderDeclaration], mode: Mode = "capital",
                  tol: float = 1e-12, scan_grid: Grid1D | None = None) -> ClearingOutcome:
    """Exhaustive search over divisions for the largest cleared turnover.

    Every nontrivial division respecting the side constraints is cleared;
    the one with the largest turnover wins, ties going to the smaller
    bitmask (bit ``i`` set means the ``i``-th smallest id buys).
    """
    decls = sorted(decls, key=lambda d: d.trader_id)
    ids = [d.trader_id for d in decls]
    if len(set(ids)) != len(ids):
        raise ValidationError("duplicate trader ids")
    K = len(decls)
    if K > MAX_EXHAUSTIVE_TRADERS:
        raise ValidationError(
            f"{K} traders exceed the exhaustive search limit of {MAX_EXHAUSTIVE_TRADERS}"
        )
    if K == 0:
        return no_trade([], EMPTY_SIDE)
    if scan_grid is None:
        scan_grid = _default_scan_grid(decls)
    full = (1 << K) - 1
    buy_ok = sum(1 << i for i, d in enumerate(decls) if _can_buy(d))
    sell_ok = sum(1 << i for i, d in enumerate(decls) if _can_sell(d))
    cache: dict = {}
    best: tuple[float, ClearingOutcome] | None = None
    feasible = False
    for mask in range(1, full):
        if mask & ~buy_ok or (full & ~mask) & ~sell_ok:
            continue
        feasible = True
        division = Division.from_mask(mask, ids)
        profile = rescale(decls, division, mode, scan_grid)
        profile = replace(profile, _cache=cache)
        ln_c = clear_price(profile, tol)
        if ln_c is None:
            continue
        j = turnover(profile, ln_c)
        if best is None or j > best[0] + 1e-12 * max(1.0, abs(best[0])):
            best = (j, settle(profile, ln_c))
    if best is None:
        return no_trade(ids, NO_CROSSING if feasible else EMPTY_SIDE)
    return best[1]


def uniform_price_check(outcome: ClearingOutcome, tol: float = 1e-9) -> bool:
    """True when every buyer's fill ``q`` and seller's fill ``p`` satisfy ``q + p = 0``."""
    if not outcome.fill_q or not outcome.fill_p:
        return True
    qs = list(outcome.fill_q.values())
    ps = list(outcome.fill_p.values())
    return all(abs(q + p) <= tol for q in qs for p in ps)


def apply_scattering(decls: Sequence[TraderDeclaration], division: Division, alpha_d: float,
                     alpha_s: float, ln_c: float = 0.0) -> list[Strategy]:
    """Apply ``I + alpha_d * Pi_d + alpha_s * Pi_s`` to each trader's strategy.

    ``Pi_d`` projects a buyer's demand amplitude onto ``q <= ln_c`` and
    ``Pi_s`` a seller's supply amplitude onto ``p <= -ln_c``; results are
    renormalized. Symbolic eigenstates pass through unchanged. Only the state
    transformation is provided, no capital flows.
    """
    if not (alpha_d >= 0 and alpha_s >= 0):
        raise ValidationError("scattering weights must be >= 0")
    buyers, sellers = set(division.buyers), set(division.sellers)
    out: list[Strategy] = []
    for decl in sorted(decls, key=lambda d: d.trader_id):
        s = decl.strategy
        k = decl.trader_id
        if isinstance(s, PriceEigenstate) or (k in buyers and alpha_d == 0) or (k in sellers and alpha_s == 0):
            out.append(s)
        elif k in buyers:
            amp = s.amplitude.samples * np.where(s.grid.points <= ln_c, 1.0 + alpha_d, 1.0)
            out.append(normalize(PureStrategy(ComplexField1D(s.grid, amp), s.h_E)))
        elif k in sellers:
            sup = s.supply
            amp = sup.samples * np.where(sup.grid.points <= -ln_c, 1.0 + alpha_s, 1.0)
            out.append(from_supply(ComplexField1D(sup.grid, amp), s.h_E, q_lo=s.grid.lo))
        else:
            out.append(s)
    return out

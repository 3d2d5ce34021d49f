"""Scenario files, multi-round market runs and report generation.

A scenario is a YAML (or JSON) document with top-level keys ``market``,
``traders``, ``rounds``, ``zeno`` and ``report``::

    market:
      hbar_E: 1.0            # or h_E
      m: 1.0
      theta: 6.283185307179586
      theta_nc: 0.0
      mode: capital          # or probability
      grid: {lo: -12, hi: 12, n: 4096}
      tol: 1.0e-12
    traders:
      - {id: 0, strategy: {kind: gaussian, q0: -0.5, sigma: 0.5}, s: 0, d: 1}
      - {id: 1, strategy: {kind: gaussian, q0: 0.5, sigma: 0.5}, s: 1, d: 0}
    rounds: 1
    zeno: {traders: all, width: 0.05, repetitions: 5}   # center defaults to each mean q
    report: {sigma: 1.0, beta: 1.0}

Rounds after the first use post-settlement holdings as the declared
capitals: buyers turn spent money into asset at the clearing price and
sellers the reverse. This bookkeeping goes beyond a single clearing round.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any

import yaml

from . import __version__
from .clearing import (
    ZENO_COLLAPSE,
    ClearingOutcome,
    best_division,
    rescale,
    settle,
)
from .errors import ValidationError
from .io import fmt, write_csv, write_curve_csv, write_field_csv, write_json
from .numerics import DEFAULT_GRID, TWO_PI, Grid1D
from .profit import IntensitySpec, fixed_point, stationarity_residual
from .strategy import (
    PureStrategy,
    RiskParams,
    Strategy,
    TraderDeclaration,
    collapse_demand,
    make_coherent_correlated,
    make_gaussian,
    make_oscillator_eigenstate,
    make_uniform,
    make_uniform_supply,
    PriceEigenstate,
    superpose,
)
from .wigner import (
    GibbsSpec,
    WignerField,
    demand_curve,
    is_giffen,
    is_monotone,
    supply_curve,
    thermal_closed_form,
    thermal_series,
    wigner_of_pure,
)

TOP_LEVEL_KEYS = ("market", "traders", "rounds", "zeno", "report")
STRATEGY_KINDS = (
    "gaussian",
    "coherent",
    "oscillator",
    "uniform",
    "uniform_supply",
    "price_eigenstate",
    "superposition",
)
LEDGER_HEADER = (
    "round", "division", "ln_c_star", "turnover", "trader_id",
    "delta_g", "delta_money", "balance_g", "balance_money", "residual",
)
ROUNDS_HEADER = ("round", "traded", "reason", "division", "ln_c_star", "turnover", "residual")
REPORT_KINDS = ("curves", "wigner", "fixed_point")
REPORT_KEYS = ("sigma", "a_range", "strategy", "beta", "thermal", "n_max", "p_slice", "q_slice", "rows")


@dataclass(frozen=True)
class ZenoSpec:
    traders: tuple[int, ...]
    width: float
    repetitions: int
    center: float | None = None


@dataclass(frozen=True)
class Scenario:
    params: RiskParams
    mode: str
    grid: Grid1D
    tol: float
    traders: tuple[TraderDeclaration, ...]
    rounds: int
    zeno: ZenoSpec | None
    report: dict
    document: dict

    @property
    def h_E(self) -> float:
        return self.params.h_E


@dataclass(frozen=True)
class LedgerEntry:
    round: int
    division: int
    ln_c_star: float | None
    turnover: float
    delta_g: dict[int, float]
    delta_money: dict[int, float]
    balance_g: dict[int, float]
    balance_money: dict[int, float]
    residual: float
    reason: str | None = None

    @property
    def traded(self) -> bool:
        return self.reason is None


# -- parsing -------------------------------------------------------------------


def _num(d: dict, key: str, path: str, default=None, *, positive=False, nonneg=False) -> float:
    if key not in d or d[key] is None:
        if default is None:
            raise ValidationError(f"{path}.{key}: required field missing")
        return float(default)
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ValidationError(f"{path}.{key}: expected a number, got {v!r}")
    v = float(v)
    if not math.isfinite(v):
        raise ValidationError(f"{path}.{key}: must be finite")
    if positive and not v > 0:
        raise ValidationError(f"{path}.{key}: must be positive, got {v}")
    if nonneg and not v >= 0:
        raise ValidationError(f"{path}.{key}: must be >= 0, got {v}")
    return v


def _int(d: dict, key: str, path: str, default=None) -> int:
    v = d.get(key, default)
    if v is None:
        raise ValidationError(f"{path}.{key}: required field missing")
    if isinstance(v, bool) or not isinstance(v, int):
        raise ValidationError(f"{path}.{key}: expected an integer, got {v!r}")
    return v


def _mapping(v, path: str) -> dict:
    if not isinstance(v, dict):
        raise ValidationError(f"{path}: expected a mapping, got {type(v).__name__}")
    return v


def _no_extra(d: dict, allowed, path: str):
    extra = sorted(set(d) - set(allowed))
    if extra:
        raise ValidationError(f"{path}: unknown keys {extra}; allowed: {sorted(allowed)}")


def _parse_market(raw) -> tuple[RiskParams, str, Grid1D, float]:
    m = _mapping(raw, "market")
    _no_extra(m, ("h_E", "hbar_E", "m", "theta", "theta_nc", "mode", "grid", "tol"), "market")
    if "h_E" in m and "hbar_E" in m:
        raise ValidationError("market: give either h_E or hbar_E, not both")
    if "hbar_E" in m:
        h_E = TWO_PI * _num(m, "hbar_E", "market", positive=True)
    else:
        h_E = _num(m, "h_E", "market", TWO_PI, positive=True)
    params = RiskParams(
        m=_num(m, "m", "market", 1.0, positive=True),
        theta=_num(m, "theta", "market", TWO_PI, positive=True),
        h_E=h_E,
        theta_nc=_num(m, "theta_nc", "market", 0.0, nonneg=True),
    )
    mode = m.get("mode", "capital")
    if mode not in ("capital", "probability"):
        raise ValidationError(f"market.mode: expected 'capital' or 'probability', got {mode!r}")
    grid = DEFAULT_GRID
    if m.get("grid") is not None:
        g = _mapping(m["grid"], "market.grid")
        _no_extra(g, ("lo", "hi", "n"), "market.grid")
        try:
            grid = Grid1D(
                _num(g, "lo", "market.grid", DEFAULT_GRID.lo),
                _num(g, "hi", "market.grid", DEFAULT_GRID.hi),
                _int(g, "n", "market.grid", DEFAULT_GRID.n),
            )
        except ValidationError as exc:
            raise ValidationError(f"market.grid: {exc}") from None
    tol = _num(m, "tol", "market", 1e-12, positive=True)
    return params, mode, grid, tol


_KIND_KEYS = {
    "gaussian": ("q0", "sigma"),
    "coherent": ("r", "eta", "p0", "q0"),
    "oscillator": ("n", "p0", "q0"),
    "uniform": ("lo", "hi"),
    "uniform_supply": ("lo", "hi"),
    "price_eigenstate": ("rep", "point"),
    "superposition": ("of", "coefficients"),
}


def build_strategy(spec, params: RiskParams, grid: Grid1D, path: str = "strategy") -> Strategy:
    """Construct a strategy from its scenario description."""
    spec = _mapping(spec, path)
    kind = spec.get("kind")
    if kind not in STRATEGY_KINDS:
        raise ValidationError(
            f"{path}.kind: unknown strategy kind {kind!r}; supported: {', '.join(STRATEGY_KINDS)}"
        )
    _no_extra(spec, ("kind",) + _KIND_KEYS[kind], path)
    h_E = params.h_E
    try:
        if kind == "gaussian":
            return make_gaussian(_num(spec, "q0", path, 0.0), _num(spec, "sigma", path), h_E, grid)
        if kind == "coherent":
            return make_coherent_correlated(
                _num(spec, "r", path, 0.0), _num(spec, "eta", path),
                _num(spec, "p0", path, 0.0), _num(spec, "q0", path, 0.0), h_E, grid,
            )
        if kind == "oscillator":
            return make_oscillator_eigenstate(
                _int(spec, "n", path), params, _num(spec, "p0", path, 0.0), _num(spec, "q0", path, 0.0), grid,
            )
        if kind == "uniform":
            return make_uniform(_num(spec, "lo", path), _num(spec, "hi", path), h_E, grid)
        if kind == "uniform_supply":
            return make_uniform_supply(_num(spec, "lo", path), _num(spec, "hi", path), h_E)
        if kind == "price_eigenstate":
            return PriceEigenstate(spec.get("rep"), _num(spec, "point", path), h_E)
        parts = spec.get("of")
        if not isinstance(parts, list) or len(parts) != 2:
            raise ValidationError(f"{path}.of: expected a list of two strategies")
        a, b = (build_strategy(p, params, grid, f"{path}.of[{i}]") for i, p in enumerate(parts))
        coeffs = spec.get("coefficients", [1.0, 1.0])
        if not (isinstance(a, PureStrategy) and isinstance(b, PureStrategy)):
            raise ValidationError(f"{path}.of: only gridded strategies can be superposed")
        return superpose(a, b, float(coeffs[0]), float(coeffs[1]))
    except ValidationError as exc:
        msg = str(exc)
        raise ValidationError(msg if msg.startswith(path) else f"{path}: {msg}") from None


def _parse_traders(raw, params, grid) -> tuple[TraderDeclaration, ...]:
    if not isinstance(raw, list) or not raw:
        raise ValidationError("traders: expected a non-empty list")
    seen: set[int] = set()
    out = []
    for i, t in enumerate(raw):
        path = f"traders[{i}]"
        t = _mapping(t, path)
        _no_extra(t, ("id", "strategy", "s", "d"), path)
        tid = _int(t, "id", path)
        if tid in seen:
            raise ValidationError(f"{path}.id: duplicate trader id {tid}")
        seen.add(tid)
        strategy = build_strategy(t.get("strategy"), params, grid, f"{path}.strategy")
        try:
            out.append(TraderDeclaration(
                tid, strategy, _num(t, "s", path, 0.0, nonneg=True), _num(t, "d", path, 0.0, nonneg=True)
            ))
        except ValidationError as exc:
            raise ValidationError(f"{path}: {exc}") from None
    return tuple(out)


def _parse_zeno(raw, ids) -> ZenoSpec | None:
    if raw is None:
        return None
    z = _mapping(raw, "zeno")
    _no_extra(z, ("traders", "trader", "center", "width", "repetitions"), "zeno")
    who = z.get("traders", z.get("trader", "all"))
    if who == "all":
        traders = tuple(sorted(ids))
    else:
        who = [who] if isinstance(who, int) else who
        if not isinstance(who, list) or not all(isinstance(k, int) for k in who):
            raise ValidationError("zeno.traders: expected 'all', an id or a list of ids")
        unknown = sorted(set(who) - set(ids))
        if unknown:
            raise ValidationError(f"zeno.traders: unknown trader ids {unknown}")
        traders = tuple(sorted(set(who)))
    center = None if z.get("center") is None else _num(z, "center", "zeno")
    reps = _int(z, "repetitions", "zeno", 1)
    if reps < 1:
        raise ValidationError("zeno.repetitions: must be >= 1")
    return ZenoSpec(traders, _num(z, "width", "zeno", positive=True), reps, center)


def parse_scenario(doc) -> Scenario:
    doc = _mapping(doc, "scenario")
    _no_extra(doc, TOP_LEVEL_KEYS, "scenario")
    if "traders" not in doc:
        raise ValidationError("scenario: missing required key 'traders'")
    params, mode, grid, tol = _parse_market(doc.get("market") or {})
    traders = _parse_traders(doc["traders"], params, grid)
    rounds = _int(doc, "rounds", "scenario", 1)
    if rounds < 1:
        raise ValidationError("scenario.rounds: must be >= 1")
    zeno = _parse_zeno(doc.get("zeno"), [t.trader_id for t in traders])
    report = _mapping(doc.get("report") or {}, "report")
    _no_extra(report, REPORT_KEYS, "report")
    return Scenario(params, mode, grid, tol, traders, rounds, zeno, report, doc)


def load_scenario(path) -> Scenario:
    """Read and validate a scenario file."""
    path = Path(path)
    text = path.read_text()
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"{path}:{mark.line + 1}:{mark.column + 1}" if mark else str(path)
        problem = getattr(exc, "problem", None) or str(exc)
        raise ValidationError(f"{where}: parse error: {problem}") from None
    return parse_scenario(doc)


# -- running -------------------------------------------------------------------


def zeno_declarations(scenario: Scenario) -> list[TraderDeclaration]:
    """Declarations after the configured repeated demand measurements.

    Measured traders are collapsed onto the window and held in the demand
    representation, so they bring no supply to the market.
    """
    decls = list(scenario.traders)
    z = scenario.zeno
    if z is None:
        return decls
    out = []
    for d in decls:
        if d.trader_id not in z.traders:
            out.append(d)
            continue
        s = d.strategy
        if isinstance(s, PureStrategy):
            center = s.moments.mean_q if z.center is None else z.center
            for _ in range(z.repetitions):
                s = collapse_demand(s, center, z.width)
        out.append(replace(d, strategy=s, demand_locked=True))
    return out


def _clean(x: float) -> float:
    # settlement rounding can leave -1e-17 where a side was exhausted
    return 0.0 if -1e-12 < x < 0.0 else x


def clear_round(decls, scenario: Scenario, tol: float) -> ClearingOutcome:
    out = best_division(decls, scenario.mode, tol, scan_grid=scenario.grid)
    if out.traded and scenario.mode == "probability":
        # price from the normalized curves, flows in declared capital
        out = settle(rescale(decls, out.division, "capital", scenario.grid), out.ln_c_star)
    if not out.traded and scenario.zeno is not None:
        out = replace(out, reason=ZENO_COLLAPSE)
    return out


def run(scenario: Scenario, tol: float | None = None, rounds: int | None = None) -> list[LedgerEntry]:
    """Clear ``scenario.rounds`` consecutive rounds and return the ledger."""
    tol = scenario.tol if tol is None else tol
    decls = zeno_declarations(scenario)
    bal_g = {d.trader_id: d.s for d in decls}
    bal_m = {d.trader_id: d.d for d in decls}
    ledger = []
    for r in range(1, (rounds or scenario.rounds) + 1):
        active = [replace(d, s=bal_g[d.trader_id], d=bal_m[d.trader_id])
                  for d in decls if bal_g[d.trader_id] + bal_m[d.trader_id] > 0]
        out = clear_round(active, scenario, tol)
        for k in bal_g:
            bal_g[k] = _clean(bal_g[k] + out.delta_G.get(k, 0.0))
            bal_m[k] = _clean(bal_m[k] + out.delta_money.get(k, 0.0))
        ledger.append(LedgerEntry(
            round=r,
            division=out.division.mask if out.traded else -1,
            ln_c_star=out.ln_c_star,
            turnover=out.turnover,
            delta_g={k: out.delta_G.get(k, 0.0) for k in bal_g},
            delta_money={k: out.delta_money.get(k, 0.0) for k in bal_g},
            balance_g=dict(bal_g),
            balance_money=dict(bal_m),
            residual=out.residual,
            reason=out.reason,
        ))
    return ledger


def ledger_rows(ledger: list[LedgerEntry]):
    for e in ledger:
        ln_c = math.nan if e.ln_c_star is None else e.ln_c_star
        for k in sorted(e.delta_g):
            yield (e.round, e.division, ln_c, e.turnover, k, e.delta_g[k], e.delta_money[k],
                   e.balance_g[k], e.balance_money[k], e.residual)


def write_ledger(ledger: list[LedgerEntry], out_dir) -> list[Path]:
    out_dir = Path(out_dir)
    rounds = (
        (e.round, e.traded, e.reason or "", e.division,
         math.nan if e.ln_c_star is None else e.ln_c_star, e.turnover, e.residual)
        for e in ledger
    )
    return [
        write_csv(out_dir / "ledger.csv", LEDGER_HEADER, ledger_rows(ledger)),
        _write_rounds(out_dir / "rounds.csv", rounds),
    ]


def _write_rounds(path: Path, rows) -> Path:
    with path.open("w", newline="\n") as fh:
        fh.write(",".join(ROUNDS_HEADER) + "\n")
        for r, traded, reason, div, ln_c, j, res in rows:
            fh.write(",".join([fmt(r), fmt(traded), reason, fmt(div), fmt(ln_c), fmt(j), fmt(res)]) + "\n")
    return path


def manifest(scenario: Scenario, command: str, tol: float, extra: dict | None = None) -> dict:
    """Everything that affects the outputs."""
    m = {
        "command": command,
        "package_version": __version__,
        "scenario": scenario.document,
        "resolved": {
            "h_E": scenario.params.h_E,
            "m": scenario.params.m,
            "theta": scenario.params.theta,
            "omega": scenario.params.omega,
            "theta_nc": scenario.params.theta_nc,
            "h_eff": scenario.params.h_eff,
            "mode": scenario.mode,
            "grid": {"lo": scenario.grid.lo, "hi": scenario.grid.hi, "n": scenario.grid.n},
            "tol": tol,
            "rounds": scenario.rounds,
            "zeno": None if scenario.zeno is None else {
                "traders": list(scenario.zeno.traders),
                "width": scenario.zeno.width,
                "repetitions": scenario.zeno.repetitions,
                "center": scenario.zeno.center,
            },
        },
    }
    if extra:
        m.update(extra)
    return m


def run_to_dir(scenario: Scenario, out_dir, tol: float | None = None) -> list[LedgerEntry]:
    tol = scenario.tol if tol is None else tol
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ledger = run(scenario, tol)
    write_ledger(ledger, out_dir)
    write_json(out_dir / "manifest.json", manifest(scenario, "run", tol))
    return ledger


# -- reports -------------------------------------------------------------------


def report_field(scenario: Scenario) -> tuple[WignerField, dict]:
    """The phase-space field a report is about, with a description of its source."""
    rep = scenario.report
    params = scenario.params
    src = rep.get("strategy")
    if src is None and rep.get("beta") is not None:
        beta = _num(rep, "beta", "report", positive=True)
        spec = GibbsSpec(beta, params, rep.get("n_max"))
        form = rep.get("thermal", "closed_form")
        if form not in ("closed_form", "series"):
            raise ValidationError("report.thermal: expected 'closed_form' or 'series'")
        f = thermal_closed_form(spec) if form == "closed_form" else thermal_series(spec)
        return f, {"source": "thermal", "beta": beta, "form": form, "n_max": spec.truncation()}
    if src is None:
        src = scenario.traders[0].trader_id
    if isinstance(src, int) and not isinstance(src, bool):
        by_id = {d.trader_id: d for d in scenario.traders}
        if src not in by_id:
            raise ValidationError(f"report.strategy: unknown trader id {src}")
        s, desc = by_id[src].strategy, {"source": "trader", "trader_id": src}
    else:
        s, desc = build_strategy(src, params, scenario.grid, "report.strategy"), {"source": "strategy"}
    if isinstance(s, PriceEigenstate):
        raise ValidationError("report.strategy: price eigenstates have no Wigner field")
    rows = _int(rep, "rows", "report", 256)
    return wigner_of_pure(s, rows=rows), desc


def report(scenario: Scenario, what: str, out_dir, tol: float | None = None) -> list[Path]:
    """Write the requested report artifacts plus ``manifest.json``."""
    if what not in REPORT_KINDS:
        raise ValidationError(f"report kind must be one of {REPORT_KINDS}, got {what!r}")
    tol = scenario.tol if tol is None else tol
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rep = scenario.report
    written: list[Path] = []
    extra: dict[str, Any] = {"what": what}
    if what == "fixed_point":
        sigma = _num(rep, "sigma", "report", 1.0, positive=True)
        a_range = rep.get("a_range")
        spec = IntensitySpec(sigma, None if a_range is None else tuple(a_range))
        a_star, rho_star = fixed_point(spec, tol=max(tol, 1e-8))
        extra["fixed_point"] = {"sigma": sigma, "a_range": list(spec.interval)}
        written.append(write_csv(
            out_dir / "fixed_point.csv",
            ("sigma", "a_star", "rho_star", "fixed_point_residual", "stationarity_residual"),
            [(sigma, a_star, rho_star, abs(rho_star - a_star), stationarity_residual(a_star / sigma))],
        ))
    else:
        field, desc = report_field(scenario)
        extra["field"] = desc | {
            "p_grid": [field.p_grid.lo, field.p_grid.hi, field.p_grid.n],
            "q_grid": [field.q_grid.lo, field.q_grid.hi, field.q_grid.n],
        }
        g = is_giffen(field)
        giffen = {"giffen": g.giffen, "witness_p": g.p, "witness_q": g.q, "min": g.value,
                  "max": float(field.values.max()), "total": field.total()}
        if what == "wigner":
            written.append(write_field_csv(out_dir / "wigner.csv", field))
            written.append(write_json(out_dir / "giffen.json", giffen))
        else:
            p_slice = rep.get("p_slice")
            q_slice = rep.get("q_slice")
            d = demand_curve(field, p_slice)
            s = supply_curve(field, q_slice)
            written.append(write_curve_csv(out_dir / "demand_curve.csv", d))
            written.append(write_curve_csv(out_dir / "supply_curve.csv", s))
            written.append(write_json(out_dir / "curves.json", {
                "p_slice": field.mean_p() if p_slice is None else p_slice,
                "q_slice": field.mean_q() if q_slice is None else q_slice,
                "demand_monotone": is_monotone(d.F, increasing=True),
                "supply_monotone": is_monotone(s.F, increasing=False),
                **giffen,
            }))
    written.append(write_json(out_dir / "manifest.json", manifest(scenario, "report", tol, extra)))
    return written


def outcome_summary(out: ClearingOutcome) -> dict:
    return {
        "traded": out.traded,
        "reason": out.reason,
        "division": None if out.division is None else {
            "mask": out.division.mask, "buyers": list(out.division.buyers), "sellers": list(out.division.sellers),
        },
        "ln_c_star": out.ln_c_star,
        "turnover": out.turnover,
        "residual": out.residual,
        "delta_G": {str(k): v for k, v in sorted(out.delta_G.items())},
        "delta_money": {str(k): v for k, v in sorted(out.delta_money.items())},
    }

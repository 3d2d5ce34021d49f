"""Command line entry point: ``qmg run | report | clear``.

Exit codes: 0 success, 2 invalid input, 3 numerical failure, 4 I/O error.
There is no ``--seed``; nothing in the package draws random numbers.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import NumericalError, ValidationError
from .scenario import (
    REPORT_KINDS,
    clear_round,
    load_scenario,
    outcome_summary,
    report,
    run,
    run_to_dir,
    zeno_declarations,
)

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4


def _positive(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not v > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qmg", description="Quantum market game clearing and phase-space reports")
    parser.add_argument("--tol", type=_positive, default=None, help="override the scenario's root tolerance")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="clear every round and write ledger.csv, rounds.csv, manifest.json")
    p_run.add_argument("scenario", type=Path)
    p_run.add_argument("--out", type=Path, required=True)

    p_rep = sub.add_parser("report", help="write curve, Wigner or fixed-point artifacts")
    p_rep.add_argument("scenario", type=Path)
    p_rep.add_argument("--what", choices=REPORT_KINDS, required=True)
    p_rep.add_argument("--out", type=Path, required=True)

    p_clear = sub.add_parser("clear", help="print one round's clearing outcome as JSON")
    p_clear.add_argument("scenario", type=Path)
    p_clear.add_argument("--round", type=int, default=1, dest="round_no")

    for p in (p_run, p_rep, p_clear):
        p.add_argument("--tol", type=_positive, default=argparse.SUPPRESS, help=argparse.SUPPRESS)
    return parser


def _clear(args) -> dict:
    scenario = load_scenario(args.scenario)
    if not 1 <= args.round_no <= scenario.rounds:
        raise ValidationError(f"--round must be in 1..{scenario.rounds}, got {args.round_no}")
    tol = scenario.tol if args.tol is None else args.tol
    if args.round_no == 1:
        out = clear_round(zeno_declarations(scenario), scenario, tol)
        return {"round": 1, **outcome_summary(out)}
    # later rounds depend on the balances left by the earlier ones
    entry = run(scenario, tol, rounds=args.round_no)[-1]
    return {
        "round": entry.round,
        "traded": entry.traded,
        "reason": entry.reason,
        "division": entry.division,
        "ln_c_star": entry.ln_c_star,
        "turnover": entry.turnover,
        "residual": entry.residual,
        "delta_G": {str(k): v for k, v in sorted(entry.delta_g.items())},
        "delta_money": {str(k): v for k, v in sorted(entry.delta_money.items())},
    }


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            scenario = load_scenario(args.scenario)
            ledger = run_to_dir(scenario, args.out, args.tol)
            traded = sum(e.traded for e in ledger)
            print(f"{len(ledger)} round(s), {traded} traded -> {args.out}")
        elif args.command == "report":
            scenario = load_scenario(args.scenario)
            for path in report(scenario, args.what, args.out, args.tol):
                print(path)
        else:
            print(json.dumps(_clear(args), indent=2, sort_keys=True))
    except ValidationError as exc:
        print(f"qmg: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NumericalError as exc:
        print(f"qmg: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"qmg: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

import csv
import json
import math
import textwrap
from pathlib import Path

import pytest

from qmg.cli import main
from qmg.errors import ValidationError
from qmg.scenario import LEDGER_HEADER, load_scenario, report, run

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


def _write(tmp_path, text, name="s.yaml"):
    p = tmp_path / name
    p.write_text(textwrap.dedent(text))
    return p


MINIMAL = """
market: {hbar_E: 1.0}
traders:
  - {id: 0, strategy: {kind: gaussian, q0: 0.0, sigma: 0.7071067811865476}, s: 1.0, d: 1.0}
  - {id: 1, strategy: {kind: gaussian, q0: 0.0, sigma: 0.7071067811865476}, s: 1.0, d: 1.0}
"""

DEPLETION = """
market: {hbar_E: 1.0}
traders:
  - {id: 0, strategy: {kind: gaussian, q0: 1.5, sigma: 0.7}, s: 0.0, d: 1.0}
  - {id: 1, strategy: {kind: gaussian, q0: -1.5, sigma: 0.7}, s: 1.0, d: 0.0}
rounds: 3
"""


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


class TestLoad:
    def test_minimal(self, tmp_path):
        sc = load_scenario(_write(tmp_path, MINIMAL))
        assert len(sc.traders) == 2
        assert sc.h_E == pytest.approx(2 * math.pi)
        assert sc.rounds == 1 and sc.zeno is None and sc.mode == "capital"

    def test_duplicate_id_is_named(self, tmp_path):
        text = MINIMAL.replace("id: 1,", "id: 0,")
        with pytest.raises(ValidationError, match="duplicate trader id 0"):
            load_scenario(_write(tmp_path, text))

    def test_unknown_kind_lists_supported(self, tmp_path):
        text = MINIMAL.replace("kind: gaussian, q0: 0.0, sigma: 0.7071067811865476}, s: 1.0, d: 1.0}\n  - {id: 1",
                               "kind: lorentzian}, s: 1.0, d: 1.0}\n  - {id: 1")
        with pytest.raises(ValidationError) as exc:
            load_scenario(_write(tmp_path, text))
        msg = str(exc.value)
        assert "traders[0].strategy.kind" in msg and "lorentzian" in msg
        assert "gaussian" in msg and "oscillator" in msg and "price_eigenstate" in msg

    def test_parse_error_has_position(self, tmp_path):
        p = _write(tmp_path, "market: {hbar_E: 1.0\ntraders: [\n")
        with pytest.raises(ValidationError, match=r"s\.yaml:\d+:\d+"):
            load_scenario(p)

    def test_unknown_top_level_key(self, tmp_path):
        with pytest.raises(ValidationError, match="unknown keys"):
            load_scenario(_write(tmp_path, MINIMAL + "extra: 1\n"))

    def test_missing_traders(self, tmp_path):
        with pytest.raises(ValidationError, match="traders"):
            load_scenario(_write(tmp_path, "market: {hbar_E: 1.0}\n"))

    @pytest.mark.parametrize("patch,where", [
        ("rounds: 0\n", "rounds"),
        ("zeno: {traders: [7], width: 0.05}\n", "zeno.traders"),
        ("zeno: {width: -1}\n", "zeno.width"),
    ])
    def test_invariants(self, tmp_path, patch, where):
        with pytest.raises(ValidationError, match=where):
            load_scenario(_write(tmp_path, MINIMAL + patch))

    def test_field_path_in_errors(self, tmp_path):
        text = MINIMAL.replace("sigma: 0.7071067811865476}, s: 1.0, d: 1.0}\n  - {id: 1",
                               "sigma: wide}, s: 1.0, d: 1.0}\n  - {id: 1")
        with pytest.raises(ValidationError, match=r"traders\[0\]\.strategy\.sigma"):
            load_scenario(_write(tmp_path, text))

    @pytest.mark.parametrize("spec", [
        "{kind: coherent, r: 0.5, eta: 0.8}",
        "{kind: oscillator, n: 2}",
        "{kind: uniform, lo: -1, hi: 1}",
        "{kind: uniform_supply, lo: -1, hi: 1}",
        "{kind: price_eigenstate, rep: demand, point: 0.2}",
        "{kind: superposition, of: [{kind: gaussian, q0: -1, sigma: 0.5}, {kind: gaussian, q0: 1, sigma: 0.5}]}",
    ])
    def test_every_kind_builds(self, tmp_path, spec):
        text = f"""
        traders:
          - {{id: 0, strategy: {spec}, s: 1.0, d: 1.0}}
        """
        assert len(load_scenario(_write(tmp_path, text)).traders) == 1


class TestRun:
    def test_symmetric_round(self, tmp_path):
        ledger = run(load_scenario(_write(tmp_path, MINIMAL)))
        e = ledger[0]
        assert e.traded and abs(e.ln_c_star) < 1e-6
        assert sorted(e.delta_money.values()) == pytest.approx([-0.5, 0.5], abs=1e-9)

    def test_multi_round_bookkeeping(self, tmp_path):
        sc = load_scenario(_write(tmp_path, DEPLETION))
        ledger = run(sc)
        assert [e.division for e in ledger] == [1, 1, 1]
        money0 = [e.balance_money[0] for e in ledger]
        assert money0 == sorted(money0, reverse=True) and money0[-1] < 0.5
        init = {d.trader_id: (d.s, d.d) for d in sc.traders}
        for k, (s, d) in init.items():
            assert ledger[-1].balance_g[k] == pytest.approx(s + sum(e.delta_g[k] for e in ledger), abs=1e-12)
            assert ledger[-1].balance_money[k] == pytest.approx(d + sum(e.delta_money[k] for e in ledger), abs=1e-12)
        for e in ledger:
            assert abs(sum(e.delta_money.values())) <= 1e-9 * e.turnover
            assert all(v >= -1e-9 for v in e.balance_money.values())
            assert all(v >= -1e-9 for v in e.balance_g.values())

    def test_zeno_flags_no_trade(self):
        sc = load_scenario(SCENARIOS / "zeno.yaml")
        e = run(sc)[0]
        assert not e.traded and e.reason == "zeno-collapse"


class TestCli:
    def test_run_outputs_and_determinism(self, tmp_path):
        src = _write(tmp_path, DEPLETION)
        assert main(["run", str(src), "--out", str(tmp_path / "a")]) == 0
        assert main(["run", str(src), "--out", str(tmp_path / "b")]) == 0
        for name in ("ledger.csv", "rounds.csv", "manifest.json"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
        rows = _rows(tmp_path / "a" / "ledger.csv")
        assert tuple(rows[0]) == LEDGER_HEADER
        assert len(rows) == 6
        manifest = json.loads((tmp_path / "a" / "manifest.json").read_text())
        assert manifest["resolved"]["h_E"] == pytest.approx(2 * math.pi)
        assert manifest["scenario"]["rounds"] == 3

    def test_no_trade_rows(self, tmp_path):
        assert main(["run", str(SCENARIOS / "zeno.yaml"), "--out", str(tmp_path)]) == 0
        rows = _rows(tmp_path / "ledger.csv")
        assert all(r["division"] == "-1" and r["ln_c_star"] == "nan" for r in rows)
        assert _rows(tmp_path / "rounds.csv")[0]["reason"] == "zeno-collapse"

    def test_clear_prints_json(self, tmp_path, capsys):
        assert main(["clear", str(_write(tmp_path, MINIMAL)), "--round", "1"]) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["traded"] and abs(out["ln_c_star"]) < 1e-6

    def test_clear_later_round_matches_run(self, tmp_path, capsys):
        src = _write(tmp_path, DEPLETION)
        assert main(["clear", str(src), "--round", "3"]) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["ln_c_star"] == run(load_scenario(src))[2].ln_c_star

    def test_tol_override(self, tmp_path):
        src = _write(tmp_path, MINIMAL)
        assert main(["--tol", "1e-6", "run", str(src), "--out", str(tmp_path / "o")]) == 0
        manifest = json.loads((tmp_path / "o" / "manifest.json").read_text())
        assert manifest["resolved"]["tol"] == 1e-6

    def test_report_wigner(self, tmp_path):
        assert main(["report", str(SCENARIOS / "eigenstate.yaml"), "--what", "wigner", "--out", str(tmp_path)]) == 0
        w = [float(r["w"]) for r in _rows(tmp_path / "wigner.csv")]
        assert min(w) < 0
        giffen = json.loads((tmp_path / "giffen.json").read_text())
        assert giffen["giffen"] and giffen["min"] == min(w)

    def test_report_thermal_curves_monotone(self, tmp_path):
        assert main(["report", str(SCENARIOS / "thermal.yaml"), "--what", "curves", "--out", str(tmp_path)]) == 0
        fd = [float(r["F"]) for r in _rows(tmp_path / "demand_curve.csv")]
        fs = [float(r["F"]) for r in _rows(tmp_path / "supply_curve.csv")]
        assert all(b >= a - 1e-12 for a, b in zip(fd, fd[1:]))
        assert all(b <= a + 1e-12 for a, b in zip(fs, fs[1:]))

    def test_report_is_deterministic(self, tmp_path):
        for d in ("a", "b"):
            assert main(["report", str(SCENARIOS / "thermal.yaml"), "--what", "wigner", "--out", str(tmp_path / d)]) == 0
        for name in ("wigner.csv", "giffen.json", "manifest.json"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_exit_code_validation(self, tmp_path, capsys):
        src = _write(tmp_path, MINIMAL.replace("id: 1,", "id: 0,"))
        assert main(["run", str(src), "--out", str(tmp_path / "o")]) == 2
        assert "duplicate trader id 0" in capsys.readouterr().err

    def test_exit_code_numerical(self, tmp_path):
        src = _write(tmp_path, MINIMAL + "report: {sigma: 1.0, a_range: [0.5, 2.0]}\n")
        assert main(["report", str(src), "--what", "fixed_point", "--out", str(tmp_path / "o")]) == 3

    def test_exit_code_truncation(self, tmp_path):
        src = _write(tmp_path, MINIMAL + "report: {beta: 1.0, n_max: 2, thermal: series}\n")
        assert main(["report", str(src), "--what", "wigner", "--out", str(tmp_path / "o")]) == 3

    def test_exit_code_io(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        src = _write(tmp_path, MINIMAL)
        assert main(["run", str(src), "--out", str(blocker / "sub")]) == 4
        assert main(["run", str(tmp_path / "missing.yaml"), "--out", str(tmp_path / "o")]) == 4

    def test_report_api_returns_paths(self, tmp_path):
        sc = load_scenario(_write(tmp_path, MINIMAL))
        paths = report(sc, "fixed_point", tmp_path)
        assert {p.name for p in paths} == {"fixed_point.csv", "manifest.json"}

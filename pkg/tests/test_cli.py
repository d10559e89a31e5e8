import csv
import io
import json
import subprocess
import sys

import pytest

from cfprice.cli import EXIT_DOMAIN, EXIT_OK, EXIT_TOLERANCE, EXIT_USAGE, main

import reference as ref

MARKET = ["--spot", "100", "--strike", "100", "--rate", "0.05", "--maturity", "1"]


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = main(list(argv), stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


def run_json(*argv):
    code, out, err = run(*argv)
    return code, json.loads(out) if out else None, err


def test_price_bs():
    code, doc, _ = run_json("price", "--model", "bs", "--kind", "call", "--vol", "0.2", *MARKET)
    assert code == EXIT_OK
    assert set(doc) == {"command", "inputs", "result", "diagnostics"}
    assert doc["result"]["price"] == pytest.approx(ref.CALL_ATM, abs=1e-5)
    assert doc["result"]["formula"] == "bs"
    assert doc["inputs"]["spot"] == 100.0


@pytest.mark.parametrize("kind", ["call", "put"])
def test_price_american_psi_zero(kind):
    _, bs, _ = run_json("price", "--model", "bs", "--kind", kind, "--vol", "0.2", *MARKET)
    _, am, _ = run_json("price", "--model", "american", "--psi", "0", "--kind", kind,
                        "--vol", "0.2", *MARKET)
    assert am["result"]["price"] == bs["result"]["price"]
    assert am["result"]["formula"] == ("eq3" if kind == "call" else "eq4")


def test_price_bermudan_delta_zero():
    _, bs, _ = run_json("price", "--model", "bs", "--kind", "put", "--vol", "0.2", *MARKET)
    code, be, _ = run_json("price", "--model", "bermudan", "--delta", "0",
                           "--first-exercise", "0.5", "--vol", "0.2", *MARKET)
    assert code == EXIT_OK
    assert be["result"]["price"] == bs["result"]["price"]


def test_price_stochvol():
    code, doc, _ = run_json("price", "--model", "stochvol", "--beta", "0.2", "--lam", "0.5",
                            *MARKET)
    assert code == EXIT_OK
    assert doc["result"]["price"] == pytest.approx(ref.CALL_ATM, abs=1e-12)


def test_price_plain_and_csv():
    code, out, _ = run("price", "--model", "bs", "--kind", "call", "--vol", "0.2", *MARKET,
                       "--output", "plain")
    assert code == EXIT_OK and "result.price=10.45058357" in out
    code, out, _ = run("price", "--model", "bs", "--kind", "call", "--vol", "0.2", *MARKET,
                       "--output", "csv")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 1 and float(rows[0]["price"]) == pytest.approx(ref.CALL_ATM, abs=1e-12)
    assert "\r" not in out


@pytest.mark.parametrize("argv", [
    ["price", "--model", "bs", "--kind", "call"],                      # missing market
    ["price", "--model", "american", "--kind", "call", "--vol", "0.2", *MARKET],  # no psi
    ["price", "--model", "bogus", *MARKET],                             # bad choice
    ["price", "--model", "bermudan", "--kind", "call", "--delta", "0.1",
     "--first-exercise", "0.5", "--vol", "0.2", *MARKET],
    ["oracle-compare", "--model", "bermudan", "--oracle", "mc-gbm", "--delta", "0.1",
     "--first-exercise", "0.5", "--vol", "0.2", *MARKET],
    ["simulate-sqrtbm", "--dt", "0", "--n-steps", "5"],
    ["verify-pde", "--n-s", "1"],
    ["verify-pde", "--t-max", "1.0"],
    ["nonsense"],
])
def test_usage_errors(argv):
    code, _, _ = run(*argv)
    assert code == EXIT_USAGE


def test_domain_error():
    code, out, err = run("price", "--model", "bs", "--kind", "call", "--vol", "0.2",
                         "--spot", "-5", "--strike", "100", "--rate", "0.05", "--maturity", "1")
    assert code == EXIT_DOMAIN and out == "" and "DomainError" in err
    code, _, _ = run("price", "--model", "bermudan", "--delta", "0.1", "--first-exercise",
                     "0.2", "--now", "0.5", "--vol", "0.2", *MARKET)
    assert code == EXIT_DOMAIN


def test_verify_pde():
    code, doc, _ = run_json("verify-pde", "--tolerance", "1e-8")
    assert code == EXIT_OK and doc["result"]["passed"]
    assert doc["result"]["max_abs"] <= 1e-9
    assert doc["result"]["n_nodes"] == 101 * 91
    code, doc, _ = run_json("verify-pde", "--kind", "put", "--partials", "fd", "--tolerance", "1e-5")
    assert code == EXIT_OK


def test_verify_pde_rejects_payoff():
    code, doc, _ = run_json("verify-pde", "--candidate", "payoff", "--partials", "fd",
                            "--tolerance", "1e-3")
    assert code == EXIT_TOLERANCE and not doc["result"]["passed"]
    code, _, _ = run_json("verify-pde", "--candidate", "payoff", "--partials", "fd",
                          "--tolerance", "1e30")
    assert code == EXIT_OK


def test_simulate_csv():
    args = ("simulate-sqrtbm", "--dt", "0.01", "--n-steps", "5", "--seed", "17")
    code, out, err = run(*args)
    assert code == EXIT_OK
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0] == ["step", "t", "increment", "partial_sum"]
    assert len(rows) - 1 == 6
    assert rows[1] == ["0", "0.0", "0.0", "0.0"]
    diag = json.loads(err)
    assert diag["result"]["n"] == 5
    assert run(*args)[1] == out


def test_simulate_json_and_paths(tmp_path):
    csv_path = tmp_path / "p.csv"
    diag_path = tmp_path / "d.json"
    code, out, err = run("simulate-sqrtbm", "--dt", "0.01", "--n-steps", "3", "--output-path",
                         str(csv_path), "--diagnostics-path", str(diag_path))
    assert code == EXIT_OK and out == "" and err == ""
    assert csv_path.read_bytes().count(b"\n") == 5
    assert json.loads(diag_path.read_text())["command"] == "simulate-sqrtbm"
    code, doc, _ = run_json("simulate-sqrtbm", "--dt", "0.01", "--n-steps", "4", "--output",
                            "json", "--include-path")
    assert len(doc["result"]["path"]) == 5


def test_oracle_compare_tree():
    code, doc, _ = run_json("oracle-compare", "--model", "bs", "--oracle", "crr", "--kind",
                            "call", "--vol", "0.2", "--tree-steps", "10000", "--tolerance",
                            "1e-3", *MARKET)
    assert code == EXIT_OK and doc["result"]["verdict"] == "within_tolerance"
    code, doc, _ = run_json("oracle-compare", "--model", "bs", "--oracle", "crr", "--kind",
                            "call", "--vol", "0.2", "--tree-steps", "50", "--tolerance",
                            "1e-6", *MARKET)
    assert code == EXIT_TOLERANCE and doc["result"]["verdict"] == "outside_tolerance"


def test_oracle_compare_american_report_only():
    code, doc, _ = run_json("oracle-compare", "--model", "american", "--oracle", "crr-american",
                            "--kind", "put", "--psi", "0.1", "--vol", "0.2", *MARKET)
    assert code == EXIT_OK
    res = doc["result"]
    assert res["verdict"] == "report_only"
    assert res["abs_diff"] > 0 and res["oracle_price"] > 0


def test_oracle_compare_mc_seeds():
    code, doc, _ = run_json("oracle-compare", "--model", "bs", "--oracle", "mc-gbm", "--kind",
                            "call", "--vol", "0.2", "--n-paths", "20000", "--antithetic",
                            "--n-seeds", "5", "--min-pass-fraction", "0.6", *MARKET)
    assert code == EXIT_OK
    assert doc["result"]["n_runs"] == 5
    assert len(doc["diagnostics"]["estimates"]) == 5


def test_oracle_compare_eq6():
    code, doc, _ = run_json("oracle-compare", "--model", "stochvol", "--oracle", "mc-eq6",
                            "--beta", "0.2", "--lam", "0.1", "--n-paths", "2000",
                            "--n-steps", "20", *MARKET)
    assert code == EXIT_OK
    assert doc["result"]["verdict"] == "report_only"
    assert "perturbation_mean" in doc["diagnostics"]["estimates"][0]["diagnostics"]


def test_json_round_trip_and_determinism():
    args = ("oracle-compare", "--model", "bs", "--oracle", "mc-gbm", "--kind", "put", "--vol",
            "0.3", "--n-paths", "10000", "--seed", "99", *MARKET)
    code, out, _ = run(*args)
    assert code == EXIT_OK
    parsed = json.loads(out)
    assert json.loads(json.dumps(parsed)) == parsed
    assert run(*args)[1] == out


def test_config_file(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"model": "bs", "kind": "call", "spot": 100, "strike": 100,
                               "rate": 0.05, "vol": 0.2, "maturity": 1}))
    code, doc, _ = run_json("price", "--config", str(cfg))
    assert code == EXIT_OK
    assert doc["result"]["price"] == pytest.approx(ref.CALL_ATM, abs=1e-12)
    code, doc, _ = run_json("price", "--config", str(cfg), "--kind", "put")
    assert doc["result"]["price"] == pytest.approx(ref.PUT_ATM, abs=1e-12)
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"colour": "blue"}))
    assert run("price", "--config", str(bad))[0] == EXIT_USAGE
    assert run("price", "--config", str(tmp_path / "missing.json"))[0] == EXIT_USAGE


def test_sweep():
    code, out, _ = run("sweep", "--model", "american", "--kind", "put", "--psi", "0.1",
                       "--vol", "0.2", "--param", "spot", "--start", "80", "--stop", "120",
                       "--num", "5", "--strike", "100", "--rate", "0.05", "--maturity", "1")
    assert code == EXIT_OK
    rows = list(csv.DictReader(io.StringIO(out)))
    assert [float(r["spot"]) for r in rows] == [80.0, 90.0, 100.0, 110.0, 120.0]
    prices = [float(r["price"]) for r in rows]
    assert prices == sorted(prices, reverse=True)
    assert float(rows[2]["price"]) == pytest.approx(ref.AMERICAN_PUT_ATM, abs=1e-11)


def test_console_script():
    proc = subprocess.run([sys.executable, "-m", "cfprice", "price", "--model", "bs", "--kind",
                           "call", "--vol", "0.2", *MARKET], capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["result"]["price"] == pytest.approx(ref.CALL_ATM, abs=1e-12)
    proc = subprocess.run([sys.executable, "-m", "cfprice", "price", "--model", "bs"],
                          capture_output=True, text=True)
    assert proc.returncode == 2

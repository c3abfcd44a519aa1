import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from entroflux import classical as cl
from entroflux.cli import EXIT_NUMERIC, EXIT_OK, EXIT_USAGE, main

SMALL = ["--n", "3", "--m", "40"]


def run(argv, capsys):
    code = main(argv)
    return code, capsys.readouterr().out


def table(text):
    rows = list(csv.reader(io.StringIO(text)))
    return rows[0], np.array([[float(x) for x in r] for r in rows[1:]])


def test_chain_sigma(tmp_path, capsys):
    out = tmp_path / "sigma.csv"
    code, _ = run(["chain-sigma", *SMALL, "--t-max", "20", "--dt", "2", "--out", str(out)], capsys)
    assert code == EXIT_OK
    head, data = table(out.read_text())
    assert head == ["t", "mean_ep", "steady_ref"]
    assert len(data) == 10 and np.all(data[:, 1] >= 0)
    assert data[0, 2] == pytest.approx(cl.chain_steady(0.5, 1.0).entropy_production)
    man = json.loads((tmp_path / "sigma.csv.manifest.json").read_text())
    assert man["command"] == "chain-sigma" and man["schema"] == "entroflux-csv/1"
    assert str(out) in man["outputs"]


def test_determinism(tmp_path, capsys):
    argv = ["chain-eofalpha", *SMALL, "--times", "5,10", "--points", "5"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(argv + ["--out", str(a)]) == EXIT_OK
    assert main(argv + ["--out", str(b)]) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()


def test_eofalpha_endpoints(capsys):
    code, text = run(["chain-eofalpha", *SMALL, "--times", "5", "--points", "3"], capsys)
    assert code == EXIT_OK
    head, data = table(text)
    assert head == ["alpha", "e_t/t@5", "e_closed"]
    assert data[0, 1] == 0.0 and data[-1, 1] == 0.0
    assert data[1, 1] < 0


def test_chain_rate_minimum(capsys):
    code, text = run(["chain-rate", "--points", "241"], capsys)
    assert code == EXIT_OK
    _, data = table(text)
    s, I, Ieq = data.T
    step = s[1] - s[0]
    assert abs(s[np.argmin(I)] - cl.KAPPA * (2.0 - 1.0)) <= step
    assert I.min() == pytest.approx(0, abs=1e-3)
    assert s[np.argmin(Ieq)] == pytest.approx(0, abs=step)


def test_chain_rate_equilibrium(capsys):
    code, text = run(["chain-rate", "--beta-l", "0.8", "--beta-r", "0.8", "--points", "11"], capsys)
    _, data = table(text)
    assert np.allclose(data[:, 1], data[:, 2])


def test_usage_errors(capsys):
    assert main(["chain-sigma", "--dt", "-1"]) == EXIT_USAGE
    assert main(["no-such-command"]) == EXIT_USAGE
    assert main(["xy-eplus", "--J", "0"]) == EXIT_USAGE
    assert main(["chain-eofalpha", "--times", "a,b"]) == EXIT_USAGE
    assert main(["ebb-e2plus", "--model-file", "/nonexistent.json"]) == EXIT_USAGE
    assert main(["fcs", "--t", "0"]) == EXIT_USAGE


def test_invalid_parameters(capsys):
    assert main(["chain-eofalpha", "--n", "1", "--m", "3", "--beta-l", "1", "--beta-r", "-1"]) == EXIT_USAGE
    assert main(["chain-sigma", "--n", "5", "--m", "3"]) == EXIT_USAGE
    assert main(["fcs", "--model", "xy", "--size", "5"]) == EXIT_USAGE


def test_numeric_failure_exit_code(monkeypatch, capsys):
    from entroflux import cli
    from entroflux.numerics import QuadratureFailure

    def boom(args, man):
        raise QuadratureFailure(1.0)

    monkeypatch.setitem(cli.COMMANDS, "xy-eplus", boom)
    assert main(["xy-eplus"]) == EXIT_NUMERIC
    assert "numerical failure" in capsys.readouterr().err


def test_qsys_verify(capsys):
    code, text = run(["qsys-verify", "--n-systems", "3"], capsys)
    assert code == EXIT_OK
    rep = json.loads(text)
    assert all(r["pass"] for r in rep.values())
    assert {"es_symmetry", "fcs_two_time", "quasifree_fock"} <= set(rep)


def test_ebb_and_xy_curves(tmp_path, capsys):
    code, text = run(["ebb-e2plus", "--points", "5"], capsys)
    assert code == EXIT_OK
    head, data = table(text)
    assert head == ["alpha", "e_plus", "in_domain"]
    assert data[:, 1] == pytest.approx(data[::-1, 1], abs=1e-9)
    doc = {"sample": {"chain": 1}, "leads": [{"beta": 1.0}, {"beta": 0.5}], "lambda": -0.5}
    f = tmp_path / "m.json"
    f.write_text(json.dumps(doc))
    code, text2 = run(["ebb-e2plus", "--points", "5", "--model-file", str(f)], capsys)
    assert code == EXIT_OK and text2 == text
    code, text = run(["xy-eplus", "--points", "5", "--p", "1"], capsys)
    assert code == EXIT_OK
    _, data = table(text)
    assert np.all(data[:, 2] == 1)


def test_fcs_models(capsys):
    for model in ("qubit-toy", "ebb2", "xy"):
        extra = ["--lead-sites", "2"] if model == "ebb2" else ["--size", "4"] if model == "xy" else []
        code, text = run(["fcs", "--model", model, "--t", "1.5", *extra], capsys)
        assert code == EXIT_OK
        head, data = table(text)
        assert head == ["loc_1", "weight"]
        assert data[:, 1].sum() == pytest.approx(1.0, abs=1e-9)


def test_console_entry_point():
    r = subprocess.run([sys.executable, "-m", "entroflux.cli", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.strip()

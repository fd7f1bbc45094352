import csv
import io
import json

import pytest

from oracles import closed_form_infected_nu0
from wanewave.cli import main


def _run(capsys, argv):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def _table(text):
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(lines))))


@pytest.fixture(autouse=True)
def _one_job(monkeypatch):
    monkeypatch.setenv("WANEWAVE_JOBS", "1")


def test_no_arguments(capsys):
    code, out, err = _run(capsys, [])
    assert code == 2 and "usage" in err and out == ""


def test_unknown_flag_and_command(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["switches", "--nu", "1", "--bogus"])
    assert exc.value.code == 2
    assert "usage" in capsys.readouterr().err
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2


def test_switches_nu1(capsys):
    code, out, _ = _run(capsys, ["switches", "--nu", "1"])
    assert code == 0
    assert out.startswith("# wanewave")
    header = json.loads(out.splitlines()[1].split("config: ", 1)[1])
    assert header["params"]["nu"] == 1.0 and header["options"]["jobs"] == 1
    rows = _table(out)
    assert len(rows) == 10
    assert list(rows[0]) == ["nu", "tau_star", "omega", "branch", "n", "delta"]
    assert float(rows[-1]["tau_star"]) == pytest.approx(13.39, abs=0.02)


def test_switch_intervals_file(capsys, tmp_path):
    path = tmp_path / "iv.csv"
    code, _, _ = _run(capsys, ["switches", "--nu", "4.8", "--intervals", str(path)])
    assert code == 0
    rows = _table(path.read_text())
    assert [r["verdict"] for r in rows] == ["stable", "unstable", "stable", "unstable", "stable"]


def test_equilibrium_nu0_closed_form(capsys):
    code, out, _ = _run(capsys, ["equilibrium", "--nu", "0", "--tau", "7"])
    assert code == 0
    row = _table(out)[0]
    assert float(row["i"]) == pytest.approx(closed_form_infected_nu0(255.3, 17.0, 0.02, 7.0), abs=1e-12)


def test_input_errors(capsys, tmp_path):
    assert _run(capsys, ["equilibrium", "--beta", "10", "--tau", "1"])[0] == 2
    assert _run(capsys, ["equilibrium", "--nu", "-1"])[0] == 2
    assert _run(capsys, ["eigs", "--nu", "1"])[0] == 2
    assert _run(capsys, ["equilibrium", "--config", str(tmp_path / "missing.json")])[0] == 2


def test_config_file_with_flag_override(capsys, tmp_path):
    cfg = tmp_path / "p.json"
    cfg.write_text(json.dumps({"r0": 15, "gamma": 17, "d": 0.02, "nu": 2.0, "tau": 3.0}))
    code, out, _ = _run(capsys, ["equilibrium", "--config", str(cfg), "--tau", "7", "--nu", "0"])
    assert code == 0
    row = _table(out)[0]
    assert float(row["tau"]) == 7.0 and float(row["nu"]) == 0.0 and float(row["beta"]) == pytest.approx(255.3)


def test_jobs_env_fallback(capsys, monkeypatch):
    monkeypatch.setenv("WANEWAVE_JOBS", "3")
    code, out, _ = _run(capsys, ["equilibrium", "--tau", "1", "--nu", "1"])
    assert code == 0 and '"jobs": 3' in out
    code, out, _ = _run(capsys, ["equilibrium", "--tau", "1", "--nu", "1", "--jobs", "1"])
    assert '"jobs": 1' in out
    monkeypatch.setenv("WANEWAVE_JOBS", "many")
    assert _run(capsys, ["equilibrium", "--tau", "1"])[0] == 2


def test_eigs_and_out_file(capsys, tmp_path):
    path = tmp_path / "eigs.csv"
    code, out, _ = _run(capsys, ["eigs", "--nu", "4.8", "--tau", "2", "--count", "4", "--out", str(path)])
    assert code == 0 and out == ""
    rows = _table(path.read_text())
    assert len(rows) == 4 and float(rows[0]["re"]) > 0 and rows[0]["source"] == "newton-refined"


def test_hopf_converge(capsys):
    code, out, _ = _run(capsys, ["hopf-converge", "--nu", "3.2", "--m-list", "10,20", "--reference", "5.367864016"])
    assert code == 0
    rows = _table(out)
    assert [int(r["m"]) for r in rows] == [10, 20]
    assert float(rows[1]["error"]) < float(rows[0]["error"])


def test_simulate(capsys):
    code, out, _ = _run(capsys, ["simulate", "--nu", "3.2", "--tau", "4", "--s0", "0.07", "--i0", "0.001", "--tmax", "2", "--dt", "0.5"])
    assert code == 0
    rows = _table(out)
    assert [float(r["t"]) for r in rows] == [0.0, 0.5, 1.0, 1.5, 2.0]
    assert float(rows[0]["Y"]) == pytest.approx(0.004)


def test_attractors_and_diagram(capsys):
    code, out, _ = _run(capsys, ["attractors", "--nu", "4.8", "--tau", "4", "--grid", "2", "--transient", "150", "--window", "40"])
    assert code == 0
    kinds = {r["kind"] for r in _table(out)}
    assert "cycle" in kinds
    code, out, _ = _run(capsys, ["diagram", "--nu", "4.8", "--tau-min", "3.8", "--tau-max", "4.0", "--steps", "2", "--both",
                                 "--transient", "60", "--window", "30"])
    assert code == 0
    rows = _table(out)
    assert [r["sweep"] for r in rows] == ["up", "up", "down", "down"]
    assert list(rows[0]) == ["tau", "sweep", "kind", "i_min", "i_max", "period"]


def test_region_commands(capsys):
    code, out, _ = _run(capsys, ["region", "--nu-min", "4", "--nu-max", "4.8", "--nu-steps", "2", "--tau-limit", "10"])
    assert code == 0
    assert {float(r["nu"]) for r in _table(out)} == {4.0, 4.8}
    code, out, _ = _run(capsys, ["region-dnu", "--d-min", "0.01", "--d-max", "0.02", "--d-steps", "2", "--nu-min", "2", "--nu-max", "2", "--nu-steps", "1"])
    assert code == 0
    rows = _table(out)
    assert [r["verdict"] for r in rows] == ["unstable", "unstable"]
    assert '"tau": 7.0' in out

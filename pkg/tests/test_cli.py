"""End-to-end checks of the ssmap command line interface."""
import json

import pytest

from sunshadow import cli


def run(argv, capsys):
    code = cli.main(argv)
    out = capsys.readouterr().out
    return code, out


def test_classify_json_stdout(capsys):
    code, out = run(["classify", "--ell", "348600", "--hs=-1e-2"], capsys)
    assert code == 0
    doc = json.loads(out)
    assert doc["config"]["command"] == "classify"
    assert doc["config"]["schema"] == "1"
    assert doc["region"] in {"I", "II", "III", "IV"}


def test_periods_matches_library(capsys):
    code, out = run(["periods", "--ell", "348600", "--hs=-0.12"],
                    capsys)
    assert code == 0
    doc = json.loads(out)
    assert doc["T_u"] > 0 and doc["T_v"] > 0
    assert doc["T_v"] / doc["T_u"] < 1.0


def test_config_file_and_flag_override(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"ell": 348600.0, "hs": -0.12,
                               "steps_per_period": 500}))
    code, out = run(["periods", "--config", str(cfg)], capsys)
    assert code == 0
    doc = json.loads(out)
    assert doc["config"]["steps_per_period"] == 500
    # flags beat the config file
    code, out = run(["periods", "--config", str(cfg),
                     "--steps-per-period", "600"], capsys)
    doc2 = json.loads(out)
    assert doc2["config"]["steps_per_period"] == 600
    assert doc2["T_u"] == doc["T_u"]


def test_output_file_and_determinism(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for path in (a, b):
        code = cli.main(["brake", "--ell", "348600", "--out", str(path)])
        capsys.readouterr()
        assert code == 0
    assert a.read_bytes() == b.read_bytes()
    doc = json.loads(a.read_text())
    assert doc["solution"]["hs_hat"] < 0


def test_scan_csv_layout(tmp_path, capsys):
    out_path = tmp_path / "scan.csv"
    code = cli.main(["scan", "--ell", "0", "--umin", "2400", "--umax",
                     "3100", "--pumin", "0", "--pumax", "0", "--nx", "3",
                     "--ny", "1", "--out", str(out_path)])
    capsys.readouterr()
    assert code == 0
    lines = out_path.read_text().splitlines()
    assert lines[0].startswith("# config:")
    header = lines[1].split(",")
    assert header[:2] == ["u", "pu"]
    assert len(lines) == 2 + 3


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as ei:
        cli.main(["--version"])
    assert ei.value.code == 0
    assert "ssmap" in capsys.readouterr().out


def test_config_invalid_exit_code(capsys):
    code = cli.main(["classify", "--ell", "348600", "--hs=-1e-2",
                     "--R=-5"])
    assert code == 2


def test_runtime_error_exit_code(capsys):
    # Newton from a forbidden seed cannot converge
    code = cli.main(["fixed", "--ell", "348600", "--point", "100,0"])
    assert code == 1

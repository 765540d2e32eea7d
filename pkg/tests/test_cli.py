import json
from pathlib import Path

import jsonschema
import pytest

from badapprox.cli import main
from badapprox.runs import canonical_json, load_schema, read_record


def run(argv, tmp_path, capsys):
    code = main(argv + ["--cache", str(tmp_path / "runs")])
    out = capsys.readouterr()
    return code, out.out, out.err


def records(tmp_path):
    root = tmp_path / "runs"
    return sorted(root.iterdir()) if root.exists() else []


QUICK = [
    ["approx", "--entries", "phi", "--Q", "1000"],
    ["approx", "--entries", "1/2", "--c", "0.1", "--Q", "10"],
    ["orbit", "--entries", "phi", "--tmax", "1", "--dt", "0.01"],
    ["dani", "--entries", "0", "--c", "0.25", "--tmax", "2"],
    ["game", "--m", "1", "--beta", "1/10", "--rounds", "8", "--seed", "4", "--Q", "100"],
    ["cantor", "--d", "1", "--beta", "1/20", "--depth", "2"],
    ["cantor", "--d", "1", "--beta", "1/20", "--depth", "2", "--mode", "build"],
    ["boxdim", "--set", "ek", "--k", "2", "--max-depth", "8", "--smax", "10", "--seed", "3"],
    ["cover", "--c", "0.3", "--depth", "1", "--A0", "phi"],
    ["bounds", "--m", "1", "--n", "1", "--c", "0.01", "--d", "1", "--beta", "1/100", "--k", "8"],
]


@pytest.mark.parametrize("argv", QUICK, ids=lambda a: " ".join(a[:3]))
def test_commands_record_and_replay(argv, tmp_path, capsys):
    code, out, _ = run(argv, tmp_path, capsys)
    assert code == 0, out
    (rec,) = records(tmp_path)
    doc, payload, _ = read_record(rec)
    jsonschema.validate(json.loads(payload), load_schema("payload.schema.json"))
    assert doc["config"]["parameters"]["seed"] is not None
    assert main(["replay", str(rec)]) == 0
    assert "identical" in capsys.readouterr().out


def test_replay_detects_tampering(tmp_path, capsys):
    run(QUICK[0], tmp_path, capsys)
    (rec,) = records(tmp_path)
    p = rec / "payload.json"
    p.write_text(p.read_text().replace("1000", "1001"))
    assert main(["replay", str(rec)]) == 3


def test_records_are_never_overwritten(tmp_path, capsys):
    run(QUICK[0], tmp_path, capsys)
    run(QUICK[0], tmp_path, capsys)
    recs = records(tmp_path)
    assert len(recs) == 2
    assert (recs[0] / "payload.json").read_bytes() == (recs[1] / "payload.json").read_bytes()


def test_approx_output(tmp_path, capsys):
    code, out, _ = run(["approx", "--entries", "phi", "--Q", "10000", "--c", "0.43"], tmp_path, capsys)
    assert code == 0
    assert "0.38196601125" in out and "ViolatedBy(q=(1,))" in out
    code, out, _ = run(["approx", "--entries", "phi", "--Q", "10000", "--c", "0.38"], tmp_path, capsys)
    assert "ConsistentUpTo(10000)" in out


def test_orbit_csv(tmp_path, capsys):
    code, out, _ = run(["orbit", "--entries", "phi", "--tmax", "5", "--dt", "0.001"], tmp_path, capsys)
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "t,delta,witness"
    assert len(lines) == 5002
    deltas = [float(line.split(",")[1]) for line in lines[1:]]
    assert min(deltas) >= 0.618


def test_dani_output(tmp_path, capsys):
    code, out, _ = run(["dani", "--entries", "0", "--c", "0.25"], tmp_path, capsys)
    assert code == 0 and "EntersCuspAt(0.693147)" in out
    code, out, _ = run(["dani", "--entries", "phi", "--c", "0.38", "--tmax", "20"], tmp_path, capsys)
    assert "AvoidsCuspUpTo(20)" in out


def test_bounds_output(tmp_path, capsys):
    code, out, _ = run(["bounds", "--c", "0.01", "--k1", "1", "--k2", "1", "--p", "50"], tmp_path, capsys)
    assert code == 0
    assert "0.8019593625" in out and "0.9978285276" in out


def test_cantor_output(tmp_path, capsys):
    code, out, _ = run(["cantor", "--d", "1", "--beta", "0.02", "--depth", "4"], tmp_path, capsys)
    assert code == 0 and "min kept 46" in out and "bound    46" in out


@pytest.mark.parametrize(
    "argv",
    [
        ["approx", "--entries", "foo"],
        ["approx"],
        ["dani", "--entries", "phi", "--c", "2"],
        ["cover", "--t", "0.5"],
        ["cantor", "--d", "2", "--beta", "1/10"],
        ["game", "--beta", "1/2"],
        ["nosuchcommand"],
        ["approx", "--entries", "phi", "--Q", "-4"],
    ],
)
def test_usage_errors_exit_2(argv, tmp_path, capsys):
    code, _, _ = run(argv, tmp_path, capsys)
    assert code == 2
    assert records(tmp_path) == []


def test_search_failure_exit_3(tmp_path, capsys):
    code, _, err = run(
        ["orbit", "--entries", "0.31,0.77,0.52", "--tmax", "8", "--dt", "0.05", "--search-bound", "1"],
        tmp_path,
        capsys,
    )
    assert code == 3 and "--search-bound" in err


def test_config_file_and_flag_precedence(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment\nentries = 1/3\nQ = 50\nc = 0.2\n")
    code, out, _ = run(["approx", "--config", str(cfg), "--Q", "7"], tmp_path, capsys)
    assert code == 0
    (rec,) = records(tmp_path)
    params = json.loads((rec / "payload.json").read_text())["parameters"]
    assert params["entries"] == "1/3" and params["Q"] == 7 and params["c"] == "1/5"
    cfg.write_text("bogus = 1\n")
    assert run(["approx", "--config", str(cfg)], tmp_path, capsys)[0] == 2


def test_cache_from_environment(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("BADAPPROX_CACHE", str(tmp_path / "envcache"))
    assert main(["bounds", "--m", "2", "--n", "2"]) == 0
    assert len(list((tmp_path / "envcache").iterdir())) == 1


def test_out_file_is_canonical(tmp_path, capsys):
    out = tmp_path / "p.json"
    code, _, _ = run(["bounds", "--m", "3", "--n", "1", "--out", str(out)], tmp_path, capsys)
    assert code == 0
    doc = json.loads(out.read_text())
    assert doc["result"]["p_exponent"] == "6"
    assert out.read_text() == canonical_json(doc)
    assert Path(out).read_text() == (records(tmp_path)[0] / "payload.json").read_text()

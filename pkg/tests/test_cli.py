import csv
import io
import json

import pytest

from qadjust import ami_q, from_counts
from qadjust.cli import main
from qadjust.fixtures import SCENARIOS
from qadjust.report import compare


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture
def table_file(tmp_path):
    path = tmp_path / "u1.txt"
    rows = SCENARIOS["balanced-3"]["U1"]
    path.write_text("# U1 against V\n" + "\n".join(" ".join(map(str, r)) for r in rows) + "\n")
    return path


def test_identical_labelings(tmp_path, capsys):
    path = tmp_path / "pairs.txt"
    path.write_text("a x\na x\nb y\nb,y\nc z\nc z\n")
    code, out, _ = run(capsys, "compare", "--labels", str(path), "--q", "2", "--format", "json")
    assert code == 0
    doc = json.loads(out)
    m = doc["measures"]
    for name in ("RI", "ARI", "AMI", "AMI_2"):
        assert m[name] == 1.0
    assert m["VI"] == 0.0
    assert m["p_value_bound_2"] is not None


def test_table_values_match_library(table_file, capsys):
    code, out, _ = run(capsys, "compare", "--table", str(table_file), "--q", "0.5,2.5")
    assert code == 0
    m = json.loads(out)["measures"]
    t = from_counts(SCENARIOS["balanced-3"]["U1"])
    assert m == compare(t, [0.5, 2.5]).to_dict()["measures"]
    assert m["AMI_0.5"] == pytest.approx(ami_q(t, 0.5), rel=1e-12)
    assert m["AMI_2.5"] == pytest.approx(ami_q(t, 2.5), rel=1e-12)
    assert list(m)[:5] == ["RI", "ARI", "MI", "AMI", "VI"]


def test_json_round_trip_and_csv_agreement(table_file, capsys):
    _, out_json, _ = run(capsys, "compare", "--table", str(table_file), "--q", "2,3")
    _, out_csv, _ = run(capsys, "compare", "--table", str(table_file), "--q", "2,3", "--format", "csv")
    doc = json.loads(out_json)
    again = compare(from_counts(doc["table"]), doc["q"]).to_dict()["measures"]
    assert again == doc["measures"]
    rows = list(csv.reader(io.StringIO(out_csv)))
    assert rows[0] == ["measure", "value"]
    parsed = {name: (float(v) if v else None) for name, v in rows[1:]}
    assert parsed == doc["measures"]
    assert "\r" not in out_csv


def test_human_format(table_file, capsys):
    code, out, _ = run(capsys, "compare", "--table", str(table_file), "--format", "human")
    assert code == 0
    assert out.startswith("N = 150, 3 x 3 table")
    assert "0.785927" in out


def test_skip_and_force_smi(tmp_path, capsys):
    path = tmp_path / "big.txt"
    path.write_text("1500 1000\n1000 1500\n")
    code, out, err = run(capsys, "compare", "--table", str(path), "--q", "2")
    assert code == 0 and "force-smi" in err
    m = json.loads(out)["measures"]
    assert "SMI_2" not in m
    code, out, _ = run(capsys, "compare", "--table", str(path), "--q", "2", "--skip-smi")
    assert code == 0 and "SMI_2" not in json.loads(out)["measures"]
    assert json.loads(out)["smi_computed"] is False


def test_measure_selection(table_file, capsys):
    code, out, _ = run(capsys, "compare", "--table", str(table_file), "--measures", "ARI,AMI_2")
    assert code == 0 and list(json.loads(out)["measures"]) == ["ARI", "AMI_2"]
    code, _, err = run(capsys, "compare", "--table", str(table_file), "--measures", "XYZ")
    assert code == 4


def test_parse_error_exit_code(tmp_path, capsys):
    path = tmp_path / "bad.txt"
    path.write_text("1 2\n# fine\n3 x\n")
    code, out, err = run(capsys, "compare", "--table", str(path))
    assert code == 2 and "line 3" in err and out == ""
    path.write_text("a b\nc\n")
    code, _, err = run(capsys, "compare", "--labels", str(path))
    assert code == 2 and "line 2" in err
    code, _, _ = run(capsys, "compare", "--table", str(tmp_path / "missing.txt"))
    assert code == 2


def test_degenerate_exit_code(capsys):
    code, out, err = run(capsys, "compare", "--inline", "3 4", "--q", "2")
    assert code == 3 and "SMI" in err and out == ""


def test_bad_q_exit_code(capsys):
    code, _, err = run(capsys, "compare", "--inline", "3,1;1,3", "--q", "-2")
    assert code == 4


def test_moments_command(table_file, capsys):
    code, out, _ = run(capsys, "moments", "--table", str(table_file), "--q", "2,shannon")
    assert code == 0
    doc = json.loads(out)
    assert [m["q"] for m in doc["moments"]] == ["2", "shannon"]
    code, out, _ = run(capsys, "moments", "--table", str(table_file), "--q", "2", "--method", "asymptotic",
                       "--format", "csv")
    assert code == 0 and "asymptotic" in out
    code, _, _ = run(capsys, "moments", "--table", str(table_file), "--q", "shannon", "--method", "asymptotic")
    assert code == 4
    code, _, _ = run(capsys, "moments", "--table", str(table_file), "--method", "mc")
    assert code == 4
    code, out, _ = run(capsys, "moments", "--inline", "3,1;1,3", "--method", "mc", "--seed", "2",
                       "--samples", "2000")
    assert code == 0 and json.loads(out)["moments"][0]["seed"] == 2


def test_oracle_command(capsys):
    with pytest.raises(SystemExit):
        main(["oracle", "--inline", "2,1;1,2"])
    capsys.readouterr()
    code, out, _ = run(capsys, "oracle", "--inline", "2,1;1,2", "--seed", "1")
    assert code == 0
    res = json.loads(out)["results"][0]
    assert res["method"] == "enumeration" and res["seed"] == 1
    code, out, _ = run(capsys, "oracle", "--inline", "5,3;2,6", "--seed", "4", "--method", "mc",
                       "--samples", "500", "--format", "csv")
    assert code == 0 and "monte-carlo" in out
    _, again, _ = run(capsys, "oracle", "--inline", "5,3;2,6", "--seed", "4", "--method", "mc",
                      "--samples", "500", "--format", "csv")
    assert again == out


def test_experiment_command(tmp_path, capsys, monkeypatch):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"n_trials": 5, "r_range": [2, 3], "seed": 3}))
    out_path = tmp_path / "rows.csv"
    side = tmp_path / "rows.json"
    code, out, _ = run(capsys, "experiment", "baseline-vary-r", "--config", str(cfg), "--out", str(out_path),
                       "--sidecar", str(side))
    assert code == 0 and out == ""
    assert out_path.read_text().startswith("experiment,measure,q,x,mean,std,n\n")
    meta = json.loads(side.read_text())
    assert meta["seed"] == 3 and meta["config"]["r_range"] == [2, 3]
    assert sorted(p.name for p in tmp_path.iterdir()) == ["cfg.json", "rows.csv", "rows.json"]

    monkeypatch.setenv("QADJUST_THREADS", "0")
    code, _, _ = run(capsys, "experiment", "baseline-vary-r", "--config", str(cfg))
    assert code == 4
    monkeypatch.setenv("QADJUST_THREADS", "2")
    code, out, _ = run(capsys, "experiment", "baseline-vary-r", "--config", str(cfg), "--format", "json")
    assert code == 0 and len(json.loads(out)["rows"]) == 2 * 4 * 2

    cfg.write_text(json.dumps({"experiment_id": "selection-bias"}))
    code, _, _ = run(capsys, "experiment", "baseline-vary-r", "--config", str(cfg))
    assert code == 4
    cfg.write_text("{not json")
    code, _, err = run(capsys, "experiment", "baseline-vary-r", "--config", str(cfg))
    assert code == 4 and "line 1" in err
    code, out, _ = run(capsys, "experiment", "scenario-q-sweep")
    assert code == 0 and "AMI_q[small-clusters/U1]" in out


def test_module_entry_point():
    import subprocess
    import sys

    proc = subprocess.run([sys.executable, "-m", "qadjust", "compare", "--inline", "4,0;0,4", "--skip-smi"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["measures"]["ARI"] == 1.0

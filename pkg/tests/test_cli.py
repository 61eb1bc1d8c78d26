import csv
import io
import json
import math
import re
import subprocess
import sys
from pathlib import Path

import jsonschema
import pytest

from wrglab.cli import EXPERIMENT_SCHEMA, FORMAT_VERSION, REPORT_SCHEMA, ExperimentConfig, run, summary_columns

ROOT = Path(__file__).resolve().parents[1]
GOLDEN = Path(__file__).parent / "golden"


def call(capsys, *argv):
    code = run(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_exact_hand_example(capsys):
    code, out, _ = call(capsys, "exact", "--n", "3", "--m", "1", "--weights", "1,1,1", "--vertex", "1")
    assert code == 0
    assert out.strip() == '{"1":0.5,"2":0.5}'


@pytest.mark.parametrize("path", sorted(GOLDEN.glob("*.json")), ids=lambda p: p.stem)
@pytest.mark.parametrize("method", ["dp", "enumerate"])
def test_exact_golden_files(capsys, path, method):
    golden = json.loads(path.read_text())
    assert golden["format_version"] == FORMAT_VERSION
    argv = ["exact", "--n", str(golden["n"]), "--m", str(golden["m"]),
            "--weights", ",".join(map(str, golden["weights"])),
            "--vertex", ",".join(map(str, golden["tracked"])), "--golden", "--method", method]
    code, out, _ = call(capsys, *argv)
    assert code == 0
    got = json.loads(out)
    assert got.keys() == golden.keys()
    assert got["table"].keys() == golden["table"].keys()
    for k, v in golden["table"].items():
        assert got["table"][k] == pytest.approx(v, abs=1e-15)
    assert sum(got["table"].values()) == pytest.approx(1.0, abs=1e-14)


def test_predict_mu(capsys):
    code, out, _ = call(capsys, "predict", "--model", "degenerate", "--m", "1", "--n", "1000000")
    assert code == 0
    data = json.loads(out)
    assert data["format_version"] == FORMAT_VERSION
    assert data["constants"]["mu"] == pytest.approx(1 - 1 / (2 * math.log(2)), abs=1e-15)


def test_simulate_is_byte_identical(capsys):
    argv = ["simulate", "--n", "100", "--replicas", "2", "--seed", "7"]
    first = call(capsys, *argv)[1]
    second = call(capsys, *argv)[1]
    assert first == second and len(first.splitlines()) == 2


def test_simulate_independent_of_parallelism(capsys):
    argv = ["simulate", "--n", "2000", "--replicas", "4", "--seed", "11"]
    one = call(capsys, *argv, "--parallel", "1")[1]
    two = call(capsys, *argv, "--parallel", "2")[1]
    assert one == two


def test_simulate_csv_columns(capsys):
    code, out, _ = call(capsys, "simulate", "--n", "500", "--replicas", "3", "--format", "csv", "--top-k", "2")
    assert code == 0
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0] == summary_columns(2)
    assert rows[0][:4] == ["replica", "max_degree", "I_n", "I_tilde_n"]
    assert [r[0] for r in rows[1:]] == ["0", "1", "2"]
    for r in rows[1:]:
        assert int(r[1]) == int(r[5])  # rank-1 degree is the maximum


@pytest.mark.parametrize("argv", [
    ["simulate", "--n", "0"],
    ["simulate", "--n", "10", "--model", "nosuchmodel"],
    ["exact", "--n", "3", "--weights", "1,2,1"],
    ["predict", "--model", "degenerate", "--n", "1000", "--query", "nonsense"],
    ["experiment", "--preset", "max-degree"],
    ["frobnicate"],
])
def test_config_errors_exit_2(capsys, argv):
    code, _, err = call(capsys, *argv)
    assert code == 2
    diag = json.loads(err.strip().splitlines()[-1])
    assert diag["exit_code"] == 2 and diag["error"] and diag["message"]


def _config(**over):
    data = {"preset": "max-degree", "model": {"class": "Degenerate"}, "n": [1000],
            "replicas": 30, "seed": 1}
    data.update(over)
    return data


def test_schema_rejects_unknown_keys():
    with pytest.raises(jsonschema.ValidationError):
        jsonschema.validate(_config(colour="blue"), EXPERIMENT_SCHEMA)
    with pytest.raises(jsonschema.ValidationError):
        jsonschema.validate(_config(params={"windows": []}), EXPERIMENT_SCHEMA)
    with pytest.raises(jsonschema.ValidationError):
        jsonschema.validate(_config(output={"dir": "x", "zip": True}), EXPERIMENT_SCHEMA)
    jsonschema.validate(_config(params={"halfwidth": 3}), EXPERIMENT_SCHEMA)


def test_config_round_trip():
    cfg = ExperimentConfig.from_dict(_config(params={"halfwidth": 3}))
    again = ExperimentConfig.from_dict(cfg.to_dict())
    assert again.to_dict() == cfg.to_dict()
    assert cfg.params["halfwidth"] == 3


def test_experiment_report_and_artifacts(capsys, tmp_path):
    config = tmp_path / "cfg.json"
    config.write_text(json.dumps(_config(output={"dir": str(tmp_path / "out"), "csv": True, "plots": True})))
    code, out, _ = call(capsys, "experiment", "--config", str(config))
    assert code == 0
    report = json.loads(out)
    jsonschema.validate(report, REPORT_SCHEMA)
    assert report["config"]["format_version"] == FORMAT_VERSION
    echo = ExperimentConfig.from_dict(report["config"])
    assert echo.to_dict() == report["config"]
    out_dir = tmp_path / "out"
    assert json.loads((out_dir / "report.json").read_text()) == report
    assert (out_dir / "functionals.csv").read_text().splitlines()[0]
    svgs = sorted(out_dir.glob("*.svg"))
    assert svgs
    first = [p.read_bytes() for p in svgs]
    call(capsys, "experiment", "--config", str(config))
    assert [p.read_bytes() for p in svgs] == first


def test_assert_mode_exit_3(capsys):
    # an impossible ratio band turns the run into an assertion failure
    params = json.dumps({"ratio_band": [5.0, 6.0]})
    argv = ["experiment", "--preset", "max-degree", "--model", "degenerate", "--n", "1000",
            "--replicas", "30", "--seed", "3", "--preset-params", params]
    assert call(capsys, *argv)[0] == 0
    code, _, err = call(capsys, *argv, "--assert")
    assert code == 3
    assert json.loads(err.strip().splitlines()[-1])["exit_code"] == 3


def test_print_schema(capsys):
    code, out, _ = call(capsys, "experiment", "--print-schema")
    assert code == 0 and json.loads(out)["title"] == "ExperimentConfig"


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "wrglab", "exact", "--n", "3", "--vertex", "1"],
                          capture_output=True, text=True, check=True)
    assert proc.stdout.strip() == '{"1":0.5,"2":0.5}'


def _help(sub):
    proc = subprocess.run([sys.executable, "-m", "wrglab", sub, "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    return proc.stdout


def test_help_lists_every_documented_flag():
    readme = (ROOT / "README.md").read_text()
    used: dict[str, set[str]] = {}
    for line in readme.splitlines():
        m = re.match(r"\s*(?:\$ )?wrglab (\w+)(.*)", line)
        if m:
            used.setdefault(m.group(1), set()).update(re.findall(r"(--[a-z][a-z-]*)", m.group(2)))
    assert used, "README shows no wrglab commands"
    for sub, flags in used.items():
        text = _help(sub)
        missing = [f for f in flags if f not in text]
        assert not missing, f"{sub} --help lacks {missing}"


@pytest.mark.parametrize("path", sorted((ROOT / "scripts" / "configs").glob("*.json")), ids=lambda p: p.stem)
def test_example_configs_validate(path):
    cfg = ExperimentConfig.from_dict(json.loads(path.read_text()))
    assert cfg.replicas >= 1 and cfg.n

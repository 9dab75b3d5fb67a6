import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from pbkernel import __version__
from pbkernel.cli import RunConfig, main, run, union_bound_split
from pbkernel.io import to_json
from pbkernel.registry import evaluate_certificate

CERTIFY = ["certify", "--bound", "pac-bayes-kl", "--emp", "0.1", "--kl", "2", "--n", "200", "--delta", "0.05"]


@pytest.fixture
def world_csv(tmp_path):
    path = tmp_path / "world.csv"
    path.write_text("0.3,0.5,0.2\n0.1,0.9,0.4\n0.6,0.2,0.3\n0.5,0.5,0.5\n")
    return path


@pytest.fixture
def ls_files(tmp_path):
    rng = np.random.default_rng(0)
    x = rng.standard_normal((200, 2))
    y = x @ [1.0, -0.5] + 0.2 * rng.standard_normal(200)
    data = tmp_path / "ls.csv"
    data.write_text("x1,x2,y\n" + "".join(f"{a!r},{b!r},{c!r}\n" for (a, b), c in zip(x.tolist(), y.tolist())))
    cfg = tmp_path / "moments.json"
    cfg.write_text(json.dumps({"moments": {"sigma": [[1, 0], [0, 1]], "s": [1.0, -0.5], "ey2": 1.29}}))
    return data, cfg


def test_certify_matches_library(capsys):
    assert main(CERTIFY) == 0
    out = capsys.readouterr().out
    cert = evaluate_certificate("pac-bayes-kl", 0.1, 2.0, 200, 0.05, {})
    expected = to_json({**cert.to_dict(), "tool_version": __version__, "seed": None}) + "\n"
    assert out == expected
    report = json.loads(out)
    assert report["paper_tag"] and report["params"]["n"] == 200


def test_invalid_delta(capsys):
    assert main(["certify", "--bound", "mcallester", "--emp", "0.1", "--kl", "1", "--n", "10", "--delta", "1.5"]) == 2
    assert "delta" in capsys.readouterr().err


def test_missing_input(capsys):
    assert main(["certify", "--bound", "mcallester", "--delta", "0.1"]) == 2
    assert "--emp" in capsys.readouterr().err


def test_unknown_command():
    assert run(RunConfig(command="nope")) == 2


def test_verify_exhaustive(world_csv, capsys):
    args = ["verify", "--world", str(world_csv), "--bound", "mcallester", "--delta", "0.05", "--trials", "exhaustive"]
    assert main(args) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["exact"] is True and report["violation_probability"] <= 0.05
    assert report["seed"] == 0 and report["tool_version"] == __version__


def test_verify_basic(world_csv, capsys):
    assert main(["verify", "--world", str(world_csv), "--bound", "basic", "--delta", "0.1", "--mode", "pointwise"]) == 0
    assert json.loads(capsys.readouterr().out)["violation_probability"] <= 0.1


def test_verify_inapplicable(world_csv):
    # a data-dependent prior rules out the data-free bounds
    args = ["verify", "--world", str(world_csv), "--bound", "mcallester", "--delta", "0.05", "--prior", "gibbs:1"]
    assert main(args) == 3


def test_malformed_world(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("0.5,0.5\n0.1,abc\n")
    assert main(["verify", "--world", str(bad), "--bound", "mcallester", "--delta", "0.05"]) == 2
    assert main(["verify", "--world", str(tmp_path / "missing.csv"), "--bound", "mcallester", "--delta", "0.05"]) == 2


def test_ls_certify(ls_files, capsys):
    data, cfg = ls_files
    args = ["ls-certify", "--data", str(data), "--config", str(cfg), "--alpha", "0.1", "--gamma", "10", "--lambda", "1"]
    assert main(args) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["kind"] == "ls-gap" and report["is_gap_bound"] is True


def test_ls_margin_nonpositive(ls_files, capsys):
    data, cfg = ls_files
    args = ["ls-certify", "--data", str(data), "--config", str(cfg), "--alpha", "0.1", "--gamma", "10",
            "--lambda", "1e-12"]
    code = main(args)
    err = capsys.readouterr().err
    assert code == 3 and "not applicable" in err


def test_ls_verify(tmp_path, capsys):
    cfg = tmp_path / "design.json"
    cfg.write_text(json.dumps({"design": {"sigma": [[1.0]], "w_star": [0.5], "noise_std": 0.1, "n": 50},
                               "alpha": 0.1, "gamma": 5.0, "lambda": 1.0, "datasets": 20}))
    assert main(["ls-verify", "--config", str(cfg)]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["violations"] == 0 and report["trials"] == 20


def test_csv_format(capsys):
    assert main(CERTIFY + ["--format", "csv"]) == 0
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert len(rows) == 1
    assert {"component.emp", "component.kl_excess", "param.n", "kind", "value"} <= set(rows[0])
    assert float(rows[0]["value"]) == evaluate_certificate("pac-bayes-kl", 0.1, 2.0, 200, 0.05, {}).value


def test_config_overrides_flags(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"n": 1000}))
    assert main(CERTIFY + ["--config", str(cfg)]) == 0
    assert json.loads(capsys.readouterr().out)["params"]["n"] == 1000


def test_bad_config(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text("[1, 2]")
    assert main(CERTIFY + ["--config", str(cfg)]) == 2


def test_output_dir_env(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("PBKERNEL_OUTPUT_DIR", str(tmp_path / "reports"))
    assert main(CERTIFY) == 0
    assert capsys.readouterr().out == ""
    assert json.loads((tmp_path / "reports" / "certify-report.json").read_text())["kind"] == "pac-bayes-kl"


def test_explicit_output(tmp_path):
    dest = tmp_path / "out.json"
    assert main(CERTIFY + ["--output", str(dest)]) == 0
    assert json.loads(dest.read_text())["value"] > 0.1


def test_dp_measure_gibbs(world_csv, capsys):
    assert main(["dp-measure", "--world", str(world_csv), "--gamma", "1", "--n", "2"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert 0 < report["epsilon"] <= report["params"]["dp_guarantee"]


def test_dp_measure_kernel(tmp_path, capsys):
    path = tmp_path / "k.csv"
    path.write_text("sample,hypothesis,weight\n0,0,0.5\n0,1,0.5\n1,0,0.25\n1,1,0.75\n")
    assert main(["dp-measure", "--kernel", str(path), "--n", "1", "--atoms", "2", "--hypotheses", "2"]) == 0
    assert json.loads(capsys.readouterr().out)["epsilon"] == pytest.approx(np.log(2), rel=1e-15)


def test_optimize(world_csv, capsys):
    args = ["optimize", "--world", str(world_csv), "--bound", "pac-bayes-kl", "--delta", "0.05",
            "--grid", "temperature=1,5,20", "--sample", "0-1-1"]
    assert main(args) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["best"]["temperature"] in (1.0, 5.0, 20.0)
    assert report["best"]["delta"] == pytest.approx(0.05 / 3, rel=1e-15)


def test_optimize_empty_grid(world_csv):
    args = ["optimize", "--world", str(world_csv), "--bound", "pac-bayes-kl", "--delta", "0.05", "--grid", "temperature="]
    assert main(args) == 2


def test_union_bound_split():
    assert union_bound_split(0.05, 1) == [0.05]
    assert union_bound_split(0.05, 5) == [0.01] * 5


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "pbkernel", *CERTIFY], capture_output=True, text=True)
    assert proc.returncode == 0 and json.loads(proc.stdout)["kind"] == "pac-bayes-kl"

import hashlib
import json
import logging
from pathlib import Path

import pytest
import yaml

from migrantcdr.cli import EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME, load_config, main, parse_config

CONFIG = {
    "seed": 11,
    "generator": {"n_locals": 1200, "n_staying": 150, "n_leaving": 30, "n_hubs": 1, "n_estates": 300},
    "data": {"dir": "data"},
    "experiment": {"learner": {"n_trees": 8}, "early_k": [3, 7, 14],
                   "disentangle_k": [7, 14], "disentangle_t": [14]},
}


def write_config(tmp_path, cfg=CONFIG, name="run.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(cfg), encoding="utf-8")
    return p


def tree_digest(root: Path) -> dict[str, str]:
    return {str(p.relative_to(root)): hashlib.sha256(p.read_bytes()).hexdigest()
            for p in sorted(root.rglob("*")) if p.is_file()}


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg = write_config(root)
    assert main(["synth", "--config", str(cfg), "--out", str(root / "data")]) == EXIT_OK
    return root, cfg


def test_synth_writes_four_files(workspace, capsys):
    root, _ = workspace
    names = sorted(p.name for p in (root / "data").iterdir())
    assert names == ["calls.csv", "estates.csv", "ground_truth.csv", "profiles.csv"]


def test_synth_repeat_identical(workspace, tmp_path):
    root, cfg = workspace
    assert main(["synth", "--config", str(cfg), "--out", str(tmp_path / "again")]) == EXIT_OK
    assert tree_digest(root / "data") == tree_digest(tmp_path / "again")


def test_missing_seed_is_config_error(tmp_path, capsys):
    cfg = write_config(tmp_path, {k: v for k, v in CONFIG.items() if k != "seed"})
    assert main(["synth", "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    assert "seed" in capsys.readouterr().err
    # --seed supplies it
    assert main(["synth", "--config", str(cfg), "--seed", "1", "--out", str(tmp_path / "o")]) == EXIT_OK


@pytest.mark.parametrize("bad", [
    {"seed": 1, "colour": "red"},
    {"seed": 1, "generator": {"n_localz": 3}},
    {"seed": 1, "experiment": {"learner": {"kind": "svm"}}},
    {"seed": 1, "generator": {"seed": 4}},
    {"seed": 1, "cohort": {"week1": [1, 8]}},
])
def test_bad_config_exit_2(tmp_path, bad):
    cfg = write_config(tmp_path, bad)
    assert main(["synth", "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_CONFIG


def test_json_config_and_parse(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"seed": 3, "workers": 2}))
    rc = load_config(str(p))
    assert (rc.seed, rc.workers) == (3, 2)
    assert load_config(None).seed == 0
    assert parse_config({"seed": 1}, tmp_path).base_dir == tmp_path


def test_missing_data_file_exit_2(tmp_path, capsys):
    cfg = write_config(tmp_path, {"seed": 1, "data": {"dir": "nowhere"}})
    assert main(["pipeline", "churn", "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    assert "calls.csv" in capsys.readouterr().err


def test_malformed_rows_strict_exit_1(workspace, tmp_path, capsys):
    root, cfg = workspace
    bad = tmp_path / "data"
    bad.mkdir()
    for n in ("profiles.csv", "estates.csv"):
        (bad / n).write_bytes((root / "data" / n).read_bytes())
    (bad / "calls.csv").write_text("caller,callee,start,end,lat,lon\na,b,1,0,0,0\n")
    args = ["pipeline", "churn", "--data", str(bad), "--config", str(cfg), "--out", str(tmp_path / "o")]
    assert main([*args, "--strict"]) == EXIT_RUNTIME
    assert "ingest" in capsys.readouterr().err


def run_pipeline(root, cfg, out, exp, *extra):
    return main(["pipeline", exp, "--config", str(cfg), "--out", str(out), *extra])


def test_churn_report_shape(workspace, tmp_path, capsys, caplog):
    caplog.set_level(logging.INFO)
    root, cfg = workspace
    assert run_pipeline(root, cfg, tmp_path / "o", "churn") == EXIT_OK
    rep = tmp_path / "o" / "reports" / "LeavingVsStaying"
    lines = (rep / "cv" / "metrics.csv").read_text().splitlines()
    assert len(lines) == 1 + 5 + 1 and lines[-1].startswith("mean,")
    assert (rep / "cv" / "importances.csv").exists() and (rep / "cv" / "summary.txt").exists()
    rows = [l.split(",")[0] for l in (rep / "classifiers" / "metrics.csv").read_text().splitlines()[1:]]
    assert rows == ["random_guess", "logreg", "forest"]
    out = capsys.readouterr()
    assert "churn" in out.out and "stage churn: start" in caplog.text
    labels = (tmp_path / "o" / "labels.csv").read_text().splitlines()
    assert labels[0] == "user,label"
    feats = (tmp_path / "o" / "features.csv").read_text().splitlines()
    assert feats[0].startswith("user,label,window,similar_age,") and len(feats) > 100
    assert "stage featurize: start" in caplog.text


def test_early_one_row_per_k(workspace, tmp_path):
    root, cfg = workspace
    assert run_pipeline(root, cfg, tmp_path / "o", "early") == EXIT_OK
    rows = (tmp_path / "o" / "reports" / "LeavingVsStaying" / "early" / "metrics.csv").read_text().splitlines()
    assert [r.split(",")[0] for r in rows[1:]] == ["3", "7", "14"]


def test_all_twice_identical_and_workers(workspace, tmp_path):
    root, cfg = workspace
    assert run_pipeline(root, cfg, tmp_path / "a", "all") == EXIT_OK
    assert run_pipeline(root, cfg, tmp_path / "b", "all") == EXIT_OK
    assert run_pipeline(root, cfg, tmp_path / "c", "all", "--workers", "4") == EXIT_OK
    a = tree_digest(tmp_path / "a" / "reports")
    assert len(a) == 18
    assert a == tree_digest(tmp_path / "b" / "reports") == tree_digest(tmp_path / "c" / "reports")
    expected = {"MigrantVsLocal/cv", "MigrantVsLocal/ablation", "LeavingVsStaying/cv",
                "LeavingVsStaying/classifiers", "LeavingVsStaying/ablation", "LeavingVsStaying/early",
                "LeavingVsStaying/disentangle", "cohorts/trends"}
    assert {str(Path(k).parent) for k in a} == expected

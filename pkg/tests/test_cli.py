import csv
import json
import xml.etree.ElementTree as ET

import pytest

from truncridge import runner
from truncridge.cli import main
from truncridge.datagen import read_dataset
from truncridge.runner import RESULT_FIELDS, ConfigError, load_config

FAST = ["--n", "60", "90", "120", "--lambda", "0", "1e-4", "1e-2", "--reps", "2"]


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_gen_writes_train_and_test(tmp_path, capsys):
    assert main(["gen", "--out", str(tmp_path), "--n", "30", "40", "--reps", "3", "--seed", "7"]) == 0
    files = sorted(tmp_path.glob("*.csv"))
    assert len(files) == 12
    train = [f for f in files if f.name.startswith("n30_rep1_") and f.name.endswith("_train.csv")]
    ds = read_dataset(train[0])
    assert len(ds) == 30 and ds.f_star is not None
    assert "wrote 12 files" in capsys.readouterr().out


def test_rates_outputs_and_determinism(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["rates", "--out", str(a), *FAST]) == 0
    assert main(["rates", "--out", str(b), *FAST]) == 0
    for name in ("results.csv", "rates_summary.csv", "rate_fit.json", "rates.svg"):
        assert (a / name).read_bytes() == (b / name).read_bytes(), name
    res = rows(a / "results.csv")
    assert list(res[0]) == RESULT_FIELDS
    assert len(res) == 3 * 3 * 2
    assert {r["mode"] for r in res} == {"k_average"}
    assert all(r["elapsed_ms"] == "0" for r in res)
    assert [int(r["n"]) for r in res] == sorted(int(r["n"]) for r in res)
    fit = json.loads((a / "rate_fit.json").read_text())
    assert len(fit["points"]) == 3 and fit["slope"] < 0
    root = ET.parse(a / "rates.svg").getroot()
    assert root.tag.endswith("svg")


def test_seed_changes_results(tmp_path):
    main(["rates", "--out", str(tmp_path / "a"), *FAST, "--seed", "1"])
    main(["rates", "--out", str(tmp_path / "b"), *FAST, "--seed", "2"])
    assert (tmp_path / "a/results.csv").read_text() != (tmp_path / "b/results.csv").read_text()


def test_parallel_matches_serial(tmp_path):
    main(["rates", "--out", str(tmp_path / "s"), *FAST])
    main(["rates", "--out", str(tmp_path / "p"), *FAST, "--jobs", "2"])
    assert (tmp_path / "s/results.csv").read_bytes() == (tmp_path / "p/results.csv").read_bytes()


def test_timing_flag_fills_elapsed(tmp_path):
    main(["rates", "--out", str(tmp_path), *FAST, "--timing"])
    assert any(float(r["elapsed_ms"]) > 0 for r in rows(tmp_path / "results.csv"))


def test_sweep(tmp_path, capsys):
    code = main(["sweep", "--out", str(tmp_path), "--n", "80", "--lambda", "0", "1e-3", "1e-1", "--reps", "2",
                 "--risk-mode", "single_draw"])
    assert code == 0
    res = rows(tmp_path / "sweep_n80.csv")
    assert len(res) == 6 and {r["mode"] for r in res} == {"single_draw"}
    assert (tmp_path / "sweep_n80.svg").exists()
    out = json.loads(capsys.readouterr().out)
    assert out["n"] == 80 and out["best_lambda"] in (0.0, 1e-3, 1e-1)
    assert main(["sweep", "--out", str(tmp_path), "--n", "80", "90"]) == 2


def test_check_exit_codes(tmp_path, capsys):
    assert main(["check", "--out", str(tmp_path)]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 231
    assert all(json.loads(line)["passed"] for line in lines)
    assert (tmp_path / "checks.jsonl").read_text().strip().splitlines() == lines
    assert main(["check", "--inject-fault", "0.5"]) == 1
    failed = [json.loads(line) for line in capsys.readouterr().out.splitlines()]
    assert any(not r["passed"] and r["name"] == "zhdanov_identity" for r in failed)


def test_config_errors(tmp_path, capsys):
    assert main(["rates", "--config", str(tmp_path / "missing.ini")]) == 2
    bad = tmp_path / "bad.ini"
    bad.write_text("[problem]\nb = 2\n")
    assert main(["rates", "--config", str(bad), "--out", str(tmp_path)]) == 2
    bad.write_text("[experiment]\nrisk_mode = median\n")
    assert main(["gen", "--config", str(bad), "--out", str(tmp_path)]) == 2
    assert main(["rates", "--n", "1", "--out", str(tmp_path)]) == 2
    assert "config error" in capsys.readouterr().err


def test_cell_failure_reports_seed(tmp_path, monkeypatch, capsys):
    def boom(*args, **kwargs):
        raise FloatingPointError("injected")

    monkeypatch.setattr(runner, "evaluate_cell", boom)
    assert main(["rates", "--out", str(tmp_path), *FAST]) == 1
    err = capsys.readouterr().err
    assert "injected" in err and f"seed={runner.derive_seed(0, 60, 0)}" in err


def test_config_file_values(tmp_path):
    path = tmp_path / "c.ini"
    path.write_text("[problem]\nb = 1/6\nbeta = 1/4\nepsilon = 0.1\n\n"
                    "[experiment]\nn_grid = 100, 200\nlambda_grid = 0, 0.01\nrepetitions = 3\nseed = 9\n")
    cfg = load_config(path, repetitions=4)
    assert cfg.problem.kernel_order == 6 and cfg.n_grid == [100, 200]
    assert cfg.lambda_grid == [0.0, 0.01] and cfg.repetitions == 4 and cfg.master_seed == 9
    assert cfg.predicted_slope() == pytest.approx(-0.75)
    with pytest.raises(ConfigError):
        load_config(path, lambda_grid=[-1.0])


def test_shipped_configs_load():
    from pathlib import Path

    root = Path(__file__).resolve().parents[1] / "configs"
    for name in ("spline_q8", "spline_q6", "zero_noise", "zero_noise_sweep"):
        cfg = load_config(root / f"{name}.ini")
        assert cfg.label == name

import csv
import os
import shutil

import pytest

from jointdet.cli import frontier_grid, main, run
from jointdet.config import validate

CONFIGS = os.path.join(os.path.dirname(__file__), os.pardir, "configs")
BROKEN = os.path.join(CONFIGS, "broken")


def cfg(name):
    return os.path.join(CONFIGS, name)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.mark.parametrize("name,code", [
    ("empty.yaml", 2), ("prior_sum.yaml", 2), ("negative_entry.yaml", 2),
    ("alpha_range.yaml", 2), ("missing_series.yaml", 2), ("alpha_below_min.yaml", 3),
])
def test_validate_broken_fixtures(name, code, capsys):
    assert main(["validate", "--config", os.path.join(BROKEN, name)]) == code
    assert capsys.readouterr().out.strip()


def test_validate_messages():
    (d,) = validate(os.path.join(BROKEN, "prior_sum.yaml"))
    assert "prior" in d and "0.9" in d
    (d,) = validate(os.path.join(BROKEN, "negative_entry.yaml"))
    assert "row" in d and "column" in d
    assert validate(cfg("instance_a.yaml")) == []


@pytest.mark.parametrize("name", ["instance_a.yaml", "instance_b.yaml", "criteria_demo.yaml",
                                  "changepoint.yaml", "gaussian_mmse.yaml"])
def test_shipped_configs_validate(name):
    assert validate(cfg(name)) == []


def test_run_empty_config_exit_2(tmp_path):
    assert main(["run", "--config", os.path.join(BROKEN, "empty.yaml"),
                 "--output", str(tmp_path)]) == 2


def test_run_missing_file_exit_2(tmp_path):
    assert main(["run", "--config", str(tmp_path / "nope.yaml")]) == 2


def test_run_unreachable_exit_3(tmp_path, capsys):
    code = main(["run", "--config", cfg("instance_b.yaml"), "--alpha", "0.2",
                 "--output", str(tmp_path)])
    assert code == 3
    assert "0.3" in capsys.readouterr().err


def test_frontier_instance_a(tmp_path):
    assert main(["run", "--config", cfg("instance_a.yaml"), "--output", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "frontier.csv")
    assert list(rows[0]) == ["alpha", "lambda", "gamma", "c1_optimal", "c1_classical_glr"]
    assert len(rows) == 20
    (row,) = [r for r in rows if abs(float(r["alpha"]) - 0.7) < 1e-12]
    assert float(row["lambda"]) == pytest.approx(0.8, abs=1e-12)
    assert float(row["gamma"]) == pytest.approx(0.4, abs=1e-12)
    assert float(row["c1_optimal"]) == pytest.approx(0.39, abs=1e-12)
    for name in ("calibration.csv", "report.txt"):
        assert (tmp_path / name).exists()


def test_frontier_grid_endpoints():
    g = frontier_grid(0.5)
    assert len(g) == 20 and g[-1] == 1.0 and g[9] == pytest.approx(0.75)


def test_byte_identical_reruns(tmp_path):
    for out in ("a", "b"):
        assert main(["run", "--config", cfg("changepoint.yaml"), "--samples", "2000",
                     "--output", str(tmp_path / out)]) == 0
    for name in ("calibration.csv", "changepoint.csv", "report.txt"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_full_precision_fields(tmp_path):
    main(["run", "--config", cfg("instance_a.yaml"), "--output", str(tmp_path)])
    text = (tmp_path / "frontier.csv").read_text()
    assert "0.90000000000000002" in text  # 17 significant digits, not the shortest repr


def test_calibrate_instance_b(tmp_path):
    assert main(["run", "--config", cfg("instance_b.yaml"), "--output", str(tmp_path)]) == 0
    (row,) = read_csv(tmp_path / "calibration.csv")
    assert float(row["target_alpha"]) == 0.5
    assert float(row["lambda"]) == pytest.approx(1.6, abs=1e-12)
    assert float(row["gamma"]) == pytest.approx(0.8, abs=1e-12)


def test_criteria_demo(tmp_path):
    assert main(["run", "--config", cfg("criteria_demo.yaml"), "--output", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "criteria.csv")
    at1 = [r for r in rows if float(r["point"]) == 1.0][0]
    for key in ("mmse_estimate", "map_estimate", "median_estimate"):
        assert float(at1[key]) == pytest.approx(0.5, abs=1e-4)


def test_changepoint_series_file(tmp_path):
    src = os.path.join(tmp_path, "cfg")
    shutil.copytree(CONFIGS, src)
    series = tmp_path / "cfg" / "series.csv"
    series.write_text("\n".join(["0.0"] * 60 + ["3.0"] * 40) + "\n")
    path = tmp_path / "cfg" / "cp_file.yaml"
    path.write_text((tmp_path / "cfg" / "changepoint.yaml").read_text()
                    + "series: series.csv\n")
    report = run(str(path), {"samples": 2000, "output": str(tmp_path / "out")})
    assert report.verdict.decision == 1 and report.verdict.tau_hat == 60


def test_changepoint_no_change_mostly_accepts(tmp_path):
    zeros = 0
    for seed in range(100):
        report = run(cfg("changepoint.yaml"),
                     {"seed": seed, "samples": 4000, "output": str(tmp_path)})
        zeros += report.verdict.decision == 0
    assert zeros >= 90
